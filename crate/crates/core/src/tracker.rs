//! Rao-Blackwellized particle filter over data-association hypotheses.
//!
//! Each particle carries its own set of per-person Kalman tracks. Per frame,
//! every particle predicts its tracks, scores the detections, then sweeps the
//! detections in a fixed order sampling one column per detection from the
//! association row restricted to still-free tracks (the new-track column is
//! always free). The importance-weight increment of each draw is the log of
//! the row mass that was still available.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::appearance::update_reference;
use crate::association::build_matrix;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::SequenceData;
use crate::motion::{init_track, predict_to, update};
use crate::resample::{effective_sample_size, normalized_weights, systematic_resample};
use crate::scalar::{log_sum_exp, Scalar};
use crate::types::{BBox, Detection, DetectionAssignment, Particle, Target, TrackStatus};

/// Confirmed tracks reported for one frame, sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutput<T> {
    pub frame: u64,
    pub entries: Vec<(u64, BBox<T>)>,
}

/// Stream tag for the resampling draw, distinct from every particle index.
const RESAMPLE_STREAM: u64 = u64::MAX;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent random stream per `(seed, stream, frame)`.
pub(crate) fn stream_rng(seed: u64, stream: u64, frame: u64) -> ChaCha8Rng {
    let key = splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ frame);
    ChaCha8Rng::seed_from_u64(key)
}

/// Detection processing order: descending confidence, then index.
pub fn processing_order<T: Scalar>(dets: &[Detection<T>]) -> Vec<Detection<T>> {
    let mut ordered = dets.to_vec();
    ordered.sort_by(|a, b| {
        b.confidence
            .partial_cmp(&a.confidence)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.index_in_frame.cmp(&b.index_in_frame))
    });
    ordered
}

fn choose_column<T: Scalar>(row: &[T], taken: &[bool], deterministic: bool, rng: &mut ChaCha8Rng) -> (usize, T) {
    let new_col = row.len() - 1;
    let available = |j: usize| j == new_col || !taken[j];
    let mass: T = (0..row.len()).filter(|&j| available(j)).map(|j| row[j]).sum();
    if !(mass > T::zero()) {
        return (new_col, T::min_positive_value());
    }
    if deterministic {
        // scanning right to left with >= leaves the lowest column among ties
        let mut best = new_col;
        for j in (0..new_col).filter(|&j| !taken[j]).rev() {
            if row[j] >= row[best] {
                best = j;
            }
        }
        return (best, mass);
    }
    let u = T::lit(rng.random::<f64>()) * mass;
    let mut cumulative = T::zero();
    let mut last = new_col;
    for j in (0..row.len()).filter(|&j| available(j)) {
        if row[j] <= T::zero() {
            continue;
        }
        cumulative += row[j];
        last = j;
        if u < cumulative {
            return (j, mass);
        }
    }
    (last, mass)
}

/// Advances one particle through one frame. `ordered` must already be in
/// processing order.
fn advance_particle<T: Scalar>(
    mut particle: Particle<T>,
    stream: u64,
    ordered: &[Detection<T>],
    frame: u64,
    cfg: &RunConfig<T>,
) -> Result<Particle<T>> {
    let mp = &cfg.motion;
    let tp = &cfg.tracker;

    let mut tracks: Vec<_> = particle.tracks().iter().map(|t| predict_to(t, frame, mp)).collect();
    let matrix = build_matrix(frame, ordered, &tracks, mp, &cfg.appearance, &cfg.association)?;

    let mut rng = stream_rng(tp.rng_seed, stream, frame);
    let mut taken = vec![false; tracks.len()];
    let mut assignments = Vec::with_capacity(ordered.len());
    let mut log_weight = particle.log_weight();

    for (i, det) in ordered.iter().enumerate() {
        let (col, mass) = choose_column(matrix.row(i), &taken, tp.deterministic, &mut rng);
        log_weight += mass.ln();
        let target = if col == matrix.new_track_column() {
            let id = particle.take_id();
            let mut track = init_track(det, mp, id)?;
            if track.hits() >= tp.confirm_hits {
                track.transition(TrackStatus::Confirmed)?;
            }
            tracks.push(track);
            Target::NewTrack(id)
        } else {
            taken[col] = true;
            let mut track = update(&tracks[col], &det.bbox, mp)?;
            if let Some(g) = &det.feature {
                track = update_reference(&track, g, &cfg.appearance)?;
            }
            track.record_hit();
            if track.status() == TrackStatus::Tentative && track.hits() >= tp.confirm_hits {
                track.transition(TrackStatus::Confirmed)?;
            }
            tracks[col] = track;
            Target::Track(matrix.track_ids()[col])
        };
        assignments.push(DetectionAssignment {
            index_in_frame: det.index_in_frame,
            target,
        });
    }

    for (track, _) in tracks.iter_mut().zip(&taken).filter(|(_, &t)| !t) {
        track.record_miss();
        if track.misses() >= tp.delete_misses {
            track.transition(TrackStatus::Deleted)?;
        }
    }
    tracks.retain(|t| t.is_live());

    *particle.tracks_mut() = tracks;
    particle.set_log_weight(log_weight);
    particle.set_last_assignments(assignments);
    Ok(particle)
}

/// Index of the highest-weight particle (first on ties).
pub fn map_particle<T: Scalar>(particles: &[Particle<T>]) -> usize {
    let mut best = 0;
    for (i, p) in particles.iter().enumerate() {
        if p.log_weight() > particles[best].log_weight() {
            best = i;
        }
    }
    best
}

fn frame_output<T: Scalar>(particle: &Particle<T>, frame: u64) -> FrameOutput<T> {
    let mut entries: Vec<_> = particle
        .tracks()
        .iter()
        .filter(|t| t.status() == TrackStatus::Confirmed && t.misses() == 0)
        .map(|t| (t.id(), t.bbox()))
        .collect();
    entries.sort_by_key(|(id, _)| *id);
    FrameOutput { frame, entries }
}

/// Runs one filter step over all particles.
pub fn step<T: Scalar>(
    particles: Vec<Particle<T>>,
    dets: &[Detection<T>],
    frame: u64,
    cfg: &RunConfig<T>,
) -> Result<(Vec<Particle<T>>, FrameOutput<T>)> {
    if particles.is_empty() {
        return Err(Error::invalid("particles", "particle set is empty"));
    }
    if let Some(d) = dets.iter().find(|d| d.frame != frame) {
        return Err(Error::FrameMismatch {
            expected: frame,
            found: d.frame,
        });
    }
    let ordered = processing_order(dets);

    let mut particles = particles
        .into_par_iter()
        .enumerate()
        .map(|(k, p)| advance_particle(p, k as u64, &ordered, frame, cfg))
        .collect::<Result<Vec<_>>>()?;

    let log_weights: Vec<T> = particles.iter().map(Particle::log_weight).collect();
    let norm = log_sum_exp(&log_weights);
    for p in &mut particles {
        let w = p.log_weight() - norm;
        p.set_log_weight(w);
    }

    // Output is read before resampling so it reflects this frame's weights.
    let output = frame_output(&particles[map_particle(&particles)], frame);

    let n = particles.len();
    let nf = T::from_usize(n).expect("particle count representable");
    let log_weights: Vec<T> = particles.iter().map(Particle::log_weight).collect();
    if n > 1 && effective_sample_size(&log_weights) < cfg.tracker.resample_ess_fraction * nf {
        let weights = normalized_weights(&log_weights);
        let u0 = T::lit(stream_rng(cfg.tracker.rng_seed, RESAMPLE_STREAM, frame).random::<f64>());
        let parents = systematic_resample(&weights, u0);
        let uniform = -nf.ln();
        particles = parents
            .into_iter()
            .map(|i| {
                let mut p = particles[i].clone();
                p.set_log_weight(uniform);
                p
            })
            .collect();
    }
    Ok((particles, output))
}

/// Runs the filter over every frame of a sequence, starting from empty particles.
pub fn run_sequence<T: Scalar>(seq: &SequenceData<T>, cfg: &RunConfig<T>) -> Result<Vec<FrameOutput<T>>> {
    cfg.validate()?;
    let Some((first, last)) = seq.frame_range() else {
        return Ok(Vec::new());
    };
    let mut particles = vec![Particle::empty(); cfg.tracker.num_particles];
    let mut outputs = Vec::with_capacity((last - first + 1) as usize);
    for frame in first..=last {
        let (next, out) = step(particles, seq.detections_in(frame), frame, cfg)?;
        particles = next;
        outputs.push(out);
    }
    Ok(outputs)
}
