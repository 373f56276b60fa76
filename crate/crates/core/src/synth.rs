//! Seeded synthetic scenarios: ground-truth paths, noisy detections and
//! identity-conditioned appearance features.
//!
//! The frame is 1920×1080 and every person is a 40×100 box.

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::io::{GtRecord, SequenceData};
use crate::scalar::Scalar;
use crate::types::{BBox, Detection, FeatureVec};

pub const FRAME_WIDTH: f64 = 1920.0;
pub const FRAME_HEIGHT: f64 = 1080.0;
pub const BOX_WIDTH: f64 = 40.0;
pub const BOX_HEIGHT: f64 = 100.0;

const CENTROID_ATTEMPTS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    /// Two people on shallow converging paths that cross mid-sequence.
    Crossing,
    /// Two people walking in opposite directions; one is hidden for a window
    /// while the other passes the spot.
    Occlusion,
    /// Two people walking side by side.
    Parallel,
    /// `n` people on random straight paths.
    Crowd(usize),
}

impl ScenarioKind {
    pub fn identities(&self) -> usize {
        match self {
            ScenarioKind::Crowd(n) => *n,
            _ => 2,
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioKind::Crossing => f.write_str("crossing"),
            ScenarioKind::Occlusion => f.write_str("occlusion"),
            ScenarioKind::Parallel => f.write_str("parallel"),
            ScenarioKind::Crowd(n) => write!(f, "crowd({n})"),
        }
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    /// `crossing`, `occlusion`, `parallel`, `crowd` (8 people) or `crowd:N`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "crossing" => Ok(ScenarioKind::Crossing),
            "occlusion" => Ok(ScenarioKind::Occlusion),
            "parallel" => Ok(ScenarioKind::Parallel),
            "crowd" => Ok(ScenarioKind::Crowd(8)),
            _ => lower
                .strip_prefix("crowd:")
                .and_then(|n| n.parse().ok())
                .map(ScenarioKind::Crowd)
                .ok_or_else(|| Error::invalid("scenario kind", format!("unknown kind '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub frames: u64,
    /// Standard deviation of the isotropic center noise, pixels.
    pub det_noise_pos: f64,
    pub det_dropout: f64,
    /// Expected false detections per frame.
    pub clutter_rate: f64,
    pub feature_dim: usize,
    /// Per-component standard deviation of feature noise.
    pub feature_noise: f64,
    /// Minimum pairwise distance between identity centroids on the unit sphere.
    pub identity_separation: f64,
    /// Length of the hidden window in the occlusion scenario.
    pub occlusion_frames: u64,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            kind: ScenarioKind::Crossing,
            frames: 120,
            det_noise_pos: 2.0,
            det_dropout: 0.05,
            clutter_rate: 0.0,
            feature_dim: 32,
            feature_noise: 0.05,
            identity_separation: 0.8,
            occlusion_frames: 15,
            seed: 0,
        }
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::invalid("scenario", reason));
        if self.frames < 2 {
            return bad(format!("frames must be at least 2, got {}", self.frames));
        }
        if !(0.0..=1.0).contains(&self.det_dropout) {
            return bad(format!("det_dropout {} outside [0, 1]", self.det_dropout));
        }
        if !(self.det_noise_pos >= 0.0 && self.det_noise_pos.is_finite()) {
            return bad("det_noise_pos must be non-negative".into());
        }
        if !(self.clutter_rate >= 0.0 && self.clutter_rate.is_finite()) {
            return bad("clutter_rate must be non-negative".into());
        }
        if self.feature_dim == 0 {
            return bad("feature_dim must be positive".into());
        }
        if !(self.feature_noise >= 0.0 && self.feature_noise.is_finite()) {
            return bad("feature_noise must be non-negative".into());
        }
        if !(0.0..=2.0).contains(&self.identity_separation) {
            return bad(format!("identity_separation {} outside [0, 2]", self.identity_separation));
        }
        if self.kind.identities() == 0 {
            return bad("crowd needs at least one person".into());
        }
        if self.kind == ScenarioKind::Occlusion && self.occlusion_frames + 2 > self.frames {
            return bad("occlusion window longer than the sequence".into());
        }
        Ok(())
    }
}

/// Generated ground truth and detections.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    pub ground_truth: Vec<GtRecord<T>>,
    pub detections: Vec<Detection<T>>,
    /// Ground-truth id of each detection, `None` for clutter.
    pub detection_sources: Vec<Option<u64>>,
    /// Set for the occlusion scenario only.
    pub occlusion: Option<Occlusion>,
}

/// Identity whose detections are suppressed, and the frames it is hidden in.
#[derive(Debug, Clone, PartialEq)]
pub struct Occlusion {
    pub id: u64,
    pub frames: RangeInclusive<u64>,
}

impl<T: Scalar> Scenario<T> {
    pub fn into_sequence(self) -> Result<SequenceData<T>> {
        SequenceData::new(self.detections, Some(self.ground_truth))
    }
}

/// Straight constant-velocity path: center at frame `f` is `origin + velocity·(f - 1)`.
#[derive(Debug, Clone, Copy)]
struct Path {
    origin: (f64, f64),
    velocity: (f64, f64),
}

impl Path {
    fn through(at_frame: f64, point: (f64, f64), velocity: (f64, f64)) -> Self {
        Path {
            origin: (point.0 - velocity.0 * (at_frame - 1.0), point.1 - velocity.1 * (at_frame - 1.0)),
            velocity,
        }
    }

    fn between(start: (f64, f64), end: (f64, f64), frames: u64) -> Self {
        let span = (frames - 1) as f64;
        Path {
            origin: start,
            velocity: ((end.0 - start.0) / span, (end.1 - start.1) / span),
        }
    }

    fn at(&self, frame: u64) -> (f64, f64) {
        let t = (frame - 1) as f64;
        (self.origin.0 + self.velocity.0 * t, self.origin.1 + self.velocity.1 * t)
    }
}

/// Frame at which the two crossing paths coincide.
pub fn crossing_frame(frames: u64) -> u64 {
    frames / 2 + 1
}

fn paths(spec: &ScenarioSpec, rng: &mut ChaCha8Rng) -> Vec<Path> {
    let n = spec.frames;
    let span = (n - 1) as f64;
    let (cx, cy) = (FRAME_WIDTH / 2.0, FRAME_HEIGHT / 2.0);
    match spec.kind {
        ScenarioKind::Crossing => {
            // Same heading, slowly converging in y; they meet at the crossing frame.
            let c = crossing_frame(n) as f64;
            let vx = 900.0 / span;
            let vy = 120.0 / span;
            vec![
                Path::through(c, (cx, cy), (vx, vy)),
                Path::through(c, (cx, cy), (vx, -vy)),
            ]
        }
        ScenarioKind::Occlusion => {
            let c = crossing_frame(n) as f64;
            let v = 900.0 / span;
            vec![
                Path::through(c, (cx, cy), (v, 0.0)),
                Path::through(c, (cx, cy + 30.0), (-v, 0.0)),
            ]
        }
        ScenarioKind::Parallel => {
            let start = FRAME_HEIGHT / 2.0 - 300.0;
            let end = FRAME_HEIGHT / 2.0 + 300.0;
            vec![
                Path::between((cx - 25.0, start), (cx - 25.0, end), n),
                Path::between((cx + 25.0, start), (cx + 25.0, end), n),
            ]
        }
        ScenarioKind::Crowd(k) => {
            let (x0, x1) = (BOX_WIDTH / 2.0, FRAME_WIDTH - BOX_WIDTH / 2.0);
            let (y0, y1) = (BOX_HEIGHT / 2.0, FRAME_HEIGHT - BOX_HEIGHT / 2.0);
            (0..k)
                .map(|_| {
                    let a = (rng.random_range(x0..x1), rng.random_range(y0..y1));
                    let b = (rng.random_range(x0..x1), rng.random_range(y0..y1));
                    Path::between(a, b, n)
                })
                .collect()
        }
    }
}

fn random_unit(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Unit-sphere centroids with pairwise distance at least `separation`.
pub fn place_centroids(count: usize, dim: usize, separation: f64, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > CENTROID_ATTEMPTS {
            return Err(Error::CentroidPlacement(format!(
                "{count} identities at separation {separation} in dimension {dim}"
            )));
        }
        let c = random_unit(dim, rng);
        if out.iter().all(|o| distance(o, &c) >= separation) {
            out.push(c);
        }
    }
    Ok(out)
}

/// Centroid plus per-component Gaussian noise, renormalized.
pub fn sample_feature(centroid: &[f64], noise: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let normal = Normal::new(0.0, noise.max(0.0)).expect("valid noise");
    loop {
        let v: Vec<f64> = centroid.iter().map(|c| c + normal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn to_box<T: Scalar>(cx: f64, cy: f64) -> BBox<T> {
    BBox::new(T::lit(cx), T::lit(cy), T::lit(BOX_WIDTH), T::lit(BOX_HEIGHT)).expect("synthetic box valid")
}

pub fn generate<T: Scalar>(spec: &ScenarioSpec) -> Result<Scenario<T>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let people = paths(spec, &mut rng);
    let centroids = place_centroids(people.len(), spec.feature_dim, spec.identity_separation, &mut rng)?;

    let occlusion = (spec.kind == ScenarioKind::Occlusion).then(|| {
        let start = crossing_frame(spec.frames) - spec.occlusion_frames / 2;
        Occlusion {
            id: 1,
            frames: start..=start + spec.occlusion_frames - 1,
        }
    });

    let noise = Normal::new(0.0, spec.det_noise_pos).expect("valid noise");
    let clutter = (spec.clutter_rate > 0.0).then(|| Poisson::new(spec.clutter_rate).expect("positive rate"));

    let mut ground_truth = Vec::new();
    let mut detections = Vec::new();
    let mut detection_sources = Vec::new();

    for frame in 1..=spec.frames {
        let mut frame_dets: Vec<(Detection<T>, Option<u64>)> = Vec::new();
        for (k, path) in people.iter().enumerate() {
            let id = k as u64 + 1;
            let (x, y) = path.at(frame);
            let hidden = occlusion.as_ref().is_some_and(|o| o.id == id && o.frames.contains(&frame));
            ground_truth.push(GtRecord {
                frame,
                id,
                bbox: to_box(x, y),
                visibility: if hidden { T::zero() } else { T::one() },
            });
            // draw every random quantity whether or not the detection survives,
            // so spec tweaks do not reshuffle unrelated draws
            let dx: f64 = noise.sample(&mut rng);
            let dy: f64 = noise.sample(&mut rng);
            let dropped = rng.random::<f64>() < spec.det_dropout;
            let conf = rng.random_range(0.5..1.0);
            let feature = sample_feature(&centroids[k], spec.feature_noise, &mut rng);
            if hidden || dropped {
                continue;
            }
            let det = Detection::new(frame, 0, to_box(x + dx, y + dy), T::lit(conf))
                .with_feature(FeatureVec::new(feature.into_iter().map(T::lit).collect())?);
            frame_dets.push((det, Some(id)));
        }
        if let Some(poisson) = &clutter {
            let count = poisson.sample(&mut rng) as usize;
            for _ in 0..count {
                let x = rng.random_range(BOX_WIDTH / 2.0..FRAME_WIDTH - BOX_WIDTH / 2.0);
                let y = rng.random_range(BOX_HEIGHT / 2.0..FRAME_HEIGHT - BOX_HEIGHT / 2.0);
                let conf = rng.random_range(0.1..0.5);
                frame_dets.push((Detection::new(frame, 0, to_box(x, y), T::lit(conf)), None));
            }
        }
        frame_dets.shuffle(&mut rng);
        for (i, (mut det, source)) in frame_dets.into_iter().enumerate() {
            det.index_in_frame = i;
            detections.push(det);
            detection_sources.push(source);
        }
    }

    Ok(Scenario {
        ground_truth,
        detections,
        detection_sources,
        occlusion,
    })
}
