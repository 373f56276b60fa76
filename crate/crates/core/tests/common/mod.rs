//! Independent reference implementations shared by the oracle tests and the
//! acceptance target. Nothing here calls into the tracker's own math.

#![allow(dead_code)]

use std::collections::HashMap;

use nalgebra::{Matrix4, Matrix4x6, Matrix6, Vector4, Vector6};
use reidtrack::io::GtRecord;
use reidtrack::synth::{generate, ScenarioKind, ScenarioSpec};
use reidtrack::tracker::FrameOutput;
use reidtrack::types::{BBox, Detection};
use reidtrack::{AssociationMode, RunConfig, SequenceData};

pub fn boxed(cx: f64, cy: f64, w: f64, h: f64) -> BBox<f64> {
    BBox::new(cx, cy, w, h).unwrap()
}

fn overlap(a: &BBox<f64>, b: &BBox<f64>) -> f64 {
    let iw = (a.cx + a.w / 2.0).min(b.cx + b.w / 2.0) - (a.cx - a.w / 2.0).max(b.cx - b.w / 2.0);
    let ih = (a.cy + a.h / 2.0).min(b.cy + b.h / 2.0) - (a.cy - a.h / 2.0).max(b.cy - b.h / 2.0);
    let inter = iw.max(0.0) * ih.max(0.0);
    inter / (a.w * a.h + b.w * b.h - inter)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Counts {
    pub fp: usize,
    pub fn_: usize,
    pub idsw: usize,
    pub matches: usize,
    pub gt: usize,
}

/// Best matching among `pairs` by exhaustive search: most pairs, then most IoU.
fn best_subset(pairs: &[(usize, usize, f64)]) -> Vec<(usize, usize, f64)> {
    fn go(
        k: usize,
        pairs: &[(usize, usize, f64)],
        rows: &mut Vec<usize>,
        cols: &mut Vec<usize>,
        cur: &mut Vec<(usize, usize, f64)>,
        best: &mut (usize, f64, Vec<(usize, usize, f64)>),
    ) {
        if k == pairs.len() {
            let total: f64 = cur.iter().map(|p| p.2).sum();
            if cur.len() > best.0 || (cur.len() == best.0 && total > best.1) {
                *best = (cur.len(), total, cur.clone());
            }
            return;
        }
        go(k + 1, pairs, rows, cols, cur, best);
        let (r, c, _) = pairs[k];
        if !rows.contains(&r) && !cols.contains(&c) {
            rows.push(r);
            cols.push(c);
            cur.push(pairs[k]);
            go(k + 1, pairs, rows, cols, cur, best);
            cur.pop();
            cols.pop();
            rows.pop();
        }
    }
    let mut best = (0, f64::NEG_INFINITY, Vec::new());
    go(0, pairs, &mut Vec::new(), &mut Vec::new(), &mut Vec::new(), &mut best);
    best.2
}

/// CLEAR MOT counts by enumerating every admissible matching per frame.
pub fn brute_force_counts(gt: &[GtRecord<f64>], hyp: &[FrameOutput<f64>], thr: f64) -> Counts {
    let mut frames: Vec<u64> = gt.iter().map(|g| g.frame).chain(hyp.iter().map(|h| h.frame)).collect();
    frames.sort_unstable();
    frames.dedup();

    let mut c = Counts { fp: 0, fn_: 0, idsw: 0, matches: 0, gt: 0 };
    let mut prev: HashMap<u64, u64> = HashMap::new();
    let mut last: HashMap<u64, u64> = HashMap::new();
    for f in frames {
        let gts: Vec<(u64, BBox<f64>)> = gt.iter().filter(|g| g.frame == f).map(|g| (g.id, g.bbox)).collect();
        let hyps: Vec<(u64, BBox<f64>)> = hyp
            .iter()
            .filter(|h| h.frame == f)
            .flat_map(|h| h.entries.iter().copied())
            .collect();

        let mut kept = Vec::new();
        for (gi, (gid, gb)) in gts.iter().enumerate() {
            if let Some(hi) = prev.get(gid).and_then(|h| hyps.iter().position(|(id, _)| id == h)) {
                if overlap(gb, &hyps[hi].1) >= thr {
                    kept.push((gi, hi));
                }
            }
        }
        let mut candidates = Vec::new();
        for (gi, (_, gb)) in gts.iter().enumerate() {
            for (hi, (_, hb)) in hyps.iter().enumerate() {
                let v = overlap(gb, hb);
                let free = !kept.iter().any(|&(g, h)| g == gi || h == hi);
                if free && v >= thr {
                    candidates.push((gi, hi, v));
                }
            }
        }
        let mut all: Vec<(usize, usize)> = kept;
        all.extend(best_subset(&candidates).into_iter().map(|(g, h, _)| (g, h)));

        prev.clear();
        for &(gi, hi) in &all {
            let (gid, hid) = (gts[gi].0, hyps[hi].0);
            if last.get(&gid).is_some_and(|&h| h != hid) {
                c.idsw += 1;
            }
            last.insert(gid, hid);
            prev.insert(gid, hid);
        }
        c.matches += all.len();
        c.fp += hyps.len() - all.len();
        c.fn_ += gts.len() - all.len();
        c.gt += gts.len();
    }
    c
}

/// Textbook Kalman filter over `(cx, cy, vx, vy, w, h)` on nalgebra types.
#[derive(Debug, Clone)]
pub struct RefKalman {
    pub x: Vector6<f64>,
    pub p: Matrix6<f64>,
}

pub struct RefNoise {
    pub q: [f64; 3],
    pub r: [f64; 2],
    pub v0: f64,
}

impl RefNoise {
    pub fn from_config(cfg: &RunConfig) -> Self {
        let m = &cfg.motion;
        RefNoise {
            q: [m.process_noise_pos, m.process_noise_vel, m.process_noise_size],
            r: [m.meas_noise_pos, m.meas_noise_size],
            v0: m.initial_vel_var,
        }
    }

    fn h() -> Matrix4x6<f64> {
        let mut h = Matrix4x6::zeros();
        h[(0, 0)] = 1.0;
        h[(1, 1)] = 1.0;
        h[(2, 4)] = 1.0;
        h[(3, 5)] = 1.0;
        h
    }

    fn r(&self) -> Matrix4<f64> {
        Matrix4::from_diagonal(&Vector4::new(self.r[0], self.r[0], self.r[1], self.r[1]))
    }
}

fn measurement(b: &BBox<f64>) -> Vector4<f64> {
    Vector4::new(b.cx, b.cy, b.w, b.h)
}

impl RefKalman {
    pub fn start(b: &BBox<f64>, n: &RefNoise) -> Self {
        RefKalman {
            x: Vector6::new(b.cx, b.cy, 0.0, 0.0, b.w, b.h),
            p: Matrix6::from_diagonal(&Vector6::new(n.r[0], n.r[0], n.v0, n.v0, n.r[1], n.r[1])),
        }
    }

    pub fn predict(&mut self, dt: f64, n: &RefNoise) {
        let mut f = Matrix6::identity();
        f[(0, 2)] = dt;
        f[(1, 3)] = dt;
        let q = Matrix6::from_diagonal(&Vector6::new(n.q[0], n.q[0], n.q[1], n.q[1], n.q[2], n.q[2])) * dt;
        self.x = f * self.x;
        self.p = f * self.p * f.transpose() + q;
    }

    pub fn log_likelihood(&self, b: &BBox<f64>, n: &RefNoise) -> f64 {
        let h = RefNoise::h();
        let s = h * self.p * h.transpose() + n.r();
        let y = measurement(b) - h * self.x;
        let m2 = (y.transpose() * s.try_inverse().unwrap() * y)[(0, 0)];
        -0.5 * (4.0 * (2.0 * std::f64::consts::PI).ln() + s.determinant().ln() + m2)
    }

    pub fn update(&mut self, b: &BBox<f64>, n: &RefNoise) {
        let h = RefNoise::h();
        let s = h * self.p * h.transpose() + n.r();
        let k = self.p * h.transpose() * s.try_inverse().unwrap();
        self.x += k * (measurement(b) - h * self.x);
        self.p = (Matrix6::identity() - k * h) * self.p;
        self.p = (self.p + self.p.transpose()) * 0.5;
    }

    pub fn bbox(&self) -> BBox<f64> {
        boxed(self.x[0], self.x[1], self.x[4].max(1e-6), self.x[5].max(1e-6))
    }
}

struct RefTrack {
    id: u64,
    kf: RefKalman,
    hits: u32,
    misses: u32,
    confirmed: bool,
}

/// Greedy nearest-neighbor tracker: detections by descending confidence each
/// take the free track with the highest likelihood, or start a new track when
/// none beats the birth density.
pub fn greedy_reference(seq: &SequenceData, cfg: &RunConfig) -> Vec<FrameOutput<f64>> {
    assert_eq!(cfg.association.mode, AssociationMode::PosOnly);
    let noise = RefNoise::from_config(cfg);
    let tp = &cfg.tracker;
    let birth = cfg.association.new_track_log_density;
    let mut tracks: Vec<RefTrack> = Vec::new();
    let mut next_id = 1;
    let mut out = Vec::new();
    let Some((first, last)) = seq.frame_range() else {
        return out;
    };
    for frame in first..=last {
        for t in &mut tracks {
            t.kf.predict(1.0, &noise);
        }
        let mut dets: Vec<&Detection<f64>> = seq.detections_in(frame).iter().collect();
        dets.sort_by(|a, b| b.confidence.total_cmp(&a.confidence).then(a.index_in_frame.cmp(&b.index_in_frame)));

        let existing = tracks.len();
        let mut taken = vec![false; existing];
        for d in dets {
            let mut best: Option<(usize, f64)> = None;
            for j in (0..existing).filter(|&j| !taken[j]) {
                let ll = tracks[j].kf.log_likelihood(&d.bbox, &noise);
                if best.is_none_or(|(_, b)| ll > b) {
                    best = Some((j, ll));
                }
            }
            match best {
                Some((j, ll)) if ll >= birth => {
                    taken[j] = true;
                    let t = &mut tracks[j];
                    t.kf.update(&d.bbox, &noise);
                    t.hits += 1;
                    t.misses = 0;
                    t.confirmed |= t.hits >= tp.confirm_hits;
                }
                _ => {
                    tracks.push(RefTrack {
                        id: next_id,
                        kf: RefKalman::start(&d.bbox, &noise),
                        hits: 1,
                        misses: 0,
                        confirmed: tp.confirm_hits <= 1,
                    });
                    next_id += 1;
                }
            }
        }
        for (t, _) in tracks.iter_mut().zip(&taken).filter(|(_, &k)| !k) {
            t.misses += 1;
        }
        tracks.retain(|t| t.misses < tp.delete_misses);

        let mut entries: Vec<(u64, BBox<f64>)> = tracks
            .iter()
            .filter(|t| t.confirmed && t.misses == 0)
            .map(|t| (t.id, t.kf.bbox()))
            .collect();
        entries.sort_by_key(|e| e.0);
        out.push(FrameOutput { frame, entries });
    }
    out
}

pub fn noiseless(kind: ScenarioKind, seed: u64) -> SequenceData {
    let spec = ScenarioSpec {
        kind,
        seed,
        det_noise_pos: 0.0,
        det_dropout: 0.0,
        clutter_rate: 0.0,
        ..Default::default()
    };
    generate(&spec).unwrap().into_sequence().unwrap()
}

pub fn single_particle_posonly() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.association.mode = AssociationMode::PosOnly;
    cfg.tracker.num_particles = 1;
    cfg.tracker.deterministic = true;
    cfg
}
