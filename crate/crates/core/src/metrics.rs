//! CLEAR MOT evaluation: MOTA, MOTP, false positives, misses, ID switches.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::hungarian::max_weight_matching;
use crate::io::GtRecord;
use crate::scalar::Scalar;
use crate::tracker::FrameOutput;
use crate::types::BBox;

/// Intersection over union of two boxes.
pub fn iou<T: Scalar>(a: &BBox<T>, b: &BBox<T>) -> T {
    let iw = (a.right().min(b.right()) - a.left().max(b.left())).max(T::zero());
    let ih = (a.bottom().min(b.bottom()) - a.top().max(b.top())).max(T::zero());
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union > T::zero() {
        (inter / union).min(T::one())
    } else {
        T::zero()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub mota: f64,
    /// Mean IoU of matched pairs; zero when nothing matched.
    pub motp: f64,
    pub fp: usize,
    pub fn_: usize,
    pub id_switches: usize,
    pub gt_total: usize,
    pub matches_total: usize,
}

impl EvalReport {
    /// `1 - (fp + fn + idsw) / gt`.
    pub fn mota_from_counts(fp: usize, fn_: usize, id_switches: usize, gt_total: usize) -> Result<f64> {
        if gt_total == 0 {
            return Err(Error::EmptyGroundTruth);
        }
        Ok(1.0 - (fp + fn_ + id_switches) as f64 / gt_total as f64)
    }

    pub fn from_counts(
        fp: usize,
        fn_: usize,
        id_switches: usize,
        gt_total: usize,
        matches_total: usize,
        iou_sum: f64,
    ) -> Result<Self> {
        let mota = Self::mota_from_counts(fp, fn_, id_switches, gt_total)?;
        let motp = if matches_total > 0 {
            iou_sum / matches_total as f64
        } else {
            0.0
        };
        Ok(EvalReport {
            mota,
            motp,
            fp,
            fn_,
            id_switches,
            gt_total,
            matches_total,
        })
    }

    /// Machine-readable `key=value` lines.
    pub fn to_key_values(&self) -> String {
        format!(
            "mota={:.6}\nmotp={:.6}\nfp={}\nfn={}\nidsw={}\ngt={}\n",
            self.mota, self.motp, self.fp, self.fn_, self.id_switches, self.gt_total
        )
    }
}

/// Fixed-order table: header line then one value line.
impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>8} {:>8} {:>8} {:>8} {:>8} {:>8}", "MOTA", "MOTP", "FP", "FN", "IDSW", "GT")?;
        write!(
            f,
            "{:>8.3} {:>8.3} {:>8} {:>8} {:>8} {:>8}",
            self.mota, self.motp, self.fp, self.fn_, self.id_switches, self.gt_total
        )
    }
}

/// One ground-truth ↔ hypothesis correspondence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub frame: u64,
    pub gt_id: u64,
    pub hyp_id: u64,
    pub iou: f64,
    pub switched: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: EvalReport,
    pub matches: Vec<Match>,
}

impl Evaluation {
    /// Hypothesis ids matched to `gt_id`, in frame order.
    pub fn track_of(&self, gt_id: u64) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.matches
            .iter()
            .filter(move |m| m.gt_id == gt_id)
            .map(|m| (m.frame, m.hyp_id))
    }
}

pub fn evaluate<T: Scalar>(gt: &[GtRecord<T>], hyp: &[FrameOutput<T>], iou_threshold: T) -> Result<EvalReport> {
    evaluate_detailed(gt, hyp, iou_threshold).map(|e| e.report)
}

type FrameObjects<'a, T> = BTreeMap<u64, Vec<(u64, &'a BBox<T>)>>;

/// Runs the CLEAR MOT bookkeeping frame by frame and keeps every match.
pub fn evaluate_detailed<T: Scalar>(
    gt: &[GtRecord<T>],
    hyp: &[FrameOutput<T>],
    iou_threshold: T,
) -> Result<Evaluation> {
    if !(iou_threshold > T::zero() && iou_threshold < T::one()) {
        return Err(Error::invalid("iou threshold", format!("{iou_threshold} outside (0, 1)")));
    }
    if gt.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }

    let mut gt_frames: FrameObjects<T> = BTreeMap::new();
    for g in gt {
        gt_frames.entry(g.frame).or_default().push((g.id, &g.bbox));
    }
    let mut hyp_frames: FrameObjects<T> = BTreeMap::new();
    for o in hyp {
        hyp_frames
            .entry(o.frame)
            .or_default()
            .extend(o.entries.iter().map(|(id, b)| (*id, b)));
    }
    for (frame, objs) in gt_frames.iter().chain(&hyp_frames) {
        let mut ids = HashSet::new();
        if let Some((id, _)) = objs.iter().find(|(id, _)| !ids.insert(*id)) {
            return Err(Error::invalid("evaluation input", format!("id {id} repeated in frame {frame}")));
        }
    }
    let frames: BTreeSet<u64> = gt_frames.keys().chain(hyp_frames.keys()).copied().collect();

    let mut prev: HashMap<u64, u64> = HashMap::new();
    let mut last_match: HashMap<u64, u64> = HashMap::new();
    let (mut fp, mut fn_, mut idsw, mut gt_total) = (0, 0, 0, 0);
    let mut iou_sum = 0.0;
    let mut matches = Vec::new();
    let empty = Vec::new();

    for frame in frames {
        let gts = gt_frames.get(&frame).unwrap_or(&empty);
        let hyps = hyp_frames.get(&frame).unwrap_or(&empty);
        let hyp_pos: HashMap<u64, usize> = hyps.iter().enumerate().map(|(i, (id, _))| (*id, i)).collect();

        let mut gt_used = vec![false; gts.len()];
        let mut hyp_used = vec![false; hyps.len()];
        let mut pairs: Vec<(usize, usize, T)> = Vec::new();

        // Keep last frame's correspondences that are still valid.
        for (gi, (gid, gbox)) in gts.iter().enumerate() {
            let Some(&hi) = prev.get(gid).and_then(|h| hyp_pos.get(h)) else {
                continue;
            };
            let v = iou(gbox, hyps[hi].1);
            if v >= iou_threshold {
                gt_used[gi] = true;
                hyp_used[hi] = true;
                pairs.push((gi, hi, v));
            }
        }

        let free_g: Vec<usize> = (0..gts.len()).filter(|&i| !gt_used[i]).collect();
        let free_h: Vec<usize> = (0..hyps.len()).filter(|&i| !hyp_used[i]).collect();
        let weights: Vec<Vec<Option<T>>> = free_g
            .iter()
            .map(|&gi| {
                free_h
                    .iter()
                    .map(|&hi| {
                        let v = iou(gts[gi].1, hyps[hi].1);
                        (v >= iou_threshold).then_some(v)
                    })
                    .collect()
            })
            .collect();
        for (r, c) in max_weight_matching(&weights) {
            let (gi, hi) = (free_g[r], free_h[c]);
            pairs.push((gi, hi, weights[r][c].expect("admissible pair")));
        }

        prev.clear();
        pairs.sort_by_key(|&(gi, _, _)| gts[gi].0);
        for (gi, hi, v) in &pairs {
            let (gid, hid) = (gts[*gi].0, hyps[*hi].0);
            let switched = last_match.get(&gid).is_some_and(|&h| h != hid);
            if switched {
                idsw += 1;
            }
            last_match.insert(gid, hid);
            prev.insert(gid, hid);
            let v = v.to_f64_lossy();
            iou_sum += v;
            matches.push(Match {
                frame,
                gt_id: gid,
                hyp_id: hid,
                iou: v,
                switched,
            });
        }

        gt_total += gts.len();
        fp += hyps.len() - pairs.len();
        fn_ += gts.len() - pairs.len();
    }

    let report = EvalReport::from_counts(fp, fn_, idsw, gt_total, matches.len(), iou_sum)?;
    Ok(Evaluation { report, matches })
}
