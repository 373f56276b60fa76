//! MOTChallenge text formats and the feature sidecar.
//!
//! * detections: `frame,-1,bb_left,bb_top,bb_width,bb_height,conf,x,y,z`
//! * ground truth: `frame,id,bb_left,bb_top,bb_width,bb_height,flag,class,visibility`
//! * results: `frame,track_id,bb_left,bb_top,bb_width,bb_height,1,-1,-1,-1`
//! * features: header `D <dim>`, then `frame,index_in_frame,v1,...,vD`
//!
//! Boxes are top-left on disk and center form in memory.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tracker::FrameOutput;
use crate::types::{BBox, Detection, FeatureVec};

/// One ground-truth annotation.
#[derive(Debug, Clone, PartialEq)]
pub struct GtRecord<T> {
    pub frame: u64,
    pub id: u64,
    pub bbox: BBox<T>,
    pub visibility: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionParseOptions {
    /// Lines with confidence below this are dropped.
    pub conf_threshold: f64,
}

impl Default for DetectionParseOptions {
    fn default() -> Self {
        DetectionParseOptions { conf_threshold: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GtParseOptions {
    /// Classes kept; MOTChallenge pedestrians are class 1.
    pub classes: Vec<i64>,
}

impl Default for GtParseOptions {
    fn default() -> Self {
        GtParseOptions { classes: vec![1] }
    }
}

/// Detections grouped by frame, plus optional ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceData<T> {
    detections: BTreeMap<u64, Vec<Detection<T>>>,
    ground_truth: Option<Vec<GtRecord<T>>>,
    frame_count: u64,
    pub frame_rate: f64,
}

impl<T: Scalar> SequenceData<T> {
    pub fn new(detections: Vec<Detection<T>>, ground_truth: Option<Vec<GtRecord<T>>>) -> Result<Self> {
        crate::types::check_unique_detection_keys(&detections)?;
        let mut grouped: BTreeMap<u64, Vec<Detection<T>>> = BTreeMap::new();
        for d in detections {
            grouped.entry(d.frame).or_default().push(d);
        }
        for dets in grouped.values_mut() {
            dets.sort_by_key(|d| d.index_in_frame);
        }
        let mut gt = ground_truth;
        if let Some(gt) = gt.as_mut() {
            gt.sort_by_key(|g| (g.frame, g.id));
        }
        let last_det = grouped.keys().next_back().copied().unwrap_or(0);
        let last_gt = gt.iter().flatten().map(|g| g.frame).max().unwrap_or(0);
        Ok(SequenceData {
            detections: grouped,
            ground_truth: gt,
            frame_count: last_det.max(last_gt),
            frame_rate: 30.0,
        })
    }

    /// Highest frame number seen in detections or ground truth.
    pub fn frame_count(&self) -> u64 {
        self.frame_count
    }

    /// Inclusive frame range to track over, `None` for an empty sequence.
    /// MOTChallenge numbering starts at 1; a frame 0 extends the range.
    pub fn frame_range(&self) -> Option<(u64, u64)> {
        if self.frame_count == 0 && !self.detections.contains_key(&0) {
            return None;
        }
        let first = if self.detections.contains_key(&0) { 0 } else { 1 };
        Some((first, self.frame_count))
    }

    pub fn detections_in(&self, frame: u64) -> &[Detection<T>] {
        self.detections.get(&frame).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn frames(&self) -> impl Iterator<Item = (u64, &[Detection<T>])> {
        self.detections.iter().map(|(f, d)| (*f, d.as_slice()))
    }

    pub fn detections(&self) -> impl Iterator<Item = &Detection<T>> {
        self.detections.values().flatten()
    }

    pub fn ground_truth(&self) -> Option<&[GtRecord<T>]> {
        self.ground_truth.as_deref()
    }

    pub fn has_features(&self) -> bool {
        self.detections().any(|d| d.feature.is_some())
    }

    pub fn all_have_features(&self) -> bool {
        self.detections().all(|d| d.feature.is_some())
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Non-blank lines with 1-based line numbers, fields split on commas.
fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.split(',').map(str::trim).collect()))
}

fn field<V: std::str::FromStr>(path: &Path, line: usize, fields: &[&str], idx: usize, name: &str) -> Result<V> {
    fields[idx]
        .parse()
        .map_err(|_| parse_err(path, line, format!("cannot parse {name} '{}'", fields[idx])))
}

fn finite(path: &Path, line: usize, fields: &[&str], idx: usize, name: &str) -> Result<f64> {
    let v: f64 = field(path, line, fields, idx, name)?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("non-finite {name}")));
    }
    Ok(v)
}

fn parse_box<T: Scalar>(path: &Path, line: usize, fields: &[&str]) -> Result<BBox<T>> {
    let left = finite(path, line, fields, 2, "bb_left")?;
    let top = finite(path, line, fields, 3, "bb_top")?;
    let w = finite(path, line, fields, 4, "bb_width")?;
    let h = finite(path, line, fields, 5, "bb_height")?;
    if w <= 0.0 || h <= 0.0 {
        return Err(parse_err(path, line, format!("non-positive box {w}x{h}")));
    }
    BBox::from_top_left(T::lit(left), T::lit(top), T::lit(w), T::lit(h)).map_err(|e| parse_err(path, line, e.to_string()))
}

pub fn parse_detections<T: Scalar>(path: impl AsRef<Path>, opts: &DetectionParseOptions) -> Result<Vec<Detection<T>>> {
    let path = path.as_ref();
    parse_detections_str(&read(path)?, path, opts)
}

/// Parses detection text; `path` is only used in error messages.
///
/// `index_in_frame` counts every line of the frame in file order, including
/// lines later dropped by the confidence threshold, so feature sidecars
/// keyed on the unfiltered file stay aligned.
pub fn parse_detections_str<T: Scalar>(
    text: &str,
    path: &Path,
    opts: &DetectionParseOptions,
) -> Result<Vec<Detection<T>>> {
    let mut per_frame: HashMap<u64, usize> = HashMap::new();
    let mut out = Vec::new();
    for (line, fields) in records(text) {
        if fields.len() < 7 {
            return Err(parse_err(path, line, format!("expected at least 7 fields, found {}", fields.len())));
        }
        let frame: u64 = field(path, line, &fields, 0, "frame")?;
        let _id: i64 = field(path, line, &fields, 1, "id")?;
        let bbox = parse_box(path, line, &fields)?;
        let conf = finite(path, line, &fields, 6, "confidence")?;
        let slot = per_frame.entry(frame).or_insert(0);
        let index = *slot;
        *slot += 1;
        if conf < opts.conf_threshold {
            continue;
        }
        out.push(Detection::new(frame, index, bbox, T::lit(conf)));
    }
    Ok(out)
}

pub fn parse_ground_truth<T: Scalar>(path: impl AsRef<Path>, opts: &GtParseOptions) -> Result<Vec<GtRecord<T>>> {
    let path = path.as_ref();
    parse_ground_truth_str(&read(path)?, path, opts)
}

pub fn parse_ground_truth_str<T: Scalar>(text: &str, path: &Path, opts: &GtParseOptions) -> Result<Vec<GtRecord<T>>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, fields) in records(text) {
        if fields.len() < 9 {
            return Err(parse_err(path, line, format!("expected 9 fields, found {}", fields.len())));
        }
        let frame: u64 = field(path, line, &fields, 0, "frame")?;
        let id: u64 = field(path, line, &fields, 1, "id")?;
        let bbox = parse_box(path, line, &fields)?;
        let flag: i64 = field(path, line, &fields, 6, "flag")?;
        let class: i64 = field(path, line, &fields, 7, "class")?;
        let visibility = finite(path, line, &fields, 8, "visibility")?;
        if !seen.insert((frame, id)) {
            return Err(parse_err(
                path,
                line,
                format!("duplicate ground-truth identity in frame ({frame}, {id})"),
            ));
        }
        if flag == 0 || !opts.classes.contains(&class) {
            continue;
        }
        out.push(GtRecord {
            frame,
            id,
            bbox,
            visibility: T::lit(visibility),
        });
    }
    Ok(out)
}

/// Parses a results file (tracker output) back into per-frame outputs.
pub fn parse_results<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<FrameOutput<T>>> {
    let path = path.as_ref();
    parse_results_str(&read(path)?, path)
}

pub fn parse_results_str<T: Scalar>(text: &str, path: &Path) -> Result<Vec<FrameOutput<T>>> {
    let mut frames: BTreeMap<u64, Vec<(u64, BBox<T>)>> = BTreeMap::new();
    let mut seen = HashSet::new();
    for (line, fields) in records(text) {
        if fields.len() < 6 {
            return Err(parse_err(path, line, format!("expected at least 6 fields, found {}", fields.len())));
        }
        let frame: u64 = field(path, line, &fields, 0, "frame")?;
        let id: u64 = field(path, line, &fields, 1, "track id")?;
        if id == 0 {
            return Err(parse_err(path, line, "track id must be positive"));
        }
        if !seen.insert((frame, id)) {
            return Err(parse_err(path, line, format!("duplicate track id {id} in frame {frame}")));
        }
        frames.entry(frame).or_default().push((id, parse_box(path, line, &fields)?));
    }
    Ok(frames
        .into_iter()
        .map(|(frame, mut entries)| {
            entries.sort_by_key(|(id, _)| *id);
            FrameOutput { frame, entries }
        })
        .collect())
}

/// Attaches sidecar features to `detections`, L2-normalizing each vector.
pub fn load_features<T: Scalar>(path: impl AsRef<Path>, detections: Vec<Detection<T>>) -> Result<Vec<Detection<T>>> {
    let path = path.as_ref();
    load_features_str(&read(path)?, path, detections)
}

pub fn load_features_str<T: Scalar>(
    text: &str,
    path: &Path,
    mut detections: Vec<Detection<T>>,
) -> Result<Vec<Detection<T>>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (header_line, header) = lines.next().ok_or_else(|| parse_err(path, 1, "missing 'D <dim>' header"))?;
    let dim: usize = header
        .trim()
        .strip_prefix('D')
        .and_then(|rest| rest.trim().parse().ok())
        .filter(|&d| d > 0)
        .ok_or_else(|| parse_err(path, header_line + 1, format!("bad header '{header}', expected 'D <dim>'")))?;

    let index: HashMap<(u64, usize), usize> = detections
        .iter()
        .enumerate()
        .map(|(i, d)| ((d.frame, d.index_in_frame), i))
        .collect();
    let mut assigned = HashSet::new();

    for (i, raw) in lines {
        let line = i + 1;
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        if fields.len() != dim + 2 {
            return Err(parse_err(
                path,
                line,
                format!("dimension mismatch: expected {dim} values, found {}", fields.len().saturating_sub(2)),
            ));
        }
        let frame: u64 = field(path, line, &fields, 0, "frame")?;
        let idx: usize = field(path, line, &fields, 1, "index_in_frame")?;
        let values = (0..dim)
            .map(|k| finite(path, line, &fields, k + 2, "feature value").map(T::lit))
            .collect::<Result<Vec<T>>>()?;
        let &slot = index
            .get(&(frame, idx))
            .ok_or_else(|| parse_err(path, line, format!("feature for unknown detection ({frame}, {idx})")))?;
        if !assigned.insert(slot) {
            return Err(parse_err(path, line, format!("duplicate feature for detection ({frame}, {idx})")));
        }
        let feature = FeatureVec::normalized(values).map_err(|e| parse_err(path, line, e.to_string()))?;
        detections[slot].feature = Some(feature);
    }
    Ok(detections)
}

/// Writes `v` with two decimals, never as `-0.00`.
fn fmt2(out: &mut String, v: f64) {
    let r = (v * 100.0).round() / 100.0;
    let r = if r == 0.0 { 0.0 } else { r };
    let _ = write!(out, "{r:.2}");
}

/// Results file contents, frames ascending and ids ascending within a frame.
pub fn format_results<T: Scalar>(outputs: &[FrameOutput<T>]) -> String {
    let mut rows: Vec<(u64, u64, &BBox<T>)> = outputs
        .iter()
        .flat_map(|o| o.entries.iter().map(move |(id, b)| (o.frame, *id, b)))
        .collect();
    rows.sort_by_key(|(f, id, _)| (*f, *id));
    let mut out = String::new();
    for (frame, id, b) in rows {
        let _ = write!(out, "{frame},{id},");
        for v in [b.left(), b.top(), b.w, b.h] {
            fmt2(&mut out, v.to_f64_lossy());
            out.push(',');
        }
        out.push_str("1,-1,-1,-1\n");
    }
    out
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn write_results<T: Scalar>(path: impl AsRef<Path>, outputs: &[FrameOutput<T>]) -> Result<()> {
    if let Some((f, _)) = outputs
        .iter()
        .flat_map(|o| o.entries.iter().map(move |e| (o.frame, e.0)))
        .find(|(_, id)| *id == 0)
    {
        return Err(Error::invalid("results", format!("non-positive track id in frame {f}")));
    }
    write(path.as_ref(), &format_results(outputs))
}

/// Detection file in the MOTChallenge det.txt layout, full precision.
pub fn format_detections<T: Scalar>(dets: &[Detection<T>]) -> String {
    let mut sorted: Vec<_> = dets.iter().collect();
    sorted.sort_by_key(|d| (d.frame, d.index_in_frame));
    let mut out = String::new();
    for d in sorted {
        let b = &d.bbox;
        let _ = writeln!(
            out,
            "{},-1,{},{},{},{},{},-1,-1,-1",
            d.frame,
            b.left(),
            b.top(),
            b.w,
            b.h,
            d.confidence
        );
    }
    out
}

pub fn write_detections<T: Scalar>(path: impl AsRef<Path>, dets: &[Detection<T>]) -> Result<()> {
    write(path.as_ref(), &format_detections(dets))
}

pub fn format_ground_truth<T: Scalar>(gt: &[GtRecord<T>]) -> String {
    let mut sorted: Vec<_> = gt.iter().collect();
    sorted.sort_by_key(|g| (g.frame, g.id));
    let mut out = String::new();
    for g in sorted {
        let b = &g.bbox;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},1,1,{}",
            g.frame,
            g.id,
            b.left(),
            b.top(),
            b.w,
            b.h,
            g.visibility
        );
    }
    out
}

pub fn write_ground_truth<T: Scalar>(path: impl AsRef<Path>, gt: &[GtRecord<T>]) -> Result<()> {
    write(path.as_ref(), &format_ground_truth(gt))
}

/// Feature sidecar for every detection that carries a feature.
///
/// Fails if features disagree on dimension; with no features at all the
/// header is `D <fallback_dim>`.
pub fn format_features<T: Scalar>(dets: &[Detection<T>], fallback_dim: usize) -> Result<String> {
    let mut sorted: Vec<_> = dets.iter().filter(|d| d.feature.is_some()).collect();
    sorted.sort_by_key(|d| (d.frame, d.index_in_frame));
    let dim = sorted
        .first()
        .and_then(|d| d.feature.as_ref())
        .map_or(fallback_dim, FeatureVec::dim);
    let mut out = format!("D {dim}\n");
    for d in sorted {
        let f = d.feature.as_ref().expect("filtered on presence");
        if f.dim() != dim {
            return Err(Error::invalid("features", "inconsistent feature dimensions"));
        }
        let _ = write!(out, "{},{}", d.frame, d.index_in_frame);
        for v in f.as_slice() {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_features<T: Scalar>(path: impl AsRef<Path>, dets: &[Detection<T>], fallback_dim: usize) -> Result<()> {
    write(path.as_ref(), &format_features(dets, fallback_dim)?)
}

/// Paths of a dataset directory: `det.txt`, `gt.txt`, `features.txt`.
#[derive(Debug, Clone)]
pub struct DatasetPaths {
    pub det: PathBuf,
    pub gt: PathBuf,
    pub features: PathBuf,
}

impl DatasetPaths {
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        DatasetPaths {
            det: dir.join("det.txt"),
            gt: dir.join("gt.txt"),
            features: dir.join("features.txt"),
        }
    }
}
