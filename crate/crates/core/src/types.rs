//! Domain values shared by the tracker, evaluator and generators.
//!
//! Constructors validate their invariants; once built, values are plain data.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::scalar::Scalar;

/// Kalman state layout: `(cx, cy, vx, vy, w, h)`.
pub const STATE_DIM: usize = 6;
/// Measurement layout: `(cx, cy, w, h)`.
pub const MEAS_DIM: usize = 4;

pub type StateVector<T> = Vector<T, STATE_DIM>;
pub type StateCovariance<T> = Matrix<T, STATE_DIM, STATE_DIM>;

/// Axis-aligned box in center form, pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox<T> {
    pub cx: T,
    pub cy: T,
    pub w: T,
    pub h: T,
}

impl<T: Scalar> BBox<T> {
    pub fn new(cx: T, cy: T, w: T, h: T) -> Result<Self> {
        if ![cx, cy, w, h].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("box", "non-finite coordinate"));
        }
        if !(w > T::zero() && h > T::zero()) {
            return Err(Error::invalid("box", format!("non-positive box size {w}x{h}")));
        }
        Ok(BBox { cx, cy, w, h })
    }

    /// Builds a box from the MOTChallenge top-left convention.
    pub fn from_top_left(left: T, top: T, w: T, h: T) -> Result<Self> {
        let half = T::lit(0.5);
        Self::new(left + w * half, top + h * half, w, h)
    }

    pub fn left(&self) -> T {
        self.cx - self.w * T::lit(0.5)
    }

    pub fn top(&self) -> T {
        self.cy - self.h * T::lit(0.5)
    }

    pub fn right(&self) -> T {
        self.cx + self.w * T::lit(0.5)
    }

    pub fn bottom(&self) -> T {
        self.cy + self.h * T::lit(0.5)
    }

    pub fn area(&self) -> T {
        self.w * self.h
    }

    pub fn to_measurement(&self) -> Vector<T, MEAS_DIM> {
        Vector::from_array([self.cx, self.cy, self.w, self.h])
    }
}

/// Appearance embedding (re-identification feature or histogram).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVec<T>(Vec<T>);

impl<T: Scalar> FeatureVec<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("feature", "empty vector"));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("feature", "non-finite entry"));
        }
        Ok(FeatureVec(values))
    }

    /// Builds a unit-norm feature; fails on the zero vector.
    pub fn normalized(values: Vec<T>) -> Result<Self> {
        Self::new(values)?.normalize()
    }

    pub fn normalize(self) -> Result<Self> {
        let norm = self.norm();
        if !(norm > T::zero()) {
            return Err(Error::ZeroFeature);
        }
        Ok(FeatureVec(self.0.into_iter().map(|v| v / norm).collect()))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn norm(&self) -> T {
        self.0.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    /// Euclidean distance; panics on dimension mismatch.
    pub fn distance(&self, other: &Self) -> T {
        assert_eq!(self.dim(), other.dim(), "feature dimension mismatch");
        self.0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<T>()
            .sqrt()
    }
}

/// One detector output.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection<T> {
    pub frame: u64,
    pub index_in_frame: usize,
    pub bbox: BBox<T>,
    pub confidence: T,
    pub feature: Option<FeatureVec<T>>,
}

impl<T: Scalar> Detection<T> {
    pub fn new(frame: u64, index_in_frame: usize, bbox: BBox<T>, confidence: T) -> Self {
        Detection {
            frame,
            index_in_frame,
            bbox,
            confidence,
            feature: None,
        }
    }

    pub fn with_feature(mut self, feature: FeatureVec<T>) -> Self {
        self.feature = Some(feature);
        self
    }
}

/// Checks that `(frame, index_in_frame)` pairs are unique.
pub fn check_unique_detection_keys<T>(dets: &[Detection<T>]) -> Result<()> {
    let mut seen = HashSet::with_capacity(dets.len());
    for d in dets {
        if !seen.insert((d.frame, d.index_in_frame)) {
            return Err(Error::invalid(
                "detections",
                format!("duplicate key ({}, {})", d.frame, d.index_in_frame),
            ));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Deleted,
}

impl TrackStatus {
    pub fn can_become(self, next: TrackStatus) -> bool {
        use TrackStatus::*;
        matches!(
            (self, next),
            (Tentative, Confirmed) | (Tentative, Deleted) | (Confirmed, Deleted)
        ) || self == next
    }
}

/// Augmented per-person state: Kalman moments plus the reference feature.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackState<T> {
    id: u64,
    mean: StateVector<T>,
    cov: StateCovariance<T>,
    ref_feature: Option<FeatureVec<T>>,
    feature_count: u64,
    hits: u32,
    misses: u32,
    status: TrackStatus,
    last_frame: u64,
}

impl<T: Scalar> TrackState<T> {
    /// A tentative track with no reference feature and one hit.
    pub fn new(id: u64, mean: StateVector<T>, cov: StateCovariance<T>, last_frame: u64) -> Result<Self> {
        let track = TrackState {
            id,
            mean,
            cov,
            ref_feature: None,
            feature_count: 0,
            hits: 1,
            misses: 0,
            status: TrackStatus::Tentative,
            last_frame,
        };
        track.validate()?;
        Ok(track)
    }

    pub fn with_reference(mut self, feature: FeatureVec<T>, count: u64) -> Result<Self> {
        if count == 0 {
            return Err(Error::invalid("track", "reference feature with zero count"));
        }
        self.ref_feature = Some(feature);
        self.feature_count = count;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.id == 0 {
            return Err(Error::invalid("track", "id must be positive"));
        }
        if !self.mean.is_finite() || !self.cov.is_finite() {
            return Err(Error::invalid("track", "non-finite state"));
        }
        check_covariance(&self.cov)?;
        if self.ref_feature.is_some() != (self.feature_count > 0) {
            return Err(Error::invalid("track", "reference feature present iff feature_count > 0"));
        }
        Ok(())
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn mean(&self) -> &StateVector<T> {
        &self.mean
    }

    pub fn cov(&self) -> &StateCovariance<T> {
        &self.cov
    }

    pub fn ref_feature(&self) -> Option<&FeatureVec<T>> {
        self.ref_feature.as_ref()
    }

    pub fn feature_count(&self) -> u64 {
        self.feature_count
    }

    pub fn hits(&self) -> u32 {
        self.hits
    }

    pub fn misses(&self) -> u32 {
        self.misses
    }

    pub fn status(&self) -> TrackStatus {
        self.status
    }

    /// Frame the state is currently valid for.
    pub fn last_frame(&self) -> u64 {
        self.last_frame
    }

    /// Box implied by the current mean. Sizes are clamped to stay positive.
    pub fn bbox(&self) -> BBox<T> {
        let m = &self.mean.0;
        let tiny = T::lit(1e-6);
        BBox {
            cx: m[0][0],
            cy: m[1][0],
            w: m[4][0].max(tiny),
            h: m[5][0].max(tiny),
        }
    }

    pub fn is_live(&self) -> bool {
        self.status != TrackStatus::Deleted
    }

    pub(crate) fn set_moments(&mut self, mean: StateVector<T>, cov: StateCovariance<T>) {
        self.mean = mean;
        self.cov = cov;
    }

    pub(crate) fn set_reference(&mut self, feature: FeatureVec<T>, count: u64) {
        self.ref_feature = Some(feature);
        self.feature_count = count;
    }

    pub(crate) fn set_last_frame(&mut self, frame: u64) {
        self.last_frame = frame;
    }

    pub(crate) fn record_hit(&mut self) {
        self.hits += 1;
        self.misses = 0;
    }

    pub(crate) fn record_miss(&mut self) {
        self.misses += 1;
    }

    /// Moves to `next`; illegal transitions are rejected.
    pub fn transition(&mut self, next: TrackStatus) -> Result<()> {
        if !self.status.can_become(next) {
            return Err(Error::invalid(
                "track",
                format!("status transition {:?} -> {:?}", self.status, next),
            ));
        }
        self.status = next;
        Ok(())
    }
}

/// Symmetric within tolerance and positive-definite.
pub fn check_covariance<T: Scalar, const N: usize>(cov: &Matrix<T, N, N>) -> Result<()> {
    let scale = cov.diagonal().iter().fold(T::one(), |acc, v| acc.max(v.abs()));
    if cov.asymmetry() > T::check_tol() * scale {
        return Err(Error::invalid("covariance", "not symmetric"));
    }
    if cov.cholesky().is_none() {
        return Err(Error::invalid("covariance", "not positive-definite"));
    }
    Ok(())
}

/// Per-frame association probabilities, rows = detections, last column = new track.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociationMatrix<T> {
    frame: u64,
    track_ids: Vec<u64>,
    values: Vec<Vec<T>>,
}

impl<T: Scalar> AssociationMatrix<T> {
    pub fn new(frame: u64, track_ids: Vec<u64>, values: Vec<Vec<T>>) -> Result<Self> {
        let cols = track_ids.len() + 1;
        for (i, row) in values.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::invalid(
                    "association matrix",
                    format!("row {i} has {} columns, expected {cols}", row.len()),
                ));
            }
            if !row.iter().all(|&p| p >= T::zero() && p <= T::one()) {
                return Err(Error::invalid("association matrix", format!("row {i} has entry outside [0, 1]")));
            }
            let sum: T = row.iter().copied().sum();
            if (sum - T::one()).abs() > T::check_tol() {
                return Err(Error::invalid("association matrix", format!("row {i} sums to {sum}")));
            }
        }
        Ok(AssociationMatrix {
            frame,
            track_ids,
            values,
        })
    }

    pub fn frame(&self) -> u64 {
        self.frame
    }

    pub fn track_ids(&self) -> &[u64] {
        &self.track_ids
    }

    pub fn rows(&self) -> usize {
        self.values.len()
    }

    pub fn cols(&self) -> usize {
        self.track_ids.len() + 1
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i][j]
    }

    pub fn new_track_column(&self) -> usize {
        self.track_ids.len()
    }
}

/// Where a detection went in one particle's hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Track(u64),
    NewTrack(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectionAssignment {
    pub index_in_frame: usize,
    pub target: Target,
}

/// One joint data-association hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct Particle<T> {
    tracks: Vec<TrackState<T>>,
    log_weight: T,
    next_id: u64,
    last_assignments: Vec<DetectionAssignment>,
}

impl<T: Scalar> Particle<T> {
    pub fn new(tracks: Vec<TrackState<T>>, log_weight: T, next_id: u64) -> Result<Self> {
        let p = Particle {
            tracks,
            log_weight,
            next_id,
            last_assignments: Vec::new(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn empty() -> Self {
        Particle {
            tracks: Vec::new(),
            log_weight: T::zero(),
            next_id: 1,
            last_assignments: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.next_id == 0 {
            return Err(Error::invalid("particle", "next_id must be positive"));
        }
        if !self.log_weight.is_finite() {
            return Err(Error::invalid("particle", "non-finite log weight"));
        }
        let mut ids = HashSet::new();
        for t in self.tracks.iter().filter(|t| t.is_live()) {
            if !ids.insert(t.id()) {
                return Err(Error::invalid("particle", format!("duplicate live track id {}", t.id())));
            }
            if t.id() >= self.next_id {
                return Err(Error::invalid("particle", format!("track id {} not below next_id", t.id())));
            }
        }
        Ok(())
    }

    pub fn tracks(&self) -> &[TrackState<T>] {
        &self.tracks
    }

    pub fn log_weight(&self) -> T {
        self.log_weight
    }

    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    /// Assignments made in the most recent step, in processing order.
    pub fn last_assignments(&self) -> &[DetectionAssignment] {
        &self.last_assignments
    }

    pub(crate) fn tracks_mut(&mut self) -> &mut Vec<TrackState<T>> {
        &mut self.tracks
    }

    pub(crate) fn set_log_weight(&mut self, w: T) {
        self.log_weight = w;
    }

    pub(crate) fn take_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    pub(crate) fn set_last_assignments(&mut self, a: Vec<DetectionAssignment>) {
        self.last_assignments = a;
    }
}
