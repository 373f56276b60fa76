//! Per-frame association likelihoods over detections × (tracks + new track).

use std::fmt;
use std::str::FromStr;

use crate::appearance::{appearance_row, AppearanceParams};
use crate::error::{Error, Result};
use crate::motion::{innovation, MotionParams};
use crate::scalar::Scalar;
use crate::types::{AssociationMatrix, Detection, TrackState};

/// Which likelihood factors enter the association score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AssociationMode {
    PosOnly,
    AppOnly,
    PosApp,
}

impl AssociationMode {
    pub const ALL: [AssociationMode; 3] = [AssociationMode::PosOnly, AssociationMode::AppOnly, AssociationMode::PosApp];

    pub fn uses_position(self) -> bool {
        matches!(self, AssociationMode::PosOnly | AssociationMode::PosApp)
    }

    pub fn uses_appearance(self) -> bool {
        matches!(self, AssociationMode::AppOnly | AssociationMode::PosApp)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AssociationMode::PosOnly => "posonly",
            AssociationMode::AppOnly => "apponly",
            AssociationMode::PosApp => "posapp",
        }
    }
}

impl fmt::Display for AssociationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AssociationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "posonly" => Ok(AssociationMode::PosOnly),
            "apponly" => Ok(AssociationMode::AppOnly),
            "posapp" => Ok(AssociationMode::PosApp),
            other => Err(Error::invalid("association mode", format!("unsupported mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssociationParams<T> {
    pub mode: AssociationMode,
    /// Squared-Mahalanobis gate; `0` disables gating.
    pub gate_chi2: T,
    /// Constant log-density of the new-track event.
    pub new_track_log_density: T,
    /// Added to every surviving max-shifted weight before normalization.
    pub min_likelihood_floor: T,
}

impl<T: Scalar> Default for AssociationParams<T> {
    fn default() -> Self {
        AssociationParams {
            mode: AssociationMode::PosApp,
            gate_chi2: T::zero(),
            new_track_log_density: T::lit(-18.0),
            min_likelihood_floor: T::lit(1e-12),
        }
    }
}

impl<T: Scalar> AssociationParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !self.new_track_log_density.is_finite() {
            return Err(Error::invalid("association params", "new_track_log_density must be finite"));
        }
        if !(self.gate_chi2 >= T::zero()) {
            return Err(Error::invalid("association params", "gate_chi2 must be non-negative"));
        }
        if !(self.min_likelihood_floor >= T::zero() && self.min_likelihood_floor.is_finite()) {
            return Err(Error::invalid("association params", "min_likelihood_floor must be non-negative"));
        }
        Ok(())
    }
}

/// Unnormalized log-scores; one row per detection, `tracks.len() + 1` columns.
/// Gated entries are `-inf`.
pub fn log_scores<T: Scalar>(
    dets: &[Detection<T>],
    tracks: &[TrackState<T>],
    mp: &MotionParams<T>,
    ap: &AppearanceParams<T>,
    asp: &AssociationParams<T>,
) -> Result<Vec<Vec<T>>> {
    let refs: Vec<_> = tracks.iter().map(|t| t.ref_feature()).collect();
    let n = tracks.len();
    let uniform_log = if n > 0 {
        -T::from_usize(n).expect("track count representable").ln()
    } else {
        T::zero()
    };
    let gating = asp.gate_chi2 > T::zero();

    dets.iter()
        .map(|det| {
            let app_log: Option<Vec<T>> = if asp.mode.uses_appearance() && n > 0 {
                match &det.feature {
                    Some(g) => Some(appearance_row(g, &refs, ap.distance_scale)?.into_iter().map(T::ln).collect()),
                    // Featureless detections (clutter) fall back to the uniform factor in PosApp.
                    None if asp.mode == AssociationMode::PosApp => Some(vec![uniform_log; n]),
                    None => {
                        return Err(Error::FeatureRequired {
                            frame: det.frame,
                            index: det.index_in_frame,
                        })
                    }
                }
            } else {
                None
            };

            let mut row = Vec::with_capacity(n + 1);
            for (j, track) in tracks.iter().enumerate() {
                let mut score = T::zero();
                if asp.mode.uses_position() || gating {
                    let inn = innovation(track, &det.bbox, mp)?;
                    let (ll, m2) = if mp.position_only_likelihood {
                        inn.log_density_position()?
                    } else {
                        (inn.log_density(), inn.mahalanobis_sq())
                    };
                    if gating && m2 > asp.gate_chi2 {
                        row.push(T::neg_infinity());
                        continue;
                    }
                    if asp.mode.uses_position() {
                        score += ll;
                    }
                }
                if let Some(app) = &app_log {
                    score += app[j];
                }
                row.push(score);
            }
            row.push(asp.new_track_log_density);
            Ok(row)
        })
        .collect()
}

/// Exponentiates one row of log-scores (with max shift) and normalizes it.
///
/// `floor` is added to every finite entry after the shift; `-inf` entries
/// stay at exactly zero.
pub fn normalize_log_row<T: Scalar>(scores: &[T], floor: T) -> Vec<T> {
    let max = scores.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        let u = T::one() / T::from_usize(scores.len()).unwrap_or(T::one());
        return vec![u; scores.len()];
    }
    let weights: Vec<T> = scores
        .iter()
        .map(|&s| {
            if s == T::neg_infinity() {
                T::zero()
            } else {
                (s - max).exp() + floor
            }
        })
        .collect();
    let total: T = weights.iter().copied().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Builds the normalized association matrix for one frame.
pub fn build_matrix<T: Scalar>(
    frame: u64,
    dets: &[Detection<T>],
    tracks: &[TrackState<T>],
    mp: &MotionParams<T>,
    ap: &AppearanceParams<T>,
    asp: &AssociationParams<T>,
) -> Result<AssociationMatrix<T>> {
    let scores = log_scores(dets, tracks, mp, ap, asp)?;
    let values = scores
        .iter()
        .map(|row| normalize_log_row(row, asp.min_likelihood_floor))
        .collect();
    AssociationMatrix::new(frame, tracks.iter().map(TrackState::id).collect(), values)
}
