//! Reference-feature maintenance and the softmin appearance likelihood.
//!
//! For a detection feature `g` and track references `f_j`, the appearance
//! probability of track `j` is `exp(-s‖g - f_j‖) / Σ_k exp(-s‖g - f_k‖)`.

use crate::error::{Error, Result};
use crate::scalar::{log_sum_exp, Scalar};
use crate::types::{FeatureVec, TrackState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpdateMode<T> {
    /// Running arithmetic mean over every assigned feature.
    CumulativeMean,
    /// `f ← λ f + (1 - λ) g`.
    Exponential(T),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppearanceParams<T> {
    pub update_mode: UpdateMode<T>,
    /// Rescale the reference to unit norm after every update.
    pub renormalize: bool,
    /// Multiplies feature distances before the softmin.
    pub distance_scale: T,
}

impl<T: Scalar> Default for AppearanceParams<T> {
    fn default() -> Self {
        AppearanceParams {
            update_mode: UpdateMode::CumulativeMean,
            renormalize: true,
            distance_scale: T::one(),
        }
    }
}

impl<T: Scalar> AppearanceParams<T> {
    pub fn validate(&self) -> Result<()> {
        if let UpdateMode::Exponential(l) = self.update_mode {
            if !(l > T::zero() && l < T::one()) {
                return Err(Error::invalid("appearance params", format!("lambda {l} outside (0, 1)")));
            }
        }
        if !(self.distance_scale > T::zero() && self.distance_scale.is_finite()) {
            return Err(Error::invalid("appearance params", "distance_scale must be positive"));
        }
        Ok(())
    }
}

/// `exp(-s·d_j) / Σ_k exp(-s·d_k)`, evaluated with a log-sum-exp shift.
pub fn softmin<T: Scalar>(distances: &[T], scale: T) -> Vec<T> {
    let logits: Vec<T> = distances.iter().map(|&d| -scale * d).collect();
    let norm = log_sum_exp(&logits);
    logits.into_iter().map(|l| (l - norm).exp()).collect()
}

/// Softmin over the tracks' reference features.
///
/// Tracks without a reference get `1/n` before the final renormalization.
/// If no track has a reference the result is uniform.
pub fn appearance_row<T: Scalar>(g: &FeatureVec<T>, refs: &[Option<&FeatureVec<T>>], scale: T) -> Result<Vec<T>> {
    let n = refs.len();
    if n == 0 {
        return Err(Error::NoTracks);
    }
    let uniform = T::one() / T::from_usize(n).expect("track count representable");

    let distances: Vec<T> = refs.iter().filter_map(|r| r.map(|f| g.distance(f))).collect();
    if distances.is_empty() {
        return Ok(vec![uniform; n]);
    }

    let mut present = softmin(&distances, scale).into_iter();
    let mut row: Vec<T> = refs
        .iter()
        .map(|r| match r {
            Some(_) => present.next().expect("one probability per reference"),
            None => uniform,
        })
        .collect();

    if refs.iter().any(Option::is_none) {
        let total: T = row.iter().copied().sum();
        row.iter_mut().for_each(|p| *p /= total);
    }
    Ok(row)
}

/// Folds a newly assigned feature into the track's reference.
pub fn update_reference<T: Scalar>(
    track: &TrackState<T>,
    g: &FeatureVec<T>,
    params: &AppearanceParams<T>,
) -> Result<TrackState<T>> {
    let mut next = track.clone();
    let Some(f) = track.ref_feature() else {
        next.set_reference(g.clone(), 1);
        return Ok(next);
    };
    if f.dim() != g.dim() {
        return Err(Error::invalid(
            "feature",
            format!("dimension {} does not match reference dimension {}", g.dim(), f.dim()),
        ));
    }

    let count = track.feature_count();
    let (a, b) = match params.update_mode {
        UpdateMode::CumulativeMean => {
            let c = T::from_u64(count).expect("count representable");
            (c / (c + T::one()), T::one() / (c + T::one()))
        }
        UpdateMode::Exponential(l) => (l, T::one() - l),
    };
    let blended: Vec<T> = f
        .as_slice()
        .iter()
        .zip(g.as_slice())
        .map(|(&fv, &gv)| a * fv + b * gv)
        .collect();
    let blended = FeatureVec::new(blended)?;
    let blended = if params.renormalize {
        blended.normalize().map_err(|_| Error::DegenerateFeatureAverage)?
    } else {
        blended
    };
    next.set_reference(blended, count + 1);
    Ok(next)
}
