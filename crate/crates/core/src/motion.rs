//! Constant-velocity Kalman filter over `(cx, cy, vx, vy, w, h)` and the
//! Gaussian position likelihood used for association.

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix, Vector};
use crate::scalar::Scalar;
use crate::types::{check_covariance, BBox, Detection, StateCovariance, StateVector, TrackState, MEAS_DIM, STATE_DIM};

/// Noise configuration, all variances in pixel units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionParams<T> {
    /// Position process noise per frame.
    pub process_noise_pos: T,
    /// Velocity process noise per frame.
    pub process_noise_vel: T,
    /// Box size process noise per frame.
    pub process_noise_size: T,
    pub meas_noise_pos: T,
    pub meas_noise_size: T,
    pub initial_vel_var: T,
    /// Score only `(cx, cy)` in the position likelihood, ignoring box size.
    pub position_only_likelihood: bool,
}

impl<T: Scalar> Default for MotionParams<T> {
    fn default() -> Self {
        MotionParams {
            process_noise_pos: T::lit(1.0),
            process_noise_vel: T::lit(0.5),
            process_noise_size: T::lit(0.5),
            meas_noise_pos: T::lit(10.0),
            meas_noise_size: T::lit(10.0),
            initial_vel_var: T::lit(100.0),
            position_only_likelihood: false,
        }
    }
}

impl<T: Scalar> MotionParams<T> {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("process_noise_pos", self.process_noise_pos),
            ("process_noise_vel", self.process_noise_vel),
            ("process_noise_size", self.process_noise_size),
            ("meas_noise_pos", self.meas_noise_pos),
            ("meas_noise_size", self.meas_noise_size),
            ("initial_vel_var", self.initial_vel_var),
        ];
        for (name, v) in all {
            if !(v > T::zero() && v.is_finite()) {
                return Err(Error::invalid("motion params", format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    fn process_noise(&self, dt: T) -> StateCovariance<T> {
        let (p, v, s) = (self.process_noise_pos, self.process_noise_vel, self.process_noise_size);
        Matrix::from_diagonal([p, p, v, v, s, s]).scale(dt)
    }

    fn measurement_noise(&self) -> Matrix<T, MEAS_DIM, MEAS_DIM> {
        let (p, s) = (self.meas_noise_pos, self.meas_noise_size);
        Matrix::from_diagonal([p, p, s, s])
    }
}

/// State indices observed by the measurement model.
const OBSERVED: [usize; MEAS_DIM] = [0, 1, 4, 5];

fn observation<T: Scalar>() -> Matrix<T, MEAS_DIM, STATE_DIM> {
    Matrix::from_fn(|r, c| if OBSERVED[r] == c { T::one() } else { T::zero() })
}

fn transition<T: Scalar>(dt: T) -> StateCovariance<T> {
    let mut f = Matrix::identity();
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;
    f
}

/// Advances the state by `dt` frames under constant velocity.
pub fn predict<T: Scalar>(state: &TrackState<T>, dt: T, params: &MotionParams<T>) -> TrackState<T> {
    debug_assert!(dt > T::zero());
    let f = transition(dt);
    let mean = f * *state.mean();
    let cov = (f * *state.cov() * f.transpose() + params.process_noise(dt)).symmetrize();
    let mut next = state.clone();
    next.set_moments(mean, cov);
    next
}

/// Predicts forward to `frame`; a no-op when the track is already there.
pub fn predict_to<T: Scalar>(state: &TrackState<T>, frame: u64, params: &MotionParams<T>) -> TrackState<T> {
    if frame <= state.last_frame() {
        return state.clone();
    }
    let dt = T::from_u64(frame - state.last_frame()).expect("frame gap representable");
    let mut next = predict(state, dt, params);
    next.set_last_frame(frame);
    next
}

/// Innovation of a box against a predicted track.
#[derive(Debug, Clone, Copy)]
pub struct Innovation<T> {
    pub residual: Vector<T, MEAS_DIM>,
    pub covariance: Matrix<T, MEAS_DIM, MEAS_DIM>,
    chol: Cholesky<T, MEAS_DIM>,
}

impl<T: Scalar> Innovation<T> {
    pub fn mahalanobis_sq(&self) -> T {
        self.chol.mahalanobis_sq(&self.residual)
    }

    /// Log of the full 4-D normal density of the residual.
    pub fn log_density(&self) -> T {
        let k = T::lit(MEAS_DIM as f64);
        let two_pi = T::lit(std::f64::consts::TAU);
        -T::lit(0.5) * (k * two_pi.ln() + self.chol.log_det() + self.mahalanobis_sq())
    }

    /// Log-density restricted to the `(cx, cy)` marginal.
    pub fn log_density_position(&self) -> Result<(T, T)> {
        let s2: Matrix<T, 2, 2> = self.covariance.block(0, 0);
        let r2: Vector<T, 2> = self.residual.block(0, 0);
        let ch = s2.cholesky().ok_or(Error::DegenerateInnovation)?;
        let m2 = ch.mahalanobis_sq(&r2);
        let two_pi = T::lit(std::f64::consts::TAU);
        Ok((-T::lit(0.5) * (T::lit(2.0) * two_pi.ln() + ch.log_det() + m2), m2))
    }
}

pub fn innovation<T: Scalar>(state: &TrackState<T>, z: &BBox<T>, params: &MotionParams<T>) -> Result<Innovation<T>> {
    let h = observation::<T>();
    let predicted = h * *state.mean();
    let covariance = (h * *state.cov() * h.transpose() + params.measurement_noise()).symmetrize();
    let chol = covariance.cholesky().ok_or(Error::DegenerateInnovation)?;
    Ok(Innovation {
        residual: z.to_measurement() - predicted,
        covariance,
        chol,
    })
}

/// Kalman measurement update with the Joseph-form covariance.
pub fn update<T: Scalar>(state: &TrackState<T>, z: &BBox<T>, params: &MotionParams<T>) -> Result<TrackState<T>> {
    let h = observation::<T>();
    let inn = innovation(state, z, params)?;
    let p = *state.cov();
    let gain = p * h.transpose() * inn.chol.inverse();
    let mean = *state.mean() + gain * inn.residual;

    let i_kh = StateCovariance::<T>::identity() - gain * h;
    let r = params.measurement_noise();
    let cov = (i_kh * p * i_kh.transpose() + gain * r * gain.transpose()).symmetrize();
    if !cov.is_finite() || check_covariance(&cov).is_err() {
        return Err(Error::DegenerateInnovation);
    }
    let mut next = state.clone();
    next.set_moments(mean, cov);
    Ok(next)
}

/// Log-density of `z` under the track's predicted measurement distribution.
pub fn position_log_likelihood<T: Scalar>(state: &TrackState<T>, z: &BBox<T>, params: &MotionParams<T>) -> Result<T> {
    let inn = innovation(state, z, params)?;
    if params.position_only_likelihood {
        inn.log_density_position().map(|(ll, _)| ll)
    } else {
        Ok(inn.log_density())
    }
}

/// Starts a tentative track at the detection with zero velocity.
pub fn init_track<T: Scalar>(det: &Detection<T>, params: &MotionParams<T>, id: u64) -> Result<TrackState<T>> {
    let b = det.bbox;
    let mean = StateVector::from_array([b.cx, b.cy, T::zero(), T::zero(), b.w, b.h]);
    let (rp, rs, v0) = (params.meas_noise_pos, params.meas_noise_size, params.initial_vel_var);
    let cov = Matrix::from_diagonal([rp, rp, v0, v0, rs, rs]);
    let track = TrackState::new(id, mean, cov, det.frame)?;
    match &det.feature {
        Some(f) => track.with_reference(f.clone(), 1),
        None => Ok(track),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::FeatureVec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> MotionParams<f64> {
        MotionParams::default()
    }

    fn state(mean: [f64; 6], cov: [f64; 6]) -> TrackState<f64> {
        TrackState::new(1, Vector::from_array(mean), Matrix::from_diagonal(cov), 0).unwrap()
    }

    fn bbox(cx: f64, cy: f64, w: f64, h: f64) -> BBox<f64> {
        BBox::new(cx, cy, w, h).unwrap()
    }

    #[test]
    fn noiseless_predict_moves_by_velocity() {
        let tiny = MotionParams {
            process_noise_pos: 1e-300,
            process_noise_vel: 1e-300,
            process_noise_size: 1e-300,
            ..params()
        };
        let s = state([0.0, 0.0, 1.0, 2.0, 10.0, 10.0], [1.0; 6]);
        let p = predict(&s, 1.0, &tiny);
        assert_eq!(p.mean().to_array(), [1.0, 2.0, 1.0, 2.0, 10.0, 10.0]);
    }

    #[test]
    fn stationary_predict_grows_covariance_by_q() {
        let s = state([5.0, 6.0, 0.0, 0.0, 10.0, 10.0], [1.0, 1.0, 0.0001, 0.0001, 1.0, 1.0]);
        let p = predict(&s, 1.0, &params());
        assert_eq!(p.mean().to_array()[..2], [5.0, 6.0]);
        // position variance picks up the (tiny) velocity variance plus q_p
        assert!((p.cov()[(0, 0)] - (1.0 + 0.0001 + 1.0)).abs() < 1e-12);
        assert!((p.cov()[(4, 4)] - 1.5).abs() < 1e-12);
        assert!((p.cov()[(2, 2)] - 0.5001).abs() < 1e-12);
    }

    #[test]
    fn predict_covariance_matches_hand_multiplied_2x2() {
        // Position/velocity pair for x: P = [[a, b], [b, c]], F = [[1, dt], [0, 1]].
        let (a, b, c, dt) = (3.0, 0.4, 2.0, 2.0);
        let mut cov = Matrix::from_diagonal([a, 1.0, c, 1.0, 1.0, 1.0]);
        cov[(0, 2)] = b;
        cov[(2, 0)] = b;
        let s = TrackState::new(1, Vector::from_array([0.0, 0.0, 0.0, 0.0, 1.0, 1.0]), cov, 0).unwrap();
        let p = predict(&s, dt, &params());
        // F P Fᵀ by hand: [[a + 2 b dt + c dt², b + c dt], [b + c dt, c]] plus Q·dt.
        let expect_xx = a + 2.0 * b * dt + c * dt * dt + 1.0 * dt;
        let expect_xv = b + c * dt;
        let expect_vv = c + 0.5 * dt;
        assert!((p.cov()[(0, 0)] - expect_xx).abs() < 1e-12);
        assert!((p.cov()[(0, 2)] - expect_xv).abs() < 1e-12);
        assert!((p.cov()[(2, 2)] - expect_vv).abs() < 1e-12);
    }

    #[test]
    fn zero_innovation_keeps_mean_and_shrinks_trace() {
        let s = state([25.0, 40.0, 1.0, -1.0, 30.0, 40.0], [20.0, 20.0, 5.0, 5.0, 20.0, 20.0]);
        let u = update(&s, &bbox(25.0, 40.0, 30.0, 40.0), &params()).unwrap();
        for (a, b) in u.mean().to_array().iter().zip(s.mean().to_array()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(u.cov().trace() < s.cov().trace());
    }

    #[test]
    fn huge_measurement_noise_leaves_prior() {
        let p = MotionParams {
            meas_noise_pos: 1e12,
            meas_noise_size: 1e12,
            ..params()
        };
        let s = state([25.0, 40.0, 1.0, -1.0, 30.0, 40.0], [20.0, 20.0, 5.0, 5.0, 20.0, 20.0]);
        let u = update(&s, &bbox(60.0, 10.0, 35.0, 45.0), &p).unwrap();
        for (a, b) in u.mean().to_array().iter().zip(s.mean().to_array()) {
            assert!((a - b).abs() <= 1e-3 * b.abs().max(1.0));
        }
        for (a, b) in u.cov().diagonal().iter().zip(s.cov().diagonal()) {
            assert!((a - b).abs() <= 1e-3 * b);
        }
    }

    #[test]
    fn position_likelihood_at_mean_is_normalizer() {
        let s = state([0.0, 0.0, 0.0, 0.0, 10.0, 10.0], [2.0, 3.0, 1.0, 1.0, 4.0, 5.0]);
        let p = params();
        let ll = position_log_likelihood(&s, &bbox(0.0, 0.0, 10.0, 10.0), &p).unwrap();
        let det_s: f64 = (2.0 + 10.0) * (3.0 + 10.0) * (4.0 + 10.0) * (5.0 + 10.0);
        let expected = -0.5 * ((2.0 * std::f64::consts::PI).powi(4) * det_s).ln();
        assert!((ll - expected).abs() < 1e-12);
    }

    #[test]
    fn position_likelihood_monotone_in_distance() {
        let s = state([0.0, 0.0, 0.0, 0.0, 10.0, 10.0], [2.0, 3.0, 1.0, 1.0, 4.0, 5.0]);
        let p = params();
        // S_xx = 12, so offsets sqrt(12) and 2 sqrt(12) are Mahalanobis 1 and 2.
        let near = position_log_likelihood(&s, &bbox(12f64.sqrt(), 0.0, 10.0, 10.0), &p).unwrap();
        let far = position_log_likelihood(&s, &bbox(2.0 * 12f64.sqrt(), 0.0, 10.0, 10.0), &p).unwrap();
        assert!(near > far);
        assert!((near - far - 1.5).abs() < 1e-12);
    }

    #[test]
    fn position_only_flag_uses_2d_marginal() {
        let s = state([0.0, 0.0, 0.0, 0.0, 10.0, 10.0], [2.0, 3.0, 1.0, 1.0, 4.0, 5.0]);
        let p = MotionParams {
            position_only_likelihood: true,
            ..params()
        };
        let a = position_log_likelihood(&s, &bbox(1.0, 1.0, 10.0, 10.0), &p).unwrap();
        let b = position_log_likelihood(&s, &bbox(1.0, 1.0, 90.0, 3.0), &p).unwrap();
        assert_eq!(a, b);
        let expected = -0.5 * (2.0 * std::f64::consts::TAU.ln() + (12.0_f64 * 13.0).ln() + 1.0 / 12.0 + 1.0 / 13.0);
        assert!((a - expected).abs() < 1e-12);
    }

    #[test]
    fn init_track_layout() {
        let det = Detection::new(3, 0, bbox(25.0, 40.0, 30.0, 40.0), 0.9);
        let t = init_track(&det, &params(), 7).unwrap();
        assert_eq!(t.mean().to_array(), [25.0, 40.0, 0.0, 0.0, 30.0, 40.0]);
        assert_eq!(t.cov().diagonal(), [10.0, 10.0, 100.0, 100.0, 10.0, 10.0]);
        assert!(t.ref_feature().is_none());
        assert_eq!(t.feature_count(), 0);
        assert_eq!(t.last_frame(), 3);
        assert_eq!(t.id(), 7);

        let f = FeatureVec::normalized(vec![1.0, 1.0]).unwrap();
        let t = init_track(&det.with_feature(f.clone()), &params(), 8).unwrap();
        assert_eq!(t.ref_feature(), Some(&f));
        assert_eq!(t.feature_count(), 1);
    }

    #[test]
    fn predict_to_same_frame_is_noop() {
        let s = state([0.0, 0.0, 1.0, 1.0, 10.0, 10.0], [1.0; 6]);
        assert_eq!(predict_to(&s, 0, &params()), s);
        let moved = predict_to(&s, 3, &params());
        assert_eq!(moved.mean().to_array()[0], 3.0);
        assert_eq!(moved.last_frame(), 3);
    }

    #[test]
    fn covariance_stays_pd_over_random_cycles() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = params();
        let mut s = state([100.0, 100.0, 0.0, 0.0, 40.0, 100.0], [10.0, 10.0, 100.0, 100.0, 10.0, 10.0]);
        for _ in 0..1000 {
            let dt = rng.random_range(1..4) as f64;
            s = predict(&s, dt, &p);
            check_covariance(s.cov()).unwrap();
            let m = s.mean().to_array();
            let z = bbox(
                m[0] + rng.random_range(-5.0..5.0),
                m[1] + rng.random_range(-5.0..5.0),
                40.0 + rng.random_range(-2.0..2.0),
                100.0 + rng.random_range(-2.0..2.0),
            );
            s = update(&s, &z, &p).unwrap();
            check_covariance(s.cov()).unwrap();
        }
    }

    #[test]
    fn runs_in_f32() {
        let s: TrackState<f32> =
            TrackState::new(1, Vector::from_array([0.0, 0.0, 1.0, 0.0, 10.0, 10.0]), Matrix::from_diagonal([1.0; 6]), 0)
                .unwrap();
        let p = MotionParams::<f32>::default();
        let s = predict(&s, 1.0, &p);
        let u = update(&s, &BBox::new(1.0, 0.0, 10.0, 10.0).unwrap(), &p).unwrap();
        assert!((u.mean().to_array()[0] - 1.0).abs() < 1e-5);
    }
}
