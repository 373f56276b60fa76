//! Run configuration: every parameter block in one flat `key=value` document.
//!
//! ```text
//! # comments and blank lines are ignored
//! motion.meas_noise_pos=10
//! association.mode=posapp
//! tracker.num_particles=100
//! ```
//!
//! Missing keys keep their defaults; unknown keys are rejected.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::appearance::{AppearanceParams, UpdateMode};
use crate::association::AssociationParams;
use crate::error::{Error, Result};
use crate::motion::MotionParams;
use crate::scalar::Scalar;

/// Particle-filter hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerParams<T> {
    pub num_particles: usize,
    /// Resample when ESS drops below this fraction of `num_particles`.
    pub resample_ess_fraction: T,
    pub confirm_hits: u32,
    pub delete_misses: u32,
    pub rng_seed: u64,
    /// Replace sampling by per-row argmax.
    pub deterministic: bool,
}

impl<T: Scalar> Default for TrackerParams<T> {
    fn default() -> Self {
        TrackerParams {
            num_particles: 100,
            resample_ess_fraction: T::lit(0.5),
            confirm_hits: 3,
            delete_misses: 10,
            rng_seed: 0,
            deterministic: false,
        }
    }
}

impl<T: Scalar> TrackerParams<T> {
    pub fn validate(&self) -> Result<()> {
        if self.num_particles == 0 {
            return Err(Error::invalid("tracker params", "num_particles must be at least 1"));
        }
        let f = self.resample_ess_fraction;
        if !(f > T::zero() && f <= T::one()) {
            return Err(Error::invalid("tracker params", "resample_ess_fraction must be in (0, 1]"));
        }
        if self.confirm_hits == 0 || self.delete_misses == 0 {
            return Err(Error::invalid("tracker params", "confirm_hits and delete_misses must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig<T> {
    pub motion: MotionParams<T>,
    pub appearance: AppearanceParams<T>,
    pub association: AssociationParams<T>,
    pub tracker: TrackerParams<T>,
}

impl<T: Scalar> Default for RunConfig<T> {
    fn default() -> Self {
        RunConfig {
            motion: MotionParams::default(),
            appearance: AppearanceParams::default(),
            association: AssociationParams::default(),
            tracker: TrackerParams::default(),
        }
    }
}

const DEFAULT_LAMBDA: f64 = 0.9;

impl<T: Scalar> RunConfig<T> {
    pub fn validate(&self) -> Result<()> {
        self.motion.validate()?;
        self.appearance.validate()?;
        self.association.validate()?;
        self.tracker.validate()
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = HashSet::new();
        let mut exponential = false;
        let mut lambda = T::lit(DEFAULT_LAMBDA);

        for raw in text.lines() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                key: line.to_string(),
                message: "expected key=value".into(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(config_err(key, "duplicate key"));
            }
            match key {
                "motion.process_noise_pos" => cfg.motion.process_noise_pos = num(key, value)?,
                "motion.process_noise_vel" => cfg.motion.process_noise_vel = num(key, value)?,
                "motion.process_noise_size" => cfg.motion.process_noise_size = num(key, value)?,
                "motion.meas_noise_pos" => cfg.motion.meas_noise_pos = num(key, value)?,
                "motion.meas_noise_size" => cfg.motion.meas_noise_size = num(key, value)?,
                "motion.initial_vel_var" => cfg.motion.initial_vel_var = num(key, value)?,
                "motion.position_only_likelihood" => cfg.motion.position_only_likelihood = parse(key, value)?,
                "appearance.update_mode" => {
                    exponential = match value {
                        "cumulative_mean" => false,
                        "exponential" => true,
                        _ => return Err(config_err(key, "expected cumulative_mean or exponential")),
                    }
                }
                "appearance.lambda" => lambda = num(key, value)?,
                "appearance.renormalize" => cfg.appearance.renormalize = parse(key, value)?,
                "appearance.distance_scale" => cfg.appearance.distance_scale = num(key, value)?,
                "association.mode" => {
                    cfg.association.mode = value.parse().map_err(|e: Error| config_err(key, e.to_string()))?
                }
                "association.gate_chi2" => cfg.association.gate_chi2 = num(key, value)?,
                "association.new_track_log_density" => cfg.association.new_track_log_density = num(key, value)?,
                "association.min_likelihood_floor" => cfg.association.min_likelihood_floor = num(key, value)?,
                "tracker.num_particles" => cfg.tracker.num_particles = parse(key, value)?,
                "tracker.resample_ess_fraction" => cfg.tracker.resample_ess_fraction = num(key, value)?,
                "tracker.confirm_hits" => cfg.tracker.confirm_hits = parse(key, value)?,
                "tracker.delete_misses" => cfg.tracker.delete_misses = parse(key, value)?,
                "tracker.rng_seed" => cfg.tracker.rng_seed = parse(key, value)?,
                "tracker.deterministic" => cfg.tracker.deterministic = parse(key, value)?,
                _ => return Err(config_err(key, "unknown key")),
            }
        }
        if exponential {
            cfg.appearance.update_mode = UpdateMode::Exponential(lambda);
        }
        cfg.validate().map_err(|e| config_err("<document>", e.to_string()))?;
        Ok(cfg)
    }
}

fn config_err(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

fn parse<V: FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .parse()
        .map_err(|_| config_err(key, format!("cannot parse '{value}'")))
}

fn num<T: Scalar>(key: &str, value: &str) -> Result<T> {
    let v: f64 = parse(key, value)?;
    Ok(T::lit(v))
}

/// Writes every key, so `parse(cfg.to_string())` reproduces `cfg`.
impl<T: Scalar> fmt::Display for RunConfig<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.motion;
        writeln!(f, "motion.process_noise_pos={}", m.process_noise_pos)?;
        writeln!(f, "motion.process_noise_vel={}", m.process_noise_vel)?;
        writeln!(f, "motion.process_noise_size={}", m.process_noise_size)?;
        writeln!(f, "motion.meas_noise_pos={}", m.meas_noise_pos)?;
        writeln!(f, "motion.meas_noise_size={}", m.meas_noise_size)?;
        writeln!(f, "motion.initial_vel_var={}", m.initial_vel_var)?;
        writeln!(f, "motion.position_only_likelihood={}", m.position_only_likelihood)?;
        let a = &self.appearance;
        match a.update_mode {
            UpdateMode::CumulativeMean => {
                writeln!(f, "appearance.update_mode=cumulative_mean")?;
                writeln!(f, "appearance.lambda={DEFAULT_LAMBDA}")?;
            }
            UpdateMode::Exponential(l) => {
                writeln!(f, "appearance.update_mode=exponential")?;
                writeln!(f, "appearance.lambda={l}")?;
            }
        }
        writeln!(f, "appearance.renormalize={}", a.renormalize)?;
        writeln!(f, "appearance.distance_scale={}", a.distance_scale)?;
        let s = &self.association;
        writeln!(f, "association.mode={}", s.mode)?;
        writeln!(f, "association.gate_chi2={}", s.gate_chi2)?;
        writeln!(f, "association.new_track_log_density={}", s.new_track_log_density)?;
        writeln!(f, "association.min_likelihood_floor={}", s.min_likelihood_floor)?;
        let t = &self.tracker;
        writeln!(f, "tracker.num_particles={}", t.num_particles)?;
        writeln!(f, "tracker.resample_ess_fraction={}", t.resample_ess_fraction)?;
        writeln!(f, "tracker.confirm_hits={}", t.confirm_hits)?;
        writeln!(f, "tracker.delete_misses={}", t.delete_misses)?;
        writeln!(f, "tracker.rng_seed={}", t.rng_seed)?;
        writeln!(f, "tracker.deterministic={}", t.deterministic)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::association::AssociationMode;

    #[test]
    fn empty_document_is_default() {
        assert_eq!(RunConfig::<f64>::parse("").unwrap(), RunConfig::default());
        assert_eq!(RunConfig::<f64>::parse("# only a comment\n\n").unwrap(), RunConfig::default());
    }

    #[test]
    fn overrides_apply() {
        let cfg = RunConfig::<f64>::parse(
            "motion.meas_noise_pos=4.5\nassociation.mode=posonly\ntracker.num_particles=7\n\
             appearance.update_mode=exponential\nappearance.lambda=0.8\ntracker.deterministic=true\n",
        )
        .unwrap();
        assert_eq!(cfg.motion.meas_noise_pos, 4.5);
        assert_eq!(cfg.association.mode, AssociationMode::PosOnly);
        assert_eq!(cfg.tracker.num_particles, 7);
        assert_eq!(cfg.appearance.update_mode, UpdateMode::Exponential(0.8));
        assert!(cfg.tracker.deterministic);
    }

    #[test]
    fn unknown_and_malformed_keys_rejected() {
        assert!(RunConfig::<f64>::parse("motion.bogus=1").is_err());
        assert!(RunConfig::<f64>::parse("motion.meas_noise_pos").is_err());
        assert!(RunConfig::<f64>::parse("motion.meas_noise_pos=abc").is_err());
        assert!(RunConfig::<f64>::parse("motion.meas_noise_pos=-1").is_err());
        assert!(RunConfig::<f64>::parse("tracker.num_particles=0").is_err());
        assert!(RunConfig::<f64>::parse("association.mode=hist").is_err());
        assert!(RunConfig::<f64>::parse("tracker.rng_seed=1\ntracker.rng_seed=2").is_err());
    }

    #[test]
    fn display_round_trips() {
        let mut cfg = RunConfig::<f64>::default();
        cfg.motion.process_noise_vel = 0.125;
        cfg.appearance.update_mode = UpdateMode::Exponential(0.3);
        cfg.association.gate_chi2 = 9.4877;
        cfg.tracker.rng_seed = 42;
        assert_eq!(RunConfig::<f64>::parse(&cfg.to_string()).unwrap(), cfg);
    }
}
