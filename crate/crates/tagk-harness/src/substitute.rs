//! Estimate-substitution study.
//!
//! Each recursive baseline flies the same episodes twice: once plain, and
//! once with a shadow TAG-K estimator running alongside it. In the
//! substituted run, at the first estimator step after each payload event the
//! baseline's internal estimate is overwritten with the shadow's, isolating
//! the value of TAG-K's fast post-event recovery.

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use tagk_core::estimators::{Estimator, EstimatorError, MeasurementBlock, StepStatus};
use tagk_core::linalg::Vector;
use tagk_core::quadsim::{EstimatorDriver, NoiseLevel, QuadModel, StepContext, Trajectory};

use crate::episodes::{episode_stats, run_one, EpisodeSpec};
use crate::pool::run_indexed;
use crate::registry::{EstimatorKind, ESTIMATOR_STREAM, SHADOW_STREAM};

#[derive(Debug, Clone, PartialEq)]
pub struct SubstituteConfig {
    /// Paired episodes per baseline.
    pub seeds: usize,
    pub noise: NoiseLevel,
    pub baselines: Vec<EstimatorKind>,
    pub base_seed: u64,
    pub workers: usize,
}

impl Default for SubstituteConfig {
    fn default() -> Self {
        SubstituteConfig {
            seeds: 100,
            noise: NoiseLevel::Medium,
            baselines: EstimatorKind::BASELINES.to_vec(),
            base_seed: 0,
            workers: 1,
        }
    }
}

impl SubstituteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds == 0 || self.baselines.is_empty() {
            bail!("substitution needs at least one seed and one baseline");
        }
        Ok(())
    }
}

/// Baseline driver with a shadow estimator. The shadow consumes the same
/// measurement windows from its own warm-start chain; right after each
/// payload event its estimate replaces the baseline's.
pub struct SubstitutedDriver {
    baseline: Estimator,
    shadow: Estimator,
    shadow_theta: Vector,
    shadow_ok: bool,
    events_handled: usize,
    pub substitutions: usize,
}

impl SubstitutedDriver {
    pub fn new(baseline: Estimator, shadow: Estimator, theta0: Vector) -> Self {
        SubstitutedDriver {
            baseline,
            shadow,
            shadow_theta: theta0,
            shadow_ok: true,
            events_handled: 0,
            substitutions: 0,
        }
    }
}

impl EstimatorDriver for SubstitutedDriver {
    fn step(
        &mut self,
        block: &MeasurementBlock,
        warm_start: &Vector,
        ctx: &StepContext<'_>,
    ) -> Result<(Vector, StepStatus), EstimatorError> {
        match self.shadow.step(block, &self.shadow_theta) {
            Ok((theta, StepStatus::Updated)) => {
                self.shadow_theta = theta;
                self.shadow_ok = true;
            }
            _ => self.shadow_ok = false,
        }
        let base = self.baseline.step(block, warm_start);
        if ctx.events_seen > self.events_handled {
            self.events_handled = ctx.events_seen;
            if self.shadow_ok {
                self.baseline.set_estimate(&self.shadow_theta);
                self.substitutions += 1;
                return Ok((self.shadow_theta.clone(), StepStatus::Updated));
            }
        }
        base
    }
}

/// Paired result for one (baseline, seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstitutionPair {
    pub estimator: String,
    pub seed: u64,
    pub trajectory: String,
    pub plain_outcome: String,
    pub substituted_outcome: String,
    pub plain_pos_err_cm: Option<f64>,
    pub substituted_pos_err_cm: Option<f64>,
    pub substitutions: usize,
}

/// Runs the paired plain/substituted episodes for every baseline and seed.
pub fn run_substitution(model: &QuadModel, cfg: &SubstituteConfig) -> Result<Vec<SubstitutionPair>> {
    cfg.validate()?;
    let tasks = cfg.baselines.len() * cfg.seeds;
    let results: Vec<Result<SubstitutionPair>> = run_indexed(tasks, cfg.workers, |task| {
        let kind = cfg.baselines[task / cfg.seeds];
        let index = task % cfg.seeds;
        let seed = cfg.base_seed + index as u64;
        let trajectory = Trajectory::ALL[index % Trajectory::ALL.len()];
        let spec = EpisodeSpec::new(kind, cfg.noise, trajectory, seed);

        let plain = run_one(model, &spec);
        let plain_stats = episode_stats(&plain.trace);

        let theta0 = model.nominal_params.theta().clone();
        let baseline = kind
            .make_quad_estimator(model, &theta0, seed, ESTIMATOR_STREAM)
            .expect("baselines are constructible");
        let shadow = EstimatorKind::Tagk
            .make_quad_estimator(model, &theta0, seed, SHADOW_STREAM)
            .expect("TAG-K is constructible");
        let mut driver = SubstitutedDriver::new(baseline, shadow, theta0);
        // The substituted episode uses the same config (and thus the same
        // safety screening) as the plain one.
        let substituted = tagk_core::quadsim::run_episode(model, &spec.config(), &mut driver);
        let substitutions = driver.substitutions;
        let sub_stats = episode_stats(&substituted);

        Ok(SubstitutionPair {
            estimator: kind.name().to_owned(),
            seed,
            trajectory: trajectory.name().to_owned(),
            plain_outcome: plain_stats.outcome.name().to_owned(),
            substituted_outcome: sub_stats.outcome.name().to_owned(),
            plain_pos_err_cm: plain_stats.pos_err_cm,
            substituted_pos_err_cm: sub_stats.pos_err_cm,
            substitutions,
        })
    });
    results.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use tagk_core::quadsim::run_episode;

    #[test]
    fn self_substitution_leaves_the_trace_unchanged() {
        // Substituting a deterministic baseline with a shadow copy of itself
        // must reproduce the plain episode exactly: both instances compute
        // the same estimate, so the overwrite is a no-op.
        let model = QuadModel::crazyflie();
        let kind = EstimatorKind::RlsLow;
        let spec = EpisodeSpec::new(kind, NoiseLevel::Low, Trajectory::Circle, 21);
        let plain = run_one(&model, &spec);

        let theta0 = model.nominal_params.theta().clone();
        let baseline = kind.make_estimator(&theta0, 21, ESTIMATOR_STREAM).unwrap();
        let shadow = kind.make_estimator(&theta0, 21, SHADOW_STREAM).unwrap();
        let mut driver = SubstitutedDriver::new(baseline, shadow, theta0);
        let cfg = spec.config();
        let substituted = run_episode(&model, &cfg, &mut driver);

        assert!(driver.substitutions >= 1);
        assert_eq!(substituted, plain.trace);
    }

    #[test]
    fn substitution_counts_one_per_event() {
        let model = QuadModel::crazyflie();
        let cfg = SubstituteConfig {
            seeds: 2,
            baselines: vec![EstimatorKind::KfLow],
            base_seed: 5,
            workers: 1,
            ..SubstituteConfig::default()
        };
        let pairs = run_substitution(&model, &cfg).unwrap();
        assert_eq!(pairs.len(), 2);
        for pair in &pairs {
            assert!(pair.substitutions <= 2);
            assert!(pair.substitutions >= 1);
        }
    }

    #[test]
    fn paired_runs_share_seed_and_trajectory() {
        let model = QuadModel::crazyflie();
        let cfg = SubstituteConfig {
            seeds: 2,
            baselines: vec![EstimatorKind::RlsHigh, EstimatorKind::KfHigh],
            base_seed: 9,
            workers: 2,
            ..SubstituteConfig::default()
        };
        let pairs = run_substitution(&model, &cfg).unwrap();
        assert_eq!(pairs.len(), 4);
        // Same seed schedule for both baselines.
        assert_eq!(pairs[0].seed, pairs[2].seed);
        assert_eq!(pairs[1].trajectory, pairs[3].trajectory);
    }
}
