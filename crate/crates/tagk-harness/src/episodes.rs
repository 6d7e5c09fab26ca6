//! Single-episode execution shared by the sweep, substitution, and CLI
//! entry points: estimator construction, latency capture, and summary
//! statistics that stay defined even for truncated episodes.

use std::time::Instant;

use tagk_core::estimators::{EstimatorError, MeasurementBlock, StepStatus};
use tagk_core::linalg::Vector;
use tagk_core::physics::{norm3, sub3};
use tagk_core::quadsim::{
    run_episode, EpisodeConfig, EstimatorDriver, NoiseLevel, Outcome, QuadModel, StepContext,
    Trace, Trajectory,
};

use crate::registry::{EstimatorKind, ESTIMATOR_STREAM};

/// Everything that identifies one closed-loop run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSpec {
    pub kind: EstimatorKind,
    pub noise: NoiseLevel,
    pub trajectory: Trajectory,
    pub seed: u64,
    /// Overrides the estimator's default physical-consistency screening.
    pub safety_filter: Option<bool>,
}

impl EpisodeSpec {
    pub fn new(kind: EstimatorKind, noise: NoiseLevel, trajectory: Trajectory, seed: u64) -> Self {
        EpisodeSpec {
            kind,
            noise,
            trajectory,
            seed,
            safety_filter: None,
        }
    }

    pub fn config(&self) -> EpisodeConfig {
        let mut cfg = EpisodeConfig::new(self.trajectory, self.noise, self.seed);
        cfg.safety_filter = self
            .safety_filter
            .unwrap_or_else(|| self.kind.default_safety_filter());
        cfg
    }
}

/// Full result of one run: the trace plus per-update latencies.
#[derive(Debug, Clone)]
pub struct EpisodeOutput {
    pub trace: Trace,
    /// One entry per estimator update, microseconds.
    pub latencies_us: Vec<f64>,
}

/// Driver wrapper that records the wall-clock latency of every update.
pub struct TimedDriver {
    inner: Box<dyn EstimatorDriver>,
    pub latencies_us: Vec<f64>,
}

impl TimedDriver {
    pub fn new(inner: Box<dyn EstimatorDriver>) -> Self {
        TimedDriver {
            inner,
            latencies_us: Vec::new(),
        }
    }
}

impl EstimatorDriver for TimedDriver {
    fn step(
        &mut self,
        block: &MeasurementBlock,
        warm_start: &Vector,
        ctx: &StepContext<'_>,
    ) -> Result<(Vector, StepStatus), EstimatorError> {
        let start = Instant::now();
        let out = self.inner.step(block, warm_start, ctx);
        self.latencies_us
            .push(start.elapsed().as_secs_f64() * 1e6);
        out
    }
}

/// Runs one episode with the spec's estimator, timing each update.
pub fn run_one(model: &QuadModel, spec: &EpisodeSpec) -> EpisodeOutput {
    let cfg = spec.config();
    let theta0 = model.nominal_params.theta().clone();
    let inner = spec.kind.make_driver(model, &theta0, spec.seed, ESTIMATOR_STREAM);
    run_with_driver(model, &cfg, inner)
}

/// Runs one episode with an arbitrary driver, timing each update.
pub fn run_with_driver(
    model: &QuadModel,
    cfg: &EpisodeConfig,
    driver: Box<dyn EstimatorDriver>,
) -> EpisodeOutput {
    let mut timed = TimedDriver::new(driver);
    let trace = run_episode(model, cfg, &mut timed);
    EpisodeOutput {
        trace,
        latencies_us: timed.latencies_us,
    }
}

/// Per-episode statistics that are defined for every trace, including ones
/// truncated before the first estimator step.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStats {
    pub outcome: Outcome,
    /// Mean absolute position error over recorded rows, cm.
    pub pos_err_cm: Option<f64>,
    /// Mean relative parameter error over estimator steps.
    pub mean_est_err: Option<f64>,
    /// Mean relative parameter error at the first estimator step strictly
    /// after each payload event.
    pub t_plus_1_est_err: Option<f64>,
}

pub fn episode_stats(trace: &Trace) -> EpisodeStats {
    let has_steps = trace.rows.iter().any(|r| r.theta.is_some());
    if has_steps {
        let m = tagk_core::quadsim::metrics(trace);
        EpisodeStats {
            outcome: m.outcome,
            pos_err_cm: Some(m.pos_err_cm),
            mean_est_err: Some(m.mean_est_err),
            t_plus_1_est_err: m.t_plus_1_est_err,
        }
    } else {
        let pos_err_cm = (!trace.rows.is_empty()).then(|| {
            100.0
                * trace
                    .rows
                    .iter()
                    .map(|r| norm3(sub3(r.state.position, r.reference.position)))
                    .sum::<f64>()
                / trace.rows.len() as f64
        });
        EpisodeStats {
            outcome: trace.outcome,
            pos_err_cm,
            mean_est_err: None,
            t_plus_1_est_err: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_episode_succeeds_and_records_latencies() {
        let model = QuadModel::crazyflie();
        let spec = EpisodeSpec::new(
            EstimatorKind::Oracle,
            NoiseLevel::None,
            Trajectory::Circle,
            11,
        );
        let out = run_one(&model, &spec);
        assert_eq!(out.trace.outcome, Outcome::Success);
        let steps = out.trace.rows.iter().filter(|r| r.theta.is_some()).count();
        assert_eq!(out.latencies_us.len(), steps);
        assert!(out.latencies_us.iter().all(|l| *l >= 0.0));
        let stats = episode_stats(&out.trace);
        assert_eq!(stats.mean_est_err, Some(0.0));
        assert!(stats.pos_err_cm.unwrap() < 5.0);
    }

    #[test]
    fn same_spec_reproduces_the_trace() {
        let model = QuadModel::crazyflie();
        let spec = EpisodeSpec::new(
            EstimatorKind::Tagk,
            NoiseLevel::Medium,
            Trajectory::Figure8,
            7,
        );
        let a = run_one(&model, &spec);
        let b = run_one(&model, &spec);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn safety_override_changes_the_config() {
        let mut spec = EpisodeSpec::new(
            EstimatorKind::Tagk,
            NoiseLevel::None,
            Trajectory::Circle,
            0,
        );
        assert!(!spec.config().safety_filter);
        spec.safety_filter = Some(true);
        assert!(spec.config().safety_filter);
    }

    #[test]
    fn stats_on_empty_trace_are_all_absent() {
        let trace = Trace {
            rows: Vec::new(),
            events: Vec::new(),
            dt: 0.02,
            duration: 20.0,
            fault: true,
            outcome: Outcome::Aborted,
        };
        let stats = episode_stats(&trace);
        assert_eq!(stats.outcome, Outcome::Aborted);
        assert!(stats.pos_err_cm.is_none());
        assert!(stats.mean_est_err.is_none());
    }
}
