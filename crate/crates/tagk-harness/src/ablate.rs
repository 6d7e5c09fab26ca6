//! Kaczmarz-variant ablation on shared measurement streams.
//!
//! For each seed, one closed-loop episode is flown under oracle parameter
//! feedback while every estimator-step measurement window is recorded. All
//! four Kaczmarz variants then replay the identical window sequence offline,
//! so their error curves differ only through the update rule.

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use tagk_core::estimators::{EstimatorError, MeasurementBlock, StepStatus};
use tagk_core::linalg::Vector;
use tagk_core::quadsim::{
    run_episode, EpisodeConfig, EstimatorDriver, NoiseLevel, QuadModel, StepContext, Trajectory,
};

use crate::pool::run_indexed;
use crate::registry::EstimatorKind;

/// Replay order; columns in the output CSVs follow it.
pub const VARIANTS: [EstimatorKind; 4] = EstimatorKind::KACZMARZ;

#[derive(Debug, Clone, PartialEq)]
pub struct AblateConfig {
    pub seeds: usize,
    pub noise: NoiseLevel,
    pub base_seed: u64,
    pub workers: usize,
    /// Estimator steps counted after each event when scoring recovery.
    pub post_event_steps: usize,
}

impl Default for AblateConfig {
    fn default() -> Self {
        AblateConfig {
            seeds: 100,
            noise: NoiseLevel::Medium,
            base_seed: 0,
            workers: 1,
            post_event_steps: 3,
        }
    }
}

impl AblateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds == 0 || self.post_event_steps == 0 {
            bail!("ablation needs at least one seed and one post-event step");
        }
        Ok(())
    }
}

/// One recorded estimator step: the measurement window and the true
/// parameters in effect when it was taken.
#[derive(Debug, Clone)]
struct StepRecord {
    time: f64,
    block: MeasurementBlock,
    theta_true: Vector,
}

/// Oracle-feedback driver that records every measurement window it is
/// offered.
#[derive(Default)]
struct RecordingOracle {
    records: Vec<StepRecord>,
}

impl EstimatorDriver for RecordingOracle {
    fn step(
        &mut self,
        block: &MeasurementBlock,
        _warm_start: &Vector,
        ctx: &StepContext<'_>,
    ) -> Result<(Vector, StepStatus), EstimatorError> {
        self.records.push(StepRecord {
            time: ctx.time,
            block: block.clone(),
            theta_true: ctx.theta_true.clone(),
        });
        Ok((ctx.theta_true.clone(), StepStatus::Updated))
    }
}

/// Relative parameter errors of all variants at one estimator step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSeriesRow {
    pub seed: u64,
    pub t: f64,
    pub rk_err: f64,
    pub tark_err: f64,
    pub grk_err: f64,
    pub tagk_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationEventRow {
    pub seed: u64,
    pub event: String,
    pub time: f64,
}

/// Per-seed scores: mean error over the first post-event steps (averaged
/// over both events) and the error at the final step, per variant in
/// [`VARIANTS`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSeedRow {
    pub seed: u64,
    pub steps: usize,
    pub rk_post_event: f64,
    pub tark_post_event: f64,
    pub grk_post_event: f64,
    pub tagk_post_event: f64,
    pub rk_final: f64,
    pub tark_final: f64,
    pub grk_final: f64,
    pub tagk_final: f64,
}

#[derive(Debug, Clone)]
pub struct AblationResult {
    pub series: Vec<AblationSeriesRow>,
    pub events: Vec<AblationEventRow>,
    pub seeds: Vec<AblationSeedRow>,
}

fn relative_error(hat: &Vector, truth: &Vector) -> f64 {
    hat.sub(truth).norm() / truth.norm()
}

fn replay_seed(
    model: &QuadModel,
    cfg: &AblateConfig,
    index: usize,
) -> Result<(Vec<AblationSeriesRow>, Vec<AblationEventRow>, AblationSeedRow)> {
    let seed = cfg.base_seed + index as u64;
    let trajectory = Trajectory::ALL[index % Trajectory::ALL.len()];
    let mut episode_cfg = EpisodeConfig::new(trajectory, cfg.noise, seed);
    episode_cfg.safety_filter = false;

    let mut recorder = RecordingOracle::default();
    let trace = run_episode(model, &episode_cfg, &mut recorder);
    if trace.fault || recorder.records.is_empty() {
        bail!("recording episode for seed {seed} produced no usable windows");
    }

    // Offline replay: each variant owns its sampling stream but consumes the
    // identical window sequence.
    let theta0 = model.nominal_params.theta().clone();
    let mut errors = vec![Vec::with_capacity(recorder.records.len()); VARIANTS.len()];
    for (v, kind) in VARIANTS.iter().enumerate() {
        let mut estimator = kind
            .make_quad_estimator(model, &theta0, seed, 100 + v as u64)
            .expect("Kaczmarz variants are constructible");
        let mut theta = theta0.clone();
        for record in &recorder.records {
            let (next, _) = estimator
                .step(&record.block, &theta)
                .map_err(|e| anyhow::anyhow!("{} replay failed on seed {seed}: {e}", kind))?;
            theta = next;
            errors[v].push(relative_error(&theta, &record.theta_true));
        }
    }

    let series = recorder
        .records
        .iter()
        .enumerate()
        .map(|(s, record)| AblationSeriesRow {
            seed,
            t: record.time,
            rk_err: errors[0][s],
            tark_err: errors[1][s],
            grk_err: errors[2][s],
            tagk_err: errors[3][s],
        })
        .collect();

    let events: Vec<AblationEventRow> = trace
        .events
        .iter()
        .map(|record| AblationEventRow {
            seed,
            event: match record.event {
                tagk_core::quadsim::Event::PayloadAdded => "payload_added".to_owned(),
                tagk_core::quadsim::Event::PayloadDropped => "payload_dropped".to_owned(),
            },
            time: record.time,
        })
        .collect();

    // Mean error over the first post_event_steps estimator steps strictly
    // after each event, averaged across events.
    let mut post_event = [0.0; 4];
    let mut post_count = 0usize;
    for event in &trace.events {
        let step_indices: Vec<usize> = recorder
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.time > event.time)
            .map(|(s, _)| s)
            .take(cfg.post_event_steps)
            .collect();
        for &s in &step_indices {
            for v in 0..VARIANTS.len() {
                post_event[v] += errors[v][s];
            }
        }
        post_count += step_indices.len();
    }
    if post_count == 0 {
        bail!("seed {seed} has no post-event estimator steps");
    }
    for value in &mut post_event {
        *value /= post_count as f64;
    }
    let last = recorder.records.len() - 1;

    let seed_row = AblationSeedRow {
        seed,
        steps: recorder.records.len(),
        rk_post_event: post_event[0],
        tark_post_event: post_event[1],
        grk_post_event: post_event[2],
        tagk_post_event: post_event[3],
        rk_final: errors[0][last],
        tark_final: errors[1][last],
        grk_final: errors[2][last],
        tagk_final: errors[3][last],
    };
    Ok((series, events, seed_row))
}

/// Runs the ablation over all seeds.
pub fn run_ablation(model: &QuadModel, cfg: &AblateConfig) -> Result<AblationResult> {
    cfg.validate()?;
    let per_seed = run_indexed(cfg.seeds, cfg.workers, |i| replay_seed(model, cfg, i));
    let mut result = AblationResult {
        series: Vec::new(),
        events: Vec::new(),
        seeds: Vec::new(),
    };
    for item in per_seed {
        let (series, events, seed_row) = item?;
        result.series.extend(series);
        result.events.extend(events);
        result.seeds.push(seed_row);
    }
    Ok(result)
}

/// Sample variance of the final-step errors of one variant column.
pub fn final_error_variance(seeds: &[AblationSeedRow], pick: fn(&AblationSeedRow) -> f64) -> f64 {
    let n = seeds.len() as f64;
    let mean = seeds.iter().map(pick).sum::<f64>() / n;
    seeds.iter().map(|s| (pick(s) - mean).powi(2)).sum::<f64>() / n
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_ablation() -> AblationResult {
        let model = QuadModel::crazyflie();
        let cfg = AblateConfig {
            seeds: 2,
            workers: 2,
            ..AblateConfig::default()
        };
        run_ablation(&model, &cfg).unwrap()
    }

    #[test]
    fn every_seed_reports_both_events_and_a_full_series() {
        let result = tiny_ablation();
        assert_eq!(result.seeds.len(), 2);
        for row in &result.seeds {
            assert!(row.steps > 10);
            let events: Vec<_> = result
                .events
                .iter()
                .filter(|e| e.seed == row.seed)
                .collect();
            assert_eq!(events.len(), 2);
            let series_len = result.series.iter().filter(|s| s.seed == row.seed).count();
            assert_eq!(series_len, row.steps);
        }
    }

    #[test]
    fn errors_are_finite_and_nonnegative() {
        let result = tiny_ablation();
        for row in &result.series {
            for err in [row.rk_err, row.tark_err, row.grk_err, row.tagk_err] {
                assert!(err.is_finite() && err >= 0.0);
            }
        }
    }

    #[test]
    fn replay_is_deterministic() {
        let a = tiny_ablation();
        let b = tiny_ablation();
        assert_eq!(a.series, b.series);
        assert_eq!(a.seeds, b.seeds);
    }

    #[test]
    fn variance_helper_matches_hand_computation() {
        let rows = vec![
            AblationSeedRow {
                seed: 0,
                steps: 1,
                rk_post_event: 0.0,
                tark_post_event: 0.0,
                grk_post_event: 0.0,
                tagk_post_event: 0.0,
                rk_final: 1.0,
                tark_final: 0.0,
                grk_final: 0.0,
                tagk_final: 0.0,
            },
            AblationSeedRow {
                seed: 1,
                steps: 1,
                rk_post_event: 0.0,
                tark_post_event: 0.0,
                grk_post_event: 0.0,
                tagk_post_event: 0.0,
                rk_final: 3.0,
                tark_final: 0.0,
                grk_final: 0.0,
                tagk_final: 0.0,
            },
        ];
        assert_eq!(final_error_variance(&rows, |r| r.rk_final), 1.0);
    }
}
