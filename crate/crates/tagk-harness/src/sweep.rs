//! Closed-loop episode sweep over estimators and noise levels.
//!
//! Seeds depend only on the noise level and episode index, so every
//! estimator sees the same set of episode randomizations at a given noise
//! level (paired comparisons), while different noise levels use disjoint
//! seeds.

use std::path::Path;

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use tagk_core::quadsim::{NoiseLevel, Outcome, QuadModel, Trajectory};

use crate::bench::percentile;
use crate::episodes::{episode_stats, run_one, EpisodeSpec};
use crate::pool::run_indexed;
use crate::registry::EstimatorKind;
use crate::trace_io::write_trace;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Episodes per (estimator, noise) cell.
    pub episodes: usize,
    pub noise_levels: Vec<NoiseLevel>,
    pub estimators: Vec<EstimatorKind>,
    pub base_seed: u64,
    pub workers: usize,
    /// Write one trace CSV per episode under `traces/`.
    pub emit_traces: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            episodes: 100,
            noise_levels: NoiseLevel::ALL.to_vec(),
            estimators: EstimatorKind::MEASURED.to_vec(),
            base_seed: 0,
            workers: 1,
            emit_traces: false,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            bail!("episodes per cell must be at least 1");
        }
        if self.noise_levels.is_empty() || self.estimators.is_empty() {
            bail!("noise level and estimator lists must be non-empty");
        }
        Ok(())
    }

    /// Seed for episode `index` at the `noise_index`-th configured noise
    /// level. Identical across estimators, disjoint across noise levels.
    pub fn episode_seed(&self, noise_index: usize, index: usize) -> u64 {
        self.base_seed + (noise_index * self.episodes + index) as u64
    }

    /// Episodes rotate through the trajectory set by index.
    pub fn episode_trajectory(&self, index: usize) -> Trajectory {
        Trajectory::ALL[index % Trajectory::ALL.len()]
    }
}

/// Slim per-episode record retained by the sweep (full traces go straight
/// to disk when requested).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub estimator: String,
    pub noise: String,
    pub index: usize,
    pub seed: u64,
    pub trajectory: String,
    pub outcome: String,
    pub pos_err_cm: Option<f64>,
    pub mean_est_err: Option<f64>,
    pub t_plus_1_est_err: Option<f64>,
    /// Median per-update latency within the episode, us.
    pub median_us: Option<f64>,
    #[serde(skip)]
    pub latencies_us: Vec<f64>,
}

/// One summary row per (estimator, noise) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub estimator: String,
    pub noise: String,
    pub episodes: usize,
    /// Median over episodes of the per-episode mean absolute position
    /// error, cm.
    pub pos_err_cm: Option<f64>,
    pub mean_est_err: Option<f64>,
    pub t_plus_1_est_err: Option<f64>,
    pub success_pct: f64,
    pub aborted_pct: f64,
    pub median_us: Option<f64>,
    pub p95_us: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub summary: Vec<SummaryRow>,
    pub episodes: Vec<EpisodeSummary>,
}

fn median(values: &mut Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
    Some(percentile(values, 50.0))
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Aggregates one cell's episodes into a summary row.
pub fn summarize_cell(
    kind: EstimatorKind,
    noise: NoiseLevel,
    episodes: &[EpisodeSummary],
) -> SummaryRow {
    let mut pos: Vec<f64> = episodes.iter().filter_map(|e| e.pos_err_cm).collect();
    let est: Vec<f64> = episodes.iter().filter_map(|e| e.mean_est_err).collect();
    let post: Vec<f64> = episodes.iter().filter_map(|e| e.t_plus_1_est_err).collect();
    let mut lat: Vec<f64> = episodes
        .iter()
        .flat_map(|e| e.latencies_us.iter().copied())
        .collect();
    let successes = episodes
        .iter()
        .filter(|e| e.outcome == Outcome::Success.name())
        .count();
    let aborted = episodes
        .iter()
        .filter(|e| e.outcome == Outcome::Aborted.name())
        .count();
    let n = episodes.len().max(1);
    let (median_us, p95_us) = if lat.is_empty() {
        (None, None)
    } else {
        lat.sort_by(|a, b| a.partial_cmp(b).expect("finite latencies"));
        (Some(percentile(&lat, 50.0)), Some(percentile(&lat, 95.0)))
    };
    SummaryRow {
        estimator: kind.name().to_owned(),
        noise: noise.name().to_owned(),
        episodes: episodes.len(),
        pos_err_cm: median(&mut pos),
        mean_est_err: mean(&est),
        t_plus_1_est_err: mean(&post),
        success_pct: 100.0 * successes as f64 / n as f64,
        aborted_pct: 100.0 * aborted as f64 / n as f64,
        median_us,
        p95_us,
    }
}

/// File name of an episode's trace CSV relative to the output directory.
pub fn trace_file_name(kind: EstimatorKind, noise: NoiseLevel, index: usize) -> String {
    format!("traces/{}_{}_{:04}.csv", kind.name(), noise.name(), index)
}

/// Runs the full sweep. When `out_dir` is given and `emit_traces` is set,
/// workers write each episode's trace CSV as they go.
pub fn run_sweep(
    model: &QuadModel,
    cfg: &SweepConfig,
    out_dir: Option<&Path>,
) -> Result<SweepReport> {
    cfg.validate()?;
    let cells: Vec<(EstimatorKind, usize, NoiseLevel)> = cfg
        .estimators
        .iter()
        .flat_map(|kind| {
            cfg.noise_levels
                .iter()
                .enumerate()
                .map(move |(ni, noise)| (*kind, ni, *noise))
        })
        .collect();
    let tasks = cells.len() * cfg.episodes;
    let trace_dir = if cfg.emit_traces { out_dir } else { None };
    if let Some(dir) = trace_dir {
        std::fs::create_dir_all(dir.join("traces"))?;
    }

    let results: Vec<Result<EpisodeSummary>> = run_indexed(tasks, cfg.workers, |task| {
        let (kind, noise_index, noise) = cells[task / cfg.episodes];
        let index = task % cfg.episodes;
        let seed = cfg.episode_seed(noise_index, index);
        let trajectory = cfg.episode_trajectory(index);
        let spec = EpisodeSpec::new(kind, noise, trajectory, seed);
        let output = run_one(model, &spec);
        if let Some(dir) = trace_dir {
            write_trace(dir.join(trace_file_name(kind, noise, index)), &output.trace)?;
        }
        let stats = episode_stats(&output.trace);
        let mut lat = output.latencies_us;
        let median_us = median(&mut lat);
        Ok(EpisodeSummary {
            estimator: kind.name().to_owned(),
            noise: noise.name().to_owned(),
            index,
            seed,
            trajectory: trajectory.name().to_owned(),
            outcome: stats.outcome.name().to_owned(),
            pos_err_cm: stats.pos_err_cm,
            mean_est_err: stats.mean_est_err,
            t_plus_1_est_err: stats.t_plus_1_est_err,
            median_us,
            latencies_us: lat,
        })
    });
    let episodes = results.into_iter().collect::<Result<Vec<_>>>()?;

    let summary = cells
        .iter()
        .enumerate()
        .map(|(c, (kind, _, noise))| {
            summarize_cell(*kind, *noise, &episodes[c * cfg.episodes..(c + 1) * cfg.episodes])
        })
        .collect();
    Ok(SweepReport { summary, episodes })
}
