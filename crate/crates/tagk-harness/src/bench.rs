//! Synthetic per-update timing benchmark.

use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use tagk_core::linalg::Vector;
use tagk_core::rng::Stream;

use crate::registry::EstimatorKind;
use crate::synthetic::gen_synthetic;

/// Measurement noise added to the synthetic instances; small enough that
/// every estimator operates in its intended regime.
const INSTANCE_NOISE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// Parameter dimensions to sweep.
    pub sizes: Vec<usize>,
    /// Rows per measurement window.
    pub window_rows: usize,
    /// Timed updates per (estimator, n).
    pub trials: usize,
    /// Untimed updates run first to avoid cold-cache skew.
    pub warmup: usize,
    pub estimators: Vec<EstimatorKind>,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sizes: vec![40, 60, 80, 100, 120],
            window_rows: 30,
            trials: 10,
            warmup: 3,
            estimators: EstimatorKind::MEASURED.to_vec(),
            seed: 0,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.sizes.iter().any(|n| *n == 0) {
            bail!("bench sizes must be non-empty and positive");
        }
        if self.window_rows == 0 {
            bail!("window rows must be positive");
        }
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if self.estimators.is_empty() {
            bail!("estimator list must be non-empty");
        }
        Ok(())
    }
}

/// One benchmark cell. `speedup_vs_tagk` is this estimator's mean latency
/// divided by TAG-K's at the same n (absent when TAG-K was not benchmarked).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub estimator: String,
    pub n: usize,
    pub m: usize,
    pub trials: usize,
    pub mean_us: f64,
    pub median_us: f64,
    pub p95_us: f64,
    pub speedup_vs_tagk: Option<f64>,
}

/// Nearest-rank percentile of an ascending-sorted sample.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let rank = (p / 100.0 * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn summarize(latencies: &mut [f64]) -> (f64, f64, f64) {
    latencies.sort_by(|a, b| a.partial_cmp(b).expect("latencies are finite"));
    let mean = latencies.iter().sum::<f64>() / latencies.len() as f64;
    (mean, percentile(latencies, 50.0), percentile(latencies, 95.0))
}

/// Wall-clock per-update latency for every (estimator, n) cell. The oracle
/// has no update to time and is skipped. All estimators at a given n consume
/// an identical block sequence; timing covers only the update call.
pub fn time_updates(cfg: &BenchConfig) -> Result<Vec<TimingRecord>> {
    cfg.validate()?;
    let mut records = Vec::new();
    for kind in &cfg.estimators {
        if *kind == EstimatorKind::Oracle {
            continue;
        }
        for &n in &cfg.sizes {
            // Identical instances across estimators: the stream id depends
            // only on n.
            let mut rng = Stream::derive(cfg.seed, n as u64);
            let theta0 = Vector::zeros(n);
            let mut estimator = kind
                .make_estimator(&theta0, cfg.seed, 1_000 + n as u64)
                .expect("non-oracle estimators are constructible");
            let mut theta = theta0.clone();
            let mut latencies = Vec::with_capacity(cfg.trials);
            for i in 0..cfg.warmup + cfg.trials {
                let (block, _) = gen_synthetic(n, cfg.window_rows, INSTANCE_NOISE, &mut rng);
                let start = Instant::now();
                let step = estimator.step(&block, &theta);
                let elapsed = start.elapsed();
                let (next, _) = step.with_context(|| format!("{kind} update failed at n={n}"))?;
                theta = next;
                if i >= cfg.warmup {
                    latencies.push(elapsed.as_secs_f64() * 1e6);
                }
            }
            let (mean, median, p95) = summarize(&mut latencies);
            records.push(TimingRecord {
                estimator: kind.name().to_owned(),
                n,
                m: cfg.window_rows,
                trials: cfg.trials,
                mean_us: mean,
                median_us: median,
                p95_us: p95,
                speedup_vs_tagk: None,
            });
        }
    }

    // Fill the speedup column from TAG-K's means.
    let tagk_means: Vec<(usize, f64)> = records
        .iter()
        .filter(|r| r.estimator == EstimatorKind::Tagk.name())
        .map(|r| (r.n, r.mean_us))
        .collect();
    for record in &mut records {
        record.speedup_vs_tagk = tagk_means
            .iter()
            .find(|(n, _)| *n == record.n)
            .map(|(_, tagk)| record.mean_us / tagk);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_estimator_one_size_gives_one_record() {
        let cfg = BenchConfig {
            sizes: vec![10],
            trials: 3,
            warmup: 1,
            estimators: vec![EstimatorKind::Rk],
            ..BenchConfig::default()
        };
        let records = time_updates(&cfg).unwrap();
        assert_eq!(records.len(), 1);
        let r = &records[0];
        assert_eq!(r.estimator, "rk");
        assert_eq!((r.n, r.m, r.trials), (10, 30, 3));
        assert!(r.p95_us >= r.median_us && r.median_us >= 0.0);
        assert!(r.speedup_vs_tagk.is_none());
    }

    #[test]
    fn tagk_speedup_is_one() {
        let cfg = BenchConfig {
            sizes: vec![12],
            trials: 3,
            warmup: 1,
            estimators: vec![EstimatorKind::Tagk, EstimatorKind::RlsLow],
            ..BenchConfig::default()
        };
        let records = time_updates(&cfg).unwrap();
        let tagk = records.iter().find(|r| r.estimator == "tagk").unwrap();
        assert_eq!(tagk.speedup_vs_tagk, Some(1.0));
        let rls = records.iter().find(|r| r.estimator == "rls_low").unwrap();
        assert!(rls.speedup_vs_tagk.unwrap() > 0.0);
    }

    #[test]
    fn percentile_nearest_rank() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&xs, 50.0), 2.0);
        assert_eq!(percentile(&xs, 95.0), 4.0);
        assert_eq!(percentile(&xs, 100.0), 4.0);
    }

    #[test]
    fn doubling_trials_keeps_mean_stable() {
        // Repeated-run statistics: the two means agree within a loose
        // coefficient-of-variation style bound.
        let base = BenchConfig {
            sizes: vec![40],
            estimators: vec![EstimatorKind::Tagk],
            trials: 20,
            warmup: 3,
            ..BenchConfig::default()
        };
        let mut doubled = base.clone();
        doubled.trials = 40;
        let a = time_updates(&base).unwrap()[0].median_us;
        let b = time_updates(&doubled).unwrap()[0].median_us;
        let ratio = a.max(b) / a.min(b);
        assert!(ratio < 2.0, "medians {a} vs {b}");
    }
}
