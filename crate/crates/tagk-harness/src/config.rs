//! TOML run configuration. Every section is optional and defaults to the
//! corresponding module's defaults; command-line flags override file values.

use std::path::Path;
use std::str::FromStr;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use tagk_core::quadsim::{NoiseLevel, Trajectory};

use crate::ablate::AblateConfig;
use crate::bench::BenchConfig;
use crate::registry::EstimatorKind;
use crate::substitute::SubstituteConfig;
use crate::sweep::SweepConfig;

fn parse_names<T: FromStr>(names: &[String], what: &str) -> Result<Vec<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    names
        .iter()
        .map(|n| n.parse::<T>().with_context(|| format!("bad {what}: {n}")))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub sizes: Vec<usize>,
    pub window_rows: usize,
    pub trials: usize,
    pub warmup: usize,
    pub estimators: Vec<String>,
    pub seed: u64,
}

impl Default for BenchSection {
    fn default() -> Self {
        let d = BenchConfig::default();
        BenchSection {
            sizes: d.sizes,
            window_rows: d.window_rows,
            trials: d.trials,
            warmup: d.warmup,
            estimators: d.estimators.iter().map(|k| k.name().to_owned()).collect(),
            seed: d.seed,
        }
    }
}

impl BenchSection {
    pub fn to_config(&self) -> Result<BenchConfig> {
        Ok(BenchConfig {
            sizes: self.sizes.clone(),
            window_rows: self.window_rows,
            trials: self.trials,
            warmup: self.warmup,
            estimators: parse_names::<EstimatorKind>(&self.estimators, "estimator name")?,
            seed: self.seed,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub episodes: usize,
    pub noise_levels: Vec<String>,
    pub estimators: Vec<String>,
    pub base_seed: u64,
    pub workers: usize,
    pub emit_traces: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        let d = SweepConfig::default();
        SweepSection {
            episodes: d.episodes,
            noise_levels: d.noise_levels.iter().map(|n| n.name().to_owned()).collect(),
            estimators: d.estimators.iter().map(|k| k.name().to_owned()).collect(),
            base_seed: d.base_seed,
            workers: d.workers,
            emit_traces: d.emit_traces,
        }
    }
}

impl SweepSection {
    pub fn to_config(&self) -> Result<SweepConfig> {
        Ok(SweepConfig {
            episodes: self.episodes,
            noise_levels: parse_names::<NoiseLevel>(&self.noise_levels, "noise level")?,
            estimators: parse_names::<EstimatorKind>(&self.estimators, "estimator name")?,
            base_seed: self.base_seed,
            workers: self.workers,
            emit_traces: self.emit_traces,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateSection {
    pub seeds: usize,
    pub noise: String,
    pub base_seed: u64,
    pub workers: usize,
    pub post_event_steps: usize,
}

impl Default for AblateSection {
    fn default() -> Self {
        let d = AblateConfig::default();
        AblateSection {
            seeds: d.seeds,
            noise: d.noise.name().to_owned(),
            base_seed: d.base_seed,
            workers: d.workers,
            post_event_steps: d.post_event_steps,
        }
    }
}

impl AblateSection {
    pub fn to_config(&self) -> Result<AblateConfig> {
        Ok(AblateConfig {
            seeds: self.seeds,
            noise: self
                .noise
                .parse()
                .with_context(|| format!("bad noise level: {}", self.noise))?,
            base_seed: self.base_seed,
            workers: self.workers,
            post_event_steps: self.post_event_steps,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubstituteSection {
    pub seeds: usize,
    pub noise: String,
    pub baselines: Vec<String>,
    pub base_seed: u64,
    pub workers: usize,
}

impl Default for SubstituteSection {
    fn default() -> Self {
        let d = SubstituteConfig::default();
        SubstituteSection {
            seeds: d.seeds,
            noise: d.noise.name().to_owned(),
            baselines: d.baselines.iter().map(|k| k.name().to_owned()).collect(),
            base_seed: d.base_seed,
            workers: d.workers,
        }
    }
}

impl SubstituteSection {
    pub fn to_config(&self) -> Result<SubstituteConfig> {
        Ok(SubstituteConfig {
            seeds: self.seeds,
            noise: self
                .noise
                .parse()
                .with_context(|| format!("bad noise level: {}", self.noise))?,
            baselines: parse_names::<EstimatorKind>(&self.baselines, "estimator name")?,
            base_seed: self.base_seed,
            workers: self.workers,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeSection {
    pub estimator: String,
    pub noise: String,
    pub trajectory: String,
    pub seed: u64,
}

impl Default for EpisodeSection {
    fn default() -> Self {
        EpisodeSection {
            estimator: "tagk".to_owned(),
            noise: "none".to_owned(),
            trajectory: "figure8".to_owned(),
            seed: 0,
        }
    }
}

impl EpisodeSection {
    pub fn parts(&self) -> Result<(EstimatorKind, NoiseLevel, Trajectory, u64)> {
        Ok((
            self.estimator
                .parse()
                .with_context(|| format!("bad estimator name: {}", self.estimator))?,
            self.noise
                .parse()
                .with_context(|| format!("bad noise level: {}", self.noise))?,
            self.trajectory
                .parse()
                .with_context(|| format!("bad trajectory name: {}", self.trajectory))?,
            self.seed,
        ))
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub bench: BenchSection,
    pub sweep: SweepSection,
    pub ablate: AblateSection,
    pub substitute: SubstituteSection,
    pub episode: EpisodeSection,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_module_defaults() {
        let cfg = FileConfig::default();
        assert_eq!(cfg.bench.to_config().unwrap(), BenchConfig::default());
        assert_eq!(cfg.sweep.to_config().unwrap(), SweepConfig::default());
        assert_eq!(cfg.ablate.to_config().unwrap(), AblateConfig::default());
        assert_eq!(
            cfg.substitute.to_config().unwrap(),
            SubstituteConfig::default()
        );
    }

    #[test]
    fn partial_file_overrides_only_named_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "[sweep]\nepisodes = 5\nnoise_levels = [\"none\", \"medium\"]\n\n[bench]\ntrials = 4\n",
        )
        .unwrap();
        let cfg = FileConfig::load(&path).unwrap();
        let sweep = cfg.sweep.to_config().unwrap();
        assert_eq!(sweep.episodes, 5);
        assert_eq!(
            sweep.noise_levels,
            vec![NoiseLevel::None, NoiseLevel::Medium]
        );
        assert_eq!(sweep.estimators, SweepConfig::default().estimators);
        assert_eq!(cfg.bench.to_config().unwrap().trials, 4);
    }

    #[test]
    fn unknown_keys_and_bad_names_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        std::fs::write(&path, "[sweep]\nbogus_key = 1\n").unwrap();
        assert!(FileConfig::load(&path).is_err());

        std::fs::write(&path, "[sweep]\nestimators = [\"nope\"]\n").unwrap();
        let cfg = FileConfig::load(&path).unwrap();
        assert!(cfg.sweep.to_config().is_err());
    }
}
