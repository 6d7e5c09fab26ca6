//! Command-line interface.
//!
//! Exit codes: 0 on success, 1 on usage or configuration errors, 2 on
//! runtime failures. Outputs are written to a staging directory first and
//! moved into place only on success, so a failed run never leaves partial
//! product files behind.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use tagk_core::quadsim::QuadModel;

use crate::config::FileConfig;
use crate::episodes::{episode_stats, run_one, EpisodeSpec};
use crate::registry::parse_estimator_list;
use crate::reports::{write_csv, write_json, RunMetadata};
use crate::sweep::run_sweep;
use crate::trace_io::write_trace;

#[derive(Debug, Parser)]
#[command(name = "tagk", version, about = "Online inertial-parameter estimation experiments")]
pub struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Base seed override.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "tagk-out")]
    pub out_dir: PathBuf,
    /// Worker thread count override.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Comma-separated estimator list override.
    #[arg(long, global = true)]
    pub estimators: Option<String>,
    /// Noise level override (restricts sweeps to one level).
    #[arg(long, global = true)]
    pub noise: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthetic per-update latency benchmark.
    Bench,
    /// Closed-loop episode sweep over estimators and noise levels.
    Sweep {
        /// Episodes per (estimator, noise) cell.
        #[arg(long)]
        episodes: Option<usize>,
        /// Write one trace CSV per episode.
        #[arg(long)]
        emit_traces: bool,
    },
    /// Kaczmarz-variant ablation on shared measurement streams.
    Ablate {
        /// Number of recorded episodes to replay.
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Paired baseline runs with and without TAG-K estimate substitution.
    Substitute {
        /// Paired episodes per baseline.
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Single closed-loop episode with a full trace.
    Episode {
        /// Reference trajectory name.
        #[arg(long)]
        trajectory: Option<String>,
    },
}

/// Error split that drives the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config files, or names: exit 1.
    Usage(anyhow::Error),
    /// Failures while running or writing outputs: exit 2.
    Runtime(anyhow::Error),
}

fn usage<T>(r: Result<T>) -> Result<T, CliError> {
    r.map_err(CliError::Usage)
}

fn runtime<T>(r: Result<T>) -> Result<T, CliError> {
    r.map_err(CliError::Runtime)
}

/// Staged output directory: files are written under `.staging` inside the
/// output directory and promoted on success. Dropping an uncommitted staging
/// directory removes it.
struct Staging {
    dir: PathBuf,
    final_dir: PathBuf,
    committed: bool,
}

impl Staging {
    fn new(out_dir: &Path) -> Result<Self> {
        let dir = out_dir.join(".staging");
        if dir.exists() {
            fs::remove_dir_all(&dir)
                .with_context(|| format!("clearing stale staging {}", dir.display()))?;
        }
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Staging {
            dir,
            final_dir: out_dir.to_path_buf(),
            committed: false,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn commit(mut self) -> Result<()> {
        for entry in fs::read_dir(&self.dir)? {
            let entry = entry?;
            let dest = self.final_dir.join(entry.file_name());
            if dest.is_dir() {
                fs::remove_dir_all(&dest)?;
            } else if dest.exists() {
                fs::remove_file(&dest)?;
            }
            fs::rename(entry.path(), &dest)
                .with_context(|| format!("moving output into {}", dest.display()))?;
        }
        fs::remove_dir(&self.dir)?;
        self.committed = true;
        Ok(())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}

/// Runs the parsed command. Prints a short result line per command.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => usage(FileConfig::load(path))?,
        None => FileConfig::default(),
    };
    let model = QuadModel::crazyflie();
    let staging = runtime(Staging::new(&cli.out_dir))?;

    match &cli.command {
        Command::Bench => {
            let mut section = file.bench.clone();
            if let Some(seed) = cli.seed {
                section.seed = seed;
            }
            if let Some(list) = &cli.estimators {
                section.estimators = usage(
                    parse_estimator_list(list)
                        .map_err(anyhow::Error::from)
                        .context("parsing --estimators"),
                )?
                .iter()
                .map(|k| k.name().to_owned())
                .collect();
            }
            let cfg = usage(section.to_config())?;
            usage(cfg.validate())?;
            let records = runtime(crate::bench::time_updates(&cfg))?;
            runtime(write_csv(staging.path("bench.csv"), &records))?;
            let meta = runtime(RunMetadata::new("bench", cfg.seed, 1, &section))?;
            runtime(write_json(staging.path("run.json"), &meta))?;
            runtime(staging.commit())?;
            println!("bench: {} cells -> {}", records.len(), cli.out_dir.display());
        }
        Command::Sweep {
            episodes,
            emit_traces,
        } => {
            let mut section = file.sweep.clone();
            if let Some(seed) = cli.seed {
                section.base_seed = seed;
            }
            if let Some(workers) = cli.workers {
                section.workers = workers;
            }
            if let Some(list) = &cli.estimators {
                section.estimators = usage(
                    parse_estimator_list(list)
                        .map_err(anyhow::Error::from)
                        .context("parsing --estimators"),
                )?
                .iter()
                .map(|k| k.name().to_owned())
                .collect();
            }
            if let Some(noise) = &cli.noise {
                section.noise_levels = vec![noise.clone()];
            }
            if let Some(episodes) = episodes {
                section.episodes = *episodes;
            }
            if *emit_traces {
                section.emit_traces = true;
            }
            let cfg = usage(section.to_config())?;
            usage(cfg.validate())?;
            let report = runtime(run_sweep(&model, &cfg, Some(&staging.dir)))?;
            runtime(write_csv(staging.path("summary.csv"), &report.summary))?;
            runtime(write_csv(staging.path("episodes.csv"), &report.episodes))?;
            let meta = runtime(RunMetadata::new(
                "sweep",
                cfg.base_seed,
                cfg.workers,
                &section,
            ))?;
            runtime(write_json(staging.path("run.json"), &meta))?;
            runtime(staging.commit())?;
            println!(
                "sweep: {} episodes over {} cells -> {}",
                report.episodes.len(),
                report.summary.len(),
                cli.out_dir.display()
            );
        }
        Command::Ablate { seeds } => {
            let mut section = file.ablate.clone();
            if let Some(seed) = cli.seed {
                section.base_seed = seed;
            }
            if let Some(workers) = cli.workers {
                section.workers = workers;
            }
            if let Some(noise) = &cli.noise {
                section.noise = noise.clone();
            }
            if let Some(seeds) = seeds {
                section.seeds = *seeds;
            }
            let cfg = usage(section.to_config())?;
            usage(cfg.validate())?;
            let result = runtime(crate::ablate::run_ablation(&model, &cfg))?;
            runtime(write_csv(staging.path("ablation_series.csv"), &result.series))?;
            runtime(write_csv(staging.path("ablation_events.csv"), &result.events))?;
            runtime(write_csv(staging.path("ablation_seeds.csv"), &result.seeds))?;
            let meta = runtime(RunMetadata::new(
                "ablate",
                cfg.base_seed,
                cfg.workers,
                &section,
            ))?;
            runtime(write_json(staging.path("run.json"), &meta))?;
            runtime(staging.commit())?;
            println!(
                "ablate: {} seeds, {} estimator steps -> {}",
                result.seeds.len(),
                result.series.len(),
                cli.out_dir.display()
            );
        }
        Command::Substitute { seeds } => {
            let mut section = file.substitute.clone();
            if let Some(seed) = cli.seed {
                section.base_seed = seed;
            }
            if let Some(workers) = cli.workers {
                section.workers = workers;
            }
            if let Some(noise) = &cli.noise {
                section.noise = noise.clone();
            }
            if let Some(list) = &cli.estimators {
                section.baselines = usage(
                    parse_estimator_list(list)
                        .map_err(anyhow::Error::from)
                        .context("parsing --estimators"),
                )?
                .iter()
                .map(|k| k.name().to_owned())
                .collect();
            }
            if let Some(seeds) = seeds {
                section.seeds = *seeds;
            }
            let cfg = usage(section.to_config())?;
            usage(cfg.validate())?;
            let pairs = runtime(crate::substitute::run_substitution(&model, &cfg))?;
            runtime(write_csv(staging.path("substitution.csv"), &pairs))?;
            let meta = runtime(RunMetadata::new(
                "substitute",
                cfg.base_seed,
                cfg.workers,
                &section,
            ))?;
            runtime(write_json(staging.path("run.json"), &meta))?;
            runtime(staging.commit())?;
            println!(
                "substitute: {} paired episodes -> {}",
                pairs.len(),
                cli.out_dir.display()
            );
        }
        Command::Episode { trajectory } => {
            let mut section = file.episode.clone();
            if let Some(seed) = cli.seed {
                section.seed = seed;
            }
            if let Some(noise) = &cli.noise {
                section.noise = noise.clone();
            }
            if let Some(list) = &cli.estimators {
                section.estimator = list.clone();
            }
            if let Some(trajectory) = trajectory {
                section.trajectory = trajectory.clone();
            }
            let (kind, noise, trajectory, seed) = usage(section.parts())?;
            let spec = EpisodeSpec::new(kind, noise, trajectory, seed);
            let output = run_one(&model, &spec);
            runtime(write_trace(staging.path("trace.csv"), &output.trace))?;
            let meta = runtime(RunMetadata::new("episode", seed, 1, &section))?;
            runtime(write_json(staging.path("run.json"), &meta))?;
            runtime(staging.commit())?;
            let stats = episode_stats(&output.trace);
            println!(
                "episode: {} on {} seed {} -> {} (pos err {} cm)",
                kind,
                trajectory.name(),
                seed,
                stats.outcome.name(),
                stats
                    .pos_err_cm
                    .map(|v| format!("{v:.2}"))
                    .unwrap_or_else(|| "n/a".to_owned()),
            );
        }
    }
    Ok(())
}

/// Full entry point used by the binary; returns the process exit code.
pub fn main_entry<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(CliError::Usage(err)) => {
            eprintln!("error: {err:#}");
            1
        }
        Err(CliError::Runtime(err)) => {
            eprintln!("error: {err:#}");
            2
        }
    }
}
