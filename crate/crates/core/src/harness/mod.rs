//! Experiment files, multi-seed runs, aggregate curves, timing rows and
//! ablation sweeps.

mod aggregate;
mod config;

pub use aggregate::{
    episode_aggregate, final_window, mean_std, read_episodes_csv, rolling_mean, step_aggregate, write_rows,
    EpisodeAggregateRow, StepAggregateRow,
};
pub use config::{ExperimentConfig, GuidanceBlock, RewardMachineBlock, SCHEMA_VERSION};

use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{train, write_episodes_csv, AgentError, EpisodeRecord, RunOutput, Variant};
use crate::bridge::{BridgeError, Guidance};
use crate::rm::{RewardMachine, RmError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("experiment config: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Bridge(#[from] BridgeError),
    #[error(transparent)]
    Rm(#[from] RmError),
    #[error("bad sweep `{0}`")]
    Sweep(String),
}

fn io(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Io(format!("{}: {e}", path.display()))
}

/// Overhead of symbolic reasoning relative to everything else:
/// symbolic / (total − symbolic). Zero when nothing symbolic ran.
pub fn overhead_increment(total_s: f64, symbolic_s: f64) -> f64 {
    if symbolic_s <= 0.0 {
        return 0.0;
    }
    symbolic_s / (total_s - symbolic_s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub label: String,
    pub total_s: f64,
    pub neural_s: f64,
    pub symbolic_s: f64,
    /// Fraction, not percent.
    pub increment: f64,
}

/// Timing row for one run or a sum of runs.
pub fn timing_report(label: &str, total_s: f64, neural_s: f64, symbolic_s: f64) -> TimingRow {
    TimingRow {
        label: label.to_string(),
        total_s,
        neural_s,
        symbolic_s,
        increment: overhead_increment(total_s, symbolic_s),
    }
}

/// Timing row recomputed from a metrics file's per-step columns; the total
/// is neural plus symbolic time.
pub fn timing_from_records(label: &str, records: &[EpisodeRecord]) -> TimingRow {
    let (mut neural, mut symbolic) = (0.0, 0.0);
    for r in records {
        neural += r.neural_ms_per_step * r.steps as f64 / 1e3;
        symbolic += r.symbolic_ms_per_step * r.steps as f64 / 1e3;
    }
    timing_report(label, neural + symbolic, neural, symbolic)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub variant: Variant,
    pub seed: u64,
    pub episodes: usize,
    pub total_steps: u64,
    pub final_window: f64,
    pub final_success_rate: f64,
    pub wall_s: f64,
    pub neural_s: f64,
    pub symbolic_s: f64,
    pub csv: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub variant: Variant,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub variant: Variant,
    pub seeds: Vec<SeedResult>,
    pub final_mean: f64,
    pub final_std: f64,
    pub timing: TimingRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub output_dir: PathBuf,
    pub variants: Vec<VariantReport>,
    pub failures: Vec<SeedFailure>,
}

impl ExperimentReport {
    pub fn all_completed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn variant(&self, v: Variant) -> Option<&VariantReport> {
        self.variants.iter().find(|r| r.variant == v)
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    name: &'a str,
    variant: Variant,
    seeds: Vec<u64>,
    final_window: Vec<f64>,
    final_mean: f64,
    final_std: f64,
}

fn success_tail(run: &[EpisodeRecord], window: usize) -> f64 {
    let tail = &run[run.len().saturating_sub(window)..];
    if tail.is_empty() {
        return f64::NAN;
    }
    tail.iter().filter(|r| r.success).count() as f64 / tail.len() as f64
}

/// Runs every (variant, seed) pair on a bounded pool and writes
/// `<out>/<variant>/seed_<s>.csv`, `seed_<s>.net`, `aggregate_episodes.csv`,
/// `aggregate_steps.csv` and `summary.json`, plus `timing.csv` when timing
/// is recorded. A failed seed is reported, not fatal.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    config.validate()?;
    let guidance: Option<Guidance> = if config.variants.iter().any(|v| v.needs_guidance()) {
        Some(config.build_guidance()?)
    } else {
        None
    };
    let rm: Option<RewardMachine> = if config.variants.iter().any(|v| v.needs_reward_machine()) {
        Some(config.build_reward_machine()?)
    } else {
        None
    };
    let out = config.output_path();
    for v in &config.variants {
        let dir = out.join(v.name());
        std::fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
    }
    let archived = serde_json::to_string_pretty(config).map_err(|e| HarnessError::Io(e.to_string()))?;
    std::fs::write(out.join("config.json"), archived).map_err(|e| io(&out, e))?;

    let jobs: Vec<(Variant, u64)> = config
        .variants
        .iter()
        .flat_map(|v| config.seeds.iter().map(move |s| (*v, *s)))
        .collect();
    let workers = config
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let run_one = |(variant, seed): (Variant, u64)| -> Result<(RunOutput, PathBuf), HarnessError> {
        let run_cfg = config.run_config(variant, seed);
        let output = train(&run_cfg, guidance.as_ref(), rm.as_ref())?;
        let dir = out.join(variant.name());
        let csv_path = dir.join(format!("seed_{seed}.csv"));
        let file = std::fs::File::create(&csv_path).map_err(|e| io(&csv_path, e))?;
        write_episodes_csv(&output.episodes, std::io::BufWriter::new(file))?;
        let net_path = dir.join(format!("seed_{seed}.net"));
        output.net.save(&net_path).map_err(AgentError::from)?;
        log::info!(
            "{} seed {seed}: {} episodes, final window {:.3}",
            variant.name(),
            output.episodes.len(),
            final_window(&output.episodes, config.smoothing_window)
        );
        Ok((output, csv_path))
    };
    let results: Vec<Result<(RunOutput, PathBuf), HarnessError>> =
        pool.install(|| jobs.par_iter().map(|j| run_one(*j)).collect());

    let mut failures = Vec::new();
    let mut variants = Vec::new();
    for v in &config.variants {
        let mut seeds = Vec::new();
        let mut runs = Vec::new();
        for ((variant, seed), res) in jobs.iter().zip(&results) {
            if variant != v {
                continue;
            }
            match res {
                Ok((o, csv)) => {
                    seeds.push(SeedResult {
                        variant: *v,
                        seed: *seed,
                        episodes: o.episodes.len(),
                        total_steps: o.total_steps,
                        final_window: final_window(&o.episodes, config.smoothing_window),
                        final_success_rate: success_tail(&o.episodes, config.smoothing_window),
                        wall_s: o.wall_time.as_secs_f64(),
                        neural_s: o.neural_time.as_secs_f64(),
                        symbolic_s: o.symbolic_time.as_secs_f64(),
                        csv: csv.clone(),
                    });
                    runs.push(o.episodes.clone());
                }
                Err(e) => {
                    log::error!("{} seed {seed} failed: {e}", v.name());
                    failures.push(SeedFailure {
                        variant: *v,
                        seed: *seed,
                        error: e.to_string(),
                    });
                }
            }
        }
        let dir = out.join(v.name());
        write_rows(&episode_aggregate(&runs, config.smoothing_window), &dir.join("aggregate_episodes.csv"))?;
        write_rows(
            &step_aggregate(&runs, config.step_bucket, config.max_total_steps),
            &dir.join("aggregate_steps.csv"),
        )?;
        let finals: Vec<f64> = seeds.iter().map(|s| s.final_window).collect();
        let (final_mean, final_std) = mean_std(&finals);
        let summary = Summary {
            name: &config.name,
            variant: *v,
            seeds: seeds.iter().map(|s| s.seed).collect(),
            final_window: finals.clone(),
            final_mean,
            final_std,
        };
        let json = serde_json::to_string_pretty(&summary).map_err(|e| HarnessError::Io(e.to_string()))?;
        std::fs::write(dir.join("summary.json"), json).map_err(|e| io(&dir, e))?;
        let timing = timing_report(
            v.name(),
            seeds.iter().map(|s| s.wall_s).sum(),
            seeds.iter().map(|s| s.neural_s).sum(),
            seeds.iter().map(|s| s.symbolic_s).sum(),
        );
        if config.record_timing {
            write_rows(std::slice::from_ref(&timing), &dir.join("timing.csv"))?;
        }
        variants.push(VariantReport {
            variant: *v,
            seeds,
            final_mean,
            final_std,
            timing,
        });
    }
    Ok(ExperimentReport {
        name: config.name.clone(),
        output_dir: out,
        variants,
        failures,
    })
}

/// One axis of an ablation study.
#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    /// DQN, SR-Exploration only, SR-Exploitation only and SR-DQN.
    Variants,
    /// SR-DQN at each confidence.
    Rho(Vec<f64>),
    /// SR-DQN at each (final ε, exploration fraction).
    Epsilon(Vec<(f64, f64)>),
}

impl Sweep {
    pub const ABLATION_VARIANTS: [Variant; 4] =
        [Variant::Dqn, Variant::SrExploration, Variant::SrExploitation, Variant::SrDqn];

    pub fn default_rho() -> Sweep {
        Sweep::Rho(vec![0.5, 0.8, 0.95])
    }

    pub fn default_epsilon() -> Sweep {
        Sweep::Epsilon(vec![(0.05, 0.1), (0.1, 0.3), (0.3, 0.3), (0.3, 0.5)])
    }

    /// Labelled configs, each writing under `<base out>/<label>`.
    pub fn configs(&self, base: &ExperimentConfig) -> Vec<(String, ExperimentConfig)> {
        let derive = |label: String, edit: &dyn Fn(&mut ExperimentConfig)| {
            let mut c = base.clone();
            c.output_dir = base.output_dir.join(&label);
            c.name = format!("{}-{label}", base.name);
            edit(&mut c);
            (label, c)
        };
        match self {
            Sweep::Variants => vec![derive("variants".into(), &|c| {
                c.variants = Sweep::ABLATION_VARIANTS.to_vec()
            })],
            Sweep::Rho(values) => values
                .iter()
                .map(|&rho| {
                    derive(format!("rho_{rho}"), &|c| {
                        c.variants = vec![Variant::SrDqn];
                        c.guidance.rho = rho;
                    })
                })
                .collect(),
            Sweep::Epsilon(values) => values
                .iter()
                .map(|&(f, r)| {
                    derive(format!("eps_{f}_{r}"), &|c| {
                        c.variants = vec![Variant::SrDqn];
                        c.schedule.final_eps = f;
                        c.schedule.fraction = r;
                    })
                })
                .collect(),
        }
    }
}

impl FromStr for Sweep {
    type Err = HarnessError;

    /// `variants`, `rho=0.5,0.8`, `eps=0.3:0.3,0.05:0.1`, or a bare `rho` /
    /// `eps` for the default grid.
    fn from_str(s: &str) -> Result<Sweep, HarnessError> {
        let bad = || HarnessError::Sweep(s.to_string());
        let (key, values) = match s.split_once('=') {
            Some((k, v)) => (k.trim(), Some(v)),
            None => (s.trim(), None),
        };
        match (key, values) {
            ("variants", None) => Ok(Sweep::Variants),
            ("rho", None) => Ok(Sweep::default_rho()),
            ("eps", None) => Ok(Sweep::default_epsilon()),
            ("rho", Some(v)) => v
                .split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|_| bad()))
                .collect::<Result<Vec<_>, _>>()
                .map(Sweep::Rho),
            ("eps", Some(v)) => v
                .split(',')
                .map(|pair| {
                    let (f, r) = pair.split_once(':').ok_or_else(bad)?;
                    Ok((f.trim().parse().map_err(|_| bad())?, r.trim().parse().map_err(|_| bad())?))
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Sweep::Epsilon),
            _ => Err(bad()),
        }
    }
}

/// Runs each sweep's configs; all configs are validated before anything runs.
pub fn ablation_suite(
    base: &ExperimentConfig,
    sweeps: &[Sweep],
) -> Result<Vec<(String, ExperimentReport)>, HarnessError> {
    let configs: Vec<(String, ExperimentConfig)> = sweeps.iter().flat_map(|s| s.configs(base)).collect();
    for (_, c) in &configs {
        c.validate()?;
    }
    configs
        .into_iter()
        .map(|(label, c)| Ok((label, run_experiment(&c)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn increment_arithmetic() {
        assert!((overhead_increment(105.0, 5.0) - 0.05).abs() < 1e-15);
        assert_eq!(overhead_increment(42.0, 0.0), 0.0);
    }

    #[test]
    fn sweep_parsing() {
        assert_eq!("rho=0.5,0.8,0.95".parse::<Sweep>().unwrap(), Sweep::Rho(vec![0.5, 0.8, 0.95]));
        assert_eq!(
            "eps=0.3:0.3".parse::<Sweep>().unwrap(),
            Sweep::Epsilon(vec![(0.3, 0.3)])
        );
        assert_eq!("variants".parse::<Sweep>().unwrap(), Sweep::Variants);
        assert!("gamma=0.9".parse::<Sweep>().is_err());
        assert!("eps=0.3".parse::<Sweep>().is_err());
        match Sweep::default_epsilon() {
            Sweep::Epsilon(grid) => assert!(grid.contains(&(0.3, 0.3))),
            _ => unreachable!(),
        }
    }
}
