use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

use srdqn::agent::{argmax, evaluate, Variant};
use srdqn::envs::GridEnv;
use srdqn::harness::{
    ablation_suite, read_episodes_csv, run_experiment, timing_from_records, ExperimentConfig, ExperimentReport, Sweep,
    TimingRow,
};
use srdqn::neural::{Features, QNetwork};
use srdqn::rm::{detect_events, RewardMachine};

#[derive(Parser)]
#[command(name = "srdqn", version, about = "Symbolically guided DQN experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every variant/seed in a config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated seeds overriding the config.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Ablation sweeps: `variants`, `rho=0.5,0.8,0.95`, `eps=0.3:0.3,0.05:0.1`.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, required = true)]
        sweep: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Greedy evaluation of a saved network.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        /// Experiment config; defaults to the config.json archived next to the run.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print one greedy episode as ASCII frames.
    Replay {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Timing rows from metrics files, or from a fresh timed run of a config.
    Timing {
        #[arg(long, conflicts_with = "csv")]
        config: Option<PathBuf>,
        #[arg(long, num_args = 1..)]
        csv: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            config,
            seeds,
            out,
            workers,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seeds {
                cfg.seeds = s;
            }
            if let Some(o) = out {
                cfg.output_dir = std::env::current_dir()?.join(o);
            }
            if workers.is_some() {
                cfg.workers = workers;
            }
            let report = run_experiment(&cfg)?;
            print_report(&report);
            Ok(report.all_completed())
        }
        Command::Ablate { config, sweep, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(o) = out {
                cfg.output_dir = std::env::current_dir()?.join(o);
            }
            let sweeps = sweep
                .iter()
                .map(|s| s.parse::<Sweep>())
                .collect::<Result<Vec<_>, _>>()?;
            let mut ok = true;
            for (label, report) in ablation_suite(&cfg, &sweeps)? {
                println!("== {label}");
                print_report(&report);
                ok &= report.all_completed();
            }
            Ok(ok)
        }
        Command::Eval {
            checkpoint,
            episodes,
            config,
            seed,
        } => {
            let (cfg, net, rm) = load_run(&checkpoint, config.as_deref())?;
            let s = evaluate(&net, &cfg.env, episodes, cfg.network.gamma, seed, rm.as_ref())?;
            println!(
                "episodes {}  discounted return {:.4} ± {:.4}  success {:.1}%",
                s.episodes,
                s.mean_discounted_return,
                s.std_discounted_return,
                100.0 * s.success_rate
            );
            Ok(true)
        }
        Command::Replay {
            checkpoint,
            config,
            seed,
        } => {
            let (cfg, net, rm) = load_run(&checkpoint, config.as_deref())?;
            replay(&cfg, &net, rm.as_ref(), seed)?;
            Ok(true)
        }
        Command::Timing { config, csv } => {
            let rows: Vec<TimingRow> = match config {
                Some(path) => {
                    let mut cfg = ExperimentConfig::load(&path)?;
                    cfg.record_timing = true;
                    let report = run_experiment(&cfg)?;
                    report.variants.iter().map(|v| v.timing.clone()).collect()
                }
                None if !csv.is_empty() => csv
                    .iter()
                    .map(|p| Ok(timing_from_records(&p.display().to_string(), &read_episodes_csv(p)?)))
                    .collect::<Result<_>>()?,
                None => bail!("give --config or --csv"),
            };
            let base = rows.iter().find(|r| r.label == Variant::Dqn.name()).map(|r| r.total_s);
            println!("{:<28} {:>10} {:>10} {:>10} {:>9} {:>9}", "run", "total s", "neural s", "symbolic s", "incr %", "vs dqn");
            for r in &rows {
                let rel = base.map_or(String::from("-"), |b| format!("{:.3}", r.total_s / b));
                println!(
                    "{:<28} {:>10.2} {:>10.2} {:>10.2} {:>9.2} {:>9}",
                    r.label,
                    r.total_s,
                    r.neural_s,
                    r.symbolic_s,
                    100.0 * r.increment,
                    rel
                );
            }
            Ok(true)
        }
    }
}

fn print_report(report: &ExperimentReport) {
    for v in &report.variants {
        println!(
            "{:<16} final window {:.4} ± {:.4}  ({} seeds, {:.1} s)",
            v.variant.name(),
            v.final_mean,
            v.final_std,
            v.seeds.len(),
            v.timing.total_s
        );
    }
    for f in &report.failures {
        println!("FAILED {} seed {}: {}", f.variant.name(), f.seed, f.error);
    }
    println!("outputs in {}", report.output_dir.display());
}

/// Config, network and (for RM-DQN runs) reward machine for a checkpoint
/// written by `run`, i.e. `<out>/<variant>/seed_<s>.net`.
fn load_run(checkpoint: &Path, config: Option<&Path>) -> Result<(ExperimentConfig, QNetwork, Option<RewardMachine>)> {
    let variant_dir = checkpoint.parent().ok_or_else(|| anyhow!("checkpoint has no parent directory"))?;
    let cfg_path = match config {
        Some(p) => p.to_path_buf(),
        None => variant_dir
            .parent()
            .map(|d| d.join("config.json"))
            .filter(|p| p.is_file())
            .ok_or_else(|| anyhow!("no archived config.json next to {}; pass --config", checkpoint.display()))?,
    };
    let cfg = ExperimentConfig::load(&cfg_path).with_context(|| format!("loading {}", cfg_path.display()))?;
    let net = QNetwork::load(checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
    let is_rm = variant_dir.file_name().and_then(|n| n.to_str()) == Some(Variant::RmDqn.name());
    let rm = if is_rm { Some(cfg.build_reward_machine()?) } else { None };
    Ok((cfg, net, rm))
}

fn replay(cfg: &ExperimentConfig, net: &QNetwork, rm: Option<&RewardMachine>, seed: u64) -> Result<()> {
    let mut env = GridEnv::new(&cfg.env)?;
    let mut obs = env.reset_with_seed(seed)?;
    let names = env.domain().action_names();
    let mut u = rm.map(|m| m.initial());
    let mut total = 0.0;
    println!("{}", env.render());
    loop {
        let mut idx = obs.active_features();
        if let Some(u) = u {
            idx.push((env.feature_dim() + u) as u32);
        }
        let q = net.forward(Features::Binary(idx.into()).as_input())?;
        let a = argmax(&q);
        let r = env.step(a)?;
        if let (Some(m), Some(cur)) = (rm, u) {
            u = Some(m.step(cur, &detect_events(&env))?.0);
        }
        total += r.reward;
        println!("step {} action {} reward {:.3}", env.step_count(), names[a], r.reward);
        println!("{}", env.render());
        obs = r.observation;
        if r.terminal {
            break;
        }
    }
    println!("return {total:.4}  success {}", env.task_success());
    Ok(())
}
