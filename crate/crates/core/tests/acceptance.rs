//! Acceptance criteria, one PASS/FAIL line each. Runs as a plain binary so
//! the lines are always printed; exits non-zero when any criterion fails.
//!
//! The two learning experiments take most of the time (about an hour on one
//! core). `ACCEPTANCE_ONLY=1,3,9` restricts the run to the listed criteria.

mod common;

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use common::{doorkey_solvable, gradient_check, logic_check, random_case, random_problem};
use srdqn::agent::{argmax, epsilon_at, sr_exploit, sr_explore, EpsilonSchedule, Variant};
use srdqn::envs::{shortest_plan, DoorKeyEnv};
use srdqn::harness::{run_experiment, timing_report, ExperimentConfig, ExperimentReport, TimingRow};
use srdqn::neural::{TrainConfig, Transition};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn config(name: &str) -> ExperimentConfig {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    ExperimentConfig::load(&dir.join(name)).expect(name)
}

fn final_mean(report: &ExperimentReport, v: Variant) -> f64 {
    report.variant(v).map_or(f64::NAN, |r| r.final_mean)
}

fn c1_logic_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for i in 0..1000 {
        if let Err(e) = logic_check(&random_case(&mut rng)) {
            return outcome(false, format!("program {i}: {e}"));
        }
    }
    let t = start.elapsed();
    outcome(t < Duration::from_secs(10), format!("1000/1000 programs agree in {:.2} s", t.as_secs_f64()))
}

fn c2_sampling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let draws = 100_000;
    let mut counts = [0usize; 4];
    for _ in 0..draws {
        counts[sr_explore(4, &[0], 0.8, &mut rng)] += 1;
    }
    // suggested 0.8 against three at 0.2, normalized
    let expect = [0.8 / 1.4, 0.2 / 1.4, 0.2 / 1.4, 0.2 / 1.4];
    let freq: Vec<f64> = counts.iter().map(|&c| c as f64 / draws as f64).collect();
    let close = freq.iter().zip(expect).all(|(f, e)| (f - e).abs() <= 0.01);

    let mut counts = [0usize; 4];
    for _ in 0..draws {
        counts[sr_explore(4, &[2], 0.5, &mut rng)] += 1;
    }
    let e = draws as f64 / 4.0;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    let p = 1.0 - ChiSquared::new(3.0).unwrap().cdf(stat);
    outcome(
        close && p > 0.01,
        format!("rho 0.8 freqs {freq:.4?}; rho 0.5 chi2 {stat:.2}, p {p:.3}"),
    )
}

fn c3_rescaling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut bad = 0;
    for _ in 0..2000 {
        let n = rng.gen_range(2..7);
        let q: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let sugg: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.4)).collect();
        let all: Vec<usize> = (0..n).collect();
        let eps = rng.gen_range(0.0..=1.0);
        let rho = rng.gen_range(0.0..0.999);
        let plain = argmax(&q);
        bad += (sr_exploit(&q, &sugg, 0.0, rho, false) != plain) as usize;
        bad += (sr_exploit(&q, &sugg, eps, 0.5, false) != plain) as usize;
        bad += (sr_exploit(&q, &[], eps, rho, false) != plain) as usize;
        bad += (sr_exploit(&q, &all, eps, rho, false) != plain) as usize;
    }
    let flip = sr_exploit(&[0.50, 0.45], &[1], 1.0, 0.8, false);
    outcome(bad == 0 && flip == 1, format!("{bad} invariance violations in 8000; flip example picks {flip}"))
}

fn c4_schedule() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut exact, mut episodes) = (0, 0);
    for _ in 0..20 {
        let init = rng.gen_range(0.5..=1.0);
        let fin = rng.gen_range(0.0..0.5);
        let frac = rng.gen_range(0.05..=1.0);
        let total: u64 = rng.gen_range(10..5_000);
        let s = EpsilonSchedule::new(init, fin, frac, None).unwrap();
        // closed form: init - (init - fin) * min(1, e / (frac * total)), floored at fin
        let all = (0..=total).all(|e| {
            let progress = (e as f64 / (frac * total as f64)).min(1.0);
            let oracle = (init - (init - fin) * progress).max(fin);
            epsilon_at(&s, e, total) == oracle
        });
        exact += all as usize;
        episodes += total + 1;
    }
    let s = EpsilonSchedule::new(1.0, 0.3, 0.5, None).unwrap();
    let half = epsilon_at(&s, 500, 1000) == 0.3 && epsilon_at(&s, 499, 1000) > 0.3;
    let s = EpsilonSchedule::new(1.0, 0.3, 0.3, None).unwrap();
    let mid = (epsilon_at(&s, 150, 1000) - 0.65).abs() < 1e-12;
    outcome(
        exact == 20 && half && mid,
        format!("{exact}/20 tuples exact over {episodes} episodes; eps_r 0.5 floors at E/2: {half}; e=150 gives 0.65: {mid}"),
    )
}

fn c5_gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = TrainConfig {
        gamma: 0.9,
        huber_delta: 1e3,
        max_grad_norm: None,
    };
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (net, batch) = random_problem(&mut rng);
        let refs: Vec<&Transition> = batch.iter().collect();
        worst = worst.max(gradient_check(&net, &refs, &cfg, 1e-4));
    }
    outcome(worst <= 1e-4, format!("max relative error {worst:.2e} over 50 networks"))
}

fn c6_doorkey(out: &Path) -> (Outcome, Option<ExperimentReport>) {
    let mut cfg = config("doorkey5_acceptance.json");
    cfg.output_dir = out.join("doorkey5");
    cfg.record_timing = true;
    let start = Instant::now();
    let report = match run_experiment(&cfg) {
        Ok(r) => r,
        Err(e) => return (outcome(false, e.to_string()), None),
    };
    let (dqn, sr) = (final_mean(&report, Variant::Dqn), final_mean(&report, Variant::SrDqn));
    let mins = start.elapsed().as_secs_f64() / 60.0;
    let mut detail = format!("5x5: SR-DQN {sr:.3} vs DQN {dqn:.3} in {mins:.1} min");
    let mut pass = report.all_completed() && sr >= dqn + 0.05 && sr >= 0.5 && mins < 45.0;
    if !pass && dqn >= 0.5 {
        // plain DQN solves the small grid too: move to the harder layout
        cfg.env.grid_size = 8;
        cfg.env.num_keys = 2;
        cfg.max_total_steps = 300_000;
        cfg.output_dir = out.join("doorkey8");
        match run_experiment(&cfg) {
            Ok(r) => {
                let (d8, s8) = (final_mean(&r, Variant::Dqn), final_mean(&r, Variant::SrDqn));
                detail += &format!("; escalated 8x8/2: SR-DQN {s8:.3} vs DQN {d8:.3}");
                pass = r.all_completed() && s8 >= d8 + 0.05;
            }
            Err(e) => detail += &format!("; escalation failed: {e}"),
        }
    }
    (outcome(pass, detail), Some(report))
}

fn c7_office(out: &Path) -> (Outcome, Option<ExperimentReport>) {
    let mut cfg = config("office_acceptance.json");
    cfg.output_dir = out.join("office");
    cfg.record_timing = true;
    let start = Instant::now();
    match run_experiment(&cfg) {
        Ok(r) => {
            let (dqn, sr) = (final_mean(&r, Variant::Dqn), final_mean(&r, Variant::SrDqn));
            let mins = start.elapsed().as_secs_f64() / 60.0;
            let o = outcome(
                r.all_completed() && sr >= dqn && mins < 30.0,
                format!("SR-DQN {sr:.4} vs DQN {dqn:.4} in {mins:.1} min"),
            );
            (o, Some(r))
        }
        Err(e) => (outcome(false, e.to_string()), None),
    }
}

/// SR-DQN over DQN wall time for one experiment, summed over its seeds, with
/// the symbolic increment.
fn overhead(report: &ExperimentReport) -> Option<(f64, TimingRow, TimingRow)> {
    let (d, s) = (report.variant(Variant::Dqn)?, report.variant(Variant::SrDqn)?);
    let dqn = timing_report("dqn", d.timing.total_s, d.timing.neural_s, 0.0);
    let sr = timing_report("sr_dqn", s.timing.total_s, s.timing.neural_s, s.timing.symbolic_s);
    Some((sr.total_s / dqn.total_s, dqn, sr))
}

/// Measured on the DoorKey pair from criterion 6.
fn c8_overhead(report: Option<&ExperimentReport>) -> Outcome {
    match report.and_then(overhead) {
        Some((ratio, dqn, sr)) => outcome(
            ratio <= 1.10,
            format!(
                "DoorKey SR-DQN {:.1} s vs DQN {:.1} s, ratio {ratio:.3}, symbolic increment {:.1}%",
                sr.total_s,
                dqn.total_s,
                100.0 * sr.increment
            ),
        ),
        None => outcome(false, "no DoorKey runs to time"),
    }
}

fn c9_determinism(out: &Path) -> Outcome {
    let mut cfg = config("doorkey5_acceptance.json");
    cfg.seeds = vec![11];
    cfg.max_total_steps = 8000;
    let mut dirs: Vec<PathBuf> = Vec::new();
    for run in ["a", "b"] {
        cfg.output_dir = out.join(format!("determinism_{run}"));
        if let Err(e) = run_experiment(&cfg) {
            return outcome(false, e.to_string());
        }
        dirs.push(cfg.output_dir.clone());
    }
    let mut same = 0;
    let names: Vec<String> = cfg.variants.iter().map(|v| format!("{}/seed_11.csv", v.name())).collect();
    for f in &names {
        let (a, b) = (std::fs::read(dirs[0].join(f)), std::fs::read(dirs[1].join(f)));
        same += matches!((a, b), (Ok(a), Ok(b)) if a == b && !a.is_empty()) as usize;
    }
    outcome(same == names.len(), format!("{same}/{} per-run files byte-identical", names.len()))
}

fn c10_layouts() -> Outcome {
    let mut checked = 0;
    for (size, keys) in [(5, 1), (8, 1), (8, 2), (8, 4), (16, 1), (16, 2)] {
        let max = 10 * (size * size) as u32;
        let mut env = DoorKeyEnv::new(size, keys, max).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + size as u64 * 10 + keys as u64);
        for i in 0..500 {
            env.reset(&mut rng).unwrap();
            if !doorkey_solvable(&env) {
                return outcome(false, format!("{size}x{size}/{keys} layout {i} unsolvable"));
            }
            // every 25th layout: replay the shortest plan and check the reward
            if i % 25 == 0 {
                let plan = shortest_plan(&env).unwrap();
                let mut e = env.clone();
                let r = plan.iter().map(|&a| e.step(a).unwrap()).last().unwrap();
                if !(r.success && r.reward == 1.0 - 0.9 * plan.len() as f64 / max as f64) {
                    return outcome(false, format!("{size}x{size}/{keys} layout {i}: reward {}", r.reward));
                }
            }
            checked += 1;
        }
    }
    outcome(true, format!("{checked} layouts solvable, planned rewards exact"))
}

fn main() {
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |n: u32| only.as_ref().map_or(true, |o| o.contains(&n));
    let tmp = tempfile::tempdir().expect("temp dir");
    let out = tmp.path();

    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut record = |n: u32, name: &'static str, o: Outcome| {
        println!("[{}] {n:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o));
    };
    if wanted(1) {
        record(1, "logic oracle", c1_logic_oracle());
    }
    if wanted(2) {
        record(2, "exploration sampling", c2_sampling());
    }
    if wanted(3) {
        record(3, "rescaling invariances", c3_rescaling());
    }
    if wanted(4) {
        record(4, "epsilon schedule", c4_schedule());
    }
    if wanted(5) {
        record(5, "gradient check", c5_gradients());
    }
    let mut doorkey = None;
    if wanted(6) || wanted(8) {
        let (o, r) = c6_doorkey(out);
        doorkey = r;
        if wanted(6) {
            record(6, "doorkey learning benefit", o);
        }
    }
    let mut office = None;
    if wanted(7) {
        let (o, r) = c7_office(out);
        office = r;
        record(7, "officeworld scaled check", o);
    }
    if wanted(8) {
        record(8, "symbolic overhead", c8_overhead(doorkey.as_ref()));
        if let Some((ratio, dqn, sr)) = office.as_ref().and_then(overhead) {
            // the Office pair is reported alongside; its network is small enough
            // that per-step neural cost tracks how many features the visited states switch on
            println!(
                "[INFO]  8 officeworld timing: SR-DQN {:.1} s vs DQN {:.1} s, ratio {ratio:.3}, symbolic increment {:.1}%",
                sr.total_s,
                dqn.total_s,
                100.0 * sr.increment
            );
        }
    }
    if wanted(9) {
        record(9, "determinism", c9_determinism(out));
    }
    if wanted(10) {
        record(10, "layout solvability", c10_layouts());
    }
    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("acceptance: {} passed, {} failed", results.len() - failed.len(), failed.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
