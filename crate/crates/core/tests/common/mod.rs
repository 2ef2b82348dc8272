//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use srdqn::envs::{Cell, DoorKeyEnv};
use srdqn::logic::{parse_program, precompute_groundings, Atom, FactSet, Symbol};
use srdqn::neural::{loss_and_gradients, Features, QNetwork, TrainConfig, Transition};

// ---------------------------------------------------------------- logic

pub const CONSTANTS: [&str; 2] = ["a", "b"];
const EDB: [(&str, usize); 3] = [("e0", 1), ("e1", 2), ("flag", 0)];

#[derive(Debug, Clone)]
pub struct Lit {
    pub pred: String,
    pub args: Vec<String>,
}

impl Lit {
    fn text(&self) -> String {
        if self.args.is_empty() {
            self.pred.clone()
        } else {
            format!("{}({})", self.pred, self.args.join(","))
        }
    }

    fn vars(&self) -> impl Iterator<Item = &String> {
        self.args.iter().filter(|a| a.starts_with(char::is_uppercase))
    }
}

#[derive(Debug, Clone)]
pub struct GenRule {
    pub head: Lit,
    pub pos: Vec<Lit>,
    pub neg: Vec<Lit>,
}

#[derive(Debug, Clone)]
pub struct GenCase {
    pub rules: Vec<GenRule>,
    pub facts: Vec<Lit>,
    /// (name, arity) of derived predicates.
    pub idb: Vec<(String, usize)>,
}

impl GenCase {
    pub fn source(&self) -> String {
        let mut s = String::new();
        for r in &self.rules {
            s.push_str(&r.head.text());
            let body: Vec<String> = r
                .pos
                .iter()
                .map(Lit::text)
                .chain(r.neg.iter().map(|l| format!("not {}", l.text())))
                .collect();
            if !body.is_empty() {
                s.push_str(" :- ");
                s.push_str(&body.join(", "));
            }
            s.push_str(".\n");
        }
        s
    }

    pub fn fact_set(&self) -> FactSet {
        let mut f = FactSet::new();
        for l in &self.facts {
            let args: Vec<&str> = l.args.iter().map(String::as_str).collect();
            f.add(&l.pred, &args);
        }
        f
    }
}

fn term<R: Rng>(rng: &mut R, vars: &[&str]) -> String {
    if rng.gen_bool(0.75) {
        vars.choose(rng).unwrap().to_string()
    } else {
        CONSTANTS.choose(rng).unwrap().to_string()
    }
}

/// Random safe program, stratified by construction: derived predicate `q<i>`
/// sits on level i and may depend positively on levels ≤ i and negatively on
/// levels < i.
pub fn random_case<R: Rng>(rng: &mut R) -> GenCase {
    let n_idb = rng.gen_range(2..=4);
    let idb: Vec<(String, usize)> = (0..n_idb).map(|i| (format!("q{i}"), rng.gen_range(0..=1))).collect();
    let vars = ["X", "Y"];
    let mut rules = Vec::new();
    for _ in 0..rng.gen_range(2..=6) {
        let level = rng.gen_range(0..n_idb);
        let pick = |rng: &mut R, allow_upto: usize, include_edb: bool| -> (String, usize) {
            let mut options: Vec<(String, usize)> = idb[..allow_upto].to_vec();
            if include_edb {
                options.extend(EDB.iter().map(|(p, a)| (p.to_string(), *a)));
            }
            options.choose(rng).unwrap().clone()
        };
        let mut pos = Vec::new();
        for _ in 0..rng.gen_range(1..=2) {
            let (p, a) = pick(rng, level + 1, true);
            pos.push(Lit {
                pred: p,
                args: (0..a).map(|_| term(rng, &vars)).collect(),
            });
        }
        let bound: BTreeSet<String> = pos.iter().flat_map(|l| l.vars().cloned()).collect();
        let bound: Vec<&str> = bound.iter().map(String::as_str).collect();
        let ground_or_bound = |rng: &mut R| {
            if bound.is_empty() || rng.gen_bool(0.3) {
                CONSTANTS.choose(rng).unwrap().to_string()
            } else {
                bound.choose(rng).unwrap().to_string()
            }
        };
        let mut neg = Vec::new();
        for _ in 0..rng.gen_range(0..=2) {
            let (p, a) = pick(rng, level, true);
            neg.push(Lit {
                pred: p,
                args: (0..a).map(|_| ground_or_bound(rng)).collect(),
            });
        }
        let (hp, ha) = &idb[level];
        let head = Lit {
            pred: hp.clone(),
            args: (0..*ha).map(|_| ground_or_bound(rng)).collect(),
        };
        rules.push(GenRule { head, pos, neg });
    }
    let mut facts = Vec::new();
    for (p, a) in EDB {
        let tuples: Vec<Vec<String>> = match a {
            0 => vec![vec![]],
            1 => CONSTANTS.iter().map(|c| vec![c.to_string()]).collect(),
            _ => CONSTANTS
                .iter()
                .flat_map(|x| CONSTANTS.iter().map(move |y| vec![x.to_string(), y.to_string()]))
                .collect(),
        };
        for t in tuples {
            if rng.gen_bool(0.5) {
                facts.push(Lit {
                    pred: p.to_string(),
                    args: t,
                });
            }
        }
    }
    GenCase { rules, facts, idb }
}

type Ground = (String, Vec<String>);

fn substitutions(vars: &[String]) -> Vec<Vec<(String, String)>> {
    let mut out = vec![vec![]];
    for v in vars {
        let mut next = Vec::new();
        for s in &out {
            for c in CONSTANTS {
                let mut s2 = s.clone();
                s2.push((v.clone(), c.to_string()));
                next.push(s2);
            }
        }
        out = next;
    }
    out
}

fn apply(l: &Lit, s: &[(String, String)]) -> Ground {
    let args = l
        .args
        .iter()
        .map(|a| s.iter().find(|(v, _)| v == a).map_or(a.clone(), |(_, c)| c.clone()))
        .collect();
    (l.pred.clone(), args)
}

/// Stable models found by enumerating every subset of the derived-atom base
/// and checking it against the least model of its reduct.
pub fn brute_force_models(case: &GenCase) -> Vec<BTreeSet<Ground>> {
    let mut ground_rules: Vec<(Ground, Vec<Ground>, Vec<Ground>)> = Vec::new();
    for r in &case.rules {
        let mut vars: Vec<String> = r.pos.iter().flat_map(|l| l.vars().cloned()).collect();
        vars.sort();
        vars.dedup();
        for s in substitutions(&vars) {
            ground_rules.push((
                apply(&r.head, &s),
                r.pos.iter().map(|l| apply(l, &s)).collect(),
                r.neg.iter().map(|l| apply(l, &s)).collect(),
            ));
        }
    }
    let facts: HashSet<Ground> = case.facts.iter().map(|l| (l.pred.clone(), l.args.clone())).collect();
    let mut base: Vec<Ground> = Vec::new();
    for (p, a) in &case.idb {
        let tuples: Vec<Vec<String>> = match a {
            0 => vec![vec![]],
            _ => CONSTANTS.iter().map(|c| vec![c.to_string()]).collect(),
        };
        for t in tuples {
            base.push((p.clone(), t));
        }
    }
    let mut models = Vec::new();
    for mask in 0u32..(1 << base.len()) {
        let candidate: HashSet<&Ground> = base
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, g)| g)
            .collect();
        let holds_in_candidate = |g: &Ground| facts.contains(g) || candidate.contains(g);
        // least model of the reduct
        let mut lm: HashSet<Ground> = facts.clone();
        loop {
            let mut changed = false;
            for (h, pos, neg) in &ground_rules {
                if neg.iter().any(holds_in_candidate) {
                    continue;
                }
                if pos.iter().all(|g| lm.contains(g)) && lm.insert(h.clone()) {
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let derived: HashSet<&Ground> = lm.iter().filter(|g| !facts.contains(*g)).collect();
        if derived == candidate {
            models.push(derived.into_iter().cloned().collect());
        }
    }
    models
}

pub fn to_atoms(model: &BTreeSet<Ground>) -> BTreeSet<Atom> {
    model
        .iter()
        .map(|(p, args)| {
            let a: Vec<&str> = args.iter().map(String::as_str).collect();
            Atom::ground(p, &a)
        })
        .collect()
}

// ---------------------------------------------------------------- doorkey

fn blocked(env: &DoorKeyEnv, p: (usize, usize), picked: Option<(usize, usize)>, door_open: bool) -> bool {
    match env.cell(p.0, p.1) {
        Cell::Empty | Cell::Goal => false,
        Cell::Key(_) => Some(p) != picked,
        Cell::Door { .. } => !door_open,
        Cell::Wall => true,
    }
}

fn reachable(
    env: &DoorKeyEnv,
    from: (usize, usize),
    picked: Option<(usize, usize)>,
    door_open: bool,
) -> HashSet<(usize, usize)> {
    let mut seen = HashSet::from([from]);
    let mut q = VecDeque::from([from]);
    while let Some((x, y)) = q.pop_front() {
        for (dx, dy) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
            let n = ((x as i64 + dx) as usize, (y as i64 + dy) as usize);
            if n.0 < env.size() && n.1 < env.size() && !blocked(env, n, picked, door_open) && seen.insert(n) {
                q.push_back(n);
            }
        }
    }
    seen
}

fn adjacent(a: (usize, usize), b: (usize, usize)) -> bool {
    a.0.abs_diff(b.0) + a.1.abs_diff(b.1) == 1
}

/// Solvable iff some key of the door's colour can be faced from the agent's
/// region (keys are obstacles and cannot be dropped, so it must be the first
/// key taken), the door can then be faced, and the goal lies in the region
/// reachable once the door is open. Turning is always possible, so headings
/// are ignored.
pub fn doorkey_solvable(env: &DoorKeyEnv) -> bool {
    let start = reachable(env, env.agent_pos(), None, false);
    for (kx, ky, color) in env.keys() {
        if color != env.door_color() {
            continue;
        }
        if !start.iter().any(|p| adjacent(*p, (kx, ky))) {
            continue;
        }
        let with_key = reachable(env, env.agent_pos(), Some((kx, ky)), false);
        if !with_key.iter().any(|p| adjacent(*p, env.door_pos())) {
            continue;
        }
        if reachable(env, env.agent_pos(), Some((kx, ky)), true).contains(&env.goal_pos()) {
            return true;
        }
    }
    false
}

// ---------------------------------------------------------------- neural

/// Largest relative error between analytic and central-difference gradients.
pub fn gradient_check(net: &QNetwork, batch: &[&Transition], cfg: &TrainConfig, h: f64) -> f64 {
    let target = net.clone();
    let (_, grads) = loss_and_gradients(net, &target, batch, cfg).unwrap();
    let analytic: Vec<f64> = grads.values().copied().collect();
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for (i, g) in analytic.iter().enumerate() {
        let orig = *probe.params().nth(i).unwrap();
        *probe.params_mut().nth(i).unwrap() = orig + h;
        let up = loss_and_gradients(&probe, &target, batch, cfg).unwrap().0;
        *probe.params_mut().nth(i).unwrap() = orig - h;
        let down = loss_and_gradients(&probe, &target, batch, cfg).unwrap().0;
        *probe.params_mut().nth(i).unwrap() = orig;
        let numeric = (up - down) / (2.0 * h);
        let scale = g.abs().max(numeric.abs());
        if scale > 1e-7 {
            worst = worst.max((g - numeric).abs() / scale);
        }
    }
    worst
}

/// Smallest |pre-activation| over all hidden units for the given dense
/// inputs, recomputed from the flat parameter vector.
pub fn relu_margin(net: &QNetwork, inputs: &[Vec<f64>]) -> f64 {
    let sizes = net.sizes();
    let params: Vec<f64> = net.params().copied().collect();
    let mut margin = f64::INFINITY;
    for x in inputs {
        let mut act = x.clone();
        let mut off = 0;
        for (l, w) in sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &params[off..off + n_in * n_out];
            let bias = &params[off + n_in * n_out..off + n_in * n_out + n_out];
            off += n_in * n_out + n_out;
            let mut z: Vec<f64> = bias.to_vec();
            for i in 0..n_in {
                for j in 0..n_out {
                    z[j] += act[i] * weights[i * n_out + j];
                }
            }
            if l + 2 < sizes.len() {
                margin = z.iter().fold(margin, |m, v| m.min(v.abs()));
                act = z.into_iter().map(|v| v.max(0.0)).collect();
            } else {
                act = z;
            }
        }
    }
    margin
}

/// Join evaluator and precomputed grounding both reproduce the brute-force model.
pub fn logic_check(case: &GenCase) -> Result<(), String> {
    let program = parse_program(&case.source()).map_err(|e| format!("{e}\n{}", case.source()))?;
    let models = brute_force_models(case);
    if models.len() != 1 {
        return Err(format!("{} stable models for\n{}", models.len(), case.source()));
    }
    let expected = to_atoms(&models[0]);
    let facts = case.fact_set();
    let got = program.entailed_actions(&facts);
    if got != expected {
        return Err(format!(
            "join evaluator mismatch\n{}facts {facts}\nexpected {expected:?}\ngot {got:?}",
            case.source()
        ));
    }
    let domain: BTreeSet<Symbol> = CONSTANTS.iter().map(|c| Symbol::from(*c)).collect();
    let ground = precompute_groundings(&program, &domain);
    let got = ground.entailed_actions(&facts).map_err(|e| e.to_string())?;
    if got != expected {
        return Err(format!("ground evaluator mismatch\n{}", case.source()));
    }
    Ok(())
}


const RELU_CLEARANCE: f64 = 1e-2;

/// A random small network with a batch of dense transitions whose hidden
/// pre-activations all stay well clear of the ReLU kink (a finite difference
/// straddling it measures a different one-sided slope).
pub fn random_problem(rng: &mut ChaCha8Rng) -> (QNetwork, Vec<Transition>) {
    loop {
        let depth = rng.gen_range(1..=2);
        let mut sizes = vec![rng.gen_range(2..=6)];
        for _ in 0..depth {
            sizes.push(rng.gen_range(2..=6));
        }
        sizes.push(rng.gen_range(2..=4));
        let net = QNetwork::new(&sizes, rng).unwrap();
        let n_actions = *sizes.last().unwrap();
        let inputs: Vec<Vec<f64>> = (0..4).map(|_| (0..sizes[0]).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        if relu_margin(&net, &inputs) < RELU_CLEARANCE {
            continue;
        }
        let batch = (0..3)
            .map(|i| Transition {
                obs: Features::Dense(Arc::from(inputs[i].as_slice())),
                action: rng.gen_range(0..n_actions),
                reward: rng.gen_range(-1.0..1.0),
                next_obs: Features::Dense(Arc::from(inputs[3].as_slice())),
                terminal: i == 0,
            })
            .collect();
        return (net, batch);
    }
}

