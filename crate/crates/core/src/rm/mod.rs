//! Reward machines for the RM-DQN baseline: automata over propositional
//! events whose transitions pay a shaping bonus and whose current state is
//! appended to the observation.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envs::{Domain, GridEnv, OfficeTask, OfficeWorld, Room};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RmError {
    #[error("event `{0}` is not declared by the reward machine")]
    UnknownEvent(String),
    #[error("state `{0}` is not declared by the reward machine")]
    UnknownState(String),
    #[error("reward machine has no states")]
    NoStates,
    #[error("transition reward {0} is not finite")]
    BadReward(f64),
    #[error("reward-machine file: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmTransition {
    pub from: usize,
    /// Fires when all of these events hold.
    pub events: BTreeSet<String>,
    pub to: usize,
    pub reward: f64,
}

/// File form: transitions are `[from, [events...], to, reward]` tuples.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardMachineDef {
    pub states: Vec<String>,
    pub initial: String,
    #[serde(default)]
    pub accepting: Vec<String>,
    pub events: Vec<String>,
    pub transitions: Vec<(String, Vec<String>, String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardMachine {
    states: Vec<String>,
    initial: usize,
    accepting: BTreeSet<usize>,
    events: BTreeSet<String>,
    transitions: Vec<RmTransition>,
}

impl RewardMachine {
    pub fn from_def(def: &RewardMachineDef) -> Result<RewardMachine, RmError> {
        if def.states.is_empty() {
            return Err(RmError::NoStates);
        }
        let state = |name: &str| {
            def.states
                .iter()
                .position(|s| s == name)
                .ok_or_else(|| RmError::UnknownState(name.to_string()))
        };
        let events: BTreeSet<String> = def.events.iter().cloned().collect();
        let mut transitions = Vec::with_capacity(def.transitions.len());
        for (from, evs, to, reward) in &def.transitions {
            if !reward.is_finite() {
                return Err(RmError::BadReward(*reward));
            }
            for e in evs {
                if !events.contains(e) {
                    return Err(RmError::UnknownEvent(e.clone()));
                }
            }
            transitions.push(RmTransition {
                from: state(from)?,
                events: evs.iter().cloned().collect(),
                to: state(to)?,
                reward: *reward,
            });
        }
        Ok(RewardMachine {
            states: def.states.clone(),
            initial: state(&def.initial)?,
            accepting: def.accepting.iter().map(|s| state(s)).collect::<Result<_, _>>()?,
            events,
            transitions,
        })
    }

    pub fn from_json_str(json: &str) -> Result<RewardMachine, RmError> {
        let def: RewardMachineDef = serde_json::from_str(json).map_err(|e| RmError::Config(e.to_string()))?;
        RewardMachine::from_def(&def)
    }

    pub fn from_json_file(path: &Path) -> Result<RewardMachine, RmError> {
        let text = std::fs::read_to_string(path).map_err(|e| RmError::Config(format!("{}: {e}", path.display())))?;
        RewardMachine::from_json_str(&text)
    }

    /// Task encodings for each domain; every transition pays `bonus`.
    pub fn builtin(domain: Domain, task: Option<OfficeTask>, bonus: f64) -> RewardMachine {
        let t = |from: &str, evs: &[&str], to: &str| {
            (
                from.to_string(),
                evs.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
                to.to_string(),
                bonus,
            )
        };
        let strings = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let def = match domain {
            Domain::DoorKey => RewardMachineDef {
                states: strings(&["u0", "key", "door", "goal"]),
                initial: "u0".into(),
                accepting: strings(&["goal"]),
                events: strings(DOORKEY_EVENTS),
                transitions: vec![
                    t("u0", &["picked_key"], "key"),
                    t("key", &["opened_door"], "door"),
                    t("door", &["at_goal"], "goal"),
                ],
            },
            Domain::OfficeWorld => {
                let mut transitions = Vec::new();
                let (states, accepting): (&[&str], &str) = match task.unwrap_or_default() {
                    OfficeTask::DeliverCoffee => {
                        transitions.extend([t("u0", &["got_coffee"], "coffee"), t("coffee", &["at_office"], "done")]);
                        (&["u0", "coffee", "done", "failed"], "done")
                    }
                    OfficeTask::DeliverCoffeeAndMail => {
                        transitions.extend([
                            t("u0", &["got_coffee", "got_mail"], "both"),
                            t("u0", &["got_coffee"], "coffee"),
                            t("u0", &["got_mail"], "mail"),
                            t("coffee", &["got_mail"], "both"),
                            t("mail", &["got_coffee"], "both"),
                            t("both", &["at_office"], "done"),
                        ]);
                        (&["u0", "coffee", "mail", "both", "done", "failed"], "done")
                    }
                    OfficeTask::PatrolAB => {
                        transitions.extend([t("u0", &["at_a"], "a"), t("a", &["at_b"], "done")]);
                        (&["u0", "a", "done", "failed"], "done")
                    }
                    OfficeTask::PatrolABC => {
                        transitions.extend([
                            t("u0", &["at_a"], "a"),
                            t("a", &["at_b"], "b"),
                            t("b", &["at_c"], "done"),
                        ]);
                        (&["u0", "a", "b", "done", "failed"], "done")
                    }
                };
                // breaking a decoration wins over any other transition
                let mut all: Vec<_> = states
                    .iter()
                    .filter(|s| **s != accepting && **s != "failed")
                    .map(|s| (s.to_string(), vec!["broke_decoration".to_string()], "failed".to_string(), 0.0))
                    .collect();
                all.extend(transitions);
                RewardMachineDef {
                    states: strings(states),
                    initial: "u0".into(),
                    accepting: vec![accepting.to_string()],
                    events: strings(OFFICE_EVENTS),
                    transitions: all,
                }
            }
        };
        RewardMachine::from_def(&def).expect("built-in reward machine is well formed")
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn state_name(&self, u: usize) -> &str {
        &self.states[u]
    }

    pub fn is_accepting(&self, u: usize) -> bool {
        self.accepting.contains(&u)
    }

    pub fn events(&self) -> &BTreeSet<String> {
        &self.events
    }

    /// δ(u, events) and the transition reward. The first listed transition
    /// out of `u` whose events all hold fires; otherwise `u` loops with reward 0.
    /// Accepting states never move.
    pub fn step(&self, u: usize, events: &[&str]) -> Result<(usize, f64), RmError> {
        if let Some(e) = events.iter().find(|e| !self.events.contains(**e)) {
            return Err(RmError::UnknownEvent(e.to_string()));
        }
        if self.is_accepting(u) {
            return Ok((u, 0.0));
        }
        for tr in self.transitions.iter().filter(|t| t.from == u) {
            if tr.events.iter().all(|e| events.contains(&e.as_str())) {
                return Ok((tr.to, tr.reward));
            }
        }
        Ok((u, 0.0))
    }

    /// Runs a whole event trace from the initial state.
    pub fn run<'a>(&self, trace: impl IntoIterator<Item = &'a [&'a str]>) -> Result<(usize, f64), RmError> {
        let mut u = self.initial;
        let mut total = 0.0;
        for events in trace {
            let (next, r) = self.step(u, events)?;
            u = next;
            total += r;
        }
        Ok((u, total))
    }
}

pub const DOORKEY_EVENTS: &[&str] = &["picked_key", "opened_door", "at_goal"];
pub const OFFICE_EVENTS: &[&str] = &[
    "got_coffee",
    "got_mail",
    "at_office",
    "at_a",
    "at_b",
    "at_c",
    "at_d",
    "broke_decoration",
];

/// Propositions that hold in the current state of `env`.
pub fn detect_events(env: &GridEnv) -> Vec<&'static str> {
    let mut out = Vec::new();
    match env {
        GridEnv::DoorKey(e) => {
            if e.carrying().is_some() {
                out.push("picked_key");
            }
            if e.door_open() {
                out.push("opened_door");
            }
            if e.task_success() {
                out.push("at_goal");
            }
        }
        GridEnv::Office(w) => {
            if w.has_coffee() {
                out.push("got_coffee");
            }
            if w.has_mail() {
                out.push("got_mail");
            }
            if w.pos() == OfficeWorld::office_position() {
                out.push("at_office");
            }
            for (room, name) in Room::ALL.iter().zip(["at_a", "at_b", "at_c", "at_d"]) {
                if w.pos() == room.pos() {
                    out.push(name);
                }
            }
            if w.failed() {
                out.push("broke_decoration");
            }
        }
    }
    out
}
