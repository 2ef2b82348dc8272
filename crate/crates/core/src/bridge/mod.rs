//! Glue between environments and the rule engine: the feature map turning a
//! state into ground facts, and the action map turning suggested action atoms
//! back into environment action indices.

mod action_map;
mod facts;
mod guidance;

pub use action_map::ActionMap;
pub use facts::{doorkey_facts, extract_facts, office_facts};
pub use guidance::{builtin_policy, Guidance, Suggestion};

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::envs::{Color, Domain, Room};
use crate::logic::{ground_rule, LogicError, Program, Rule, Symbol};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BridgeError {
    #[error("no action mapping for ground atom `{0}`")]
    Unmapped(String),
    #[error("unknown {domain} action `{name}`")]
    UnknownAction { domain: &'static str, name: String },
    #[error("action-map entry `{0}` lists no actions")]
    EmptyEntry(String),
    #[error("action-map config: {0}")]
    Config(String),
    #[error("predicate `{0}` appears in more than one vocabulary group")]
    OverlappingVocabulary(String),
    #[error("{0}")]
    NotSurjective(SurjectivityReport),
    #[error(transparent)]
    Logic(#[from] LogicError),
}

/// Predicate groups for one domain. Action predicates are the ones the
/// action map covers; auxiliary predicates are rule heads used only as
/// intermediate conclusions (e.g. `goto`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionVocabulary {
    actions: BTreeSet<Symbol>,
    features: BTreeSet<Symbol>,
    auxiliary: BTreeSet<Symbol>,
}

impl ActionVocabulary {
    pub fn new(actions: &[&str], features: &[&str], auxiliary: &[&str]) -> Result<ActionVocabulary, BridgeError> {
        let mut seen = BTreeSet::new();
        for p in actions.iter().chain(features).chain(auxiliary) {
            if !seen.insert(*p) {
                return Err(BridgeError::OverlappingVocabulary(p.to_string()));
            }
        }
        let set = |xs: &[&str]| xs.iter().map(|s| Symbol::from(*s)).collect();
        Ok(ActionVocabulary {
            actions: set(actions),
            features: set(features),
            auxiliary: set(auxiliary),
        })
    }

    pub fn for_domain(domain: Domain) -> ActionVocabulary {
        match domain {
            Domain::DoorKey => ActionVocabulary::new(
                &["left", "right", "forward", "pickup", "open"],
                &[
                    "key",
                    "door",
                    "goal",
                    "samecolor",
                    "locked",
                    "unlocked",
                    "carrying",
                    "notcarrying",
                    "on_left",
                    "on_right",
                    "straight",
                ],
                &["goto"],
            ),
            Domain::OfficeWorld => ActionVocabulary::new(
                &["left", "right", "forward", "backward"],
                &[
                    "coffee",
                    "mail",
                    "office",
                    "hasCoffee",
                    "hasMail",
                    "hittingDecoration",
                    "visited",
                    "on_left",
                    "on_right",
                    "straight",
                    "behind",
                    "blocked",
                ],
                &["goto"],
            ),
        }
        .expect("built-in vocabularies are disjoint")
    }

    pub fn is_action(&self, predicate: &str) -> bool {
        self.actions.contains(predicate)
    }

    pub fn is_feature(&self, predicate: &str) -> bool {
        self.features.contains(predicate)
    }

    pub fn is_auxiliary(&self, predicate: &str) -> bool {
        self.auxiliary.contains(predicate)
    }

    pub fn actions(&self) -> &BTreeSet<Symbol> {
        &self.actions
    }
}

/// Every constant the feature map of `domain` can emit.
pub fn constant_domain(domain: Domain) -> BTreeSet<Symbol> {
    let mut out = BTreeSet::new();
    match domain {
        Domain::DoorKey => {
            out.insert(Symbol::from("g"));
            for c in Color::ALL {
                out.insert(Symbol::from(format!("k_{}", c.name())));
                out.insert(Symbol::from(format!("d_{}", c.name())));
            }
        }
        Domain::OfficeWorld => {
            for c in ["c1", "c2", "m", "o", "none", "left", "right", "forward", "backward"] {
                out.insert(Symbol::from(c));
            }
            for r in Room::ALL {
                out.insert(Symbol::from(r.name()));
            }
        }
    }
    out
}

/// Ground rule heads that no action covers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SurjectivityReport {
    pub unmapped: Vec<String>,
}

impl fmt::Display for SurjectivityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rule heads without an action mapping: {}", self.unmapped.join(", "))
    }
}

/// Checks that every ground head the program can derive is either auxiliary
/// or mapped to at least one action. Heads of unknown predicates are listed
/// with `·` in place of their arguments.
pub fn validate_surjective(
    program: &Program,
    map: &ActionMap,
    vocab: &ActionVocabulary,
    constants: &BTreeSet<Symbol>,
) -> Result<(), SurjectivityReport> {
    let mut domain = constants.clone();
    domain.extend(program.constants().iter().cloned());
    let mut unmapped = BTreeSet::new();
    for rule in program.rules() {
        let head = &rule.head;
        if vocab.is_auxiliary(&head.predicate) {
            continue;
        }
        if !vocab.is_action(&head.predicate) {
            let dots = vec!["·"; head.arity()];
            unmapped.insert(if dots.is_empty() {
                head.predicate.to_string()
            } else {
                format!("{}({})", head.predicate, dots.join(","))
            });
            continue;
        }
        for g in ground_rule(&Rule::fact(head.clone()), &domain) {
            if map.lookup(&g.head).is_none() {
                unmapped.insert(g.head.to_string());
            }
        }
    }
    if unmapped.is_empty() {
        Ok(())
    } else {
        Err(SurjectivityReport {
            unmapped: unmapped.into_iter().collect(),
        })
    }
}
