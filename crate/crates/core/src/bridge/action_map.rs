use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use crate::envs::Domain;
use crate::logic::{parse_atom, Atom, Symbol, Term};

use super::BridgeError;

/// Action atoms to environment action indices.
///
/// Keys are atom patterns; a variable argument matches any constant, so
/// `pickup(X)` covers every `pickup(k_*)`. When several patterns match,
/// their index sets are merged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionMap {
    domain: Domain,
    entries: Vec<(Atom, Vec<usize>)>,
    /// Predicate to entry indices.
    index: HashMap<Symbol, Vec<usize>>,
}

impl ActionMap {
    pub fn new(domain: Domain, entries: Vec<(Atom, Vec<usize>)>) -> Result<ActionMap, BridgeError> {
        let count = domain.action_names().len();
        let mut index: HashMap<Symbol, Vec<usize>> = HashMap::new();
        for (i, (pattern, actions)) in entries.iter().enumerate() {
            if actions.is_empty() {
                return Err(BridgeError::EmptyEntry(pattern.to_string()));
            }
            if let Some(&bad) = actions.iter().find(|&&a| a >= count) {
                return Err(BridgeError::UnknownAction {
                    domain: domain.name(),
                    name: bad.to_string(),
                });
            }
            index.entry(pattern.predicate.clone()).or_default().push(i);
        }
        Ok(ActionMap { domain, entries, index })
    }

    /// DoorKey: every action atom maps to the action of the same name.
    /// OfficeWorld: `forward` is up and `backward` is down.
    pub fn builtin(domain: Domain) -> ActionMap {
        let table: &[(&str, &str)] = match domain {
            Domain::DoorKey => &[
                ("left", "left"),
                ("right", "right"),
                ("forward", "forward"),
                ("pickup(X)", "pickup"),
                ("open(X)", "open"),
            ],
            Domain::OfficeWorld => &[
                ("left", "left"),
                ("right", "right"),
                ("forward", "up"),
                ("backward", "down"),
            ],
        };
        let map: BTreeMap<String, Vec<String>> = table
            .iter()
            .map(|(k, v)| (k.to_string(), vec![v.to_string()]))
            .collect();
        ActionMap::from_table(domain, &map).expect("built-in action map is valid")
    }

    /// Builds a map from `atom text -> [action names]`.
    pub fn from_table(domain: Domain, table: &BTreeMap<String, Vec<String>>) -> Result<ActionMap, BridgeError> {
        let names = domain.action_names();
        let mut entries = Vec::with_capacity(table.len());
        for (key, actions) in table {
            let atom = parse_atom(key)?;
            let mut idx = Vec::with_capacity(actions.len());
            for name in actions {
                let i = names
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| BridgeError::UnknownAction {
                        domain: domain.name(),
                        name: name.clone(),
                    })?;
                idx.push(i);
            }
            entries.push((atom, idx));
        }
        ActionMap::new(domain, entries)
    }

    /// Reads a JSON object such as `{"pickup(X)": ["pickup"], "forward": ["up"]}`.
    pub fn from_json_str(domain: Domain, json: &str) -> Result<ActionMap, BridgeError> {
        let table: BTreeMap<String, Vec<String>> =
            serde_json::from_str(json).map_err(|e| BridgeError::Config(e.to_string()))?;
        ActionMap::from_table(domain, &table)
    }

    pub fn from_json_file(domain: Domain, path: &Path) -> Result<ActionMap, BridgeError> {
        let text = std::fs::read_to_string(path).map_err(|e| BridgeError::Config(format!("{}: {e}", path.display())))?;
        ActionMap::from_json_str(domain, &text)
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn entries(&self) -> &[(Atom, Vec<usize>)] {
        &self.entries
    }

    /// Action indices for a ground atom, or `None` when no pattern matches.
    pub fn lookup(&self, atom: &Atom) -> Option<Vec<usize>> {
        let candidates = self.index.get(&atom.predicate)?;
        let mut out = BTreeSet::new();
        for &i in candidates {
            let (pattern, actions) = &self.entries[i];
            if matches(pattern, atom) {
                out.extend(actions.iter().copied());
            }
        }
        (!out.is_empty()).then(|| out.into_iter().collect())
    }

    /// Union of the mapped index sets, sorted. Fails on the first unmapped atom.
    pub fn actions_from_atoms<'a>(&self, atoms: impl IntoIterator<Item = &'a Atom>) -> Result<Vec<usize>, BridgeError> {
        let mut out = BTreeSet::new();
        for atom in atoms {
            let idx = self.lookup(atom).ok_or_else(|| BridgeError::Unmapped(atom.to_string()))?;
            out.extend(idx);
        }
        Ok(out.into_iter().collect())
    }
}

fn matches(pattern: &Atom, atom: &Atom) -> bool {
    if pattern.predicate != atom.predicate || pattern.args.len() != atom.args.len() {
        return false;
    }
    let mut binding: Vec<(&Symbol, &Symbol)> = Vec::new();
    for (p, a) in pattern.args.iter().zip(&atom.args) {
        let value = a.name();
        match p {
            Term::Const(c) => {
                if c != value {
                    return false;
                }
            }
            Term::Var(v) => match binding.iter().find(|(name, _)| *name == v) {
                Some((_, bound)) if *bound != value => return false,
                Some(_) => {}
                None => binding.push((v, value)),
            },
        }
    }
    true
}
