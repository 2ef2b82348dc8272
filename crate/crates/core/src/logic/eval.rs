use std::collections::BTreeSet;

use rustc_hash::{FxHashMap, FxHashSet};

use super::syntax::{Atom, FactSet, Program, Rule, Symbol, Term};

/// Work counters for one evaluation.
///
/// `ground_instances` counts complete variable bindings reached for rule
/// bodies; `literals_examined` counts every body literal tested against the
/// model (each candidate match of a positive literal and each negative check).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalStats {
    pub ground_instances: u64,
    pub literals_examined: u64,
    pub passes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(super) enum Slot {
    Var(usize),
    Const(Symbol),
}

#[derive(Debug, Clone)]
pub(super) struct Pattern {
    predicate: Symbol,
    args: Vec<Slot>,
}

#[derive(Debug, Clone)]
pub(crate) struct CompiledRule {
    head: Pattern,
    pos: Vec<Pattern>,
    neg: Vec<Pattern>,
    vars: usize,
}

impl CompiledRule {
    pub(super) fn compile(rule: &Rule) -> CompiledRule {
        let vars = rule.variables();
        let pattern = |atom: &Atom| Pattern {
            predicate: atom.predicate.clone(),
            args: atom
                .args
                .iter()
                .map(|t| match t {
                    Term::Var(v) => Slot::Var(vars.iter().position(|x| x == v).unwrap()),
                    Term::Const(c) => Slot::Const(c.clone()),
                })
                .collect(),
        };
        CompiledRule {
            head: pattern(&rule.head),
            pos: rule.pos_body.iter().map(pattern).collect(),
            neg: rule.neg_body.iter().map(pattern).collect(),
            vars: vars.len(),
        }
    }
}

/// The working model: the input facts, borrowed and grouped by predicate,
/// plus everything derived so far.
struct Model<'a> {
    facts: &'a FactSet,
    fact_list: Vec<&'a Atom>,
    /// (predicate, range into `fact_list`); the fact set is sorted by predicate.
    groups: Vec<(&'a Symbol, usize, usize)>,
    derived: Vec<Atom>,
    seen: FxHashSet<Atom>,
    by_predicate: FxHashMap<Symbol, Vec<usize>>,
}

impl<'a> Model<'a> {
    fn new(facts: &'a FactSet) -> Model<'a> {
        let fact_list: Vec<&Atom> = facts.iter().collect();
        let mut groups: Vec<(&Symbol, usize, usize)> = Vec::new();
        for (i, atom) in fact_list.iter().enumerate() {
            match groups.last_mut() {
                Some((p, _, end)) if **p == atom.predicate => *end = i + 1,
                _ => groups.push((&atom.predicate, i, i + 1)),
            }
        }
        Model {
            facts,
            fact_list,
            groups,
            derived: Vec::new(),
            seen: FxHashSet::default(),
            by_predicate: FxHashMap::default(),
        }
    }

    fn contains(&self, atom: &Atom) -> bool {
        self.facts.contains(atom) || self.seen.contains(atom)
    }

    fn insert(&mut self, atom: Atom) -> bool {
        if self.contains(&atom) {
            return false;
        }
        self.by_predicate
            .entry(atom.predicate.clone())
            .or_default()
            .push(self.derived.len());
        self.seen.insert(atom.clone());
        self.derived.push(atom);
        true
    }

    fn candidates<'m>(&'m self, predicate: &Symbol) -> impl Iterator<Item = &'m Atom> + 'm {
        let base: &[&Atom] = match self.groups.iter().find(|(p, _, _)| *p == predicate) {
            Some(&(_, start, end)) => &self.fact_list[start..end],
            None => &[],
        };
        let derived: &[usize] = self.by_predicate.get(predicate).map_or(&[], Vec::as_slice);
        base.iter()
            .copied()
            .chain(derived.iter().map(|&i| &self.derived[i]))
    }
}

fn instantiate(pattern: &Pattern, binding: &[Option<&Symbol>]) -> Atom {
    Atom {
        predicate: pattern.predicate.clone(),
        args: pattern
            .args
            .iter()
            .map(|s| match s {
                Slot::Const(c) => Term::Const(c.clone()),
                Slot::Var(i) => Term::Const(binding[*i].expect("safe rule binds every variable").clone()),
            })
            .collect(),
    }
}

/// Matches `atom` against `pattern`, extending `binding` and recording newly
/// bound slots on `trail`. On mismatch the partial binding is undone.
fn unify<'m>(pattern: &Pattern, atom: &'m Atom, binding: &mut [Option<&'m Symbol>], trail: &mut Vec<usize>) -> bool {
    if pattern.args.len() != atom.args.len() {
        return false;
    }
    let mark = trail.len();
    for (slot, term) in pattern.args.iter().zip(&atom.args) {
        let value = term.name();
        let ok = match slot {
            Slot::Const(c) => c == value,
            Slot::Var(i) => match binding[*i] {
                Some(bound) => bound == value,
                None => {
                    binding[*i] = Some(value);
                    trail.push(*i);
                    true
                }
            },
        };
        if !ok {
            undo(binding, trail, mark);
            return false;
        }
    }
    true
}

fn undo(binding: &mut [Option<&Symbol>], trail: &mut Vec<usize>, mark: usize) {
    for i in trail.drain(mark..) {
        binding[i] = None;
    }
}

/// Whether the fully bound `pattern` holds in the model.
fn holds(pattern: &Pattern, binding: &[Option<&Symbol>], model: &Model) -> bool {
    model.candidates(&pattern.predicate).any(|atom| {
        atom.args.len() == pattern.args.len()
            && pattern.args.iter().zip(&atom.args).all(|(slot, term)| match slot {
                Slot::Const(c) => c == term.name(),
                Slot::Var(i) => binding[*i].expect("safe rule binds every variable") == term.name(),
            })
    })
}

struct Join<'r, 'm> {
    rule: &'r CompiledRule,
    model: &'m Model<'m>,
    binding: Vec<Option<&'m Symbol>>,
    trail: Vec<usize>,
}

impl<'r, 'm> Join<'r, 'm> {
    fn run(&mut self, depth: usize, stats: &mut EvalStats, out: &mut Vec<Atom>) {
        let rule = self.rule;
        if depth == rule.pos.len() {
            stats.ground_instances += 1;
            for neg in &rule.neg {
                stats.literals_examined += 1;
                if holds(neg, &self.binding, self.model) {
                    return;
                }
            }
            out.push(instantiate(&rule.head, &self.binding));
            return;
        }
        let pattern = &rule.pos[depth];
        let model = self.model;
        for atom in model.candidates(&pattern.predicate) {
            stats.literals_examined += 1;
            let mark = self.trail.len();
            if unify(pattern, atom, &mut self.binding, &mut self.trail) {
                self.run(depth + 1, stats, out);
                undo(&mut self.binding, &mut self.trail, mark);
            }
        }
    }
}

impl Program {
    /// Ground head atoms in the unique model of `facts ∪ program`.
    ///
    /// Only atoms whose predicate heads some rule are returned; input facts
    /// of other predicates are not echoed back.
    pub fn entailed_actions(&self, facts: &FactSet) -> BTreeSet<Atom> {
        self.entailed_with_stats(facts).0
    }

    pub fn entailed_with_stats(&self, facts: &FactSet) -> (BTreeSet<Atom>, EvalStats) {
        let mut model = Model::new(facts);
        let mut stats = EvalStats::default();
        let mut derived = Vec::new();
        for (component, recursive) in &self.components {
            loop {
                stats.passes += 1;
                let mut changed = false;
                for &ri in component {
                    let rule = &self.compiled[ri];
                    derived.clear();
                    let mut join = Join {
                        rule,
                        model: &model,
                        binding: vec![None; rule.vars],
                        trail: Vec::new(),
                    };
                    join.run(0, &mut stats, &mut derived);
                    for atom in derived.drain(..) {
                        changed |= model.insert(atom);
                    }
                }
                // one pass completes a component that does not depend on itself
                if !changed || !recursive {
                    break;
                }
            }
        }
        let heads = self.head_predicates();
        let echoed = facts.iter().filter(|a| heads.contains(&a.predicate)).cloned();
        let result = model.derived.into_iter().chain(echoed).collect();
        (result, stats)
    }
}
