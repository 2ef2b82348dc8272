use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use petgraph::algo::tarjan_scc;
use petgraph::graphmap::DiGraphMap;
use rustc_hash::FxHashSet;

use super::eval::CompiledRule;
use super::LogicError;

/// Interned-by-sharing symbol; cheap to clone, compared by content.
pub type Symbol = Arc<str>;

thread_local! {
    static SYMBOLS: RefCell<FxHashSet<Symbol>> = RefCell::new(FxHashSet::default());
}

/// Shared symbol for `name`. Fact extraction builds the same few names every
/// step, so they are allocated once per thread and cloned afterwards.
pub fn intern(name: &str) -> Symbol {
    SYMBOLS.with(|cell| {
        let mut set = cell.borrow_mut();
        if let Some(s) = set.get(name) {
            return s.clone();
        }
        let s: Symbol = name.into();
        set.insert(s.clone());
        s
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(Symbol),
    Const(Symbol),
}

impl Term {
    /// Classifies `name` by its leading character: uppercase or `_` is a variable.
    pub fn from_name(name: &str) -> Term {
        match name.chars().next() {
            Some(c) if c.is_ascii_uppercase() || c == '_' => Term::Var(intern(name)),
            _ => Term::Const(intern(name)),
        }
    }

    pub fn constant(name: &str) -> Term {
        Term::Const(intern(name))
    }

    pub fn var(name: &str) -> Term {
        Term::Var(intern(name))
    }

    pub fn name(&self) -> &Symbol {
        match self {
            Term::Var(s) | Term::Const(s) => s,
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub predicate: Symbol,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: &str, args: Vec<Term>) -> Atom {
        Atom {
            predicate: intern(predicate),
            args,
        }
    }

    /// Ground atom from constant names.
    pub fn ground(predicate: &str, args: &[&str]) -> Atom {
        Atom {
            predicate: intern(predicate),
            args: args.iter().map(|a| Term::Const(intern(a))).collect(),
        }
    }

    pub fn prop(predicate: &str) -> Atom {
        Atom::ground(predicate, &[])
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| !t.is_var())
    }

    pub fn variables(&self) -> impl Iterator<Item = &Symbol> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        })
    }

    pub fn constants(&self) -> impl Iterator<Item = &Symbol> {
        self.args.iter().filter_map(|t| match t {
            Term::Const(c) => Some(c),
            Term::Var(_) => None,
        })
    }

    /// Replaces variables bound in `subst`; unbound variables are kept.
    pub fn substitute(&self, subst: &HashMap<Symbol, Symbol>) -> Atom {
        Atom {
            predicate: self.predicate.clone(),
            args: self
                .args
                .iter()
                .map(|t| match t {
                    Term::Var(v) => subst
                        .get(v)
                        .map(|c| Term::Const(c.clone()))
                        .unwrap_or_else(|| t.clone()),
                    Term::Const(_) => t.clone(),
                })
                .collect(),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, t) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{t}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Rule {
    pub head: Atom,
    pub pos_body: Vec<Atom>,
    pub neg_body: Vec<Atom>,
}

impl Rule {
    pub fn new(head: Atom, pos_body: Vec<Atom>, neg_body: Vec<Atom>) -> Rule {
        Rule {
            head,
            pos_body,
            neg_body,
        }
    }

    pub fn fact(head: Atom) -> Rule {
        Rule::new(head, Vec::new(), Vec::new())
    }

    /// Distinct variables in order of first occurrence (head, positive body, negative body).
    pub fn variables(&self) -> Vec<Symbol> {
        let mut seen: Vec<Symbol> = Vec::new();
        let atoms = std::iter::once(&self.head)
            .chain(&self.pos_body)
            .chain(&self.neg_body);
        for atom in atoms {
            for v in atom.variables() {
                if !seen.contains(v) {
                    seen.push(v.clone());
                }
            }
        }
        seen
    }

    pub fn is_ground(&self) -> bool {
        self.head.is_ground()
            && self.pos_body.iter().all(Atom::is_ground)
            && self.neg_body.iter().all(Atom::is_ground)
    }

    pub fn body_len(&self) -> usize {
        self.pos_body.len() + self.neg_body.len()
    }

    fn atoms(&self) -> impl Iterator<Item = &Atom> {
        std::iter::once(&self.head)
            .chain(&self.pos_body)
            .chain(&self.neg_body)
    }

    fn check_safety(&self) -> Result<(), LogicError> {
        let bound: BTreeSet<&Symbol> = self.pos_body.iter().flat_map(Atom::variables).collect();
        let unsafe_var = self
            .head
            .variables()
            .chain(self.neg_body.iter().flat_map(Atom::variables))
            .find(|v| !bound.contains(v));
        match unsafe_var {
            Some(v) => Err(LogicError::UnsafeRule {
                rule: self.to_string(),
                variable: v.to_string(),
            }),
            None => Ok(()),
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if self.body_len() > 0 {
            f.write_str(" :- ")?;
            let pos = self.pos_body.iter().map(|a| a.to_string());
            let neg = self.neg_body.iter().map(|a| format!("not {a}"));
            let body: Vec<String> = pos.chain(neg).collect();
            f.write_str(&body.join(", "))?;
        }
        f.write_str(".")
    }
}

/// A validated program: rules are safe, arities agree and negation is stratified.
#[derive(Debug, Clone)]
pub struct Program {
    rules: Vec<Rule>,
    constants: BTreeSet<Symbol>,
    arities: BTreeMap<Symbol, usize>,
    /// Rule indices grouped by stratum, lowest first.
    strata: Vec<Vec<usize>>,
    heads: BTreeSet<Symbol>,
    /// Rules grouped by strongly connected component of the predicate
    /// graph, dependencies first, flagged when the component is recursive.
    pub(super) components: Vec<(Vec<usize>, bool)>,
    pub(super) compiled: Vec<CompiledRule>,
}

impl PartialEq for Program {
    fn eq(&self, other: &Self) -> bool {
        self.rules == other.rules
    }
}

impl Program {
    pub fn new(rules: Vec<Rule>) -> Result<Program, LogicError> {
        let mut arities: BTreeMap<Symbol, usize> = BTreeMap::new();
        let mut constants = BTreeSet::new();
        for rule in &rules {
            rule.check_safety()?;
            for atom in rule.atoms() {
                check_arity(&mut arities, atom)?;
                constants.extend(atom.constants().cloned());
            }
        }
        let strata = stratify(&rules)?;
        let compiled = rules.iter().map(CompiledRule::compile).collect();
        let heads = rules.iter().map(|r| r.head.predicate.clone()).collect();
        let components = components(&rules);
        Ok(Program {
            rules,
            constants,
            arities,
            strata,
            heads,
            components,
            compiled,
        })
    }

    pub fn empty() -> Program {
        Program::new(Vec::new()).expect("empty program is valid")
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn constants(&self) -> &BTreeSet<Symbol> {
        &self.constants
    }

    pub fn arity(&self, predicate: &str) -> Option<usize> {
        self.arities.get(predicate).copied()
    }

    pub fn strata(&self) -> &[Vec<usize>] {
        &self.strata
    }

    /// Predicates that occur as the head of some rule.
    pub fn head_predicates(&self) -> &BTreeSet<Symbol> {
        &self.heads
    }

    pub fn is_ground(&self) -> bool {
        self.rules.iter().all(Rule::is_ground)
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for rule in &self.rules {
            writeln!(f, "{rule}")?;
        }
        Ok(())
    }
}

fn check_arity(arities: &mut BTreeMap<Symbol, usize>, atom: &Atom) -> Result<(), LogicError> {
    match arities.get(&atom.predicate) {
        Some(&expected) if expected != atom.arity() => Err(LogicError::ArityMismatch {
            predicate: atom.predicate.to_string(),
            expected,
            found: atom.arity(),
        }),
        Some(_) => Ok(()),
        None => {
            arities.insert(atom.predicate.clone(), atom.arity());
            Ok(())
        }
    }
}

/// Assigns each head predicate the smallest stratum consistent with its
/// dependencies: `>=` through positive literals, `>` through negative ones.
fn stratify(rules: &[Rule]) -> Result<Vec<Vec<usize>>, LogicError> {
    let heads: BTreeSet<&Symbol> = rules.iter().map(|r| &r.head.predicate).collect();
    let mut level: BTreeMap<&Symbol, usize> = heads.iter().map(|h| (*h, 0)).collect();
    let limit = heads.len();
    loop {
        let mut changed = false;
        for rule in rules {
            let mut need = level[&rule.head.predicate];
            for b in &rule.pos_body {
                if let Some(&l) = level.get(&b.predicate) {
                    need = need.max(l);
                }
            }
            for b in &rule.neg_body {
                if let Some(&l) = level.get(&b.predicate) {
                    need = need.max(l + 1);
                }
            }
            if need > level[&rule.head.predicate] {
                if need > limit {
                    return Err(LogicError::NotStratified {
                        cycle: negative_cycle(rules),
                    });
                }
                level.insert(&rule.head.predicate, need);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let depth = level.values().copied().max().map_or(0, |m| m + 1);
    let mut strata = vec![Vec::new(); depth];
    for (i, rule) in rules.iter().enumerate() {
        strata[level[&rule.head.predicate]].push(i);
    }
    Ok(strata)
}

fn components(rules: &[Rule]) -> Vec<(Vec<usize>, bool)> {
    let mut graph: DiGraphMap<&str, ()> = DiGraphMap::new();
    for rule in rules {
        let head: &str = &rule.head.predicate;
        graph.add_node(head);
        for b in rule.pos_body.iter().chain(&rule.neg_body) {
            graph.add_edge(head, &b.predicate, ());
        }
    }
    // Tarjan emits a component only after every component it reaches, which
    // is the order in which bodies must be complete.
    tarjan_scc(&graph)
        .into_iter()
        .filter_map(|scc| {
            let idx: Vec<usize> = (0..rules.len())
                .filter(|&i| scc.contains(&&*rules[i].head.predicate))
                .collect();
            if idx.is_empty() {
                return None;
            }
            let recursive = scc.len() > 1 || graph.contains_edge(scc[0], scc[0]);
            Some((idx, recursive))
        })
        .collect()
}

/// Finds a dependency cycle through a negative edge, as a list of predicates
/// starting and ending at the same one.
fn negative_cycle(rules: &[Rule]) -> Vec<String> {
    let mut edges: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for rule in rules {
        let out = edges.entry(&rule.head.predicate).or_default();
        for b in rule.pos_body.iter().chain(&rule.neg_body) {
            out.insert(&b.predicate);
        }
    }
    for rule in rules {
        let head: &str = &rule.head.predicate;
        for neg in &rule.neg_body {
            // head -> neg, then look for a path neg -> ... -> head
            let start: &str = &neg.predicate;
            let mut parent: BTreeMap<&str, &str> = BTreeMap::new();
            let mut queue = VecDeque::from([start]);
            let mut seen = BTreeSet::from([start]);
            while let Some(node) = queue.pop_front() {
                if node == head {
                    let mut path = vec![head.to_string()];
                    let mut cur = node;
                    let mut back = vec![];
                    while cur != start {
                        back.push(cur);
                        cur = parent[cur];
                    }
                    path.push(format!("not {start}"));
                    path.extend(back.iter().rev().map(|s| s.to_string()));
                    return path;
                }
                for next in edges.get(node).into_iter().flatten() {
                    if seen.insert(next) {
                        parent.insert(next, node);
                        queue.push_back(next);
                    }
                }
            }
        }
    }
    Vec::new()
}

/// A set of ground atoms, ordered for deterministic iteration.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct FactSet {
    facts: BTreeSet<Atom>,
}

impl FactSet {
    pub fn new() -> FactSet {
        FactSet::default()
    }

    pub fn insert(&mut self, atom: Atom) -> Result<bool, LogicError> {
        if !atom.is_ground() {
            return Err(LogicError::NonGroundFact(atom.to_string()));
        }
        Ok(self.facts.insert(atom))
    }

    /// Inserts a ground atom built from constant names.
    pub fn add(&mut self, predicate: &str, args: &[&str]) {
        self.facts.insert(Atom::ground(predicate, args));
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        self.facts.contains(atom)
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Atom> {
        self.facts.iter()
    }

    pub fn constants(&self) -> BTreeSet<Symbol> {
        self.facts
            .iter()
            .flat_map(|a| a.constants().cloned())
            .collect()
    }
}

impl TryFrom<Vec<Atom>> for FactSet {
    type Error = LogicError;

    fn try_from(atoms: Vec<Atom>) -> Result<Self, Self::Error> {
        let mut set = FactSet::new();
        for a in atoms {
            set.insert(a)?;
        }
        Ok(set)
    }
}

impl fmt::Display for FactSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for atom in &self.facts {
            writeln!(f, "{atom}.")?;
        }
        Ok(())
    }
}
