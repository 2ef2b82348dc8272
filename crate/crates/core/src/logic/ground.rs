use std::collections::{BTreeSet, HashMap, HashSet};

use super::eval::EvalStats;
use super::syntax::{Atom, FactSet, Program, Rule, Symbol};
use super::LogicError;

/// Every instance of `rule` obtained by substituting its variables with
/// constants from `domain`: N^v rules for v variables over N constants,
/// enumerated in lexicographic order of the (sorted) domain.
pub fn ground_rule(rule: &Rule, domain: &BTreeSet<Symbol>) -> Vec<Rule> {
    let vars = rule.variables();
    if vars.is_empty() {
        return vec![rule.clone()];
    }
    let constants: Vec<&Symbol> = domain.iter().collect();
    if constants.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(constants.len().pow(vars.len() as u32));
    let mut digits = vec![0usize; vars.len()];
    loop {
        let subst: HashMap<Symbol, Symbol> = vars
            .iter()
            .zip(&digits)
            .map(|(v, &d)| (v.clone(), constants[d].clone()))
            .collect();
        out.push(Rule::new(
            rule.head.substitute(&subst),
            rule.pos_body.iter().map(|a| a.substitute(&subst)).collect(),
            rule.neg_body.iter().map(|a| a.substitute(&subst)).collect(),
        ));
        // odometer increment, last variable fastest
        let mut i = vars.len();
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < constants.len() {
                break;
            }
            digits[i] = 0;
        }
    }
}

/// Upper bound on verification work: sum over rules of |ground instances| × |body|.
pub fn t_asp_bound(program: &Program, domain_size: usize) -> u64 {
    program
        .rules()
        .iter()
        .map(|r| (domain_size as u64).pow(r.variables().len() as u32) * r.body_len() as u64)
        .sum()
}

/// A program grounded ahead of time over a fixed constant domain.
#[derive(Debug, Clone)]
pub struct GroundProgram {
    rules: Vec<Rule>,
    /// Ground-rule indices per stratum, aligned with the source program's strata.
    strata: Vec<Vec<usize>>,
    domain: BTreeSet<Symbol>,
    heads: BTreeSet<Symbol>,
}

/// Grounds every rule of `program` over `domain ∪ program constants`.
pub fn precompute_groundings(program: &Program, domain: &BTreeSet<Symbol>) -> GroundProgram {
    let mut full = domain.clone();
    full.extend(program.constants().iter().cloned());
    let mut rules = Vec::new();
    let mut strata = Vec::new();
    for stratum in program.strata() {
        let mut idx = Vec::new();
        for &ri in stratum {
            for g in ground_rule(&program.rules()[ri], &full) {
                idx.push(rules.len());
                rules.push(g);
            }
        }
        strata.push(idx);
    }
    GroundProgram {
        rules,
        strata,
        domain: full,
        heads: program.head_predicates().clone(),
    }
}

impl GroundProgram {
    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn domain(&self) -> &BTreeSet<Symbol> {
        &self.domain
    }

    /// Same contract as [`Program::entailed_actions`]; fails if `facts`
    /// mention a constant outside the grounding domain.
    pub fn entailed_actions(&self, facts: &FactSet) -> Result<BTreeSet<Atom>, LogicError> {
        self.entailed_with_stats(facts).map(|(atoms, _)| atoms)
    }

    pub fn entailed_with_stats(&self, facts: &FactSet) -> Result<(BTreeSet<Atom>, EvalStats), LogicError> {
        if let Some(c) = facts.iter().flat_map(Atom::constants).find(|c| !self.domain.contains(*c)) {
            return Err(LogicError::DomainCoverage {
                constant: c.to_string(),
            });
        }
        let mut model: HashSet<Atom> = facts.iter().cloned().collect();
        let mut stats = EvalStats::default();
        for stratum in &self.strata {
            loop {
                stats.passes += 1;
                let mut changed = false;
                for &ri in stratum {
                    let rule = &self.rules[ri];
                    if model.contains(&rule.head) {
                        continue;
                    }
                    stats.ground_instances += 1;
                    let mut holds = true;
                    for a in &rule.pos_body {
                        stats.literals_examined += 1;
                        if !model.contains(a) {
                            holds = false;
                            break;
                        }
                    }
                    if holds {
                        for a in &rule.neg_body {
                            stats.literals_examined += 1;
                            if model.contains(a) {
                                holds = false;
                                break;
                            }
                        }
                    }
                    if holds {
                        model.insert(rule.head.clone());
                        changed = true;
                    }
                }
                if !changed {
                    break;
                }
            }
        }
        let result = model
            .into_iter()
            .filter(|a| self.heads.contains(&a.predicate))
            .collect();
        Ok((result, stats))
    }
}
