//! A small engine for the normal-rule fragment used to write partial policies.
//!
//! Programs are sets of non-disjunctive rules `h :- b1, ..., bn, not c1, ...`
//! over a finite set of constants. Negation is negation-as-failure and must be
//! stratified, so every program has exactly one model; [`Program::entailed_actions`]
//! computes it bottom-up, stratum by stratum.

mod eval;
mod ground;
mod parser;
mod syntax;

pub use eval::EvalStats;
pub use ground::{ground_rule, precompute_groundings, t_asp_bound, GroundProgram};
pub use parser::{parse_atom, parse_program};
pub use syntax::{Atom, FactSet, Program, Rule, Symbol, Term};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogicError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsafe rule `{rule}`: variable {variable} does not occur in a positive body literal")]
    UnsafeRule { rule: String, variable: String },
    #[error("program is not stratified: negative dependency cycle {}", cycle.join(" -> "))]
    NotStratified { cycle: Vec<String> },
    #[error("predicate {predicate} used with arity {found}, previously {expected}")]
    ArityMismatch {
        predicate: String,
        expected: usize,
        found: usize,
    },
    #[error("fact `{0}` is not ground")]
    NonGroundFact(String),
    #[error("constant {constant} is not in the grounding domain")]
    DomainCoverage { constant: String },
}
