//! Logic layer: a lite evaluator for non-recursive stratified rules with
//! integer guards, negation-as-failure and weak constraints, plus the
//! example/coverage machinery used to compare rules against traces.

mod atom;
mod cdpi;
mod distance;
mod eval;
mod parse;
mod program;

use thiserror::Error;

pub use atom::{format_atoms, parse_facts, FeatureSet, GroundAtom, Symbol};
pub use cdpi::{coverage, covers, Cdpi, CdpiKind};
pub use distance::rule_distance;
pub use eval::{evaluate, prefer, solve, suggested_actions, AnswerSet};
pub use parse::{parse_program, parse_rule};
pub use program::{
    AtomPattern, Cmp, Guard, Literal, Program, Rule, Term, VariableDomain, WeakConstraint, Weight,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuleError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsafe statement `{statement}`: variable {variable} is not bound by a positive atom")]
    Unsafe { statement: String, variable: String },
    #[error("predicate `{predicate}` depends on itself")]
    Recursive { predicate: String },
    #[error("predicate `{predicate}` used with arity {found}, expected {expected}")]
    Arity {
        predicate: String,
        expected: usize,
        found: usize,
    },
    #[error("invalid example {id}: {reason}")]
    InvalidExample { id: String, reason: String },
}

/// Rule sets learned for the two benchmark domains.
pub mod shipped {
    use super::{parse_program, Program};

    pub const ROCKSAMPLE: &str = include_str!("../../rules/rocksample.lp");
    pub const BATTERY: &str = include_str!("../../rules/battery.lp");

    pub fn rocksample() -> Program {
        parse_program(ROCKSAMPLE).expect("shipped rocksample rules parse")
    }

    pub fn battery() -> Program {
        parse_program(BATTERY).expect("shipped battery rules parse")
    }
}
