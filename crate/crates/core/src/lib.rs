//! POMCP planning guided by learned logic rules.
//!
//! - [`logic`]: parser and evaluator for the rule fragment (stratified
//!   rules, integer guards, negation as failure, weak constraints), rule
//!   distance and example coverage.
//! - [`pomdp`]: simulator interface, particle beliefs, returns.
//! - [`domains`]: rocksample and battery with their feature and action maps.
//! - [`planner`]: POMCP with the rule-derived UCT prior.
//! - [`trace`], [`ilp`]: execution traces and learning-task export.
//! - [`experiment`]: paired benchmark runs and their statistics.

pub mod domains;
pub mod experiment;
pub mod ilp;
pub mod logic;
pub mod planner;
pub mod pomdp;
pub mod trace;

pub use domains::{
    discretize_prob, ActionVocabulary, Battery, BatteryAction, BatteryConfig, BatteryObservation,
    BatteryState, Domain, DomainError, DomainKind, FeatureMap, InstanceConfig, RockAction,
    RockObservation, Rocksample, RocksampleConfig, RocksampleState,
};
pub use experiment::{
    aggregate, random_instance, run_experiment, run_instance, ExperimentSpec, PointSummary,
    ResultRow, SweepParam,
};
pub use ilp::{export_ilasp, filter_traces, make_cdpis, read_ilasp, IlpError, ModeBias};
pub use logic::{
    coverage, covers, evaluate, parse_program, rule_distance, solve, suggested_actions, AnswerSet,
    Cdpi, CdpiKind, FeatureSet, GroundAtom, Program, Rule, RuleError, Symbol,
};
pub use planner::{apply_bias, plan_episode, uct_value, Planner, PlannerConfig, PlannerError};
pub use pomdp::{
    belief_update, discounted_return, EpisodeRng, ParticleBelief, PomdpError, Simulator,
};
pub use trace::{Trace, TraceError, TraceStep};
