//! Bottom-up evaluation of the stratified fragment.
//!
//! Rule bodies are compiled into a sequence of join/filter operations over
//! variable slots. Since no predicate depends on itself, one pass over the
//! derived predicates in dependency order reaches the fixpoint.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::atom::{GroundAtom, Symbol};
use super::program::{Literal, Program, Rule, Term, WeakConstraint, Weight};

#[derive(Clone, Copy, Debug)]
pub(crate) enum Val {
    Slot(usize),
    Const(i64),
}

#[derive(Clone, Copy, Debug)]
enum Arg {
    Bind(usize),
    Check(usize),
    Const(i64),
}

#[derive(Clone, Debug)]
enum Op {
    Match {
        pred: Symbol,
        args: Vec<Arg>,
    },
    Absent {
        pred: Symbol,
        args: Vec<Val>,
    },
    Guard {
        slot: usize,
        low: Option<i64>,
        high: Option<i64>,
    },
}

#[derive(Clone, Debug)]
pub(crate) struct CompiledBody {
    ops: Vec<Op>,
    slots: Vec<Symbol>,
}

impl CompiledBody {
    fn slot(&self, var: &Symbol) -> usize {
        self.slots
            .iter()
            .position(|s| s == var)
            .expect("safe programs bind every variable")
    }

    fn val(&self, t: &Term) -> Val {
        match t {
            Term::Var(v) => Val::Slot(self.slot(v)),
            Term::Int(i) => Val::Const(*i),
        }
    }
}

/// Compiles a (safe) body: positive atoms in written order, each negation or
/// guard scheduled right after its last variable becomes bound.
pub(crate) fn compile_body(body: &[Literal]) -> CompiledBody {
    let mut slots: Vec<Symbol> = Vec::new();
    let mut ops = Vec::new();
    let mut pending: Vec<&Literal> = body
        .iter()
        .filter(|l| !matches!(l, Literal::Pos(_)))
        .collect();

    let ready = |lit: &Literal, slots: &[Symbol]| match lit {
        Literal::Neg(a) => a.vars().all(|v| slots.contains(v)),
        Literal::Guard(g) => slots.contains(g.var()),
        Literal::Pos(_) => false,
    };
    let flush = |slots: &[Symbol], ops: &mut Vec<Op>, pending: &mut Vec<&Literal>| {
        pending.retain(|lit| {
            if !ready(lit, slots) {
                return true;
            }
            let slot_of = |v: &Symbol| slots.iter().position(|s| s == v).unwrap();
            ops.push(match lit {
                Literal::Neg(a) => Op::Absent {
                    pred: a.predicate.clone(),
                    args: a
                        .terms
                        .iter()
                        .map(|t| match t {
                            Term::Var(v) => Val::Slot(slot_of(v)),
                            Term::Int(i) => Val::Const(*i),
                        })
                        .collect(),
                },
                Literal::Guard(g) => {
                    let (low, high) = g.bounds();
                    Op::Guard {
                        slot: slot_of(g.var()),
                        low,
                        high,
                    }
                }
                Literal::Pos(_) => unreachable!(),
            });
            false
        });
    };

    flush(&slots, &mut ops, &mut pending);
    for lit in body {
        let Literal::Pos(atom) = lit else { continue };
        let args = atom
            .terms
            .iter()
            .map(|t| match t {
                Term::Int(i) => Arg::Const(*i),
                Term::Var(v) => match slots.iter().position(|s| s == v) {
                    Some(s) => Arg::Check(s),
                    None => {
                        slots.push(v.clone());
                        Arg::Bind(slots.len() - 1)
                    }
                },
            })
            .collect();
        ops.push(Op::Match {
            pred: atom.predicate.clone(),
            args,
        });
        flush(&slots, &mut ops, &mut pending);
    }
    debug_assert!(pending.is_empty(), "unsafe body reached compilation");
    CompiledBody { ops, slots }
}

#[derive(Clone, Debug)]
pub(crate) struct CompiledRule {
    head: Vec<Val>,
    body: CompiledBody,
}

impl CompiledRule {
    pub(crate) fn new(rule: &Rule, body: CompiledBody) -> Self {
        let head = rule.head.terms.iter().map(|t| body.val(t)).collect();
        CompiledRule { head, body }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct CompiledWeak {
    body: CompiledBody,
    /// Arguments of the constrained (choice) atom.
    choice: Vec<Val>,
    weight: (Val, bool),
    level: i64,
    terms: Vec<Val>,
}

impl CompiledWeak {
    pub(crate) fn new(wc: &WeakConstraint, body: CompiledBody, choice_literal: usize) -> Self {
        let Literal::Pos(choice_atom) = &wc.body[choice_literal] else {
            unreachable!("choice literal is positive")
        };
        let choice = choice_atom.terms.iter().map(|t| body.val(t)).collect();
        let weight = match &wc.weight {
            Weight::Const(c) => (Val::Const(*c), false),
            Weight::Var { var, negated } => (Val::Slot(body.slot(var)), *negated),
        };
        let terms = wc.terms.iter().map(|t| body.val(t)).collect();
        CompiledWeak {
            body,
            choice,
            weight,
            level: wc.level,
            terms,
        }
    }
}

type Tuples = BTreeSet<Vec<i64>>;

/// Working interpretation indexed by predicate.
#[derive(Clone, Debug, Default)]
struct Interp {
    atoms: HashMap<Symbol, Tuples>,
}

impl Interp {
    fn from_atoms<'a>(facts: impl IntoIterator<Item = &'a GroundAtom>) -> Self {
        let mut atoms: HashMap<Symbol, Tuples> = HashMap::new();
        for a in facts {
            atoms
                .entry(a.predicate.clone())
                .or_default()
                .insert(a.args.clone());
        }
        Interp { atoms }
    }

    fn contains(&self, pred: &Symbol, args: &[i64]) -> bool {
        self.atoms.get(pred).is_some_and(|t| t.contains(args))
    }
}

fn resolve(v: Val, slots: &[i64]) -> i64 {
    match v {
        Val::Slot(s) => slots[s],
        Val::Const(c) => c,
    }
}

fn for_each_match(ops: &[Op], interp: &Interp, slots: &mut [i64], emit: &mut dyn FnMut(&[i64])) {
    let Some((op, rest)) = ops.split_first() else {
        emit(slots);
        return;
    };
    match op {
        Op::Match { pred, args } => {
            let Some(tuples) = interp.atoms.get(pred) else {
                return;
            };
            'tuples: for tuple in tuples {
                if tuple.len() != args.len() {
                    continue;
                }
                for (arg, &value) in args.iter().zip(tuple) {
                    match *arg {
                        Arg::Bind(s) => slots[s] = value,
                        Arg::Check(s) if slots[s] != value => continue 'tuples,
                        Arg::Const(c) if c != value => continue 'tuples,
                        _ => {}
                    }
                }
                for_each_match(rest, interp, slots, emit);
            }
        }
        Op::Absent { pred, args } => {
            let tuple: Vec<i64> = args.iter().map(|&v| resolve(v, slots)).collect();
            if !interp.contains(pred, &tuple) {
                for_each_match(rest, interp, slots, emit);
            }
        }
        Op::Guard { slot, low, high } => {
            let v = slots[*slot];
            if low.is_none_or(|l| v >= l) && high.is_none_or(|h| v <= h) {
                for_each_match(rest, interp, slots, emit);
            }
        }
    }
}

fn fire(rule: &CompiledRule, interp: &Interp) -> Vec<Vec<i64>> {
    let mut slots = vec![0; rule.body.slots.len()];
    let mut out = Vec::new();
    for_each_match(&rule.body.ops, interp, &mut slots, &mut |s| {
        out.push(rule.head.iter().map(|&v| resolve(v, s)).collect());
    });
    out
}

/// Per-level cost; compared from the highest level down.
type Cost = BTreeMap<i64, i64>;

fn compare_costs(a: &Cost, b: &Cost) -> Ordering {
    let levels: BTreeSet<i64> = a.keys().chain(b.keys()).copied().collect();
    for level in levels.into_iter().rev() {
        let x = a.get(&level).copied().unwrap_or(0);
        let y = b.get(&level).copied().unwrap_or(0);
        match x.cmp(&y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// `(level, weight, terms)` of one weak-constraint violation.
type Violation = (i64, i64, Vec<i64>);

/// Groundings of `choice` with minimal weak-constraint cost.
fn preferred(program: &Program, interp: &Interp, choice: &Symbol) -> Tuples {
    let candidates = interp.atoms.get(choice).cloned().unwrap_or_default();
    let Some(wcs) = program.preferences.get(choice) else {
        return candidates;
    };
    if candidates.len() <= 1 {
        return candidates;
    }
    // Violations are identified by their [w@l, terms] tuple, per candidate.
    let mut violations: HashMap<Vec<i64>, BTreeSet<Violation>> = HashMap::new();
    for &i in wcs {
        let wc = &program.compiled_weak[i];
        let mut slots = vec![0; wc.body.slots.len()];
        for_each_match(&wc.body.ops, interp, &mut slots, &mut |s| {
            let cand: Vec<i64> = wc.choice.iter().map(|&v| resolve(v, s)).collect();
            let w = resolve(wc.weight.0, s);
            let w = if wc.weight.1 { -w } else { w };
            let terms = wc.terms.iter().map(|&v| resolve(v, s)).collect();
            violations
                .entry(cand)
                .or_default()
                .insert((wc.level, w, terms));
        });
    }
    let costs: Vec<(Vec<i64>, Cost)> = candidates
        .into_iter()
        .map(|c| {
            let mut cost = Cost::new();
            if let Some(vs) = violations.get(&c) {
                for (level, w, _) in vs {
                    *cost.entry(*level).or_insert(0) += w;
                }
            }
            (c, cost)
        })
        .collect();
    let best = costs
        .iter()
        .map(|(_, c)| c)
        .min_by(|a, b| compare_costs(a, b))
        .cloned()
        .unwrap_or_default();
    costs
        .into_iter()
        .filter(|(_, c)| compare_costs(c, &best) == Ordering::Equal)
        .map(|(t, _)| t)
        .collect()
}

fn run(program: &Program, facts: Interp, apply_preferences: bool) -> AnswerSet {
    let mut interp = facts;
    for (pred, rule_ids) in &program.strata {
        let mut derived = Vec::new();
        for &r in rule_ids {
            derived.extend(fire(&program.compiled_rules[r], &interp));
        }
        if !derived.is_empty() {
            interp
                .atoms
                .entry(pred.clone())
                .or_default()
                .extend(derived);
        }
        if apply_preferences && program.preferences.contains_key(pred) {
            let keep = preferred(program, &interp, pred);
            if let Some(t) = interp.atoms.get_mut(pred) {
                *t = keep;
            }
        }
    }
    AnswerSet::from_interp(interp)
}

/// Stratified forward chaining: facts plus everything the rules derive.
///
/// Weak constraints play no part here; see [`solve`].
pub fn evaluate<'a>(
    program: &Program,
    facts: impl IntoIterator<Item = &'a GroundAtom>,
) -> AnswerSet {
    run(program, Interp::from_atoms(facts), false)
}

/// Like [`evaluate`], but each constrained predicate's groundings are
/// replaced by its preferred ones as soon as that predicate is complete, so
/// downstream rules only see the preferred groundings.
pub fn solve<'a>(program: &Program, facts: impl IntoIterator<Item = &'a GroundAtom>) -> AnswerSet {
    run(program, Interp::from_atoms(facts), true)
}

/// Groundings of `choice_predicate` in `answer` that minimize the weak
/// constraint cost vector, comparing higher levels first. Ties keep every
/// minimizer; without constraints on the predicate every grounding is kept.
pub fn prefer(
    program: &Program,
    answer: &AnswerSet,
    choice_predicate: &Symbol,
) -> BTreeSet<GroundAtom> {
    let interp = answer.to_interp();
    preferred(program, &interp, choice_predicate)
        .into_iter()
        .map(|args| GroundAtom {
            predicate: choice_predicate.clone(),
            args,
        })
        .collect()
}

/// Action atoms the program suggests for the given features.
pub fn suggested_actions<'a>(
    program: &Program,
    facts: impl IntoIterator<Item = &'a GroundAtom>,
    action_predicates: &BTreeSet<Symbol>,
) -> BTreeSet<GroundAtom> {
    let answer = solve(program, facts);
    answer
        .iter()
        .filter(|a| action_predicates.contains(&a.predicate))
        .collect()
}

/// The unique answer set of a stratified program over some facts.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AnswerSet {
    atoms: BTreeMap<Symbol, Tuples>,
}

impl AnswerSet {
    fn from_interp(interp: Interp) -> Self {
        AnswerSet {
            atoms: interp
                .atoms
                .into_iter()
                .filter(|(_, t)| !t.is_empty())
                .collect(),
        }
    }

    pub fn contains(&self, atom: &GroundAtom) -> bool {
        self.atoms
            .get(&atom.predicate)
            .is_some_and(|t| t.contains(&atom.args))
    }

    pub fn iter(&self) -> impl Iterator<Item = GroundAtom> + '_ {
        self.atoms.iter().flat_map(|(p, ts)| {
            ts.iter().map(move |t| GroundAtom {
                predicate: p.clone(),
                args: t.clone(),
            })
        })
    }

    pub fn with_predicate<'a>(
        &'a self,
        predicate: &'a Symbol,
    ) -> impl Iterator<Item = GroundAtom> + 'a {
        self.atoms.get(predicate).into_iter().flat_map(move |ts| {
            ts.iter().map(move |t| GroundAtom {
                predicate: predicate.clone(),
                args: t.clone(),
            })
        })
    }

    pub fn len(&self) -> usize {
        self.atoms.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_set(&self) -> BTreeSet<GroundAtom> {
        self.iter().collect()
    }

    fn to_interp(&self) -> Interp {
        Interp {
            atoms: self.atoms.clone().into_iter().collect(),
        }
    }

    /// Index of a rule whose body holds in this answer set and whose head
    /// instance is `atom`, if any.
    pub fn support(&self, program: &Program, atom: &GroundAtom) -> Option<usize> {
        let interp = self.to_interp();
        program
            .strata
            .iter()
            .filter(|(p, _)| *p == atom.predicate)
            .flat_map(|(_, ids)| ids.iter().copied())
            .find(|&r| fire(&program.compiled_rules[r], &interp).contains(&atom.args))
    }
}
