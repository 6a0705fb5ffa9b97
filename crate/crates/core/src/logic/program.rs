use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use super::atom::Symbol;
use super::eval::{compile_body, CompiledRule, CompiledWeak};
use super::RuleError;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(Symbol),
    Int(i64),
}

impl Term {
    pub fn var(name: &str) -> Self {
        Term::Var(Symbol::new(name))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Int(i) => write!(f, "{i}"),
        }
    }
}

/// Atom with possibly non-ground arguments.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomPattern {
    pub predicate: Symbol,
    pub terms: Vec<Term>,
}

impl AtomPattern {
    pub fn new(predicate: &str, terms: Vec<Term>) -> Self {
        AtomPattern {
            predicate: Symbol::new(predicate),
            terms,
        }
    }

    pub fn vars(&self) -> impl Iterator<Item = &Symbol> {
        self.terms.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v),
            Term::Int(_) => None,
        })
    }
}

impl fmt::Display for AtomPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.predicate)?;
        if !self.terms.is_empty() {
            write!(f, "(")?;
            for (i, t) in self.terms.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{t}")?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cmp {
    Ge,
    Le,
    Gt,
    Lt,
    Eq,
}

impl Cmp {
    /// The comparison seen from the other side: `c < V` is `V > c`.
    pub fn flipped(self) -> Self {
        match self {
            Cmp::Ge => Cmp::Le,
            Cmp::Le => Cmp::Ge,
            Cmp::Gt => Cmp::Lt,
            Cmp::Lt => Cmp::Gt,
            Cmp::Eq => Cmp::Eq,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Cmp::Ge => ">=",
            Cmp::Le => "<=",
            Cmp::Gt => ">",
            Cmp::Lt => "<",
            Cmp::Eq => "=",
        }
    }
}

/// Integer comparison over a single variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Guard {
    /// `V op c`
    Compare { var: Symbol, op: Cmp, value: i64 },
    /// `low <= V <= high`
    Between { var: Symbol, low: i64, high: i64 },
}

impl Guard {
    pub fn var(&self) -> &Symbol {
        match self {
            Guard::Compare { var, .. } | Guard::Between { var, .. } => var,
        }
    }

    /// Inclusive interval bounds over the integers.
    pub fn bounds(&self) -> (Option<i64>, Option<i64>) {
        match *self {
            Guard::Compare { op, value, .. } => match op {
                Cmp::Ge => (Some(value), None),
                Cmp::Gt => (Some(value.saturating_add(1)), None),
                Cmp::Le => (None, Some(value)),
                Cmp::Lt => (None, Some(value.saturating_sub(1))),
                Cmp::Eq => (Some(value), Some(value)),
            },
            Guard::Between { low, high, .. } => (Some(low), Some(high)),
        }
    }

    pub fn holds(&self, v: i64) -> bool {
        let (lo, hi) = self.bounds();
        lo.is_none_or(|lo| v >= lo) && hi.is_none_or(|hi| v <= hi)
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Guard::Compare { var, op, value } => write!(f, "{var} {} {value}", op.symbol()),
            Guard::Between { var, low, high } => write!(f, "{low} <= {var} <= {high}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Literal {
    Pos(AtomPattern),
    Neg(AtomPattern),
    Guard(Guard),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Pos(a) => write!(f, "{a}"),
            Literal::Neg(a) => write!(f, "not {a}"),
            Literal::Guard(g) => write!(f, "{g}"),
        }
    }
}

fn write_body(f: &mut fmt::Formatter<'_>, body: &[Literal]) -> fmt::Result {
    for (i, l) in body.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{l}")?;
    }
    Ok(())
}

/// Causal rule `head :- body.`; an empty body makes it a fact.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Rule {
    pub head: AtomPattern,
    pub body: Vec<Literal>,
}

impl Rule {
    pub fn positive_atoms(&self) -> impl Iterator<Item = &AtomPattern> {
        self.body.iter().filter_map(|l| match l {
            Literal::Pos(a) => Some(a),
            _ => None,
        })
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if !self.body.is_empty() {
            write!(f, " :- ")?;
            write_body(f, &self.body)?;
        }
        write!(f, ".")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Weight {
    Const(i64),
    /// A body variable, optionally negated (`-V`).
    Var {
        var: Symbol,
        negated: bool,
    },
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::Const(c) => write!(f, "{c}"),
            Weight::Var { var, negated: true } => write!(f, "-{var}"),
            Weight::Var {
                var,
                negated: false,
            } => write!(f, "{var}"),
        }
    }
}

/// `:~ body. [weight@level, terms...]`
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WeakConstraint {
    pub body: Vec<Literal>,
    pub weight: Weight,
    pub level: i64,
    pub terms: Vec<Term>,
}

impl fmt::Display for WeakConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, ":~ ")?;
        write_body(f, &self.body)?;
        write!(f, ". [{}@{}", self.weight, self.level)?;
        for t in &self.terms {
            write!(f, ", {t}")?;
        }
        write!(f, "]")
    }
}

/// Declared integer range of a variable type (background knowledge).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VariableDomain {
    pub name: String,
    pub values: Vec<i64>,
}

impl VariableDomain {
    pub fn range(name: &str, low: i64, high: i64, step: i64) -> Self {
        let step = step.max(1);
        VariableDomain {
            name: name.to_string(),
            values: (low..=high).step_by(step as usize).collect(),
        }
    }
}

/// A validated, non-recursive stratified program.
///
/// Construction checks rule safety and rejects any predicate that depends on
/// itself; the evaluation order of derived predicates is fixed here.
#[derive(Clone, Debug)]
pub struct Program {
    rules: Vec<Rule>,
    weak_constraints: Vec<WeakConstraint>,
    variable_domains: Vec<VariableDomain>,
    pub(crate) compiled_rules: Vec<CompiledRule>,
    pub(crate) compiled_weak: Vec<CompiledWeak>,
    /// Derived predicates in dependency order, each with its rule indices.
    pub(crate) strata: Vec<(Symbol, Vec<usize>)>,
    /// Choice predicate -> weak constraints ranking its groundings.
    pub(crate) preferences: BTreeMap<Symbol, Vec<usize>>,
}

impl PartialEq for Program {
    fn eq(&self, other: &Self) -> bool {
        self.rules == other.rules
            && self.weak_constraints == other.weak_constraints
            && self.variable_domains == other.variable_domains
    }
}

impl Eq for Program {}

impl Default for Program {
    fn default() -> Self {
        Program::new(Vec::new(), Vec::new()).expect("empty program is valid")
    }
}

impl Program {
    pub fn new(rules: Vec<Rule>, weak_constraints: Vec<WeakConstraint>) -> Result<Self, RuleError> {
        for rule in &rules {
            check_rule_safety(rule)?;
        }
        for wc in &weak_constraints {
            check_weak_safety(wc)?;
        }
        check_arities(&rules, &weak_constraints)?;
        let strata = stratify(&rules)?;

        let compiled_rules = rules
            .iter()
            .map(|r| {
                let body = compile_body(&r.body);
                CompiledRule::new(r, body)
            })
            .collect();

        let position: HashMap<&Symbol, usize> = strata
            .iter()
            .enumerate()
            .map(|(i, (p, _))| (p, i))
            .collect();
        let mut preferences: BTreeMap<Symbol, Vec<usize>> = BTreeMap::new();
        let mut compiled_weak = Vec::with_capacity(weak_constraints.len());
        for (i, wc) in weak_constraints.iter().enumerate() {
            // The constrained predicate is the last-derived positive body atom;
            // for fact-only bodies the first positive atom.
            let positives: Vec<(usize, &AtomPattern)> = wc
                .body
                .iter()
                .enumerate()
                .filter_map(|(j, l)| match l {
                    Literal::Pos(a) => Some((j, a)),
                    _ => None,
                })
                .collect();
            let choice = positives
                .iter()
                .filter(|(_, a)| position.contains_key(&a.predicate))
                .max_by_key(|(_, a)| position[&a.predicate])
                .or_else(|| positives.first())
                .map(|(j, _)| *j)
                .expect("safety check guarantees a positive atom");
            let choice_pred = match &wc.body[choice] {
                Literal::Pos(a) => a.predicate.clone(),
                _ => unreachable!(),
            };
            compiled_weak.push(CompiledWeak::new(wc, compile_body(&wc.body), choice));
            preferences.entry(choice_pred).or_default().push(i);
        }

        Ok(Program {
            rules,
            weak_constraints,
            variable_domains: Vec::new(),
            compiled_rules,
            compiled_weak,
            strata,
            preferences,
        })
    }

    pub fn with_variable_domains(mut self, domains: Vec<VariableDomain>) -> Self {
        self.variable_domains = domains;
        self
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn weak_constraints(&self) -> &[WeakConstraint] {
        &self.weak_constraints
    }

    pub fn variable_domains(&self) -> &[VariableDomain] {
        &self.variable_domains
    }

    /// Predicates appearing in some rule head.
    pub fn head_predicates(&self) -> BTreeSet<Symbol> {
        self.rules
            .iter()
            .map(|r| r.head.predicate.clone())
            .collect()
    }

    /// Predicates whose groundings are ranked by weak constraints.
    pub fn choice_predicates(&self) -> impl Iterator<Item = &Symbol> {
        self.preferences.keys()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty() && self.weak_constraints.is_empty()
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        for wc in &self.weak_constraints {
            writeln!(f, "{wc}")?;
        }
        Ok(())
    }
}

fn positive_vars(body: &[Literal]) -> BTreeSet<&Symbol> {
    body.iter()
        .filter_map(|l| match l {
            Literal::Pos(a) => Some(a.vars()),
            _ => None,
        })
        .flatten()
        .collect()
}

fn check_body_safety<'a>(
    body: &'a [Literal],
    bound: &BTreeSet<&'a Symbol>,
    what: &dyn Fn() -> String,
) -> Result<(), RuleError> {
    for lit in body {
        let unbound = match lit {
            Literal::Pos(_) => None,
            Literal::Neg(a) => a.vars().find(|v| !bound.contains(v)),
            Literal::Guard(g) => Some(g.var()).filter(|v| !bound.contains(v)),
        };
        if let Some(v) = unbound {
            return Err(RuleError::Unsafe {
                statement: what(),
                variable: v.to_string(),
            });
        }
    }
    Ok(())
}

fn check_rule_safety(rule: &Rule) -> Result<(), RuleError> {
    let bound = positive_vars(&rule.body);
    let what = || rule.to_string();
    if let Some(v) = rule.head.vars().find(|v| !bound.contains(v)) {
        return Err(RuleError::Unsafe {
            statement: what(),
            variable: v.to_string(),
        });
    }
    check_body_safety(&rule.body, &bound, &what)
}

fn check_weak_safety(wc: &WeakConstraint) -> Result<(), RuleError> {
    let bound = positive_vars(&wc.body);
    let what = || wc.to_string();
    if bound.is_empty() && !wc.body.iter().any(|l| matches!(l, Literal::Pos(_))) {
        return Err(RuleError::Unsafe {
            statement: what(),
            variable: "(no positive atom)".into(),
        });
    }
    let mut vars: Vec<&Symbol> = wc
        .terms
        .iter()
        .filter_map(|t| match t {
            Term::Var(v) => Some(v),
            Term::Int(_) => None,
        })
        .collect();
    if let Weight::Var { var, .. } = &wc.weight {
        vars.push(var);
    }
    if let Some(v) = vars.into_iter().find(|v| !bound.contains(v)) {
        return Err(RuleError::Unsafe {
            statement: what(),
            variable: v.to_string(),
        });
    }
    check_body_safety(&wc.body, &bound, &what)
}

fn check_arities(rules: &[Rule], wcs: &[WeakConstraint]) -> Result<(), RuleError> {
    let mut seen: HashMap<&Symbol, usize> = HashMap::new();
    let atoms = rules
        .iter()
        .flat_map(|r| std::iter::once(&r.head).chain(body_atoms(&r.body)))
        .chain(wcs.iter().flat_map(|w| body_atoms(&w.body)));
    for a in atoms {
        match seen.get(&a.predicate) {
            Some(&n) if n != a.terms.len() => {
                return Err(RuleError::Arity {
                    predicate: a.predicate.to_string(),
                    expected: n,
                    found: a.terms.len(),
                })
            }
            Some(_) => {}
            None => {
                seen.insert(&a.predicate, a.terms.len());
            }
        }
    }
    Ok(())
}

fn body_atoms(body: &[Literal]) -> impl Iterator<Item = &AtomPattern> {
    body.iter().filter_map(|l| match l {
        Literal::Pos(a) | Literal::Neg(a) => Some(a),
        Literal::Guard(_) => None,
    })
}

/// Orders derived predicates so that every rule only reads predicates that
/// are complete before its head is evaluated.
fn stratify(rules: &[Rule]) -> Result<Vec<(Symbol, Vec<usize>)>, RuleError> {
    let mut by_head: BTreeMap<Symbol, Vec<usize>> = BTreeMap::new();
    for (i, r) in rules.iter().enumerate() {
        by_head.entry(r.head.predicate.clone()).or_default().push(i);
    }
    // deps[p] = derived predicates p's rules read
    let deps: BTreeMap<&Symbol, BTreeSet<&Symbol>> = by_head
        .iter()
        .map(|(p, idx)| {
            let ds = idx
                .iter()
                .flat_map(|&i| body_atoms(&rules[i].body))
                .map(|a| &a.predicate)
                .filter(|q| by_head.contains_key(*q))
                .collect();
            (p, ds)
        })
        .collect();

    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    fn visit<'a>(
        p: &'a Symbol,
        deps: &BTreeMap<&'a Symbol, BTreeSet<&'a Symbol>>,
        marks: &mut HashMap<&'a Symbol, Mark>,
        out: &mut Vec<&'a Symbol>,
    ) -> Result<(), RuleError> {
        match marks.get(p) {
            Some(Mark::Done) => return Ok(()),
            Some(Mark::Active) => {
                return Err(RuleError::Recursive {
                    predicate: p.to_string(),
                })
            }
            None => {}
        }
        marks.insert(p, Mark::Active);
        for q in &deps[p] {
            visit(q, deps, marks, out)?;
        }
        marks.insert(p, Mark::Done);
        out.push(p);
        Ok(())
    }

    let mut marks = HashMap::new();
    let mut order = Vec::new();
    for p in deps.keys() {
        visit(p, &deps, &mut marks, &mut order)?;
    }
    Ok(order
        .into_iter()
        .map(|p| (p.clone(), by_head[p].clone()))
        .collect())
}
