//! From traces to learning examples: quality filtering, CDPI generation and
//! export of one ILASP task per action predicate.
//!
//! The mode bias is a reconstruction: heads come from the action
//! vocabulary, bodies from the feature vocabulary, comparison literals
//! compare a typed variable with a constant of its declared range, and
//! ranking (`#modeo`) atoms describe the weak-constraint search space.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::domains::ActionVocabulary;
use crate::logic::{format_atoms, Cdpi, CdpiKind, GroundAtom, RuleError, Symbol, VariableDomain};
use crate::trace::{Trace, TraceStep};

#[derive(Debug, Error)]
pub enum IlpError {
    #[error("no traces to filter")]
    NoTraces,
    #[error("action `{0}` is not in the action vocabulary")]
    UnknownAction(String),
    #[error("task for `{expected}` received an example for `{found}`")]
    MixedActions { expected: String, found: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Rule(#[from] RuleError),
}

/// Mode declarations restricting the hypothesis space of a task.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ModeBias {
    /// Head declaration per action predicate, e.g. `sample(var(rock))`.
    pub heads: BTreeMap<String, String>,
    /// Body atoms; each may be used positively or under negation.
    pub body: Vec<String>,
    /// Types whose variables may be compared with constants.
    pub comparisons: Vec<String>,
    /// Atoms usable in weak-constraint bodies.
    pub ranked: Vec<String>,
    pub max_body: usize,
}

/// Keeps traces whose discounted return is at least the mean.
pub fn filter_traces(traces: Vec<Trace>) -> Result<Vec<Trace>, IlpError> {
    if traces.is_empty() {
        return Err(IlpError::NoTraces);
    }
    let mean = traces.iter().map(|t| t.discounted_return).sum::<f64>() / traces.len() as f64;
    // A trace equal to the mean may sit a rounding error below it.
    let tol = 1e-9 * (1.0 + mean.abs());
    Ok(traces
        .into_iter()
        .filter(|t| t.discounted_return >= mean - tol)
        .collect())
}

/// CDPIs of one step: the positive example, its ordering partner and a
/// counterexample for every other action predicate. Ids are `<prefix>_pos`,
/// `<prefix>_ord` and `<prefix>_neg_<predicate>`.
pub fn make_cdpis(
    step: &TraceStep,
    vocabulary: &ActionVocabulary,
    prefix: &str,
) -> Result<Vec<Cdpi>, IlpError> {
    let executed = &step.action.predicate;
    let groundings = vocabulary
        .groundings(executed)
        .filter(|g| g.contains(&step.action))
        .ok_or_else(|| IlpError::UnknownAction(step.action.to_string()))?;
    let others: BTreeSet<GroundAtom> = groundings
        .iter()
        .filter(|g| **g != step.action)
        .cloned()
        .collect();
    let ctx = &step.features;

    let pos_id = format!("{prefix}_pos");
    let ord_id = format!("{prefix}_ord");
    let mut out = vec![Cdpi::new(
        pos_id.clone(),
        executed.clone(),
        CdpiKind::Positive,
        BTreeSet::from([step.action.clone()]),
        others.clone(),
        ctx.clone(),
    )?];
    let mut partner = Cdpi::new(
        ord_id.clone(),
        executed.clone(),
        CdpiKind::OrderingPartner,
        others,
        BTreeSet::new(),
        ctx.clone(),
    )?;
    partner.ordering = Some((pos_id, ord_id));
    out.push(partner);
    for (pred, g) in vocabulary.entries() {
        if pred == executed {
            continue;
        }
        out.push(Cdpi::new(
            format!("{prefix}_neg_{pred}"),
            pred.clone(),
            CdpiKind::Counterexample,
            BTreeSet::new(),
            g.iter().cloned().collect(),
            ctx.clone(),
        )?);
    }
    Ok(out)
}

/// All CDPIs of a trace; step ids are `tr<index>_s<t>`.
pub fn trace_cdpis(
    trace: &Trace,
    index: usize,
    vocabulary: &ActionVocabulary,
) -> Result<Vec<Cdpi>, IlpError> {
    let mut out = Vec::new();
    for step in &trace.steps {
        out.extend(make_cdpis(
            step,
            vocabulary,
            &format!("tr{index}_s{}", step.t),
        )?);
    }
    Ok(out)
}

/// CDPIs grouped by the action predicate they inform.
pub fn group_by_action(cdpis: Vec<Cdpi>) -> BTreeMap<Symbol, Vec<Cdpi>> {
    let mut out: BTreeMap<Symbol, Vec<Cdpi>> = BTreeMap::new();
    for c in cdpis {
        out.entry(c.action.clone()).or_default().push(c);
    }
    out
}

fn interp(atoms: &BTreeSet<GroundAtom>) -> String {
    atoms
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

/// Whether an example is written to the task file. Ordering partners of
/// single-grounding actions carry no information and are skipped.
pub fn is_exported(c: &Cdpi) -> bool {
    c.kind != CdpiKind::OrderingPartner || !c.inclusions.is_empty()
}

/// Renders the learning task for `action`.
pub fn export_ilasp(
    action: &Symbol,
    cdpis: &[Cdpi],
    domains: &[VariableDomain],
    bias: &ModeBias,
) -> Result<String, IlpError> {
    if let Some(c) = cdpis.iter().find(|c| &c.action != action) {
        return Err(IlpError::MixedActions {
            expected: action.to_string(),
            found: c.action.to_string(),
        });
    }
    let mut out = String::new();
    let _ = writeln!(out, "% task: {action}");
    let _ = writeln!(out, "% max body literals: {}", bias.max_body);
    out.push('\n');
    for d in domains {
        if d.values.is_empty() {
            continue;
        }
        let values: Vec<String> = d.values.iter().map(ToString::to_string).collect();
        let _ = writeln!(out, "{}({}).", d.name, values.join(";"));
        for v in &d.values {
            let _ = writeln!(out, "#constant({}, {v}).", d.name);
        }
    }
    out.push('\n');
    if let Some(h) = bias.heads.get(action.as_str()) {
        let _ = writeln!(out, "#modeh({h}).");
    }
    for b in &bias.body {
        let _ = writeln!(out, "#modeb(1, {b}).");
    }
    for t in &bias.comparisons {
        for op in [">=", "<="] {
            let _ = writeln!(out, "#modeb(1, var({t}) {op} const({t})).");
        }
    }
    if !bias.ranked.is_empty() {
        for o in &bias.ranked {
            let _ = writeln!(out, "#modeo(1, {o}).");
        }
        let _ = writeln!(
            out,
            "#modeo(1, {}).",
            bias.heads
                .get(action.as_str())
                .map_or(action.as_str(), |h| h)
        );
        let _ = writeln!(out, "#weight(1).");
        let _ = writeln!(out, "#weight(-1).");
        let _ = writeln!(out, "#maxp(2).");
    }
    out.push('\n');
    for c in cdpis.iter().filter(|c| is_exported(c)) {
        let ctx: String = c.context.iter().map(|a| format!("{a}. ")).collect();
        let _ = writeln!(
            out,
            "#pos({}, {{{}}}, {{{}}}, {{{}}}).",
            c.id,
            interp(&c.inclusions),
            interp(&c.exclusions),
            ctx.trim_end()
        );
    }
    for c in cdpis.iter().filter(|c| is_exported(c)) {
        if let Some((better, worse)) = &c.ordering {
            let _ = writeln!(out, "#brave_ordering({}_o, {better}, {worse}).", c.id);
        }
    }
    Ok(out)
}

/// Reads the examples back from an exported task. Kinds are recovered from
/// the file structure: ordering targets are partners, examples without
/// inclusions are counterexamples, the rest are positives.
pub fn read_ilasp(text: &str) -> Result<(Symbol, Vec<Cdpi>), IlpError> {
    let perr = |line: usize, message: String| IlpError::Parse { line, message };
    let mut action = None;
    let mut examples: Vec<(usize, String, [BTreeSet<GroundAtom>; 3])> = Vec::new();
    let mut orderings: BTreeMap<String, String> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix("% task:") {
            action = Some(Symbol::new(rest.trim()));
        } else if let Some(body) = line
            .strip_prefix("#pos(")
            .and_then(|l| l.strip_suffix(")."))
        {
            let (id, rest) = body
                .split_once(',')
                .ok_or_else(|| perr(n, "missing example id".into()))?;
            let mut sets = Vec::new();
            let mut rest = rest.trim();
            for _ in 0..3 {
                let open = rest
                    .strip_prefix('{')
                    .ok_or_else(|| perr(n, "expected `{`".into()))?;
                let close = open
                    .find('}')
                    .ok_or_else(|| perr(n, "unterminated `{`".into()))?;
                let inner = open[..close].replace(['.', ','], " ");
                let atoms = parse_interp(&inner).map_err(|e| perr(n, e.to_string()))?;
                sets.push(atoms);
                rest = open[close + 1..]
                    .trim_start()
                    .trim_start_matches(',')
                    .trim_start();
            }
            let sets: [BTreeSet<GroundAtom>; 3] = sets.try_into().expect("three sets");
            examples.push((n, id.trim().to_string(), sets));
        } else if let Some(body) = line
            .strip_prefix("#brave_ordering(")
            .and_then(|l| l.strip_suffix(")."))
        {
            let parts: Vec<&str> = body.split(',').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(perr(n, "ordering needs an id and two examples".into()));
            }
            orderings.insert(parts[2].to_string(), parts[1].to_string());
        }
    }
    let action = action.ok_or_else(|| perr(1, "missing `% task:` header".into()))?;
    let mut out = Vec::new();
    for (_, id, [inc, exc, ctx]) in examples {
        let preferred = orderings.get(&id).cloned();
        let kind = if preferred.is_some() {
            CdpiKind::OrderingPartner
        } else if inc.is_empty() {
            CdpiKind::Counterexample
        } else {
            CdpiKind::Positive
        };
        let mut c = Cdpi::new(id.clone(), action.clone(), kind, inc, exc, ctx)?;
        c.ordering = preferred.map(|p| (p, id));
        out.push(c);
    }
    Ok((action, out))
}

/// Atoms in an interpretation written as `p(1,2) q r(3)` after separators
/// have been blanked. Commas inside argument lists were blanked too, so
/// arguments are re-joined here.
fn parse_interp(text: &str) -> Result<BTreeSet<GroundAtom>, RuleError> {
    let mut out = BTreeSet::new();
    let mut tokens = text.split_whitespace().peekable();
    while let Some(tok) = tokens.next() {
        let mut atom = tok.to_string();
        if atom.contains('(') {
            while !atom.ends_with(')') {
                match tokens.next() {
                    Some(t) => {
                        atom.push(',');
                        atom.push_str(t);
                    }
                    None => break,
                }
            }
        }
        out.insert(atom.parse()?);
    }
    Ok(out)
}

/// Space-separated atoms, as used in reports.
pub fn describe(c: &Cdpi) -> String {
    format!(
        "{} {:?} inc={{{}}} exc={{{}}}",
        c.id,
        c.kind,
        format_atoms(&c.inclusions),
        format_atoms(&c.exclusions)
    )
}
