//! Syntactic distance between two rules.
//!
//! Each rule is viewed as a set of items: its head, its positive and negated
//! body atoms, and one item per guard bound. Variables are renamed
//! canonically (after the first predicate/position that binds them) so that
//! `dist(R,V)` and `dist(R,D)` compare equal. A bound is keyed by its
//! variable and direction; the same key with different values is one item in
//! the union but absent from the intersection.

use std::collections::{BTreeMap, HashMap};

use super::atom::Symbol;
use super::program::{AtomPattern, Literal, Rule, Term};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Key {
    Head(String),
    Pos(String),
    Neg(String),
    Lower(String),
    Upper(String),
}

fn canonical_names(rule: &Rule) -> HashMap<Symbol, String> {
    let mut positives: Vec<&AtomPattern> = rule.positive_atoms().collect();
    // Order-independent: sort by predicate and constant pattern.
    positives.sort_by_key(|a| {
        let shape: Vec<Option<i64>> = a
            .terms
            .iter()
            .map(|t| match t {
                Term::Int(i) => Some(*i),
                Term::Var(_) => None,
            })
            .collect();
        (a.predicate.clone(), shape)
    });
    let mut names = HashMap::new();
    let mut used: HashMap<String, usize> = HashMap::new();
    for atom in std::iter::once(&rule.head).chain(positives) {
        for (i, t) in atom.terms.iter().enumerate() {
            if let Term::Var(v) = t {
                if names.contains_key(v) {
                    continue;
                }
                let base = format!("{}#{}", atom.predicate, i);
                let n = used.entry(base.clone()).or_insert(0);
                let name = if *n == 0 { base } else { format!("{base}'{n}") };
                *n += 1;
                names.insert(v.clone(), name);
            }
        }
    }
    names
}

fn render(atom: &AtomPattern, names: &HashMap<Symbol, String>) -> String {
    let mut s = atom.predicate.to_string();
    if !atom.terms.is_empty() {
        let args: Vec<String> = atom
            .terms
            .iter()
            .map(|t| match t {
                Term::Var(v) => names.get(v).cloned().unwrap_or_else(|| v.to_string()),
                Term::Int(i) => i.to_string(),
            })
            .collect();
        s.push('(');
        s.push_str(&args.join(","));
        s.push(')');
    }
    s
}

fn items(rule: &Rule) -> BTreeMap<Key, Option<i64>> {
    let names = canonical_names(rule);
    let mut out = BTreeMap::new();
    out.insert(Key::Head(render(&rule.head, &names)), None);
    for lit in &rule.body {
        match lit {
            Literal::Pos(a) => {
                out.insert(Key::Pos(render(a, &names)), None);
            }
            Literal::Neg(a) => {
                out.insert(Key::Neg(render(a, &names)), None);
            }
            Literal::Guard(g) => {
                let var = names
                    .get(g.var())
                    .cloned()
                    .unwrap_or_else(|| g.var().to_string());
                let (lo, hi) = g.bounds();
                if let Some(lo) = lo {
                    out.insert(Key::Lower(var.clone()), Some(lo));
                }
                if let Some(hi) = hi {
                    out.insert(Key::Upper(var), Some(hi));
                }
            }
        }
    }
    out
}

/// Size of the union of the two rules' items minus the size of their
/// intersection.
pub fn rule_distance(a: &Rule, b: &Rule) -> usize {
    let ia = items(a);
    let ib = items(b);
    let union = ia
        .keys()
        .chain(ib.keys().filter(|k| !ia.contains_key(k)))
        .count();
    let common = ia.iter().filter(|(k, v)| ib.get(k) == Some(v)).count();
    union - common
}
