use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use super::RuleError;

/// Interned-by-refcount predicate or variable name.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(Arc<str>);

impl Symbol {
    pub fn new(name: &str) -> Self {
        Symbol(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol::new(s)
    }
}

/// A ground atom: predicate applied to integer constants, e.g. `guess(1,70)`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundAtom {
    pub predicate: Symbol,
    pub args: Vec<i64>,
}

impl GroundAtom {
    pub fn new(predicate: impl Into<Symbol>, args: impl Into<Vec<i64>>) -> Self {
        GroundAtom {
            predicate: predicate.into(),
            args: args.into(),
        }
    }

    /// A zero-arity atom such as `advance` or `at_station`.
    pub fn prop(predicate: impl Into<Symbol>) -> Self {
        GroundAtom::new(predicate, Vec::new())
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.predicate)?;
        if !self.args.is_empty() {
            write!(f, "(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{a}")?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Debug for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for GroundAtom {
    type Err = RuleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        super::parse::parse_ground_atom(s)
    }
}

/// Ground feature atoms describing one belief/observable snapshot.
pub type FeatureSet = BTreeSet<GroundAtom>;

/// Parses a whitespace- or period-separated list of ground atoms, as found in
/// facts files (`guess(1,50). guess(2,70).`).
pub fn parse_facts(text: &str) -> Result<FeatureSet, RuleError> {
    super::parse::parse_fact_list(text)
}

/// Renders a feature set as `a1 a2 ...` on one line.
pub fn format_atoms<'a>(atoms: impl IntoIterator<Item = &'a GroundAtom>) -> String {
    let mut out = String::new();
    for (i, a) in atoms.into_iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&a.to_string());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_and_parse() {
        let a = GroundAtom::new("guess", [1, 70]);
        assert_eq!(a.to_string(), "guess(1,70)");
        assert_eq!("guess(1, 70)".parse::<GroundAtom>().unwrap(), a);
        assert_eq!(
            "at_station".parse::<GroundAtom>().unwrap(),
            GroundAtom::prop("at_station")
        );
        assert_eq!(
            "delta_x(2,-3)".parse::<GroundAtom>().unwrap(),
            GroundAtom::new("delta_x", [2, -3])
        );
    }

    #[test]
    fn facts_list() {
        let f = parse_facts("guess(1,50). guess(2,70).\n% comment\nat_station").unwrap();
        assert_eq!(f.len(), 3);
        assert!(f.contains(&GroundAtom::prop("at_station")));
        assert!(parse_facts("guess(X,1).").is_err());
    }
}
