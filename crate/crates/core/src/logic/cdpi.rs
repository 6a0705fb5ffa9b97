use std::collections::BTreeSet;

use super::atom::{GroundAtom, Symbol};
use super::eval::solve;
use super::program::Program;
use super::RuleError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CdpiKind {
    /// Executed action included, its other groundings excluded.
    Positive,
    /// An action not executed at this step: all groundings excluded.
    Counterexample,
    /// Other groundings of the executed action, ranked below the positive.
    OrderingPartner,
}

/// Context-dependent partial interpretation: atoms that must and must not
/// appear in the answer set obtained from the context facts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cdpi {
    pub id: String,
    /// Action predicate this example informs.
    pub action: Symbol,
    pub kind: CdpiKind,
    pub inclusions: BTreeSet<GroundAtom>,
    pub exclusions: BTreeSet<GroundAtom>,
    pub context: BTreeSet<GroundAtom>,
    /// `(preferred id, dispreferred id)`; set on ordering partners.
    pub ordering: Option<(String, String)>,
}

impl Cdpi {
    pub fn new(
        id: impl Into<String>,
        action: Symbol,
        kind: CdpiKind,
        inclusions: BTreeSet<GroundAtom>,
        exclusions: BTreeSet<GroundAtom>,
        context: BTreeSet<GroundAtom>,
    ) -> Result<Self, RuleError> {
        let id = id.into();
        if let Some(a) = inclusions.intersection(&exclusions).next() {
            return Err(RuleError::InvalidExample {
                id,
                reason: format!("{a} is both included and excluded"),
            });
        }
        Ok(Cdpi {
            id,
            action,
            kind,
            inclusions,
            exclusions,
            context,
            ordering: None,
        })
    }
}

/// Whether the hypothesis, run on the example's context (with preferences
/// resolved), derives every inclusion and no exclusion.
pub fn covers(hypothesis: &Program, example: &Cdpi) -> bool {
    let answer = solve(hypothesis, &example.context);
    example.inclusions.iter().all(|a| answer.contains(a))
        && !example.exclusions.iter().any(|a| answer.contains(a))
}

/// Fraction of examples covered; 0 for an empty list.
pub fn coverage<'a>(hypothesis: &Program, examples: impl IntoIterator<Item = &'a Cdpi>) -> f64 {
    let (mut total, mut hit) = (0usize, 0usize);
    for e in examples {
        total += 1;
        hit += usize::from(covers(hypothesis, e));
    }
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}
