//! Benchmark domains and their maps between planner objects and atoms.
//!
//! Each domain is a [`Simulator`] plus a [`Domain`] impl supplying the
//! feature map (belief + observable state to ground feature atoms) and the
//! action map (simulator actions to ground action atoms and back).

pub mod battery;
pub mod rocksample;

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ilp::ModeBias;
use crate::logic::{FeatureSet, GroundAtom, Program, Symbol, VariableDomain};
use crate::pomdp::Simulator;

pub use battery::{Battery, BatteryAction, BatteryConfig, BatteryObservation, BatteryState};
pub use rocksample::{RockAction, RockObservation, Rocksample, RocksampleConfig, RocksampleState};

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("probability {0} outside [0, 1]")]
    Probability(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown action atom `{0}`")]
    UnknownAction(String),
    #[error("unknown domain `{0}`")]
    UnknownDomain(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

/// Buckets a probability into `{0, 10, ..., 100}`: value `v` stands for
/// `[v, v+10)` percent, and 100 only for certainty.
pub fn discretize_prob(p: f64) -> Result<i64, DomainError> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(DomainError::Probability(p));
    }
    // Tolerate counting ratios like 0.7 landing at 69.999...
    let tenths = (p * 10.0 + 1e-9).floor() as i64;
    Ok((tenths * 10).min(100))
}

/// Action predicates and their groundings in one instance.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ActionVocabulary {
    entries: Vec<(Symbol, Vec<GroundAtom>)>,
}

impl ActionVocabulary {
    pub fn new(entries: Vec<(Symbol, Vec<GroundAtom>)>) -> Self {
        ActionVocabulary { entries }
    }

    pub fn predicates(&self) -> BTreeSet<Symbol> {
        self.entries.iter().map(|(p, _)| p.clone()).collect()
    }

    pub fn entries(&self) -> &[(Symbol, Vec<GroundAtom>)] {
        &self.entries
    }

    /// All groundings of `predicate` (the set G(A) of the instance).
    pub fn groundings(&self, predicate: &Symbol) -> Option<&[GroundAtom]> {
        self.entries
            .iter()
            .find(|(p, _)| p == predicate)
            .map(|(_, g)| g.as_slice())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Rocksample,
    Battery,
}

impl DomainKind {
    pub fn name(self) -> &'static str {
        match self {
            DomainKind::Rocksample => "rocksample",
            DomainKind::Battery => "battery",
        }
    }

    /// The learned rule set shipped for this domain.
    pub fn shipped_rules(self) -> Program {
        match self {
            DomainKind::Rocksample => crate::logic::shipped::rocksample(),
            DomainKind::Battery => crate::logic::shipped::battery(),
        }
    }
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DomainKind {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rocksample" => Ok(DomainKind::Rocksample),
            "battery" => Ok(DomainKind::Battery),
            other => Err(DomainError::UnknownDomain(other.to_string())),
        }
    }
}

/// Instance configuration as stored in config files and trace headers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "domain", rename_all = "lowercase")]
pub enum InstanceConfig {
    Rocksample(RocksampleConfig),
    Battery(BatteryConfig),
}

impl InstanceConfig {
    pub fn kind(&self) -> DomainKind {
        match self {
            InstanceConfig::Rocksample(_) => DomainKind::Rocksample,
            InstanceConfig::Battery(_) => DomainKind::Battery,
        }
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        match self {
            InstanceConfig::Rocksample(c) => c.validate(),
            InstanceConfig::Battery(c) => c.validate(),
        }
    }

    pub fn gamma(&self) -> f64 {
        match self {
            InstanceConfig::Rocksample(c) => c.gamma,
            InstanceConfig::Battery(c) => c.gamma,
        }
    }

    /// Reads a key-value (TOML) instance file with a `domain = ...` key.
    pub fn from_toml(text: &str) -> Result<Self, DomainError> {
        let cfg: InstanceConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, DomainError> {
        let text = std::fs::read_to_string(path).map_err(|source| DomainError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("instance configs serialize")
    }
}

/// Feature and action maps for a simulator.
pub trait FeatureMap: Simulator {
    /// Atoms computed from the particle belief (e.g. `guess/2`).
    fn belief_features(&self, particles: &[Self::State]) -> FeatureSet;

    /// Atoms that depend only on the observable component.
    fn observable_features(&self, observable: &Self::Observable) -> FeatureSet;

    /// Full grounding of a belief snapshot.
    fn features(&self, particles: &[Self::State], observable: &Self::Observable) -> FeatureSet {
        let mut f = self.belief_features(particles);
        f.extend(self.observable_features(observable));
        f
    }

    /// Ground action atom for `action` taken from `observable`.
    fn action_atom(&self, action: Self::Action, observable: &Self::Observable) -> GroundAtom;

    fn action_from_atom(&self, atom: &GroundAtom) -> Result<Self::Action, DomainError>;

    fn action_vocabulary(&self) -> ActionVocabulary;

    /// Largest minus smallest single-step reward.
    fn reward_span(&self) -> f64;
}

/// A benchmark domain: feature maps plus what traces and learning tasks need.
pub trait Domain: FeatureMap + Sync {
    fn kind(&self) -> DomainKind;

    fn instance_config(&self) -> InstanceConfig;

    /// Variable ranges for learning-task background knowledge.
    fn variable_domains(&self) -> Vec<VariableDomain>;

    fn mode_bias(&self) -> ModeBias;
}

/// A domain together with the hidden initial state of an episode.
#[derive(Clone, Debug)]
pub struct Instance<D: Domain> {
    pub domain: D,
    pub initial_state: D::State,
}

impl<D: Domain> Instance<D> {
    pub fn new<R: Rng + ?Sized>(domain: D, rng: &mut R) -> Self {
        let initial_state = domain.sample_initial_state(rng);
        Instance {
            domain,
            initial_state,
        }
    }
}
