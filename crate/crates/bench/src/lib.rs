//! Fixtures shared by the benchmarks.

use std::collections::BTreeSet;

use pomcp_rules::{
    Battery, BatteryConfig, DomainKind, FeatureMap, FeatureSet, ParticleBelief, Program,
    Rocksample, RocksampleConfig, RocksampleState, Simulator, Symbol,
};

/// 12×12 rocksample with four rocks, agent on rock 1.
pub fn rocksample() -> Rocksample {
    Rocksample::new(RocksampleConfig::new(
        12,
        vec![[3, 4], [8, 1], [10, 10], [0, 7]],
        [3, 4],
    ))
    .expect("valid")
}

/// Shipped rules, the grounding of a mixed belief and the action predicates.
pub fn rocksample_grounding() -> (Program, FeatureSet, BTreeSet<Symbol>) {
    let domain = rocksample();
    let particles: Vec<RocksampleState> = (0..100)
        .map(|i| domain.state(3, 4, &[i % 10 != 0, i % 2 == 0, i % 3 == 0, i % 5 == 0]))
        .collect();
    let obs = domain.observable(&particles[0]);
    let features = domain.features(&particles, &obs);
    (
        DomainKind::Rocksample.shipped_rules(),
        features,
        domain.action_vocabulary().predicates(),
    )
}

pub fn rocksample_belief(domain: &Rocksample, particles: usize) -> ParticleBelief<RocksampleState> {
    let start = domain.observable(&domain.state(3, 4, &[]));
    let mut rng = pomcp_rules::EpisodeRng::new(0).reinvigoration;
    ParticleBelief::from_prior(domain, &start, particles, &mut rng)
}

pub fn battery() -> Battery {
    Battery::new(BatteryConfig::new(12, vec![3, 6, 9])).expect("valid")
}
