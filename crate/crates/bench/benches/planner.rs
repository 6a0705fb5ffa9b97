use criterion::{criterion_group, criterion_main, Criterion};
use pomcp_rules::{DomainKind, EpisodeRng, Planner, PlannerConfig};
use pomcp_rules_bench::{rocksample, rocksample_belief};

fn search(c: &mut Criterion) {
    let domain = rocksample();
    let rules = DomainKind::Rocksample.shipped_rules();
    let mut group = c.benchmark_group("search_1024_sims");
    group.sample_size(20);
    for on in [false, true] {
        let config = PlannerConfig {
            num_simulations: 1024,
            num_particles: 1024,
            rules_enabled: on,
            ..PlannerConfig::default()
        };
        group.bench_function(if on { "rules" } else { "plain" }, |b| {
            b.iter(|| {
                let mut rng = EpisodeRng::new(1);
                let belief = rocksample_belief(&domain, 1024);
                let mut planner =
                    Planner::new(&domain, config.clone(), Some(&rules), belief).expect("valid");
                planner
                    .search(&mut rng.simulation, &mut rng.rollout)
                    .expect("legal actions")
            })
        });
    }
    group.finish();
}

criterion_group!(benches, search);
criterion_main!(benches);
