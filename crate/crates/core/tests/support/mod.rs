//! Property suites shared by the invariant and acceptance targets. Each
//! returns `Err` with a description of the first failing case.

#![allow(dead_code)]

use pomcp_rules::logic::shipped;
use pomcp_rules::planner::SearchNode;
use pomcp_rules::{
    apply_bias, belief_update, parse_program, plan_episode, Battery, BatteryConfig, BatteryState,
    FeatureMap, GroundAtom, InstanceConfig, ParticleBelief, PlannerConfig, RockAction,
    RockObservation, Rocksample, RocksampleConfig, Simulator, Trace, TraceStep,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    runner(cases)
        .run(&strategy, test)
        .map_err(|e| e.to_string())
}

pub fn battery_guess_monotone() -> Result<(), String> {
    let d = Battery::new(BatteryConfig::new(12, vec![3, 6, 9])).unwrap();
    run(
        256,
        (prop::collection::vec(0u8..=10, 1..200), 0i32..12),
        |(levels, position)| {
            let particles: Vec<_> = levels
                .iter()
                .map(|&level| BatteryState { position, level })
                .collect();
            let f = d.features(&particles, &position);
            let guesses: Vec<(i64, i64)> = f
                .iter()
                .filter(|a| a.predicate.as_str() == "guess")
                .map(|a| (a.args[0], a.args[1]))
                .collect();
            prop_assert_eq!(guesses.len(), 11);
            prop_assert_eq!(guesses[0], (0, 100));
            for w in guesses.windows(2) {
                prop_assert!(w[0].0 < w[1].0 && w[0].1 >= w[1].1, "{:?}", guesses);
            }
            Ok(())
        },
    )
}

pub fn particle_capacity_conserved() -> Result<(), String> {
    let d = Rocksample::new(RocksampleConfig::new(
        7,
        vec![[1, 2], [5, 5], [3, 0]],
        [2, 2],
    ))
    .unwrap();
    let action = prop_oneof![
        Just(RockAction::North),
        Just(RockAction::East),
        (0u8..3).prop_map(RockAction::Check),
        (0u8..3).prop_map(RockAction::Sample),
    ];
    run(
        128,
        (1usize..300, action, any::<u64>()),
        |(capacity, action, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let start = d.observable(&d.state(2, 2, &[]));
            let belief = ParticleBelief::from_prior(&d, &start, capacity, &mut rng);
            let truth = belief.particles()[0];
            let step = d.step(&truth, action, &mut rng);
            match belief_update(&belief, action, step.observation, &d, &mut rng) {
                Ok(next) => {
                    prop_assert_eq!(next.len(), capacity);
                    prop_assert_eq!(next.capacity(), capacity);
                }
                // The observation can be unexplained when only a few particles exist.
                Err(_) => prop_assert!(
                    action != RockAction::North && step.observation != RockObservation::None
                ),
            }
            Ok(())
        },
    )
}

fn rule_text() -> impl Strategy<Value = String> {
    let var = prop::sample::select(vec!["R", "V", "D"]);
    let body_atom = (
        prop::sample::select(vec!["guess", "dist", "delta_x"]),
        var.clone(),
        var.clone(),
    )
        .prop_map(|(p, a, b)| format!("{p}({a},{b})"));
    let guard = (
        var.clone(),
        prop::sample::select(vec!["<=", ">=", "<", ">", "="]),
        -20i64..100,
    )
        .prop_map(|(v, op, k)| format!("{v} {op} {k}"));
    let negated = (prop::sample::select(vec!["sampled", "min_dist"]), var)
        .prop_map(|(p, v)| format!("not {p}({v})"));
    (
        prop::sample::select(vec!["east", "check", "sample", "target"]),
        prop::collection::vec(body_atom, 1..4),
        prop::collection::vec(guard, 0..3),
        prop::collection::vec(negated, 0..2),
    )
        .prop_map(|(head, atoms, guards, negs)| {
            let head = if head == "east" {
                head.to_string()
            } else {
                format!("{head}(R)")
            };
            let mut body = atoms;
            body.extend(guards);
            body.extend(negs);
            format!("{head} :- {}.", body.join(", "))
        })
}

pub fn parse_print_round_trip() -> Result<(), String> {
    for p in [shipped::rocksample(), shipped::battery()] {
        let back = parse_program(&p.to_string()).map_err(|e| e.to_string())?;
        if back != p {
            return Err(format!("shipped program changed on reprint:\n{p}"));
        }
    }
    run(512, rule_text(), |text| {
        // Unsafe or clashing random rules are fine to reject.
        let Ok(p) = parse_program(&text) else {
            return Ok(());
        };
        let printed = p.to_string();
        let back =
            parse_program(&printed).map_err(|e| TestCaseError::fail(format!("{printed}: {e}")))?;
        prop_assert_eq!(back.to_string(), printed);
        prop_assert!(back == p);
        Ok(())
    })
}

pub fn trace_round_trip() -> Result<(), String> {
    let atom = (
        prop::sample::select(vec!["guess", "dist", "sampled"]),
        prop::collection::vec(-50i64..120, 0..3),
    )
        .prop_map(|(p, args)| GroundAtom::new(p, args));
    let step = (
        prop::sample::select(vec!["east", "north", "check(1)", "sample(2)", "exit"]),
        prop::sample::select(vec![0.0, 10.0, -10.0, -0.5, 1e-3]),
        prop::collection::btree_set(atom, 0..8),
    );
    let config = InstanceConfig::Rocksample(RocksampleConfig::new(5, vec![[1, 1], [3, 2]], [0, 0]));
    run(
        256,
        (prop::collection::vec(step, 0..30), any::<u64>()),
        |(steps, seed)| {
            let steps = steps
                .into_iter()
                .enumerate()
                .map(|(t, (action, reward, features))| TraceStep {
                    t,
                    features,
                    action: action.parse().unwrap(),
                    reward,
                })
                .collect();
            let trace = Trace::new(config.clone(), seed, steps);
            let back: Trace = trace
                .to_text()
                .parse()
                .map_err(|e| TestCaseError::fail(format!("{e}")))?;
            prop_assert_eq!(back, trace);
            Ok(())
        },
    )
}

pub fn bias_idempotent() -> Result<(), String> {
    run(
        256,
        (
            prop::collection::vec(any::<bool>(), 1..8),
            0.1f64..50.0,
            0u32..20,
        ),
        |(mask, c, n)| {
            let mut node: SearchNode<usize, ()> = SearchNode::new((0..mask.len()).collect());
            let suggested: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
            apply_bias(&mut node, &suggested, c, n);
            let once = format!("{node:?}");
            apply_bias(&mut node, &suggested, c, n);
            prop_assert_eq!(format!("{node:?}"), once);
            for &i in &suggested {
                let e = node.edge(i).unwrap();
                prop_assert_eq!((e.visits, e.value), (n, c));
            }
            Ok(())
        },
    )
}

pub fn deterministic_under_seed() -> Result<(), String> {
    let rocks = Rocksample::new(RocksampleConfig::new(6, vec![[1, 2], [4, 4]], [0, 2])).unwrap();
    let battery = Battery::new(BatteryConfig::new(12, vec![3, 6, 9])).unwrap();
    let rs = shipped::rocksample();
    let bs = shipped::battery();
    run(12, (any::<u64>(), any::<bool>()), |(seed, on)| {
        let cfg = PlannerConfig {
            num_simulations: 128,
            num_particles: 128,
            rules_enabled: on,
            ..PlannerConfig::default()
        };
        let a = plan_episode(&rocks, &cfg, Some(&rs), seed).unwrap();
        let b = plan_episode(&rocks, &cfg, Some(&rs), seed).unwrap();
        prop_assert_eq!(a, b);
        let a = plan_episode(&battery, &cfg, Some(&bs), seed).unwrap();
        let b = plan_episode(&battery, &cfg, Some(&bs), seed).unwrap();
        prop_assert_eq!(a, b);
        Ok(())
    })
}

/// Observed fraction of truthful checks at distances 0, d0 and 2·d0
/// against (1 + 2^(−d/d0))/2.
pub fn sensor_accuracy(trials: usize) -> Result<Vec<(f64, f64, f64)>, String> {
    let d = Rocksample::new(RocksampleConfig::new(50, vec![[0, 0]], [0, 0])).unwrap();
    let d0 = d.config().sensor_half_distance;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut out = Vec::new();
    for k in 0..3 {
        let dist = d0 * k as f64;
        let mut hits = 0;
        for i in 0..trials {
            let good = i % 2 == 0;
            let s = d.state(dist as i32, 0, &[good]);
            let obs = d.step(&s, RockAction::Check(0), &mut rng).observation;
            hits += usize::from((obs == RockObservation::Good) == good);
        }
        let observed = hits as f64 / trials as f64;
        let expected = (1.0 + (-dist / d0).exp2()) / 2.0;
        if (observed - expected).abs() > 0.01 {
            return Err(format!(
                "d = {dist}: observed {observed:.4}, expected {expected:.4}"
            ));
        }
        out.push((dist, observed, expected));
    }
    Ok(out)
}
