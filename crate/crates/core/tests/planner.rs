use pomcp_rules::domains::ActionVocabulary;
use pomcp_rules::logic::shipped;
use pomcp_rules::planner::{ground_node_features, search};
use pomcp_rules::pomdp::{Discount, Step};
use pomcp_rules::{
    parse_program, plan_episode, run_experiment, Battery, BatteryConfig, DomainError, DomainKind,
    EpisodeRng, ExperimentSpec, FeatureMap, FeatureSet, GroundAtom, ParticleBelief, Planner,
    PlannerConfig, RockAction, RockObservation, Rocksample, RocksampleConfig, Simulator,
    SweepParam, Symbol,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One-shot bandit with deterministic arm payoffs.
struct Bandit(Vec<f64>);

impl Simulator for Bandit {
    type State = ();
    type Action = u8;
    type Observation = ();
    type Observable = ();

    fn step<R: Rng + ?Sized>(&self, _: &(), a: u8, _rng: &mut R) -> Step<(), ()> {
        Step {
            state: (),
            observation: (),
            reward: self.0[a as usize],
            terminal: true,
        }
    }

    fn observable(&self, _: &()) {}

    fn legal_actions(&self, _: &()) -> Vec<u8> {
        (0..self.0.len() as u8).collect()
    }

    fn sample_initial_state<R: Rng + ?Sized>(&self, _: &mut R) {}

    fn sample_prior_state<R: Rng + ?Sized>(&self, _: &(), _: &mut R) {}

    fn mutate_particle<R: Rng + ?Sized>(&self, _: &(), _: &mut R) {}

    fn discount(&self) -> Discount {
        Discount::new(0.95).unwrap()
    }
}

impl FeatureMap for Bandit {
    fn belief_features(&self, _: &[()]) -> FeatureSet {
        FeatureSet::new()
    }

    fn observable_features(&self, _: &()) -> FeatureSet {
        FeatureSet::new()
    }

    fn action_atom(&self, a: u8, _: &()) -> GroundAtom {
        GroundAtom::new("arm", [i64::from(a)])
    }

    fn action_from_atom(&self, atom: &GroundAtom) -> Result<u8, DomainError> {
        Ok(atom.args[0] as u8)
    }

    fn action_vocabulary(&self) -> ActionVocabulary {
        let arms = (0..self.0.len() as i64)
            .map(|a| GroundAtom::new("arm", [a]))
            .collect();
        ActionVocabulary::new(vec![(Symbol::new("arm"), arms)])
    }

    fn reward_span(&self) -> f64 {
        1.0
    }
}

fn unit_belief() -> ParticleBelief<()> {
    ParticleBelief::new(vec![(); 10], 10).unwrap()
}

fn config(sims: usize, rules: bool) -> PlannerConfig {
    PlannerConfig {
        num_simulations: sims,
        num_particles: sims,
        rules_enabled: rules,
        ..PlannerConfig::default()
    }
}

#[test]
fn single_action_with_one_simulation() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert_eq!(
        search(
            &Bandit(vec![0.0]),
            unit_belief(),
            &config(1, false),
            None,
            &mut rng
        )
        .unwrap(),
        0
    );
}

#[test]
fn bandit_picks_better_arm() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = search(
            &Bandit(vec![0.0, 1.0]),
            unit_belief(),
            &config(10_000, false),
            None,
            &mut rng,
        )
        .unwrap();
        assert_eq!(a, 1);
    }
}

#[test]
fn misleading_rule_does_not_override_clear_payoff() {
    let rules = parse_program("arm(0).").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = search(
        &Bandit(vec![0.0, 1.0]),
        unit_belief(),
        &config(10_000, true),
        Some(&rules),
        &mut rng,
    )
    .unwrap();
    assert_eq!(a, 1);
}

fn one_rock() -> Rocksample {
    Rocksample::new(RocksampleConfig::new(4, vec![[1, 1]], [1, 1])).unwrap()
}

/// Best first action by exhaustive expectation over two-step action
/// sequences from a fully known state.
fn best_two_step(d: &Rocksample, s: &pomcp_rules::RocksampleState) -> RockAction {
    let gamma = 0.95;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let value = |a: RockAction, rng: &mut ChaCha8Rng| {
        let first = d.step(s, a, rng);
        if first.terminal {
            return first.reward;
        }
        let obs = d.observable(&first.state);
        let second = d
            .legal_actions(&obs)
            .into_iter()
            .map(|b| d.step(&first.state, b, rng).reward)
            .fold(f64::NEG_INFINITY, f64::max);
        first.reward + gamma * second
    };
    d.legal_actions(&d.observable(s))
        .into_iter()
        .map(|a| (a, value(a, &mut rng)))
        .max_by(|x, y| x.1.total_cmp(&y.1))
        .unwrap()
        .0
}

#[test]
fn samples_known_good_rock() {
    let d = one_rock();
    let state = d.state(1, 1, &[true]);
    let best = best_two_step(&d, &state);
    assert_eq!(best, RockAction::Sample(0));
    let belief = ParticleBelief::new(vec![state; 100], 100).unwrap();
    let cfg = PlannerConfig {
        rollout_depth_limit: 2,
        ..config(1000, false)
    };
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        assert_eq!(
            search(&d, belief.clone(), &cfg, None, &mut rng).unwrap(),
            best
        );
    }
}

#[test]
fn prior_injected_on_sample_edge() {
    let d = one_rock();
    let belief = ParticleBelief::new(vec![d.state(1, 1, &[true]); 100], 100).unwrap();
    let rules = shipped::rocksample();
    let mut planner = Planner::new(&d, config(100, true), Some(&rules), belief).unwrap();
    assert_eq!(planner.root_suggestions(), vec![RockAction::Sample(0)]);
    let c = planner.exploration_constant();
    assert_eq!(c, 20.0);
    for e in planner.root_edges() {
        if e.action == RockAction::Sample(0) {
            assert_eq!((e.visits, e.value, e.bias_applied), (10, c, true));
        } else {
            assert_eq!((e.visits, e.value, e.bias_applied), (0, 0.0, false));
        }
    }
    assert_eq!(planner.root_visits(), 10);
}

#[test]
fn rules_off_means_no_prior() {
    let d = one_rock();
    let belief = ParticleBelief::new(vec![d.state(1, 1, &[true]); 100], 100).unwrap();
    let rules = shipped::rocksample();
    let mut planner = Planner::new(&d, config(100, false), Some(&rules), belief).unwrap();
    assert!(planner.root_suggestions().is_empty());
    assert!(planner.root_edges().iter().all(|e| e.visits == 0));
}

#[test]
fn node_features_keep_root_guesses() {
    let d = Rocksample::new(RocksampleConfig::new(6, vec![[2, 1], [4, 3]], [1, 1])).unwrap();
    let particles: Vec<_> = (0..10).map(|i| d.state(1, 1, &[i < 7, i < 2])).collect();
    let root_atoms = d.belief_features(&particles);
    let moved = d.observable(&d.state(2, 1, &[]));
    let f = ground_node_features(&d, &root_atoms, &moved);
    let expect: FeatureSet = [
        "guess(1,70)",
        "guess(2,20)",
        "dist(1,0)",
        "dist(2,4)",
        "delta_x(2,2)",
        "delta_y(2,2)",
        "min_dist(1)",
    ]
    .iter()
    .map(|s| s.parse().unwrap())
    .collect();
    assert!(expect.is_subset(&f), "{f:?}");
    assert!(!f.contains(&"dist(1,1)".parse().unwrap()));
}

#[test]
fn promoted_root_is_regrounded() {
    let d = Rocksample::new(RocksampleConfig::new(6, vec![[2, 1], [4, 3]], [1, 1])).unwrap();
    let particles: Vec<_> = (0..100)
        .map(|i| d.state(1, 1, &[i % 2 == 0, i % 2 == 1]))
        .collect();
    let belief = ParticleBelief::new(particles, 100).unwrap();
    let rules = shipped::rocksample();
    let mut planner = Planner::new(&d, config(500, true), Some(&rules), belief).unwrap();
    assert!(planner
        .root_features()
        .contains(&"guess(1,50)".parse().unwrap()));
    let mut rng = EpisodeRng::new(4);
    planner
        .search(&mut rng.simulation, &mut rng.rollout)
        .unwrap();
    // Walk onto rock 1 and look: the reading at distance zero is exact.
    planner
        .advance(
            RockAction::East,
            RockObservation::None,
            &mut rng.reinvigoration,
        )
        .unwrap();
    planner
        .advance(
            RockAction::Check(0),
            RockObservation::Good,
            &mut rng.reinvigoration,
        )
        .unwrap();
    let f = planner.root_features();
    assert!(f.contains(&"dist(1,0)".parse().unwrap()));
    // Reinvigoration may flip a few duplicated particles back.
    assert!(
        f.contains(&"guess(1,100)".parse().unwrap()) || f.contains(&"guess(1,90)".parse().unwrap()),
        "{f:?}"
    );
    assert_eq!(planner.belief().len(), 100);
    assert!(planner.root_suggestions().contains(&RockAction::Sample(0)));
    let sample = planner
        .root_edges()
        .into_iter()
        .find(|e| e.action == RockAction::Sample(0))
        .unwrap();
    assert!(sample.bias_applied);
    assert!(sample.visits >= 10);
}

#[test]
fn battery_goal_one_step_away() {
    let mut cfg = BatteryConfig::new(1, vec![]);
    cfg.initial_level = Some(10);
    let d = Battery::new(cfg).unwrap();
    let trace = plan_episode(&d, &config(512, false), None, 9).unwrap();
    assert_eq!(trace.steps.len(), 1);
    assert_eq!(trace.steps[0].action.to_string(), "advance");
    assert_eq!(trace.discounted_return, d.config().goal);
}

#[test]
fn episodes_are_deterministic() {
    let d = Rocksample::new(RocksampleConfig::new(
        7,
        vec![[1, 2], [5, 5], [3, 0]],
        [0, 3],
    ))
    .unwrap();
    let rules = shipped::rocksample();
    for on in [false, true] {
        let a = plan_episode(&d, &config(256, on), Some(&rules), 11).unwrap();
        let b = plan_episode(&d, &config(256, on), Some(&rules), 11).unwrap();
        assert_eq!(a.to_text(), b.to_text());
    }
}

#[test]
fn step_cap_bounds_episode_length() {
    let d = Battery::new(BatteryConfig::new(30, vec![4, 8, 12, 16, 20, 24, 28])).unwrap();
    let cfg = PlannerConfig {
        step_cap: 5,
        ..config(64, false)
    };
    assert!(plan_episode(&d, &cfg, None, 2).unwrap().steps.len() <= 5);
}

#[test]
fn rules_keep_parity_on_rocksample_12() {
    let mut spec = ExperimentSpec::new(
        DomainKind::Rocksample,
        SweepParam::Particles,
        vec![4096],
        25,
    );
    spec.grid_size = 12;
    spec.num_rocks = 4;
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let rows = run_experiment(&spec, &shipped::rocksample(), jobs).unwrap();
    let mean = |on: bool| {
        let v: Vec<f64> = rows
            .iter()
            .filter(|r| r.rules == on)
            .map(|r| r.discounted_return.unwrap())
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let (plain, rules) = (mean(false), mean(true));
    eprintln!("rocksample 12: plain {plain:.3} rules {rules:.3}");
    assert!(rules >= 0.85 * plain);
}

#[test]
fn root_counts_and_means() {
    let d = Bandit(vec![0.25, 1.0, -0.5]);
    let rules = parse_program("arm(2).").unwrap();
    for on in [false, true] {
        let mut planner = Planner::new(&d, config(300, on), Some(&rules), unit_belief()).unwrap();
        let mut rng = EpisodeRng::new(1);
        planner
            .search(&mut rng.simulation, &mut rng.rollout)
            .unwrap();
        let offset = if on { 10 } else { 0 };
        assert_eq!(planner.root_visits(), 300 + offset);
        let edges = planner.root_edges();
        assert_eq!(edges.iter().map(|e| e.visits).sum::<u32>(), 300 + offset);
        for e in edges {
            if e.bias_applied {
                // Prior of c = 1 over 10 visits blended with the observed -0.5.
                let k = f64::from(e.visits - 10);
                assert!((e.value - (10.0 - 0.5 * k) / (10.0 + k)).abs() < 1e-9);
            } else {
                assert!((e.value - d.0[e.action as usize]).abs() < 1e-9);
            }
        }
    }
}
