//! Rocksample: an agent on an N×N grid samples rocks of unknown value and
//! leaves the grid on the east side.
//!
//! Coordinates are `(x, y)` with `x` growing east and `y` growing north.
//! Rock `i` (0-based) appears as `i + 1` in atoms.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    discretize_prob, ActionVocabulary, Domain, DomainError, DomainKind, FeatureMap, InstanceConfig,
};
use crate::ilp::ModeBias;
use crate::logic::{FeatureSet, GroundAtom, Symbol, VariableDomain};
use crate::pomdp::{Discount, Simulator, Step};

/// Rock values and sampled flags are bitsets.
pub const MAX_ROCKS: usize = 64;

fn default_sample_good() -> f64 {
    10.0
}
fn default_sample_bad() -> f64 {
    -10.0
}
fn default_exit() -> f64 {
    10.0
}
fn default_half_distance() -> f64 {
    20.0
}
fn default_gamma() -> f64 {
    0.95
}
fn default_flip() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocksampleConfig {
    pub grid_size: i32,
    /// `[x, y]` per rock.
    pub rocks: Vec<[i32; 2]>,
    pub start: [i32; 2],
    #[serde(default = "default_sample_good")]
    pub sample_good: f64,
    #[serde(default = "default_sample_bad")]
    pub sample_bad: f64,
    #[serde(default = "default_exit")]
    pub exit: f64,
    /// Sensor half-efficiency distance d0.
    #[serde(default = "default_half_distance")]
    pub sensor_half_distance: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Chance that a reinvigorated particle has one unsampled rock flipped.
    #[serde(default = "default_flip")]
    pub reinvigoration_flip: f64,
}

impl RocksampleConfig {
    pub fn new(grid_size: i32, rocks: Vec<[i32; 2]>, start: [i32; 2]) -> Self {
        RocksampleConfig {
            grid_size,
            rocks,
            start,
            sample_good: default_sample_good(),
            sample_bad: default_sample_bad(),
            exit: default_exit(),
            sensor_half_distance: default_half_distance(),
            gamma: default_gamma(),
            reinvigoration_flip: default_flip(),
        }
    }

    /// Random layout: distinct rock cells and a random start cell.
    pub fn random<R: Rng + ?Sized>(grid_size: i32, num_rocks: usize, rng: &mut R) -> Self {
        let cells = (grid_size * grid_size) as usize;
        let picks = rand::seq::index::sample(rng, cells, num_rocks.min(cells));
        let rocks = picks
            .iter()
            .map(|c| [(c as i32) % grid_size, (c as i32) / grid_size])
            .collect();
        let start = [
            rng.random_range(0..grid_size),
            rng.random_range(0..grid_size),
        ];
        RocksampleConfig::new(grid_size, rocks, start)
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        let n = self.grid_size;
        let bad = |m: String| Err(DomainError::Config(m));
        if n < 1 {
            return bad(format!("grid_size must be positive, got {n}"));
        }
        if self.rocks.len() > MAX_ROCKS {
            return bad(format!("at most {MAX_ROCKS} rocks supported"));
        }
        let inside = |[x, y]: [i32; 2]| (0..n).contains(&x) && (0..n).contains(&y);
        for (i, r) in self.rocks.iter().enumerate() {
            if !inside(*r) {
                return bad(format!("rock {} at {:?} outside the grid", i + 1, r));
            }
            if self.rocks[..i].contains(r) {
                return bad(format!("rock {} shares cell {:?}", i + 1, r));
            }
        }
        if !inside(self.start) {
            return bad(format!("start {:?} outside the grid", self.start));
        }
        if self.sensor_half_distance <= 0.0 {
            return bad("sensor_half_distance must be positive".into());
        }
        Discount::new(self.gamma).map_err(|e| DomainError::Config(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.reinvigoration_flip) {
            return bad("reinvigoration_flip must be a probability".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RocksampleState {
    pub x: i32,
    pub y: i32,
    values: u64,
    sampled: u64,
}

impl RocksampleState {
    pub fn new(x: i32, y: i32, values: &[bool]) -> Self {
        let values = values
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &v)| acc | (u64::from(v) << i));
        RocksampleState {
            x,
            y,
            values,
            sampled: 0,
        }
    }

    pub fn is_valuable(&self, rock: usize) -> bool {
        self.values >> rock & 1 == 1
    }

    pub fn is_sampled(&self, rock: usize) -> bool {
        self.sampled >> rock & 1 == 1
    }

    pub fn with_sampled(mut self, rock: usize) -> Self {
        self.sampled |= 1 << rock;
        self.values &= !(1 << rock);
        self
    }
}

/// Agent cell and sampled flags.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RockObservable {
    pub x: i32,
    pub y: i32,
    pub sampled: u64,
}

impl RockObservable {
    pub fn is_sampled(&self, rock: usize) -> bool {
        self.sampled >> rock & 1 == 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RockAction {
    North,
    South,
    East,
    West,
    Check(u8),
    Sample(u8),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RockObservation {
    None,
    Good,
    Bad,
}

#[derive(Clone, Debug)]
pub struct Rocksample {
    config: RocksampleConfig,
}

impl Rocksample {
    pub fn new(config: RocksampleConfig) -> Result<Self, DomainError> {
        config.validate()?;
        Ok(Rocksample { config })
    }

    pub fn config(&self) -> &RocksampleConfig {
        &self.config
    }

    pub fn num_rocks(&self) -> usize {
        self.config.rocks.len()
    }

    /// Probability that a check of a rock at Euclidean distance `d` reports
    /// its true value.
    pub fn check_accuracy(&self, distance: f64) -> f64 {
        let eta = (-distance / self.config.sensor_half_distance).exp2();
        (1.0 + eta) / 2.0
    }

    pub fn state(&self, x: i32, y: i32, values: &[bool]) -> RocksampleState {
        RocksampleState::new(x, y, values)
    }
}

impl Simulator for Rocksample {
    type State = RocksampleState;
    type Action = RockAction;
    type Observation = RockObservation;
    type Observable = RockObservable;

    fn step<R: Rng + ?Sized>(
        &self,
        state: &RocksampleState,
        action: RockAction,
        rng: &mut R,
    ) -> Step<RocksampleState, RockObservation> {
        let n = self.config.grid_size;
        let mut s = *state;
        let mut reward = 0.0;
        let mut terminal = false;
        let mut observation = RockObservation::None;
        match action {
            RockAction::North => s.y = (s.y + 1).min(n - 1),
            RockAction::South => s.y = (s.y - 1).max(0),
            RockAction::West => s.x = (s.x - 1).max(0),
            RockAction::East => {
                if s.x == n - 1 {
                    reward = self.config.exit;
                    terminal = true;
                } else {
                    s.x += 1;
                }
            }
            RockAction::Sample(r) => {
                let r = r as usize;
                if self.config.rocks.get(r) == Some(&[s.x, s.y]) {
                    reward = if s.is_valuable(r) {
                        self.config.sample_good
                    } else {
                        self.config.sample_bad
                    };
                    s = s.with_sampled(r);
                } else {
                    reward = self.config.sample_bad;
                }
            }
            RockAction::Check(r) => {
                let r = r as usize;
                if let Some(&[rx, ry]) = self.config.rocks.get(r) {
                    let d = f64::from(rx - s.x).hypot(f64::from(ry - s.y));
                    let truthful = rng.random_bool(self.check_accuracy(d));
                    observation = if s.is_valuable(r) == truthful {
                        RockObservation::Good
                    } else {
                        RockObservation::Bad
                    };
                }
            }
        }
        Step {
            state: s,
            observation,
            reward,
            terminal,
        }
    }

    fn observable(&self, state: &RocksampleState) -> RockObservable {
        RockObservable {
            x: state.x,
            y: state.y,
            sampled: state.sampled,
        }
    }

    fn legal_actions(&self, obs: &RockObservable) -> Vec<RockAction> {
        let n = self.config.grid_size;
        let m = self.num_rocks();
        let mut out = Vec::with_capacity(4 + 2 * m);
        if obs.y < n - 1 {
            out.push(RockAction::North);
        }
        if obs.y > 0 {
            out.push(RockAction::South);
        }
        out.push(RockAction::East);
        if obs.x > 0 {
            out.push(RockAction::West);
        }
        out.extend((0..m as u8).map(RockAction::Check));
        out.extend((0..m as u8).map(RockAction::Sample));
        out
    }

    fn sample_initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> RocksampleState {
        let [x, y] = self.config.start;
        self.sample_prior_state(&RockObservable { x, y, sampled: 0 }, rng)
    }

    fn sample_prior_state<R: Rng + ?Sized>(
        &self,
        obs: &RockObservable,
        rng: &mut R,
    ) -> RocksampleState {
        let m = self.num_rocks();
        let mask = if m == 64 { u64::MAX } else { (1u64 << m) - 1 };
        let values = rng.random::<u64>() & mask & !obs.sampled;
        RocksampleState {
            x: obs.x,
            y: obs.y,
            values,
            sampled: obs.sampled,
        }
    }

    fn mutate_particle<R: Rng + ?Sized>(
        &self,
        state: &RocksampleState,
        rng: &mut R,
    ) -> RocksampleState {
        let mut s = *state;
        if !rng.random_bool(self.config.reinvigoration_flip) {
            return s;
        }
        let open: Vec<usize> = (0..self.num_rocks())
            .filter(|&r| !s.is_sampled(r))
            .collect();
        if !open.is_empty() {
            let r = open[rng.random_range(0..open.len())];
            s.values ^= 1 << r;
        }
        s
    }

    fn discount(&self) -> Discount {
        Discount::new(self.config.gamma).expect("validated")
    }
}

fn rock_atom(pred: &str, rock: usize, rest: &[i64]) -> GroundAtom {
    let mut args = vec![rock as i64 + 1];
    args.extend_from_slice(rest);
    GroundAtom::new(pred, args)
}

impl FeatureMap for Rocksample {
    fn belief_features(&self, particles: &[RocksampleState]) -> FeatureSet {
        let n = particles.len().max(1) as f64;
        (0..self.num_rocks())
            .map(|r| {
                let good = particles.iter().filter(|p| p.is_valuable(r)).count();
                let v = discretize_prob(good as f64 / n).expect("fraction in [0,1]");
                rock_atom("guess", r, &[v])
            })
            .collect()
    }

    fn observable_features(&self, obs: &RockObservable) -> FeatureSet {
        let mut out = FeatureSet::new();
        let m = self.num_rocks();
        let dists: Vec<i64> = self
            .config
            .rocks
            .iter()
            .map(|&[rx, ry]| i64::from((rx - obs.x).abs() + (ry - obs.y).abs()))
            .collect();
        let min = dists.iter().copied().min();
        for (r, &[rx, ry]) in self.config.rocks.iter().enumerate() {
            out.insert(rock_atom("dist", r, &[dists[r]]));
            out.insert(rock_atom("delta_x", r, &[i64::from(rx - obs.x)]));
            out.insert(rock_atom("delta_y", r, &[i64::from(ry - obs.y)]));
            if Some(dists[r]) == min {
                out.insert(rock_atom("min_dist", r, &[]));
            }
            if obs.is_sampled(r) {
                out.insert(rock_atom("sampled", r, &[]));
            }
        }
        if m > 0 {
            let k = obs.sampled.count_ones() as i64;
            out.insert(GroundAtom::new("num_sampled", [100 * k / m as i64]));
        }
        out
    }

    fn action_atom(&self, action: RockAction, obs: &RockObservable) -> GroundAtom {
        match action {
            RockAction::North => GroundAtom::prop("north"),
            RockAction::South => GroundAtom::prop("south"),
            RockAction::West => GroundAtom::prop("west"),
            RockAction::East if obs.x == self.config.grid_size - 1 => GroundAtom::prop("exit"),
            RockAction::East => GroundAtom::prop("east"),
            RockAction::Check(r) => rock_atom("check", r as usize, &[]),
            RockAction::Sample(r) => rock_atom("sample", r as usize, &[]),
        }
    }

    fn action_from_atom(&self, atom: &GroundAtom) -> Result<RockAction, DomainError> {
        let unknown = || DomainError::UnknownAction(atom.to_string());
        let rock = || -> Result<u8, DomainError> {
            match atom.args.as_slice() {
                [r] if (1..=self.num_rocks() as i64).contains(r) => Ok((*r - 1) as u8),
                _ => Err(unknown()),
            }
        };
        let prop = |a: RockAction| {
            if atom.args.is_empty() {
                Ok(a)
            } else {
                Err(unknown())
            }
        };
        match atom.predicate.as_str() {
            "north" => prop(RockAction::North),
            "south" => prop(RockAction::South),
            "west" => prop(RockAction::West),
            "east" | "exit" => prop(RockAction::East),
            "check" => rock().map(RockAction::Check),
            "sample" => rock().map(RockAction::Sample),
            _ => Err(unknown()),
        }
    }

    fn action_vocabulary(&self) -> ActionVocabulary {
        let per_rock = |p: &str| -> Vec<GroundAtom> {
            (0..self.num_rocks())
                .map(|r| rock_atom(p, r, &[]))
                .collect()
        };
        let mut entries: Vec<(Symbol, Vec<GroundAtom>)> =
            ["east", "west", "north", "south", "exit"]
                .into_iter()
                .map(|p| (Symbol::new(p), vec![GroundAtom::prop(p)]))
                .collect();
        entries.push((Symbol::new("check"), per_rock("check")));
        entries.push((Symbol::new("sample"), per_rock("sample")));
        ActionVocabulary::new(entries)
    }

    fn reward_span(&self) -> f64 {
        let c = &self.config;
        let hi = c.sample_good.max(c.exit).max(0.0);
        let lo = c.sample_bad.min(0.0);
        hi - lo
    }
}

impl Domain for Rocksample {
    fn kind(&self) -> DomainKind {
        DomainKind::Rocksample
    }

    fn instance_config(&self) -> InstanceConfig {
        InstanceConfig::Rocksample(self.config.clone())
    }

    fn variable_domains(&self) -> Vec<VariableDomain> {
        let m = self.num_rocks() as i64;
        let n = i64::from(self.config.grid_size);
        let mut sampled: Vec<i64> = (0..=m)
            .map(|k| if m == 0 { 0 } else { 100 * k / m })
            .collect();
        sampled.dedup();
        vec![
            VariableDomain::range("rock", 1, m, 1),
            VariableDomain::range("prob", 0, 100, 10),
            VariableDomain::range("dist", 0, 2 * (n - 1), 1),
            VariableDomain::range("delta", -(n - 1), n - 1, 1),
            VariableDomain {
                name: "percent".into(),
                values: sampled,
            },
        ]
    }

    fn mode_bias(&self) -> ModeBias {
        let mut heads = BTreeMap::new();
        for p in ["east", "west", "north", "south", "exit"] {
            heads.insert(p.to_string(), p.to_string());
        }
        heads.insert("check".into(), "check(var(rock))".into());
        heads.insert("sample".into(), "sample(var(rock))".into());
        ModeBias {
            heads,
            body: vec![
                "target(var(rock))".into(),
                "guess(var(rock), var(prob))".into(),
                "dist(var(rock), var(dist))".into(),
                "delta_x(var(rock), var(delta))".into(),
                "delta_y(var(rock), var(delta))".into(),
                "min_dist(var(rock))".into(),
                "not sampled(var(rock))".into(),
                "num_sampled(var(percent))".into(),
            ],
            comparisons: vec![
                "prob".into(),
                "dist".into(),
                "delta".into(),
                "percent".into(),
            ],
            ranked: vec![
                "target(var(rock))".into(),
                "dist(var(rock), var(dist))".into(),
                "guess(var(rock), var(prob))".into(),
                "min_dist(var(rock))".into(),
            ],
            max_body: 5,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pomdp::ParticleBelief;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_rocks() -> Rocksample {
        Rocksample::new(RocksampleConfig::new(5, vec![[1, 1], [3, 2]], [0, 0])).unwrap()
    }

    #[test]
    fn sampling_good_rock_pays_and_flags() {
        let sim = two_rocks();
        let s = sim.state(1, 1, &[true, false]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let st = sim.step(&s, RockAction::Sample(0), &mut rng);
        assert_eq!(st.reward, sim.config().sample_good);
        assert!(st.state.is_sampled(0));
        assert!(!st.state.is_valuable(0));
        let again = sim.step(&st.state, RockAction::Sample(0), &mut rng);
        assert_eq!(again.reward, sim.config().sample_bad);
    }

    #[test]
    fn sampling_elsewhere_is_bad() {
        let sim = two_rocks();
        let s = sim.state(0, 0, &[true, true]);
        let st = sim.step(&s, RockAction::Sample(0), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(st.reward, -10.0);
        assert_eq!(st.state, s);
    }

    #[test]
    fn exit_on_east_edge() {
        let sim = two_rocks();
        let s = sim.state(4, 2, &[false, false]);
        let st = sim.step(&s, RockAction::East, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(st.terminal);
        assert_eq!(st.reward, 10.0);
        let obs = sim.observable(&s);
        assert_eq!(
            sim.action_atom(RockAction::East, &obs),
            GroundAtom::prop("exit")
        );
        assert_eq!(
            sim.action_from_atom(&GroundAtom::prop("exit")).unwrap(),
            RockAction::East
        );
    }

    #[test]
    fn check_at_zero_distance_is_exact() {
        let sim = two_rocks();
        assert_eq!(sim.check_accuracy(0.0), 1.0);
        assert!((sim.check_accuracy(20.0) - 0.75).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for value in [true, false] {
            let s = sim.state(1, 1, &[value, false]);
            for _ in 0..200 {
                let st = sim.step(&s, RockAction::Check(0), &mut rng);
                let expect = if value {
                    RockObservation::Good
                } else {
                    RockObservation::Bad
                };
                assert_eq!(st.observation, expect);
            }
        }
    }

    #[test]
    fn legal_actions_respect_walls() {
        let sim = two_rocks();
        let corner = RockObservable {
            x: 0,
            y: 0,
            sampled: 0,
        };
        let acts = sim.legal_actions(&corner);
        assert!(!acts.contains(&RockAction::South));
        assert!(!acts.contains(&RockAction::West));
        assert!(acts.contains(&RockAction::East));
        assert_eq!(acts.len(), 2 + 4);
    }

    #[test]
    fn features_on_constructed_belief() {
        let cfg = RocksampleConfig::new(11, vec![[8, 7], [2, 2], [10, 0], [5, 9]], [8, 7]);
        let sim = Rocksample::new(cfg).unwrap();
        // 90 of 100 particles: rock 1 valuable.
        let particles: Vec<_> = (0..100)
            .map(|i| sim.state(8, 7, &[i < 90, false, true, false]))
            .collect();
        let belief = ParticleBelief::new(particles, 100).unwrap();
        let obs = sim.observable(&belief.particles()[0]);
        let f = sim.features(belief.particles(), &obs);
        for a in [
            "guess(1,90)",
            "dist(1,0)",
            "delta_x(1,0)",
            "delta_y(1,0)",
            "min_dist(1)",
        ] {
            assert!(f.contains(&a.parse().unwrap()), "missing {a}");
        }
        assert!(f.contains(&"guess(3,100)".parse().unwrap()));
        assert!(f.contains(&"dist(2,11)".parse().unwrap()));
        assert!(f.contains(&"delta_x(2,-6)".parse().unwrap()));
        assert!(f.contains(&"num_sampled(0)".parse().unwrap()));
    }

    #[test]
    fn num_sampled_and_ties() {
        let cfg = RocksampleConfig::new(6, vec![[1, 0], [0, 1], [5, 5], [4, 4]], [0, 0]);
        let sim = Rocksample::new(cfg).unwrap();
        let obs = RockObservable {
            x: 0,
            y: 0,
            sampled: 0b0100,
        };
        let f = sim.observable_features(&obs);
        assert!(f.contains(&"num_sampled(25)".parse().unwrap()));
        assert!(f.contains(&"min_dist(1)".parse().unwrap()));
        assert!(f.contains(&"min_dist(2)".parse().unwrap()));
        assert!(!f.contains(&"min_dist(3)".parse().unwrap()));
        assert!(f.contains(&"sampled(3)".parse().unwrap()));
    }

    #[test]
    fn action_map_round_trip() {
        let sim = two_rocks();
        let obs = RockObservable {
            x: 2,
            y: 2,
            sampled: 0,
        };
        for a in sim.legal_actions(&obs) {
            let atom = sim.action_atom(a, &obs);
            assert_eq!(sim.action_from_atom(&atom).unwrap(), a);
        }
        assert_eq!(
            sim.action_atom(RockAction::Sample(1), &obs),
            GroundAtom::new("sample", [2])
        );
        assert_eq!(
            sim.action_atom(RockAction::Check(0), &obs),
            GroundAtom::new("check", [1])
        );
        assert!(sim
            .action_from_atom(&GroundAtom::new("sample", [3]))
            .is_err());
        assert!(sim.action_from_atom(&GroundAtom::prop("jump")).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(Rocksample::new(RocksampleConfig::new(4, vec![[1, 1], [1, 1]], [0, 0])).is_err());
        assert!(Rocksample::new(RocksampleConfig::new(4, vec![[4, 1]], [0, 0])).is_err());
        let mut c = RocksampleConfig::new(4, vec![[1, 1]], [0, 0]);
        c.gamma = 1.2;
        assert!(Rocksample::new(c).is_err());
    }

    #[test]
    fn random_layout_is_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let c = RocksampleConfig::random(12, 4, &mut rng);
            c.validate().unwrap();
            assert_eq!(c.rocks.len(), 4);
        }
    }
}
