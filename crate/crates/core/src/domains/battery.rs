//! Battery: a robot advances along a path towards a goal, draining a
//! battery whose level it can only observe through a noisy check. Stations
//! along the path allow recharging.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    discretize_prob, ActionVocabulary, Domain, DomainError, DomainKind, FeatureMap, InstanceConfig,
};
use crate::ilp::ModeBias;
use crate::logic::{FeatureSet, GroundAtom, Symbol, VariableDomain};
use crate::pomdp::{Discount, Simulator, Step};

fn default_levels() -> u8 {
    10
}
fn default_drain() -> f64 {
    0.5
}
fn default_accuracy() -> f64 {
    0.9
}
fn default_goal() -> f64 {
    10.0
}
fn default_depletion() -> f64 {
    -100.0
}
fn default_recharge_cost() -> f64 {
    -1.0
}
fn default_check_cost() -> f64 {
    -0.5
}
fn default_gamma() -> f64 {
    0.95
}
fn default_gap() -> [i32; 2] {
    [1, 4]
}
fn default_jitter() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatteryConfig {
    pub path_length: i32,
    pub station_positions: Vec<i32>,
    #[serde(default = "default_levels")]
    pub battery_levels: u8,
    #[serde(default = "default_drain")]
    pub move_drain_prob: f64,
    #[serde(default = "default_accuracy")]
    pub sensor_accuracy: f64,
    #[serde(default = "default_goal")]
    pub goal: f64,
    #[serde(default = "default_depletion")]
    pub depletion: f64,
    #[serde(default = "default_recharge_cost")]
    pub recharge_cost: f64,
    #[serde(default = "default_check_cost")]
    pub check_cost: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Allowed distance between consecutive stops (start, stations, goal).
    #[serde(default = "default_gap")]
    pub station_gap: [i32; 2],
    /// Fixed true starting level; drawn uniformly from `1..=battery_levels` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_level: Option<u8>,
    /// Chance that a reinvigorated particle's level moves by one.
    #[serde(default = "default_jitter")]
    pub reinvigoration_jitter: f64,
}

impl BatteryConfig {
    pub fn new(path_length: i32, station_positions: Vec<i32>) -> Self {
        BatteryConfig {
            path_length,
            station_positions,
            battery_levels: default_levels(),
            move_drain_prob: default_drain(),
            sensor_accuracy: default_accuracy(),
            goal: default_goal(),
            depletion: default_depletion(),
            recharge_cost: default_recharge_cost(),
            check_cost: default_check_cost(),
            gamma: default_gamma(),
            station_gap: default_gap(),
            initial_level: None,
            reinvigoration_jitter: default_jitter(),
        }
    }

    /// Stations placed from the start with gaps drawn uniformly from the
    /// default gap range, stopping before the goal.
    pub fn random<R: Rng + ?Sized>(path_length: i32, rng: &mut R) -> Self {
        let [lo, hi] = default_gap();
        let mut stations = Vec::new();
        let mut pos = 0;
        loop {
            // The final stretch to the goal must also respect the range.
            if path_length - pos <= hi {
                break;
            }
            let max_step = hi.min(path_length - pos - lo);
            pos += rng.random_range(lo..=max_step);
            stations.push(pos);
        }
        BatteryConfig::new(path_length, stations)
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        let bad = |m: String| Err(DomainError::Config(m));
        if self.path_length < 1 {
            return bad(format!(
                "path_length must be positive, got {}",
                self.path_length
            ));
        }
        if self.battery_levels < 1 {
            return bad("battery_levels must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.move_drain_prob) {
            return bad("move_drain_prob must be a probability".into());
        }
        if !(self.sensor_accuracy > 0.5 && self.sensor_accuracy <= 1.0) {
            return bad("sensor_accuracy must lie in (0.5, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.reinvigoration_jitter) {
            return bad("reinvigoration_jitter must be a probability".into());
        }
        Discount::new(self.gamma).map_err(|e| DomainError::Config(e.to_string()))?;
        if let Some(l) = self.initial_level {
            if l < 1 || l > self.battery_levels {
                return bad(format!(
                    "initial_level {l} outside 1..={}",
                    self.battery_levels
                ));
            }
        }
        let [lo, hi] = self.station_gap;
        if lo < 1 || lo > hi {
            return bad(format!(
                "station_gap {:?} is not a valid range",
                self.station_gap
            ));
        }
        let mut prev = 0;
        for &s in self
            .station_positions
            .iter()
            .chain(std::iter::once(&self.path_length))
        {
            if s < 0 || s > self.path_length {
                return bad(format!("station {s} outside the path"));
            }
            let gap = s - prev;
            if gap == 0 && s == 0 {
                continue;
            }
            if gap < lo || gap > hi {
                return bad(format!(
                    "gap {gap} between {prev} and {s} outside {lo}..={hi}"
                ));
            }
            prev = s;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BatteryState {
    pub position: i32,
    pub level: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BatteryAction {
    Advance,
    Check,
    Recharge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BatteryObservation {
    None,
    Level(u8),
}

#[derive(Clone, Debug)]
pub struct Battery {
    config: BatteryConfig,
}

impl Battery {
    pub fn new(config: BatteryConfig) -> Result<Self, DomainError> {
        config.validate()?;
        Ok(Battery { config })
    }

    pub fn config(&self) -> &BatteryConfig {
        &self.config
    }

    pub fn is_station(&self, position: i32) -> bool {
        self.config
            .station_positions
            .binary_search(&position)
            .is_ok()
    }

    /// Distance to the nearest station strictly ahead, or to the goal.
    pub fn dist_next(&self, position: i32) -> i32 {
        let next = self
            .config
            .station_positions
            .iter()
            .find(|&&s| s > position)
            .copied()
            .unwrap_or(self.config.path_length);
        next - position
    }
}

impl Simulator for Battery {
    type State = BatteryState;
    type Action = BatteryAction;
    type Observation = BatteryObservation;
    type Observable = i32;

    fn step<R: Rng + ?Sized>(
        &self,
        state: &BatteryState,
        action: BatteryAction,
        rng: &mut R,
    ) -> Step<BatteryState, BatteryObservation> {
        let c = &self.config;
        let mut s = *state;
        let (observation, reward, terminal) = match action {
            BatteryAction::Advance => {
                s.position += 1;
                if s.level > 0 && rng.random_bool(c.move_drain_prob) {
                    s.level -= 1;
                }
                if s.position >= c.path_length {
                    (BatteryObservation::None, c.goal, true)
                } else if s.level == 0 {
                    (BatteryObservation::None, c.depletion, true)
                } else {
                    (BatteryObservation::None, 0.0, false)
                }
            }
            BatteryAction::Check => {
                let reading = if rng.random_bool(c.sensor_accuracy) {
                    s.level
                } else {
                    let below = s.level.checked_sub(1);
                    let above = (s.level < c.battery_levels).then_some(s.level + 1);
                    match (below, above) {
                        (Some(b), Some(a)) => {
                            if rng.random_bool(0.5) {
                                b
                            } else {
                                a
                            }
                        }
                        (Some(b), None) => b,
                        (None, Some(a)) => a,
                        (None, None) => s.level,
                    }
                };
                (BatteryObservation::Level(reading), c.check_cost, false)
            }
            BatteryAction::Recharge => {
                s.level = c.battery_levels;
                (BatteryObservation::None, c.recharge_cost, false)
            }
        };
        Step {
            state: s,
            observation,
            reward,
            terminal,
        }
    }

    fn observable(&self, state: &BatteryState) -> i32 {
        state.position
    }

    fn legal_actions(&self, position: &i32) -> Vec<BatteryAction> {
        let mut out = vec![BatteryAction::Advance, BatteryAction::Check];
        if self.is_station(*position) {
            out.push(BatteryAction::Recharge);
        }
        out
    }

    fn sample_initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> BatteryState {
        match self.config.initial_level {
            Some(level) => BatteryState { position: 0, level },
            None => self.sample_prior_state(&0, rng),
        }
    }

    fn sample_prior_state<R: Rng + ?Sized>(&self, position: &i32, rng: &mut R) -> BatteryState {
        BatteryState {
            position: *position,
            level: rng.random_range(1..=self.config.battery_levels),
        }
    }

    fn mutate_particle<R: Rng + ?Sized>(&self, state: &BatteryState, rng: &mut R) -> BatteryState {
        let mut s = *state;
        if rng.random_bool(self.config.reinvigoration_jitter) {
            s.level = if rng.random_bool(0.5) {
                s.level.saturating_sub(1).max(1)
            } else {
                (s.level + 1).min(self.config.battery_levels)
            };
        }
        s
    }

    fn discount(&self) -> Discount {
        Discount::new(self.config.gamma).expect("validated")
    }
}

impl FeatureMap for Battery {
    fn belief_features(&self, particles: &[BatteryState]) -> FeatureSet {
        let mut counts = vec![0usize; self.config.battery_levels as usize + 2];
        for p in particles {
            counts[p.level as usize] += 1;
        }
        // Suffix sums give "level at least L".
        for l in (0..counts.len() - 1).rev() {
            counts[l] += counts[l + 1];
        }
        let n = particles.len().max(1) as f64;
        (0..=self.config.battery_levels as usize)
            .map(|l| {
                let v = discretize_prob(counts[l] as f64 / n).expect("fraction in [0,1]");
                GroundAtom::new("guess", [l as i64, v])
            })
            .collect()
    }

    fn observable_features(&self, position: &i32) -> FeatureSet {
        let mut out = FeatureSet::new();
        out.insert(GroundAtom::new(
            "dist_next",
            [i64::from(self.dist_next(*position))],
        ));
        if self.is_station(*position) {
            out.insert(GroundAtom::prop("at_station"));
        }
        out
    }

    fn action_atom(&self, action: BatteryAction, _position: &i32) -> GroundAtom {
        GroundAtom::prop(match action {
            BatteryAction::Advance => "advance",
            BatteryAction::Check => "check",
            BatteryAction::Recharge => "recharge",
        })
    }

    fn action_from_atom(&self, atom: &GroundAtom) -> Result<BatteryAction, DomainError> {
        if !atom.args.is_empty() {
            return Err(DomainError::UnknownAction(atom.to_string()));
        }
        match atom.predicate.as_str() {
            "advance" => Ok(BatteryAction::Advance),
            "check" => Ok(BatteryAction::Check),
            "recharge" => Ok(BatteryAction::Recharge),
            _ => Err(DomainError::UnknownAction(atom.to_string())),
        }
    }

    fn action_vocabulary(&self) -> ActionVocabulary {
        ActionVocabulary::new(
            ["advance", "check", "recharge"]
                .into_iter()
                .map(|p| (Symbol::new(p), vec![GroundAtom::prop(p)]))
                .collect(),
        )
    }

    fn reward_span(&self) -> f64 {
        let c = &self.config;
        let hi = c.goal.max(0.0);
        let lo = c.depletion.min(c.recharge_cost).min(c.check_cost).min(0.0);
        hi - lo
    }
}

impl Domain for Battery {
    fn kind(&self) -> DomainKind {
        DomainKind::Battery
    }

    fn instance_config(&self) -> InstanceConfig {
        InstanceConfig::Battery(self.config.clone())
    }

    fn variable_domains(&self) -> Vec<VariableDomain> {
        let max_gap = i64::from(self.config.station_gap[1]);
        vec![
            VariableDomain::range("level", 0, i64::from(self.config.battery_levels), 1),
            VariableDomain::range("prob", 0, 100, 10),
            VariableDomain::range("dist", 1, max_gap, 1),
        ]
    }

    fn mode_bias(&self) -> ModeBias {
        let mut heads = BTreeMap::new();
        for p in ["advance", "check", "recharge"] {
            heads.insert(p.to_string(), p.to_string());
        }
        ModeBias {
            heads,
            body: vec![
                "guess(var(level), var(prob))".into(),
                "dist_next(var(dist))".into(),
                "at_station".into(),
            ],
            comparisons: vec!["level".into(), "prob".into(), "dist".into()],
            ranked: Vec::new(),
            max_body: 6,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sim() -> Battery {
        Battery::new(BatteryConfig::new(10, vec![3, 6])).unwrap()
    }

    #[test]
    fn depletion_on_last_drain() {
        let mut cfg = BatteryConfig::new(10, vec![3, 6]);
        cfg.move_drain_prob = 1.0;
        let sim = Battery::new(cfg).unwrap();
        let s = BatteryState {
            position: 2,
            level: 1,
        };
        let st = sim.step(
            &s,
            BatteryAction::Advance,
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert!(st.terminal);
        assert_eq!(st.reward, -100.0);
    }

    #[test]
    fn goal_reached() {
        let mut cfg = BatteryConfig::new(10, vec![3, 6]);
        cfg.move_drain_prob = 0.0;
        let sim = Battery::new(cfg).unwrap();
        let s = BatteryState {
            position: 9,
            level: 4,
        };
        let st = sim.step(
            &s,
            BatteryAction::Advance,
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert!(st.terminal);
        assert_eq!(st.reward, 10.0);
    }

    #[test]
    fn recharge_restores() {
        let sim = sim();
        let s = BatteryState {
            position: 3,
            level: 2,
        };
        let st = sim.step(
            &s,
            BatteryAction::Recharge,
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert_eq!(st.state.level, 10);
        assert_eq!(st.reward, -1.0);
        assert!(!st.terminal);
        assert!(sim.legal_actions(&3).contains(&BatteryAction::Recharge));
        assert!(!sim.legal_actions(&4).contains(&BatteryAction::Recharge));
    }

    #[test]
    fn check_is_near_truth() {
        let sim = sim();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = BatteryState {
            position: 0,
            level: 5,
        };
        let mut correct = 0;
        for _ in 0..20_000 {
            let st = sim.step(&s, BatteryAction::Check, &mut rng);
            assert_eq!(st.reward, -0.5);
            match st.observation {
                BatteryObservation::Level(5) => correct += 1,
                BatteryObservation::Level(l) => assert!(l == 4 || l == 6),
                BatteryObservation::None => panic!("check must report a level"),
            }
        }
        let rate = correct as f64 / 20_000.0;
        assert!((rate - 0.9).abs() < 0.01, "{rate}");
    }

    #[test]
    fn features_from_levels() {
        let sim = sim();
        let particles: Vec<_> = [3, 3, 7, 9]
            .into_iter()
            .map(|level| BatteryState { position: 3, level })
            .collect();
        let f = sim.features(&particles, &3);
        for a in [
            "guess(3,100)",
            "guess(7,50)",
            "guess(9,20)",
            "guess(0,100)",
            "guess(10,0)",
            "at_station",
            "dist_next(3)",
        ] {
            assert!(f.contains(&a.parse().unwrap()), "missing {a}");
        }
        assert_eq!(
            f.iter().filter(|a| a.predicate.as_str() == "guess").count(),
            11
        );
    }

    #[test]
    fn dist_next_falls_back_to_goal() {
        let sim = sim();
        assert_eq!(sim.dist_next(0), 3);
        assert_eq!(sim.dist_next(3), 3);
        assert_eq!(sim.dist_next(7), 3);
        assert_eq!(sim.dist_next(9), 1);
    }

    #[test]
    fn random_stations_respect_gaps() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for len in [1, 2, 5, 35, 75] {
            for _ in 0..50 {
                let cfg = BatteryConfig::random(len, &mut rng);
                cfg.validate().unwrap();
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(Battery::new(BatteryConfig::new(10, vec![6])).is_err());
        assert!(Battery::new(BatteryConfig::new(5, vec![2])).is_ok());
        let mut c = BatteryConfig::new(5, vec![2]);
        c.sensor_accuracy = 0.5;
        assert!(Battery::new(c).is_err());
    }

    #[test]
    fn action_map_round_trip() {
        let sim = sim();
        for a in sim.legal_actions(&3) {
            assert_eq!(sim.action_from_atom(&sim.action_atom(a, &3)).unwrap(), a);
        }
        assert!(sim.action_from_atom(&GroundAtom::prop("jump")).is_err());
    }
}
