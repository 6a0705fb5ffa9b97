//! Domain-agnostic POMDP pieces: the generative simulator interface, the
//! particle belief and return accounting.

use std::fmt::Debug;
use std::hash::Hash;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PomdpError {
    #[error("discount factor {0} outside [0, 1]")]
    InvalidDiscount(f64),
    #[error("belief collapsed: no particle reproduces the observation")]
    BeliefCollapse,
    #[error("belief has no particles")]
    EmptyBelief,
}

/// Discount factor in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Discount(f64);

impl Discount {
    pub fn new(gamma: f64) -> Result<Self, PomdpError> {
        if (0.0..=1.0).contains(&gamma) {
            Ok(Discount(gamma))
        } else {
            Err(PomdpError::InvalidDiscount(gamma))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// `Σ_t gamma^t · rewards[t]`.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> Result<f64, PomdpError> {
    let gamma = Discount::new(gamma)?.get();
    let mut total = 0.0;
    let mut weight = 1.0;
    for r in rewards {
        total += weight * r;
        weight *= gamma;
    }
    Ok(total)
}

/// Outcome of one simulator transition.
#[derive(Clone, Debug, PartialEq)]
pub struct Step<S, O> {
    pub state: S,
    pub observation: O,
    pub reward: f64,
    pub terminal: bool,
}

/// Black-box generative model of an environment instance.
///
/// `step` must depend only on its arguments and the random stream, and
/// `legal_actions` only on the observable component of the state.
pub trait Simulator {
    type State: Clone + Debug + Send + Sync;
    type Action: Copy + Eq + Hash + Debug + Send + Sync;
    type Observation: Copy + Eq + Hash + Debug + Send + Sync;
    /// Fully observable part of the state.
    type Observable: Clone + Eq + Hash + Debug + Send + Sync;

    fn step<R: Rng + ?Sized>(
        &self,
        state: &Self::State,
        action: Self::Action,
        rng: &mut R,
    ) -> Step<Self::State, Self::Observation>;

    fn observable(&self, state: &Self::State) -> Self::Observable;

    fn legal_actions(&self, observable: &Self::Observable) -> Vec<Self::Action>;

    /// True initial state of an episode on this instance.
    fn sample_initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::State;

    /// A state drawn from the prior over hidden components, consistent with
    /// the given observable component. Seeds beliefs.
    fn sample_prior_state<R: Rng + ?Sized>(
        &self,
        observable: &Self::Observable,
        rng: &mut R,
    ) -> Self::State;

    /// Reinvigoration noise applied to resampled duplicate particles.
    fn mutate_particle<R: Rng + ?Sized>(&self, state: &Self::State, rng: &mut R) -> Self::State;

    fn discount(&self) -> Discount;
}

/// Particle approximation of the belief over states.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleBelief<S> {
    particles: Vec<S>,
    capacity: usize,
}

impl<S: Clone> ParticleBelief<S> {
    pub fn new(particles: Vec<S>, capacity: usize) -> Result<Self, PomdpError> {
        if particles.is_empty() || capacity == 0 {
            return Err(PomdpError::EmptyBelief);
        }
        Ok(ParticleBelief {
            particles,
            capacity,
        })
    }

    /// `capacity` particles from the prior given the observable component.
    pub fn from_prior<M, R>(
        sim: &M,
        observable: &M::Observable,
        capacity: usize,
        rng: &mut R,
    ) -> Self
    where
        M: Simulator<State = S>,
        R: Rng + ?Sized,
    {
        let capacity = capacity.max(1);
        let particles = (0..capacity)
            .map(|_| sim.sample_prior_state(observable, rng))
            .collect();
        ParticleBelief {
            particles,
            capacity,
        }
    }

    pub fn particles(&self) -> &[S] {
        &self.particles
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &S {
        self.particles.choose(rng).expect("beliefs are never empty")
    }
}

/// Fraction of particles satisfying `pred`.
pub fn marginal_fraction<S>(belief: &ParticleBelief<S>, pred: impl Fn(&S) -> bool) -> f64 {
    let n = belief.particles.len();
    if n == 0 {
        return 0.0;
    }
    let hits = belief.particles.iter().filter(|p| pred(p)).count();
    hits as f64 / n as f64
}

/// Rejection filter with reinvigoration.
///
/// Every particle is pushed through the simulator with `action`; those that
/// reproduce `observation` without terminating survive. Survivors are kept
/// once each and the remaining slots are filled with mutated copies of
/// survivors drawn with replacement. Only call this after a non-terminal real
/// step.
pub fn belief_update<M, R>(
    belief: &ParticleBelief<M::State>,
    action: M::Action,
    observation: M::Observation,
    sim: &M,
    rng: &mut R,
) -> Result<ParticleBelief<M::State>, PomdpError>
where
    M: Simulator,
    R: Rng + ?Sized,
{
    if belief.is_empty() {
        return Err(PomdpError::EmptyBelief);
    }
    let mut survivors: Vec<M::State> = belief
        .particles
        .iter()
        .filter_map(|p| {
            let step = sim.step(p, action, rng);
            (step.observation == observation && !step.terminal).then_some(step.state)
        })
        .collect();
    if survivors.is_empty() {
        return Err(PomdpError::BeliefCollapse);
    }
    Ok(ParticleBelief {
        particles: replenish(sim, std::mem::take(&mut survivors), belief.capacity, rng),
        capacity: belief.capacity,
    })
}

/// Tops `survivors` up to `capacity` with mutated duplicates.
pub(crate) fn replenish<M, R>(
    sim: &M,
    mut survivors: Vec<M::State>,
    capacity: usize,
    rng: &mut R,
) -> Vec<M::State>
where
    M: Simulator,
    R: Rng + ?Sized,
{
    let n = survivors.len();
    if n >= capacity {
        survivors.truncate(capacity);
        return survivors;
    }
    survivors.reserve(capacity - n);
    for _ in n..capacity {
        let src = &survivors[rng.random_range(0..n)];
        let dup = sim.mutate_particle(src, rng);
        survivors.push(dup);
    }
    survivors
}

/// Purpose-specific random streams of one episode. All derive from a single
/// seed; separating them keeps, e.g., the environment's draws identical
/// whether or not rules are enabled.
#[derive(Clone, Debug)]
pub struct EpisodeRng {
    pub instance: ChaCha8Rng,
    pub environment: ChaCha8Rng,
    pub simulation: ChaCha8Rng,
    pub rollout: ChaCha8Rng,
    pub reinvigoration: ChaCha8Rng,
}

impl EpisodeRng {
    pub fn new(seed: u64) -> Self {
        let stream = |id: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(id);
            r
        };
        EpisodeRng {
            instance: stream(0),
            environment: stream(1),
            simulation: stream(2),
            rollout: stream(3),
            reinvigoration: stream(4),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discounted_return_examples() {
        assert_eq!(discounted_return(&[10.0], 0.95).unwrap(), 10.0);
        assert_eq!(discounted_return(&[], 0.95).unwrap(), 0.0);
        assert!((discounted_return(&[0.0, 0.0, 10.0], 0.95).unwrap() - 9.025).abs() < 1e-12);
        assert_eq!(discounted_return(&[3.0, 5.0], 0.0).unwrap(), 3.0);
        assert!(matches!(
            discounted_return(&[1.0], 1.5),
            Err(PomdpError::InvalidDiscount(_))
        ));
        assert!(discounted_return(&[1.0], -0.1).is_err());
    }

    #[test]
    fn marginal_counts() {
        let b = ParticleBelief::new((0..100).collect::<Vec<i32>>(), 100).unwrap();
        assert_eq!(marginal_fraction(&b, |_| true), 1.0);
        assert_eq!(marginal_fraction(&b, |_| false), 0.0);
        assert_eq!(marginal_fraction(&b, |&x| x < 73), 0.73);
    }

    #[test]
    fn streams_differ() {
        let mut r = EpisodeRng::new(5);
        let a: u64 = r.environment.random();
        let b: u64 = r.simulation.random();
        assert_ne!(a, b);
        let mut r2 = EpisodeRng::new(5);
        assert_eq!(a, r2.environment.random::<u64>());
    }
}
