//! POMCP with an optional rule-derived action prior.
//!
//! The tree lives in an arena. Each node holds one edge per legal action;
//! an edge keeps its visit count `N(ha)`, mean value `V(ha)` and its
//! children keyed by observation. When rules are enabled, the actions the
//! rules suggest at a freshly expanded node start with `V(ha) = c` and
//! `N(ha) = n_prior`.

use std::collections::{BTreeSet, HashMap};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use thiserror::Error;

use crate::domains::{Domain, FeatureMap};
use crate::logic::{suggested_actions, FeatureSet, Program, Symbol};
use crate::pomdp::{belief_update, replenish, EpisodeRng, ParticleBelief, PomdpError, Simulator};
use crate::trace::{Trace, TraceStep};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("no legal actions at the root")]
    NoLegalActions,
    #[error("invalid planner configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Pomdp(#[from] PomdpError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlannerConfig {
    pub num_simulations: usize,
    pub num_particles: usize,
    /// UCT exploration constant; the domain's reward span when `None`.
    pub exploration_constant: Option<f64>,
    pub prior_visits: u32,
    /// Maximum depth of a simulation, tree and rollout together.
    pub rollout_depth_limit: usize,
    pub rules_enabled: bool,
    /// Maximum number of real steps in an episode.
    pub step_cap: usize,
    /// Fresh prior draws per particle slot when the belief collapses.
    pub recovery_attempts: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            num_simulations: 1 << 12,
            num_particles: 1000,
            exploration_constant: None,
            prior_visits: 10,
            rollout_depth_limit: 60,
            rules_enabled: true,
            step_cap: 200,
            recovery_attempts: 100,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlannerError> {
        let bad = |m: &str| Err(PlannerError::Config(m.to_string()));
        if self.num_simulations < 1 {
            return bad("num_simulations must be at least 1");
        }
        if self.num_particles < 1 {
            return bad("num_particles must be at least 1");
        }
        if let Some(c) = self.exploration_constant {
            if !c.is_finite() || c < 0.0 {
                return bad("exploration_constant must be finite and non-negative");
            }
        }
        Ok(())
    }
}

/// `V + c·sqrt(ln(N_h) / N_ha)`.
pub fn uct_value(v: f64, n_h: u32, n_ha: u32, c: f64) -> f64 {
    v + c * ((n_h as f64).ln() / n_ha as f64).sqrt()
}

#[derive(Clone, Debug)]
pub struct Edge<A, O> {
    pub action: A,
    pub visits: u32,
    pub value: f64,
    pub bias_applied: bool,
    children: Vec<(O, usize)>,
}

#[derive(Clone, Debug)]
pub struct SearchNode<A, O> {
    pub visits: u32,
    pub edges: Vec<Edge<A, O>>,
}

impl<A: Copy + PartialEq, O: Copy + PartialEq> SearchNode<A, O> {
    pub fn new(actions: Vec<A>) -> Self {
        SearchNode {
            visits: 0,
            edges: actions
                .into_iter()
                .map(|action| Edge {
                    action,
                    visits: 0,
                    value: 0.0,
                    bias_applied: false,
                    children: Vec::new(),
                })
                .collect(),
        }
    }

    pub fn edge(&self, action: A) -> Option<&Edge<A, O>> {
        self.edges.iter().find(|e| e.action == action)
    }

    fn child(&self, edge: usize, obs: O) -> Option<usize> {
        self.edges[edge]
            .children
            .iter()
            .find(|(o, _)| *o == obs)
            .map(|&(_, c)| c)
    }
}

/// Seeds the suggested edges with `n_prior` visits of value `c`. Edges that
/// already carry statistics blend the prior into their mean. Edges already
/// biased are left alone.
pub fn apply_bias<A: Copy + PartialEq, O>(
    node: &mut SearchNode<A, O>,
    suggested: &[A],
    c: f64,
    n_prior: u32,
) {
    for e in node.edges.iter_mut() {
        if e.bias_applied || !suggested.contains(&e.action) {
            continue;
        }
        let total = e.visits + n_prior;
        e.value = if e.visits == 0 {
            c
        } else {
            (e.value * e.visits as f64 + c * n_prior as f64) / total as f64
        };
        e.visits = total;
        e.bias_applied = true;
        node.visits += n_prior;
    }
}

/// Grounding of a node: belief atoms of the root plus the node's own
/// observable atoms.
pub fn ground_node_features<D: FeatureMap>(
    domain: &D,
    root_belief_atoms: &FeatureSet,
    observable: &D::Observable,
) -> FeatureSet {
    let mut f = root_belief_atoms.clone();
    f.extend(domain.observable_features(observable));
    f
}

/// Read-only view of a root edge.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeStats<A> {
    pub action: A,
    pub visits: u32,
    pub value: f64,
    pub bias_applied: bool,
}

type Node<D> = SearchNode<<D as Simulator>::Action, <D as Simulator>::Observation>;

/// Online planner owning the belief and the search tree of one episode.
pub struct Planner<'a, D: FeatureMap> {
    domain: &'a D,
    config: PlannerConfig,
    exploration: f64,
    gamma: f64,
    rules: Option<&'a Program>,
    action_predicates: BTreeSet<Symbol>,
    belief: ParticleBelief<D::State>,
    observable: D::Observable,
    root_belief_atoms: FeatureSet,
    /// Suggestions per observable under the current root's belief atoms.
    suggestion_cache: HashMap<D::Observable, Vec<D::Action>>,
    nodes: Vec<Node<D>>,
}

impl<'a, D: FeatureMap> Planner<'a, D> {
    pub fn new(
        domain: &'a D,
        config: PlannerConfig,
        rules: Option<&'a Program>,
        belief: ParticleBelief<D::State>,
    ) -> Result<Self, PlannerError> {
        config.validate()?;
        let observable = domain.observable(&belief.particles()[0]);
        let exploration = config
            .exploration_constant
            .unwrap_or_else(|| domain.reward_span());
        let rules = rules.filter(|_| config.rules_enabled);
        let mut planner = Planner {
            domain,
            exploration,
            gamma: domain.discount().get(),
            rules,
            action_predicates: domain.action_vocabulary().predicates(),
            root_belief_atoms: domain.belief_features(belief.particles()),
            belief,
            observable,
            suggestion_cache: HashMap::new(),
            nodes: Vec::new(),
            config,
        };
        planner.reset_tree();
        Ok(planner)
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.config
    }

    pub fn exploration_constant(&self) -> f64 {
        self.exploration
    }

    pub fn belief(&self) -> &ParticleBelief<D::State> {
        &self.belief
    }

    pub fn observable(&self) -> &D::Observable {
        &self.observable
    }

    /// Full grounding of the current root.
    pub fn root_features(&self) -> FeatureSet {
        ground_node_features(self.domain, &self.root_belief_atoms, &self.observable)
    }

    pub fn root_visits(&self) -> u32 {
        self.nodes[0].visits
    }

    pub fn root_edges(&self) -> Vec<EdgeStats<D::Action>> {
        self.nodes[0]
            .edges
            .iter()
            .map(|e| EdgeStats {
                action: e.action,
                visits: e.visits,
                value: e.value,
                bias_applied: e.bias_applied,
            })
            .collect()
    }

    pub fn tree_size(&self) -> usize {
        self.nodes.len()
    }

    /// Actions the rules suggest for the current root, if rules are on.
    pub fn root_suggestions(&mut self) -> Vec<D::Action> {
        let obs = self.observable.clone();
        self.suggestions(&obs)
    }

    fn suggestions(&mut self, observable: &D::Observable) -> Vec<D::Action> {
        let Some(rules) = self.rules else {
            return Vec::new();
        };
        if let Some(s) = self.suggestion_cache.get(observable) {
            return s.clone();
        }
        let features = ground_node_features(self.domain, &self.root_belief_atoms, observable);
        let out: Vec<D::Action> = suggested_actions(rules, &features, &self.action_predicates)
            .iter()
            .filter_map(|a| self.domain.action_from_atom(a).ok())
            .collect();
        self.suggestion_cache
            .insert(observable.clone(), out.clone());
        out
    }

    fn new_node(&mut self, observable: &D::Observable) -> Node<D> {
        let mut node = SearchNode::new(self.domain.legal_actions(observable));
        if self.rules.is_some() {
            let suggested = self.suggestions(observable);
            apply_bias(
                &mut node,
                &suggested,
                self.exploration,
                self.config.prior_visits,
            );
        }
        node
    }

    fn reset_tree(&mut self) {
        let obs = self.observable.clone();
        self.nodes.clear();
        let root = self.new_node(&obs);
        self.nodes.push(root);
    }

    /// Runs the configured number of simulations and returns the action
    /// with the highest value at the root.
    pub fn search<R1: Rng + ?Sized, R2: Rng + ?Sized>(
        &mut self,
        sim_rng: &mut R1,
        rollout_rng: &mut R2,
    ) -> Result<D::Action, PlannerError> {
        if self.nodes[0].edges.is_empty() {
            return Err(PlannerError::NoLegalActions);
        }
        for _ in 0..self.config.num_simulations {
            let state = self.belief.sample(sim_rng).clone();
            self.simulate(state, sim_rng, rollout_rng);
        }
        Ok(self.best_action(sim_rng))
    }

    fn best_action<R: Rng + ?Sized>(&self, rng: &mut R) -> D::Action {
        let root = &self.nodes[0];
        let visited: Vec<&Edge<_, _>> = root.edges.iter().filter(|e| e.visits > 0).collect();
        let pool: Vec<&Edge<_, _>> = if visited.is_empty() {
            root.edges.iter().collect()
        } else {
            visited
        };
        let best = pool
            .iter()
            .map(|e| e.value)
            .fold(f64::NEG_INFINITY, f64::max);
        let ties: Vec<D::Action> = pool
            .iter()
            .filter(|e| e.value == best)
            .map(|e| e.action)
            .collect();
        *ties.choose(rng).expect("root has edges")
    }

    fn select<R: Rng + ?Sized>(&self, node: usize, rng: &mut R) -> usize {
        let n = &self.nodes[node];
        let unvisited: Vec<usize> = (0..n.edges.len())
            .filter(|&i| n.edges[i].visits == 0)
            .collect();
        if let Some(&i) = unvisited.choose(rng) {
            return i;
        }
        let mut best = f64::NEG_INFINITY;
        let mut ties: Vec<usize> = Vec::new();
        for (i, e) in n.edges.iter().enumerate() {
            let u = uct_value(e.value, n.visits, e.visits, self.exploration);
            if u > best {
                best = u;
                ties.clear();
                ties.push(i);
            } else if u == best {
                ties.push(i);
            }
        }
        *ties.choose(rng).expect("node has edges")
    }

    fn simulate<R1: Rng + ?Sized, R2: Rng + ?Sized>(
        &mut self,
        mut state: D::State,
        sim_rng: &mut R1,
        rollout_rng: &mut R2,
    ) {
        let limit = self.config.rollout_depth_limit;
        let mut path: Vec<(usize, usize, f64)> = Vec::new();
        let mut node = 0;
        let mut leaf = 0.0;
        let mut depth = 0;
        while depth < limit {
            if self.nodes[node].edges.is_empty() {
                break;
            }
            let e = self.select(node, sim_rng);
            self.nodes[node].visits += 1;
            let action = self.nodes[node].edges[e].action;
            let step = self.domain.step(&state, action, sim_rng);
            path.push((node, e, step.reward));
            depth += 1;
            if step.terminal {
                break;
            }
            state = step.state;
            match self.nodes[node].child(e, step.observation) {
                Some(c) => node = c,
                None => {
                    let obs = self.domain.observable(&state);
                    let child = self.new_node(&obs);
                    let id = self.nodes.len();
                    self.nodes.push(child);
                    self.nodes[node].edges[e]
                        .children
                        .push((step.observation, id));
                    leaf = self.rollout(state, depth, rollout_rng);
                    break;
                }
            }
        }
        let mut ret = leaf;
        for &(node, e, r) in path.iter().rev() {
            ret = r + self.gamma * ret;
            let edge = &mut self.nodes[node].edges[e];
            edge.visits += 1;
            edge.value += (ret - edge.value) / edge.visits as f64;
        }
    }

    fn rollout<R: Rng + ?Sized>(&self, mut state: D::State, mut depth: usize, rng: &mut R) -> f64 {
        let mut total = 0.0;
        let mut weight = 1.0;
        while depth < self.config.rollout_depth_limit {
            let actions = self.domain.legal_actions(&self.domain.observable(&state));
            let Some(&a) = actions.choose(rng) else { break };
            let step = self.domain.step(&state, a, rng);
            total += weight * step.reward;
            weight *= self.gamma;
            depth += 1;
            if step.terminal {
                break;
            }
            state = step.state;
        }
        total
    }

    /// Moves the root after a real step: filters the belief, reuses the
    /// matching subtree and re-grounds the new root from the new belief.
    pub fn advance<R: Rng + ?Sized>(
        &mut self,
        action: D::Action,
        observation: D::Observation,
        rng: &mut R,
    ) -> Result<(), PlannerError> {
        let belief = match belief_update(&self.belief, action, observation, self.domain, rng) {
            Ok(b) => b,
            Err(PomdpError::BeliefCollapse) => self.recover(action, observation, rng)?,
            Err(e) => return Err(e.into()),
        };
        let child = self.nodes[0]
            .edges
            .iter()
            .position(|e| e.action == action)
            .and_then(|e| self.nodes[0].child(e, observation));
        self.observable = self.domain.observable(&belief.particles()[0]);
        self.root_belief_atoms = self.domain.belief_features(belief.particles());
        self.belief = belief;
        self.suggestion_cache.clear();
        match child {
            Some(c) => {
                self.nodes = extract_subtree(std::mem::take(&mut self.nodes), c);
                if self.rules.is_some() {
                    let obs = self.observable.clone();
                    let suggested = self.suggestions(&obs);
                    apply_bias(
                        &mut self.nodes[0],
                        &suggested,
                        self.exploration,
                        self.config.prior_visits,
                    );
                }
            }
            None => self.reset_tree(),
        }
        Ok(())
    }

    /// Rebuilds a belief from the prior when no particle explains the
    /// observation.
    fn recover<R: Rng + ?Sized>(
        &self,
        action: D::Action,
        observation: D::Observation,
        rng: &mut R,
    ) -> Result<ParticleBelief<D::State>, PlannerError> {
        let capacity = self.belief.capacity();
        let mut survivors = Vec::new();
        for _ in 0..capacity * self.config.recovery_attempts {
            let s = self.domain.sample_prior_state(&self.observable, rng);
            let step = self.domain.step(&s, action, rng);
            if step.observation == observation && !step.terminal {
                survivors.push(step.state);
                if survivors.len() == capacity {
                    break;
                }
            }
        }
        if survivors.is_empty() {
            return Err(PomdpError::BeliefCollapse.into());
        }
        let particles = replenish(self.domain, survivors, capacity, rng);
        Ok(ParticleBelief::new(particles, capacity)?)
    }
}

/// Copies the subtree under `root` into a fresh arena with `root` first.
fn extract_subtree<A: Copy, O: Copy>(
    mut nodes: Vec<SearchNode<A, O>>,
    root: usize,
) -> Vec<SearchNode<A, O>> {
    let mut out: Vec<SearchNode<A, O>> = Vec::new();
    let mut queue = vec![(root, 0usize)];
    out.push(SearchNode {
        visits: 0,
        edges: Vec::new(),
    });
    while let Some((old, new)) = queue.pop() {
        let mut node = std::mem::replace(
            &mut nodes[old],
            SearchNode {
                visits: 0,
                edges: Vec::new(),
            },
        );
        for e in node.edges.iter_mut() {
            for (_, child) in e.children.iter_mut() {
                let id = out.len();
                out.push(SearchNode {
                    visits: 0,
                    edges: Vec::new(),
                });
                queue.push((*child, id));
                *child = id;
            }
        }
        out[new] = node;
    }
    out
}

/// One search from a given belief with a throwaway tree.
pub fn search<D: FeatureMap, R: Rng + ?Sized>(
    domain: &D,
    belief: ParticleBelief<D::State>,
    config: &PlannerConfig,
    rules: Option<&Program>,
    rng: &mut R,
) -> Result<D::Action, PlannerError> {
    let mut planner = Planner::new(domain, config.clone(), rules, belief)?;
    let mut rollout = rand_chacha::ChaCha8Rng::seed_from_u64(rng.random());
    planner.search(rng, &mut rollout)
}

/// Plays one episode on `domain` from the seed's initial state and records
/// its trace.
pub fn plan_episode<D: Domain>(
    domain: &D,
    config: &PlannerConfig,
    rules: Option<&Program>,
    seed: u64,
) -> Result<Trace, PlannerError> {
    let mut rng = EpisodeRng::new(seed);
    let mut state = domain.sample_initial_state(&mut rng.instance);
    let start = domain.observable(&state);
    let belief = ParticleBelief::from_prior(
        domain,
        &start,
        config.num_particles,
        &mut rng.reinvigoration,
    );
    let mut planner = Planner::new(domain, config.clone(), rules, belief)?;
    let mut steps = Vec::new();
    for t in 0..config.step_cap {
        let action = planner.search(&mut rng.simulation, &mut rng.rollout)?;
        let observable = domain.observable(&state);
        let features = planner.root_features();
        let result = domain.step(&state, action, &mut rng.environment);
        steps.push(TraceStep {
            t,
            features,
            action: domain.action_atom(action, &observable),
            reward: result.reward,
        });
        if result.terminal {
            break;
        }
        state = result.state;
        planner.advance(action, result.observation, &mut rng.reinvigoration)?;
    }
    Ok(Trace::new(domain.instance_config(), seed, steps))
}
