//! Paired benchmark runs: every (sweep value, seed) is played once with
//! rules and once without, on the same instance and random streams.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domains::{
    Battery, BatteryConfig, DomainError, DomainKind, InstanceConfig, Rocksample, RocksampleConfig,
};
use crate::logic::Program;
use crate::planner::{plan_episode, PlannerConfig, PlannerError};
use crate::trace::Trace;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("spec parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Particles and simulations per step (kept equal).
    Particles,
    GridSize,
    PathLength,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Particles => "particles",
            SweepParam::GridSize => "grid_size",
            SweepParam::PathLength => "path_length",
        }
    }
}

fn default_episodes() -> usize {
    25
}
fn default_simulations() -> usize {
    1 << 12
}
fn default_grid() -> i32 {
    12
}
fn default_rocks() -> usize {
    4
}
fn default_path() -> i32 {
    35
}
fn default_prior() -> u32 {
    10
}
fn default_depth() -> usize {
    60
}
fn default_cap() -> usize {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub domain: DomainKind,
    pub param: SweepParam,
    pub values: Vec<i64>,
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    /// Rule file; the shipped rules of the domain when absent.
    #[serde(default)]
    pub rules: Option<String>,
    #[serde(default)]
    pub seed_base: u64,
    /// Particles and simulations when they are not the swept parameter.
    #[serde(default = "default_simulations")]
    pub simulations: usize,
    #[serde(default = "default_grid")]
    pub grid_size: i32,
    #[serde(default = "default_rocks")]
    pub num_rocks: usize,
    #[serde(default = "default_path")]
    pub path_length: i32,
    #[serde(default)]
    pub exploration_constant: Option<f64>,
    #[serde(default = "default_prior")]
    pub prior_visits: u32,
    #[serde(default = "default_depth")]
    pub rollout_depth_limit: usize,
    #[serde(default = "default_cap")]
    pub step_cap: usize,
}

impl ExperimentSpec {
    pub fn new(domain: DomainKind, param: SweepParam, values: Vec<i64>, episodes: usize) -> Self {
        ExperimentSpec {
            domain,
            param,
            values,
            episodes,
            rules: None,
            seed_base: 0,
            simulations: default_simulations(),
            grid_size: default_grid(),
            num_rocks: default_rocks(),
            path_length: default_path(),
            exploration_constant: None,
            prior_visits: default_prior(),
            rollout_depth_limit: default_depth(),
            step_cap: default_cap(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let spec: ExperimentSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Spec(m));
        if self.episodes < 1 {
            return bad("episodes must be at least 1".into());
        }
        if self.simulations < 1 {
            return bad("simulations must be at least 1".into());
        }
        if self.values.is_empty() {
            return bad("values must not be empty".into());
        }
        if self.values.windows(2).any(|w| w[0] >= w[1]) {
            return bad("sweep values must be strictly increasing".into());
        }
        let ok_param = match self.param {
            SweepParam::Particles => true,
            SweepParam::GridSize => self.domain == DomainKind::Rocksample,
            SweepParam::PathLength => self.domain == DomainKind::Battery,
        };
        if !ok_param {
            return bad(format!(
                "{} cannot be swept for {}",
                self.param.name(),
                self.domain
            ));
        }
        if self.values.iter().any(|&v| v < 1) {
            return bad("sweep values must be positive".into());
        }
        Ok(())
    }

    /// Planner settings at one sweep value.
    pub fn planner_config(&self, value: i64, rules_enabled: bool) -> PlannerConfig {
        let n = match self.param {
            SweepParam::Particles => value as usize,
            _ => self.simulations,
        };
        PlannerConfig {
            num_simulations: n,
            num_particles: n,
            exploration_constant: self.exploration_constant,
            prior_visits: self.prior_visits,
            rollout_depth_limit: self.rollout_depth_limit,
            rules_enabled,
            step_cap: self.step_cap,
            ..PlannerConfig::default()
        }
    }

    /// The instance played at one sweep value with one seed.
    pub fn instance(&self, value: i64, seed: u64) -> Result<InstanceConfig, DomainError> {
        let size = match self.param {
            SweepParam::GridSize | SweepParam::PathLength => value as i32,
            SweepParam::Particles => match self.domain {
                DomainKind::Rocksample => self.grid_size,
                DomainKind::Battery => self.path_length,
            },
        };
        random_instance(self.domain, size, self.num_rocks, seed)
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.episodes as u64).map(move |i| self.seed_base + i)
    }
}

/// A random layout (rock cells and start, or stations) drawn from `seed`.
pub fn random_instance(
    kind: DomainKind,
    size: i32,
    num_rocks: usize,
    seed: u64,
) -> Result<InstanceConfig, DomainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(5);
    let config = match kind {
        DomainKind::Rocksample => {
            if size < 1 {
                return Err(DomainError::Config(format!(
                    "grid size must be positive, got {size}"
                )));
            }
            InstanceConfig::Rocksample(RocksampleConfig::random(size, num_rocks, &mut rng))
        }
        DomainKind::Battery => {
            if size < 1 {
                return Err(DomainError::Config(format!(
                    "path length must be positive, got {size}"
                )));
            }
            InstanceConfig::Battery(BatteryConfig::random(size, &mut rng))
        }
    };
    config.validate()?;
    Ok(config)
}

/// Plays one episode on any instance configuration.
pub fn run_instance(
    config: &InstanceConfig,
    planner: &PlannerConfig,
    rules: Option<&Program>,
    seed: u64,
) -> Result<Trace, RunError> {
    match config {
        InstanceConfig::Rocksample(c) => Ok(plan_episode(
            &Rocksample::new(c.clone())?,
            planner,
            rules,
            seed,
        )?),
        InstanceConfig::Battery(c) => Ok(plan_episode(
            &Battery::new(c.clone())?,
            planner,
            rules,
            seed,
        )?),
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
}

/// One episode of one arm. Error rows have no return.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub domain: DomainKind,
    pub param: String,
    pub value: i64,
    pub seed: u64,
    pub rules: bool,
    pub discounted_return: Option<f64>,
    pub wall_time_s: f64,
    pub steps: Option<usize>,
    #[serde(skip)]
    pub error: Option<String>,
}

impl ResultRow {
    pub fn is_error(&self) -> bool {
        self.discounted_return.is_none()
    }
}

/// Runs every (value, seed, arm) on a pool of `jobs` threads. Rows come
/// back in (value, seed, plain-then-rules) order. A failing episode turns
/// both rows of its pair into error rows.
pub fn run_experiment(
    spec: &ExperimentSpec,
    rules: &Program,
    jobs: usize,
) -> Result<Vec<ResultRow>, ExperimentError> {
    spec.validate()?;
    let mut tasks = Vec::new();
    for &value in &spec.values {
        for seed in spec.seeds() {
            tasks.push((value, seed));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| ExperimentError::Pool(e.to_string()))?;
    let rows: Vec<[ResultRow; 2]> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(value, seed)| {
                let mut pair = [false, true].map(|on| run_arm(spec, rules, value, seed, on));
                if pair.iter().any(ResultRow::is_error) {
                    let msg = pair.iter().find_map(|r| r.error.clone());
                    for r in pair.iter_mut() {
                        r.discounted_return = None;
                        r.steps = None;
                        r.error = r.error.clone().or_else(|| msg.clone());
                    }
                }
                pair
            })
            .collect()
    });
    Ok(rows.into_iter().flatten().collect())
}

fn run_arm(
    spec: &ExperimentSpec,
    rules: &Program,
    value: i64,
    seed: u64,
    rules_on: bool,
) -> ResultRow {
    let start = Instant::now();
    let result = spec
        .instance(value, seed)
        .map_err(RunError::from)
        .and_then(|cfg| {
            run_instance(
                &cfg,
                &spec.planner_config(value, rules_on),
                Some(rules),
                seed,
            )
        });
    let wall_time_s = start.elapsed().as_secs_f64();
    let (discounted_return, steps, error) = match result {
        Ok(t) => (Some(t.discounted_return), Some(t.steps.len()), None),
        Err(e) => (None, None, Some(e.to_string())),
    };
    ResultRow {
        domain: spec.domain,
        param: spec.param.name().to_string(),
        value,
        seed,
        rules: rules_on,
        discounted_return,
        wall_time_s,
        steps,
        error,
    }
}

pub fn write_csv<W: Write>(rows: &[ResultRow], w: W) -> Result<(), ExperimentError> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<ResultRow>, ExperimentError> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut rows = Vec::new();
    for row in rdr.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

/// Mean, sample standard deviation (n − 1) and count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    Some(Summary {
        mean,
        std,
        count: n,
    })
}

/// Below this magnitude of the plain mean the improvement ratio is undefined.
pub const RATIO_EPSILON: f64 = 1e-9;

/// `(mean_rules − mean_plain) / |mean_plain|`.
pub fn improvement_ratio(mean_rules: f64, mean_plain: f64) -> Option<f64> {
    (mean_plain.abs() >= RATIO_EPSILON).then(|| (mean_rules - mean_plain) / mean_plain.abs())
}

/// Percentile bootstrap interval of the improvement ratio, resampling
/// seeds with both arms kept together.
pub fn paired_bootstrap_ci(
    pairs: &[(f64, f64)],
    level: f64,
    resamples: usize,
    seed: u64,
) -> Option<(f64, f64)> {
    if pairs.is_empty() {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = pairs.len();
    let mut ratios = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let (mut plain, mut rules) = (0.0, 0.0);
        for _ in 0..n {
            let (p, r) = pairs[rng.random_range(0..n)];
            plain += p;
            rules += r;
        }
        if let Some(x) = improvement_ratio(rules / n as f64, plain / n as f64) {
            ratios.push(x);
        }
    }
    if ratios.is_empty() {
        return None;
    }
    ratios.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    let pick =
        |q: f64| ratios[((q * (ratios.len() - 1) as f64).round() as usize).min(ratios.len() - 1)];
    Some((pick(alpha), pick(1.0 - alpha)))
}

/// Statistics at one sweep value.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSummary {
    pub value: i64,
    pub plain: Option<Summary>,
    pub rules: Option<Summary>,
    pub improvement: Option<f64>,
    /// 90% paired bootstrap interval of the improvement ratio.
    pub ci: Option<(f64, f64)>,
    pub errors: usize,
}

pub const CI_LEVEL: f64 = 0.9;
pub const BOOTSTRAP_RESAMPLES: usize = 2000;

pub fn aggregate(rows: &[ResultRow]) -> Vec<PointSummary> {
    let mut by_value: BTreeMap<i64, Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        by_value.entry(r.value).or_default().push(r);
    }
    by_value
        .into_iter()
        .map(|(value, rows)| {
            let arm = |on: bool| -> Vec<f64> {
                rows.iter()
                    .filter(|r| r.rules == on)
                    .filter_map(|r| r.discounted_return)
                    .collect()
            };
            let plain = summarize(&arm(false));
            let rules = summarize(&arm(true));
            let improvement = match (plain, rules) {
                (Some(p), Some(r)) => improvement_ratio(r.mean, p.mean),
                _ => None,
            };
            let mut by_seed: BTreeMap<u64, [Option<f64>; 2]> = BTreeMap::new();
            for r in &rows {
                by_seed.entry(r.seed).or_default()[usize::from(r.rules)] = r.discounted_return;
            }
            let pairs: Vec<(f64, f64)> = by_seed
                .values()
                .filter_map(|[p, r]| Some(((*p)?, (*r)?)))
                .collect();
            PointSummary {
                value,
                plain,
                rules,
                improvement,
                ci: paired_bootstrap_ci(&pairs, CI_LEVEL, BOOTSTRAP_RESAMPLES, value as u64),
                errors: rows.iter().filter(|r| r.is_error()).count(),
            }
        })
        .collect()
}

/// Summary table as CSV; the standard deviation column is the sample one.
pub fn write_summary_csv<W: Write>(
    domain: DomainKind,
    param: &str,
    points: &[PointSummary],
    w: W,
) -> Result<(), ExperimentError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "domain",
        "param",
        "value",
        "arm",
        "mean",
        "std_sample",
        "count",
        "improvement",
        "ci90_low",
        "ci90_high",
    ])?;
    let f = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for p in points {
        for (arm, s) in [("plain", p.plain), ("rules", p.rules)] {
            let (imp, lo, hi) = if arm == "rules" {
                (f(p.improvement), f(p.ci.map(|c| c.0)), f(p.ci.map(|c| c.1)))
            } else {
                Default::default()
            };
            out.write_record([
                domain.name().to_string(),
                param.to_string(),
                p.value.to_string(),
                arm.to_string(),
                f(s.map(|s| s.mean)),
                f(s.map(|s| s.std)),
                s.map_or(0, |s| s.count).to_string(),
                imp,
                lo,
                hi,
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}
