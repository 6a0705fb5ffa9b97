//! Execution traces and their line-based file format.
//!
//! ```text
//! pomcp-trace  1
//! domain  rocksample
//! config_digest  <sha256 of the config json>
//! seed  7
//! gamma  0.95
//! discounted_return  18.5
//! config  {"domain":"rocksample",...}
//! step  0  sample(2)  10  guess(1,70) guess(2,80) ...
//! ```
//!
//! Fields are tab separated. Step lines carry the index, the executed action
//! atom, the reward and the space-separated feature atoms of the root
//! belief at decision time.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::domains::{DomainKind, InstanceConfig};
use crate::logic::{format_atoms, parse_facts, FeatureSet, GroundAtom};
use crate::pomdp::discounted_return;

pub const TRACE_MAGIC: &str = "pomcp-trace";
pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported trace version `{0}` (expected {TRACE_VERSION})")]
    UnsupportedVersion(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

fn parse_err(line: usize, message: impl Into<String>) -> TraceError {
    TraceError::Parse {
        line,
        message: message.into(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceStep {
    pub t: usize,
    pub features: FeatureSet,
    pub action: GroundAtom,
    pub reward: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub config: InstanceConfig,
    pub seed: u64,
    pub steps: Vec<TraceStep>,
    pub discounted_return: f64,
}

impl Trace {
    /// Builds a trace, computing its discounted return from the step rewards.
    pub fn new(config: InstanceConfig, seed: u64, steps: Vec<TraceStep>) -> Self {
        let rewards: Vec<f64> = steps.iter().map(|s| s.reward).collect();
        let discounted_return =
            discounted_return(&rewards, config.gamma()).expect("validated config");
        Trace {
            config,
            seed,
            steps,
            discounted_return,
        }
    }

    pub fn domain(&self) -> DomainKind {
        self.config.kind()
    }

    pub fn gamma(&self) -> f64 {
        self.config.gamma()
    }

    pub fn to_text(&self) -> String {
        let json = config_json(&self.config);
        let mut out = String::new();
        let _ = writeln!(out, "{TRACE_MAGIC}\t{TRACE_VERSION}");
        let _ = writeln!(out, "domain\t{}", self.domain());
        let _ = writeln!(out, "config_digest\t{}", digest(&json));
        let _ = writeln!(out, "seed\t{}", self.seed);
        let _ = writeln!(out, "gamma\t{}", self.gamma());
        let _ = writeln!(out, "discounted_return\t{}", self.discounted_return);
        let _ = writeln!(out, "config\t{json}");
        for s in &self.steps {
            let _ = writeln!(
                out,
                "step\t{}\t{}\t{}\t{}",
                s.t,
                s.action,
                s.reward,
                format_atoms(&s.features)
            );
        }
        out
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), TraceError> {
        w.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), TraceError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self, TraceError> {
        let lines: Vec<String> = r.lines().collect::<Result<_, _>>()?;
        parse_lines(&lines)
    }

    pub fn load(path: &Path) -> Result<Self, TraceError> {
        let text = std::fs::read_to_string(path)?;
        text.parse()
    }
}

impl std::str::FromStr for Trace {
    type Err = TraceError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let lines: Vec<String> = text.lines().map(str::to_string).collect();
        parse_lines(&lines)
    }
}

fn config_json(config: &InstanceConfig) -> String {
    serde_json::to_string(config).expect("instance configs serialize")
}

/// Hex SHA-256 of a string.
pub fn digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Digest identifying an instance configuration.
pub fn config_digest(config: &InstanceConfig) -> String {
    digest(&config_json(config))
}

fn header<'a>(lines: &'a [String], idx: usize, key: &str) -> Result<&'a str, TraceError> {
    let line = lines
        .get(idx)
        .ok_or_else(|| parse_err(idx + 1, format!("missing `{key}` header")))?;
    match line.split_once('\t') {
        Some((k, v)) if k == key => Ok(v),
        _ => Err(parse_err(idx + 1, format!("expected `{key}` header"))),
    }
}

fn parse_num<T: std::str::FromStr>(s: &str, line: usize, what: &str) -> Result<T, TraceError> {
    s.parse()
        .map_err(|_| parse_err(line, format!("invalid {what} `{s}`")))
}

fn parse_lines(lines: &[String]) -> Result<Trace, TraceError> {
    let version = header(lines, 0, TRACE_MAGIC)?;
    if version != TRACE_VERSION.to_string() {
        return Err(TraceError::UnsupportedVersion(version.to_string()));
    }
    let domain: DomainKind = header(lines, 1, "domain")?
        .parse()
        .map_err(|e: crate::domains::DomainError| parse_err(2, e.to_string()))?;
    let digest_hex = header(lines, 2, "config_digest")?;
    let seed: u64 = parse_num(header(lines, 3, "seed")?, 4, "seed")?;
    let gamma: f64 = parse_num(header(lines, 4, "gamma")?, 5, "gamma")?;
    let ret: f64 = parse_num(
        header(lines, 5, "discounted_return")?,
        6,
        "discounted_return",
    )?;
    let json = header(lines, 6, "config")?;
    let config: InstanceConfig =
        serde_json::from_str(json).map_err(|e| parse_err(7, format!("invalid config: {e}")))?;
    config.validate().map_err(|e| parse_err(7, e.to_string()))?;
    if config.kind() != domain {
        return Err(parse_err(
            7,
            format!("config is for {}, header says {domain}", config.kind()),
        ));
    }
    if digest(json) != digest_hex {
        return Err(parse_err(3, "config digest does not match config"));
    }
    if config.gamma() != gamma {
        return Err(parse_err(5, "gamma does not match config"));
    }

    let mut steps = Vec::new();
    for (i, line) in lines.iter().enumerate().skip(7) {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 || fields[0] != "step" {
            return Err(parse_err(
                n,
                "expected `step<TAB>t<TAB>action<TAB>reward<TAB>atoms`",
            ));
        }
        let t: usize = parse_num(fields[1], n, "step index")?;
        let action: GroundAtom = fields[2]
            .parse()
            .map_err(|e| parse_err(n, format!("invalid action: {e}")))?;
        let reward: f64 = parse_num(fields[3], n, "reward")?;
        let features =
            parse_facts(fields[4]).map_err(|e| parse_err(n, format!("invalid features: {e}")))?;
        steps.push(TraceStep {
            t,
            features,
            action,
            reward,
        });
    }
    let trace = Trace::new(config, seed, steps);
    let tol = 1e-9 * (1.0 + ret.abs());
    if (trace.discounted_return - ret).abs() > tol {
        return Err(parse_err(
            6,
            format!(
                "discounted_return {ret} disagrees with step rewards ({})",
                trace.discounted_return
            ),
        ));
    }
    Ok(Trace {
        discounted_return: ret,
        ..trace
    })
}
