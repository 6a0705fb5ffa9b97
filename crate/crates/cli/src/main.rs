use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use pomcp_rules::experiment::{
    aggregate, random_instance, run_experiment, run_instance, write_csv, write_summary_csv,
};
use pomcp_rules::ilp::{export_ilasp, filter_traces, group_by_action, is_exported, trace_cdpis};
use pomcp_rules::logic::{
    coverage, format_atoms, parse_facts, parse_program, rule_distance, solve, CdpiKind,
};
use pomcp_rules::{
    ActionVocabulary, Battery, Domain, DomainKind, ExperimentSpec, FeatureMap, InstanceConfig,
    PlannerConfig, Program, Rocksample, Symbol, Trace,
};

#[derive(Parser)]
#[command(
    name = "pomcp-rules",
    version,
    about = "POMCP planning with soft priors from learned logic rules"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan one episode and print its summary.
    Run(RunArgs),
    /// Plan seeded episodes and write one trace file per episode.
    GenTraces(GenArgs),
    /// Filter traces by return and write one ILASP task per action.
    ExportIlasp(ExportArgs),
    /// Run a paired experiment spec and write per-episode rows as CSV.
    Bench(BenchArgs),
    /// Evaluate a rule file on a facts file.
    RuleCheck(RuleCheckArgs),
    /// Distance between same-head rules of two rule files.
    RuleDiff(RuleDiffArgs),
}

#[derive(Args, Clone)]
struct InstanceArgs {
    /// Domain of a randomly generated instance (ignored with --config).
    #[arg(long, default_value = "rocksample")]
    domain: DomainKind,
    /// Instance file (TOML with `domain = ...`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Rocksample grid size of a generated instance.
    #[arg(long, default_value_t = 12)]
    grid_size: i32,
    /// Rocksample rock count of a generated instance.
    #[arg(long, default_value_t = 4)]
    rocks: usize,
    /// Battery path length of a generated instance.
    #[arg(long, default_value_t = 35)]
    path_length: i32,
    /// Overrides the instance discount factor.
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Args, Clone)]
struct PlannerArgs {
    /// Simulations per step.
    #[arg(long, default_value_t = 4096)]
    sims: usize,
    /// Particles in the belief (defaults to --sims).
    #[arg(long)]
    particles: Option<usize>,
    /// UCT exploration constant (defaults to the domain's reward span).
    #[arg(long)]
    exploration: Option<f64>,
    /// Prior visit count of rule-suggested actions.
    #[arg(long, default_value_t = 10)]
    prior_visits: u32,
    /// Maximum simulation depth.
    #[arg(long, default_value_t = 60)]
    depth: usize,
    /// Maximum number of real steps.
    #[arg(long, default_value_t = 200)]
    step_cap: usize,
    /// Rule file (defaults to the shipped rules of the domain).
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Plain POMCP without the rule prior.
    #[arg(long)]
    no_rules: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    planner: PlannerArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the trace to this file.
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    planner: PlannerArgs,
    /// Number of episodes.
    #[arg(long, default_value_t = 10)]
    count: u64,
    /// Seed of the first episode; later ones count up.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    /// Directory of `.trace` files.
    #[arg(long)]
    traces: PathBuf,
    /// Output directory for `<action>.las` files.
    #[arg(long)]
    out: PathBuf,
    /// Keep all traces instead of those with return at least the mean.
    #[arg(long)]
    no_filter: bool,
    /// Report the coverage of this rule file over the exported examples.
    #[arg(long)]
    coverage: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment spec (TOML).
    #[arg(long)]
    spec: PathBuf,
    /// Per-episode CSV.
    #[arg(long)]
    out: PathBuf,
    /// Optional per-point summary CSV.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Override the spec's episodes per sweep value.
    #[arg(long)]
    episodes: Option<usize>,
    /// Override the spec's simulations (and particles) per step.
    #[arg(long)]
    simulations: Option<usize>,
    /// Override the spec's first seed.
    #[arg(long)]
    seed_base: Option<u64>,
}

#[derive(Args)]
struct RuleCheckArgs {
    rules: PathBuf,
    /// Whitespace-separated ground atoms.
    facts: PathBuf,
    /// Action predicates; defaults to the domain's vocabulary, or to the
    /// rule heads without a domain.
    #[arg(long)]
    domain: Option<DomainKind>,
}

#[derive(Args)]
struct RuleDiffArgs {
    left: PathBuf,
    right: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run(a) => run(a),
        Command::GenTraces(a) => gen_traces(a),
        Command::ExportIlasp(a) => export(a),
        Command::Bench(a) => bench(a),
        Command::RuleCheck(a) => rule_check(a),
        Command::RuleDiff(a) => rule_diff(a),
    }
}

fn load_rules(path: &Path) -> Result<Program> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_program(&text).with_context(|| format!("parsing {}", path.display()))
}

fn instance(args: &InstanceArgs, seed: u64) -> Result<InstanceConfig> {
    let mut cfg = match &args.config {
        Some(p) => InstanceConfig::load(p)?,
        None => {
            let size = match args.domain {
                DomainKind::Rocksample => args.grid_size,
                DomainKind::Battery => args.path_length,
            };
            random_instance(args.domain, size, args.rocks, seed)?
        }
    };
    if let Some(g) = args.gamma {
        match &mut cfg {
            InstanceConfig::Rocksample(c) => c.gamma = g,
            InstanceConfig::Battery(c) => c.gamma = g,
        }
        cfg.validate()?;
    }
    Ok(cfg)
}

fn planner(args: &PlannerArgs, kind: DomainKind) -> Result<(PlannerConfig, Program)> {
    let rules = match &args.rules {
        Some(p) => load_rules(p)?,
        None => kind.shipped_rules(),
    };
    let cfg = PlannerConfig {
        num_simulations: args.sims,
        num_particles: args.particles.unwrap_or(args.sims),
        exploration_constant: args.exploration,
        prior_visits: args.prior_visits,
        rollout_depth_limit: args.depth,
        rules_enabled: !args.no_rules,
        step_cap: args.step_cap,
        ..PlannerConfig::default()
    };
    cfg.validate()?;
    Ok((cfg, rules))
}

fn run(a: RunArgs) -> Result<()> {
    let cfg = instance(&a.instance, a.seed)?;
    let (pcfg, rules) = planner(&a.planner, cfg.kind())?;
    let trace = run_instance(&cfg, &pcfg, Some(&rules), a.seed)?;
    println!("domain\t{}", trace.domain());
    println!("seed\t{}", trace.seed);
    println!("rules\t{}", pcfg.rules_enabled);
    println!("steps\t{}", trace.steps.len());
    println!("discounted_return\t{}", trace.discounted_return);
    let actions: Vec<String> = trace.steps.iter().map(|s| s.action.to_string()).collect();
    println!("actions\t{}", actions.join(" "));
    if let Some(p) = a.trace_out {
        trace
            .save(&p)
            .with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn gen_traces(a: GenArgs) -> Result<()> {
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    for seed in a.seed..a.seed + a.count {
        let cfg = instance(&a.instance, seed)?;
        let (pcfg, rules) = planner(&a.planner, cfg.kind())?;
        let trace = run_instance(&cfg, &pcfg, Some(&rules), seed)?;
        let path = a.out.join(format!("trace_{seed:06}.trace"));
        trace
            .save(&path)
            .with_context(|| format!("writing {}", path.display()))?;
        println!(
            "{}\t{}\t{}",
            path.display(),
            trace.steps.len(),
            trace.discounted_return
        );
    }
    Ok(())
}

fn read_traces(dir: &Path) -> Result<Vec<Trace>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "trace"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| Trace::load(p).with_context(|| format!("reading {}", p.display())))
        .collect()
}

fn vocabulary(cfg: &InstanceConfig) -> Result<ActionVocabulary> {
    Ok(match cfg {
        InstanceConfig::Rocksample(c) => Rocksample::new(c.clone())?.action_vocabulary(),
        InstanceConfig::Battery(c) => Battery::new(c.clone())?.action_vocabulary(),
    })
}

fn export(a: ExportArgs) -> Result<()> {
    let traces = read_traces(&a.traces)?;
    if traces.is_empty() {
        bail!("no .trace files in {}", a.traces.display());
    }
    let total = traces.len();
    let kept = if a.no_filter {
        traces
    } else {
        filter_traces(traces)?
    };
    let first = &kept[0].config;
    if kept.iter().any(|t| t.domain() != first.kind()) {
        bail!("traces mix domains");
    }
    let (domains, bias) = match first {
        InstanceConfig::Rocksample(c) => {
            let d = Rocksample::new(c.clone())?;
            (d.variable_domains(), d.mode_bias())
        }
        InstanceConfig::Battery(c) => {
            let d = Battery::new(c.clone())?;
            (d.variable_domains(), d.mode_bias())
        }
    };
    let mut cdpis = Vec::new();
    let mut predicates = BTreeSet::new();
    for (i, t) in kept.iter().enumerate() {
        let vocab = vocabulary(&t.config)?;
        predicates.extend(vocab.predicates());
        cdpis.extend(trace_cdpis(t, i, &vocab)?);
    }
    let rules = a.coverage.as_deref().map(load_rules).transpose()?;
    let groups = group_by_action(cdpis);
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    println!("traces\t{total}\tkept\t{}", kept.len());
    for p in &predicates {
        let examples = groups.get(p).map(Vec::as_slice).unwrap_or(&[]);
        let text = export_ilasp(p, examples, &domains, &bias)?;
        let path = a.out.join(format!("{p}.las"));
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        println!(
            "{}\t{}",
            path.display(),
            examples.iter().filter(|c| is_exported(c)).count()
        );
    }
    if let Some(rules) = rules {
        let scored: Vec<_> = groups
            .values()
            .flatten()
            .filter(|c| c.kind != CdpiKind::OrderingPartner)
            .collect();
        println!("coverage\t{}", coverage(&rules, scored.into_iter()));
    }
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let mut spec =
        ExperimentSpec::load(&a.spec).with_context(|| format!("reading {}", a.spec.display()))?;
    if let Some(n) = a.episodes {
        spec.episodes = n;
    }
    if let Some(n) = a.simulations {
        spec.simulations = n;
    }
    if let Some(s) = a.seed_base {
        spec.seed_base = s;
    }
    spec.validate()?;
    let rules = match &spec.rules {
        Some(r) => {
            let p = Path::new(r);
            let p = if p.is_relative() {
                a.spec.parent().unwrap_or(Path::new(".")).join(p)
            } else {
                p.to_path_buf()
            };
            load_rules(&p)?
        }
        None => spec.domain.shipped_rules(),
    };
    let rows = run_experiment(&spec, &rules, a.jobs)?;
    for r in rows.iter().filter(|r| r.is_error()) {
        eprintln!(
            "episode failed: value {} seed {} rules {}: {}",
            r.value,
            r.seed,
            r.rules,
            r.error.as_deref().unwrap_or("paired arm failed")
        );
    }
    let file = fs::File::create(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    write_csv(&rows, file)?;
    let points = aggregate(&rows);
    if let Some(p) = &a.summary {
        let file = fs::File::create(p).with_context(|| format!("writing {}", p.display()))?;
        write_summary_csv(spec.domain, spec.param.name(), &points, file)?;
    }
    for p in &points {
        let fmt = |s: Option<pomcp_rules::experiment::Summary>| {
            s.map_or("-".to_string(), |s| {
                format!("{:.3}±{:.3} (n={})", s.mean, s.std, s.count)
            })
        };
        println!(
            "{}={}\tplain {}\trules {}\timprovement {}",
            spec.param.name(),
            p.value,
            fmt(p.plain),
            fmt(p.rules),
            p.improvement
                .map_or("undefined".to_string(), |x| format!("{x:.3}"))
        );
    }
    Ok(())
}

fn rule_check(a: RuleCheckArgs) -> Result<()> {
    let program = load_rules(&a.rules)?;
    let text =
        fs::read_to_string(&a.facts).with_context(|| format!("reading {}", a.facts.display()))?;
    let facts = parse_facts(&text).with_context(|| format!("parsing {}", a.facts.display()))?;
    let actions: BTreeSet<Symbol> = match a.domain {
        Some(DomainKind::Rocksample) => {
            ["east", "west", "north", "south", "exit", "check", "sample"]
                .into_iter()
                .map(Symbol::new)
                .collect()
        }
        Some(DomainKind::Battery) => ["advance", "check", "recharge"]
            .into_iter()
            .map(Symbol::new)
            .collect(),
        None => program.head_predicates(),
    };
    let answer = solve(&program, &facts);
    let suggested: Vec<_> = answer
        .iter()
        .filter(|a| actions.contains(&a.predicate))
        .collect();
    println!("answer\t{}", format_atoms(&answer.to_set()));
    println!("suggested\t{}", format_atoms(&suggested));
    Ok(())
}

fn rule_diff(a: RuleDiffArgs) -> Result<()> {
    let left = load_rules(&a.left)?;
    let right = load_rules(&a.right)?;
    for l in left.rules() {
        for r in right
            .rules()
            .iter()
            .filter(|r| r.head.predicate == l.head.predicate)
        {
            println!("{}\t{l}\t{r}", rule_distance(l, r));
        }
    }
    Ok(())
}
