use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use archport::agent::{
    build_benchmark, run_benchmark, validate_trace, AgentConfig, BenchOptions, NullReasoner, Reasoner, RuleReasoner,
    RuleTable, SubprocessReasoner,
};
use archport::fleet::{generate_fleet, load_fleet, save_fleet, FleetParams};
use archport::oracle::DefectClass;
use archport::sim::{run_scenario, run_scenario_on, ScenarioConfig};
use archport::taxonomy::{
    aggregate, batch_classify, grade_automatability, read_corpus, time_series, write_corpus, Classifier,
    ExternalClassifier, ExternalGrader, Grader, HeuristicClassifier, PlaceholderGrader, DEFAULT_BATCH_SIZE,
    DEFAULT_BUCKET_DAYS, DEFAULT_GRADE_CAP, DEFAULT_MEGA_THRESHOLD,
};

#[derive(Parser)]
#[command(
    name = "archport",
    version,
    about = "Deterministic x86-to-Arm fleet migration simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fleet snapshots.
    #[command(subcommand)]
    Fleet(FleetCmd),
    /// Migration scenarios.
    #[command(subcommand)]
    Migrate(MigrateCmd),
    /// Fix agent tools.
    #[command(subcommand)]
    Agent(AgentCmd),
    /// Label every commit of a corpus.
    Classify(ClassifyArgs),
    /// Category statistics, time series and automatability grades of a corpus.
    Report(ReportArgs),
}

#[derive(Subcommand)]
enum FleetCmd {
    /// Generate a fleet snapshot.
    Gen(FleetGenArgs),
}

#[derive(Subcommand)]
enum MigrateCmd {
    /// Run a scenario and write its report directory.
    Run(MigrateRunArgs),
}

#[derive(Subcommand)]
enum AgentCmd {
    /// Run the revert-based benchmark.
    Bench(BenchArgs),
}

#[derive(Args)]
struct FleetGenArgs {
    #[arg(long, default_value_t = 500)]
    packages: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Fleet parameters as TOML; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    owners: Option<usize>,
    #[arg(long)]
    cells: Option<usize>,
    /// Expected injected defects per package.
    #[arg(long)]
    defect_rate: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MigrateRunArgs {
    /// Fleet snapshot to migrate; generated from the scenario when omitted.
    #[arg(long)]
    fleet: Option<PathBuf>,
    /// Scenario as TOML.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    days: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    no_agent: bool,
    #[arg(long)]
    no_sanitizers: bool,
    /// Output directory.
    #[arg(long)]
    report: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReasonerKind {
    Rules,
    Null,
    Cmd,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 245)]
    cases: usize,
    #[arg(long, value_enum, default_value_t = ReasonerKind::Rules)]
    reasoner: ReasonerKind,
    /// Comma-separated defect classes the rule table covers (rules reasoner).
    #[arg(long, value_delimiter = ',')]
    rules: Option<Vec<String>>,
    /// Fleet to draw cases from; generated with --packages when omitted.
    #[arg(long)]
    fleet: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    packages: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    step_limit: Option<u32>,
    #[arg(long)]
    no_sanitizers: bool,
    /// Cases run at once.
    #[arg(long)]
    jobs: Option<usize>,
    /// BenchReport JSON; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// One agent trace per line.
    #[arg(long)]
    traces: Option<PathBuf>,
    /// Reasoner command line (with --reasoner cmd), after `--`.
    #[arg(last = true)]
    command: Vec<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ClassifierKind {
    Heuristic,
    Cmd,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Labelled corpus, one record per line.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    batch_size: usize,
    #[arg(long, value_enum, default_value_t = ClassifierKind::Heuristic)]
    classifier: ClassifierKind,
    /// Accepted for uniformity; classification is deterministic.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Classifier command line (with --classifier cmd), after `--`.
    #[arg(last = true)]
    command: Vec<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GraderKind {
    Placeholder,
    Cmd,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BUCKET_DAYS)]
    bucket_days: u32,
    /// Time-series horizon; defaults to the day after the last commit.
    #[arg(long)]
    horizon_days: Option<u32>,
    #[arg(long, default_value_t = DEFAULT_MEGA_THRESHOLD)]
    mega_threshold: u64,
    /// Commits graded per category.
    #[arg(long, default_value_t = DEFAULT_GRADE_CAP)]
    grade_cap: usize,
    #[arg(long, value_enum, default_value_t = GraderKind::Placeholder)]
    grader: GraderKind,
    /// Seeds the per-category grading sample.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Grader command line (with --grader cmd), after `--`.
    #[arg(last = true)]
    command: Vec<String>,
}

enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

type Outcome = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
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
    let result = match cli.command {
        Command::Fleet(FleetCmd::Gen(a)) => fleet_gen(a),
        Command::Migrate(MigrateCmd::Run(a)) => migrate_run(a),
        Command::Agent(AgentCmd::Bench(a)) => agent_bench(a),
        Command::Classify(a) => classify(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            eprintln!("\nFor more information, try '--help'.");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn create(path: &Path) -> anyhow::Result<BufWriter<fs::File>> {
    let f = fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn fleet_gen(a: FleetGenArgs) -> Outcome {
    let mut params = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            toml::from_str::<FleetParams>(&text)
                .with_context(|| format!("invalid fleet parameters in {}", path.display()))?
        }
        None => FleetParams::default(),
    };
    params.seed = a.seed;
    params.n_packages = a.packages;
    if let Some(n) = a.owners {
        params.n_owners = n;
    }
    if let Some(n) = a.cells {
        params.n_cells = n;
    }
    if let Some(r) = a.defect_rate {
        params.defect_rate = r;
    }
    let fleet = generate_fleet(&params).context("fleet generation failed")?;
    save_fleet(&fleet, &a.out).with_context(|| format!("cannot write {}", a.out.display()))?;
    println!(
        "wrote {} ({} packages, {} jobs, fingerprint {})",
        a.out.display(),
        fleet.packages.len(),
        fleet.jobs.len(),
        fleet.fingerprint()
    );
    Ok(())
}

fn migrate_run(a: MigrateRunArgs) -> Outcome {
    let mut cfg = match &a.config {
        Some(path) => ScenarioConfig::load(path).with_context(|| format!("invalid scenario {}", path.display()))?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
        cfg.fleet.seed = seed;
    }
    if let Some(days) = a.days {
        cfg.days = days;
    }
    if a.no_agent {
        cfg.agent = false;
    }
    if a.no_sanitizers {
        cfg.sanitizers = false;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let out = match &a.fleet {
        Some(path) => {
            let fleet = load_fleet(path).with_context(|| format!("cannot load fleet {}", path.display()))?;
            run_scenario_on(&cfg, fleet)
        }
        None => run_scenario(&cfg),
    }
    .context("scenario failed")?;
    out.write_to(&a.report)
        .with_context(|| format!("cannot write {}", a.report.display()))?;
    let r = &out.report;
    println!(
        "days={} packages={} jobs={} final_qualified_fraction={:.6} commits={} automated={} report={}",
        r.days,
        r.packages,
        r.jobs,
        r.final_qualified_fraction,
        r.commits,
        r.automated_commits,
        a.report.join("report.json").display()
    );
    Ok(())
}

fn parse_classes(names: &[String]) -> Result<Vec<DefectClass>, Failure> {
    names
        .iter()
        .filter(|n| !n.is_empty())
        .map(|n| DefectClass::parse(n.trim()).ok_or_else(|| usage(format!("unknown defect class '{n}'"))))
        .collect()
}

fn agent_bench(a: BenchArgs) -> Outcome {
    match a.reasoner {
        ReasonerKind::Cmd if a.command.is_empty() => {
            return Err(usage("--reasoner cmd needs a command after `--`"));
        }
        ReasonerKind::Rules | ReasonerKind::Null if !a.command.is_empty() => {
            return Err(usage("a reasoner command is only accepted with --reasoner cmd"));
        }
        _ => {}
    }
    if a.rules.is_some() && a.reasoner != ReasonerKind::Rules {
        return Err(usage("--rules only applies to --reasoner rules"));
    }
    let table = match &a.rules {
        Some(names) => RuleTable::only(&parse_classes(names)?),
        None => RuleTable::full(),
    };
    let fleet = match &a.fleet {
        Some(path) => load_fleet(path).with_context(|| format!("cannot load fleet {}", path.display()))?,
        None => generate_fleet(&FleetParams {
            seed: a.seed,
            n_packages: a.packages,
            ..FleetParams::default()
        })
        .context("fleet generation failed")?,
    };
    let mut cfg = AgentConfig {
        sanitizers: !a.no_sanitizers,
        ..AgentConfig::default()
    };
    if let Some(n) = a.step_limit {
        cfg.step_limit = n;
    }
    let opts = BenchOptions {
        sanitizers: cfg.sanitizers,
        class_weights: None,
    };
    let cases = build_benchmark(&fleet, a.cases, a.seed, &opts).context("cannot build benchmark")?;
    let kind = a.reasoner;
    let command = a.command.clone();
    let factory = move || -> Result<Box<dyn Reasoner>, archport::agent::ReasonerError> {
        Ok(match kind {
            ReasonerKind::Rules => Box::new(RuleReasoner::new(table.clone())),
            ReasonerKind::Null => Box::new(NullReasoner),
            ReasonerKind::Cmd => Box::new(
                SubprocessReasoner::spawn(&command)
                    .map_err(|e| archport::agent::ReasonerError::Transport(e.to_string()))?,
            ),
        })
    };
    let jobs = a
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let run = run_benchmark(&cases, &factory, &cfg, jobs).context("benchmark failed")?;
    for (case, trace) in cases.iter().zip(&run.traces) {
        validate_trace(trace).map_err(|e| anyhow::anyhow!("trace of {} is malformed: {e}", case.id))?;
    }
    let json = run.report.to_json();
    match &a.out {
        Some(path) => {
            fs::write(path, format!("{json}\n")).with_context(|| format!("cannot write {}", path.display()))?;
            println!(
                "cases={} fixed={} success_rate={:.4}",
                run.report.total_cases, run.report.fixed, run.report.success_rate
            );
        }
        None => println!("{json}"),
    }
    if let Some(path) = &a.csv {
        run.report
            .write_csv(create(path)?)
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    if let Some(path) = &a.traces {
        let mut w = create(path)?;
        for t in &run.traces {
            serde_json::to_writer(&mut w, t).context("trace serialization")?;
            w.write_all(b"\n").context("trace write")?;
        }
        w.flush().context("trace write")?;
    }
    Ok(())
}

fn load_corpus(path: &Path) -> anyhow::Result<Vec<archport::taxonomy::CommitRecord>> {
    let f = fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    read_corpus(BufReader::new(f)).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

fn classify(a: ClassifyArgs) -> Outcome {
    let _ = a.seed;
    if a.batch_size == 0 {
        return Err(usage("--batch-size must be at least 1"));
    }
    let mut classifier: Box<dyn Classifier> = match (a.classifier, a.command.is_empty()) {
        (ClassifierKind::Heuristic, true) => Box::new(HeuristicClassifier),
        (ClassifierKind::Cmd, false) => {
            Box::new(ExternalClassifier::spawn(&a.command).context("cannot start classifier")?)
        }
        (ClassifierKind::Cmd, true) => return Err(usage("--classifier cmd needs a command after `--`")),
        (ClassifierKind::Heuristic, false) => {
            return Err(usage("a classifier command is only accepted with --classifier cmd"))
        }
    };
    let mut commits = load_corpus(&a.corpus)?;
    let labels = batch_classify(&commits, a.batch_size, classifier.as_mut()).context("classification failed")?;
    let mut warnings = 0;
    for (c, l) in commits.iter_mut().zip(&labels) {
        if let Some(w) = &l.warning {
            eprintln!("warning: {}: {w}", l.id);
            warnings += 1;
        }
        c.category = Some(l.category);
    }
    let mut w = create(&a.out)?;
    write_corpus(&commits, &mut w).with_context(|| format!("cannot write {}", a.out.display()))?;
    w.flush().with_context(|| format!("cannot write {}", a.out.display()))?;
    println!(
        "classified={} warnings={warnings} out={}",
        commits.len(),
        a.out.display()
    );
    Ok(())
}

fn report(a: ReportArgs) -> Outcome {
    if a.bucket_days == 0 {
        return Err(usage("--bucket-days must be at least 1"));
    }
    let mut grader: Box<dyn Grader> = match (a.grader, a.command.is_empty()) {
        (GraderKind::Placeholder, true) => Box::new(PlaceholderGrader),
        (GraderKind::Cmd, false) => Box::new(ExternalGrader::spawn(&a.command).context("cannot start grader")?),
        (GraderKind::Cmd, true) => return Err(usage("--grader cmd needs a command after `--`")),
        (GraderKind::Placeholder, false) => return Err(usage("a grader command is only accepted with --grader cmd")),
    };
    let commits = load_corpus(&a.corpus)?;
    let horizon = a
        .horizon_days
        .unwrap_or_else(|| commits.iter().map(|c| c.day + 1).max().unwrap_or(0));
    let stats = aggregate(&commits, a.mega_threshold);
    let ts = time_series(&commits, a.bucket_days, horizon);
    let grades = grade_automatability(&commits, grader.as_mut(), a.grade_cap, a.seed);

    fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    let stats_path = a.out.join("category_stats.json");
    fs::write(
        &stats_path,
        serde_json::to_string_pretty(&stats).context("stats serialization")? + "\n",
    )
    .with_context(|| format!("cannot write {}", stats_path.display()))?;
    let ts_path = a.out.join("category_timeseries.csv");
    ts.write_csv(create(&ts_path)?)
        .with_context(|| format!("cannot write {}", ts_path.display()))?;
    let grades_path = a.out.join("automatability.json");
    fs::write(
        &grades_path,
        serde_json::to_string_pretty(&grades).context("grade serialization")? + "\n",
    )
    .with_context(|| format!("cannot write {}", grades_path.display()))?;
    println!(
        "commits={} buckets={} out={}",
        commits.len(),
        ts.buckets(),
        a.out.display()
    );
    Ok(())
}
