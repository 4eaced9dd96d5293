//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use archport::agent::{
    build_benchmark, execute, validate_trace, AgentTrace, BenchOptions, BenchmarkCase, LoopKind, ToolCall, TraceEvent,
};
use archport::champ::{
    check_event_log, deploy_blocker, evaluate, sample_health, Champ, ChampConfig, HealthModel, JobShape, Observation,
    Stage,
};
use archport::fleet::{generate_fleet, Fleet, FleetParams, Isa, TargetKind, DEFAULT_REFUSAL_PRESET};
use archport::lsc::{
    apply_edits, generate_change, run_shard_pipeline, shard_by_owner, ChangeSpec, FileEdit, PipelinePolicy, ShardState,
};
use archport::oracle::{
    build, fix_defect_in_place, package_defects, parse_diagnostic, run_test, DefectClass, DefectMix, SurfacePhase,
};
use archport::sim::OUTPUT_FILES;
use archport::taxonomy::{
    aggregate, batch_classify, classify_heuristic, golden_corpus, Category, CommitRecord, FileDiff, HeuristicClassifier,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

const PROPERTY_CASES: u32 = 1000;
const RUNTIME_LIMIT: Duration = Duration::from_secs(60);
const BENCH_CASES: usize = 245;
const SIGMAS: f64 = 3.0;
const JOB_DAYS: usize = 10_000;
const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/rule_reasoner.py");
const SUBSET: [DefectClass; 2] = [DefectClass::IntrinsicUse, DefectClass::ExactFpEquality];

type Checked = Result<String, String>;
type Criterion = (&'static str, fn(&mut Ctx) -> Checked);

struct Ctx {
    dir: tempfile::TempDir,
    /// `report.json` of the default run with the agent on.
    default_report: Option<PathBuf>,
    /// BenchReport JSON of the full rule table.
    rules_bench: Option<PathBuf>,
    rules_traces: Option<PathBuf>,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn archport(args: &[&str]) -> Result<Duration, String> {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_archport"))
        .args(args)
        .output()
        .map_err(|e| format!("cannot run archport: {e}"))?;
    if !out.status.success() {
        return Err(format!(
            "archport {} exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    Ok(start.elapsed())
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn read(p: &Path) -> Result<Vec<u8>, String> {
    std::fs::read(p).map_err(|e| format!("{}: {e}", p.display()))
}

fn json(p: &Path) -> Result<serde_json::Value, String> {
    serde_json::from_slice(&read(p)?).map_err(|e| format!("{}: {e}", p.display()))
}

fn runner() -> TestRunner {
    TestRunner::new(Config {
        cases: PROPERTY_CASES,
        failure_persistence: None,
        ..Config::default()
    })
}

fn check<S: Strategy>(
    name: &str,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    runner().run(&strategy, test).map_err(|e| format!("{name}: {e}"))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

// 1. Determinism and runtime.

fn determinism(ctx: &mut Ctx) -> Checked {
    let (fa, fb) = (ctx.path("fleet_a.json"), ctx.path("fleet_b.json"));
    for f in [&fa, &fb] {
        archport(&["fleet", "gen", "--packages", "500", "--seed", "7", "--out", s(f)])?;
    }
    if read(&fa)? != read(&fb)? {
        return Err("fleet snapshots differ".into());
    }
    let (ra, rb) = (ctx.path("run_a"), ctx.path("run_b"));
    let mut slowest = Duration::ZERO;
    for r in [&ra, &rb] {
        let t = archport(&[
            "migrate",
            "run",
            "--fleet",
            s(&fa),
            "--days",
            "120",
            "--seed",
            "7",
            "--report",
            s(r),
        ])?;
        slowest = slowest.max(t);
    }
    for name in OUTPUT_FILES {
        if read(&ra.join(name))? != read(&rb.join(name))? {
            return Err(format!("{name} differs between runs"));
        }
    }
    if slowest >= RUNTIME_LIMIT {
        return Err(format!(
            "migrate run took {:.1}s, limit {}s",
            slowest.as_secs_f64(),
            RUNTIME_LIMIT.as_secs()
        ));
    }
    ctx.default_report = Some(ra.join("report.json"));
    Ok(format!(
        "fleet + {} outputs byte-identical over 2 runs; slowest run {:.1}s < {}s",
        OUTPUT_FILES.len(),
        slowest.as_secs_f64(),
        RUNTIME_LIMIT.as_secs()
    ))
}

// 2. Oracle properties.

fn oracle_fleet() -> impl Strategy<Value = Fleet> {
    (
        any::<u64>(),
        1usize..12,
        1usize..4,
        0.0f64..2.0,
        prop::collection::vec(0.01f64..1.0, DefectClass::ALL.len()),
    )
        .prop_filter_map("injection needs room for every defect", |(seed, n, owners, rate, w)| {
            let total: f64 = w.iter().sum();
            generate_fleet(&FleetParams {
                seed,
                n_packages: n,
                n_owners: owners,
                n_cells: 2,
                defect_mix: DefectMix(DefectClass::ALL.iter().zip(w).map(|(&c, w)| (c, w / total)).collect()),
                defect_rate: rate,
                ..FleetParams::default()
            })
            .ok()
        })
}

fn all_targets(f: &Fleet) -> Vec<(String, TargetKind)> {
    f.packages
        .iter()
        .flat_map(|p| p.targets().map(|t| (t.id.clone(), t.kind)))
        .collect()
}

fn dep_closure(f: &Fleet, pkg: &str) -> BTreeSet<String> {
    let mut seen = BTreeSet::new();
    let mut todo = f.package(pkg).unwrap().deps.clone();
    while let Some(d) = todo.pop() {
        if seen.insert(d.clone()) {
            todo.extend(f.package(&d).unwrap().deps.iter().cloned());
        }
    }
    seen
}

fn oracle_properties(_: &mut Ctx) -> Checked {
    check("x86 cleanliness", oracle_fleet(), |f| {
        for (t, kind) in all_targets(&f) {
            ensure(build(&f, &t, Isa::X86).unwrap().passed(), || {
                format!("{t} fails to build on x86")
            })?;
            if kind == TargetKind::Test {
                ensure(run_test(&f, &t, Isa::X86, false).unwrap().passed(), || {
                    format!("{t} fails on x86")
                })?;
            }
        }
        Ok(())
    })?;
    check("sanitizer monotonicity", oracle_fleet(), |f| {
        for (t, kind) in all_targets(&f) {
            if kind != TargetKind::Test {
                continue;
            }
            for isa in Isa::ALL {
                let off: BTreeSet<String> = run_test(&f, &t, isa, false)
                    .unwrap()
                    .surfaced_defects
                    .into_iter()
                    .collect();
                let on: BTreeSet<String> = run_test(&f, &t, isa, true)
                    .unwrap()
                    .surfaced_defects
                    .into_iter()
                    .collect();
                ensure(on.is_superset(&off), || {
                    format!("{t} on {isa}: {off:?} not within {on:?}")
                })?;
            }
        }
        Ok(())
    })?;
    check("phase exclusivity", oracle_fleet(), |f| {
        for (t, kind) in all_targets(&f) {
            for isa in Isa::ALL {
                let mut logs = vec![(true, build(&f, &t, isa).unwrap().log)];
                if kind == TargetKind::Test {
                    for san in [false, true] {
                        logs.push((san, run_test(&f, &t, isa, san).unwrap().log));
                    }
                }
                for (san, log) in logs {
                    for line in log {
                        let d =
                            parse_diagnostic(&line).ok_or_else(|| TestCaseError::fail(format!("bad line {line}")))?;
                        let phase = d.class.effective_phase(san);
                        ensure(
                            !matches!(
                                phase,
                                SurfacePhase::RuntimeOnly | SurfacePhase::DeployTime | SurfacePhase::ReleaseTime
                            ),
                            || format!("{} surfaced in {t}", d.class),
                        )?;
                    }
                }
            }
        }
        Ok(())
    })?;
    check(
        "fix completeness",
        (oracle_fleet(), any::<prop::sample::Index>()),
        |(f, pick)| {
            let pkg = f.packages[pick.index(f.packages.len())].id.clone();
            let mut scope = dep_closure(&f, &pkg);
            scope.insert(pkg.clone());
            let mut fixed = f.clone();
            for p in &scope {
                for d in package_defects(&f, p) {
                    fix_defect_in_place(&mut fixed, &d.id).unwrap();
                }
            }
            for t in fixed.package(&pkg).unwrap().targets() {
                ensure(build(&fixed, &t.id, Isa::Arm).unwrap().passed(), || {
                    format!("{} still fails", t.id)
                })?;
                if t.kind == TargetKind::Test {
                    ensure(run_test(&fixed, &t.id, Isa::Arm, true).unwrap().passed(), || {
                        format!("{} test still fails", t.id)
                    })?;
                }
            }
            Ok(())
        },
    )?;
    Ok(format!(
        "x86-cleanliness, sanitizer monotonicity, phase exclusivity, fix-completeness: {PROPERTY_CASES} cases each, 0 violations"
    ))
}

// 3. Benchmark soundness.

fn bench_cases() -> Vec<BenchmarkCase> {
    let fleet = generate_fleet(&FleetParams {
        seed: 7,
        n_packages: 500,
        ..FleetParams::default()
    })
    .expect("default fleet generates");
    let opts = BenchOptions {
        sanitizers: true,
        class_weights: None,
    };
    build_benchmark(&fleet, BENCH_CASES, 7, &opts).expect("benchmark builds")
}

fn goal_green(f: &Fleet, goal: &str) -> bool {
    let Some((_, t)) = f.target(goal) else { return false };
    build(f, goal, Isa::Arm).unwrap().passed()
        && (t.kind != TargetKind::Test || run_test(f, goal, Isa::Arm, true).unwrap().passed())
}

fn load_traces(p: &Path) -> Result<Vec<AgentTrace>, String> {
    String::from_utf8_lossy(&read(p)?)
        .lines()
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("trace line {}: {e}", i + 1)))
        .collect()
}

fn outcomes(report: &serde_json::Value) -> Result<Vec<(String, String, String)>, String> {
    report["cases"]
        .as_array()
        .ok_or("report has no cases")?
        .iter()
        .map(|c| {
            let field = |k: &str| c[k].as_str().map(String::from).ok_or(format!("case lacks {k}"));
            Ok((field("case_id")?, field("class")?, field("outcome")?))
        })
        .collect()
}

fn benchmark_soundness(ctx: &mut Ctx) -> Checked {
    let (rules, traces) = (ctx.path("bench_rules.json"), ctx.path("traces_rules.jsonl"));
    let n = BENCH_CASES.to_string();
    archport(&[
        "agent",
        "bench",
        "--cases",
        &n,
        "--reasoner",
        "rules",
        "--out",
        s(&rules),
        "--traces",
        s(&traces),
    ])?;
    let report = json(&rules)?;
    if report["total_cases"].as_u64() != Some(BENCH_CASES as u64) {
        return Err(format!("{} cases, want {BENCH_CASES}", report["total_cases"]));
    }
    let per_class = report["per_class"].as_object().ok_or("no per_class")?;
    for (class, row) in per_class {
        if row["rate"].as_f64() != Some(1.0) {
            return Err(format!("rules reasoner: {class} at {}", row["rate"]));
        }
    }

    let cases = bench_cases();
    let rows = outcomes(&report)?;
    let recorded = load_traces(&traces)?;
    if cases.len() != rows.len() || cases.len() != recorded.len() {
        return Err("case, row and trace counts disagree".into());
    }
    let mut reverified = 0;
    for ((case, (id, _, outcome)), trace) in cases.iter().zip(&rows).zip(&recorded) {
        if &case.id != id {
            return Err(format!("case order differs: {} vs {id}", case.id));
        }
        let mut f = case.materialize();
        for (file, match_text, replacement) in trace.applied_edits() {
            let call = ToolCall::EditCode {
                file,
                match_text,
                replacement,
            };
            if !execute(&mut f, &call, true).ok {
                return Err(format!("{id}: recorded edit does not re-apply"));
            }
        }
        let green = case.goals.iter().all(|g| goal_green(&f, g));
        if green != (outcome == "Fixed") {
            return Err(format!("{id}: report says {outcome}, fresh oracle says green={green}"));
        }
        reverified += green as usize;
    }

    let null = ctx.path("bench_null.json");
    archport(&["agent", "bench", "--cases", &n, "--reasoner", "null", "--out", s(&null)])?;
    let null_fixed = json(&null)?["fixed"].as_u64();
    if null_fixed != Some(0) {
        return Err(format!("null reasoner fixed {null_fixed:?}"));
    }

    let subset = ctx.path("bench_subset.json");
    let names: Vec<&str> = SUBSET.iter().map(|c| c.as_str()).collect();
    archport(&[
        "agent",
        "bench",
        "--cases",
        &n,
        "--rules",
        &names.join(","),
        "--out",
        s(&subset),
    ])?;
    let mut in_subset = 0;
    for (id, class, outcome) in outcomes(&json(&subset)?)? {
        let want = names.contains(&class.as_str());
        in_subset += want as usize;
        if want != (outcome == "Fixed") {
            return Err(format!("subset run: {id} ({class}) ended {outcome}"));
        }
    }

    ctx.rules_bench = Some(rules);
    ctx.rules_traces = Some(traces);
    Ok(format!(
        "rules 100% on {} classes ({BENCH_CASES} cases, {reverified} Fixed re-verified by fresh oracle); null 0%; subset {{{}}} fixes exactly its {in_subset} cases",
        per_class.len(),
        names.join(", ")
    ))
}

// 4. Trace grammar.

/// `(Probe | FixerStart(k) FixerStep(k){0,limit} FixerEnd(k))* Finish`.
fn parses(t: &AgentTrace) -> Result<(), String> {
    let mut open: Option<(LoopKind, u32)> = None;
    let mut probes = 0;
    for (i, e) in t.events.iter().enumerate() {
        match (e, open) {
            (TraceEvent::Finish { outcome }, None) if i + 1 == t.events.len() && *outcome == t.outcome => return Ok(()),
            (TraceEvent::Probe { .. }, None) => probes += 1,
            (TraceEvent::FixerStart { kind, .. }, None) => open = Some((*kind, 0)),
            (TraceEvent::FixerStep { kind, .. }, Some((k, n))) if *kind == k && n < t.step_limit => {
                open = Some((k, n + 1))
            }
            (TraceEvent::FixerEnd { kind, steps, .. }, Some((k, n))) if *kind == k && *steps == n => open = None,
            _ => return Err(format!("event {i} out of grammar")),
        }
        if probes > t.step_limit {
            return Err(format!("{probes} orchestrator checks over limit {}", t.step_limit));
        }
    }
    Err("no Finish".into())
}

fn trace_grammar(ctx: &mut Ctx) -> Checked {
    let path = ctx.rules_traces.clone().ok_or("needs the traces of criterion 3")?;
    let mut traces = load_traces(&path)?;
    let null = ctx.path("traces_null.jsonl");
    let n = BENCH_CASES.to_string();
    archport(&[
        "agent",
        "bench",
        "--cases",
        &n,
        "--reasoner",
        "null",
        "--out",
        s(&ctx.path("b.json")),
        "--traces",
        s(&null),
    ])?;
    traces.extend(load_traces(&null)?);
    let mut fixers = 0;
    for (i, t) in traces.iter().enumerate() {
        parses(t).map_err(|e| format!("trace {i}: {e}"))?;
        validate_trace(t).map_err(|e| format!("trace {i}: {e}"))?;
        let budget = t.step_limit * (1 + t.fixer_invocations());
        if t.tool_calls() > budget {
            return Err(format!("trace {i}: {} tool calls over budget {budget}", t.tool_calls()));
        }
        fixers += t.fixer_invocations();
    }
    Ok(format!(
        "{} of {} traces (rules + null) parse, {fixers} fixer loops, all within step budgets",
        traces.len(),
        traces.len()
    ))
}

// 5. Qualification protocol.

fn observe(champ: &mut Champ, f: &Fleet, job: &str, day: u32, seed: u64, model: &HealthModel) -> Observation {
    let j = f.job(job).unwrap();
    let shape = JobShape {
        tasks_per_cell: j.tasks_per_cell,
        cells: j.cells.len() as u32,
    };
    let th = champ.config.thresholds;
    let (obs, samples) = match deploy_blocker(f, j, Isa::Arm) {
        Some(b) => (Observation::Blocked(b), None),
        None => {
            let a = sample_health(f, job, Isa::Arm, day, seed, model).unwrap();
            let x = sample_health(f, job, Isa::X86, day, seed, model).unwrap();
            (Observation::Verdict(evaluate(&a, &x, &th).unwrap()), Some((a, x)))
        }
    };
    champ
        .observe(job, day, shape, obs, samples.as_ref().map(|(a, x)| (a, x)))
        .unwrap();
    obs
}

fn arm_everywhere(f: &mut Fleet) {
    for p in &mut f.packages {
        p.blueprint.variant_modes.insert(Isa::Arm);
    }
}

fn deployable(f: &Fleet, heap_limited: bool) -> Vec<String> {
    f.jobs
        .iter()
        .filter(|j| deploy_blocker(f, j, Isa::Arm).is_none())
        .filter(|j| (archport::oracle::runtime_faults(f, &j.package_id).heap_limit > 0) == heap_limited)
        .map(|j| j.id.clone())
        .collect()
}

fn champ_protocol(_: &mut Ctx) -> Checked {
    let cfg = ChampConfig::default();
    let stages = Stage::LADDER as u32;
    check(
        "noise-free qualification",
        (any::<u64>(), 0u32..60, any::<prop::sample::Index>()),
        |(seed, start, pick)| {
            let mut f = generate_fleet(&FleetParams {
                seed,
                n_packages: 12,
                arm_cell_fraction: 1.0,
                n_owners: 2,
                n_cells: 3,
                defect_rate: 0.0,
                ..FleetParams::default()
            })
            .unwrap();
            arm_everywhere(&mut f);
            let jobs = deployable(&f, false);
            if jobs.is_empty() {
                return Err(TestCaseError::reject("no deployable job"));
            }
            let job = &jobs[pick.index(jobs.len())];
            let model = HealthModel {
                noise_bound: 0.0,
                ..HealthModel::default()
            };
            let mut champ = Champ::new(cfg);
            let mut day = start;
            while !champ.idle(job, day) && day < start + 10 * stages * cfg.dwell_days {
                observe(&mut champ, &f, job, day, seed, &model);
                day += 1;
            }
            ensure(
                champ.stage(job) == Stage::Qualified && day == start + stages * cfg.dwell_days,
                || format!("{job}: {} after {} days", champ.stage(job), day - start),
            )
        },
    )?;
    check(
        "heap-limit ineligibility",
        (any::<u64>(), 0u32..60, any::<prop::sample::Index>()),
        |(seed, start, pick)| {
            let Ok(mut f) = generate_fleet(&FleetParams {
                seed,
                n_packages: 12,
                arm_cell_fraction: 1.0,
                n_owners: 2,
                n_cells: 3,
                defect_mix: DefectMix::only(DefectClass::HeapLimit),
                defect_rate: 0.6,
                ..FleetParams::default()
            }) else {
                return Err(TestCaseError::reject("injection failed"));
            };
            arm_everywhere(&mut f);
            let jobs = deployable(&f, true);
            if jobs.is_empty() {
                return Err(TestCaseError::reject("no heap-limited job"));
            }
            let job = &jobs[pick.index(jobs.len())];
            let mut champ = Champ::new(cfg);
            let mut day = start;
            while champ.stage(job).name() != "Ineligible" && day < start + cfg.dwell_days {
                observe(&mut champ, &f, job, day, seed, &HealthModel::default());
                day += 1;
            }
            let detection = day - 1;
            match champ.stage(job) {
                Stage::Ineligible { retry_day, .. } => ensure(retry_day == detection + 30, || {
                    format!("{job}: retry {retry_day}, detected {detection}")
                }),
                other => Err(TestCaseError::fail(format!("{job}: {other} after one window"))),
            }
        },
    )?;
    let (mut job_days, mut seed) = (0usize, 0u64);
    while job_days < JOB_DAYS {
        seed += 1;
        let Ok(mut f) = generate_fleet(&FleetParams {
            seed,
            n_packages: 20,
            n_owners: 3,
            n_cells: 3,
            defect_rate: 0.6,
            ..FleetParams::default()
        }) else {
            continue;
        };
        for (i, p) in f.packages.iter_mut().enumerate() {
            if i % 2 == 0 {
                p.blueprint.variant_modes.insert(Isa::Arm);
            }
        }
        let model = HealthModel {
            noise_bound: 0.01,
            ..HealthModel::default()
        };
        let mut champ = Champ::new(cfg);
        let jobs: Vec<String> = f.jobs.iter().map(|j| j.id.clone()).collect();
        for day in 0..90 {
            for job in &jobs {
                if !champ.idle(job, day) {
                    observe(&mut champ, &f, job, day, seed, &model);
                }
            }
        }
        let summary = check_event_log(&champ.events, &champ.bugs);
        if !summary.violations.is_empty() {
            return Err(format!("seed {seed}: {}", summary.violations[0]));
        }
        job_days += summary.job_days;
    }
    Ok(format!(
        "noise-free clean job qualifies in exactly {stages}x{} days; HeapLimit job ineligible within {} days, retry = detection + 30; {job_days} replayed job-days, 0 violations",
        cfg.dwell_days, cfg.dwell_days
    ))
}

// 6. Large-scale change laws.

fn lsc_fleet(max_owners: usize) -> impl Strategy<Value = Fleet> {
    (any::<u64>(), 2usize..30, 1..=max_owners).prop_filter_map("injection needs room", |(seed, n, owners)| {
        generate_fleet(&FleetParams {
            seed,
            n_packages: n,
            n_owners: owners,
            n_cells: 2,
            defect_rate: 0.5,
            ..FleetParams::default()
        })
        .ok()
    })
}

fn change_spec() -> impl Strategy<Value = ChangeSpec> {
    let blueprint = (
        prop::sample::select(vec!["enable_arm_release", "enable_arm_ci"]),
        prop::collection::vec("pkg_00[0-9]\\*|pkg_000[0-9]|\\*", 1..4),
    )
        .prop_map(|(template, globs)| {
            ChangeSpec::new(
                "mega",
                format!("blueprint({})", globs.join(", ")),
                template,
                archport::fleet::RolloutPhase::Early,
            )
        });
    let replace = (
        prop::sample::select(DefectClass::ALL.to_vec()),
        prop::sample::select(vec!["**", "*/BUILD", "*/src/*", "*/tests/*", "*/borg/*"]),
    )
        .prop_map(|(class, glob)| {
            let mut s = ChangeSpec::new(
                "mega",
                format!("files({glob})"),
                "replace",
                archport::fleet::RolloutPhase::ScaleUp,
            );
            s.match_text = Some(class.pattern().to_string());
            s.replacement = Some(class.canonical_fix().to_string());
            s
        });
    prop_oneof![blueprint, replace]
}

fn lsc_laws(_: &mut Ctx) -> Checked {
    check("shard partition", (lsc_fleet(8), change_spec()), |(f, spec)| {
        let mega = generate_change(&f, &spec).unwrap();
        let sharded = shard_by_owner(&f, &spec, &mega).unwrap();
        let mut count: BTreeMap<&FileEdit, usize> = BTreeMap::new();
        let mut owner_of_file: BTreeMap<&str, &str> = BTreeMap::new();
        for sh in &sharded.shards {
            for e in &sh.edits {
                *count.entry(e).or_default() += 1;
                let prev = owner_of_file.insert(e.file.as_str(), sh.owner_id.as_str());
                ensure(prev.is_none_or(|o| o == sh.owner_id), || {
                    format!("{} in two shards", e.file)
                })?;
                ensure(f.package(e.package_id()).unwrap().owner_id == sh.owner_id, || {
                    format!("{} sharded to a non-owner", e.file)
                })?;
            }
        }
        let mega_set: BTreeSet<&FileEdit> = mega.edits.iter().collect();
        ensure(count.keys().copied().collect::<BTreeSet<_>>() == mega_set, || {
            "union differs".into()
        })?;
        ensure(count.values().all(|&c| c == 1), || "edit in several shards".into())
    })?;
    check(
        "template idempotence",
        (lsc_fleet(3), change_spec()),
        |(mut f, spec)| {
            let mega = generate_change(&f, &spec).unwrap();
            apply_edits(&mut f, &mega.edits).unwrap();
            let once = f.clone();
            let diffs = apply_edits(&mut f, &mega.edits).unwrap();
            ensure(diffs.iter().all(|(_, d)| d.is_empty()) && f == once, || {
                "second application changed the fleet".into()
            })?;
            ensure(generate_change(&f, &spec).unwrap().edits.is_empty(), || {
                "change regenerates edits".into()
            })
        },
    )?;

    let base = generate_fleet(&FleetParams {
        seed: 11,
        n_packages: 400,
        n_owners: 250,
        n_cells: 2,
        defect_rate: 0.0,
        ..FleetParams::default()
    })
    .map_err(|e| e.to_string())?;
    let mut rates = Vec::new();
    for (phase, p) in DEFAULT_REFUSAL_PRESET {
        let (mut decisions, mut refused, mut k) = (0u64, 0u64, 0);
        while decisions < 1000 {
            let mut f = base.clone();
            let spec = ChangeSpec::new(format!("refusal-{phase}-{k}"), "blueprint(*)", "enable_arm_ci", phase);
            k += 1;
            let mega = generate_change(&f, &spec).unwrap();
            let mut change = shard_by_owner(&f, &spec, &mega).unwrap();
            let policy = PipelinePolicy {
                seed: 5,
                day: 0,
                sanitizers: true,
            };
            for idx in 0..change.shards.len() {
                match run_shard_pipeline(&mut f, &mut change, idx, &policy).unwrap().state {
                    ShardState::Refused => {
                        refused += 1;
                        decisions += 1;
                    }
                    ShardState::Submitted => decisions += 1,
                    other => return Err(format!("shard ended {other}")),
                }
            }
        }
        let rate = refused as f64 / decisions as f64;
        let sigma = (p * (1.0 - p) / decisions as f64).sqrt();
        if (rate - p).abs() > SIGMAS * sigma {
            return Err(format!(
                "{phase}: refusal {rate:.4} vs preset {p} outside {SIGMAS} sigma ({:.4})",
                SIGMAS * sigma
            ));
        }
        rates.push(format!("{phase} {refused}/{decisions}={rate:.4} (p={p})"));
    }
    Ok(format!(
        "partition on {PROPERTY_CASES} mega-changes; idempotent on {PROPERTY_CASES}; refusal within {SIGMAS} sigma: {}",
        rates.join(", ")
    ))
}

// 7. Taxonomy.

const PATHS: [&str; 8] = [
    "pkg_0001/src/codec.cc",
    "pkg_0002/tests/codec_test.cc",
    "pkg_0003/BUILD",
    "pkg_0004/release.blueprint",
    "pkg_0005/borg/job.borg",
    "docs/arm/porting.md",
    "tools/migrate/rewrite.py",
    "monitoring/arm_fleet.dash",
];

const LINES: [&str; 6] = [
    "+  acc = portable_simd_add(acc, lane);",
    "-  acc = _mm_add_ps(acc, lane);",
    "+arm_ci_mode = enabled",
    "+  constraint = \"arch == any\"",
    "+  atomic_thread_fence(seq_cst);",
    "+# latency budget",
];

fn corpus() -> impl Strategy<Value = Vec<CommitRecord>> {
    let diff = (
        prop::sample::select(PATHS.to_vec()),
        prop::collection::vec(prop::sample::select(LINES.to_vec()), 1..4),
    )
        .prop_map(|(path, lines)| {
            let added = lines.iter().filter(|l| l.starts_with('+')).count() as u32;
            FileDiff {
                path: path.into(),
                lines_added: added,
                lines_removed: lines.len() as u32 - added,
                hunk_text: format!("@@ -1 +1 @@\n{}", lines.join("\n")),
            }
        });
    let commit = (
        0u32..200,
        prop::collection::vec(diff, 0..3),
        any::<bool>(),
        prop::option::of(0u8..17),
        0u64..30_000,
    )
        .prop_map(|(day, diffs, automated, cat, extra)| {
            let mut c = CommitRecord::new("c", day, "Update", diffs, automated);
            c.loc_delta += extra;
            c.category = cat.and_then(Category::from_number);
            c
        });
    prop::collection::vec(commit, 0..150).prop_map(|mut v| {
        for (i, c) in v.iter_mut().enumerate() {
            c.id = format!("c{i:04}");
        }
        v
    })
}

fn type7(sorted: &[u64], pct: u64) -> f64 {
    let scaled = (sorted.len() as u64 - 1) * pct;
    let lo = (scaled / 100) as usize;
    let frac = (scaled % 100) as f64 / 100.0;
    if frac == 0.0 {
        sorted[lo] as f64
    } else {
        sorted[lo] as f64 + frac * (sorted[lo + 1] as f64 - sorted[lo] as f64)
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

fn taxonomy(_: &mut Ctx) -> Checked {
    let golden = golden_corpus();
    let hits = golden
        .iter()
        .filter(|c| Some(classify_heuristic(c)) == c.category)
        .count();
    if hits != 17 || golden.len() != 17 {
        return Err(format!("golden corpus {hits}/{}", golden.len()));
    }
    check("aggregation", corpus(), |commits| {
        let stats = aggregate(&commits, 10_000);
        let total_loc: u64 = commits.iter().map(|c| c.loc_delta).sum();
        for row in &stats.rows {
            let mut locs: Vec<u64> = commits
                .iter()
                .filter(|c| c.category.unwrap_or(Category::Uncategorized) == row.category)
                .map(|c| c.loc_delta)
                .collect();
            locs.sort_unstable();
            ensure(
                row.commits == locs.len() as u64 && row.loc == locs.iter().sum::<u64>(),
                || format!("{}: counts differ", row.category),
            )?;
            if total_loc > 0 {
                ensure(close(row.loc_share, row.loc as f64 / total_loc as f64), || {
                    "LoC share".into()
                })?;
            }
            if !commits.is_empty() {
                ensure(
                    close(row.commit_share, locs.len() as f64 / commits.len() as f64),
                    || "commit share".into(),
                )?;
            }
            if let (Some(m), Some((lo, hi))) = (row.loc_median, row.loc_interval_90) {
                let n = locs.len();
                let median = if n % 2 == 1 {
                    locs[n / 2] as f64
                } else {
                    (locs[n / 2 - 1] + locs[n / 2]) as f64 / 2.0
                };
                ensure(close(m, median), || format!("median {m} vs {median}"))?;
                ensure(close(lo, type7(&locs, 5)) && close(hi, type7(&locs, 95)), || {
                    "90% interval".into()
                })?;
            } else {
                ensure(locs.is_empty(), || "missing median".into())?;
            }
        }
        Ok(())
    })?;
    check("batch invariance", corpus(), |commits| {
        let reference: Vec<Category> = commits.iter().map(classify_heuristic).collect();
        for size in [1, 100, commits.len().max(1)] {
            let got: Vec<Category> = batch_classify(&commits, size, &mut HeuristicClassifier)
                .map_err(|e| TestCaseError::fail(e.to_string()))?
                .into_iter()
                .map(|c| c.category)
                .collect();
            ensure(got == reference, || format!("batch size {size} changes labels"))?;
        }
        Ok(())
    })?;
    Ok(format!(
        "golden 17/17; aggregation matches brute force on {PROPERTY_CASES} corpora; labels equal for batch sizes 1, 100, all on {PROPERTY_CASES} corpora"
    ))
}

// 8. End-to-end shape.

fn end_to_end(ctx: &mut Ctx) -> Checked {
    let on = match &ctx.default_report {
        Some(p) => json(p)?,
        None => {
            let dir = ctx.path("run_on");
            archport(&["migrate", "run", "--days", "120", "--seed", "7", "--report", s(&dir)])?;
            json(&dir.join("report.json"))?
        }
    };
    let dir = ctx.path("run_off");
    archport(&[
        "migrate",
        "run",
        "--days",
        "120",
        "--seed",
        "7",
        "--no-agent",
        "--report",
        s(&dir),
    ])?;
    let off = json(&dir.join("report.json"))?;
    let (q_on, q_off) = (
        on["final_qualified_fraction"].as_f64().ok_or("no fraction")?,
        off["final_qualified_fraction"].as_f64().ok_or("no fraction")?,
    );
    if q_on <= q_off {
        return Err(format!("agent on {q_on:.4} not above agent off {q_off:.4}"));
    }
    let shape = &on["phase_shape"];
    if shape["holds"].as_bool() != Some(true) {
        return Err(format!("phase shape fails: {shape}"));
    }
    Ok(format!(
        "qualified fraction on {q_on:.4} > off {q_off:.4}; tooling/test share early {:.3} > config {:.3}, config late {:.3} > tooling/test {:.3}",
        shape["early_tooling_test_share"].as_f64().unwrap_or(f64::NAN),
        shape["early_config_share"].as_f64().unwrap_or(f64::NAN),
        shape["late_config_share"].as_f64().unwrap_or(f64::NAN),
        shape["late_tooling_test_share"].as_f64().unwrap_or(f64::NAN),
    ))
}

// 9. Subprocess parity.

fn protocol_parity(ctx: &mut Ctx) -> Checked {
    let n = BENCH_CASES.to_string();
    let rules = match &ctx.rules_bench {
        Some(p) => p.clone(),
        None => {
            let p = ctx.path("bench_rules_9.json");
            archport(&["agent", "bench", "--cases", &n, "--out", s(&p)])?;
            p
        }
    };
    let ext = ctx.path("bench_ext.json");
    archport(&[
        "agent",
        "bench",
        "--cases",
        &n,
        "--reasoner",
        "cmd",
        "--out",
        s(&ext),
        "--",
        "python3",
        FIXTURE,
    ])?;
    if read(&rules)? != read(&ext)? {
        return Err("subprocess BenchReport differs from the in-process one".into());
    }
    let names: Vec<&str> = SUBSET.iter().map(|c| c.as_str()).collect();
    let (a, b) = (ctx.path("subset_in.json"), ctx.path("subset_ext.json"));
    archport(&[
        "agent",
        "bench",
        "--cases",
        &n,
        "--rules",
        &names.join(","),
        "--out",
        s(&a),
    ])?;
    let mut argv = vec![
        "agent",
        "bench",
        "--cases",
        &n,
        "--reasoner",
        "cmd",
        "--out",
        s(&b),
        "--",
        "python3",
        FIXTURE,
    ];
    argv.extend(names.iter().copied());
    archport(&argv)?;
    if read(&a)? != read(&b)? {
        return Err("subset BenchReports differ".into());
    }
    Ok(format!(
        "external rule reasoner byte-matches BenchReport on {BENCH_CASES} cases, full table and subset"
    ))
}

fn main() {
    let mut ctx = Ctx {
        dir: tempfile::tempdir().expect("temp dir"),
        default_report: None,
        rules_bench: None,
        rules_traces: None,
    };
    let criteria: [Criterion; 9] = [
        ("determinism", determinism),
        ("oracle properties", oracle_properties),
        ("benchmark soundness", benchmark_soundness),
        ("trace grammar", trace_grammar),
        ("qualification protocol", champ_protocol),
        ("large-scale change laws", lsc_laws),
        ("taxonomy", taxonomy),
        ("end-to-end shape", end_to_end),
        ("protocol parity", protocol_parity),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run(&mut ctx);
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {} {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name} ({secs:.1}s): {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
