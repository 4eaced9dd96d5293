use archport::agent::{
    build_benchmark, check_replay, orchestrate, run_benchmark, validate_trace, Action, AgentConfig, AgentContext,
    AgentTrace, BenchOptions, BenchmarkCase, FinishStatus, NullReasoner, Outcome, Reasoner, ReasonerError,
    RuleReasoner, RuleTable, ToolCall, TraceEvent,
};
use archport::fleet::{generate_fleet, Fleet, FleetParams, Isa, TargetKind};
use archport::oracle::{build, run_test, DefectClass};
use proptest::prelude::*;

/// Answers with a fixed script of tool calls, cycling.
#[derive(Clone)]
struct Scripted {
    script: Vec<ToolCall>,
}

impl Reasoner for Scripted {
    fn next_action(&mut self, ctx: &AgentContext) -> Result<Action, ReasonerError> {
        let call = self.script[(ctx.steps_used as usize) % self.script.len()].clone();
        Ok(Action::new(format!("scripted step {}", ctx.steps_used), call))
    }
}

fn cases() -> impl Strategy<Value = Vec<BenchmarkCase>> {
    (any::<u64>(), 2usize..10, 1usize..6).prop_filter_map("fleet has no revertible defect", |(seed, n, k)| {
        let f = generate_fleet(&FleetParams {
            seed,
            n_packages: n,
            n_owners: 2,
            n_cells: 2,
            defect_rate: 1.0,
            ..FleetParams::default()
        })
        .ok()?;
        let cases = build_benchmark(
            &f,
            k,
            seed,
            &BenchOptions {
                sanitizers: true,
                class_weights: None,
            },
        )
        .ok()?;
        (!cases.is_empty()).then_some(cases)
    })
}

/// Tool calls aimed at the case: its goals, its files, and real patterns.
fn script_for(f: &Fleet, goals: &[String], picks: &[(u8, prop::sample::Index, prop::sample::Index)]) -> Vec<ToolCall> {
    let files: Vec<String> = f
        .packages
        .iter()
        .flat_map(|p| p.files.iter().map(|s| s.path.clone()))
        .collect();
    picks
        .iter()
        .map(|(kind, a, b)| {
            let goal = goals[a.index(goals.len())].clone();
            let class = DefectClass::ALL[b.index(DefectClass::ALL.len())];
            match kind % 7 {
                0 => ToolCall::Build { target: goal },
                1 => ToolCall::RunTest { target: goal },
                2 => ToolCall::SearchCode {
                    query: class.pattern().into(),
                },
                3 | 4 => ToolCall::EditCode {
                    file: files[a.index(files.len())].clone(),
                    match_text: class.pattern().into(),
                    replacement: class.canonical_fix().into(),
                },
                5 => ToolCall::FixBuildFile {
                    package: goal.trim_start_matches("//").split(':').next().unwrap().into(),
                },
                _ => ToolCall::Finish {
                    status: if b.index(2) == 0 {
                        FinishStatus::Success
                    } else {
                        FinishStatus::GiveUp
                    },
                },
            }
        })
        .collect()
}

/// Grammar `(Probe | FixerStart FixerStep{0,limit} FixerEnd)* Finish`,
/// checked without the library validator.
fn grammar_ok(t: &AgentTrace) -> bool {
    let mut in_fixer: Option<u32> = None;
    let mut probes = 0;
    for (i, e) in t.events.iter().enumerate() {
        let last = i + 1 == t.events.len();
        match (e, in_fixer) {
            (TraceEvent::Finish { outcome }, None) => return last && *outcome == t.outcome,
            (TraceEvent::Probe { .. }, None) => probes += 1,
            (TraceEvent::FixerStart { .. }, None) => in_fixer = Some(0),
            (TraceEvent::FixerStep { .. }, Some(n)) if n < t.step_limit => in_fixer = Some(n + 1),
            (TraceEvent::FixerEnd { steps, .. }, Some(n)) if *steps == n => in_fixer = None,
            _ => return false,
        }
        if probes > t.step_limit {
            return false;
        }
    }
    false
}

fn goal_green_by_oracle(f: &Fleet, goal: &str, sanitizers: bool) -> bool {
    let (_, t) = f.target(goal).unwrap();
    build(f, goal, Isa::Arm).unwrap().passed()
        && (t.kind != TargetKind::Test || run_test(f, goal, Isa::Arm, sanitizers).unwrap().passed())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn any_reasoner_yields_valid_traces_within_budget(
        cases in cases(),
        pick in any::<prop::sample::Index>(),
        picks in prop::collection::vec((any::<u8>(), any::<prop::sample::Index>(), any::<prop::sample::Index>()), 1..12),
        step_limit in 1u32..10,
        max_rounds in 1u32..5,
        sanitizers in any::<bool>(),
    ) {
        let case = &cases[pick.index(cases.len())];
        let mut f = case.materialize();
        let script = Scripted { script: script_for(&f, &case.goals, &picks) };
        let cfg = AgentConfig { step_limit, max_rounds, sanitizers };
        let trace = orchestrate(&mut f, &case.goals, &mut script.clone(), &cfg);
        prop_assert!(grammar_ok(&trace), "{:?}", trace.events);
        prop_assert_eq!(validate_trace(&trace), Ok(()));
        prop_assert!(trace.fixer_invocations() <= max_rounds);
        prop_assert!(trace.tool_calls() <= step_limit * (1 + trace.fixer_invocations()));
        prop_assert_eq!(check_replay(&trace, &mut script.clone()), Ok(()));
        if trace.outcome == Outcome::Fixed {
            for g in &case.goals {
                prop_assert!(goal_green_by_oracle(&f, g, sanitizers), "{} claimed fixed", g);
            }
        }
    }

    #[test]
    fn rule_reasoner_is_pure_and_fixed_means_green(cases in cases(), subset in prop::sample::subsequence(DefectClass::ALL.to_vec(), 0..=DefectClass::ALL.len())) {
        let table = RuleTable::only(&subset);
        let factory = || Ok(Box::new(RuleReasoner::new(table.clone())) as Box<dyn Reasoner>);
        let cfg = AgentConfig::default();
        let run = run_benchmark(&cases, &factory, &cfg, 1).unwrap();
        for ((case, row), trace) in cases.iter().zip(&run.report.cases).zip(&run.traces) {
            prop_assert_eq!(validate_trace(trace), Ok(()));
            prop_assert!(grammar_ok(trace));
            prop_assert_eq!(check_replay(trace, &mut RuleReasoner::new(table.clone())), Ok(()));
            let mut f = case.materialize();
            let again = orchestrate(&mut f, &case.goals, &mut RuleReasoner::new(table.clone()), &cfg);
            prop_assert_eq!(&again, trace);
            let green = case.goals.iter().all(|g| goal_green_by_oracle(&f, g, true));
            prop_assert_eq!(row.outcome == Outcome::Fixed, green, "{}", case.id);
            prop_assert_eq!(green, subset.contains(&case.class), "{} ({})", case.id, case.class);
        }
    }
}

#[test]
fn null_reasoner_fixes_nothing_and_replay_detects_a_swap() {
    let f = generate_fleet(&FleetParams {
        seed: 3,
        n_packages: 30,
        ..FleetParams::default()
    })
    .unwrap();
    let cases = build_benchmark(
        &f,
        20,
        3,
        &BenchOptions {
            sanitizers: true,
            class_weights: None,
        },
    )
    .unwrap();
    assert!(!cases.is_empty());
    let null = || Ok(Box::new(NullReasoner) as Box<dyn Reasoner>);
    let run = run_benchmark(&cases, &null, &AgentConfig::default(), 2).unwrap();
    assert_eq!(run.report.fixed, 0);
    let rules = || Ok(Box::new(RuleReasoner::full()) as Box<dyn Reasoner>);
    let run = run_benchmark(&cases, &rules, &AgentConfig::default(), 2).unwrap();
    assert_eq!(run.report.fixed as usize, cases.len());
    for t in &run.traces {
        assert!(check_replay(t, &mut NullReasoner).is_err());
    }
}
