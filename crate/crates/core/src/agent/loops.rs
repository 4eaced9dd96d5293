use serde::{Deserialize, Serialize};

use super::reasoner::{AgentContext, LoopKind, Reasoner, Step};
use super::tools::{execute, FinishStatus, ToolCall, ToolOutput};
use super::trace::{AgentTrace, Outcome, TraceEvent};
use crate::fleet::{Fleet, Isa, TargetKind};
use crate::oracle::{build, run_test};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    /// Tool-call budget of each fixer loop, and of the orchestrator's own checks.
    pub step_limit: u32,
    /// Maximum number of fixer invocations per orchestration.
    pub max_rounds: u32,
    pub sanitizers: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            step_limit: 16,
            max_rounds: 4,
            sanitizers: true,
        }
    }
}

/// Fresh oracle check of one goal on Arm: build, plus the test run for
/// test targets.
pub fn goal_green(fleet: &Fleet, goal: &str, sanitizers: bool) -> bool {
    let Some((_, target)) = fleet.target(goal) else {
        return false;
    };
    if !build(fleet, goal, Isa::Arm).is_ok_and(|r| r.passed()) {
        return false;
    }
    target.kind != TargetKind::Test || run_test(fleet, goal, Isa::Arm, sanitizers).is_ok_and(|r| r.passed())
}

pub fn goals_green(fleet: &Fleet, goals: &[String], sanitizers: bool) -> bool {
    goals.iter().all(|g| goal_green(fleet, g, sanitizers))
}

/// One inner loop. Opens with the goal check, then lets the reasoner drive
/// until the goal check passes, it finishes, or the budget runs out.
fn fix_loop(
    fleet: &mut Fleet,
    kind: LoopKind,
    goal: &str,
    reasoner: &mut dyn Reasoner,
    step_limit: u32,
    sanitizers: bool,
    events: &mut Vec<TraceEvent>,
) -> Outcome {
    events.push(TraceEvent::FixerStart {
        kind,
        goal: goal.to_string(),
        step_limit,
        sanitizers,
    });
    let mut ctx = AgentContext {
        loop_kind: kind,
        goal: goal.to_string(),
        sanitizers,
        transcript: Vec::new(),
        steps_used: 0,
        step_limit,
    };
    let record = |ctx: &mut AgentContext, step: Step, events: &mut Vec<TraceEvent>| {
        ctx.steps_used += 1;
        events.push(TraceEvent::FixerStep {
            kind,
            step: step.clone(),
        });
        ctx.transcript.push(step);
    };
    let check = ctx.goal_check();

    let outcome = 'run: {
        if step_limit == 0 {
            break 'run Outcome::StepLimit;
        }
        let output = execute(fleet, &check, sanitizers);
        let ok = output.ok;
        record(
            &mut ctx,
            Step {
                by_reasoner: false,
                note: "opening check".into(),
                call: Some(check.clone()),
                output,
            },
            events,
        );
        if ok {
            break 'run Outcome::Fixed;
        }
        loop {
            if ctx.steps_used >= step_limit {
                break 'run Outcome::StepLimit;
            }
            let step = match reasoner.next_action(&ctx) {
                Err(e) => Step {
                    by_reasoner: true,
                    note: String::new(),
                    call: None,
                    output: ToolOutput {
                        ok: false,
                        lines: vec![e.to_string()],
                    },
                },
                Ok(action) => {
                    let output = execute(fleet, &action.call, sanitizers);
                    Step {
                        by_reasoner: true,
                        note: action.note,
                        call: Some(action.call),
                        output,
                    }
                }
            };
            let finished = match &step.call {
                Some(ToolCall::Finish { status }) => Some(match status {
                    FinishStatus::Success if goal_green(fleet, goal, sanitizers) => Outcome::Fixed,
                    _ => Outcome::GaveUp,
                }),
                Some(c) if *c == check && step.output.ok => Some(Outcome::Fixed),
                _ => None,
            };
            record(&mut ctx, step, events);
            if let Some(o) = finished {
                break 'run o;
            }
        }
    };
    events.push(TraceEvent::FixerEnd {
        kind,
        outcome,
        steps: ctx.steps_used,
    });
    outcome
}

pub fn fix_build(
    fleet: &mut Fleet,
    target: &str,
    reasoner: &mut dyn Reasoner,
    step_limit: u32,
) -> (Outcome, Vec<TraceEvent>) {
    let mut events = Vec::new();
    let o = fix_loop(
        fleet,
        LoopKind::BuildFixer,
        target,
        reasoner,
        step_limit,
        false,
        &mut events,
    );
    (o, events)
}

pub fn fix_test(
    fleet: &mut Fleet,
    test_target: &str,
    reasoner: &mut dyn Reasoner,
    step_limit: u32,
    sanitizers: bool,
) -> (Outcome, Vec<TraceEvent>) {
    let mut events = Vec::new();
    let o = fix_loop(
        fleet,
        LoopKind::TestFixer,
        test_target,
        reasoner,
        step_limit,
        sanitizers,
        &mut events,
    );
    (o, events)
}

/// Outer loop: checks goals (builds first, then tests, each in id order),
/// hands the first failure to the matching fixer, and repeats until all
/// goals pass, a fixer does not fix its goal, the orchestrator's own check
/// budget is spent, or `max_rounds` fixers have run.
pub fn orchestrate(fleet: &mut Fleet, goals: &[String], reasoner: &mut dyn Reasoner, cfg: &AgentConfig) -> AgentTrace {
    let mut goals = goals.to_vec();
    goals.sort();
    goals.dedup();
    let tests: Vec<String> = goals
        .iter()
        .filter(|g| fleet.target(g).is_some_and(|(_, t)| t.kind == TargetKind::Test))
        .cloned()
        .collect();
    let mut events = Vec::new();
    let mut probes = 0u32;
    let mut rounds = 0u32;

    let outcome = 'run: loop {
        let mut failing = None;
        let checks = goals
            .iter()
            .map(|g| (LoopKind::BuildFixer, ToolCall::Build { target: g.clone() }, g))
            .chain(
                tests
                    .iter()
                    .map(|g| (LoopKind::TestFixer, ToolCall::RunTest { target: g.clone() }, g)),
            );
        for (kind, call, goal) in checks {
            if probes >= cfg.step_limit {
                break 'run Outcome::StepLimit;
            }
            probes += 1;
            let ok = execute(fleet, &call, cfg.sanitizers).ok;
            events.push(TraceEvent::Probe { call, ok });
            if !ok {
                failing = Some((kind, goal.clone()));
                break;
            }
        }
        let Some((kind, goal)) = failing else {
            break 'run Outcome::Fixed;
        };
        if rounds >= cfg.max_rounds {
            break 'run Outcome::StepLimit;
        }
        rounds += 1;
        let sanitizers = kind == LoopKind::TestFixer && cfg.sanitizers;
        let o = fix_loop(fleet, kind, &goal, reasoner, cfg.step_limit, sanitizers, &mut events);
        if o != Outcome::Fixed {
            break 'run o;
        }
    };
    events.push(TraceEvent::Finish { outcome });
    AgentTrace {
        goals,
        step_limit: cfg.step_limit,
        events,
        outcome,
    }
}
