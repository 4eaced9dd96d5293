use serde::{Deserialize, Serialize};

use super::reasoner::{AgentContext, LoopKind, Reasoner, Step};
use super::tools::{Action, ToolCall};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Fixed,
    GaveUp,
    StepLimit,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Fixed => "Fixed",
            Outcome::GaveUp => "GaveUp",
            Outcome::StepLimit => "StepLimit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event")]
pub enum TraceEvent {
    /// A check the orchestrator runs itself.
    Probe {
        call: ToolCall,
        ok: bool,
    },
    FixerStart {
        kind: LoopKind,
        goal: String,
        step_limit: u32,
        sanitizers: bool,
    },
    FixerStep {
        kind: LoopKind,
        step: Step,
    },
    FixerEnd {
        kind: LoopKind,
        outcome: Outcome,
        steps: u32,
    },
    Finish {
        outcome: Outcome,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentTrace {
    pub goals: Vec<String>,
    pub step_limit: u32,
    pub events: Vec<TraceEvent>,
    pub outcome: Outcome,
}

impl AgentTrace {
    pub fn fixer_invocations(&self) -> u32 {
        self.events
            .iter()
            .filter(|e| matches!(e, TraceEvent::FixerStart { .. }))
            .count() as u32
    }

    /// Probes plus fixer steps.
    pub fn tool_calls(&self) -> u32 {
        self.events
            .iter()
            .filter(|e| matches!(e, TraceEvent::Probe { .. } | TraceEvent::FixerStep { .. }))
            .count() as u32
    }

    /// Edits that the agent applied successfully, in order.
    pub fn applied_edits(&self) -> Vec<(String, String, String)> {
        self.events
            .iter()
            .filter_map(|e| match e {
                TraceEvent::FixerStep {
                    step:
                        Step {
                            call:
                                Some(ToolCall::EditCode {
                                    file,
                                    match_text,
                                    replacement,
                                }),
                            output,
                            ..
                        },
                    ..
                } if output.ok => Some((file.clone(), match_text.clone(), replacement.clone())),
                _ => None,
            })
            .collect()
    }
}

/// Checks that the trace parses as
/// `(Probe | FixerStart FixerStep* FixerEnd)* Finish`, with one loop kind per
/// fixer, no fixer exceeding its step limit, the orchestrator's probes within
/// the same limit, and consistent recorded counts and outcomes.
pub fn validate_trace(trace: &AgentTrace) -> Result<(), String> {
    let limit = trace.step_limit;
    let mut probes = 0u32;
    let mut open: Option<(LoopKind, u32)> = None;
    let mut finished = false;
    let mut fixer_calls = 0u32;
    for (i, e) in trace.events.iter().enumerate() {
        if finished {
            return Err(format!("event {i} follows Finish"));
        }
        match (e, &mut open) {
            (TraceEvent::Probe { .. }, None) => {
                probes += 1;
                if probes > limit {
                    return Err(format!("orchestrator made {probes} checks, limit {limit}"));
                }
            }
            (TraceEvent::FixerStart { kind, step_limit, .. }, None) => {
                if *step_limit != limit {
                    return Err(format!(
                        "fixer at event {i} has step limit {step_limit}, trace has {limit}"
                    ));
                }
                open = Some((*kind, 0));
            }
            (TraceEvent::FixerStep { kind, .. }, Some((k, n))) if kind == k => {
                *n += 1;
                fixer_calls += 1;
                if *n > limit {
                    return Err(format!("fixer exceeded step limit {limit} at event {i}"));
                }
            }
            (TraceEvent::FixerEnd { kind, steps, .. }, Some((k, n))) if kind == k => {
                if steps != n {
                    return Err(format!("fixer end at event {i} records {steps} steps, saw {n}"));
                }
                open = None;
            }
            (TraceEvent::Finish { outcome }, None) => {
                if *outcome != trace.outcome {
                    return Err("Finish outcome differs from trace outcome".into());
                }
                finished = true;
            }
            _ => return Err(format!("unexpected event {i}: {e:?}")),
        }
    }
    if !finished {
        return Err("trace has no Finish".into());
    }
    let budget = limit as u64 * (1 + trace.fixer_invocations() as u64);
    if (probes + fixer_calls) as u64 > budget {
        return Err(format!("{} tool calls exceed budget {budget}", probes + fixer_calls));
    }
    Ok(())
}

/// Contexts the reasoner was asked about, paired with what it answered.
/// Steps whose reply was malformed are skipped.
pub fn reasoner_queries(trace: &AgentTrace) -> Vec<(AgentContext, Action)> {
    let mut out = Vec::new();
    let mut ctx: Option<AgentContext> = None;
    for e in &trace.events {
        match e {
            TraceEvent::FixerStart {
                kind,
                goal,
                step_limit,
                sanitizers,
            } => {
                ctx = Some(AgentContext {
                    loop_kind: *kind,
                    goal: goal.clone(),
                    sanitizers: *sanitizers,
                    transcript: Vec::new(),
                    steps_used: 0,
                    step_limit: *step_limit,
                });
            }
            TraceEvent::FixerStep { step, .. } => {
                let c = ctx.as_mut().expect("step inside a fixer");
                if step.by_reasoner {
                    if let Some(call) = &step.call {
                        out.push((c.clone(), Action::new(step.note.clone(), call.clone())));
                    }
                }
                c.transcript.push(step.clone());
                c.steps_used += 1;
            }
            TraceEvent::FixerEnd { .. } => ctx = None,
            _ => {}
        }
    }
    out
}

/// Replays every recorded context through `reasoner` and compares the
/// serialized actions byte for byte.
pub fn check_replay(trace: &AgentTrace, reasoner: &mut dyn Reasoner) -> Result<(), String> {
    for (i, (ctx, recorded)) in reasoner_queries(trace).into_iter().enumerate() {
        let again = reasoner.next_action(&ctx).map_err(|e| format!("query {i}: {e}"))?;
        let a = serde_json::to_string(&again).expect("action serializes");
        let b = serde_json::to_string(&recorded).expect("action serializes");
        if a != b {
            return Err(format!("query {i}: replay produced {a}, trace has {b}"));
        }
    }
    Ok(())
}
