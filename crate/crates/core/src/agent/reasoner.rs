use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::tools::{Action, FinishStatus, ToolCall, ToolOutput};
use crate::fleet::{package_of_path, package_of_target};
use crate::oracle::{parse_diagnostic, DefectClass, Diagnostic};
use crate::protocol::{JsonLineProcess, ProtocolError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LoopKind {
    BuildFixer,
    TestFixer,
}

/// One transcript entry. `by_reasoner` is false for the loop's own opening
/// check; `call` is `None` when the reasoner's reply could not be parsed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub by_reasoner: bool,
    pub note: String,
    pub call: Option<ToolCall>,
    pub output: ToolOutput,
}

/// Everything a reasoner sees. This is also the `context` object of the
/// external wire protocol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentContext {
    pub loop_kind: LoopKind,
    pub goal: String,
    pub sanitizers: bool,
    pub transcript: Vec<Step>,
    pub steps_used: u32,
    pub step_limit: u32,
}

impl AgentContext {
    pub fn goal_check(&self) -> ToolCall {
        match self.loop_kind {
            LoopKind::BuildFixer => ToolCall::Build {
                target: self.goal.clone(),
            },
            LoopKind::TestFixer => ToolCall::RunTest {
                target: self.goal.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum ReasonerError {
    #[error("malformed tool call: {0}")]
    Malformed(String),
    #[error("reasoner transport failed: {0}")]
    Transport(String),
}

/// Chooses the next tool call. Implementations must be deterministic in the
/// context: the same context yields the same action.
pub trait Reasoner {
    fn next_action(&mut self, ctx: &AgentContext) -> Result<Action, ReasonerError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub pattern: String,
    pub fix: String,
}

/// Defect class → (offending text, replacement).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleTable(pub BTreeMap<DefectClass, Rule>);

impl RuleTable {
    pub fn full() -> Self {
        Self::only(&DefectClass::ALL)
    }

    pub fn only(classes: &[DefectClass]) -> Self {
        RuleTable(
            classes
                .iter()
                .map(|&c| {
                    (
                        c,
                        Rule {
                            pattern: c.pattern().to_string(),
                            fix: c.canonical_fix().to_string(),
                        },
                    )
                })
                .collect(),
        )
    }

    pub fn classes(&self) -> Vec<DefectClass> {
        self.0.keys().copied().collect()
    }
}

fn first_diagnostic(output: &ToolOutput) -> Option<Diagnostic> {
    output.lines.iter().find_map(|l| parse_diagnostic(l))
}

fn is_check(call: &Option<ToolCall>) -> bool {
    matches!(call, Some(ToolCall::Build { .. } | ToolCall::RunTest { .. }))
}

fn give_up(note: impl Into<String>) -> Action {
    Action::new(
        note,
        ToolCall::Finish {
            status: FinishStatus::GiveUp,
        },
    )
}

/// Deterministic reasoner keyed on diagnostic classes.
///
/// After a failing check it edits the first diagnosed file, searching first
/// when the file lives outside the goal's package; after an edit it re-runs
/// the goal check. Unknown classes make it give up.
#[derive(Debug, Clone)]
pub struct RuleReasoner {
    pub table: RuleTable,
}

impl RuleReasoner {
    pub fn new(table: RuleTable) -> Self {
        RuleReasoner { table }
    }

    pub fn full() -> Self {
        Self::new(RuleTable::full())
    }

    fn edit(&self, d: &Diagnostic, file: &str) -> Action {
        let rule = &self.table.0[&d.class];
        Action::new(
            format!("{} at {}:{}; apply the {} rule", d.class, d.file, d.line_no, d.class),
            ToolCall::EditCode {
                file: file.to_string(),
                match_text: rule.pattern.clone(),
                replacement: rule.fix.clone(),
            },
        )
    }
}

impl Reasoner for RuleReasoner {
    fn next_action(&mut self, ctx: &AgentContext) -> Result<Action, ReasonerError> {
        let Some(last) = ctx.transcript.last() else {
            return Ok(Action::new("check the goal", ctx.goal_check()));
        };
        let action = match &last.call {
            Some(ToolCall::Build { .. } | ToolCall::RunTest { .. }) => {
                if last.output.ok {
                    return Ok(Action::new(
                        "goal passes",
                        ToolCall::Finish {
                            status: FinishStatus::Success,
                        },
                    ));
                }
                let Some(d) = first_diagnostic(&last.output) else {
                    return Ok(give_up("no diagnostic I can act on"));
                };
                let Some(rule) = self.table.0.get(&d.class) else {
                    return Ok(give_up(format!("no rule for {}", d.class)));
                };
                if Some(package_of_path(&d.file)) != package_of_target(&ctx.goal) {
                    Action::new(
                        format!("{} comes from {}; locate it", d.class, package_of_path(&d.file)),
                        ToolCall::SearchCode {
                            query: rule.pattern.clone(),
                        },
                    )
                } else {
                    self.edit(&d, &d.file)
                }
            }
            Some(ToolCall::SearchCode { .. }) => {
                let diag = ctx
                    .transcript
                    .iter()
                    .rev()
                    .find(|s| is_check(&s.call) && !s.output.ok)
                    .and_then(|s| first_diagnostic(&s.output));
                let Some(d) = diag.filter(|d| self.table.0.contains_key(&d.class)) else {
                    return Ok(give_up("lost track of the failing diagnostic"));
                };
                if !last.output.ok {
                    return Ok(give_up("search found nothing"));
                }
                let paths: Vec<&str> = last
                    .output
                    .lines
                    .iter()
                    .filter_map(|l| l.split_once(':').map(|(p, _)| p))
                    .collect();
                let file = paths
                    .iter()
                    .find(|&&p| p == d.file)
                    .or(paths.first())
                    .copied()
                    .unwrap_or(&d.file);
                self.edit(&d, file)
            }
            Some(ToolCall::EditCode { .. }) => {
                if !last.output.ok {
                    return Ok(give_up("edit did not apply"));
                }
                Action::new("re-check after edit", ctx.goal_check())
            }
            Some(ToolCall::FixBuildFile { .. }) | None => Action::new("re-check", ctx.goal_check()),
            Some(ToolCall::Finish { .. }) => give_up("loop already finished"),
        };
        Ok(action)
    }
}

/// Gives up immediately.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullReasoner;

impl Reasoner for NullReasoner {
    fn next_action(&mut self, _ctx: &AgentContext) -> Result<Action, ReasonerError> {
        Ok(give_up("null reasoner"))
    }
}

/// Reasoner living in another process, spoken to over NDJSON:
/// `{"context": …}` in, `{"note": …, "tool": …, "args": …}` out.
pub struct SubprocessReasoner {
    process: JsonLineProcess,
}

impl SubprocessReasoner {
    pub fn spawn(argv: &[String]) -> Result<Self, ProtocolError> {
        Ok(SubprocessReasoner {
            process: JsonLineProcess::spawn(argv)?,
        })
    }
}

impl Reasoner for SubprocessReasoner {
    fn next_action(&mut self, ctx: &AgentContext) -> Result<Action, ReasonerError> {
        let reply = self
            .process
            .request(&serde_json::json!({ "context": ctx }))
            .map_err(|e| match e {
                ProtocolError::Malformed(m) => ReasonerError::Malformed(m),
                other => ReasonerError::Transport(other.to_string()),
            })?;
        serde_json::from_value(reply).map_err(|e| ReasonerError::Malformed(e.to_string()))
    }
}
