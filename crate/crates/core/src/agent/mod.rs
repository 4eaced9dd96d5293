//! Nested-loop build/test repair agent.
//!
//! An orchestrator checks its goal targets on Arm and hands the first failing
//! build to a build-fixer loop or, once everything builds, the first failing
//! test to a test-fixer loop. Each fixer alternates one reasoner decision
//! with one tool call ([`ToolCall`]) under a step limit. Reasoners are
//! pluggable: the in-process [`RuleReasoner`], the [`NullReasoner`], or any
//! executable speaking the NDJSON protocol ([`SubprocessReasoner`]).
//!
//! [`build_benchmark`] and [`run_benchmark`] evaluate a reasoner on
//! revert-based cases: a green fleet with one canonical fix undone.

mod bench;
mod loops;
mod reasoner;
mod tools;
mod trace;

pub use bench::{
    build_benchmark, run_benchmark, BenchOptions, BenchReport, BenchRun, BenchmarkCase, CaseResult, ClassRate,
    ReasonerFactory,
};
pub use loops::{fix_build, fix_test, goal_green, goals_green, orchestrate, AgentConfig};
pub use reasoner::{
    AgentContext, LoopKind, NullReasoner, Reasoner, ReasonerError, Rule, RuleReasoner, RuleTable, Step,
    SubprocessReasoner,
};
pub use tools::{execute, fix_build_file, search_code, Action, FinishStatus, ToolCall, ToolOutput};
pub use trace::{check_replay, reasoner_queries, validate_trace, AgentTrace, Outcome, TraceEvent};

use crate::oracle::OracleError;

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("size error: {0}")]
    Size(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Reasoner(#[from] ReasonerError),
}
