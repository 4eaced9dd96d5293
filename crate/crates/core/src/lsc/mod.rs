//! Large-scale changes.
//!
//! A [`ChangeSpec`] pairs a file predicate with an edit template. Generating
//! it against a fleet yields a [`MegaChange`]; sharding partitions that by
//! code owner. Each shard then runs CI on both ISAs, waits for owner approval
//! (a seeded draw against the owner's per-phase refusal probability), and is
//! submitted, after which it can be rolled back as a whole or per package.

mod change;
mod shard;
mod spec;

pub use change::{apply_edits, apply_file_edit, generate_change, EditOp, FileEdit, MegaChange};
pub use shard::{
    approval_label, lsc_stats, rollback, rollback_package, run_shard_pipeline, shard_by_owner, write_shard_events_csv,
    CiFailure, LscStats, PhaseLscStats, PipelinePolicy, Shard, ShardEvent, ShardOutcome, ShardState, ShardedChange,
};
pub use spec::{ChangeSpec, Predicate, Template};

use crate::oracle::OracleError;

#[derive(Debug, thiserror::Error)]
pub enum LscError {
    #[error("spec error: {0}")]
    Spec(String),
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("state error: {0}")]
    State(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}
