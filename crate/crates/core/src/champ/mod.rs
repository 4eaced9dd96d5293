//! Arm auto-qualification of production jobs.
//!
//! [`sample_health`] turns a fleet snapshot into daily per-ISA health
//! samples. The qualifier compares Arm against x86 ([`evaluate`]) and walks
//! each job up a canary ladder ([`step_qualification`]): one task, a quarter
//! of a cell, one cell, all cells. Regressions make the job ineligible,
//! file a bug and schedule a retry. The qualifier only ever sees samples.

mod health;
mod log;
mod qualifier;

pub use health::{deploy_blocker, sample_health, DeployBlocked, HealthError, HealthModel, HealthSample};
pub use log::{bugs_json, check_event_log, write_events_csv, ReplaySummary};
pub use qualifier::{
    arm_fraction, bug_id, evaluate, step_qualification, BugRecord, Champ, ChampConfig, JobShape, Metric, Observation,
    QualEvent, QualificationState, Stage, Thresholds, Verdict,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChampError {
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("state error: {0}")]
    State(String),
}
