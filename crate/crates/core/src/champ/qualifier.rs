use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

use super::health::{DeployBlocked, HealthSample};
use super::ChampError;
use crate::fleet::Isa;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    CrashRate,
    RpcErrorRate,
    LatencyRatio,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::CrashRate => "crash_rate",
            Metric::RpcErrorRate => "rpc_error_rate",
            Metric::LatencyRatio => "latency_ratio",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Healthy,
    Regressed(Metric),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Arm crash rate may exceed x86 by at most this much (absolute).
    pub crash_margin: f64,
    /// Arm RPC error rate may be at most this multiple of x86.
    pub rpc_factor: f64,
    /// Upper bound on the Arm latency ratio.
    pub latency_max: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            crash_margin: 0.02,
            rpc_factor: 1.5,
            latency_max: 1.3,
        }
    }
}

/// Compares an Arm sample against the x86 sample of the same job and day.
/// Metrics are checked in the order crash, RPC errors, latency; the first
/// violation is reported.
pub fn evaluate(arm: &HealthSample, x86: &HealthSample, th: &Thresholds) -> Result<Verdict, ChampError> {
    if arm.job_id != x86.job_id || arm.day != x86.day {
        return Err(ChampError::Integrity(format!(
            "samples disagree: {}@{} vs {}@{}",
            arm.job_id, arm.day, x86.job_id, x86.day
        )));
    }
    if arm.isa != Isa::Arm || x86.isa != Isa::X86 {
        return Err(ChampError::Integrity(format!(
            "expected Arm and X86 samples, got {} and {}",
            arm.isa, x86.isa
        )));
    }
    Ok(if arm.crash_rate > x86.crash_rate + th.crash_margin {
        Verdict::Regressed(Metric::CrashRate)
    } else if arm.rpc_error_rate > th.rpc_factor * x86.rpc_error_rate {
        Verdict::Regressed(Metric::RpcErrorRate)
    } else if arm.latency_ratio > th.latency_max {
        Verdict::Regressed(Metric::LatencyRatio)
    } else {
        Verdict::Healthy
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    NotStarted,
    CanaryTask,
    CanaryJob,
    CanaryCell,
    Qualified,
    Ineligible { retry_day: u32, bug_id: String },
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::NotStarted => "NotStarted",
            Stage::CanaryTask => "CanaryTask",
            Stage::CanaryJob => "CanaryJob",
            Stage::CanaryCell => "CanaryCell",
            Stage::Qualified => "Qualified",
            Stage::Ineligible { .. } => "Ineligible",
        }
    }

    /// Stages a healthy job walks through, each for one dwell period.
    pub const LADDER: usize = 4;

    fn next(&self) -> Option<Stage> {
        match self {
            Stage::NotStarted => Some(Stage::CanaryTask),
            Stage::CanaryTask => Some(Stage::CanaryJob),
            Stage::CanaryJob => Some(Stage::CanaryCell),
            Stage::CanaryCell => Some(Stage::Qualified),
            _ => None,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The parts of a job the rollout fractions depend on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JobShape {
    pub tasks_per_cell: u32,
    pub cells: u32,
}

/// Share of the job's tasks running on Arm at `stage`: one task, a quarter
/// of one cell (at least one task), one whole cell, every cell.
pub fn arm_fraction(stage: &Stage, shape: JobShape) -> f64 {
    let tpc = shape.tasks_per_cell.max(1) as f64;
    let cells = shape.cells.max(1) as f64;
    match stage {
        Stage::NotStarted | Stage::Ineligible { .. } => 0.0,
        Stage::CanaryTask => 1.0 / (tpc * cells),
        Stage::CanaryJob => (0.25f64).max(1.0 / tpc) / cells,
        Stage::CanaryCell => 1.0 / cells,
        Stage::Qualified => 1.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChampConfig {
    pub dwell_days: u32,
    pub retry_days: u32,
    pub thresholds: Thresholds,
}

impl Default for ChampConfig {
    fn default() -> Self {
        ChampConfig {
            dwell_days: 3,
            retry_days: 30,
            thresholds: Thresholds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualificationState {
    pub job_id: String,
    pub stage: Stage,
    pub arm_fraction: f64,
    /// Consecutive healthy days at the current stage.
    pub healthy_streak: u32,
}

impl QualificationState {
    pub fn new(job_id: impl Into<String>) -> Self {
        QualificationState {
            job_id: job_id.into(),
            stage: Stage::NotStarted,
            arm_fraction: 0.0,
            healthy_streak: 0,
        }
    }
}

/// What CHAMP learned about a job on one day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Observation {
    Verdict(Verdict),
    Blocked(DeployBlocked),
}

impl Observation {
    pub fn label(&self) -> String {
        match self {
            Observation::Verdict(Verdict::Healthy) => "Healthy".into(),
            Observation::Verdict(Verdict::Regressed(m)) => format!("Regressed({})", m.as_str()),
            Observation::Blocked(b) => format!("Blocked({})", b.as_str()),
        }
    }
}

pub fn bug_id(job_id: &str, day: u32) -> String {
    format!("bug-{job_id}-{day}")
}

/// One day of the per-job state machine.
///
/// Healthy for `dwell_days` consecutive observed days advances one stage;
/// a regression makes the job ineligible until `day + retry_days`; a
/// blocked deployment leaves the state untouched. On or after its retry
/// day an ineligible job re-enters `CanaryTask`, and that day's
/// observation is not counted.
pub fn step_qualification(
    state: &QualificationState,
    obs: Observation,
    day: u32,
    shape: JobShape,
    cfg: &ChampConfig,
) -> Result<QualificationState, ChampError> {
    let mut next = state.clone();
    match (&state.stage, obs) {
        (Stage::Qualified, _) => {
            return Err(ChampError::State(format!(
                "{} is Qualified; requalification needs a new episode",
                state.job_id
            )))
        }
        (Stage::Ineligible { retry_day, .. }, _) => {
            if day >= *retry_day {
                next.stage = Stage::CanaryTask;
                next.healthy_streak = 0;
            }
        }
        (_, Observation::Blocked(_)) => {}
        (_, Observation::Verdict(Verdict::Regressed(_))) => {
            next.stage = Stage::Ineligible {
                retry_day: day + cfg.retry_days,
                bug_id: bug_id(&state.job_id, day),
            };
            next.healthy_streak = 0;
        }
        (stage, Observation::Verdict(Verdict::Healthy)) => {
            next.healthy_streak += 1;
            if next.healthy_streak >= cfg.dwell_days {
                next.stage = stage.next().expect("canary stages advance");
                next.healthy_streak = 0;
            }
        }
    }
    next.arm_fraction = arm_fraction(&next.stage, shape);
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualEvent {
    pub day: u32,
    pub job_id: String,
    pub stage_before: String,
    pub verdict: String,
    pub stage_after: String,
    pub arm_fraction: f64,
    /// Open bug of the job after the step, if any.
    pub bug_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BugRecord {
    pub bug_id: String,
    pub job_id: String,
    pub day_filed: u32,
    pub metric: Metric,
    pub arm_value: Option<f64>,
    pub x86_value: Option<f64>,
    pub resolved: bool,
    pub day_resolved: Option<u32>,
}

/// Qualification state of every job, with the event log and bug tracker.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Champ {
    pub config: ChampConfig,
    pub states: BTreeMap<String, QualificationState>,
    pub events: Vec<QualEvent>,
    pub bugs: Vec<BugRecord>,
}

impl Champ {
    pub fn new(config: ChampConfig) -> Self {
        Champ {
            config,
            ..Champ::default()
        }
    }

    pub fn state(&self, job_id: &str) -> Option<&QualificationState> {
        self.states.get(job_id)
    }

    pub fn stage(&self, job_id: &str) -> Stage {
        self.states.get(job_id).map_or(Stage::NotStarted, |s| s.stage.clone())
    }

    /// True when the job needs no observation today: it is qualified, or
    /// ineligible with its retry day still ahead.
    pub fn idle(&self, job_id: &str, day: u32) -> bool {
        match self.stage(job_id) {
            Stage::Qualified => true,
            Stage::Ineligible { retry_day, .. } => day < retry_day,
            _ => false,
        }
    }

    /// Feeds one observation. `samples` are the (Arm, x86) pair behind a
    /// verdict and are used only to fill in a filed bug.
    pub fn observe(
        &mut self,
        job_id: &str,
        day: u32,
        shape: JobShape,
        obs: Observation,
        samples: Option<(&HealthSample, &HealthSample)>,
    ) -> Result<&QualEvent, ChampError> {
        let before = self
            .states
            .entry(job_id.to_string())
            .or_insert_with(|| QualificationState::new(job_id))
            .clone();
        let after = step_qualification(&before, obs, day, shape, &self.config)?;

        if let (Stage::Ineligible { bug_id, .. }, Stage::CanaryTask) = (&before.stage, &after.stage) {
            let bug = self
                .bugs
                .iter_mut()
                .find(|b| &b.bug_id == bug_id)
                .expect("open bug exists");
            bug.resolved = true;
            bug.day_resolved = Some(day);
        }
        let mut open_bug = None;
        if let Stage::Ineligible { bug_id, .. } = &after.stage {
            open_bug = Some(bug_id.clone());
            if !matches!(before.stage, Stage::Ineligible { .. }) {
                let Observation::Verdict(Verdict::Regressed(metric)) = obs else {
                    unreachable!("only a regression makes a job ineligible")
                };
                let (arm_value, x86_value) = samples
                    .map(|(a, x)| match metric {
                        Metric::CrashRate => (a.crash_rate, x.crash_rate),
                        Metric::RpcErrorRate => (a.rpc_error_rate, x.rpc_error_rate),
                        Metric::LatencyRatio => (a.latency_ratio, x.latency_ratio),
                    })
                    .unzip();
                self.bugs.push(BugRecord {
                    bug_id: bug_id.clone(),
                    job_id: job_id.to_string(),
                    day_filed: day,
                    metric,
                    arm_value,
                    x86_value,
                    resolved: false,
                    day_resolved: None,
                });
            }
        }
        self.events.push(QualEvent {
            day,
            job_id: job_id.to_string(),
            stage_before: before.stage.name().to_string(),
            verdict: obs.label(),
            stage_after: after.stage.name().to_string(),
            arm_fraction: after.arm_fraction,
            bug_id: open_bug,
        });
        self.states.insert(job_id.to_string(), after);
        Ok(self.events.last().expect("just pushed"))
    }

    pub fn qualified(&self) -> usize {
        self.states.values().filter(|s| s.stage == Stage::Qualified).count()
    }
}
