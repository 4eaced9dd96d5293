use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::fleet::{Fleet, Isa, Job};
use crate::oracle::{arch_constrained, runtime_faults};
use crate::rng::stream;

/// Health metrics of one job on one ISA for one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthSample {
    pub job_id: String,
    pub isa: Isa,
    pub day: u32,
    pub crash_rate: f64,
    pub rpc_error_rate: f64,
    pub latency_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DeployBlocked {
    NoArmRelease,
    NoArmCapacity,
    ArchConstraint,
}

impl DeployBlocked {
    pub fn as_str(self) -> &'static str {
        match self {
            DeployBlocked::NoArmRelease => "NoArmRelease",
            DeployBlocked::NoArmCapacity => "NoArmCapacity",
            DeployBlocked::ArchConstraint => "ArchConstraint",
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HealthError {
    #[error("job not found: {0}")]
    NotFound(String),
    #[error("job cannot be deployed: {}", .0.as_str())]
    DeployBlocked(DeployBlocked),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HealthModel {
    /// Half-width of the uniform noise added to every metric.
    pub noise_bound: f64,
    /// Arm crash-rate increase per unfixed heap-limit fault.
    pub heap_limit_penalty: f64,
    /// Arm crash-rate increase per memory-ordering fault that reached
    /// production.
    pub memory_ordering_penalty: f64,
}

impl Default for HealthModel {
    fn default() -> Self {
        HealthModel {
            noise_bound: 0.002,
            heap_limit_penalty: 0.05,
            memory_ordering_penalty: 0.03,
        }
    }
}

/// Why `job` cannot run on `isa`, if anything. X86 is always deployable.
pub fn deploy_blocker(fleet: &Fleet, job: &Job, isa: Isa) -> Option<DeployBlocked> {
    if isa == Isa::X86 {
        return None;
    }
    let pkg = fleet.package(&job.package_id)?;
    if !pkg.blueprint.arm_release() {
        return Some(DeployBlocked::NoArmRelease);
    }
    if arch_constrained(fleet, job) {
        return Some(DeployBlocked::ArchConstraint);
    }
    if !job
        .cells
        .iter()
        .any(|c| fleet.cell(c).is_some_and(|c| c.slots(Isa::Arm) > 0))
    {
        return Some(DeployBlocked::NoArmCapacity);
    }
    None
}

/// Per-job baseline (crash rate, RPC error rate); it depends only on the
/// seed and the job id.
fn baseline(seed: u64, job_id: &str) -> (f64, f64) {
    let mut rng = stream(seed, &format!("champ/baseline/{job_id}"));
    (rng.gen_range(0.001..0.01), rng.gen_range(0.012..0.02))
}

/// One day's health sample. Noise is drawn from a stream keyed on
/// (job, day, isa); Arm samples carry a deterministic penalty per runtime
/// fault of the job's package.
pub fn sample_health(
    fleet: &Fleet,
    job_id: &str,
    isa: Isa,
    day: u32,
    seed: u64,
    model: &HealthModel,
) -> Result<HealthSample, HealthError> {
    let job = fleet
        .job(job_id)
        .ok_or_else(|| HealthError::NotFound(job_id.to_string()))?;
    if let Some(b) = deploy_blocker(fleet, job, isa) {
        return Err(HealthError::DeployBlocked(b));
    }
    let (crash, rpc) = baseline(seed, job_id);
    let mut rng = stream(seed, &format!("champ/noise/{job_id}/{day}/{isa}"));
    let b = model.noise_bound;
    let mut noise = || if b > 0.0 { rng.gen_range(-b..=b) } else { 0.0 };
    let mut crash_rate = crash + noise();
    let rpc_error_rate = rpc + noise();
    let latency_ratio = 1.0 + noise();
    if isa == Isa::Arm {
        let faults = runtime_faults(fleet, &job.package_id);
        crash_rate += model.heap_limit_penalty * faults.heap_limit as f64
            + model.memory_ordering_penalty * faults.memory_ordering as f64;
    }
    Ok(HealthSample {
        job_id: job_id.to_string(),
        isa,
        day,
        crash_rate: crash_rate.clamp(0.0, 1.0),
        rpc_error_rate: rpc_error_rate.clamp(0.0, 1.0),
        latency_ratio: latency_ratio.max(f64::MIN_POSITIVE),
    })
}
