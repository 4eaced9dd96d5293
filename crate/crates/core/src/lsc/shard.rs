use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::change::{apply_edits, EditOp, FileEdit, MegaChange};
use super::spec::ChangeSpec;
use super::LscError;
use crate::fleet::{Fleet, Isa, LineDiff, RolloutPhase};
use crate::oracle::{package_failures, CheckResult};
use crate::rng::unit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ShardState {
    Pending,
    CiRunning,
    AwaitingApproval,
    Refused,
    Submitted,
    RolledBack,
}

impl ShardState {
    pub fn as_str(self) -> &'static str {
        match self {
            ShardState::Pending => "Pending",
            ShardState::CiRunning => "CiRunning",
            ShardState::AwaitingApproval => "AwaitingApproval",
            ShardState::Refused => "Refused",
            ShardState::Submitted => "Submitted",
            ShardState::RolledBack => "RolledBack",
        }
    }
}

impl fmt::Display for ShardState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The part of a change owned by one owner. `undo` holds the inverse edits
/// of the last submission, in application order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shard {
    pub owner_id: String,
    pub edits: Vec<FileEdit>,
    pub state: ShardState,
    pub attempts: u32,
    pub undo: Vec<FileEdit>,
}

impl Shard {
    pub fn packages(&self) -> BTreeSet<String> {
        self.edits.iter().map(|e| e.package_id().to_string()).collect()
    }
}

/// One row of the append-only shard event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardEvent {
    pub spec_id: String,
    pub owner: String,
    pub state: ShardState,
    /// `pass`, `fail`, or empty when no CI ran for this transition.
    pub ci_result: String,
    pub day: u32,
    /// Number of packages the shard covers at the time of the event.
    pub packages: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardedChange {
    pub spec_id: String,
    pub phase: RolloutPhase,
    pub global_approval: bool,
    pub shards: Vec<Shard>,
    pub events: Vec<ShardEvent>,
}

impl ShardedChange {
    /// All edits across shards, sorted; equals the mega-change it came from.
    pub fn union(&self) -> Vec<FileEdit> {
        let mut all: Vec<FileEdit> = self.shards.iter().flat_map(|s| s.edits.iter().cloned()).collect();
        all.sort();
        all
    }

    fn log(&mut self, idx: usize, state: ShardState, ci_result: &str, day: u32) {
        let shard = &self.shards[idx];
        self.events.push(ShardEvent {
            spec_id: self.spec_id.clone(),
            owner: shard.owner_id.clone(),
            state,
            ci_result: ci_result.to_string(),
            day,
            packages: shard.packages().len() as u32,
        });
    }
}

/// Partitions a mega-change into one shard per owner, ordered by owner id.
pub fn shard_by_owner(fleet: &Fleet, spec: &ChangeSpec, mega: &MegaChange) -> Result<ShardedChange, LscError> {
    let mut by_owner: BTreeMap<String, Vec<FileEdit>> = BTreeMap::new();
    for e in &mega.edits {
        let pkg = fleet
            .package(e.package_id())
            .ok_or_else(|| LscError::Integrity(format!("edited file {} belongs to no package", e.file)))?;
        by_owner.entry(pkg.owner_id.clone()).or_default().push(e.clone());
    }
    Ok(ShardedChange {
        spec_id: mega.spec_id.clone(),
        phase: spec.phase,
        global_approval: spec.global_approval,
        shards: by_owner
            .into_iter()
            .map(|(owner_id, edits)| Shard {
                owner_id,
                edits,
                state: ShardState::Pending,
                attempts: 0,
                undo: Vec::new(),
            })
            .collect(),
        events: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelinePolicy {
    pub seed: u64,
    pub day: u32,
    pub sanitizers: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CiFailure {
    pub package_id: String,
    pub target: String,
    pub isa: Isa,
    pub result: CheckResult,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShardOutcome {
    pub state: ShardState,
    pub ci_failures: Vec<CiFailure>,
    pub diffs: Vec<(String, LineDiff)>,
}

fn ci_run(fleet: &Fleet, package: &str, sanitizers: bool) -> Result<Vec<CiFailure>, LscError> {
    let mut out = Vec::new();
    for isa in Isa::ALL {
        for (target, result) in package_failures(fleet, package, isa, sanitizers)? {
            out.push(CiFailure {
                package_id: package.to_string(),
                target,
                isa,
                result,
            });
        }
    }
    Ok(out)
}

/// Runs CI for the shard's edits, then approval, then submission.
///
/// CI covers the build and test targets of every edited package on both ISAs,
/// plus direct reverse dependencies, which block only on failures the edits
/// introduce. A CI failure leaves the shard Pending (its logs are the hand-off
/// to a fixer). Approval is one seeded draw per attempt against the owner's
/// refusal probability for the change's phase, skipped under global approval.
pub fn run_shard_pipeline(
    fleet: &mut Fleet,
    change: &mut ShardedChange,
    idx: usize,
    policy: &PipelinePolicy,
) -> Result<ShardOutcome, LscError> {
    let shard = change
        .shards
        .get(idx)
        .ok_or_else(|| LscError::State(format!("change {} has no shard {idx}", change.spec_id)))?;
    if !matches!(shard.state, ShardState::Pending | ShardState::RolledBack) {
        return Err(LscError::State(format!(
            "shard {} of {} is {}, expected Pending or RolledBack",
            shard.owner_id, change.spec_id, shard.state
        )));
    }
    let edits: Vec<FileEdit> = shard.edits.iter().filter(|e| !e.is_applied(fleet)).cloned().collect();
    let packages = shard.packages();
    let owner_id = shard.owner_id.clone();
    change.shards[idx].state = ShardState::CiRunning;
    change.log(idx, ShardState::CiRunning, "", policy.day);

    let touches_code = edits.iter().any(|e| matches!(e.op, EditOp::Replace { .. }));
    let candidate = if touches_code {
        let mut c = fleet.clone();
        apply_edits(&mut c, &edits)?;
        Some(c)
    } else {
        None
    };
    let after = candidate.as_ref().unwrap_or(fleet);
    let mut failures = Vec::new();
    for p in &packages {
        failures.extend(ci_run(after, p, policy.sanitizers)?);
    }
    if touches_code {
        let rdeps: BTreeSet<String> = packages
            .iter()
            .flat_map(|p| fleet.reverse_deps(p))
            .filter(|r| !packages.contains(r))
            .collect();
        for r in rdeps {
            let before: BTreeSet<(String, Isa)> = ci_run(fleet, &r, policy.sanitizers)?
                .into_iter()
                .map(|f| (f.target, f.isa))
                .collect();
            failures.extend(
                ci_run(after, &r, policy.sanitizers)?
                    .into_iter()
                    .filter(|f| !before.contains(&(f.target.clone(), f.isa))),
            );
        }
    }
    if !failures.is_empty() {
        change.shards[idx].state = ShardState::Pending;
        change.log(idx, ShardState::Pending, "fail", policy.day);
        return Ok(ShardOutcome {
            state: ShardState::Pending,
            ci_failures: failures,
            diffs: Vec::new(),
        });
    }

    change.shards[idx].state = ShardState::AwaitingApproval;
    change.log(idx, ShardState::AwaitingApproval, "pass", policy.day);
    let attempt = change.shards[idx].attempts;
    change.shards[idx].attempts += 1;
    if !change.global_approval {
        let p = fleet
            .owner(&owner_id)
            .map(|o| o.refusal_probability(change.phase))
            .unwrap_or(0.0);
        let draw = unit(policy.seed, &approval_label(&change.spec_id, &owner_id, idx, attempt));
        if draw < p {
            change.shards[idx].state = ShardState::Refused;
            change.log(idx, ShardState::Refused, "pass", policy.day);
            return Ok(ShardOutcome {
                state: ShardState::Refused,
                ci_failures: Vec::new(),
                diffs: Vec::new(),
            });
        }
    }

    let diffs = apply_edits(fleet, &edits)?;
    let shard = &mut change.shards[idx];
    shard.undo = edits.iter().rev().map(FileEdit::inverse).collect();
    shard.state = ShardState::Submitted;
    change.log(idx, ShardState::Submitted, "pass", policy.day);
    Ok(ShardOutcome {
        state: ShardState::Submitted,
        ci_failures: Vec::new(),
        diffs,
    })
}

pub fn approval_label(spec_id: &str, owner_id: &str, shard: usize, attempt: u32) -> String {
    format!("lsc/approval/{spec_id}/{owner_id}/{shard}/{attempt}")
}

/// Reverts a submitted shard. Returns the diffs of the inverse edits.
pub fn rollback(
    fleet: &mut Fleet,
    change: &mut ShardedChange,
    idx: usize,
    day: u32,
) -> Result<Vec<(String, LineDiff)>, LscError> {
    let shard = change
        .shards
        .get_mut(idx)
        .ok_or_else(|| LscError::State(format!("change {} has no shard {idx}", change.spec_id)))?;
    if shard.state != ShardState::Submitted {
        return Err(LscError::State(format!(
            "cannot roll back shard {} of {} in state {}",
            shard.owner_id, change.spec_id, shard.state
        )));
    }
    let undo = std::mem::take(&mut shard.undo);
    let diffs = apply_edits(fleet, &undo)?;
    shard.state = ShardState::RolledBack;
    change.log(idx, ShardState::RolledBack, "", day);
    Ok(diffs)
}

/// Rolls back one package of a submitted shard. The package's edits move
/// to a new shard of the same owner (appended to the change) which is then
/// rolled back, so the partition of edits across shards is preserved.
/// Returns the index of the new shard and the diffs of the inverse edits.
pub fn rollback_package(
    fleet: &mut Fleet,
    change: &mut ShardedChange,
    idx: usize,
    package_id: &str,
    day: u32,
) -> Result<(usize, Vec<(String, LineDiff)>), LscError> {
    let shard = change
        .shards
        .get_mut(idx)
        .ok_or_else(|| LscError::State(format!("change {} has no shard {idx}", change.spec_id)))?;
    if shard.state != ShardState::Submitted {
        return Err(LscError::State(format!(
            "cannot roll back {package_id} from shard {} in state {}",
            shard.owner_id, shard.state
        )));
    }
    let (moved, kept): (Vec<FileEdit>, Vec<FileEdit>) =
        shard.edits.drain(..).partition(|e| e.package_id() == package_id);
    if moved.is_empty() {
        shard.edits = kept;
        return Err(LscError::State(format!(
            "shard {} does not edit {package_id}",
            shard.owner_id
        )));
    }
    if kept.is_empty() {
        shard.edits = moved;
        return Ok((idx, rollback(fleet, change, idx, day)?));
    }
    shard.edits = kept;
    let (undo_moved, undo_kept): (Vec<FileEdit>, Vec<FileEdit>) =
        shard.undo.drain(..).partition(|e| e.package_id() == package_id);
    shard.undo = undo_kept;
    let split = Shard {
        owner_id: shard.owner_id.clone(),
        edits: moved,
        state: ShardState::Submitted,
        attempts: shard.attempts,
        undo: undo_moved,
    };
    change.shards.push(split);
    let new_idx = change.shards.len() - 1;
    Ok((new_idx, rollback(fleet, change, new_idx, day)?))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseLscStats {
    pub approval_decisions: u64,
    pub refused: u64,
    pub submitted: u64,
    pub ci_failures: u64,
    pub packages_submitted: u64,
    pub packages_rolled_back: u64,
    pub refusal_rate: f64,
    pub rollback_rate: f64,
}

impl PhaseLscStats {
    fn finish(&mut self) {
        self.refusal_rate = ratio(self.refused, self.approval_decisions);
        self.rollback_rate = ratio(self.packages_rolled_back, self.packages_submitted);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LscStats {
    pub refusal_rate: f64,
    pub rollback_rate: f64,
    pub submitted_count: u64,
    pub refused_count: u64,
    pub rolled_back_packages: u64,
    pub totals: PhaseLscStats,
    pub per_phase: BTreeMap<RolloutPhase, PhaseLscStats>,
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Refusal rate is refused shards over approval decisions; rollback rate is
/// rolled-back packages over submitted packages.
pub fn lsc_stats(events: &[ShardEvent], phase_of_day: impl Fn(u32) -> RolloutPhase) -> LscStats {
    let mut per_phase: BTreeMap<RolloutPhase, PhaseLscStats> = RolloutPhase::ALL
        .iter()
        .map(|&p| (p, PhaseLscStats::default()))
        .collect();
    let mut totals = PhaseLscStats::default();
    for e in events {
        let phase = per_phase.get_mut(&phase_of_day(e.day)).expect("all phases present");
        for s in [&mut *phase, &mut totals] {
            match e.state {
                ShardState::Refused => {
                    s.refused += 1;
                    s.approval_decisions += 1;
                }
                ShardState::Submitted => {
                    s.submitted += 1;
                    s.approval_decisions += 1;
                    s.packages_submitted += e.packages as u64;
                }
                ShardState::RolledBack => s.packages_rolled_back += e.packages as u64,
                ShardState::Pending if e.ci_result == "fail" => s.ci_failures += 1,
                _ => {}
            }
        }
    }
    for s in per_phase.values_mut() {
        s.finish();
    }
    totals.finish();
    LscStats {
        refusal_rate: totals.refusal_rate,
        rollback_rate: totals.rollback_rate,
        submitted_count: totals.submitted,
        refused_count: totals.refused,
        rolled_back_packages: totals.packages_rolled_back,
        totals,
        per_phase,
    }
}

pub fn write_shard_events_csv<W: std::io::Write>(events: &[ShardEvent], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["spec_id", "owner", "state", "ci_result", "day", "packages"])?;
    for e in events {
        w.write_record([
            e.spec_id.as_str(),
            e.owner.as_str(),
            e.state.as_str(),
            e.ci_result.as_str(),
            &e.day.to_string(),
            &e.packages.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
