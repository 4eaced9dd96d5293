use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use super::config::ScenarioConfig;
use super::scripted::scripted_commits;
use super::SimError;
use crate::agent::{orchestrate, validate_trace, Outcome, RuleReasoner, RuleTable};
use crate::champ::{evaluate, sample_health, Champ, HealthError, JobShape, Observation, QualEvent, Stage};
use crate::fleet::{line_diff, Fleet, Isa, LineDiff, RolloutPhase};
use crate::lsc::{
    generate_change, rollback_package, run_shard_pipeline, shard_by_owner, ChangeSpec, PipelinePolicy, ShardEvent,
    ShardState, ShardedChange,
};
use crate::oracle::{
    apply_edit_in_place, build_release, fix_defect_in_place, package_defects, package_failures, DefectClass, Edit,
};
use crate::taxonomy::{classify_heuristic, Category, CommitRecord, FileDiff};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LifecycleStage {
    TestFix,
    MultiarchCi,
    ReleaseConfig,
    Rollout,
    FullProduction,
}

impl LifecycleStage {
    pub const ALL: [LifecycleStage; 5] = [
        LifecycleStage::TestFix,
        LifecycleStage::MultiarchCi,
        LifecycleStage::ReleaseConfig,
        LifecycleStage::Rollout,
        LifecycleStage::FullProduction,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LifecycleStage::TestFix => "TestFix",
            LifecycleStage::MultiarchCi => "MultiarchCi",
            LifecycleStage::ReleaseConfig => "ReleaseConfig",
            LifecycleStage::Rollout => "Rollout",
            LifecycleStage::FullProduction => "FullProduction",
        }
    }
}

impl fmt::Display for LifecycleStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LifecycleEvent {
    pub day: u32,
    pub package_id: String,
    /// `None` when the package enters the migration.
    pub stage_before: Option<LifecycleStage>,
    pub stage_after: LifecycleStage,
    pub note: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ManualKind {
    /// Build or test failures on Arm.
    GateFix,
    /// The defect that made a multiarch release too large.
    ReleaseFix,
    /// Production faults behind a CHAMP bug.
    RuntimeFix,
    /// An x86-only scheduling constraint.
    SchedulingFix,
}

impl ManualKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ManualKind::GateFix => "gate-fix",
            ManualKind::ReleaseFix => "release-fix",
            ManualKind::RuntimeFix => "runtime-fix",
            ManualKind::SchedulingFix => "scheduling-fix",
        }
    }

    fn classes(self) -> &'static [DefectClass] {
        match self {
            ManualKind::GateFix => &[],
            ManualKind::ReleaseFix => &[DefectClass::ReleaseSizeOverflow],
            ManualKind::RuntimeFix => &[DefectClass::HeapLimit, DefectClass::MemoryOrdering],
            ManualKind::SchedulingFix => &[DefectClass::SchedulingConstraint],
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentStats {
    pub runs: u64,
    pub fixed: u64,
    pub gave_up: u64,
    pub step_limit: u64,
    pub applied_edits: u64,
    pub tool_calls: u64,
    pub trace_violations: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayFraction {
    pub day: u32,
    pub qualified_jobs: u64,
    pub total_jobs: u64,
    pub fraction: f64,
}

/// Category implied by the defect class a fix removes.
pub fn category_of_class(class: DefectClass) -> Category {
    match class {
        DefectClass::IntrinsicUse => Category::IntrinsicsAndVectorCode,
        DefectClass::LongDouble => Category::DataRepresentation,
        DefectClass::ExactFpEquality => Category::TestFixes,
        DefectClass::ArchSpecificFlag | DefectClass::UnsupportedDependency => Category::BuildAndConfigFiles,
        DefectClass::MemoryOrdering => Category::MemoryModel,
        DefectClass::HeapLimit | DefectClass::SchedulingConstraint => Category::SchedulingAndProvisioning,
        DefectClass::ReleaseSizeOverflow => Category::ReleaseAndRolloutConfig,
    }
}

/// Commit metadata for one fleet mutation.
struct CommitMeta {
    origin: String,
    message: String,
    automated: bool,
    /// Falls back to the heuristic classifier when `None`.
    category: Option<Category>,
}

/// Scenario state. The fleet is private: every mutation goes through a
/// method that records exactly one commit for it.
pub struct Simulation {
    cfg: ScenarioConfig,
    fleet: Fleet,
    initial: Fleet,
    waiting: VecDeque<String>,
    stages: BTreeMap<String, LifecycleStage>,
    release_day: BTreeMap<String, u32>,
    manual_due: BTreeSet<(u32, String, ManualKind)>,
    manual_pending: BTreeSet<(String, ManualKind)>,
    /// Packages the agent could not move; they wait for a manual fix.
    agent_stuck: BTreeSet<String>,
    champ: Champ,
    corpus: Vec<CommitRecord>,
    shard_events: Vec<ShardEvent>,
    lifecycle: Vec<LifecycleEvent>,
    qualified: Vec<DayFraction>,
    agent_stats: AgentStats,
    manual_fixes: u64,
}

/// Everything a finished scenario produced.
pub struct SimRun {
    pub config: ScenarioConfig,
    pub initial: Fleet,
    pub fleet: Fleet,
    pub corpus: Vec<CommitRecord>,
    pub shard_events: Vec<ShardEvent>,
    pub lifecycle: Vec<LifecycleEvent>,
    pub qualified: Vec<DayFraction>,
    pub champ: Champ,
    pub stages: BTreeMap<String, LifecycleStage>,
    pub agent_stats: AgentStats,
    pub manual_fixes: u64,
}

impl Simulation {
    pub fn new(cfg: ScenarioConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let fleet = crate::fleet::generate_fleet(&cfg.fleet).map_err(|e| SimError::Config(e.to_string()))?;
        Self::with_fleet(cfg, fleet)
    }

    pub fn with_fleet(cfg: ScenarioConfig, fleet: Fleet) -> Result<Self, SimError> {
        cfg.validate()?;
        fleet.validate().map_err(|e| SimError::Config(e.to_string()))?;
        let waiting = fleet.topo_order().map_err(|e| SimError::Config(e.to_string()))?.into();
        Ok(Simulation {
            champ: Champ::new(cfg.champ),
            cfg,
            initial: fleet.clone(),
            fleet,
            waiting,
            stages: BTreeMap::new(),
            release_day: BTreeMap::new(),
            manual_due: BTreeSet::new(),
            manual_pending: BTreeSet::new(),
            agent_stuck: BTreeSet::new(),
            corpus: Vec::new(),
            shard_events: Vec::new(),
            lifecycle: Vec::new(),
            qualified: Vec::new(),
            agent_stats: AgentStats::default(),
            manual_fixes: 0,
        })
    }

    pub fn run(mut self) -> Result<SimRun, SimError> {
        for day in 0..self.cfg.days {
            self.step_day(day)?;
        }
        Ok(SimRun {
            config: self.cfg,
            initial: self.initial,
            fleet: self.fleet,
            corpus: self.corpus,
            shard_events: self.shard_events,
            lifecycle: self.lifecycle,
            qualified: self.qualified,
            champ: self.champ,
            stages: self.stages,
            agent_stats: self.agent_stats,
            manual_fixes: self.manual_fixes,
        })
    }

    fn phase(&self, day: u32) -> RolloutPhase {
        self.cfg.phases.phase_of(day)
    }

    fn step_day(&mut self, day: u32) -> Result<(), SimError> {
        self.fleet.clock_day = day;
        self.activate(day);
        self.run_manual_work(day)?;
        self.run_scheduled_lscs(day)?;
        self.gate(day)?;
        self.lsc_stage(day, LifecycleStage::MultiarchCi)?;
        self.lsc_stage(day, LifecycleStage::ReleaseConfig)?;
        self.rollout(day)?;
        self.scripted(day);
        let total = self.fleet.jobs.len() as u64;
        let q = self.champ.qualified() as u64;
        self.qualified.push(DayFraction {
            day,
            qualified_jobs: q,
            total_jobs: total,
            fraction: if total == 0 { 0.0 } else { q as f64 / total as f64 },
        });
        Ok(())
    }

    fn set_stage(&mut self, day: u32, pkg: &str, to: LifecycleStage, note: impl Into<String>) {
        let before = self.stages.insert(pkg.to_string(), to);
        self.lifecycle.push(LifecycleEvent {
            day,
            package_id: pkg.to_string(),
            stage_before: before,
            stage_after: to,
            note: note.into(),
        });
    }

    fn in_stage(&self, stage: LifecycleStage) -> Vec<String> {
        self.stages
            .iter()
            .filter(|(_, s)| **s == stage)
            .map(|(p, _)| p.clone())
            .collect()
    }

    fn schedule_manual(&mut self, due: u32, pkg: &str, kind: ManualKind) {
        if self.manual_pending.insert((pkg.to_string(), kind)) {
            self.manual_due.insert((due, pkg.to_string(), kind));
        }
    }

    fn activate(&mut self, day: u32) {
        let n = self.cfg.activation_per_day.get(&self.phase(day)).copied().unwrap_or(0);
        for _ in 0..n {
            let Some(pkg) = self.waiting.pop_front() else {
                break;
            };
            self.set_stage(day, &pkg, LifecycleStage::TestFix, "activated");
        }
    }

    // Mutations. Each records exactly one commit when it changes the fleet.

    fn push_commit(&mut self, day: u32, meta: CommitMeta, diffs: Vec<FileDiff>) {
        let mut rec = CommitRecord::new(
            format!("c{:06}", self.corpus.len()),
            day,
            meta.message,
            diffs,
            meta.automated,
        );
        rec.origin = meta.origin;
        rec.category = Some(meta.category.unwrap_or_else(|| classify_heuristic(&rec)));
        self.corpus.push(rec);
    }

    fn record_diffs(&mut self, day: u32, meta: CommitMeta, diffs: Vec<(String, LineDiff)>) -> bool {
        let diffs: Vec<FileDiff> = diffs
            .iter()
            .filter(|(_, d)| !d.is_empty())
            .map(|(p, d)| FileDiff::from_line_diff(p, d))
            .collect();
        if diffs.is_empty() {
            return false;
        }
        self.push_commit(day, meta, diffs);
        true
    }

    fn commit_edit(&mut self, day: u32, edit: &Edit, meta: CommitMeta) -> Result<(), SimError> {
        let before = self.fleet.file(&edit.file).map(|f| f.lines.clone()).unwrap_or_default();
        apply_edit_in_place(&mut self.fleet, edit)?;
        let after = &self.fleet.file(&edit.file).expect("edited file exists").lines;
        let diff = line_diff(&before, after);
        self.record_diffs(day, meta, vec![(edit.file.clone(), diff)]);
        Ok(())
    }

    fn commit_defect_fix(&mut self, day: u32, defect_id: &str, kind: ManualKind) -> Result<(), SimError> {
        let path = defect_id
            .rsplit_once(':')
            .map(|(p, _)| p.to_string())
            .unwrap_or_default();
        let before = self.fleet.file(&path).map(|f| f.lines.clone()).unwrap_or_default();
        let d = fix_defect_in_place(&mut self.fleet, defect_id)?;
        let diff = line_diff(&before, &self.fleet.file(&path).expect("fixed file exists").lines);
        self.manual_fixes += 1;
        self.record_diffs(
            day,
            CommitMeta {
                origin: format!("manual/{}", kind.as_str()),
                message: format!("Fix {} in {}", d.class, d.file_path),
                automated: false,
                category: Some(category_of_class(d.class)),
            },
            vec![(path, diff)],
        );
        Ok(())
    }

    fn run_manual_work(&mut self, day: u32) -> Result<(), SimError> {
        let due: Vec<(u32, String, ManualKind)> = self
            .manual_due
            .range(..(day + 1, String::new(), ManualKind::GateFix))
            .cloned()
            .collect();
        for item in due {
            self.manual_due.remove(&item);
            let (_, pkg, kind) = item;
            self.manual_pending.remove(&(pkg.clone(), kind));
            match kind {
                ManualKind::GateFix => {
                    self.agent_stuck.remove(&pkg);
                    for _ in 0..64 {
                        let failures = package_failures(&self.fleet, &pkg, Isa::Arm, self.cfg.sanitizers)?;
                        let Some(id) = failures
                            .iter()
                            .flat_map(|(_, r)| r.surfaced_defects.iter())
                            .next()
                            .cloned()
                        else {
                            break;
                        };
                        self.commit_defect_fix(day, &id, kind)?;
                    }
                }
                _ => {
                    let ids: Vec<String> = package_defects(&self.fleet, &pkg)
                        .into_iter()
                        .filter(|d| kind.classes().contains(&d.class))
                        .map(|d| d.id)
                        .collect();
                    for id in ids {
                        self.commit_defect_fix(day, &id, kind)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn gate_green(&self, pkg: &str) -> Result<bool, SimError> {
        Ok(package_failures(&self.fleet, pkg, Isa::Arm, self.cfg.sanitizers)?.is_empty())
    }

    /// TestFix: a package moves on once all its targets build and pass on
    /// Arm. Otherwise the agent gets one run per day while it makes progress,
    /// and owners fix it by hand after a delay when it does not.
    fn gate(&mut self, day: u32) -> Result<(), SimError> {
        for pkg in self.in_stage(LifecycleStage::TestFix) {
            if self.gate_green(&pkg)? {
                self.set_stage(day, &pkg, LifecycleStage::MultiarchCi, "builds and tests pass on Arm");
                continue;
            }
            if self.cfg.agent && !self.agent_stuck.contains(&pkg) {
                let progressed = self.run_agent(day, &pkg)?;
                if self.gate_green(&pkg)? {
                    self.set_stage(day, &pkg, LifecycleStage::MultiarchCi, "fixed by agent");
                    continue;
                }
                if progressed {
                    continue;
                }
                self.agent_stuck.insert(pkg.clone());
            }
            self.schedule_manual(day + self.cfg.manual_fix_days, &pkg, ManualKind::GateFix);
        }
        Ok(())
    }

    /// Runs the agent on a scratch copy, then replays its applied edits on
    /// the fleet one commit each. Returns whether any edit landed.
    fn run_agent(&mut self, day: u32, pkg: &str) -> Result<bool, SimError> {
        let goals: Vec<String> = self
            .fleet
            .package(pkg)
            .map(|p| p.targets().map(|t| t.id.clone()).collect())
            .unwrap_or_default();
        let table = match &self.cfg.agent_rules {
            Some(classes) => RuleTable::only(classes),
            None => RuleTable::full(),
        };
        let mut reasoner = RuleReasoner::new(table);
        let mut acfg = self.cfg.agent_config;
        acfg.sanitizers = self.cfg.sanitizers;
        let mut scratch = self.fleet.clone();
        let trace = orchestrate(&mut scratch, &goals, &mut reasoner, &acfg);
        let s = &mut self.agent_stats;
        s.runs += 1;
        s.tool_calls += trace.tool_calls() as u64;
        match trace.outcome {
            Outcome::Fixed => s.fixed += 1,
            Outcome::GaveUp => s.gave_up += 1,
            Outcome::StepLimit => s.step_limit += 1,
        }
        if validate_trace(&trace).is_err() {
            s.trace_violations += 1;
        }
        let edits = trace.applied_edits();
        self.agent_stats.applied_edits += edits.len() as u64;
        for (file, match_text, replacement) in &edits {
            let class = DefectClass::ALL.into_iter().find(|c| c.pattern() == match_text);
            let message = match class {
                Some(c) => format!("Fix {c} in {file} for Arm"),
                None => format!("Port {file} to Arm"),
            };
            self.commit_edit(
                day,
                &Edit::new(file, match_text, replacement),
                CommitMeta {
                    origin: "agent".into(),
                    message,
                    automated: true,
                    category: class.map(category_of_class),
                },
            )?;
        }
        if self.fleet.packages != scratch.packages {
            return Err(SimError::Internal(format!(
                "replaying agent edits for {pkg} diverged from its workspace"
            )));
        }
        Ok(!edits.is_empty())
    }

    fn run_change(
        &mut self,
        day: u32,
        spec: &ChangeSpec,
        mut on_submit: impl FnMut(&mut Self, &mut ShardedChange, usize) -> Result<(), SimError>,
    ) -> Result<ShardedChange, SimError> {
        let mega = generate_change(&self.fleet, spec)?;
        let mut change = shard_by_owner(&self.fleet, spec, &mega)?;
        let policy = PipelinePolicy {
            seed: self.cfg.seed,
            day,
            sanitizers: self.cfg.sanitizers,
        };
        for idx in 0..change.shards.len() {
            let outcome = run_shard_pipeline(&mut self.fleet, &mut change, idx, &policy)?;
            if outcome.state == ShardState::Submitted {
                let shard = &change.shards[idx];
                let message = format!(
                    "[{}] {} for owner {} ({} packages)",
                    spec.id,
                    spec.template,
                    shard.owner_id,
                    shard.packages().len()
                );
                let category = match spec.template.as_str() {
                    "enable_arm_ci" => Some(Category::TestExecutionEnvironment),
                    "enable_arm_release" => Some(Category::ReleaseAndRolloutConfig),
                    _ => None,
                };
                self.record_diffs(
                    day,
                    CommitMeta {
                        origin: format!("lsc/{}", spec.id),
                        message,
                        automated: true,
                        category,
                    },
                    outcome.diffs,
                );
                on_submit(self, &mut change, idx)?;
            } else if outcome.state == ShardState::Pending {
                for f in &outcome.ci_failures {
                    if self
                        .stages
                        .get(&f.package_id)
                        .is_some_and(|s| *s != LifecycleStage::TestFix)
                    {
                        self.set_stage(
                            day,
                            &f.package_id.clone(),
                            LifecycleStage::TestFix,
                            format!("LSC CI failed on {}", f.target),
                        );
                    }
                }
            }
        }
        self.shard_events.extend(change.events.iter().cloned());
        Ok(change)
    }

    fn run_scheduled_lscs(&mut self, day: u32) -> Result<(), SimError> {
        let specs: Vec<ChangeSpec> = self
            .cfg
            .lsc_specs
            .iter()
            .filter(|l| l.day == day)
            .map(|l| l.spec.clone())
            .collect();
        for spec in specs {
            self.run_change(day, &spec, |_, _, _| Ok(()))?;
        }
        Ok(())
    }

    /// One LSC per day covering every package waiting in `stage`: Arm CI for
    /// MultiarchCi, the Arm release variant for ReleaseConfig. Submitted
    /// releases are built; an oversized one is rolled back for its package
    /// and goes to its owners.
    fn lsc_stage(&mut self, day: u32, stage: LifecycleStage) -> Result<(), SimError> {
        let (template, prefix, next) = match stage {
            LifecycleStage::MultiarchCi => ("enable_arm_ci", "arm-ci", LifecycleStage::ReleaseConfig),
            LifecycleStage::ReleaseConfig => ("enable_arm_release", "arm-release", LifecycleStage::Rollout),
            _ => unreachable!("only CI and release stages run LSCs"),
        };
        let mut todo = Vec::new();
        for pkg in self.in_stage(stage) {
            if self.manual_pending.contains(&(pkg.clone(), ManualKind::ReleaseFix)) {
                continue;
            }
            let bp = &self.fleet.package(&pkg).expect("staged package exists").blueprint;
            let done = match stage {
                LifecycleStage::MultiarchCi => bp.ci_on(Isa::Arm),
                _ => bp.arm_release(),
            };
            if done && stage == LifecycleStage::MultiarchCi {
                self.set_stage(day, &pkg, next, "Arm CI already on");
            } else if done {
                self.release(day, &pkg)?;
            } else {
                todo.push(pkg);
            }
        }
        if todo.is_empty() {
            return Ok(());
        }
        let phase = self.phase(day);
        let mut spec = ChangeSpec::new(
            format!("{prefix}-d{day:03}"),
            format!("blueprint({})", todo.join(",")),
            template,
            phase,
        );
        spec.global_approval = phase == RolloutPhase::Final;
        self.run_change(day, &spec, |sim, change, idx| {
            let pkgs: Vec<String> = change.shards[idx].packages().into_iter().collect();
            for pkg in pkgs {
                if stage == LifecycleStage::MultiarchCi {
                    sim.set_stage(day, &pkg, next, format!("Arm CI enabled by {}", change.spec_id));
                } else if !sim.release(day, &pkg)? {
                    let (_, diffs) = rollback_package(&mut sim.fleet, change, idx, &pkg, day)?;
                    sim.record_diffs(
                        day,
                        CommitMeta {
                            origin: format!("lsc-rollback/{}", change.spec_id),
                            message: format!("Roll back Arm release of {pkg}: multiarch release over size limit"),
                            automated: true,
                            category: Some(Category::ReleaseAndRolloutConfig),
                        },
                        diffs,
                    );
                    sim.schedule_manual(day + sim.cfg.release_fix_days, &pkg, ManualKind::ReleaseFix);
                }
            }
            Ok(())
        })?;
        Ok(())
    }

    /// Builds the multiarch release; on success the package enters Rollout.
    fn release(&mut self, day: u32, pkg: &str) -> Result<bool, SimError> {
        let isas: BTreeSet<Isa> = Isa::ALL.into_iter().collect();
        let r = build_release(&self.fleet, pkg, &isas, self.cfg.release_size_limit)?;
        if r.status != crate::oracle::Status::Pass {
            return Ok(false);
        }
        self.release_day.insert(pkg.to_string(), day);
        self.set_stage(
            day,
            pkg,
            LifecycleStage::Rollout,
            format!("multiarch release built ({} size units)", r.size_units),
        );
        Ok(true)
    }

    /// CHAMP observes every job of every released package from the day after
    /// its release on.
    fn rollout(&mut self, day: u32) -> Result<(), SimError> {
        for pkg in self.in_stage(LifecycleStage::Rollout) {
            if self.release_day.get(&pkg).is_none_or(|&d| d >= day) {
                continue;
            }
            let jobs: Vec<(String, JobShape)> = self
                .fleet
                .jobs_of(&pkg)
                .map(|j| {
                    (
                        j.id.clone(),
                        JobShape {
                            tasks_per_cell: j.tasks_per_cell,
                            cells: j.cells.len() as u32,
                        },
                    )
                })
                .collect();
            for (job, shape) in &jobs {
                if self.champ.idle(job, day) {
                    continue;
                }
                let seed = self.cfg.seed;
                let x86 = sample_health(&self.fleet, job, Isa::X86, day, seed, &self.cfg.health)
                    .map_err(|e| SimError::Internal(e.to_string()))?;
                let arm = sample_health(&self.fleet, job, Isa::Arm, day, seed, &self.cfg.health);
                let event: QualEvent = match &arm {
                    Err(HealthError::DeployBlocked(b)) => {
                        if *b == crate::champ::DeployBlocked::ArchConstraint
                            && package_defects(&self.fleet, &pkg)
                                .iter()
                                .any(|d| d.class == DefectClass::SchedulingConstraint)
                        {
                            self.schedule_manual(day + self.cfg.scheduling_fix_days, &pkg, ManualKind::SchedulingFix);
                        }
                        self.champ
                            .observe(job, day, *shape, Observation::Blocked(*b), None)?
                            .clone()
                    }
                    Err(e) => return Err(SimError::Internal(e.to_string())),
                    Ok(a) => {
                        let v = evaluate(a, &x86, &self.cfg.champ.thresholds)?;
                        self.champ
                            .observe(job, day, *shape, Observation::Verdict(v), Some((a, &x86)))?
                            .clone()
                    }
                };
                if event.stage_after == "Ineligible" && event.stage_before != "Ineligible" {
                    self.schedule_manual(day + self.cfg.bug_fix_days, &pkg, ManualKind::RuntimeFix);
                }
            }
            if jobs.iter().all(|(j, _)| self.champ.stage(j) == Stage::Qualified) {
                self.set_stage(day, &pkg, LifecycleStage::FullProduction, "all jobs qualified on Arm");
            }
        }
        Ok(())
    }

    fn scripted(&mut self, day: u32) {
        let phase = self.phase(day);
        let streams = self.cfg.scripted.clone();
        for s in &streams {
            for c in scripted_commits(s, phase, day, self.cfg.seed) {
                self.push_commit(
                    day,
                    CommitMeta {
                        origin: format!("scripted/{}", s.name),
                        message: c.message,
                        automated: false,
                        category: Some(c.category),
                    },
                    vec![c.diff],
                );
            }
        }
    }
}
