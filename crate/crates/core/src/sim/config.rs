use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

use super::SimError;
use crate::agent::AgentConfig;
use crate::champ::{ChampConfig, HealthModel};
use crate::fleet::{FleetParams, RolloutPhase};
use crate::lsc::ChangeSpec;
use crate::oracle::DefectClass;
use crate::taxonomy::Category;

/// Day ranges of the rollout phases: Early `[0, early_end)`, ScaleUp
/// `[early_end, scale_up_end)`, Final from `scale_up_end` on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseSchedule {
    pub early_end: u32,
    pub scale_up_end: u32,
}

impl Default for PhaseSchedule {
    fn default() -> Self {
        PhaseSchedule {
            early_end: 30,
            scale_up_end: 75,
        }
    }
}

impl PhaseSchedule {
    pub fn phase_of(&self, day: u32) -> RolloutPhase {
        if day < self.early_end {
            RolloutPhase::Early
        } else if day < self.scale_up_end {
            RolloutPhase::ScaleUp
        } else {
            RolloutPhase::Final
        }
    }
}

/// A human-driven commit stream that only leaves a corpus footprint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedStream {
    pub name: String,
    pub category: Category,
    /// Expected commits per day in each phase.
    pub rate: BTreeMap<RolloutPhase, f64>,
    /// LoC per commit is log-uniform on `[1, max_loc]`.
    pub max_loc: u32,
}

impl ScriptedStream {
    fn new(name: &str, category: Category, rates: [f64; 3], max_loc: u32) -> Self {
        ScriptedStream {
            name: name.to_string(),
            category,
            rate: RolloutPhase::ALL.into_iter().zip(rates).collect(),
            max_loc,
        }
    }
}

pub fn default_streams() -> Vec<ScriptedStream> {
    vec![
        ScriptedStream::new("migration-tooling", Category::MigrationTooling, [1.2, 0.3, 0.1], 20_000),
        ScriptedStream::new(
            "ci-infrastructure",
            Category::BuildTestInfrastructure,
            [1.0, 0.3, 0.1],
            2_000,
        ),
        ScriptedStream::new("dashboards", Category::MonitoringAndDashboards, [0.4, 0.2, 0.1], 200),
        ScriptedStream::new("platforms", Category::HardwarePlatformEnablement, [0.4, 0.1, 0.0], 500),
        ScriptedStream::new("docs", Category::Documentation, [0.2, 0.2, 0.2], 300),
        ScriptedStream::new("cleanup", Category::CodeCleanupDeprecation, [0.0, 0.1, 0.2], 3_000),
        ScriptedStream::new("perf", Category::PerformanceOptimization, [0.0, 0.1, 0.2], 100),
    ]
}

/// An extra LSC run through the shard pipeline on a fixed day.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduledLsc {
    pub day: u32,
    pub spec: ChangeSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub days: u32,
    pub fleet: FleetParams,
    pub phases: PhaseSchedule,
    /// Packages that enter the migration per day, by phase.
    pub activation_per_day: BTreeMap<RolloutPhase, u32>,
    pub agent: bool,
    /// Rule classes the in-sim agent knows; all classes when `None`.
    pub agent_rules: Option<Vec<DefectClass>>,
    pub agent_config: AgentConfig,
    pub sanitizers: bool,
    pub champ: ChampConfig,
    pub health: HealthModel,
    /// Release capacity limit in size units.
    pub release_size_limit: u32,
    /// Days until owners fix a build or test failure by hand.
    pub manual_fix_days: u32,
    /// Days until owners fix a release that was rolled back.
    pub release_fix_days: u32,
    /// Days from a filed bug to the owners' fix.
    pub bug_fix_days: u32,
    /// Days until owners lift an x86-only scheduling constraint.
    pub scheduling_fix_days: u32,
    pub scripted: Vec<ScriptedStream>,
    pub lsc_specs: Vec<ScheduledLsc>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 7,
            days: 120,
            fleet: FleetParams::default(),
            phases: PhaseSchedule::default(),
            activation_per_day: BTreeMap::from([
                (RolloutPhase::Early, 1),
                (RolloutPhase::ScaleUp, 4),
                (RolloutPhase::Final, 10),
            ]),
            agent: true,
            agent_rules: None,
            agent_config: AgentConfig::default(),
            sanitizers: true,
            champ: ChampConfig::default(),
            health: HealthModel::default(),
            release_size_limit: 100,
            manual_fix_days: 20,
            release_fix_days: 10,
            bug_fix_days: 10,
            scheduling_fix_days: 15,
            scripted: default_streams(),
            lsc_specs: Vec::new(),
        }
    }
}

impl ScenarioConfig {
    pub fn parse_toml(text: &str) -> Result<ScenarioConfig, SimError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ScenarioConfig, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
        Self::parse_toml(&text)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        self.fleet.validate().map_err(|e| SimError::Config(e.to_string()))?;
        if self.phases.early_end > self.phases.scale_up_end {
            return bad(format!(
                "phase schedule out of order: early ends at {}, scale-up at {}",
                self.phases.early_end, self.phases.scale_up_end
            ));
        }
        if self.champ.dwell_days == 0 {
            return bad("champ.dwell_days must be at least 1".into());
        }
        if !(self.health.noise_bound >= 0.0 && self.health.noise_bound.is_finite()) {
            return bad("health.noise_bound must be a finite non-negative number".into());
        }
        for s in &self.scripted {
            if s.max_loc == 0 {
                return bad(format!("scripted stream {} needs max_loc >= 1", s.name));
            }
            if s.rate.values().any(|r| !r.is_finite() || *r < 0.0) {
                return bad(format!("scripted stream {} has a negative rate", s.name));
            }
        }
        for l in &self.lsc_specs {
            l.spec
                .compile()
                .map_err(|e| SimError::Config(format!("lsc {}: {e}", l.spec.id)))?;
        }
        Ok(())
    }
}
