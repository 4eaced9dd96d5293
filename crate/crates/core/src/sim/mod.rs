//! Day-stepped migration scenario.
//!
//! Packages enter the migration in dependency order at a per-phase rate and
//! walk a five-stage lifecycle: TestFix (Arm builds and tests pass, by agent
//! or by hand), MultiarchCi (an Arm-CI LSC), ReleaseConfig (an Arm-release
//! LSC plus a multiarch release build), Rollout (CHAMP qualification of
//! every job) and FullProduction. Every fleet mutation is recorded as one
//! commit; scripted streams add the human-only commits.

mod config;
mod driver;
mod report;
mod scripted;

pub use config::{default_streams, PhaseSchedule, ScenarioConfig, ScheduledLsc, ScriptedStream};
pub use driver::{
    category_of_class, AgentStats, DayFraction, LifecycleEvent, LifecycleStage, ManualKind, SimRun, Simulation,
};
pub use report::{
    build_report, fleet_text, phase_shape, qualified_fraction_from_events, replay_corpus, ChampSummary, PhaseShape,
    SimOutput, SimReport, CONFIG, OUTPUT_FILES, REPORT_VERSION, TOOLING_TEST,
};

use crate::champ::ChampError;
use crate::fleet::Fleet;
use crate::lsc::LscError;
use crate::oracle::OracleError;
use crate::taxonomy::DEFAULT_BUCKET_DAYS;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("config error: {0}")]
    Config(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Lsc(#[from] LscError),
    #[error(transparent)]
    Champ(#[from] ChampError),
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SimOutput, SimError> {
    finish(Simulation::new(cfg.clone())?.run()?)
}

/// Runs the scenario on a given fleet instead of generating one.
pub fn run_scenario_on(cfg: &ScenarioConfig, fleet: Fleet) -> Result<SimOutput, SimError> {
    finish(Simulation::with_fleet(cfg.clone(), fleet)?.run()?)
}

fn finish(run: SimRun) -> Result<SimOutput, SimError> {
    let (report, time_series) = build_report(&run, DEFAULT_BUCKET_DAYS);
    Ok(SimOutput {
        report,
        run,
        time_series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fleet::FleetParams;

    fn small(agent: bool) -> ScenarioConfig {
        ScenarioConfig {
            days: 60,
            fleet: FleetParams {
                n_packages: 40,
                n_owners: 6,
                n_cells: 3,
                ..FleetParams::default()
            },
            agent,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn small_scenario_is_consistent() {
        let out = run_scenario(&small(true)).unwrap();
        let r = &out.report;
        assert_eq!(r.champ.replay_violations, 0);
        assert_eq!(r.agent_runs.trace_violations, 0);
        assert!(r.final_qualified_fraction > 0.0);
        let replayed = replay_corpus(&out.run.initial, &out.run.corpus).unwrap();
        assert_eq!(replayed, fleet_text(&out.run.fleet));
        let recomputed = qualified_fraction_from_events(&out.run.champ.events, r.jobs, r.days);
        assert_eq!(recomputed, r.qualified_fraction);
    }

    #[test]
    fn agent_helps() {
        let on = run_scenario(&small(true)).unwrap().report;
        let off = run_scenario(&small(false)).unwrap().report;
        assert!(
            on.final_qualified_fraction > off.final_qualified_fraction,
            "{} vs {}",
            on.final_qualified_fraction,
            off.final_qualified_fraction
        );
    }
}
