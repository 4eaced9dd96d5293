use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

use super::driver::{AgentStats, DayFraction, LifecycleEvent, LifecycleStage, SimRun};
use super::SimError;
use crate::champ::{bugs_json, check_event_log, write_events_csv, QualEvent};
use crate::fleet::Fleet;
use crate::lsc::{lsc_stats, write_shard_events_csv, LscStats};
use crate::taxonomy::{aggregate, time_series, write_corpus, Category, CategoryStats, CommitRecord, TimeSeries};

pub const REPORT_VERSION: u32 = 1;

/// Categories counted as tooling or test work in the phase-shape check.
pub const TOOLING_TEST: [Category; 6] = [
    Category::TestFixes,
    Category::TestExecutionEnvironment,
    Category::BuildTestInfrastructure,
    Category::MigrationTooling,
    Category::MonitoringAndDashboards,
    Category::HardwarePlatformEnablement,
];

/// Categories counted as build, release and scheduling configuration.
pub const CONFIG: [Category; 3] = [
    Category::BuildAndConfigFiles,
    Category::ReleaseAndRolloutConfig,
    Category::SchedulingAndProvisioning,
];

pub const OUTPUT_FILES: [&str; 9] = [
    "report.json",
    "corpus.jsonl",
    "qualification_events.csv",
    "shard_events.csv",
    "lifecycle_events.csv",
    "qualified_fraction.csv",
    "bugs.json",
    "category_timeseries.csv",
    "category_stats.json",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChampSummary {
    pub job_days: u64,
    pub bugs_filed: u64,
    pub bugs_resolved: u64,
    pub jobs_qualified: u64,
    pub jobs_ineligible: u64,
    pub jobs_never_observed: u64,
    pub replay_violations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseShape {
    pub bucket_days: u32,
    pub first_bucket: u32,
    pub last_bucket: u32,
    pub early_tooling_test_share: f64,
    pub early_config_share: f64,
    pub late_tooling_test_share: f64,
    pub late_config_share: f64,
    /// Tooling/test leads the first bucket and config leads the last.
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub report_version: u32,
    pub seed: u64,
    pub days: u32,
    pub agent: bool,
    pub sanitizers: bool,
    pub packages: u64,
    pub jobs: u64,
    pub fleet_fingerprint_initial: String,
    pub fleet_fingerprint_final: String,
    pub final_qualified_fraction: f64,
    pub qualified_fraction: Vec<f64>,
    pub lifecycle_final: BTreeMap<String, u64>,
    pub lsc: LscStats,
    pub champ: ChampSummary,
    pub agent_runs: AgentStats,
    pub manual_fixes: u64,
    pub commits: u64,
    pub automated_commits: u64,
    pub categories: CategoryStats,
    pub phase_shape: PhaseShape,
    pub outputs: Vec<String>,
}

pub struct SimOutput {
    pub report: SimReport,
    pub run: SimRun,
    pub time_series: TimeSeries,
}

/// Checks the early-tooling/late-config ordering on bucketed shares.
pub fn phase_shape(ts: &TimeSeries, days: u32) -> PhaseShape {
    let last = days.saturating_sub(1) / ts.bucket_days.max(1);
    let early_tt = ts.share(0, &TOOLING_TEST);
    let early_cfg = ts.share(0, &CONFIG);
    let late_tt = ts.share(last, &TOOLING_TEST);
    let late_cfg = ts.share(last, &CONFIG);
    PhaseShape {
        bucket_days: ts.bucket_days,
        first_bucket: 0,
        last_bucket: last,
        early_tooling_test_share: early_tt,
        early_config_share: early_cfg,
        late_tooling_test_share: late_tt,
        late_config_share: late_cfg,
        holds: early_tt > early_cfg && late_cfg > late_tt,
    }
}

/// Qualified fraction per day, recomputed from the qualification log alone.
pub fn qualified_fraction_from_events(events: &[QualEvent], total_jobs: u64, days: u32) -> Vec<f64> {
    let mut stage: BTreeMap<&str, &str> = BTreeMap::new();
    let mut out = Vec::with_capacity(days as usize);
    let mut i = 0;
    for day in 0..days {
        while i < events.len() && events[i].day <= day {
            stage.insert(&events[i].job_id, &events[i].stage_after);
            i += 1;
        }
        let q = stage.values().filter(|s| **s == "Qualified").count() as u64;
        out.push(if total_jobs == 0 {
            0.0
        } else {
            q as f64 / total_jobs as f64
        });
    }
    out
}

pub fn build_report(run: &SimRun, bucket_days: u32) -> (SimReport, TimeSeries) {
    let cfg = &run.config;
    let phases = cfg.phases;
    let lsc = lsc_stats(&run.shard_events, |d| phases.phase_of(d));
    let replay = check_event_log(&run.champ.events, &run.champ.bugs);
    let mut lifecycle_final: BTreeMap<String, u64> = LifecycleStage::ALL
        .iter()
        .map(|s| (s.as_str().to_string(), 0))
        .collect();
    lifecycle_final.insert("NotActivated".into(), 0);
    for p in &run.fleet.packages {
        let key = run.stages.get(&p.id).map_or("NotActivated", |s| s.as_str());
        *lifecycle_final.get_mut(key).expect("known stage") += 1;
    }
    let ts = time_series(&run.corpus, bucket_days, cfg.days);
    let states = &run.champ.states;
    let report = SimReport {
        report_version: REPORT_VERSION,
        seed: cfg.seed,
        days: cfg.days,
        agent: cfg.agent,
        sanitizers: cfg.sanitizers,
        packages: run.fleet.packages.len() as u64,
        jobs: run.fleet.jobs.len() as u64,
        fleet_fingerprint_initial: run.initial.fingerprint(),
        fleet_fingerprint_final: run.fleet.fingerprint(),
        final_qualified_fraction: run.qualified.last().map_or(0.0, |d| d.fraction),
        qualified_fraction: run.qualified.iter().map(|d| d.fraction).collect(),
        lifecycle_final,
        lsc,
        champ: ChampSummary {
            job_days: replay.job_days as u64,
            bugs_filed: run.champ.bugs.len() as u64,
            bugs_resolved: run.champ.bugs.iter().filter(|b| b.resolved).count() as u64,
            jobs_qualified: run.champ.qualified() as u64,
            jobs_ineligible: states.values().filter(|s| s.stage.name() == "Ineligible").count() as u64,
            jobs_never_observed: (run.fleet.jobs.len() - states.len()) as u64,
            replay_violations: replay.violations.len() as u64,
        },
        agent_runs: run.agent_stats,
        manual_fixes: run.manual_fixes,
        commits: run.corpus.len() as u64,
        automated_commits: run.corpus.iter().filter(|c| c.automated).count() as u64,
        categories: aggregate(&run.corpus, crate::taxonomy::DEFAULT_MEGA_THRESHOLD),
        phase_shape: phase_shape(&ts, cfg.days),
        outputs: OUTPUT_FILES.iter().map(|s| s.to_string()).collect(),
    };
    (report, ts)
}

fn write_lifecycle_csv<W: std::io::Write>(events: &[LifecycleEvent], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["day", "package_id", "stage_before", "stage_after", "note"])?;
    for e in events {
        w.write_record([
            e.day.to_string().as_str(),
            &e.package_id,
            e.stage_before.map_or("", |s| s.as_str()),
            e.stage_after.as_str(),
            &e.note,
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_fraction_csv<W: std::io::Write>(rows: &[DayFraction], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["day", "qualified_jobs", "total_jobs", "fraction"])?;
    for r in rows {
        w.write_record([
            r.day.to_string(),
            r.qualified_jobs.to_string(),
            r.total_jobs.to_string(),
            format!("{:.6}", r.fraction),
        ])?;
    }
    w.flush()?;
    Ok(())
}

impl SimOutput {
    /// Writes every output file into `dir`, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> Result<(), SimError> {
        std::fs::create_dir_all(dir)?;
        let file = |name: &str| std::fs::File::create(dir.join(name)).map(std::io::BufWriter::new);
        let csv_err = |e: csv::Error| SimError::Io(std::io::Error::other(e));
        std::fs::write(
            dir.join("report.json"),
            serde_json::to_string_pretty(&self.report).expect("report serializes"),
        )?;
        write_corpus(&self.run.corpus, file("corpus.jsonl")?)?;
        write_events_csv(&self.run.champ.events, file("qualification_events.csv")?).map_err(csv_err)?;
        write_shard_events_csv(&self.run.shard_events, file("shard_events.csv")?).map_err(csv_err)?;
        write_lifecycle_csv(&self.run.lifecycle, file("lifecycle_events.csv")?).map_err(csv_err)?;
        write_fraction_csv(&self.run.qualified, file("qualified_fraction.csv")?).map_err(csv_err)?;
        std::fs::write(dir.join("bugs.json"), bugs_json(&self.run.champ.bugs))?;
        self.time_series
            .write_csv(file("category_timeseries.csv")?)
            .map_err(csv_err)?;
        std::fs::write(
            dir.join("category_stats.json"),
            serde_json::to_string_pretty(&self.report.categories).expect("stats serialize"),
        )?;
        Ok(())
    }
}

/// File contents of a fleet keyed by path, with Blueprints rendered at
/// their virtual paths.
pub fn fleet_text(fleet: &Fleet) -> BTreeMap<String, Vec<String>> {
    let mut out = BTreeMap::new();
    for p in &fleet.packages {
        for f in &p.files {
            out.insert(f.path.clone(), f.lines.clone());
        }
        out.insert(p.blueprint.path(), p.blueprint.render());
    }
    out
}

fn parse_hunk_header(line: &str) -> Option<(usize, usize, usize)> {
    let body = line.strip_prefix("@@ -")?.strip_suffix(" @@")?;
    let (old, new) = body.split_once(" +")?;
    let (start, removed) = old.split_once(',')?;
    let (_, added) = new.split_once(',')?;
    Some((start.parse().ok()?, removed.parse().ok()?, added.parse().ok()?))
}

/// Replays the diffs of every fleet commit (all but scripted ones) on the
/// initial fleet text. Returns the text it arrives at.
pub fn replay_corpus(initial: &Fleet, corpus: &[CommitRecord]) -> Result<BTreeMap<String, Vec<String>>, String> {
    let mut text = fleet_text(initial);
    for c in corpus.iter().filter(|c| !c.origin.starts_with("scripted/")) {
        for d in &c.file_diffs {
            let mut lines = d.hunk_text.lines();
            let header = lines
                .next()
                .ok_or_else(|| format!("{}: empty hunk for {}", c.id, d.path))?;
            let (start, removed, added) =
                parse_hunk_header(header).ok_or_else(|| format!("{}: bad hunk header {header}", c.id))?;
            let body: Vec<&str> = lines.collect();
            let old: Vec<String> = body
                .iter()
                .filter_map(|l| l.strip_prefix('-'))
                .map(str::to_string)
                .collect();
            let new: Vec<String> = body
                .iter()
                .filter_map(|l| l.strip_prefix('+'))
                .map(str::to_string)
                .collect();
            if old.len() != removed || new.len() != added {
                return Err(format!("{}: hunk for {} does not match its header", c.id, d.path));
            }
            let file = text
                .get_mut(&d.path)
                .ok_or_else(|| format!("{}: unknown file {}", c.id, d.path))?;
            let at = start - 1;
            if file.get(at..at + removed) != Some(&old[..]) {
                return Err(format!(
                    "{}: removed lines of {} do not match at line {start}",
                    c.id, d.path
                ));
            }
            file.splice(at..at + removed, new);
        }
    }
    Ok(text)
}
