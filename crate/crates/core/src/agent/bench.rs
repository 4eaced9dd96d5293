use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

use super::loops::{goals_green, orchestrate, AgentConfig};
use super::reasoner::{Reasoner, ReasonerError};
use super::trace::{AgentTrace, Outcome};
use super::AgentError;
use crate::fleet::Fleet;
use crate::oracle::{apply_edit_in_place, fix_defect_in_place, fleet_defects, DefectClass, DefectMix, Edit};
use crate::rng::{apportion, stream};

/// A green fleet with one canonical fix reverted.
#[derive(Debug, Clone)]
pub struct BenchmarkCase {
    pub id: String,
    pub defect_id: String,
    pub class: DefectClass,
    pub goals: Vec<String>,
    /// Re-applies the fix the case reverted.
    pub golden_edit: Edit,
    /// Turns the green base into this case.
    pub revert_edit: Edit,
    pub base: Arc<Fleet>,
}

impl BenchmarkCase {
    /// The case's workspace: the base fleet with the fix reverted.
    pub fn materialize(&self) -> Fleet {
        let mut f = (*self.base).clone();
        apply_edit_in_place(&mut f, &self.revert_edit).expect("revert applies to its base");
        f
    }
}

#[derive(Debug, Clone, Default)]
pub struct BenchOptions {
    pub sanitizers: bool,
    /// Class distribution of the selected cases; uniform over the shuffled
    /// pool when `None`.
    pub class_weights: Option<DefectMix>,
}

/// Builds revert-based cases from the defects present in `fleet`.
///
/// Fixing every present defect with its canonical fix gives the green base
/// (the golden history). Each candidate case reverts exactly one of those
/// fixes; it is kept only if the revert makes one of its package's targets
/// fail and re-applying the golden edit restores the base file exactly.
pub fn build_benchmark(
    fleet: &Fleet,
    n_cases: usize,
    seed: u64,
    opts: &BenchOptions,
) -> Result<Vec<BenchmarkCase>, AgentError> {
    if n_cases == 0 {
        return Ok(Vec::new());
    }
    let defects = fleet_defects(fleet);
    let mut base = fleet.clone();
    for d in &defects {
        fix_defect_in_place(&mut base, &d.id)?;
    }
    if !fleet_defects(&base).is_empty() {
        return Err(AgentError::Internal("canonical fixes left defects behind".into()));
    }

    let mut pool = Vec::new();
    for d in &defects {
        let broken = fleet.file(&d.file_path).expect("defect file").lines[d.line_no - 1].clone();
        let fixed = base.file(&d.file_path).expect("defect file").lines[d.line_no - 1].clone();
        let revert = Edit::new(&d.file_path, &fixed, &broken);
        let golden = Edit::new(&d.file_path, &broken, &fixed);
        let pkg = base
            .package(crate::fleet::package_of_path(&d.file_path))
            .expect("defect package");
        let mut goals: Vec<String> = pkg.targets().map(|t| t.id.clone()).collect();
        goals.sort();

        let original = base.file(&d.file_path).expect("defect file").clone();
        apply_edit_in_place(&mut base, &revert)?;
        let reverted_right_line =
            base.file(&d.file_path).expect("defect file").lines.get(d.line_no - 1) == Some(&broken);
        let fails = !goals_green(&base, &goals, opts.sanitizers);
        apply_edit_in_place(&mut base, &golden)?;
        let restored = base.file(&d.file_path) == Some(&original);
        if !restored {
            return Err(AgentError::Internal(format!(
                "golden edit for {} does not restore the base",
                d.id
            )));
        }
        if reverted_right_line && fails {
            pool.push((d.clone(), goals, golden, revert));
        }
    }

    pool.shuffle(&mut stream(seed, "bench/select"));
    let chosen: Vec<_> = match &opts.class_weights {
        None => {
            if pool.len() < n_cases {
                return Err(AgentError::Size(format!(
                    "asked for {n_cases} cases, only {} revertible fixes available",
                    pool.len()
                )));
            }
            pool.into_iter().take(n_cases).collect()
        }
        Some(mix) => {
            mix.validate().map_err(AgentError::Config)?;
            let weights: Vec<f64> = DefectClass::ALL.iter().map(|&c| mix.weight(c)).collect();
            let quotas = apportion(n_cases, &weights);
            let mut by_class: BTreeMap<DefectClass, Vec<_>> = BTreeMap::new();
            for item in pool {
                by_class.entry(item.0.class).or_default().push(item);
            }
            let mut out = Vec::new();
            for (&class, &quota) in DefectClass::ALL.iter().zip(&quotas) {
                let available = by_class.remove(&class).unwrap_or_default();
                if available.len() < quota {
                    return Err(AgentError::Size(format!(
                        "asked for {quota} {class} cases, only {} available",
                        available.len()
                    )));
                }
                out.extend(available.into_iter().take(quota));
            }
            out.shuffle(&mut stream(seed, "bench/order"));
            out
        }
    };

    let base = Arc::new(base);
    Ok(chosen
        .into_iter()
        .enumerate()
        .map(|(i, (d, goals, golden, revert))| BenchmarkCase {
            id: format!("case_{i:04}"),
            defect_id: d.id,
            class: d.class,
            goals,
            golden_edit: golden,
            revert_edit: revert,
            base: Arc::clone(&base),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseResult {
    pub case_id: String,
    pub class: DefectClass,
    pub outcome: Outcome,
    pub steps: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRate {
    pub cases: u32,
    pub fixed: u32,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub total_cases: u32,
    pub fixed: u32,
    pub success_rate: f64,
    pub per_class: BTreeMap<DefectClass, ClassRate>,
    pub cases: Vec<CaseResult>,
}

impl BenchReport {
    pub fn from_results(cases: Vec<CaseResult>) -> Self {
        let mut per_class: BTreeMap<DefectClass, ClassRate> = BTreeMap::new();
        for c in &cases {
            let r = per_class.entry(c.class).or_insert(ClassRate {
                cases: 0,
                fixed: 0,
                rate: 0.0,
            });
            r.cases += 1;
            r.fixed += (c.outcome == Outcome::Fixed) as u32;
        }
        for r in per_class.values_mut() {
            r.rate = r.fixed as f64 / r.cases as f64;
        }
        let total = cases.len() as u32;
        let fixed = cases.iter().filter(|c| c.outcome == Outcome::Fixed).count() as u32;
        BenchReport {
            total_cases: total,
            fixed,
            success_rate: if total == 0 { 0.0 } else { fixed as f64 / total as f64 },
            per_class,
            cases,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["case_id", "class", "outcome", "steps"])?;
        for c in &self.cases {
            w.write_record([
                c.case_id.as_str(),
                c.class.as_str(),
                c.outcome.as_str(),
                &c.steps.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub struct BenchRun {
    pub report: BenchReport,
    pub traces: Vec<AgentTrace>,
}

pub type ReasonerFactory<'a> = dyn Fn() -> Result<Box<dyn Reasoner>, ReasonerError> + Sync + 'a;

/// Runs every case on its own workspace, `parallelism` cases at a time.
/// A case counts as Fixed only if the agent says so and a fresh oracle check
/// of all its goals passes afterwards.
pub fn run_benchmark(
    cases: &[BenchmarkCase],
    factory: &ReasonerFactory<'_>,
    cfg: &AgentConfig,
    parallelism: usize,
) -> Result<BenchRun, AgentError> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| AgentError::Internal(e.to_string()))?;
    let results: Vec<Result<(CaseResult, AgentTrace), AgentError>> = pool.install(|| {
        cases
            .par_iter()
            .map(|case| {
                let mut fleet = case.materialize();
                let mut reasoner = factory()?;
                let trace = orchestrate(&mut fleet, &case.goals, reasoner.as_mut(), cfg);
                let verified = goals_green(&fleet, &case.goals, cfg.sanitizers);
                let outcome = match trace.outcome {
                    Outcome::Fixed if verified => Outcome::Fixed,
                    Outcome::Fixed => Outcome::GaveUp,
                    o => o,
                };
                Ok((
                    CaseResult {
                        case_id: case.id.clone(),
                        class: case.class,
                        outcome,
                        steps: trace.tool_calls(),
                    },
                    trace,
                ))
            })
            .collect()
    });
    let mut rows = Vec::with_capacity(results.len());
    let mut traces = Vec::with_capacity(results.len());
    for r in results {
        let (row, trace) = r?;
        rows.push(row);
        traces.push(trace);
    }
    Ok(BenchRun {
        report: BenchReport::from_results(rows),
        traces,
    })
}
