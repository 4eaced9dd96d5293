//! The simulated monorepo and cluster.
//!
//! A [`Fleet`] is an immutable-by-convention snapshot: packages with their
//! synthetic source files, build/test targets and release Blueprints, the
//! owners of those packages, Borg-style cells and the jobs deployed into them.
//! Collections are kept sorted by id so the JSON serialization is byte-stable.

mod diff;
mod generate;
mod io;

pub use diff::{line_diff, LineDiff};
pub use generate::{generate_fleet, FleetParams, DEFAULT_REFUSAL_PRESET};
pub use io::{load_fleet, parse_fleet, save_fleet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

pub type PackageId = String;
pub type TargetId = String;

/// Borg constraint tag that pins a job to x86 machines.
pub const X86_ONLY_TAG: &str = "x86_only";

#[derive(Debug, thiserror::Error)]
pub enum FleetError {
    #[error("config error: {0}")]
    Config(String),
    #[error("format error at line {line}, column {column}: {message}")]
    Format {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("not found: {0}")]
    NotFound(String),
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Isa {
    X86,
    Arm,
}

impl Isa {
    pub const ALL: [Isa; 2] = [Isa::X86, Isa::Arm];

    pub fn as_str(self) -> &'static str {
        match self {
            Isa::X86 => "X86",
            Isa::Arm => "Arm",
        }
    }
}

impl fmt::Display for Isa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Migration phase. Owners refuse LSC shards with a per-phase probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RolloutPhase {
    Early,
    ScaleUp,
    Final,
}

impl RolloutPhase {
    pub const ALL: [RolloutPhase; 3] = [RolloutPhase::Early, RolloutPhase::ScaleUp, RolloutPhase::Final];

    pub fn as_str(self) -> &'static str {
        match self {
            RolloutPhase::Early => "Early",
            RolloutPhase::ScaleUp => "ScaleUp",
            RolloutPhase::Final => "Final",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.as_str().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for RolloutPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Owner {
    pub id: String,
    pub refusal_policy: BTreeMap<RolloutPhase, f64>,
}

impl Owner {
    pub fn refusal_probability(&self, phase: RolloutPhase) -> f64 {
        self.refusal_policy.get(&phase).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    pub path: String,
    pub lines: Vec<String>,
}

impl SourceFile {
    pub fn new(path: impl Into<String>, lines: Vec<String>) -> Self {
        Self {
            path: path.into(),
            lines,
        }
    }

    pub fn text(&self) -> String {
        self.lines.join("\n")
    }

    pub fn contains(&self, needle: &str) -> bool {
        self.lines.iter().any(|l| l.contains(needle))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TargetKind {
    Library,
    Binary,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Target {
    pub id: TargetId,
    pub kind: TargetKind,
    pub srcs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Blueprint {
    pub package_id: PackageId,
    pub variant_modes: BTreeSet<Isa>,
    pub ci_enabled: BTreeMap<Isa, bool>,
    pub release_size_units: u32,
}

impl Blueprint {
    pub fn arm_release(&self) -> bool {
        self.variant_modes.contains(&Isa::Arm)
    }

    pub fn ci_on(&self, isa: Isa) -> bool {
        self.ci_enabled.get(&isa).copied().unwrap_or(false)
    }

    /// Virtual path used for Blueprint edits in diffs and commit records.
    pub fn path(&self) -> String {
        blueprint_path(&self.package_id)
    }

    /// Config-file rendering of the Blueprint, used to produce diff text.
    pub fn render(&self) -> Vec<String> {
        let mut lines = vec![
            "release_blueprint {".to_string(),
            format!("  name = \"{}\",", self.package_id),
        ];
        for isa in &self.variant_modes {
            lines.push(format!(
                "  {}_variant_mode = ::blueprint::VariantMode::VARIANT_MODE_RELEASE,",
                isa.as_str().to_ascii_lowercase()
            ));
        }
        for isa in Isa::ALL {
            if self.ci_on(isa) {
                lines.push(format!(
                    "  {}_ci_mode = ::blueprint::CiMode::CI_MODE_PRESUBMIT,",
                    isa.as_str().to_ascii_lowercase()
                ));
            }
        }
        lines.push(format!("  release_size_units = {},", self.release_size_units));
        lines.push("}".to_string());
        lines
    }
}

pub fn blueprint_path(package_id: &str) -> String {
    format!("{package_id}/release.blueprint")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Package {
    pub id: PackageId,
    pub owner_id: String,
    pub files: Vec<SourceFile>,
    pub build_targets: Vec<Target>,
    pub test_targets: Vec<Target>,
    pub deps: Vec<PackageId>,
    pub blueprint: Blueprint,
}

impl Package {
    pub fn file(&self, path: &str) -> Option<&SourceFile> {
        self.files.iter().find(|f| f.path == path)
    }

    pub fn file_mut(&mut self, path: &str) -> Option<&mut SourceFile> {
        self.files.iter_mut().find(|f| f.path == path)
    }

    /// The library target other targets of the package (and dependents) link.
    pub fn library(&self) -> Option<&Target> {
        self.build_targets.iter().find(|t| t.kind == TargetKind::Library)
    }

    pub fn targets(&self) -> impl Iterator<Item = &Target> {
        self.build_targets.iter().chain(self.test_targets.iter())
    }

    pub fn target(&self, id: &str) -> Option<&Target> {
        self.targets().find(|t| t.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub package_id: PackageId,
    pub cells: Vec<String>,
    pub tasks_per_cell: u32,
    pub borg_constraints: BTreeSet<String>,
}

impl Job {
    pub fn total_tasks(&self) -> u32 {
        self.tasks_per_cell * self.cells.len() as u32
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub id: String,
    pub capacity: BTreeMap<Isa, u32>,
}

impl Cell {
    pub fn slots(&self, isa: Isa) -> u32 {
        self.capacity.get(&isa).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fleet {
    pub seed: u64,
    pub clock_day: u32,
    pub owners: Vec<Owner>,
    pub cells: Vec<Cell>,
    pub packages: Vec<Package>,
    pub jobs: Vec<Job>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TargetQuery {
    pub build_targets: Vec<TargetId>,
    pub test_targets: Vec<TargetId>,
}

/// Package id owning a file path (`pkg_0003/src/x.cc` -> `pkg_0003`).
pub fn package_of_path(path: &str) -> &str {
    path.split('/').next().unwrap_or(path)
}

/// Package id owning a target label (`//pkg_0003:lib` -> `pkg_0003`).
pub fn package_of_target(target: &str) -> Option<&str> {
    target.strip_prefix("//")?.split(':').next()
}

impl Fleet {
    pub fn package(&self, id: &str) -> Option<&Package> {
        self.packages
            .binary_search_by(|p| p.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.packages[i])
    }

    pub fn package_mut(&mut self, id: &str) -> Option<&mut Package> {
        match self.packages.binary_search_by(|p| p.id.as_str().cmp(id)) {
            Ok(i) => Some(&mut self.packages[i]),
            Err(_) => None,
        }
    }

    pub fn owner(&self, id: &str) -> Option<&Owner> {
        self.owners.iter().find(|o| o.id == id)
    }

    pub fn cell(&self, id: &str) -> Option<&Cell> {
        self.cells.iter().find(|c| c.id == id)
    }

    pub fn job(&self, id: &str) -> Option<&Job> {
        self.jobs
            .binary_search_by(|j| j.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.jobs[i])
    }

    pub fn jobs_of<'a>(&'a self, package_id: &'a str) -> impl Iterator<Item = &'a Job> + 'a {
        self.jobs.iter().filter(move |j| j.package_id == package_id)
    }

    pub fn file(&self, path: &str) -> Option<&SourceFile> {
        self.package(package_of_path(path))?.file(path)
    }

    pub fn file_mut(&mut self, path: &str) -> Option<&mut SourceFile> {
        self.package_mut(package_of_path(path))?.file_mut(path)
    }

    pub fn target(&self, id: &str) -> Option<(&Package, &Target)> {
        let pkg = self.package(package_of_target(id)?)?;
        let target = pkg.target(id)?;
        Some((pkg, target))
    }

    pub fn query_targets(&self, package_id: &str) -> Result<TargetQuery, FleetError> {
        let pkg = self
            .package(package_id)
            .ok_or_else(|| FleetError::NotFound(format!("package {package_id}")))?;
        Ok(TargetQuery {
            build_targets: pkg.build_targets.iter().map(|t| t.id.clone()).collect(),
            test_targets: pkg.test_targets.iter().map(|t| t.id.clone()).collect(),
        })
    }

    /// All packages reachable from `package_id` through `deps`, excluding itself.
    pub fn transitive_deps(&self, package_id: &str) -> BTreeSet<PackageId> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<&str> = match self.package(package_id) {
            Some(p) => p.deps.iter().map(String::as_str).collect(),
            None => return seen,
        };
        while let Some(id) = stack.pop() {
            if !seen.insert(id.to_string()) {
                continue;
            }
            if let Some(p) = self.package(id) {
                stack.extend(p.deps.iter().map(String::as_str));
            }
        }
        seen
    }

    /// Packages that list `package_id` as a direct dependency.
    pub fn reverse_deps(&self, package_id: &str) -> Vec<PackageId> {
        self.packages
            .iter()
            .filter(|p| p.deps.iter().any(|d| d == package_id))
            .map(|p| p.id.clone())
            .collect()
    }

    /// Kahn topological order over the dependency graph (dependencies first).
    pub fn topo_order(&self) -> Result<Vec<PackageId>, FleetError> {
        let mut indegree: BTreeMap<&str, usize> = self.packages.iter().map(|p| (p.id.as_str(), p.deps.len())).collect();
        let mut dependents: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for p in &self.packages {
            for d in &p.deps {
                dependents.entry(d.as_str()).or_default().push(p.id.as_str());
            }
        }
        let mut ready: Vec<&str> = indegree.iter().filter(|(_, &n)| n == 0).map(|(&k, _)| k).collect();
        ready.reverse();
        let mut order = Vec::with_capacity(self.packages.len());
        while let Some(id) = ready.pop() {
            order.push(id.to_string());
            for &dependent in dependents.get(id).map(Vec::as_slice).unwrap_or_default() {
                let n = indegree.get_mut(dependent).expect("dependent is a package");
                *n -= 1;
                if *n == 0 {
                    ready.push(dependent);
                }
            }
        }
        if order.len() != self.packages.len() {
            return Err(FleetError::Integrity("package dependency graph has a cycle".into()));
        }
        Ok(order)
    }

    /// Checks every cross-reference and structural invariant.
    pub fn validate(&self) -> Result<(), FleetError> {
        let integrity = |m: String| Err(FleetError::Integrity(m));
        if !is_sorted_unique(self.owners.iter().map(|o| o.id.as_str())) {
            return integrity("owners must be sorted by unique id".into());
        }
        if !is_sorted_unique(self.cells.iter().map(|c| c.id.as_str())) {
            return integrity("cells must be sorted by unique id".into());
        }
        if !is_sorted_unique(self.packages.iter().map(|p| p.id.as_str())) {
            return integrity("packages must be sorted by unique id".into());
        }
        if !is_sorted_unique(self.jobs.iter().map(|j| j.id.as_str())) {
            return integrity("jobs must be sorted by unique id".into());
        }
        for o in &self.owners {
            for (phase, p) in &o.refusal_policy {
                if !(0.0..=1.0).contains(p) {
                    return integrity(format!(
                        "owner {} refusal probability {p} for {phase} outside [0,1]",
                        o.id
                    ));
                }
            }
        }
        let mut paths = BTreeSet::new();
        for p in &self.packages {
            if self.owner(&p.owner_id).is_none() {
                return integrity(format!("package {} references unknown owner {}", p.id, p.owner_id));
            }
            if p.blueprint.package_id != p.id {
                return integrity(format!(
                    "blueprint of {} names package {}",
                    p.id, p.blueprint.package_id
                ));
            }
            if !p.blueprint.variant_modes.contains(&Isa::X86) {
                return integrity(format!("blueprint of {} dropped X86", p.id));
            }
            for f in &p.files {
                if package_of_path(&f.path) != p.id {
                    return integrity(format!("file {} is outside package {}", f.path, p.id));
                }
                if !paths.insert(f.path.as_str()) {
                    return integrity(format!("duplicate file path {}", f.path));
                }
            }
            for t in p.targets() {
                if package_of_target(&t.id) != Some(p.id.as_str()) {
                    return integrity(format!("target {} declared in package {}", t.id, p.id));
                }
                for src in &t.srcs {
                    if p.file(src).is_none() {
                        return integrity(format!("target {} references missing file {src}", t.id));
                    }
                }
            }
            for d in &p.deps {
                if self.package(d).is_none() {
                    return integrity(format!("package {} depends on unknown {d}", p.id));
                }
            }
        }
        for j in &self.jobs {
            if self.package(&j.package_id).is_none() {
                return integrity(format!("job {} references unknown package {}", j.id, j.package_id));
            }
            if j.cells.is_empty() || j.tasks_per_cell == 0 {
                return integrity(format!("job {} needs at least one cell and one task", j.id));
            }
            for c in &j.cells {
                if self.cell(c).is_none() {
                    return integrity(format!("job {} references unknown cell {c}", j.id));
                }
            }
        }
        self.topo_order()?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fleet serializes")
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    /// Relative weight of a package's compute footprint (sum of job tasks).
    pub fn compute_weight(&self, package_id: &str) -> u64 {
        self.jobs_of(package_id).map(|j| j.total_tasks() as u64).sum()
    }
}

fn is_sorted_unique<'a>(mut ids: impl Iterator<Item = &'a str>) -> bool {
    let Some(mut prev) = ids.next() else {
        return true;
    };
    for id in ids {
        if id <= prev {
            return false;
        }
        prev = id;
    }
    true
}
