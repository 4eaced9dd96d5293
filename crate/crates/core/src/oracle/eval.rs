use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use super::defect::{scan_file, DefectClass, DefectInstance, SurfacePhase};
use super::OracleError;
use crate::fleet::{Fleet, Isa, Job, Package, SourceFile, Target, TargetKind, X86_ONLY_TAG};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Pass,
    Fail,
}

/// Outcome of a build or a test run. `Fail` iff `surfaced_defects` is
/// nonempty; each log line is a diagnostic in the frozen format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckResult {
    pub status: Status,
    pub log: Vec<String>,
    pub surfaced_defects: Vec<String>,
}

pub type BuildResult = CheckResult;
pub type TestResult = CheckResult;

impl CheckResult {
    pub fn pass() -> Self {
        CheckResult {
            status: Status::Pass,
            log: Vec::new(),
            surfaced_defects: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    fn from_hits(hits: Vec<(DefectInstance, String)>) -> Self {
        if hits.is_empty() {
            return Self::pass();
        }
        let mut log = Vec::with_capacity(hits.len());
        let mut ids = Vec::with_capacity(hits.len());
        for (d, msg) in hits {
            log.push(diagnostic_line(d.class, &d.file_path, d.line_no, &msg));
            ids.push(d.id);
        }
        CheckResult {
            status: Status::Fail,
            log,
            surfaced_defects: ids,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReleaseResult {
    pub status: Status,
    pub log: Vec<String>,
    pub surfaced_defects: Vec<String>,
    pub size_units: u32,
}

/// `ERROR <class> <file>:<line>: <message>`
pub fn diagnostic_line(class: DefectClass, file: &str, line_no: usize, message: &str) -> String {
    format!("ERROR {class} {file}:{line_no}: {message}")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub class: DefectClass,
    pub file: String,
    pub line_no: usize,
    pub message: String,
}

pub fn parse_diagnostic(line: &str) -> Option<Diagnostic> {
    let rest = line.strip_prefix("ERROR ")?;
    let (class, rest) = rest.split_once(' ')?;
    let class = DefectClass::parse(class)?;
    let (location, message) = rest.split_once(": ")?;
    let (file, line_no) = location.rsplit_once(':')?;
    Some(Diagnostic {
        class,
        file: file.to_string(),
        line_no: line_no.parse().ok()?,
        message: message.to_string(),
    })
}

fn lookup<'a>(fleet: &'a Fleet, target: &str) -> Result<(&'a Package, &'a Target), OracleError> {
    fleet
        .target(target)
        .ok_or_else(|| OracleError::NotFound(format!("target {target}")))
}

fn push_srcs<'a>(
    pkg: &'a Package,
    srcs: &[String],
    via: Option<&'a str>,
    seen: &mut BTreeSet<&'a str>,
    out: &mut Vec<(&'a SourceFile, Option<&'a str>)>,
) {
    for src in srcs {
        if let Some(file) = pkg.file(src) {
            if seen.insert(file.path.as_str()) {
                out.push((file, via));
            }
        }
    }
}

/// Files compiled when building `target`: its own sources, the package
/// library for non-library targets, and the libraries of every transitive
/// dependency (tagged with the dependency id).
fn build_closure<'a>(fleet: &'a Fleet, pkg: &'a Package, target: &'a Target) -> Vec<(&'a SourceFile, Option<&'a str>)> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    push_srcs(pkg, &target.srcs, None, &mut seen, &mut out);
    if target.kind != TargetKind::Library {
        if let Some(lib) = pkg.library() {
            push_srcs(pkg, &lib.srcs, None, &mut seen, &mut out);
        }
    }
    for dep_id in fleet.transitive_deps(&pkg.id) {
        let Some(dep) = fleet.package(&dep_id) else {
            continue;
        };
        if let Some(lib) = dep.library() {
            push_srcs(dep, &lib.srcs, Some(dep.id.as_str()), &mut seen, &mut out);
        }
    }
    out
}

/// Builds `target` for `isa`. Fails iff `isa` is Arm and a BuildTime defect
/// is present in the target's closure. X86 always passes.
pub fn build(fleet: &Fleet, target: &str, isa: Isa) -> Result<BuildResult, OracleError> {
    let (pkg, t) = lookup(fleet, target)?;
    if isa == Isa::X86 {
        return Ok(CheckResult::pass());
    }
    let mut hits = Vec::new();
    for (file, via) in build_closure(fleet, pkg, t) {
        for d in scan_file(file) {
            if d.class.phase() == SurfacePhase::BuildTime {
                let msg = d.class.message(via);
                hits.push((d, msg));
            }
        }
    }
    Ok(CheckResult::from_hits(hits))
}

/// Runs a test target. A failing build is returned as the test result.
/// TestTime defects surface on Arm; SanitizerTime defects surface on either
/// ISA when sanitizers are on. RuntimeOnly defects never surface here.
pub fn run_test(fleet: &Fleet, test_target: &str, isa: Isa, sanitizers: bool) -> Result<TestResult, OracleError> {
    let (pkg, t) = lookup(fleet, test_target)?;
    if t.kind != TargetKind::Test {
        return Err(OracleError::NotFound(format!("test target {test_target}")));
    }
    let built = build(fleet, test_target, isa)?;
    if !built.passed() {
        return Ok(built);
    }
    let mut seen = BTreeSet::new();
    let mut files = Vec::new();
    push_srcs(pkg, &t.srcs, None, &mut seen, &mut files);
    if let Some(lib) = pkg.library() {
        push_srcs(pkg, &lib.srcs, None, &mut seen, &mut files);
    }
    let mut hits = Vec::new();
    for (file, _) in files {
        for d in scan_file(file) {
            let surfaces = match d.class.phase() {
                SurfacePhase::TestTime => isa == Isa::Arm,
                SurfacePhase::SanitizerTime => sanitizers,
                _ => false,
            };
            if surfaces {
                let msg = d.class.message(None);
                hits.push((d, msg));
            }
        }
    }
    Ok(CheckResult::from_hits(hits))
}

/// Builds a release of `package` for `isas`. Every requested ISA must build.
/// Fails iff the release is multiarch, `release_size_units * |isas|`
/// exceeds `capacity_limit`, and the package carries a ReleaseSizeOverflow
/// defect.
pub fn build_release(
    fleet: &Fleet,
    package: &str,
    isas: &BTreeSet<Isa>,
    capacity_limit: u32,
) -> Result<ReleaseResult, OracleError> {
    let pkg = fleet
        .package(package)
        .ok_or_else(|| OracleError::NotFound(format!("package {package}")))?;
    if isas.is_empty() {
        return Err(OracleError::InvalidRequest("release needs at least one ISA".into()));
    }
    for &isa in isas {
        for t in &pkg.build_targets {
            let result = build(fleet, &t.id, isa)?;
            if !result.passed() {
                return Err(OracleError::BuildFailed {
                    target: t.id.clone(),
                    isa,
                    result,
                });
            }
        }
    }
    let variants = isas.len() as u32;
    let size_units = pkg.blueprint.release_size_units * variants;
    let mut hits = Vec::new();
    if variants >= 2 && size_units > capacity_limit {
        for file in &pkg.files {
            for d in scan_file(file) {
                if d.class == DefectClass::ReleaseSizeOverflow {
                    let msg = format!(
                        "multiarch release needs {size_units} size units for {variants} variants, capacity limit is {capacity_limit}"
                    );
                    hits.push((d, msg));
                }
            }
        }
    }
    let r = CheckResult::from_hits(hits);
    Ok(ReleaseResult {
        status: r.status,
        log: r.log,
        surfaced_defects: r.surfaced_defects,
        size_units,
    })
}

/// Every defect present in a package's files.
pub fn package_defects(fleet: &Fleet, package: &str) -> Vec<DefectInstance> {
    fleet
        .package(package)
        .map(|p| p.files.iter().flat_map(scan_file).collect())
        .unwrap_or_default()
}

/// Every defect present anywhere in the fleet, ordered by package then file.
pub fn fleet_defects(fleet: &Fleet) -> Vec<DefectInstance> {
    fleet
        .packages
        .iter()
        .flat_map(|p| p.files.iter().flat_map(scan_file))
        .collect()
}

/// Production-only faults of a package, consumed by the health model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RuntimeFaults {
    pub heap_limit: u32,
    pub memory_ordering: u32,
}

pub fn runtime_faults(fleet: &Fleet, package: &str) -> RuntimeFaults {
    let mut faults = RuntimeFaults::default();
    for d in package_defects(fleet, package) {
        match d.class {
            DefectClass::HeapLimit => faults.heap_limit += 1,
            DefectClass::MemoryOrdering => faults.memory_ordering += 1,
            _ => {}
        }
    }
    faults
}

/// True when the job cannot be placed on Arm because of an x86-only
/// constraint, either as a Borg tag or in the package's Borg config text.
pub fn arch_constrained(fleet: &Fleet, job: &Job) -> bool {
    job.borg_constraints.contains(X86_ONLY_TAG)
        || package_defects(fleet, &job.package_id)
            .iter()
            .any(|d| d.class == DefectClass::SchedulingConstraint)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagnostics_round_trip_through_parser() {
        let line = diagnostic_line(DefectClass::ArchSpecificFlag, "pkg_0001/BUILD", 4, "bad flag: x");
        assert_eq!(line, "ERROR ArchSpecificFlag pkg_0001/BUILD:4: bad flag: x");
        let d = parse_diagnostic(&line).unwrap();
        assert_eq!(d.class, DefectClass::ArchSpecificFlag);
        assert_eq!(d.file, "pkg_0001/BUILD");
        assert_eq!(d.line_no, 4);
        assert_eq!(d.message, "bad flag: x");
        assert!(parse_diagnostic("WARN something").is_none());
        assert!(parse_diagnostic("ERROR Bogus a:1: b").is_none());
    }
}
