//! Portability oracle.
//!
//! Defects are literal text patterns in synthetic source files (see the table
//! in [`DefectClass`]). Build, test, sanitizer and release outcomes are pure
//! functions of file text: a defect is present iff its pattern occurs, and it
//! is fixed iff the pattern no longer does.
//!
//! | class | phase | pattern | canonical fix |
//! |---|---|---|---|
//! | IntrinsicUse | build | `_mm_add_ps` | `portable_simd_add` |
//! | ArchSpecificFlag | build | `"-mavx2"` | `"-O2"` |
//! | UnsupportedDependency | build (transitive) | `//third_party/ipp:ipp_x86` | `//third_party/portable:ipp_compat` |
//! | LongDouble | test | `long double` | `float128_t` |
//! | ExactFpEquality | test | `EXPECT_EQ(expected, computed)` | `EXPECT_NEAR(expected, computed, 1e-9)` |
//! | MemoryOrdering | sanitizer | `store_relaxed(&ready` | fence + `store_release(&ready` |
//! | ReleaseSizeOverflow | release | `bundle_debug_symbols = True` | `bundle_debug_symbols = False` |
//! | SchedulingConstraint | deploy | `arch == x86_64` | `arch == any` |
//! | HeapLimit | runtime only | `max_heap_mb = 3072` | `max_heap_mb = 4608` |

mod defect;
mod edit;
mod eval;
mod inject;

pub use defect::{
    defect_id, scan_file, DefectClass, DefectInstance, DefectMix, FileRole, SurfacePhase, LOG_TEMPLATE_VERSION,
};
pub use edit::{
    apply_edit, apply_edit_in_place, apply_fix, canonical_edit, find_defect, fix_defect_in_place, Edit, FixTarget,
};
pub use eval::{
    arch_constrained, build, build_release, diagnostic_line, fleet_defects, package_defects, parse_diagnostic,
    run_test, runtime_faults, BuildResult, CheckResult, Diagnostic, ReleaseResult, RuntimeFaults, Status, TestResult,
};
pub use inject::inject_defects;

use crate::fleet::Isa;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("edit error: {0}")]
    Edit(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("{target} does not build for {isa}")]
    BuildFailed {
        target: String,
        isa: Isa,
        result: CheckResult,
    },
}

/// Builds every build target and runs every test target of a package on
/// `isa`; returns the failing (target, result) pairs in declaration order.
pub fn package_failures(
    fleet: &crate::fleet::Fleet,
    package: &str,
    isa: Isa,
    sanitizers: bool,
) -> Result<Vec<(String, CheckResult)>, OracleError> {
    let pkg = fleet
        .package(package)
        .ok_or_else(|| OracleError::NotFound(format!("package {package}")))?;
    let mut out = Vec::new();
    for t in &pkg.build_targets {
        let r = build(fleet, &t.id, isa)?;
        if !r.passed() {
            out.push((t.id.clone(), r));
        }
    }
    for t in &pkg.test_targets {
        let r = run_test(fleet, &t.id, isa, sanitizers)?;
        if !r.passed() {
            out.push((t.id.clone(), r));
        }
    }
    Ok(out)
}
