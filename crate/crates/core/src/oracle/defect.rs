use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

use crate::fleet::SourceFile;

/// Version of the diagnostic message templates below. Fixers key on the
/// `ERROR <class> <file>:<line>:` prefix and on these messages.
pub const LOG_TEMPLATE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DefectClass {
    IntrinsicUse,
    LongDouble,
    ExactFpEquality,
    ArchSpecificFlag,
    MemoryOrdering,
    HeapLimit,
    UnsupportedDependency,
    SchedulingConstraint,
    ReleaseSizeOverflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SurfacePhase {
    BuildTime,
    TestTime,
    SanitizerTime,
    ReleaseTime,
    DeployTime,
    RuntimeOnly,
}

/// Which synthetic file of a package a defect class lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileRole {
    LibrarySource,
    TestSource,
    BuildFile,
    BorgConfig,
}

impl FileRole {
    pub fn of_path(path: &str) -> Option<FileRole> {
        if path.ends_with("/BUILD") {
            Some(FileRole::BuildFile)
        } else if path.ends_with(".borg") {
            Some(FileRole::BorgConfig)
        } else if path.ends_with("_test.cc") {
            Some(FileRole::TestSource)
        } else if path.ends_with(".cc") && !path.ends_with("/main.cc") {
            Some(FileRole::LibrarySource)
        } else {
            None
        }
    }
}

impl DefectClass {
    pub const ALL: [DefectClass; 9] = [
        DefectClass::IntrinsicUse,
        DefectClass::LongDouble,
        DefectClass::ExactFpEquality,
        DefectClass::ArchSpecificFlag,
        DefectClass::MemoryOrdering,
        DefectClass::HeapLimit,
        DefectClass::UnsupportedDependency,
        DefectClass::SchedulingConstraint,
        DefectClass::ReleaseSizeOverflow,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DefectClass::IntrinsicUse => "IntrinsicUse",
            DefectClass::LongDouble => "LongDouble",
            DefectClass::ExactFpEquality => "ExactFpEquality",
            DefectClass::ArchSpecificFlag => "ArchSpecificFlag",
            DefectClass::MemoryOrdering => "MemoryOrdering",
            DefectClass::HeapLimit => "HeapLimit",
            DefectClass::UnsupportedDependency => "UnsupportedDependency",
            DefectClass::SchedulingConstraint => "SchedulingConstraint",
            DefectClass::ReleaseSizeOverflow => "ReleaseSizeOverflow",
        }
    }

    pub fn parse(s: &str) -> Option<DefectClass> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }

    /// Phase at which the class becomes observable. MemoryOrdering is
    /// SanitizerTime; with sanitizers off it behaves as RuntimeOnly.
    pub fn phase(self) -> SurfacePhase {
        match self {
            DefectClass::IntrinsicUse | DefectClass::ArchSpecificFlag | DefectClass::UnsupportedDependency => {
                SurfacePhase::BuildTime
            }
            DefectClass::LongDouble | DefectClass::ExactFpEquality => SurfacePhase::TestTime,
            DefectClass::MemoryOrdering => SurfacePhase::SanitizerTime,
            DefectClass::HeapLimit => SurfacePhase::RuntimeOnly,
            DefectClass::ReleaseSizeOverflow => SurfacePhase::ReleaseTime,
            DefectClass::SchedulingConstraint => SurfacePhase::DeployTime,
        }
    }

    pub fn effective_phase(self, sanitizers: bool) -> SurfacePhase {
        match (self, sanitizers) {
            (DefectClass::MemoryOrdering, false) => SurfacePhase::RuntimeOnly,
            _ => self.phase(),
        }
    }

    /// The exact substring whose presence in a file constitutes the defect.
    pub fn pattern(self) -> &'static str {
        match self {
            DefectClass::IntrinsicUse => "_mm_add_ps",
            DefectClass::LongDouble => "long double",
            DefectClass::ExactFpEquality => "EXPECT_EQ(expected, computed)",
            DefectClass::ArchSpecificFlag => "\"-mavx2\"",
            DefectClass::MemoryOrdering => "store_relaxed(&ready",
            DefectClass::HeapLimit => "max_heap_mb = 3072",
            DefectClass::UnsupportedDependency => "//third_party/ipp:ipp_x86",
            DefectClass::SchedulingConstraint => "arch == x86_64",
            DefectClass::ReleaseSizeOverflow => "bundle_debug_symbols = True",
        }
    }

    /// Replacement for [`pattern`](Self::pattern) that removes the defect.
    pub fn canonical_fix(self) -> &'static str {
        match self {
            DefectClass::IntrinsicUse => "portable_simd_add",
            DefectClass::LongDouble => "float128_t",
            DefectClass::ExactFpEquality => "EXPECT_NEAR(expected, computed, 1e-9)",
            DefectClass::ArchSpecificFlag => "\"-O2\"",
            DefectClass::MemoryOrdering => "atomic_thread_fence(seq_cst); store_release(&ready",
            DefectClass::HeapLimit => "max_heap_mb = 4608",
            DefectClass::UnsupportedDependency => "//third_party/portable:ipp_compat",
            DefectClass::SchedulingConstraint => "arch == any",
            DefectClass::ReleaseSizeOverflow => "bundle_debug_symbols = False",
        }
    }

    /// Full source line inserted when the defect is injected.
    pub fn injected_line(self) -> &'static str {
        match self {
            DefectClass::IntrinsicUse => "  acc = _mm_add_ps(acc, lane);",
            DefectClass::LongDouble => "  long double accum = 0.0L;",
            DefectClass::ExactFpEquality => "  EXPECT_EQ(expected, computed);  // 1.0 / 3.0",
            DefectClass::ArchSpecificFlag => "    copts = [\"-mavx2\"],",
            DefectClass::MemoryOrdering => "  store_relaxed(&ready, true);  // publish",
            DefectClass::HeapLimit => "  max_heap_mb = 3072",
            DefectClass::UnsupportedDependency => "    deps = [\"//third_party/ipp:ipp_x86\"],",
            DefectClass::SchedulingConstraint => "  constraint = \"arch == x86_64\"",
            DefectClass::ReleaseSizeOverflow => "    bundle_debug_symbols = True,",
        }
    }

    pub fn file_role(self) -> FileRole {
        match self {
            DefectClass::IntrinsicUse | DefectClass::LongDouble | DefectClass::MemoryOrdering => {
                FileRole::LibrarySource
            }
            DefectClass::ExactFpEquality => FileRole::TestSource,
            DefectClass::ArchSpecificFlag | DefectClass::UnsupportedDependency | DefectClass::ReleaseSizeOverflow => {
                FileRole::BuildFile
            }
            DefectClass::HeapLimit | DefectClass::SchedulingConstraint => FileRole::BorgConfig,
        }
    }

    /// Class-specific diagnostic message. `via` names the dependency package
    /// through which a transitive build failure was reached.
    pub fn message(self, via: Option<&str>) -> String {
        match self {
            DefectClass::IntrinsicUse => "x86 intrinsic '_mm_add_ps' is not available on aarch64".into(),
            DefectClass::ArchSpecificFlag => "unsupported compiler flag \"-mavx2\" for target aarch64".into(),
            DefectClass::UnsupportedDependency => match via {
                Some(dep) => {
                    format!("library '//third_party/ipp:ipp_x86' has no aarch64 variant (via dependency //{dep})")
                }
                None => "library '//third_party/ipp:ipp_x86' has no aarch64 variant".into(),
            },
            DefectClass::LongDouble => {
                "long double width differs: 80-bit x87 extended on x86, 128-bit IEEE quad on aarch64".into()
            }
            DefectClass::ExactFpEquality => {
                "expected 0.333333333 == computed 0.333333343 (exact floating point comparison)".into()
            }
            DefectClass::MemoryOrdering => {
                "ThreadSanitizer: data race on 'ready' (relaxed store publishes unsynchronized data)".into()
            }
            DefectClass::HeapLimit => "heap limit tuned for x86 is too small on aarch64".into(),
            DefectClass::SchedulingConstraint => "job constrained to x86_64 machines".into(),
            DefectClass::ReleaseSizeOverflow => "multiarch release exceeds release size capacity".into(),
        }
    }
}

impl fmt::Display for DefectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Located defect. Identity is `<file>:<line>`; presence is never stored,
/// it is recomputed by scanning file text.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DefectInstance {
    pub id: String,
    pub class: DefectClass,
    pub file_path: String,
    pub line_no: usize,
    pub pattern: String,
}

pub fn defect_id(path: &str, line_no: usize) -> String {
    format!("{path}:{line_no}")
}

/// Scans one file. At most one defect is reported per line; if a line holds
/// several patterns the first class in declaration order wins.
pub fn scan_file(file: &SourceFile) -> Vec<DefectInstance> {
    let mut out = Vec::new();
    for (idx, line) in file.lines.iter().enumerate() {
        if let Some(class) = DefectClass::ALL.into_iter().find(|c| line.contains(c.pattern())) {
            let line_no = idx + 1;
            out.push(DefectInstance {
                id: defect_id(&file.path, line_no),
                class,
                file_path: file.path.clone(),
                line_no,
                pattern: class.pattern().to_string(),
            });
        }
    }
    out
}

/// Probability distribution over defect classes used for injection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DefectMix(pub BTreeMap<DefectClass, f64>);

impl Default for DefectMix {
    fn default() -> Self {
        use DefectClass::*;
        DefectMix(BTreeMap::from([
            (IntrinsicUse, 0.12),
            (LongDouble, 0.10),
            (ExactFpEquality, 0.16),
            (ArchSpecificFlag, 0.12),
            (MemoryOrdering, 0.08),
            (HeapLimit, 0.10),
            (UnsupportedDependency, 0.12),
            (SchedulingConstraint, 0.10),
            (ReleaseSizeOverflow, 0.10),
        ]))
    }
}

impl DefectMix {
    pub fn only(class: DefectClass) -> Self {
        DefectMix(BTreeMap::from([(class, 1.0)]))
    }

    pub fn weight(&self, class: DefectClass) -> f64 {
        self.0.get(&class).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<(), String> {
        for (class, w) in &self.0 {
            if !w.is_finite() || *w < 0.0 {
                return Err(format!(
                    "defect_mix weight for {class} must be a finite non-negative number"
                ));
            }
        }
        let sum: f64 = self.0.values().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(format!("defect_mix must sum to 1 (got {sum})"));
        }
        Ok(())
    }
}
