use serde::{Deserialize, Serialize};
use serde_json::json;

use super::category::Category;
use super::commit::CommitRecord;
use super::TaxonomyError;
use crate::protocol::{JsonLineProcess, ProtocolError};

fn is_doc(path: &str) -> bool {
    let name = path.rsplit('/').next().unwrap_or(path);
    path.starts_with("docs/")
        || path.contains("/docs/")
        || name.starts_with("README")
        || [".md", ".rst", ".txt"].iter().any(|e| name.ends_with(e))
}

fn is_test(path: &str) -> bool {
    path.ends_with("_test.cc") || path.ends_with("_test.py") || path.contains("/tests/")
}

fn is_build(path: &str) -> bool {
    path == "BUILD" || path.ends_with("/BUILD") || path.ends_with(".bzl")
}

/// Added and removed lines of every hunk, markers stripped.
fn changed_lines(c: &CommitRecord) -> impl Iterator<Item = (&str, &str)> {
    c.file_diffs.iter().flat_map(|d| {
        d.hunk_text
            .lines()
            .filter(|l| !l.starts_with("@@"))
            .filter_map(|l| l.strip_prefix('+').or_else(|| l.strip_prefix('-')))
            .map(move |l| (d.path.as_str(), l))
    })
}

fn changes_contain(c: &CommitRecord, paths: impl Fn(&str) -> bool, needles: &[&str]) -> bool {
    changed_lines(c).any(|(p, l)| paths(p) && needles.iter().any(|n| l.contains(n)))
}

fn any_path(c: &CommitRecord, f: impl Fn(&str) -> bool) -> bool {
    c.file_diffs.iter().any(|d| f(&d.path))
}

fn message_has(c: &CommitRecord, needles: &[&str]) -> bool {
    let m = c.message.to_ascii_lowercase();
    needles.iter().any(|n| m.contains(n))
}

type RuleFn = fn(&CommitRecord) -> bool;

/// Ordered rule table of the heuristic classifier; the first match wins.
pub const HEURISTIC_RULES: &[(&str, Category, RuleFn)] = &[
    ("only documentation files", Category::Documentation, |c| {
        c.file_diffs.iter().all(|d| is_doc(&d.path))
    }),
    (
        "deprecation or dead-code message",
        Category::CodeCleanupDeprecation,
        |c| message_has(c, &["deprecat", "dead code", "remove unused"]),
    ),
    ("migration tool sources", Category::MigrationTooling, |c| {
        any_path(c, |p| p.starts_with("tools/migrate/") || p.starts_with("tools/lsc/"))
    }),
    (
        "dashboards and monitoring config",
        Category::MonitoringAndDashboards,
        |c| any_path(c, |p| p.starts_with("monitoring/") || p.ends_with(".dashboard")),
    ),
    (
        "platform and toolchain definitions",
        Category::HardwarePlatformEnablement,
        |c| any_path(c, |p| p.starts_with("platforms/") || p.starts_with("toolchains/")),
    ),
    (
        "CI and benchmark infrastructure",
        Category::BuildTestInfrastructure,
        |c| any_path(c, |p| p.starts_with("tools/ci/") || p.starts_with("benchmarks/")),
    ),
    ("Blueprint CI mode", Category::TestExecutionEnvironment, |c| {
        changes_contain(c, |p| p.ends_with(".blueprint"), &["_ci_mode"])
            && !changes_contain(c, |p| p.ends_with(".blueprint"), &["_variant_mode"])
    }),
    ("Blueprint release definition", Category::ReleaseAndRolloutConfig, |c| {
        any_path(c, |p| p.ends_with(".blueprint"))
    }),
    ("Borg job config", Category::SchedulingAndProvisioning, |c| {
        any_path(c, |p| p.ends_with(".borg"))
    }),
    ("release bundling in BUILD", Category::ReleaseAndRolloutConfig, |c| {
        changes_contain(c, is_build, &["bundle_debug_symbols"])
    }),
    ("BUILD files", Category::BuildAndConfigFiles, |c| any_path(c, is_build)),
    ("intrinsics and SIMD", Category::IntrinsicsAndVectorCode, |c| {
        changes_contain(c, |_| true, &["_mm_", "simd", "__m128", "vld1q"])
    }),
    ("long double and type widths", Category::DataRepresentation, |c| {
        changes_contain(c, |_| true, &["long double", "float128", "sizeof(long)"])
    }),
    ("atomics and fences", Category::MemoryModel, |c| {
        changes_contain(
            c,
            |_| true,
            &["atomic", "store_relaxed", "store_release", "memory_order", "_fence"],
        )
    }),
    ("test assertions", Category::TestFixes, |c| {
        changes_contain(c, is_test, &["EXPECT_", "ASSERT_"])
    }),
    ("test environment", Category::TestExecutionEnvironment, |c| {
        changes_contain(c, is_test, &["timeout", "getenv", "shard_count"])
    }),
    ("other test changes", Category::TestFixes, |c| any_path(c, is_test)),
    (
        "architecture conditionals",
        Category::PlatformSpecificConditionals,
        |c| changes_contain(c, |_| true, &["__aarch64__", "__x86_64__", "#if defined"]),
    ),
    ("performance tuning", Category::PerformanceOptimization, |c| {
        changes_contain(c, |_| true, &["__builtin_prefetch", "likely(", "cache_line"]) || message_has(c, &["perf:"])
    }),
];

/// The default classifier: a pure function of the commit record.
pub fn classify_heuristic(c: &CommitRecord) -> Category {
    if c.file_diffs.is_empty() {
        return Category::Uncategorized;
    }
    HEURISTIC_RULES
        .iter()
        .find(|(_, _, rule)| rule(c))
        .map_or(Category::Uncategorized, |(_, cat, _)| *cat)
}

pub trait Classifier {
    /// One result per commit, in order. An `Err` is a per-commit failure.
    fn classify_batch(&mut self, batch: &[CommitRecord]) -> Vec<Result<Category, String>>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicClassifier;

impl Classifier for HeuristicClassifier {
    fn classify_batch(&mut self, batch: &[CommitRecord]) -> Vec<Result<Category, String>> {
        batch.iter().map(|c| Ok(classify_heuristic(c))).collect()
    }
}

/// Classifier in another process: `{"kind":"classify","commits":[…]}` in,
/// `{"labels":[…]}` out, one label (name or number) per commit.
pub struct ExternalClassifier {
    process: JsonLineProcess,
}

impl ExternalClassifier {
    pub fn spawn(argv: &[String]) -> Result<Self, ProtocolError> {
        Ok(ExternalClassifier {
            process: JsonLineProcess::spawn(argv)?,
        })
    }

    pub fn round_trips(&self) -> u64 {
        self.process.round_trips()
    }
}

impl Classifier for ExternalClassifier {
    fn classify_batch(&mut self, batch: &[CommitRecord]) -> Vec<Result<Category, String>> {
        let reply = match self.process.request(&json!({ "kind": "classify", "commits": batch })) {
            Ok(r) => r,
            Err(e) => return vec![Err(e.to_string()); batch.len()],
        };
        let labels = reply
            .get("labels")
            .and_then(|l| l.as_array())
            .cloned()
            .unwrap_or_default();
        (0..batch.len())
            .map(|i| {
                let label = labels
                    .get(i)
                    .ok_or_else(|| format!("no label for commit {i} of batch"))?;
                let text = match label {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                Category::parse(&text).ok_or_else(|| format!("unknown label {text}"))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classified {
    pub id: String,
    pub category: Category,
    /// Set when the classifier failed for this commit and it fell back to
    /// `Uncategorized`.
    pub warning: Option<String>,
}

/// Classifies `commits` in batches of `batch_size`. Failures never abort a
/// batch: the commit becomes `Uncategorized` with a warning.
pub fn batch_classify(
    commits: &[CommitRecord],
    batch_size: usize,
    classifier: &mut dyn Classifier,
) -> Result<Vec<Classified>, TaxonomyError> {
    if batch_size == 0 {
        return Err(TaxonomyError::Config("batch_size must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(commits.len());
    for batch in commits.chunks(batch_size) {
        let results = classifier.classify_batch(batch);
        for (i, c) in batch.iter().enumerate() {
            let r = results
                .get(i)
                .cloned()
                .unwrap_or_else(|| Err("classifier returned too few results".into()));
            out.push(match r {
                Ok(category) => Classified {
                    id: c.id.clone(),
                    category,
                    warning: None,
                },
                Err(w) => Classified {
                    id: c.id.clone(),
                    category: Category::Uncategorized,
                    warning: Some(w),
                },
            });
        }
    }
    Ok(out)
}
