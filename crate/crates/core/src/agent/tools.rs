use serde::{Deserialize, Serialize};

use crate::fleet::{Fleet, Isa};
use crate::oracle::{apply_edit_in_place, build, run_test, CheckResult, Edit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FinishStatus {
    Success,
    GiveUp,
}

/// A tool invocation. Serialized as `{"tool": "<Name>", "args": {...}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "tool", content = "args", deny_unknown_fields)]
pub enum ToolCall {
    Build {
        target: String,
    },
    RunTest {
        target: String,
    },
    FixBuildFile {
        package: String,
    },
    SearchCode {
        query: String,
    },
    EditCode {
        file: String,
        match_text: String,
        replacement: String,
    },
    Finish {
        status: FinishStatus,
    },
}

/// One reasoning step: free-text note plus the tool call it chose.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub note: String,
    #[serde(flatten)]
    pub call: ToolCall,
}

impl Action {
    pub fn new(note: impl Into<String>, call: ToolCall) -> Self {
        Action {
            note: note.into(),
            call,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolOutput {
    pub ok: bool,
    pub lines: Vec<String>,
}

impl ToolOutput {
    fn from_check(target: &str, r: CheckResult) -> Self {
        if r.passed() {
            ToolOutput {
                ok: true,
                lines: vec![format!("{target}: PASS")],
            }
        } else {
            ToolOutput {
                ok: false,
                lines: r.log,
            }
        }
    }

    fn error(msg: String) -> Self {
        ToolOutput {
            ok: false,
            lines: vec![msg],
        }
    }
}

pub const SEARCH_RESULT_LIMIT: usize = 50;

/// Executes a tool against the workspace. Builds and tests run on Arm.
pub fn execute(fleet: &mut Fleet, call: &ToolCall, sanitizers: bool) -> ToolOutput {
    match call {
        ToolCall::Build { target } => match build(fleet, target, Isa::Arm) {
            Ok(r) => ToolOutput::from_check(target, r),
            Err(e) => ToolOutput::error(format!("error: {e}")),
        },
        ToolCall::RunTest { target } => match run_test(fleet, target, Isa::Arm, sanitizers) {
            Ok(r) => ToolOutput::from_check(target, r),
            Err(e) => ToolOutput::error(format!("error: {e}")),
        },
        ToolCall::FixBuildFile { package } => fix_build_file(fleet, package),
        ToolCall::SearchCode { query } => search_code(fleet, query),
        ToolCall::EditCode {
            file,
            match_text,
            replacement,
        } => match apply_edit_in_place(fleet, &Edit::new(file, match_text, replacement)) {
            Ok(()) => ToolOutput {
                ok: true,
                lines: vec![format!("edited {file}")],
            },
            Err(e) => ToolOutput::error(format!("error: {e}")),
        },
        ToolCall::Finish { .. } => ToolOutput {
            ok: true,
            lines: Vec::new(),
        },
    }
}

/// `path:line: text` for every line containing `query`, in fleet order.
pub fn search_code(fleet: &Fleet, query: &str) -> ToolOutput {
    if query.is_empty() {
        return ToolOutput::error("error: empty query".into());
    }
    let mut lines = Vec::new();
    'outer: for pkg in &fleet.packages {
        for f in &pkg.files {
            for (i, l) in f.lines.iter().enumerate() {
                if l.contains(query) {
                    lines.push(format!("{}:{}: {}", f.path, i + 1, l.trim()));
                    if lines.len() == SEARCH_RESULT_LIMIT {
                        break 'outer;
                    }
                }
            }
        }
    }
    ToolOutput {
        ok: !lines.is_empty(),
        lines,
    }
}

/// Normalizes a package's target lists and Blueprint: drops target sources
/// that no longer exist, dedupes and sorts deps, and restores X86 to the
/// variant modes. Reports each change made.
pub fn fix_build_file(fleet: &mut Fleet, package: &str) -> ToolOutput {
    let Some(pkg) = fleet.package_mut(package) else {
        return ToolOutput::error(format!("error: not found: package {package}"));
    };
    let existing: std::collections::BTreeSet<String> = pkg.files.iter().map(|f| f.path.clone()).collect();
    let mut notes = Vec::new();
    for t in pkg.build_targets.iter_mut().chain(pkg.test_targets.iter_mut()) {
        let before = t.srcs.len();
        t.srcs.retain(|s| existing.contains(s));
        if t.srcs.len() != before {
            notes.push(format!("{}: dropped {} missing source(s)", t.id, before - t.srcs.len()));
        }
    }
    let mut deps = pkg.deps.clone();
    deps.sort();
    deps.dedup();
    if deps != pkg.deps {
        notes.push(format!("{package}: normalized deps"));
        pkg.deps = deps;
    }
    if pkg.blueprint.variant_modes.insert(Isa::X86) {
        notes.push(format!("{package}: restored x86 variant"));
    }
    if notes.is_empty() {
        notes.push(format!("{package}: build files already normalized"));
    }
    ToolOutput { ok: true, lines: notes }
}
