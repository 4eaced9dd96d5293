use rand::Rng;

use super::config::ScriptedStream;
use crate::fleet::RolloutPhase;
use crate::rng::stream;
use crate::taxonomy::{Category, FileDiff};

const HUNK_PREVIEW_LINES: u32 = 20;

fn body_line(category: Category, k: u32) -> String {
    match category {
        Category::MigrationTooling => format!("RULES['pattern_{k}'] = 'rewrite_{k}'"),
        Category::BuildTestInfrastructure => format!("  - pool: arm-presubmit-{k}"),
        Category::MonitoringAndDashboards => {
            format!("panel \"arm_vs_x86_{k}\" {{ group_by = [\"arch\"] }}")
        }
        Category::HardwarePlatformEnablement => {
            format!("    constraint_values = [\"@platforms//cpu:aarch64_{k}\"],")
        }
        Category::Documentation => {
            format!("{k}. Check the Arm dashboard before widening the rollout.")
        }
        Category::CodeCleanupDeprecation => format!("  legacy_x86_path_{k}();"),
        Category::PerformanceOptimization => format!("    __builtin_prefetch(&block[{k}]);"),
        _ => format!("line {k}"),
    }
}

fn path(category: Category, name: &str, n: u32) -> String {
    match category {
        Category::MigrationTooling => format!("tools/migrate/{name}_{n}.py"),
        Category::BuildTestInfrastructure => format!("tools/ci/{name}_{n}.yaml"),
        Category::MonitoringAndDashboards => format!("monitoring/{name}_{n}.dashboard"),
        Category::HardwarePlatformEnablement => format!("platforms/arm/{name}_{n}.bzl"),
        Category::Documentation => format!("docs/arm/{name}_{n}.md"),
        Category::PerformanceOptimization => format!("perf/{name}_{n}.cc"),
        _ => format!("misc/{name}_{n}.txt"),
    }
}

fn message(category: Category, n: u32) -> String {
    match category {
        Category::MigrationTooling => format!("Extend porting rewrites, batch {n}"),
        Category::BuildTestInfrastructure => format!("Add Arm presubmit pool {n}"),
        Category::MonitoringAndDashboards => format!("Arm vs x86 health panels, part {n}"),
        Category::HardwarePlatformEnablement => format!("Define Arm platform variant {n}"),
        Category::Documentation => format!("Update Arm migration guide, section {n}"),
        Category::CodeCleanupDeprecation => format!("Remove deprecated x86 fallback path {n}"),
        Category::PerformanceOptimization => {
            format!("perf: prefetch tuning for Arm cores, round {n}")
        }
        other => format!("{other} change {n}"),
    }
}

/// A scripted commit before it gets an id.
pub struct ScriptedCommit {
    pub message: String,
    pub diff: FileDiff,
    pub category: Category,
}

/// Commits of one stream for one day. The count is `floor(rate)` plus one
/// more with probability `frac(rate)`; hunks show at most a preview of the
/// changed lines.
pub fn scripted_commits(s: &ScriptedStream, phase: RolloutPhase, day: u32, seed: u64) -> Vec<ScriptedCommit> {
    let rate = s.rate.get(&phase).copied().unwrap_or(0.0);
    let mut rng = stream(seed, &format!("sim/scripted/{}/{day}", s.name));
    let extra = rng.gen::<f64>() < rate.fract();
    let n = rate.floor() as u32 + extra as u32;
    (0..n)
        .map(|i| {
            let serial = day * 10 + i;
            let loc = (rng.gen::<f64>() * (s.max_loc as f64).ln())
                .exp()
                .ceil()
                .clamp(1.0, s.max_loc as f64) as u32;
            let deletion = s.category == Category::CodeCleanupDeprecation;
            let (added, removed) = if deletion { (0, loc) } else { (loc, 0) };
            let sign = if deletion { '-' } else { '+' };
            let shown = loc.min(HUNK_PREVIEW_LINES);
            let mut hunk = vec![format!("@@ -1,{removed} +1,{added} @@")];
            hunk.extend((0..shown).map(|k| format!("{sign}{}", body_line(s.category, k))));
            if loc > shown {
                hunk.push(format!("{sign}... {} more lines", loc - shown));
            }
            let file = if deletion {
                format!("legacy/x86_fallback_{serial}.cc")
            } else {
                path(s.category, &s.name, serial)
            };
            ScriptedCommit {
                message: message(s.category, serial),
                diff: FileDiff {
                    path: file,
                    lines_added: added,
                    lines_removed: removed,
                    hunk_text: hunk.join("\n"),
                },
                category: s.category,
            }
        })
        .collect()
}
