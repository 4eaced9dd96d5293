use std::collections::BTreeMap;

use super::qualifier::{BugRecord, QualEvent};

pub fn write_events_csv<W: std::io::Write>(events: &[QualEvent], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "day",
        "job_id",
        "stage_before",
        "verdict",
        "stage_after",
        "arm_fraction",
        "bug_id",
    ])?;
    for e in events {
        w.write_record([
            e.day.to_string().as_str(),
            &e.job_id,
            &e.stage_before,
            &e.verdict,
            &e.stage_after,
            &format!("{:.6}", e.arm_fraction),
            e.bug_id.as_deref().unwrap_or(""),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn bugs_json(bugs: &[BugRecord]) -> String {
    serde_json::to_string_pretty(bugs).expect("bugs serialize")
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReplaySummary {
    pub job_days: usize,
    pub violations: Vec<String>,
}

const LADDER: [&str; 5] = ["NotStarted", "CanaryTask", "CanaryJob", "CanaryCell", "Qualified"];

fn legal(before: &str, after: &str, verdict: &str) -> bool {
    let rank = |s: &str| LADDER.iter().position(|&l| l == s);
    match (before, after) {
        ("Ineligible", "Ineligible" | "CanaryTask") => true,
        ("Qualified", _) => false,
        (b, "Ineligible") => rank(b).is_some() && verdict.starts_with("Regressed"),
        (b, a) => match (rank(b), rank(a)) {
            (Some(i), Some(j)) => j == i || (j == i + 1 && verdict == "Healthy"),
            _ => false,
        },
    }
}

/// Replays a qualification log and reports every violated protocol law:
/// illegal or discontinuous transitions, reaching Qualified in an episode
/// that saw a regression, a decreasing Arm fraction within an episode, and
/// more than one open bug per job.
pub fn check_event_log(events: &[QualEvent], bugs: &[BugRecord]) -> ReplaySummary {
    struct JobTrack<'a> {
        stage: &'a str,
        regressed: bool,
        fraction: f64,
        bug: Option<&'a str>,
    }
    let mut jobs: BTreeMap<&str, JobTrack> = BTreeMap::new();
    let mut violations = Vec::new();
    for (i, e) in events.iter().enumerate() {
        let t = jobs.entry(&e.job_id).or_insert(JobTrack {
            stage: "NotStarted",
            regressed: false,
            fraction: 0.0,
            bug: None,
        });
        let at = format!("event {i} ({} day {})", e.job_id, e.day);
        if e.stage_before != t.stage {
            violations.push(format!("{at}: starts from {} but job was {}", e.stage_before, t.stage));
        }
        if !legal(&e.stage_before, &e.stage_after, &e.verdict) {
            violations.push(format!(
                "{at}: illegal {} -> {} on {}",
                e.stage_before, e.stage_after, e.verdict
            ));
        }
        if e.stage_before == "Ineligible" && e.stage_after == "CanaryTask" {
            t.regressed = false;
            t.fraction = 0.0;
        }
        if e.verdict.starts_with("Regressed") && e.stage_before != "Ineligible" {
            t.regressed = true;
        }
        if e.stage_after == "Qualified" && t.regressed {
            violations.push(format!("{at}: qualified after a regression in the same episode"));
        }
        if e.stage_after != "Ineligible" {
            if e.arm_fraction + 1e-12 < t.fraction {
                violations.push(format!(
                    "{at}: arm fraction fell from {} to {}",
                    t.fraction, e.arm_fraction
                ));
            }
            t.fraction = e.arm_fraction;
        }
        match (t.bug, e.bug_id.as_deref()) {
            (Some(open), Some(now)) if open != now => {
                violations.push(format!("{at}: bug {now} filed while {open} is open"));
            }
            (_, Some(_)) if e.stage_after != "Ineligible" => {
                violations.push(format!("{at}: open bug outside Ineligible"));
            }
            _ => {}
        }
        t.bug = e.bug_id.as_deref();
        t.stage = &e.stage_after;
    }

    let mut by_job: BTreeMap<&str, Vec<&BugRecord>> = BTreeMap::new();
    for b in bugs {
        by_job.entry(&b.job_id).or_default().push(b);
    }
    for (job, mut list) in by_job {
        list.sort_by_key(|b| b.day_filed);
        let open = list.iter().filter(|b| !b.resolved).count();
        if open > 1 {
            violations.push(format!("{job}: {open} unresolved bugs"));
        }
        for w in list.windows(2) {
            match w[0].day_resolved {
                Some(r) if r <= w[1].day_filed => {}
                _ => violations.push(format!(
                    "{job}: {} still open when {} was filed",
                    w[0].bug_id, w[1].bug_id
                )),
            }
        }
    }
    ReplaySummary {
        job_days: events.len(),
        violations,
    }
}
