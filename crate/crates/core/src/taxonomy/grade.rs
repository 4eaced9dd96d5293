use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::BTreeMap;

use super::category::Category;
use super::commit::CommitRecord;
use super::stats::category_of;
use crate::protocol::{JsonLineProcess, ProtocolError};
use crate::rng::{stream, unit};

/// Grades commits of one category from 1 (trivially automatable) to 5
/// (hard even for an advanced model).
pub trait Grader {
    fn grade(&mut self, category: Category, commits: &[CommitRecord]) -> Result<Vec<u8>, String>;
}

/// Placeholder grader: a fixed base grade per category, shifted by -1, 0
/// or +1 by a hash of the commit id. It carries no judgment about the
/// commits themselves.
#[derive(Debug, Clone, Copy, Default)]
pub struct PlaceholderGrader;

impl PlaceholderGrader {
    pub fn base(category: Category) -> u8 {
        match category.number() {
            8..=10 => 1,
            6 | 7 | 11..=14 | 16 => 2,
            1..=3 => 3,
            4 | 5 | 15 => 4,
            _ => 3,
        }
    }
}

impl Grader for PlaceholderGrader {
    fn grade(&mut self, category: Category, commits: &[CommitRecord]) -> Result<Vec<u8>, String> {
        Ok(commits
            .iter()
            .map(|c| {
                let shift = (unit(0, &format!("grade/placeholder/{}", c.id)) * 3.0).floor() as i32 - 1;
                (Self::base(category) as i32 + shift).clamp(1, 5) as u8
            })
            .collect())
    }
}

/// Grader in another process: `{"kind":"grade","category":…,"commits":[…]}`
/// in, `{"grades":[…]}` out.
pub struct ExternalGrader {
    process: JsonLineProcess,
}

impl ExternalGrader {
    pub fn spawn(argv: &[String]) -> Result<Self, ProtocolError> {
        Ok(ExternalGrader {
            process: JsonLineProcess::spawn(argv)?,
        })
    }
}

impl Grader for ExternalGrader {
    fn grade(&mut self, category: Category, commits: &[CommitRecord]) -> Result<Vec<u8>, String> {
        let reply = self
            .process
            .request(&json!({ "kind": "grade", "category": category, "commits": commits }))
            .map_err(|e| e.to_string())?;
        let grades = reply
            .get("grades")
            .and_then(|g| g.as_array())
            .ok_or_else(|| "reply has no grades array".to_string())?;
        grades
            .iter()
            .map(|g| {
                g.as_u64()
                    .and_then(|g| u8::try_from(g).ok())
                    .ok_or_else(|| format!("grade {g} is not an integer"))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradeRow {
    pub category: Category,
    pub population: u64,
    pub sampled: Vec<String>,
    /// Counts of grades 1 through 5.
    pub histogram: [u64; 5],
    /// Why the category has no histogram, if the grader failed.
    pub ungraded: Option<String>,
}

/// Samples up to `cap` commits per category (seeded shuffle of the id-sorted
/// commits) and grades each sample in one grader call.
pub fn grade_automatability(commits: &[CommitRecord], grader: &mut dyn Grader, cap: usize, seed: u64) -> Vec<GradeRow> {
    let mut by_cat: BTreeMap<Category, Vec<&CommitRecord>> = BTreeMap::new();
    for c in commits {
        by_cat.entry(category_of(c)).or_default().push(c);
    }
    let mut rows = Vec::new();
    for (category, mut members) in by_cat {
        members.sort_by(|a, b| a.id.cmp(&b.id));
        members.shuffle(&mut stream(seed, &format!("grade/sample/{}", category.number())));
        members.truncate(cap);
        let sample: Vec<CommitRecord> = members.iter().map(|&c| c.clone()).collect();
        let mut row = GradeRow {
            category,
            population: commits.iter().filter(|c| category_of(c) == category).count() as u64,
            sampled: sample.iter().map(|c| c.id.clone()).collect(),
            histogram: [0; 5],
            ungraded: None,
        };
        match grader.grade(category, &sample) {
            Ok(g) if g.len() != sample.len() => {
                row.ungraded = Some(format!("{} grades for {} commits", g.len(), sample.len()));
            }
            Ok(g) if g.iter().any(|&x| !(1..=5).contains(&x)) => {
                row.ungraded = Some("grade outside 1..=5".into());
            }
            Ok(g) => g.iter().for_each(|&x| row.histogram[x as usize - 1] += 1),
            Err(e) => row.ungraded = Some(e),
        }
        rows.push(row);
    }
    rows
}
