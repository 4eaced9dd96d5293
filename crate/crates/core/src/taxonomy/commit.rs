use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

use super::category::Category;
use crate::fleet::LineDiff;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDiff {
    pub path: String,
    pub lines_added: u32,
    pub lines_removed: u32,
    pub hunk_text: String,
}

impl FileDiff {
    pub fn from_line_diff(path: impl Into<String>, d: &LineDiff) -> Self {
        FileDiff {
            path: path.into(),
            lines_added: d.lines_added,
            lines_removed: d.lines_removed,
            hunk_text: d.hunk_text.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub id: String,
    pub day: u32,
    pub message: String,
    pub file_diffs: Vec<FileDiff>,
    pub loc_delta: u64,
    pub automated: bool,
    #[serde(default)]
    pub category: Option<Category>,
    /// What produced the commit (`lsc/<spec>`, `agent`, `manual`, ...).
    #[serde(default)]
    pub origin: String,
}

impl CommitRecord {
    /// Builds a record, deriving `loc_delta` from the diffs.
    pub fn new(
        id: impl Into<String>,
        day: u32,
        message: impl Into<String>,
        file_diffs: Vec<FileDiff>,
        automated: bool,
    ) -> Self {
        let loc_delta = file_diffs
            .iter()
            .map(|d| d.lines_added as u64 + d.lines_removed as u64)
            .sum();
        CommitRecord {
            id: id.into(),
            day,
            message: message.into(),
            file_diffs,
            loc_delta,
            automated,
            category: None,
            origin: String::new(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let sum: u64 = self
            .file_diffs
            .iter()
            .map(|d| d.lines_added as u64 + d.lines_removed as u64)
            .sum();
        if sum != self.loc_delta {
            return Err(format!(
                "{}: loc_delta {} but diffs sum to {sum}",
                self.id, self.loc_delta
            ));
        }
        if let Some(d) = self.file_diffs.iter().find(|d| d.path.is_empty()) {
            return Err(format!(
                "{}: empty path in diff ({} lines)",
                self.id,
                d.lines_added + d.lines_removed
            ));
        }
        Ok(())
    }
}

pub fn read_corpus<R: BufRead>(input: R) -> Result<Vec<CommitRecord>, String> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CommitRecord = serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", i + 1))?;
        rec.validate().map_err(|e| format!("line {}: {e}", i + 1))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_corpus<W: Write>(commits: &[CommitRecord], mut out: W) -> std::io::Result<()> {
    for c in commits {
        serde_json::to_writer(&mut out, c)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
