use serde::{Deserialize, Serialize};

use super::defect::{scan_file, DefectInstance};
use super::OracleError;
use crate::fleet::Fleet;

/// Textual substitution of the first occurrence of `match_text` in `file`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edit {
    pub file: String,
    pub match_text: String,
    pub replacement: String,
}

impl Edit {
    pub fn new(file: impl Into<String>, match_text: impl Into<String>, replacement: impl Into<String>) -> Self {
        Edit {
            file: file.into(),
            match_text: match_text.into(),
            replacement: replacement.into(),
        }
    }

    /// The edit that undoes this one, assuming the replacement text is unique.
    pub fn inverse(&self) -> Edit {
        Edit::new(&self.file, &self.replacement, &self.match_text)
    }
}

pub enum FixTarget<'a> {
    Defect(&'a str),
    Edit(&'a Edit),
}

pub fn apply_edit_in_place(fleet: &mut Fleet, edit: &Edit) -> Result<(), OracleError> {
    if edit.match_text.is_empty() {
        return Err(OracleError::Edit(format!("empty match text for {}", edit.file)));
    }
    let file = fleet
        .file_mut(&edit.file)
        .ok_or_else(|| OracleError::Edit(format!("no such file {}", edit.file)))?;
    let text = file.text();
    let Some(pos) = text.find(&edit.match_text) else {
        return Err(OracleError::Edit(format!(
            "'{}' not found in {}",
            edit.match_text, edit.file
        )));
    };
    let mut next = String::with_capacity(text.len() + edit.replacement.len());
    next.push_str(&text[..pos]);
    next.push_str(&edit.replacement);
    next.push_str(&text[pos + edit.match_text.len()..]);
    file.lines = next.split('\n').map(str::to_string).collect();
    Ok(())
}

pub fn apply_edit(fleet: &Fleet, edit: &Edit) -> Result<Fleet, OracleError> {
    let mut next = fleet.clone();
    apply_edit_in_place(&mut next, edit)?;
    Ok(next)
}

/// Finds a present defect by id (`<file>:<line>`).
pub fn find_defect(fleet: &Fleet, defect_id: &str) -> Option<DefectInstance> {
    let (path, _) = defect_id.rsplit_once(':')?;
    scan_file(fleet.file(path)?).into_iter().find(|d| d.id == defect_id)
}

/// The canonical fix for a located defect, as an edit of exactly its line.
pub fn canonical_edit(fleet: &Fleet, defect: &DefectInstance) -> Option<Edit> {
    let line = fleet.file(&defect.file_path)?.lines.get(defect.line_no - 1)?;
    Some(Edit::new(
        &defect.file_path,
        line.clone(),
        line.replacen(defect.class.pattern(), defect.class.canonical_fix(), 1),
    ))
}

/// Replaces the defect's pattern on its own line with the canonical fix.
pub fn fix_defect_in_place(fleet: &mut Fleet, defect_id: &str) -> Result<DefectInstance, OracleError> {
    let defect =
        find_defect(fleet, defect_id).ok_or_else(|| OracleError::Edit(format!("defect {defect_id} is not present")))?;
    let file = fleet.file_mut(&defect.file_path).expect("defect file exists");
    let line = &mut file.lines[defect.line_no - 1];
    *line = line.replacen(defect.class.pattern(), defect.class.canonical_fix(), 1);
    Ok(defect)
}

pub fn apply_fix(fleet: &Fleet, target: FixTarget<'_>) -> Result<Fleet, OracleError> {
    let mut next = fleet.clone();
    match target {
        FixTarget::Defect(id) => {
            fix_defect_in_place(&mut next, id)?;
        }
        FixTarget::Edit(edit) => apply_edit_in_place(&mut next, edit)?,
    }
    Ok(next)
}
