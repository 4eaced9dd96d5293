use serde::{Deserialize, Serialize};

use super::spec::{ChangeSpec, Predicate, Template};
use super::LscError;
use crate::fleet::{blueprint_path, line_diff, package_of_path, Fleet, Isa, LineDiff};
use crate::oracle::{apply_edit_in_place, Edit};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum EditOp {
    AddArmVariant,
    RemoveArmVariant,
    SetArmCi { enabled: bool },
    Replace { match_text: String, replacement: String },
}

/// One concrete edit of one file (Blueprints use their virtual path).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FileEdit {
    pub file: String,
    #[serde(flatten)]
    pub op: EditOp,
}

impl FileEdit {
    pub fn package_id(&self) -> &str {
        package_of_path(&self.file)
    }

    pub fn inverse(&self) -> FileEdit {
        let op = match &self.op {
            EditOp::AddArmVariant => EditOp::RemoveArmVariant,
            EditOp::RemoveArmVariant => EditOp::AddArmVariant,
            EditOp::SetArmCi { enabled } => EditOp::SetArmCi { enabled: !enabled },
            EditOp::Replace {
                match_text,
                replacement,
            } => EditOp::Replace {
                match_text: replacement.clone(),
                replacement: match_text.clone(),
            },
        };
        FileEdit {
            file: self.file.clone(),
            op,
        }
    }

    /// True when applying the edit would not change the fleet.
    pub fn is_applied(&self, fleet: &Fleet) -> bool {
        let Some(pkg) = fleet.package(self.package_id()) else {
            return false;
        };
        match &self.op {
            EditOp::AddArmVariant => pkg.blueprint.arm_release(),
            EditOp::RemoveArmVariant => !pkg.blueprint.arm_release(),
            EditOp::SetArmCi { enabled } => pkg.blueprint.ci_on(Isa::Arm) == *enabled,
            EditOp::Replace { match_text, .. } => pkg
                .file(&self.file)
                .is_some_and(|f| !f.text().contains(match_text.as_str())),
        }
    }
}

/// The unsharded set of edits an LSC makes, sorted by file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MegaChange {
    pub spec_id: String,
    pub edits: Vec<FileEdit>,
}

pub fn generate_change(fleet: &Fleet, spec: &ChangeSpec) -> Result<MegaChange, LscError> {
    let (predicate, template) = spec.compile()?;
    let mut edits = Vec::new();
    match (&predicate, &template) {
        (Predicate::Blueprint(_), Template::EnableArmRelease | Template::EnableArmCi) => {
            for pkg in &fleet.packages {
                if !predicate.matches_package(&pkg.id) {
                    continue;
                }
                let op = if template == Template::EnableArmRelease {
                    EditOp::AddArmVariant
                } else {
                    EditOp::SetArmCi { enabled: true }
                };
                let edit = FileEdit {
                    file: blueprint_path(&pkg.id),
                    op,
                };
                if !edit.is_applied(fleet) {
                    edits.push(edit);
                }
            }
        }
        (
            Predicate::Files(glob),
            Template::Replace {
                match_text,
                replacement,
            },
        ) => {
            for pkg in &fleet.packages {
                for f in &pkg.files {
                    if glob.matches(&f.path) && f.text().contains(match_text.as_str()) {
                        edits.push(FileEdit {
                            file: f.path.clone(),
                            op: EditOp::Replace {
                                match_text: match_text.clone(),
                                replacement: replacement.clone(),
                            },
                        });
                    }
                }
            }
        }
        _ => unreachable!("compile() rejects mismatched predicate and template"),
    }
    edits.sort();
    Ok(MegaChange {
        spec_id: spec.id.clone(),
        edits,
    })
}

/// Applies one edit in place and returns the line diff it produced. Already
/// applied edits are no-ops with an empty diff.
pub fn apply_file_edit(fleet: &mut Fleet, edit: &FileEdit) -> Result<(String, LineDiff), LscError> {
    let pkg_id = edit.package_id().to_string();
    if fleet.package(&pkg_id).is_none() {
        return Err(LscError::Integrity(format!("edit of {} names no package", edit.file)));
    }
    if edit.is_applied(fleet) {
        return Ok((edit.file.clone(), LineDiff::default()));
    }
    match &edit.op {
        EditOp::Replace {
            match_text,
            replacement,
        } => {
            let before = fleet.file(&edit.file).map(|f| f.lines.clone()).unwrap_or_default();
            apply_edit_in_place(fleet, &Edit::new(&edit.file, match_text, replacement))?;
            let after = &fleet.file(&edit.file).expect("edited file exists").lines;
            Ok((edit.file.clone(), line_diff(&before, after)))
        }
        op => {
            let bp = &mut fleet.package_mut(&pkg_id).expect("package checked").blueprint;
            let before = bp.render();
            match op {
                EditOp::AddArmVariant => {
                    bp.variant_modes.insert(Isa::Arm);
                }
                EditOp::RemoveArmVariant => {
                    bp.variant_modes.remove(&Isa::Arm);
                }
                EditOp::SetArmCi { enabled } => {
                    bp.ci_enabled.insert(Isa::Arm, *enabled);
                }
                EditOp::Replace { .. } => unreachable!(),
            }
            Ok((edit.file.clone(), line_diff(&before, &bp.render())))
        }
    }
}

pub fn apply_edits(fleet: &mut Fleet, edits: &[FileEdit]) -> Result<Vec<(String, LineDiff)>, LscError> {
    edits.iter().map(|e| apply_file_edit(fleet, e)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fleet::{generate_fleet, FleetParams, RolloutPhase};

    fn fleet() -> Fleet {
        generate_fleet(&FleetParams {
            n_packages: 10,
            n_owners: 3,
            n_cells: 2,
            ..FleetParams::default()
        })
        .unwrap()
    }

    #[test]
    fn enable_arm_release_edits_each_blueprint_lacking_arm() {
        let mut f = fleet();
        let spec = ChangeSpec::new("arm", "blueprint(*)", "enable_arm_release", RolloutPhase::Early);
        let mega = generate_change(&f, &spec).unwrap();
        assert_eq!(mega.edits.len(), 10);
        let diffs = apply_edits(&mut f, &mega.edits[..1]).unwrap();
        assert!(diffs[0]
            .1
            .hunk_text
            .contains("+  arm_variant_mode = ::blueprint::VariantMode::VARIANT_MODE_RELEASE,"));
        assert_eq!(diffs[0].1.lines_added, 1);
        assert_eq!(generate_change(&f, &spec).unwrap().edits.len(), 9);
    }

    #[test]
    fn predicate_matching_nothing_is_empty() {
        let f = fleet();
        let spec = ChangeSpec::new("none", "blueprint(zzz*)", "enable_arm_release", RolloutPhase::Early);
        assert!(generate_change(&f, &spec).unwrap().edits.is_empty());
    }

    #[test]
    fn double_application_is_a_no_op() {
        let mut f = fleet();
        let spec = ChangeSpec::new("ci", "blueprint(*)", "enable_arm_ci", RolloutPhase::Early);
        let mega = generate_change(&f, &spec).unwrap();
        apply_edits(&mut f, &mega.edits).unwrap();
        let once = f.to_json();
        let diffs = apply_edits(&mut f, &mega.edits).unwrap();
        assert_eq!(f.to_json(), once);
        assert!(diffs.iter().all(|(_, d)| d.is_empty()));
    }

    #[test]
    fn inverse_restores_blueprint() {
        let mut f = fleet();
        let orig = f.clone();
        let spec = ChangeSpec::new("arm", "blueprint(*)", "enable_arm_release", RolloutPhase::Early);
        let mega = generate_change(&f, &spec).unwrap();
        apply_edits(&mut f, &mega.edits).unwrap();
        let undo: Vec<FileEdit> = mega.edits.iter().rev().map(FileEdit::inverse).collect();
        apply_edits(&mut f, &undo).unwrap();
        assert_eq!(f, orig);
    }
}
