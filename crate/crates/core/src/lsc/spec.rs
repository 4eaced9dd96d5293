use serde::{Deserialize, Serialize};
use std::path::Path;

use super::LscError;
use crate::fleet::RolloutPhase;

/// One large-scale change as read from a spec file.
///
/// ```toml
/// id = "arm-release"
/// predicate = "blueprint(pkg_00*)"
/// template = "enable_arm_release"
/// phase = "Early"
/// global_approval = false
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChangeSpec {
    pub id: String,
    pub predicate: String,
    pub template: String,
    pub phase: RolloutPhase,
    #[serde(default)]
    pub global_approval: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub match_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replacement: Option<String>,
}

#[derive(Debug, Clone)]
pub enum Predicate {
    /// Blueprints of packages whose id matches any of the globs.
    Blueprint(Vec<glob::Pattern>),
    /// Source files whose path matches the glob.
    Files(glob::Pattern),
}

impl Predicate {
    pub fn parse(s: &str) -> Result<Predicate, LscError> {
        let s = s.trim();
        let (kind, rest) = s.split_once('(').ok_or_else(|| {
            LscError::Spec(format!(
                "predicate '{s}' must look like blueprint(<glob>) or files(<glob>)"
            ))
        })?;
        let body = rest
            .strip_suffix(')')
            .ok_or_else(|| LscError::Spec(format!("predicate '{s}' is missing ')'")))?;
        let pattern =
            |g: &str| glob::Pattern::new(g.trim()).map_err(|e| LscError::Spec(format!("bad glob '{}': {e}", g.trim())));
        match kind.trim() {
            "blueprint" => Ok(Predicate::Blueprint(
                body.split(',').map(pattern).collect::<Result<_, _>>()?,
            )),
            "files" => Ok(Predicate::Files(pattern(body)?)),
            other => Err(LscError::Spec(format!("unknown predicate kind '{other}'"))),
        }
    }

    pub fn matches_package(&self, package_id: &str) -> bool {
        match self {
            Predicate::Blueprint(globs) => globs.iter().any(|g| g.matches(package_id)),
            Predicate::Files(_) => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Template {
    EnableArmRelease,
    EnableArmCi,
    Replace { match_text: String, replacement: String },
}

impl ChangeSpec {
    pub fn new(
        id: impl Into<String>,
        predicate: impl Into<String>,
        template: impl Into<String>,
        phase: RolloutPhase,
    ) -> Self {
        ChangeSpec {
            id: id.into(),
            predicate: predicate.into(),
            template: template.into(),
            phase,
            global_approval: false,
            match_text: None,
            replacement: None,
        }
    }

    pub fn parse_toml(text: &str) -> Result<ChangeSpec, LscError> {
        let spec: ChangeSpec = toml::from_str(text).map_err(|e| LscError::Spec(e.to_string()))?;
        spec.compile()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<ChangeSpec, LscError> {
        let text = std::fs::read_to_string(path).map_err(|e| LscError::Spec(format!("{}: {e}", path.display())))?;
        Self::parse_toml(&text)
    }

    /// Parses predicate and template and checks they fit together.
    pub fn compile(&self) -> Result<(Predicate, Template), LscError> {
        let predicate = Predicate::parse(&self.predicate)?;
        let template = match self.template.as_str() {
            "enable_arm_release" => Template::EnableArmRelease,
            "enable_arm_ci" => Template::EnableArmCi,
            "replace" => {
                let (Some(m), Some(r)) = (&self.match_text, &self.replacement) else {
                    return Err(LscError::Spec(
                        "replace template needs match_text and replacement".into(),
                    ));
                };
                if m.is_empty() {
                    return Err(LscError::Spec("replace template needs a nonempty match_text".into()));
                }
                if r.contains(m.as_str()) {
                    return Err(LscError::Spec(
                        "replacement contains match_text, so the edit is not idempotent".into(),
                    ));
                }
                Template::Replace {
                    match_text: m.clone(),
                    replacement: r.clone(),
                }
            }
            other => return Err(LscError::Spec(format!("unknown template '{other}'"))),
        };
        let fits = matches!(
            (&predicate, &template),
            (
                Predicate::Blueprint(_),
                Template::EnableArmRelease | Template::EnableArmCi
            ) | (Predicate::Files(_), Template::Replace { .. })
        );
        if !fits {
            return Err(LscError::Spec(format!(
                "template '{}' cannot apply to predicate '{}'",
                self.template, self.predicate
            )));
        }
        Ok((predicate, template))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_toml_spec() {
        let spec = ChangeSpec::parse_toml(
            "id = \"arm\"\npredicate = \"blueprint(pkg_00*, pkg_01*)\"\ntemplate = \"enable_arm_release\"\nphase = \"ScaleUp\"\n",
        )
        .unwrap();
        assert_eq!(spec.phase, RolloutPhase::ScaleUp);
        assert!(!spec.global_approval);
        let (p, t) = spec.compile().unwrap();
        assert_eq!(t, Template::EnableArmRelease);
        assert!(p.matches_package("pkg_0012"));
        assert!(!p.matches_package("pkg_0200"));
    }

    #[test]
    fn rejects_mismatched_template_and_predicate() {
        let spec = ChangeSpec::new("x", "files(**/BUILD)", "enable_arm_release", RolloutPhase::Early);
        assert!(matches!(spec.compile(), Err(LscError::Spec(_))));
        let mut spec = ChangeSpec::new("x", "blueprint(*)", "replace", RolloutPhase::Early);
        spec.match_text = Some("a".into());
        spec.replacement = Some("b".into());
        assert!(spec.compile().is_err());
    }

    #[test]
    fn rejects_non_idempotent_replace() {
        let mut spec = ChangeSpec::new("x", "files(*/BUILD)", "replace", RolloutPhase::Early);
        spec.match_text = Some("-O2".into());
        spec.replacement = Some("-O2 -g".into());
        assert!(spec.compile().is_err());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_predicates() {
        assert!(ChangeSpec::parse_toml(
            "id = \"a\"\npredicate = \"blueprint(*)\"\ntemplate = \"enable_arm_ci\"\nphase = \"Final\"\ncolour = 1\n"
        )
        .is_err());
        assert!(Predicate::parse("blueprint(*").is_err());
        assert!(Predicate::parse("owners(*)").is_err());
    }
}
