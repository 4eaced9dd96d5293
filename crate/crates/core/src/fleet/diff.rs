/// A single-hunk line diff: common prefix and suffix are trimmed and the
/// middle is reported as removed then added lines.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct LineDiff {
    pub lines_added: u32,
    pub lines_removed: u32,
    pub hunk_text: String,
}

impl LineDiff {
    pub fn is_empty(&self) -> bool {
        self.lines_added == 0 && self.lines_removed == 0
    }
}

pub fn line_diff(old: &[String], new: &[String]) -> LineDiff {
    let prefix = old.iter().zip(new).take_while(|(a, b)| a == b).count();
    let max_suffix = old.len().min(new.len()) - prefix;
    let suffix = old
        .iter()
        .rev()
        .zip(new.iter().rev())
        .take(max_suffix)
        .take_while(|(a, b)| a == b)
        .count();
    let removed = &old[prefix..old.len() - suffix];
    let added = &new[prefix..new.len() - suffix];
    let mut hunk = Vec::with_capacity(removed.len() + added.len() + 1);
    if !removed.is_empty() || !added.is_empty() {
        hunk.push(format!(
            "@@ -{},{} +{},{} @@",
            prefix + 1,
            removed.len(),
            prefix + 1,
            added.len()
        ));
    }
    hunk.extend(removed.iter().map(|l| format!("-{l}")));
    hunk.extend(added.iter().map(|l| format!("+{l}")));
    LineDiff {
        lines_added: added.len() as u32,
        lines_removed: removed.len() as u32,
        hunk_text: hunk.join("\n"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(lines: &[&str]) -> Vec<String> {
        lines.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn single_line_replacement() {
        let d = line_diff(&v(&["a", "b", "c"]), &v(&["a", "B", "c"]));
        assert_eq!((d.lines_added, d.lines_removed), (1, 1));
        assert_eq!(d.hunk_text, "@@ -2,1 +2,1 @@\n-b\n+B");
    }

    #[test]
    fn identical_is_empty() {
        let d = line_diff(&v(&["a", "a"]), &v(&["a", "a"]));
        assert!(d.is_empty());
        assert_eq!(d.hunk_text, "");
    }

    #[test]
    fn repeated_lines_do_not_double_count() {
        let d = line_diff(&v(&["x", "x"]), &v(&["x", "x", "x"]));
        assert_eq!((d.lines_added, d.lines_removed), (1, 0));
    }
}
