/// Merges a list of free-text category labels down to at most `target`.
pub trait Consolidator {
    fn consolidate(&mut self, labels: &[String], target: usize) -> Vec<String>;
}

/// Keeps the `target` most frequent labels (ties by name). A stand-in for a
/// model-backed consolidator.
#[derive(Debug, Clone, Copy, Default)]
pub struct FrequencyConsolidator;

impl Consolidator for FrequencyConsolidator {
    fn consolidate(&mut self, labels: &[String], target: usize) -> Vec<String> {
        let mut counts: std::collections::BTreeMap<&str, usize> = std::collections::BTreeMap::new();
        for l in labels {
            *counts.entry(l.as_str()).or_default() += 1;
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        ranked.into_iter().take(target).map(|(l, _)| l.to_string()).collect()
    }
}

/// Label consolidation pipeline: per-batch proposals are pooled, then
/// narrowed stage by stage (for instance 50, then 16).
pub fn consolidate_labels(proposals: &[Vec<String>], stages: &[usize], c: &mut dyn Consolidator) -> Vec<String> {
    let mut labels: Vec<String> = proposals.iter().flatten().cloned().collect();
    for &target in stages {
        labels = c.consolidate(&labels, target);
    }
    labels
}
