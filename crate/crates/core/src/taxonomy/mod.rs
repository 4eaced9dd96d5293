//! Commit taxonomy and corpus statistics.
//!
//! Seventeen categories in four groups plus `Uncategorized`
//! ([`Category`]). A heuristic rule table ([`HEURISTIC_RULES`]) classifies
//! commit records; an external process can stand in for it. [`aggregate`]
//! computes per-category commit and LoC shares with the median and 90%
//! interval of LoC per commit, [`time_series`] the category mix per period,
//! and [`grade_automatability`] per-category grade histograms.

mod category;
mod classify;
mod commit;
mod consolidate;
mod grade;
mod stats;

pub use category::{Category, Group};
pub use classify::{
    batch_classify, classify_heuristic, Classified, Classifier, ExternalClassifier, HeuristicClassifier,
    HEURISTIC_RULES,
};
pub use commit::{read_corpus, write_corpus, CommitRecord, FileDiff};
pub use consolidate::{consolidate_labels, Consolidator, FrequencyConsolidator};
pub use grade::{grade_automatability, ExternalGrader, GradeRow, Grader, PlaceholderGrader};
pub use stats::{aggregate, category_of, quantile, time_series, BucketRow, CategoryRow, CategoryStats, TimeSeries};

/// One hand-built commit per category, each labeled with its expected
/// category.
pub const GOLDEN_CORPUS: &str = include_str!("../../data/golden_corpus.jsonl");

pub const DEFAULT_MEGA_THRESHOLD: u64 = 10_000;
pub const DEFAULT_BUCKET_DAYS: u32 = 30;
pub const DEFAULT_BATCH_SIZE: usize = 100;
pub const DEFAULT_GRADE_CAP: usize = 50;

#[derive(Debug, thiserror::Error)]
pub enum TaxonomyError {
    #[error("config error: {0}")]
    Config(String),
    #[error("corpus error: {0}")]
    Corpus(String),
}

pub fn golden_corpus() -> Vec<CommitRecord> {
    read_corpus(GOLDEN_CORPUS.as_bytes()).expect("golden corpus parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn commit(id: &str, day: u32, loc: u32, cat: Category, automated: bool) -> CommitRecord {
        let mut c = CommitRecord::new(
            id,
            day,
            "m",
            vec![FileDiff {
                path: "p/x.cc".into(),
                lines_added: loc,
                lines_removed: 0,
                hunk_text: String::new(),
            }],
            automated,
        );
        c.category = Some(cat);
        c
    }

    #[test]
    fn numbering_and_groups_are_fixed() {
        assert_eq!(Category::ALL.len(), 17);
        for (i, c) in Category::ALL.iter().enumerate() {
            assert_eq!(c.number() as usize, i);
            assert_eq!(Category::parse(c.as_str()), Some(*c));
        }
        assert_eq!(Category::BuildAndConfigFiles.number(), 8);
        assert_eq!(Category::TestExecutionEnvironment.group(), Group::TestChanges);
        assert_eq!(Category::Documentation.group(), Group::SupportingProcesses);
        assert_eq!(Category::Uncategorized.group(), Group::None);
    }

    #[test]
    fn golden_corpus_scores_all_seventeen() {
        let golden = golden_corpus();
        assert_eq!(golden.len(), 17);
        for c in &golden {
            assert_eq!(Some(classify_heuristic(c)), c.category, "{}: {}", c.id, c.message);
        }
    }

    #[test]
    fn empty_diff_is_uncategorized() {
        let c = CommitRecord::new("e", 0, "nothing", vec![], false);
        assert_eq!(classify_heuristic(&c), Category::Uncategorized);
    }

    #[test]
    fn quantile_rule_on_one_to_hundred() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!((quantile(&v, 0.05).unwrap() - 5.95).abs() < 1e-12);
        assert!((quantile(&v, 0.95).unwrap() - 95.05).abs() < 1e-12);
        assert_eq!(quantile(&[1.0, 5.0, 100.0], 0.5), Some(5.0));
        assert_eq!(quantile(&[], 0.5), None);
    }

    #[test]
    fn aggregate_counts_every_commit_once() {
        let commits = vec![
            commit("a", 0, 1, Category::TestFixes, true),
            commit("b", 1, 5, Category::TestFixes, false),
            commit("c", 40, 100, Category::TestFixes, true),
            commit("d", 45, 20_000, Category::MigrationTooling, false),
        ];
        let s = aggregate(&commits, DEFAULT_MEGA_THRESHOLD);
        assert_eq!(s.rows.len(), 17);
        let t = &s.rows[Category::TestFixes.number() as usize];
        assert_eq!(t.loc_median, Some(5.0));
        assert_eq!(t.automated_commits, 2);
        assert_eq!(s.mega_commits, 1);
        assert_eq!(s.rows.iter().map(|r| r.commits).sum::<u64>(), 4);
        let ts = time_series(&commits, 30, 60);
        assert_eq!(ts.buckets(), 2);
        assert!((ts.share(1, &[Category::MigrationTooling]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn grading_samples_at_most_cap() {
        let commits: Vec<_> = (0..70)
            .map(|i| commit(&format!("c{i:03}"), 0, 3, Category::TestFixes, false))
            .collect();
        let rows = grade_automatability(&commits, &mut PlaceholderGrader, 50, 9);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].sampled.len(), 50);
        assert_eq!(rows[0].histogram.iter().sum::<u64>(), 50);
        assert_eq!(rows, grade_automatability(&commits, &mut PlaceholderGrader, 50, 9));

        struct Three;
        impl Grader for Three {
            fn grade(&mut self, _: Category, c: &[CommitRecord]) -> Result<Vec<u8>, String> {
                Ok(vec![3; c.len()])
            }
        }
        let rows = grade_automatability(&commits[..10], &mut Three, 50, 9);
        assert_eq!(rows[0].histogram, [0, 0, 10, 0, 0]);
    }

    #[test]
    fn external_classifier_batches_and_tolerates_bad_labels() {
        let script = r#"
import sys, json
for line in sys.stdin:
    req = json.loads(line)
    labels = ['Bogus' if c['id'].endswith('7') else 'TestFixes' for c in req['commits']]
    print(json.dumps({'labels': labels}), flush=True)
"#;
        let argv = vec!["python3".to_string(), "-c".to_string(), script.to_string()];
        let mut ext = ExternalClassifier::spawn(&argv).unwrap();
        let commits: Vec<_> = (0..250)
            .map(|i| commit(&format!("c{i:03}"), 0, 1, Category::TestFixes, false))
            .collect();
        let out = batch_classify(&commits, 100, &mut ext).unwrap();
        assert_eq!(ext.round_trips(), 3);
        assert_eq!(out.len(), 250);
        assert_eq!(out.iter().filter(|c| c.warning.is_some()).count(), 25);
        assert!(out
            .iter()
            .filter(|c| c.warning.is_some())
            .all(|c| c.category == Category::Uncategorized));
    }

    #[test]
    fn consolidation_narrows_stage_by_stage() {
        let proposals = vec![
            vec!["a".to_string(), "b".into(), "c".into()],
            vec!["a".to_string(), "b".into()],
            vec!["a".to_string()],
        ];
        assert_eq!(
            consolidate_labels(&proposals, &[2, 1], &mut FrequencyConsolidator),
            vec!["a".to_string()]
        );
    }
}
