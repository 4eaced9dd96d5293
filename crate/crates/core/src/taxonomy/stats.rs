use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::category::{Category, Group};
use super::commit::CommitRecord;

/// Quantile of sorted data by linear interpolation between order
/// statistics: position `h = (n - 1) p`, value
/// `x[⌊h⌋] + (h - ⌊h⌋)(x[⌊h⌋ + 1] - x[⌊h⌋])`.
pub fn quantile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() || !(0.0..=1.0).contains(&p) {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub category: Category,
    pub number: u8,
    pub group: Group,
    pub commits: u64,
    pub loc: u64,
    pub commit_share: f64,
    pub loc_share: f64,
    pub loc_median: Option<f64>,
    /// 5th and 95th percentile of LoC per commit.
    pub loc_interval_90: Option<(f64, f64)>,
    pub automated_commits: u64,
    pub automated_loc: u64,
    /// Share of this category's commits that were automated.
    pub automation_commit_share: f64,
    pub automation_loc_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub total_commits: u64,
    pub total_loc: u64,
    /// One row per category, all 17, in number order.
    pub rows: Vec<CategoryRow>,
    pub automation_commit_share: f64,
    pub automation_loc_share: f64,
    pub mega_threshold: u64,
    pub mega_commits: u64,
    pub mega_loc: u64,
    pub mega_loc_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    pub bucket: u32,
    pub start_day: u32,
    pub category: Category,
    pub commits: u64,
    /// Share of the bucket's commits; 0 for empty buckets.
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub bucket_days: u32,
    pub rows: Vec<BucketRow>,
}

impl TimeSeries {
    pub fn share(&self, bucket: u32, cats: &[Category]) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.bucket == bucket && cats.contains(&r.category))
            .map(|r| r.share)
            .sum()
    }

    pub fn buckets(&self) -> u32 {
        self.rows.iter().map(|r| r.bucket + 1).max().unwrap_or(0)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bucket", "start_day", "category", "number", "commits", "share"])?;
        for r in &self.rows {
            w.write_record([
                r.bucket.to_string().as_str(),
                &r.start_day.to_string(),
                r.category.as_str(),
                &r.category.number().to_string(),
                &r.commits.to_string(),
                &format!("{:.6}", r.share),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Commits without a category count as `Uncategorized`.
pub fn category_of(c: &CommitRecord) -> Category {
    c.category.unwrap_or(Category::Uncategorized)
}

pub fn aggregate(commits: &[CommitRecord], mega_threshold: u64) -> CategoryStats {
    let mut locs: BTreeMap<Category, Vec<u64>> = Category::ALL.iter().map(|&c| (c, Vec::new())).collect();
    let mut auto: BTreeMap<Category, (u64, u64)> = BTreeMap::new();
    for c in commits {
        let cat = category_of(c);
        locs.get_mut(&cat).expect("all categories present").push(c.loc_delta);
        if c.automated {
            let a = auto.entry(cat).or_default();
            a.0 += 1;
            a.1 += c.loc_delta;
        }
    }
    let total_commits = commits.len() as u64;
    let total_loc: u64 = commits.iter().map(|c| c.loc_delta).sum();
    let rows = locs
        .into_iter()
        .map(|(category, mut v)| {
            v.sort_unstable();
            let sorted: Vec<f64> = v.iter().map(|&x| x as f64).collect();
            let n = v.len() as u64;
            let loc: u64 = v.iter().sum();
            let (ac, al) = auto.get(&category).copied().unwrap_or_default();
            CategoryRow {
                category,
                number: category.number(),
                group: category.group(),
                commits: n,
                loc,
                commit_share: ratio(n, total_commits),
                loc_share: ratio(loc, total_loc),
                loc_median: quantile(&sorted, 0.5),
                loc_interval_90: quantile(&sorted, 0.05).zip(quantile(&sorted, 0.95)),
                automated_commits: ac,
                automated_loc: al,
                automation_commit_share: ratio(ac, n),
                automation_loc_share: ratio(al, loc),
            }
        })
        .collect();
    let automated: Vec<&CommitRecord> = commits.iter().filter(|c| c.automated).collect();
    let mega: Vec<&CommitRecord> = commits.iter().filter(|c| c.loc_delta > mega_threshold).collect();
    let mega_loc = mega.iter().map(|c| c.loc_delta).sum();
    CategoryStats {
        total_commits,
        total_loc,
        rows,
        automation_commit_share: ratio(automated.len() as u64, total_commits),
        automation_loc_share: ratio(automated.iter().map(|c| c.loc_delta).sum(), total_loc),
        mega_threshold,
        mega_commits: mega.len() as u64,
        mega_loc,
        mega_loc_share: ratio(mega_loc, total_loc),
    }
}

/// Per-bucket category shares over `[0, horizon_days)`; every bucket has a
/// row for every category.
pub fn time_series(commits: &[CommitRecord], bucket_days: u32, horizon_days: u32) -> TimeSeries {
    let bucket_days = bucket_days.max(1);
    let last_day = commits.iter().map(|c| c.day + 1).max().unwrap_or(0).max(horizon_days);
    let n_buckets = last_day.div_ceil(bucket_days);
    let mut counts: BTreeMap<(u32, Category), u64> = BTreeMap::new();
    let mut totals = vec![0u64; n_buckets as usize];
    for c in commits {
        let b = c.day / bucket_days;
        *counts.entry((b, category_of(c))).or_default() += 1;
        totals[b as usize] += 1;
    }
    let mut rows = Vec::new();
    for b in 0..n_buckets {
        for &cat in &Category::ALL {
            let n = counts.get(&(b, cat)).copied().unwrap_or(0);
            rows.push(BucketRow {
                bucket: b,
                start_day: b * bucket_days,
                category: cat,
                commits: n,
                share: ratio(n, totals[b as usize]),
            });
        }
    }
    TimeSeries { bucket_days, rows }
}
