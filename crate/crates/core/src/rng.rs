//! Labeled deterministic random streams.
//!
//! Every consumer derives its own ChaCha8 stream from the run seed and a
//! purpose label (`"fleet/owners"`, `"lsc/approval/<spec>/<owner>/<n>"`, ...).
//! The stream seed is `SHA-256(seed_le || label)`, so adding a consumer never
//! shifts the draws of an existing one, and outputs are identical across
//! platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

pub fn stream(seed: u64, label: &str) -> StreamRng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest: [u8; 32] = hasher.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

/// A single uniform draw in `[0, 1)` from the stream named `label`.
pub fn unit(seed: u64, label: &str) -> f64 {
    stream(seed, label).gen::<f64>()
}

/// Splits `total` items across weighted buckets with the largest-remainder
/// rule. Ties on the remainder go to the earlier bucket.
pub fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() || sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}
