use rand::seq::SliceRandom;
use rand::Rng;

use super::defect::{DefectClass, DefectMix, FileRole};
use super::OracleError;
use crate::fleet::Fleet;
use crate::rng::{apportion, stream};

/// Embeds `round(rate * packages)` latent defects into the fleet's sources.
///
/// Class counts follow `mix` exactly (largest-remainder apportionment), so the
/// realised histogram deviates from the mix by at most one defect per class.
/// Each placement picks a package at random, then a file of the class's role
/// that does not already hold the pattern; if the package has none it moves
/// on to the next package.
pub fn inject_defects(fleet: &Fleet, mix: &DefectMix, rate_per_package: f64, seed: u64) -> Result<Fleet, OracleError> {
    mix.validate().map_err(OracleError::Config)?;
    if !rate_per_package.is_finite() || rate_per_package < 0.0 {
        return Err(OracleError::Config(format!(
            "defect rate must be >= 0 (got {rate_per_package})"
        )));
    }
    let mut next = fleet.clone();
    let n = next.packages.len();
    let total = (rate_per_package * n as f64).round() as usize;
    if total == 0 || n == 0 {
        return Ok(next);
    }
    let weights: Vec<f64> = DefectClass::ALL.iter().map(|&c| mix.weight(c)).collect();
    let mut labels: Vec<DefectClass> = DefectClass::ALL
        .iter()
        .zip(apportion(total, &weights))
        .flat_map(|(&c, k)| std::iter::repeat_n(c, k))
        .collect();
    labels.shuffle(&mut stream(seed, "inject/labels"));

    let mut rng = stream(seed, "inject/placement");
    for class in labels {
        let start = rng.gen_range(0..n);
        let mut placed = false;
        for k in 0..n {
            let pkg = &mut next.packages[(start + k) % n];
            let mut candidates: Vec<usize> = pkg
                .files
                .iter()
                .enumerate()
                .filter(|(_, f)| FileRole::of_path(&f.path) == Some(class.file_role()) && !f.contains(class.pattern()))
                .map(|(i, _)| i)
                .collect();
            if candidates.is_empty() {
                continue;
            }
            candidates.sort_by(|&a, &b| pkg.files[a].path.cmp(&pkg.files[b].path));
            let file = &mut pkg.files[candidates[rng.gen_range(0..candidates.len())]];
            let pos = if file.lines.len() >= 2 {
                rng.gen_range(1..file.lines.len())
            } else {
                file.lines.len()
            };
            file.lines.insert(pos, class.injected_line().to_string());
            placed = true;
            break;
        }
        if !placed {
            return Err(OracleError::Internal(format!(
                "no file can host another {class} defect"
            )));
        }
    }
    Ok(next)
}
