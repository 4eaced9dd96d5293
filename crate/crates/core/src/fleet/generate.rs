use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use super::{
    Blueprint, Cell, Fleet, FleetError, Isa, Job, Owner, Package, RolloutPhase, SourceFile, Target, TargetKind,
};
use crate::oracle::{inject_defects, DefectMix};
use crate::rng::stream;

/// Per-phase probability that an owner refuses an LSC shard.
pub const DEFAULT_REFUSAL_PRESET: [(RolloutPhase, f64); 3] = [
    (RolloutPhase::Early, 0.05),
    (RolloutPhase::ScaleUp, 0.006),
    (RolloutPhase::Final, 0.0),
];

const MAX_JOBS_PER_PACKAGE: u32 = 6;

const WORDS: [&str; 24] = [
    "cache", "codec", "index", "ledger", "parser", "router", "shard", "stream", "tensor", "vector", "queue", "planner",
    "matrix", "packet", "storage", "metrics", "session", "quota", "bloom", "journal", "lexer", "mailbox", "ranker",
    "sketch",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FleetParams {
    pub seed: u64,
    pub n_packages: usize,
    pub n_owners: usize,
    pub n_cells: usize,
    pub defect_mix: DefectMix,
    /// Expected number of injected defects per package.
    pub defect_rate: f64,
    /// Mean number of direct dependencies of a package above the bottom layer.
    pub dep_density: f64,
    pub n_layers: usize,
    pub jobs_per_package_mean: f64,
    /// Pareto-like exponent for tasks per cell; larger means a heavier head.
    pub compute_skew: f64,
    /// Probability that a cell other than the first has Arm machines.
    pub arm_cell_fraction: f64,
    pub refusal_policy: BTreeMap<RolloutPhase, f64>,
}

impl Default for FleetParams {
    fn default() -> Self {
        FleetParams {
            seed: 7,
            n_packages: 500,
            n_owners: 40,
            n_cells: 8,
            defect_mix: DefectMix::default(),
            defect_rate: 1.0,
            dep_density: 2.0,
            n_layers: 6,
            jobs_per_package_mean: 2.0,
            compute_skew: 0.8,
            arm_cell_fraction: 0.75,
            refusal_policy: DEFAULT_REFUSAL_PRESET.into_iter().collect(),
        }
    }
}

impl FleetParams {
    pub fn validate(&self) -> Result<(), FleetError> {
        let config = |m: String| Err(FleetError::Config(m));
        if self.n_packages == 0 {
            return config("n_packages must be at least 1".into());
        }
        if self.n_owners == 0 {
            return config("n_owners must be at least 1".into());
        }
        if self.n_cells == 0 {
            return config("n_cells must be at least 1".into());
        }
        self.defect_mix.validate().map_err(FleetError::Config)?;
        if !self.defect_rate.is_finite() || self.defect_rate < 0.0 {
            return config(format!("defect_rate must be >= 0 (got {})", self.defect_rate));
        }
        if !self.dep_density.is_finite() || self.dep_density < 0.0 {
            return config(format!("dep_density must be >= 0 (got {})", self.dep_density));
        }
        if self.n_layers == 0 {
            return config("n_layers must be at least 1".into());
        }
        if !self.jobs_per_package_mean.is_finite() || self.jobs_per_package_mean < 1.0 {
            return config(format!(
                "jobs_per_package_mean must be >= 1 (got {})",
                self.jobs_per_package_mean
            ));
        }
        if !self.compute_skew.is_finite() || self.compute_skew < 0.0 {
            return config(format!("compute_skew must be >= 0 (got {})", self.compute_skew));
        }
        if !(0.0..=1.0).contains(&self.arm_cell_fraction) {
            return config(format!(
                "arm_cell_fraction must be in [0,1] (got {})",
                self.arm_cell_fraction
            ));
        }
        for (phase, p) in &self.refusal_policy {
            if !(0.0..=1.0).contains(p) {
                return config(format!("refusal probability for {phase} must be in [0,1] (got {p})"));
            }
        }
        Ok(())
    }
}

/// `prefix_NN..`, zero-padded so ids sort in index order for any `count`.
fn padded_id(prefix: &str, i: usize, count: usize, min_width: usize) -> String {
    let width = count.saturating_sub(1).to_string().len().max(min_width);
    format!("{prefix}_{i:0width$}")
}

/// Generates a fleet deterministically from `params`, then injects defects.
pub fn generate_fleet(params: &FleetParams) -> Result<Fleet, FleetError> {
    params.validate()?;
    let seed = params.seed;

    let owners: Vec<Owner> = (0..params.n_owners)
        .map(|i| Owner {
            id: padded_id("owner", i, params.n_owners, 2),
            refusal_policy: params.refusal_policy.clone(),
        })
        .collect();

    let mut rng = stream(seed, "fleet/cells");
    let cells: Vec<Cell> = (0..params.n_cells)
        .map(|i| {
            let x86 = rng.gen_range(2000..=5000);
            let arm = if i == 0 || rng.gen_bool(params.arm_cell_fraction) {
                rng.gen_range(500..=2000)
            } else {
                0
            };
            Cell {
                id: padded_id("cell", i, params.n_cells, 2),
                capacity: BTreeMap::from([(Isa::X86, x86), (Isa::Arm, arm)]),
            }
        })
        .collect();

    let n = params.n_packages;
    let ids: Vec<String> = (0..n).map(|i| padded_id("pkg", i, n, 4)).collect();
    let mut rng = stream(seed, "fleet/packages");
    let mut packages = Vec::with_capacity(n);
    for i in 0..n {
        let layer = i * params.n_layers / n;
        let layer_start = (0..=i).find(|&j| j * params.n_layers / n == layer).unwrap_or(0);
        let deps = if layer_start == 0 {
            Vec::new()
        } else {
            let max = (2.0 * params.dep_density).round() as usize;
            let k = rng.gen_range(0..=max).min(layer_start);
            let mut picked: Vec<String> = sample(&mut rng, layer_start, k)
                .into_iter()
                .map(|j| ids[j].clone())
                .collect();
            picked.sort();
            picked
        };
        let owner = &owners[rng.gen_range(0..owners.len())].id;
        packages.push(synth_package(&ids[i], owner, deps, &mut rng));
    }

    let mut rng = stream(seed, "fleet/jobs");
    let mut jobs = Vec::new();
    let p_stop = 1.0 / params.jobs_per_package_mean;
    for pkg in &mut packages {
        let mut count = 1;
        while count < MAX_JOBS_PER_PACKAGE && !rng.gen_bool(p_stop) {
            count += 1;
        }
        let mut borg = Vec::new();
        for j in 0..count {
            let n_cells = rng.gen_range(1..=cells.len().min(3));
            let mut job_cells: Vec<String> = sample(&mut rng, cells.len(), n_cells)
                .into_iter()
                .map(|c| cells[c].id.clone())
                .collect();
            job_cells.sort();
            let u: f64 = rng.gen_range(f64::EPSILON..=1.0);
            let tasks_per_cell = ((4.0 * u.powf(-params.compute_skew)).ceil() as u32).clamp(1, 400);
            let tier = if rng.gen_bool(0.7) { "prod" } else { "batch" };
            let id = format!("{}.job{j}", pkg.id);
            borg.push(format!("job {id} {{"));
            borg.push(format!("  cells = [{}]", job_cells.join(", ")));
            borg.push(format!("  replicas = {tasks_per_cell}"));
            borg.push(format!("  priority = {}", if tier == "prod" { 200 } else { 100 }));
            borg.push("}".into());
            jobs.push(Job {
                id,
                package_id: pkg.id.clone(),
                cells: job_cells,
                tasks_per_cell,
                borg_constraints: BTreeSet::from([tier.to_string()]),
            });
        }
        let path = format!("{}/jobs.borg", pkg.id);
        let mut lines = vec![format!("# Borg config for {}", pkg.id)];
        lines.extend(borg);
        pkg.files.push(SourceFile::new(path, lines));
        pkg.files.sort_by(|a, b| a.path.cmp(&b.path));
    }
    jobs.sort_by(|a, b| a.id.cmp(&b.id));

    let fleet = Fleet {
        seed,
        clock_day: 0,
        owners,
        cells,
        packages,
        jobs,
    };
    let fleet = inject_defects(&fleet, &params.defect_mix, params.defect_rate, seed)
        .map_err(|e| FleetError::Config(e.to_string()))?;
    fleet.validate()?;
    Ok(fleet)
}

fn synth_package(id: &str, owner: &str, deps: Vec<String>, rng: &mut impl Rng) -> Package {
    let word = |rng: &mut dyn rand::RngCore| WORDS[rng.gen_range(0..WORDS.len())];
    let base = word(rng);
    let n_src = rng.gen_range(1..=3);
    let mut files = Vec::new();
    let mut lib_srcs = Vec::new();
    for k in 0..n_src {
        let path = format!("{id}/src/{base}_{k}.cc");
        files.push(SourceFile::new(&path, library_source(id, base, k, rng)));
        lib_srcs.push(path);
    }
    let has_binary = rng.gen_bool(0.5);
    if has_binary {
        files.push(SourceFile::new(format!("{id}/src/main.cc"), main_source(id, base)));
    }
    let n_tests = if rng.gen_bool(0.1) { 0 } else { rng.gen_range(1..=2) };
    let mut test_names = Vec::new();
    for t in 0..n_tests {
        let name = if t == 0 {
            base.to_string()
        } else {
            format!("{}_{}", base, word(rng))
        };
        files.push(SourceFile::new(format!("{id}/src/{name}_test.cc"), test_source(&name)));
        test_names.push(name);
    }

    let build_path = format!("{id}/BUILD");
    files.push(SourceFile::new(
        &build_path,
        build_file(id, &lib_srcs, has_binary, &test_names, &deps),
    ));
    files.sort_by(|a, b| a.path.cmp(&b.path));

    let with_build = |mut srcs: Vec<String>| {
        srcs.push(build_path.clone());
        srcs
    };
    let mut build_targets = vec![Target {
        id: format!("//{id}:lib"),
        kind: TargetKind::Library,
        srcs: with_build(lib_srcs.clone()),
    }];
    if has_binary {
        build_targets.push(Target {
            id: format!("//{id}:server"),
            kind: TargetKind::Binary,
            srcs: with_build(vec![format!("{id}/src/main.cc")]),
        });
    }
    let test_targets = test_names
        .iter()
        .map(|name| Target {
            id: format!("//{id}:{name}_test"),
            kind: TargetKind::Test,
            srcs: with_build(vec![format!("{id}/src/{name}_test.cc")]),
        })
        .collect();

    Package {
        id: id.to_string(),
        owner_id: owner.to_string(),
        files,
        build_targets,
        test_targets,
        deps,
        blueprint: Blueprint {
            package_id: id.to_string(),
            variant_modes: BTreeSet::from([Isa::X86]),
            ci_enabled: BTreeMap::from([(Isa::X86, true), (Isa::Arm, false)]),
            release_size_units: rng.gen_range(20..=80),
        },
    }
}

fn library_source(pkg: &str, base: &str, k: usize, rng: &mut impl Rng) -> Vec<String> {
    let mut lines = vec![
        format!("// {base} helpers, part {k}"),
        format!("#include \"{pkg}/src/{base}.h\""),
        String::new(),
        format!("namespace {pkg} {{"),
        String::new(),
    ];
    match rng.gen_range(0..3) {
        0 => lines.extend([
            format!("int {base}_sum_{k}(const std::vector<int>& xs) {{"),
            "  int total = 0;".into(),
            "  for (int x : xs) total += x;".into(),
            "  return total;".into(),
            "}".into(),
        ]),
        1 => lines.extend([
            format!("double {base}_mean_{k}(const std::vector<double>& xs) {{"),
            "  if (xs.empty()) return 0.0;".into(),
            "  double acc = 0.0;".into(),
            "  for (double x : xs) acc += x;".into(),
            "  return acc / xs.size();".into(),
            "}".into(),
        ]),
        _ => lines.extend([
            format!("bool {base}_ready_{k}(const State& s) {{"),
            "  std::lock_guard<std::mutex> lock(s.mu);".into(),
            "  return s.pending == 0;".into(),
            "}".into(),
        ]),
    }
    lines.push(String::new());
    lines.push(format!("}}  // namespace {pkg}"));
    lines
}

fn main_source(pkg: &str, base: &str) -> Vec<String> {
    vec![
        format!("#include \"{pkg}/src/{base}.h\""),
        String::new(),
        "int main(int argc, char** argv) {".into(),
        "  InitServer(argc, argv);".into(),
        "  return RunServer();".into(),
        "}".into(),
    ]
}

fn test_source(name: &str) -> Vec<String> {
    vec![
        "#include \"gtest/gtest.h\"".into(),
        String::new(),
        format!("TEST({name}_test, Basic) {{"),
        "  EXPECT_TRUE(true);".into(),
        "  EXPECT_EQ(2, 1 + 1);".into(),
        "}".into(),
    ]
}

fn build_file(id: &str, lib_srcs: &[String], binary: bool, tests: &[String], deps: &[String]) -> Vec<String> {
    let quoted = |xs: &[String]| xs.iter().map(|x| format!("\"{x}\"")).collect::<Vec<_>>().join(", ");
    let local: Vec<String> = lib_srcs
        .iter()
        .map(|p| p.rsplit('/').next().unwrap_or(p).to_string())
        .collect();
    let dep_labels: Vec<String> = deps.iter().map(|d| format!("//{d}:lib")).collect();
    let mut lines = vec![
        format!("# BUILD for {id}"),
        "cc_library(".into(),
        "    name = \"lib\",".into(),
        format!("    srcs = [{}],", quoted(&local)),
        format!("    deps = [{}],", quoted(&dep_labels)),
        ")".into(),
    ];
    if binary {
        lines.extend([
            "cc_binary(".into(),
            "    name = \"server\",".into(),
            "    srcs = [\"main.cc\"],".into(),
            "    deps = [\":lib\"],".into(),
            ")".into(),
        ]);
    }
    for t in tests {
        lines.extend([
            "cc_test(".into(),
            format!("    name = \"{t}_test\","),
            format!("    srcs = [\"{t}_test.cc\"],"),
            "    deps = [\":lib\"],".into(),
            ")".into(),
        ]);
    }
    lines
}
