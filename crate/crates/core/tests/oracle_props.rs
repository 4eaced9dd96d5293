use std::collections::{BTreeMap, BTreeSet};

use archport::fleet::{generate_fleet, Fleet, FleetParams, Isa, TargetKind};
use archport::oracle::{
    build, fix_defect_in_place, fleet_defects, package_defects, parse_diagnostic, run_test, DefectClass, DefectMix,
    SurfacePhase,
};
use proptest::prelude::*;

fn fleet_params() -> impl Strategy<Value = FleetParams> {
    (
        any::<u64>(),
        1usize..12,
        1usize..4,
        0.0f64..2.0,
        prop::collection::vec(0.0f64..1.0, DefectClass::ALL.len()),
    )
        .prop_map(|(seed, n, owners, rate, w)| {
            let total: f64 = w.iter().map(|x| x + 0.01).sum();
            FleetParams {
                seed,
                n_packages: n,
                n_owners: owners,
                n_cells: 2,
                defect_mix: DefectMix(
                    DefectClass::ALL
                        .iter()
                        .zip(w)
                        .map(|(&c, w)| (c, (w + 0.01) / total))
                        .collect(),
                ),
                defect_rate: rate,
                ..FleetParams::default()
            }
        })
}

fn fleet() -> impl Strategy<Value = Fleet> {
    fleet_params().prop_filter_map("injection needs room for every defect", |p| generate_fleet(&p).ok())
}

fn targets(f: &Fleet) -> Vec<(String, TargetKind)> {
    f.packages
        .iter()
        .flat_map(|p| p.targets().map(|t| (t.id.clone(), t.kind)))
        .collect()
}

fn deps_closure(f: &Fleet, pkg: &str) -> BTreeSet<String> {
    let index: BTreeMap<&str, &Vec<String>> = f.packages.iter().map(|p| (p.id.as_str(), &p.deps)).collect();
    let mut seen = BTreeSet::new();
    let mut todo: Vec<String> = index[pkg].clone();
    while let Some(d) = todo.pop() {
        if seen.insert(d.clone()) {
            todo.extend(index[d.as_str()].iter().cloned());
        }
    }
    seen
}

/// Files an Arm build of `target` reads, recomputed from the fleet model.
fn closure_text(f: &Fleet, target: &str) -> Vec<String> {
    let (pkg, t) = f.target(target).unwrap();
    let mut srcs: Vec<String> = t.srcs.clone();
    if t.kind != TargetKind::Library {
        if let Some(lib) = pkg.library() {
            srcs.extend(lib.srcs.iter().cloned());
        }
    }
    let mut text = Vec::new();
    for s in &srcs {
        if let Some(file) = pkg.file(s) {
            text.extend(file.lines.iter().cloned());
        }
    }
    for d in deps_closure(f, &pkg.id) {
        let dep = f.package(&d).unwrap();
        if let Some(lib) = dep.library() {
            for s in &lib.srcs {
                if let Some(file) = dep.file(s) {
                    text.extend(file.lines.iter().cloned());
                }
            }
        }
    }
    text
}

fn build_patterns() -> Vec<&'static str> {
    DefectClass::ALL
        .iter()
        .filter(|c| c.phase() == SurfacePhase::BuildTime)
        .map(|c| c.pattern())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn x86_cleanliness(f in fleet()) {
        for (t, kind) in targets(&f) {
            prop_assert!(build(&f, &t, Isa::X86).unwrap().passed(), "{t} fails on x86");
            if kind == TargetKind::Test {
                prop_assert!(run_test(&f, &t, Isa::X86, false).unwrap().passed(), "{t} test fails on x86");
            }
        }
    }

    #[test]
    fn sanitizer_monotonicity(f in fleet()) {
        for (t, kind) in targets(&f) {
            if kind != TargetKind::Test {
                continue;
            }
            for isa in Isa::ALL {
                let off: BTreeSet<String> = run_test(&f, &t, isa, false).unwrap().surfaced_defects.into_iter().collect();
                let on: BTreeSet<String> = run_test(&f, &t, isa, true).unwrap().surfaced_defects.into_iter().collect();
                prop_assert!(on.is_superset(&off), "{t} on {isa}: {off:?} not within {on:?}");
            }
        }
    }

    #[test]
    fn phase_exclusivity(f in fleet()) {
        for (t, kind) in targets(&f) {
            let mut logs = Vec::new();
            for isa in Isa::ALL {
                logs.push((true, build(&f, &t, isa).unwrap().log));
                if kind == TargetKind::Test {
                    for sanitizers in [false, true] {
                        logs.push((sanitizers, run_test(&f, &t, isa, sanitizers).unwrap().log));
                    }
                }
            }
            for (sanitizers, log) in logs {
                for line in log {
                    let d = parse_diagnostic(&line).expect("every log line is a diagnostic");
                    let phase = d.class.effective_phase(sanitizers);
                    prop_assert!(
                        !matches!(phase, SurfacePhase::RuntimeOnly | SurfacePhase::DeployTime | SurfacePhase::ReleaseTime),
                        "{} surfaced in {t}: {line}", d.class
                    );
                }
            }
        }
    }

    #[test]
    fn fix_completeness(f in fleet(), pick in any::<prop::sample::Index>()) {
        let pkg = f.packages[pick.index(f.packages.len())].id.clone();
        let mut fixed = f.clone();
        let mut scope = deps_closure(&f, &pkg);
        scope.insert(pkg.clone());
        for p in &scope {
            for d in package_defects(&f, p) {
                fix_defect_in_place(&mut fixed, &d.id).unwrap();
            }
        }
        for p in &scope {
            prop_assert!(package_defects(&fixed, p).is_empty());
        }
        let package = fixed.package(&pkg).unwrap();
        for t in package.targets() {
            prop_assert!(build(&fixed, &t.id, Isa::Arm).unwrap().passed(), "{} still fails to build", t.id);
            if t.kind == TargetKind::Test {
                prop_assert!(run_test(&fixed, &t.id, Isa::Arm, true).unwrap().passed(), "{} still fails", t.id);
            }
        }
    }

    #[test]
    fn arm_build_fails_iff_closure_text_has_a_build_pattern(f in fleet()) {
        let patterns = build_patterns();
        for (t, _) in targets(&f) {
            let expected_fail = closure_text(&f, &t).iter().any(|l| patterns.iter().any(|p| l.contains(p)));
            prop_assert_eq!(!build(&f, &t, Isa::Arm).unwrap().passed(), expected_fail, "{}", t);
        }
    }

    #[test]
    fn hand_edit_equals_canonical_fix(f in fleet(), pick in any::<prop::sample::Index>()) {
        let defects = fleet_defects(&f);
        prop_assume!(!defects.is_empty());
        let d = &defects[pick.index(defects.len())];
        let mut by_fix = f.clone();
        fix_defect_in_place(&mut by_fix, &d.id).unwrap();
        let mut by_hand = f.clone();
        let line = &mut by_hand.file_mut(&d.file_path).unwrap().lines[d.line_no - 1];
        *line = line.replace(d.class.pattern(), d.class.canonical_fix());
        prop_assert_eq!(&by_fix.packages, &by_hand.packages);
        for (t, kind) in targets(&f) {
            prop_assert_eq!(build(&by_fix, &t, Isa::Arm).unwrap(), build(&by_hand, &t, Isa::Arm).unwrap());
            if kind == TargetKind::Test {
                prop_assert_eq!(
                    run_test(&by_fix, &t, Isa::Arm, true).unwrap(),
                    run_test(&by_hand, &t, Isa::Arm, true).unwrap()
                );
            }
        }
    }
}
