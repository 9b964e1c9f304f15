//! Property bodies shared by the proptest suite and the acceptance binary.

use std::collections::BTreeSet;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use bloatlens::debloat::{container_bloat_degree, debloat, KeepList};
use bloatlens::fs::{FileKind, FileSet, Origin};
use bloatlens::packages::{
    category_breakdown, package_bloat_degree, size_reduction, Catalog, Functionality, Manager, OwnerIndex,
    PackageRecord,
};
use bloatlens::path;
use bloatlens::report::{bloat_degree_histogram, cdf_points};
use bloatlens::trace::AccessSet;
use bloatlens::vuln::{surviving_cves, Severity, VulnMatch};
use bloatlens::Diagnostics;

type Outcome = Result<(), TestCaseError>;

fn random_set(seed: u64, max: usize) -> FileSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FileSet::from_entries(Origin::Derived, super::random_fs(&mut rng, max))
}

fn pick(fs: &FileSet, picks: &[usize]) -> Vec<String> {
    let paths: Vec<&str> = fs.paths().collect();
    picks.iter().map(|i| paths[i % paths.len()].to_string()).collect()
}

/// Packages built from disjoint-ish slices of the regular files.
fn packages(fs: &FileSet, k: usize) -> Vec<PackageRecord> {
    let files: Vec<&str> = fs.iter().filter(|e| !e.is_dir()).map(|e| e.path.as_str()).collect();
    (0..k)
        .map(|i| {
            let owned: BTreeSet<String> = files.iter().skip(i).step_by(k).map(|s| s.to_string()).collect();
            let size = owned
                .iter()
                .filter_map(|p| fs.get(p))
                .filter(|e| e.kind == FileKind::Regular)
                .map(|e| e.size)
                .sum();
            PackageRecord {
                manager: Manager::ALL[i % 3],
                name: format!("pkg{i}"),
                version: "1".into(),
                files: owned,
                missing_files: 0,
                declared_deps: vec![],
                provides: vec![],
                functionality: if i % 2 == 0 { Functionality::Ml } else { Functionality::Generic },
                size,
                location: None,
            }
        })
        .collect()
}

fn run(fs: &FileSet, access: &[String]) -> bloatlens::debloat::DebloatResult {
    debloat(fs, &AccessSet::from_paths(access), &KeepList::default(), &mut Diagnostics::new()).unwrap()
}

pub fn container_degree_in_unit_interval(a: u64, b: u64) -> Outcome {
    let (s_c, s_cp) = (a.max(b), a.min(b));
    let d = container_bloat_degree(s_c, s_cp).unwrap();
    prop_assert!((0.0..=1.0).contains(&d));
    prop_assert!(container_bloat_degree(s_cp, s_c).is_err() || s_c == s_cp);
    Ok(())
}

pub fn retained_and_bloat_partition(seed: u64, picks: Vec<usize>) -> Outcome {
    let fs = random_set(seed, 200);
    let access = pick(&fs, &picks);
    let r = run(&fs, &access);
    prop_assert_eq!(r.retained.len() + r.bloat.len(), fs.len());
    prop_assert_eq!(r.retained.total_size() + r.bloat.total_size(), fs.total_size());
    prop_assert!(r.retained.paths().all(|p| !r.bloat.contains(p)));
    prop_assert!(r.retained.is_parent_closed());
    prop_assert!((0.0..=1.0).contains(&r.d_c));
    for p in &access {
        prop_assert!(r.retained.contains(p));
    }
    Ok(())
}

pub fn larger_access_is_monotone(seed: u64, small: Vec<usize>, extra: Vec<usize>) -> Outcome {
    let fs = random_set(seed, 200);
    let a = pick(&fs, &small);
    let mut b = a.clone();
    b.extend(pick(&fs, &extra));
    let (ra, rb) = (run(&fs, &a), run(&fs, &b));
    prop_assert!(ra.retained.paths().all(|p| rb.retained.contains(p)));
    prop_assert!(rb.d_c <= ra.d_c);
    for p in packages(&fs, 5) {
        let (da, db) = (package_bloat_degree(&p, &ra.bloat), package_bloat_degree(&p, &rb.bloat));
        prop_assert!((0.0..=1.0).contains(&da));
        prop_assert!(db <= da, "{}: {} > {}", p.name, db, da);
    }
    Ok(())
}

pub fn size_reduction_in_unit_interval(pairs: Vec<(u64, f64)>) -> Outcome {
    let total: u64 = pairs.iter().map(|p| p.0).sum();
    match size_reduction(&pairs) {
        None => prop_assert_eq!(total, 0),
        Some(r) => prop_assert!((0.0..=1.0).contains(&r)),
    }
    Ok(())
}

pub fn breakdown_shares_sum_to_one(seed: u64, k: usize) -> Outcome {
    let fs = random_set(seed, 150);
    let cat = Catalog::new(packages(&fs, k));
    let b = category_breakdown(&fs, &OwnerIndex::build(&cat), &cat);
    let m = b.by_manager;
    let f = b.by_functionality;
    prop_assert!((m.apt + m.pip + m.conda + m.non_package - 1.0).abs() < 1e-9);
    prop_assert!((f.ml + f.generic + f.non_package - 1.0).abs() < 1e-9);
    Ok(())
}

pub fn smaller_bloat_never_removes_more(seed: u64, small: Vec<usize>, extra: Vec<usize>, locs: Vec<Vec<usize>>) -> Outcome {
    let fs = random_set(seed, 150);
    let cat = Catalog::new(packages(&fs, 4));
    let a = pick(&fs, &small);
    let mut b = a.clone();
    b.extend(pick(&fs, &extra));
    // More access means a smaller bloat set.
    let (big, smaller) = (run(&fs, &a).bloat, run(&fs, &b).bloat);
    let matches: Vec<VulnMatch> = locs
        .iter()
        .enumerate()
        .map(|(i, l)| VulnMatch {
            cve_id: format!("CVE-{i}"),
            severity: Severity::ALL[i % 5],
            pkg_name: format!("pkg{}", i % 5),
            pkg_version: "1".into(),
            locations: pick(&fs, l).into_iter().collect(),
        })
        .collect();
    let mut diag = Diagnostics::new();
    let d_big = surviving_cves(&matches, &big, &cat, &mut diag);
    let d_small = surviving_cves(&matches, &smaller, &cat, &mut diag);
    prop_assert_eq!(d_big.total(), matches.len());
    let removed_big: BTreeSet<&str> = d_big.removed.iter().map(|m| m.cve_id.as_str()).collect();
    prop_assert!(d_small.removed.iter().all(|m| removed_big.contains(m.cve_id.as_str())));
    let original: BTreeSet<&VulnMatch> = matches.iter().collect();
    prop_assert!(d_small.retained.iter().all(|m| original.contains(m)));
    Ok(())
}

pub fn histogram_and_cdf_shapes(values: Vec<f64>) -> Outcome {
    let h = bloat_degree_histogram(&values).unwrap();
    prop_assert_eq!(h.iter().sum::<usize>(), values.len());
    let c = cdf_points(&values);
    prop_assert!(c.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1));
    if let Some(last) = c.last() {
        prop_assert!((last.1 - 1.0).abs() < 1e-12);
    }
    Ok(())
}

pub fn normalization_is_idempotent(parts: Vec<String>, abs: bool) -> Outcome {
    let raw = format!("{}{}", if abs { "/" } else { "" }, parts.join("/"));
    let once = path::normalize("/w/x", &raw).path;
    prop_assert!(path::is_normalized(&once));
    prop_assert_eq!(path::normalize("/", &once).path, once.clone());
    Ok(())
}

/// Runs every property for `cases` cases with a fixed seed. Returns the
/// names that passed, or the first failure.
pub fn run_all(cases: u32) -> Result<Vec<&'static str>, String> {
    use prop::collection::vec;

    let config = Config {
        failure_persistence: None,
        ..Config::with_cases(cases)
    };
    let mut passed = Vec::new();
    macro_rules! check {
        ($name:ident, $strategy:expr, |$arg:ident|) => {
            TestRunner::new_with_rng(config.clone(), TestRng::deterministic_rng(RngAlgorithm::ChaCha))
                .run(&$strategy, $name)
                .map_err(|e| format!("{}: {e}", stringify!($name)))?;
            passed.push(stringify!($name));
        };
        ($name:ident, $strategy:expr, |$($arg:ident),+|) => {
            TestRunner::new_with_rng(config.clone(), TestRng::deterministic_rng(RngAlgorithm::ChaCha))
                .run(&$strategy, |($($arg),+)| $name($($arg),+))
                .map_err(|e| format!("{}: {e}", stringify!($name)))?;
            passed.push(stringify!($name));
        };
    }
    check!(container_degree_in_unit_interval, (0u64..1 << 40, 0u64..1 << 40), |a, b|);
    check!(retained_and_bloat_partition, (any::<u64>(), vec(any::<usize>(), 0..30)), |seed, picks|);
    check!(
        larger_access_is_monotone,
        (any::<u64>(), vec(any::<usize>(), 0..15), vec(any::<usize>(), 0..15)),
        |seed, small, extra|
    );
    check!(size_reduction_in_unit_interval, vec((0u64..1 << 30, 0.0f64..=1.0), 0..20), |pairs|);
    check!(breakdown_shares_sum_to_one, (any::<u64>(), 1usize..6), |seed, k|);
    check!(
        smaller_bloat_never_removes_more,
        (
            any::<u64>(),
            vec(any::<usize>(), 0..15),
            vec(any::<usize>(), 0..15),
            vec(vec(any::<usize>(), 0..3), 1..12)
        ),
        |seed, small, extra, locs|
    );
    check!(histogram_and_cdf_shapes, vec(0.0f64..=1.0, 0..50), |values|);
    check!(normalization_is_idempotent, (vec("[a-c.]{0,3}", 0..8), any::<bool>()), |parts, abs|);
    Ok(passed)
}
