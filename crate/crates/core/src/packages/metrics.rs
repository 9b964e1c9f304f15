//! Package bloat degree and container-level breakdowns.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Catalog, Functionality, Manager, OwnerIndex, PackageKey, PackageRecord};
use crate::fs::{FileKind, FileSet};

/// Fraction of the package lying in `bloat`, by size; by file count when
/// every owned file is empty; 1.0 when the package owns nothing.
pub fn package_bloat_degree(p: &PackageRecord, bloat: &FileSet) -> f64 {
    if p.files.is_empty() {
        return 1.0;
    }
    let in_bloat: Vec<&str> = p.files.iter().map(String::as_str).filter(|f| bloat.contains(f)).collect();
    if p.size > 0 {
        let removed: u64 = in_bloat
            .iter()
            .filter_map(|f| bloat.get(f))
            .filter(|e| e.kind == FileKind::Regular)
            .map(|e| e.size)
            .sum();
        (removed as f64 / p.size as f64).clamp(0.0, 1.0)
    } else {
        in_bloat.len() as f64 / p.files.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackageMetric {
    pub key: PackageKey,
    pub functionality: Functionality,
    pub size: u64,
    pub files: usize,
    pub d_p: f64,
}

pub fn package_metrics(catalog: &Catalog, bloat: &FileSet) -> Vec<PackageMetric> {
    catalog
        .iter()
        .map(|p| PackageMetric {
            key: p.key(),
            functionality: p.functionality,
            size: p.size,
            files: p.files.len(),
            d_p: package_bloat_degree(p, bloat),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ManagerShares {
    pub apt: f64,
    pub pip: f64,
    pub conda: f64,
    pub non_package: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FunctionalityShares {
    pub ml: f64,
    pub generic: f64,
    pub non_package: f64,
}

/// Size-weighted split of a file set by owning manager and functionality.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub total_size: u64,
    pub by_manager: ManagerShares,
    pub by_functionality: FunctionalityShares,
    pub manager_bytes: BTreeMap<String, u64>,
    pub functionality_bytes: BTreeMap<String, u64>,
    /// Files with more than one owner, counted once under the attributed one.
    pub overlap: usize,
}

const NON_PACKAGE: &str = "NON-PACKAGE";

pub fn category_breakdown(files: &FileSet, index: &OwnerIndex, catalog: &Catalog) -> Breakdown {
    let mut mgr: BTreeMap<String, u64> = BTreeMap::new();
    let mut func: BTreeMap<String, u64> = BTreeMap::new();
    for m in Manager::ALL {
        mgr.insert(m.as_str().into(), 0);
    }
    for f in [Functionality::Ml, Functionality::Generic] {
        func.insert(f.as_str().into(), 0);
    }
    mgr.insert(NON_PACKAGE.into(), 0);
    func.insert(NON_PACKAGE.into(), 0);

    let mut total = 0u64;
    let mut overlap = 0;
    for e in files.regular_files() {
        total += e.size;
        if index.owners_of(&e.path).len() > 1 {
            overlap += 1;
        }
        let (m, f) = match index.attributed(&e.path) {
            Some(k) => {
                let functionality = catalog.get(k).map(|p| p.functionality).unwrap_or(Functionality::Generic);
                (k.manager.as_str(), functionality.as_str())
            }
            None => (NON_PACKAGE, NON_PACKAGE),
        };
        *mgr.get_mut(m).unwrap() += e.size;
        *func.get_mut(f).unwrap() += e.size;
    }

    let share = |bytes: &BTreeMap<String, u64>, k: &str| {
        if total == 0 {
            if k == NON_PACKAGE {
                1.0
            } else {
                0.0
            }
        } else {
            bytes[k] as f64 / total as f64
        }
    };
    Breakdown {
        total_size: total,
        by_manager: ManagerShares {
            apt: share(&mgr, "APT"),
            pip: share(&mgr, "PIP"),
            conda: share(&mgr, "CONDA"),
            non_package: share(&mgr, NON_PACKAGE),
        },
        by_functionality: FunctionalityShares {
            ml: share(&func, "ML"),
            generic: share(&func, "GENERIC"),
            non_package: share(&func, NON_PACKAGE),
        },
        manager_bytes: mgr,
        functionality_bytes: func,
        overlap,
    }
}

/// `Σ d_p·size / Σ size` over `(size, d_p)` pairs; `None` when the sizes sum to 0.
pub fn size_reduction(pkgs: &[(u64, f64)]) -> Option<f64> {
    let total: u64 = pkgs.iter().map(|(s, _)| s).sum();
    if total == 0 {
        return None;
    }
    let removed: f64 = pkgs.iter().map(|&(s, d)| s as f64 * d).sum();
    Some((removed / total as f64).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuartileSummary {
    pub count: usize,
    pub mean: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Count, mean and inclusive linearly interpolated quartiles; `None` when empty.
pub fn quartile_summary(values: &[f64]) -> Option<QuartileSummary> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(QuartileSummary {
        count: v.len(),
        mean: v.iter().sum::<f64>() / v.len() as f64,
        q1: quantile(&v, 0.25),
        q2: quantile(&v, 0.5),
        q3: quantile(&v, 0.75),
    })
}

/// Managers with no packages are omitted.
pub fn quartiles_by_manager(metrics: &[PackageMetric]) -> BTreeMap<Manager, QuartileSummary> {
    let mut groups: BTreeMap<Manager, Vec<f64>> = BTreeMap::new();
    for m in metrics {
        groups.entry(m.key.manager).or_default().push(m.d_p);
    }
    groups
        .into_iter()
        .filter_map(|(k, v)| quartile_summary(&v).map(|q| (k, q)))
        .collect()
}
