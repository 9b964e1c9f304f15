//! Distribution summaries behind the Pareto, histogram, CDF and violin plots.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fs::FileSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoEntry {
    pub path: String,
    pub size: u64,
    pub cumulative: f64,
}

/// Largest regular files first (ties by path), up to the first prefix
/// holding at least `fraction` of the total size. Empty when the set holds
/// no bytes.
pub fn pareto_files(fs: &FileSet, fraction: f64) -> Result<Vec<ParetoEntry>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Contract(format!("pareto fraction {fraction} outside (0, 1]")));
    }
    let mut files: Vec<(&str, u64)> = fs.regular_files().map(|e| (e.path.as_str(), e.size)).collect();
    files.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let total: u64 = files.iter().map(|f| f.1).sum();
    let mut out = Vec::new();
    if total == 0 {
        return Ok(out);
    }
    let target = fraction * total as f64;
    let mut acc = 0u64;
    for (path, size) in files {
        acc += size;
        out.push(ParetoEntry {
            path: path.to_string(),
            size,
            cumulative: acc as f64 / total as f64,
        });
        if acc as f64 >= target {
            break;
        }
    }
    Ok(out)
}

/// Counts over `[0,0.1)`, …, `[0.8,0.9)`, `[0.9,1.0]`.
pub fn bloat_degree_histogram(values: &[f64]) -> Result<[usize; 10]> {
    let mut bins = [0usize; 10];
    for &v in values {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Contract(format!("bloat degree {v} outside [0, 1]")));
        }
        bins[((v * 10.0).floor() as usize).min(9)] += 1;
    }
    Ok(bins)
}

/// Empirical CDF: one `(value, P[X <= value])` point per distinct value.
pub fn cdf_points(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, x) in v.iter().enumerate() {
        let p = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *x => last.1 = p,
            _ => out.push((*x, p)),
        }
    }
    out
}

/// Raw values plus the five-number anchors; smoothing is left to the plotter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolinSeries {
    pub label: String,
    pub values: Vec<f64>,
    pub min: Option<f64>,
    pub median: Option<f64>,
    pub max: Option<f64>,
}

pub fn violin_series(label: impl Into<String>, values: &[f64]) -> ViolinSeries {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let median = crate::packages::quartile_summary(&v).map(|q| q.q2);
    ViolinSeries {
        label: label.into(),
        min: v.first().copied(),
        max: v.last().copied(),
        median,
        values: v,
    }
}
