//! CVE findings from a scanner report, and which of them survive debloating.

mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::diag::Diagnostics;
use crate::fs::FileSet;
use crate::packages::{Catalog, PackageKey, PackageRecord};

pub use report::{detect_format, load_report, load_report_as, ReportFormat};

const STAGE: &str = "vuln";

/// Declared most severe first, so `min` picks the worse of two labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Severity {
    Critical,
    High,
    Medium,
    Low,
    Negligible,
}

impl Severity {
    pub const ALL: [Severity; 5] = [
        Severity::Critical,
        Severity::High,
        Severity::Medium,
        Severity::Low,
        Severity::Negligible,
    ];

    /// Case-insensitive label mapping.
    ///
    /// | label                                  | level      |
    /// |----------------------------------------|------------|
    /// | critical                               | Critical   |
    /// | high, important                        | High       |
    /// | medium, moderate                       | Medium     |
    /// | low                                    | Low        |
    /// | negligible, unknown, none, info, untriaged | Negligible |
    ///
    /// Anything else yields `None`; callers map it to Negligible and warn.
    pub fn normalize(label: &str) -> Option<Severity> {
        Some(match label.trim().to_ascii_lowercase().as_str() {
            "critical" => Severity::Critical,
            "high" | "important" => Severity::High,
            "medium" | "moderate" => Severity::Medium,
            "low" => Severity::Low,
            "negligible" | "unknown" | "none" | "info" | "informational" | "untriaged" | "" => Severity::Negligible,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Critical => "Critical",
            Severity::High => "High",
            Severity::Medium => "Medium",
            Severity::Low => "Low",
            Severity::Negligible => "Negligible",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VulnMatch {
    pub cve_id: String,
    pub severity: Severity,
    pub pkg_name: String,
    pub pkg_version: String,
    pub locations: BTreeSet<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VulnDiff {
    pub removed: Vec<VulnMatch>,
    pub retained: Vec<VulnMatch>,
    /// `|removed| / (|removed| + |retained|)`; absent for an empty report.
    pub reduction: Option<f64>,
}

impl VulnDiff {
    pub fn total(&self) -> usize {
        self.removed.len() + self.retained.len()
    }
}

/// Catalog packages a match refers to. With locations, packages owning one
/// of them are preferred over a bare name/version lookup.
pub fn matched_packages<'a>(m: &VulnMatch, catalog: &'a Catalog) -> Vec<&'a PackageRecord> {
    let named = catalog.find(&m.pkg_name, &m.pkg_version);
    let owning: Vec<_> = named
        .iter()
        .copied()
        .filter(|p| m.locations.iter().any(|l| p.files.contains(l)))
        .collect();
    if owning.is_empty() {
        named
    } else {
        owning
    }
}

/// A match is removed when all its locations are in `bloat`, or, lacking
/// locations, when every file of every matched package is. Matches that
/// resolve to nothing are kept.
pub fn surviving_cves(matches: &[VulnMatch], bloat: &FileSet, catalog: &Catalog, diag: &mut Diagnostics) -> VulnDiff {
    let mut diff = VulnDiff::default();
    for m in matches {
        let removed = if !m.locations.is_empty() {
            m.locations.iter().all(|l| bloat.contains(l))
        } else {
            let pkgs = catalog.find(&m.pkg_name, &m.pkg_version);
            if pkgs.is_empty() {
                diag.info(
                    STAGE,
                    format!(
                        "{} ({} {}) has no locations and no catalog package; kept",
                        m.cve_id, m.pkg_name, m.pkg_version
                    ),
                );
                false
            } else {
                pkgs.iter().all(|p| p.files.iter().all(|f| bloat.contains(f)))
            }
        };
        if removed {
            diff.removed.push(m.clone());
        } else {
            diff.retained.push(m.clone());
        }
    }
    let total = diff.total();
    diff.reduction = (total > 0).then(|| diff.removed.len() as f64 / total as f64);
    diff
}

/// Distinct CVE ids per catalog package over the original report.
pub fn vuln_counts(matches: &[VulnMatch], catalog: &Catalog) -> BTreeMap<PackageKey, usize> {
    let mut ids: BTreeMap<PackageKey, BTreeSet<&str>> = BTreeMap::new();
    for m in matches {
        for p in matched_packages(m, catalog) {
            ids.entry(p.key()).or_default().insert(&m.cve_id);
        }
    }
    ids.into_iter().map(|(k, v)| (k, v.len())).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeverityRow {
    pub severity: Severity,
    pub before: usize,
    pub after: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityTable {
    pub rows: Vec<SeverityRow>,
    pub total_before: usize,
    pub total_after: usize,
    /// `1 - after/before`; absent when there was nothing before.
    pub reduction: Option<f64>,
    /// `reduction` as a whole percentage, rounded half away from zero.
    pub reduction_percent: Option<u32>,
}

pub fn severity_table(diff: &VulnDiff) -> SeverityTable {
    let count = |ms: &[VulnMatch], s: Severity| ms.iter().filter(|m| m.severity == s).count();
    let rows: Vec<SeverityRow> = Severity::ALL
        .iter()
        .map(|&s| SeverityRow {
            severity: s,
            before: count(&diff.removed, s) + count(&diff.retained, s),
            after: count(&diff.retained, s),
        })
        .collect();
    SeverityTable::from_rows(rows)
}

impl SeverityTable {
    pub fn from_rows(rows: Vec<SeverityRow>) -> Self {
        let total_before = rows.iter().map(|r| r.before).sum();
        let total_after = rows.iter().map(|r| r.after).sum();
        let reduction = (total_before > 0).then(|| 1.0 - total_after as f64 / total_before as f64);
        Self {
            rows,
            total_before,
            total_after,
            reduction,
            reduction_percent: reduction.map(|r| (r * 100.0).round() as u32),
        }
    }

    /// `severity,before,after` rows followed by a `Total` row whose third
    /// column is the reduction percentage (empty when absent).
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["severity", "before", "after", "reduction_percent"]).unwrap();
        for r in &self.rows {
            w.write_record([r.severity.as_str(), &r.before.to_string(), &r.after.to_string(), ""])
                .unwrap();
        }
        let pct = self.reduction_percent.map(|p| p.to_string()).unwrap_or_default();
        w.write_record(["Total", &self.total_before.to_string(), &self.total_after.to_string(), &pct])
            .unwrap();
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}
