//! Scanner report ingestion. The native layout is Grype's `matches[]`;
//! Trivy's `Results[].Vulnerabilities[]` is converted into it.

use std::collections::{BTreeMap, BTreeSet};

use serde::de::DeserializeOwned;
use serde::Deserialize;

use super::{Severity, VulnMatch};
use crate::diag::Diagnostics;
use crate::error::{Error, Result};
use crate::path;

const STAGE: &str = "vuln";

#[derive(Deserialize)]
struct GrypeReport {
    matches: Vec<GrypeMatch>,
}

#[derive(Deserialize)]
struct GrypeMatch {
    vulnerability: GrypeVuln,
    artifact: GrypeArtifact,
}

#[derive(Deserialize)]
struct GrypeVuln {
    id: String,
    severity: String,
}

#[derive(Deserialize)]
struct GrypeArtifact {
    name: String,
    version: String,
    #[serde(default)]
    locations: Vec<GrypeLocation>,
}

#[derive(Deserialize)]
struct GrypeLocation {
    path: String,
}

#[derive(Deserialize)]
#[serde(rename_all = "PascalCase")]
struct TrivyReport {
    #[serde(default)]
    results: Option<Vec<TrivyResult>>,
}

#[derive(Deserialize)]
#[serde(rename_all = "PascalCase")]
struct TrivyResult {
    #[serde(default)]
    vulnerabilities: Option<Vec<TrivyVuln>>,
}

#[derive(Deserialize)]
struct TrivyVuln {
    #[serde(rename = "VulnerabilityID")]
    id: String,
    #[serde(rename = "PkgName")]
    name: String,
    #[serde(rename = "InstalledVersion")]
    version: String,
    #[serde(rename = "Severity")]
    severity: String,
    #[serde(rename = "PkgPath", default)]
    pkg_path: Option<String>,
}

/// Report layouts accepted by [`load_report_as`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Grype,
    Trivy,
}

fn parse<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        location: format!("$.{}", e.path()),
        message: e.inner().to_string(),
    })
}

struct Raw {
    id: String,
    severity: String,
    name: String,
    version: String,
    locations: Vec<String>,
}

/// Parses a Grype-layout report.
pub fn load_report(text: &str, diag: &mut Diagnostics) -> Result<Vec<VulnMatch>> {
    load_report_as(text, ReportFormat::Grype, diag)
}

/// Guesses the layout from the top-level keys, defaulting to Grype.
pub fn detect_format(text: &str) -> ReportFormat {
    match serde_json::from_str::<serde_json::Value>(text) {
        Ok(serde_json::Value::Object(m)) if !m.contains_key("matches") && m.contains_key("Results") => {
            ReportFormat::Trivy
        }
        _ => ReportFormat::Grype,
    }
}

pub fn load_report_as(text: &str, format: ReportFormat, diag: &mut Diagnostics) -> Result<Vec<VulnMatch>> {
    let raw: Vec<Raw> = match format {
        ReportFormat::Grype => parse::<GrypeReport>(text)?
            .matches
            .into_iter()
            .map(|m| Raw {
                id: m.vulnerability.id,
                severity: m.vulnerability.severity,
                name: m.artifact.name,
                version: m.artifact.version,
                locations: m.artifact.locations.into_iter().map(|l| l.path).collect(),
            })
            .collect(),
        ReportFormat::Trivy => parse::<TrivyReport>(text)?
            .results
            .unwrap_or_default()
            .into_iter()
            .flat_map(|r| r.vulnerabilities.unwrap_or_default())
            .map(|v| Raw {
                id: v.id,
                severity: v.severity,
                name: v.name,
                version: v.version,
                locations: v.pkg_path.into_iter().collect(),
            })
            .collect(),
    };
    Ok(merge(raw, diag))
}

/// One match per (id, name, version): locations unioned, the most severe
/// label kept.
fn merge(raw: Vec<Raw>, diag: &mut Diagnostics) -> Vec<VulnMatch> {
    let mut out: BTreeMap<(String, String, String), VulnMatch> = BTreeMap::new();
    for r in raw {
        let severity = Severity::normalize(&r.severity).unwrap_or_else(|| {
            diag.warn(
                STAGE,
                format!("{}: unrecognized severity {:?}; treated as Negligible", r.id, r.severity),
            );
            Severity::Negligible
        });
        let locations: BTreeSet<String> = r
            .locations
            .iter()
            .filter(|l| !l.trim().is_empty())
            .map(|l| path::absolute(l))
            .collect();
        if locations.is_empty() && r.name.trim().is_empty() {
            diag.warn(STAGE, format!("{}: match has neither locations nor a package name", r.id));
        }
        let key = (r.id.clone(), r.name.clone(), r.version.clone());
        match out.get_mut(&key) {
            Some(m) => {
                m.locations.extend(locations);
                m.severity = m.severity.min(severity);
            }
            None => {
                out.insert(
                    key,
                    VulnMatch {
                        cve_id: r.id,
                        severity,
                        pkg_name: r.name,
                        pkg_version: r.version,
                        locations,
                    },
                );
            }
        }
    }
    out.into_values().collect()
}
