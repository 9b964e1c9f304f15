//! Python `*.dist-info` directories: `METADATA` headers and `RECORD` CSV.

use std::collections::{BTreeMap, BTreeSet};

use super::{DepAtom, DependencySpec, Draft, Manager};
use crate::diag::Diagnostics;
use crate::fs::FileSet;
use crate::path;

const STAGE: &str = "packages/pip";

/// Lowercase, with runs of `-`, `_` and `.` collapsed to a single `-`.
pub fn canonical_name(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    let mut in_sep = false;
    for c in name.trim().chars() {
        if matches!(c, '-' | '_' | '.') {
            if !in_sep {
                out.push('-');
            }
            in_sep = true;
        } else {
            out.extend(c.to_lowercase());
            in_sep = false;
        }
    }
    out
}

/// RFC 822 style header block of a `METADATA` file; repeated fields keep
/// every value in order.
fn parse_headers(text: &str) -> BTreeMap<String, Vec<String>> {
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut last: Option<String> = None;
    for line in text.lines() {
        if line.is_empty() {
            break;
        }
        if line.starts_with(' ') || line.starts_with('\t') {
            if let Some(v) = last.as_ref().and_then(|k| out.get_mut(k)).and_then(|v| v.last_mut()) {
                v.push(' ');
                v.push_str(line.trim());
            }
            continue;
        }
        if let Some((k, v)) = line.split_once(':') {
            let key = k.trim().to_ascii_lowercase();
            out.entry(key.clone()).or_default().push(v.trim().to_string());
            last = Some(key);
        }
    }
    out
}

/// `requests[socks] (>=2.0) ; extra == "x"` → `requests`, `[socks] (>=2.0) ; ...`.
pub(crate) fn parse_requirement(req: &str) -> Option<DepAtom> {
    let req = req.trim();
    let end = req
        .find(|c: char| !(c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.')))
        .unwrap_or(req.len());
    if end == 0 {
        return None;
    }
    let rest = req[end..].trim();
    Some(DepAtom {
        name: canonical_name(&req[..end]),
        constraint: (!rest.is_empty()).then(|| rest.to_string()),
    })
}

fn split_dir_name(dir: &str) -> Option<(String, String)> {
    let stem = path::file_name(dir).strip_suffix(".dist-info")?;
    let (name, version) = stem.split_once('-')?;
    Some((name.to_string(), version.to_string()))
}

fn record_paths(site: &str, record: &[u8]) -> Result<Vec<String>, String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(record);
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| format!("RECORD row {}: {e}", i + 1))?;
        let Some(first) = row.get(0).map(str::trim).filter(|s| !s.is_empty()) else {
            continue;
        };
        out.push(path::normalize(site, first).path);
    }
    Ok(out)
}

pub(crate) fn detect(fs: &FileSet, files: &BTreeMap<String, Vec<u8>>, diag: &mut Diagnostics) -> Vec<Draft> {
    let dirs: BTreeSet<&str> = fs
        .iter()
        .filter(|e| e.is_dir() && e.path.ends_with(".dist-info"))
        .map(|e| e.path.as_str())
        .collect();
    let mut drafts = Vec::new();
    for dir in dirs {
        let site = path::parent(dir).unwrap_or("/").to_string();
        let headers = files
            .get(&path::join(dir, "METADATA"))
            .map(|b| parse_headers(&String::from_utf8_lossy(b)))
            .unwrap_or_default();
        let first = |k: &str| headers.get(k).and_then(|v| v.first()).cloned();
        let (name, version) = match (first("name"), first("version")) {
            (Some(n), Some(v)) => (n, v),
            _ => match split_dir_name(dir) {
                Some(nv) => {
                    diag.info(STAGE, format!("{dir}: METADATA lacks Name/Version; using directory name"));
                    nv
                }
                None => {
                    diag.warn(STAGE, format!("{dir}: cannot determine package name; skipped"));
                    continue;
                }
            },
        };
        let Some(record) = files.get(&path::join(dir, "RECORD")) else {
            diag.warn(STAGE, format!("{dir}: no RECORD; skipped"));
            continue;
        };
        let declared = match record_paths(&site, record) {
            Ok(p) => p,
            Err(e) => {
                diag.warn(STAGE, format!("{dir}: malformed RECORD ({e}); skipped"));
                continue;
            }
        };
        let deps = headers
            .get("requires-dist")
            .into_iter()
            .flatten()
            .filter_map(|r| parse_requirement(r))
            .map(|atom| DependencySpec {
                alternatives: vec![atom],
            })
            .collect();
        drafts.push(Draft {
            manager: Manager::Pip,
            name: canonical_name(&name),
            version,
            declared,
            deps,
            provides: Vec::new(),
            location: Some(site),
        });
    }
    drafts
}
