//! Conda environments: `<prefix>/conda-meta/<name>-<version>-<build>.json`.

use std::collections::BTreeMap;

use serde::Deserialize;

use super::{DepAtom, DependencySpec, Draft, Manager};
use crate::diag::Diagnostics;
use crate::path;

const STAGE: &str = "packages/conda";

#[derive(Deserialize)]
struct CondaMeta {
    name: String,
    version: String,
    #[serde(default)]
    files: Vec<String>,
    #[serde(default)]
    depends: Vec<String>,
}

fn parse_depend(spec: &str) -> Option<DependencySpec> {
    let mut parts = spec.split_whitespace();
    let name = parts.next()?.to_string();
    let rest: Vec<&str> = parts.collect();
    Some(DependencySpec {
        alternatives: vec![DepAtom {
            name,
            constraint: (!rest.is_empty()).then(|| rest.join(" ")),
        }],
    })
}

pub(crate) fn detect(files: &BTreeMap<String, Vec<u8>>, diag: &mut Diagnostics) -> Vec<Draft> {
    let mut drafts = Vec::new();
    for (p, bytes) in files {
        let meta_dir = path::parent(p).unwrap_or("/");
        if path::file_name(meta_dir) != "conda-meta" || !p.ends_with(".json") {
            continue;
        }
        let prefix = path::parent(meta_dir).unwrap_or("/").to_string();
        let meta: CondaMeta = match serde_json::from_slice(bytes) {
            Ok(m) => m,
            Err(e) => {
                diag.warn(STAGE, format!("{p}: {e}; skipped"));
                continue;
            }
        };
        drafts.push(Draft {
            manager: Manager::Conda,
            declared: meta.files.iter().map(|f| path::normalize(&prefix, f).path).collect(),
            deps: meta.depends.iter().filter_map(|d| parse_depend(d)).collect(),
            name: meta.name,
            version: meta.version,
            provides: Vec::new(),
            location: Some(prefix),
        });
    }
    drafts
}
