//! dpkg database: `/var/lib/dpkg/status` stanzas and `info/<pkg>[:<arch>].list`.

use std::collections::{BTreeMap, HashMap};

use super::{DepAtom, DependencySpec, Draft, Manager, DPKG_INFO, DPKG_STATUS};
use crate::diag::Diagnostics;

const STAGE: &str = "packages/apt";

/// Fields of one control stanza; names lowercased, continuation lines joined
/// with `\n`.
pub(crate) type Stanza = BTreeMap<String, String>;

pub(crate) fn parse_stanzas(text: &str) -> Vec<Result<Stanza, String>> {
    let mut out = Vec::new();
    let mut current: Stanza = BTreeMap::new();
    let mut last: Option<String> = None;
    let mut error: Option<String> = None;
    let flush = |current: &mut Stanza, error: &mut Option<String>, out: &mut Vec<_>| {
        if let Some(e) = error.take() {
            out.push(Err(e));
        } else if !current.is_empty() {
            out.push(Ok(std::mem::take(current)));
        }
        current.clear();
    };
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            flush(&mut current, &mut error, &mut out);
            last = None;
            continue;
        }
        if line.starts_with(' ') || line.starts_with('\t') {
            match last.as_ref().and_then(|k| current.get_mut(k)) {
                Some(v) => {
                    v.push('\n');
                    v.push_str(line.trim());
                }
                None => {
                    error.get_or_insert(format!("line {}: continuation without a field", lineno + 1));
                }
            }
            continue;
        }
        match line.split_once(':') {
            Some((k, v)) if !k.is_empty() && !k.contains(' ') => {
                let key = k.to_ascii_lowercase();
                current.insert(key.clone(), v.trim().to_string());
                last = Some(key);
            }
            _ => {
                error.get_or_insert(format!("line {}: expected `Field: value`", lineno + 1));
            }
        }
    }
    flush(&mut current, &mut error, &mut out);
    out
}

fn strip_arch(name: &str) -> &str {
    name.split(':').next().unwrap_or(name)
}

/// `a (>= 1), b | c:any, d [amd64]` → groups of alternatives.
pub(crate) fn parse_depends(field: &str) -> Vec<DependencySpec> {
    field
        .split(',')
        .map(str::trim)
        .filter(|g| !g.is_empty())
        .map(|group| DependencySpec {
            alternatives: group
                .split('|')
                .filter_map(|alt| {
                    let alt = alt.trim();
                    let end = alt.find([' ', '(', '[', '<']).unwrap_or(alt.len());
                    let name = strip_arch(&alt[..end]).trim();
                    if name.is_empty() {
                        return None;
                    }
                    let constraint = alt
                        .find('(')
                        .and_then(|s| alt[s + 1..].find(')').map(|e| alt[s + 1..s + 1 + e].trim().to_string()));
                    Some(DepAtom {
                        name: name.to_string(),
                        constraint,
                    })
                })
                .collect(),
        })
        .filter(|d: &DependencySpec| !d.alternatives.is_empty())
        .collect()
}

fn parse_provides(field: &str) -> Vec<String> {
    field
        .split(',')
        .filter_map(|p| {
            let p = p.trim();
            let end = p.find([' ', '(']).unwrap_or(p.len());
            let name = strip_arch(&p[..end]);
            (!name.is_empty()).then(|| name.to_string())
        })
        .collect()
}

fn is_installed(status: &str) -> bool {
    matches!(
        status.split_whitespace().nth(2),
        Some("installed" | "triggers-awaited" | "triggers-pending")
    )
}

struct Parsed {
    name: String,
    arch: Option<String>,
    draft: Draft,
}

pub(crate) fn detect(files: &BTreeMap<String, Vec<u8>>, diag: &mut Diagnostics) -> Vec<Draft> {
    let Some(status) = files.get(DPKG_STATUS) else {
        return Vec::new();
    };
    let text = String::from_utf8_lossy(status);
    let mut parsed = Vec::new();
    for (idx, stanza) in parse_stanzas(&text).into_iter().enumerate() {
        let stanza = match stanza {
            Ok(s) => s,
            Err(e) => {
                diag.warn(STAGE, format!("skipping malformed stanza {}: {e}", idx + 1));
                continue;
            }
        };
        let (Some(name), Some(version)) = (stanza.get("package"), stanza.get("version")) else {
            diag.warn(STAGE, format!("skipping stanza {} without Package/Version", idx + 1));
            continue;
        };
        if !stanza.get("status").is_some_and(|s| is_installed(s)) {
            continue;
        }
        let arch = stanza.get("architecture").cloned();
        let list = arch
            .as_ref()
            .and_then(|a| files.get(&format!("{DPKG_INFO}/{name}:{a}.list")))
            .or_else(|| files.get(&format!("{DPKG_INFO}/{name}.list")));
        let declared: Vec<String> = match list {
            Some(bytes) => String::from_utf8_lossy(bytes)
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && *l != "/.")
                .map(str::to_string)
                .collect(),
            None => {
                diag.info(STAGE, format!("{name}: no file list in {DPKG_INFO}"));
                Vec::new()
            }
        };
        let mut deps = Vec::new();
        for field in ["pre-depends", "depends"] {
            if let Some(v) = stanza.get(field) {
                deps.extend(parse_depends(v));
            }
        }
        let provides = stanza.get("provides").map(|p| parse_provides(p)).unwrap_or_default();
        parsed.push(Parsed {
            name: name.clone(),
            arch,
            draft: Draft {
                manager: Manager::Apt,
                name: name.clone(),
                version: version.clone(),
                declared,
                deps,
                provides,
                location: None,
            },
        });
    }

    // Multi-arch co-installs share name and version; qualify them by arch.
    let mut counts: HashMap<(String, String), usize> = HashMap::new();
    for p in &parsed {
        *counts.entry((p.name.clone(), p.draft.version.clone())).or_default() += 1;
    }
    parsed
        .into_iter()
        .map(|mut p| {
            if counts[&(p.name.clone(), p.draft.version.clone())] > 1 {
                if let Some(a) = &p.arch {
                    p.draft.name = format!("{}:{a}", p.name);
                }
            }
            p.draft
        })
        .collect()
}
