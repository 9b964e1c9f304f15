//! Retained set, bloat set and container bloat degree.

mod materialize;

use std::collections::BTreeSet;

use globset::{GlobSet, GlobSetBuilder};
use serde::{Deserialize, Serialize};

use crate::diag::Diagnostics;
use crate::error::{Error, Result};
use crate::fs::{FileKind, FileSet};
use crate::path;
use crate::trace::AccessSet;

pub use materialize::{materialize, Manifest, ManifestLine, OutputFormat};

const STAGE: &str = "debloat";

/// Paths retained regardless of the trace, as shell-style globs over
/// absolute container paths (`/etc/passwd`, `/etc/ssl/**`).
#[derive(Debug, Clone, Default)]
pub struct KeepList {
    patterns: Vec<String>,
    set: Option<GlobSet>,
}

impl KeepList {
    pub fn new<I, S>(patterns: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let patterns: Vec<String> = patterns.into_iter().map(|p| p.as_ref().to_string()).collect();
        if patterns.is_empty() {
            return Ok(Self::default());
        }
        let mut builder = GlobSetBuilder::new();
        for p in &patterns {
            let glob = globset::GlobBuilder::new(p)
                .literal_separator(true)
                .build()
                .map_err(|e| Error::Parse {
                    location: format!("keep pattern {p:?}"),
                    message: e.to_string(),
                })?;
            builder.add(glob);
        }
        let set = builder.build().map_err(|e| Error::Parse {
            location: "keep list".into(),
            message: e.to_string(),
        })?;
        Ok(Self {
            patterns,
            set: Some(set),
        })
    }

    pub fn patterns(&self) -> &[String] {
        &self.patterns
    }

    pub fn is_match(&self, p: &str) -> bool {
        self.set.as_ref().is_some_and(|s| s.is_match(p))
    }
}

/// Retained inventory plus the accessed paths that had no counterpart in the
/// filesystem (tmpfs, `/proc`, runtime-created files).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Retention {
    pub retained: FileSet,
    pub missing: BTreeSet<String>,
    pub dangling_links: usize,
}

/// Closes the accessed paths over ancestor directories and symlink chains.
///
/// An accessed path that is not itself an entry is walked through the
/// inventory's symlinks (`/lib/x.so` with `/lib -> usr/lib`); the symlinks
/// passed on the way are retained with the resolved entry.
pub fn compute_retained(fs: &FileSet, access: &AccessSet, keep: &KeepList, diag: &mut Diagnostics) -> Retention {
    let mut work: Vec<String> = Vec::new();
    let mut missing = BTreeSet::new();
    for p in &access.paths {
        if fs.contains(p) {
            work.push(p.clone());
        } else if let Some(r) = fs.resolve(p) {
            work.push(r.path);
            work.extend(r.links);
        } else {
            missing.insert(p.clone());
        }
    }
    if keep.set.is_some() {
        work.extend(fs.paths().filter(|p| keep.is_match(p)).map(str::to_string));
    }
    if fs.contains("/") {
        work.push("/".to_string());
    }
    if access.is_empty() {
        diag.warn(STAGE, "access set is empty; only the root directory is retained");
    }

    let mut retained: BTreeSet<String> = BTreeSet::new();
    let mut dangling_links = 0;
    while let Some(p) = work.pop() {
        if !retained.insert(p.clone()) {
            continue;
        }
        for a in path::ancestors(&p) {
            if !retained.contains(a) {
                work.push(a.to_string());
            }
        }
        let Some(entry) = fs.get(&p) else { continue };
        if entry.kind == FileKind::Symlink {
            match fs.resolve_link_target(entry) {
                Some(r) => {
                    work.push(r.path);
                    work.extend(r.links);
                }
                None => dangling_links += 1,
            }
        }
    }
    if !missing.is_empty() {
        diag.info(
            STAGE,
            format!("{} accessed paths are not present in the filesystem", missing.len()),
        );
    }
    Retention {
        retained: fs.subset(retained.iter().map(String::as_str)),
        missing,
        dangling_links,
    }
}

/// `fs − retained` by path, entries copied from `fs`.
pub fn compute_bloat(fs: &FileSet, retained: &FileSet) -> Result<FileSet> {
    if let Some(stray) = retained.paths().find(|p| !fs.contains(p)) {
        return Err(Error::Contract(format!(
            "retained path {stray} is not in the original filesystem"
        )));
    }
    Ok(fs.subset(fs.paths().filter(|p| !retained.contains(p))))
}

/// `(s_c − s_c') / s_c`, and 0 for an empty container.
pub fn container_bloat_degree(s_c: u64, s_c_prime: u64) -> Result<f64> {
    if s_c_prime > s_c {
        return Err(Error::Contract(format!(
            "debloated size {s_c_prime} exceeds original size {s_c}"
        )));
    }
    if s_c == 0 {
        return Ok(0.0);
    }
    Ok((s_c - s_c_prime) as f64 / s_c as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebloatResult {
    pub retained: FileSet,
    pub bloat: FileSet,
    pub d_c: f64,
    pub s_c: u64,
    pub s_c_prime: u64,
    /// Accessed paths absent from the filesystem.
    pub missing_accessed: Vec<String>,
}

pub fn debloat(fs: &FileSet, access: &AccessSet, keep: &KeepList, diag: &mut Diagnostics) -> Result<DebloatResult> {
    let Retention { retained, missing, .. } = compute_retained(fs, access, keep, diag);
    let bloat = compute_bloat(fs, &retained)?;
    let s_c = fs.total_size();
    let s_c_prime = retained.total_size();
    Ok(DebloatResult {
        d_c: container_bloat_degree(s_c, s_c_prime)?,
        retained,
        bloat,
        s_c,
        s_c_prime,
        missing_accessed: missing.into_iter().collect(),
    })
}
