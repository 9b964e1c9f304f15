//! Installed-package detection (APT, PIP, Conda), file ownership, and
//! package-level bloat metrics.

mod apt;
mod classify;
mod conda;
mod metrics;
mod pip;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::diag::Diagnostics;
use crate::error::Result;
use crate::fs::{FileKind, FileSet, ImageSource};
use crate::path;

pub use classify::{Functionality, Rules};
pub use metrics::{
    category_breakdown, package_bloat_degree, package_metrics, quartile_summary, quartiles_by_manager,
    size_reduction, Breakdown, FunctionalityShares, ManagerShares, PackageMetric, QuartileSummary,
};
pub use pip::canonical_name;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Manager {
    Apt,
    Pip,
    Conda,
}

impl Manager {
    pub const ALL: [Manager; 3] = [Manager::Apt, Manager::Pip, Manager::Conda];

    pub fn as_str(self) -> &'static str {
        match self {
            Manager::Apt => "APT",
            Manager::Pip => "PIP",
            Manager::Conda => "CONDA",
        }
    }

    /// Attribution priority for files owned by several managers.
    fn priority(self) -> u8 {
        match self {
            Manager::Conda => 0,
            Manager::Pip => 1,
            Manager::Apt => 2,
        }
    }
}

impl fmt::Display for Manager {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PackageKey {
    pub manager: Manager,
    pub name: String,
    pub version: String,
}

impl PackageKey {
    pub fn new(manager: Manager, name: impl Into<String>, version: impl Into<String>) -> Self {
        Self {
            manager,
            name: name.into(),
            version: version.into(),
        }
    }
}

impl fmt::Display for PackageKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}@{}", self.manager, self.name, self.version)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepAtom {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<String>,
}

/// One declared dependency; more than one alternative for APT `a | b`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencySpec {
    pub alternatives: Vec<DepAtom>,
}

impl DependencySpec {
    pub fn single(name: impl Into<String>) -> Self {
        Self {
            alternatives: vec![DepAtom {
                name: name.into(),
                constraint: None,
            }],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackageRecord {
    pub manager: Manager,
    pub name: String,
    pub version: String,
    /// Owned non-directory paths present in the filesystem, resolved through
    /// symlinked directories where the metadata names a different path.
    pub files: BTreeSet<String>,
    /// Declared paths that do not exist in the filesystem.
    pub missing_files: usize,
    pub declared_deps: Vec<DependencySpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub provides: Vec<String>,
    pub functionality: Functionality,
    /// Sum of regular-file sizes in `files`.
    pub size: u64,
    /// site-packages directory (PIP) or environment prefix (Conda).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
}

impl PackageRecord {
    pub fn key(&self) -> PackageKey {
        PackageKey::new(self.manager, self.name.clone(), self.version.clone())
    }
}

/// Where a declared path landed in the inventory.
pub(crate) enum Owned {
    File(String),
    Directory,
    Missing,
}

pub(crate) fn locate(fs: &FileSet, raw: &str) -> Owned {
    let p = path::absolute(raw);
    let kind_at = |p: &str| fs.get(p).map(|e| e.kind);
    match kind_at(&p) {
        Some(FileKind::Directory) => Owned::Directory,
        Some(_) => Owned::File(p),
        None => match fs.resolve(&p) {
            Some(r) => match kind_at(&r.path) {
                Some(FileKind::Directory) => Owned::Directory,
                Some(_) => Owned::File(r.path),
                None => Owned::Missing,
            },
            None => Owned::Missing,
        },
    }
}

/// Partially built record shared by the three detectors.
pub(crate) struct Draft {
    pub manager: Manager,
    pub name: String,
    pub version: String,
    pub declared: Vec<String>,
    pub deps: Vec<DependencySpec>,
    pub provides: Vec<String>,
    pub location: Option<String>,
}

impl Draft {
    fn finish(self, fs: &FileSet, rules: &Rules) -> PackageRecord {
        let mut files = BTreeSet::new();
        let mut missing = 0;
        for raw in &self.declared {
            match locate(fs, raw) {
                Owned::File(p) => {
                    files.insert(p);
                }
                Owned::Directory => {}
                Owned::Missing => missing += 1,
            }
        }
        let size = files
            .iter()
            .filter_map(|p| fs.get(p))
            .filter(|e| e.kind == FileKind::Regular)
            .map(|e| e.size)
            .sum();
        PackageRecord {
            manager: self.manager,
            functionality: rules.classify(&self.name),
            name: self.name,
            version: self.version,
            files,
            missing_files: missing,
            declared_deps: self.deps,
            provides: self.provides,
            size,
            location: self.location,
        }
    }
}

/// All detected packages, sorted by key.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Catalog {
    pub packages: Vec<PackageRecord>,
}

impl Catalog {
    pub fn new(mut packages: Vec<PackageRecord>) -> Self {
        packages.sort_by_key(PackageRecord::key);
        Self { packages }
    }

    pub fn get(&self, key: &PackageKey) -> Option<&PackageRecord> {
        self.packages
            .binary_search_by(|p| p.key().cmp(key))
            .ok()
            .map(|i| &self.packages[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &PackageRecord> {
        self.packages.iter()
    }

    pub fn len(&self) -> usize {
        self.packages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packages.is_empty()
    }

    /// Packages whose canonicalized name and exact version match.
    pub fn find(&self, name: &str, version: &str) -> Vec<&PackageRecord> {
        let wanted = canonical_name(name);
        self.packages
            .iter()
            .filter(|p| p.version == version && canonical_name(&p.name) == wanted)
            .collect()
    }
}

/// Path → owning packages.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OwnerIndex {
    pub owners: BTreeMap<String, Vec<PackageKey>>,
}

impl OwnerIndex {
    pub fn build(catalog: &Catalog) -> Self {
        let mut owners: BTreeMap<String, Vec<PackageKey>> = BTreeMap::new();
        for p in catalog.iter() {
            let key = p.key();
            for f in &p.files {
                owners.entry(f.clone()).or_default().push(key.clone());
            }
        }
        for v in owners.values_mut() {
            v.sort();
            v.dedup();
        }
        Self { owners }
    }

    pub fn owners_of(&self, p: &str) -> &[PackageKey] {
        self.owners.get(p).map(Vec::as_slice).unwrap_or(&[])
    }

    /// The single owner a file is attributed to in container-level
    /// breakdowns: CONDA before PIP before APT, then smallest key.
    pub fn attributed(&self, p: &str) -> Option<&PackageKey> {
        self.owners_of(p)
            .iter()
            .min_by(|a, b| a.manager.priority().cmp(&b.manager.priority()).then_with(|| a.cmp(b)))
    }
}

const DPKG_STATUS: &str = "/var/lib/dpkg/status";
const DPKG_INFO: &str = "/var/lib/dpkg/info";

/// Metadata files the detectors read: the dpkg database, dist-info
/// `METADATA`/`RECORD`, and `conda-meta/*.json`.
pub fn metadata_paths(fs: &FileSet) -> BTreeSet<String> {
    fs.regular_files()
        .map(|e| e.path.as_str())
        .filter(|p| {
            let name = path::file_name(p);
            let parent = path::parent(p).unwrap_or("/");
            *p == DPKG_STATUS
                || (parent == DPKG_INFO && name.ends_with(".list"))
                || (path::file_name(parent).ends_with(".dist-info") && (name == "METADATA" || name == "RECORD"))
                || (path::file_name(parent) == "conda-meta" && name.ends_with(".json"))
        })
        .map(str::to_string)
        .collect()
}

/// Detects packages from metadata file contents keyed by container path.
/// `fs` must be the original (pre-debloat) inventory.
pub fn detect_packages(
    fs: &FileSet,
    files: &BTreeMap<String, Vec<u8>>,
    rules: &Rules,
    diag: &mut Diagnostics,
) -> Catalog {
    let mut drafts = Vec::new();
    drafts.extend(apt::detect(files, diag));
    drafts.extend(pip::detect(fs, files, diag));
    drafts.extend(conda::detect(files, diag));

    let mut seen = BTreeSet::new();
    let mut records = Vec::new();
    for d in drafts {
        let rec = d.finish(fs, rules);
        if !seen.insert(rec.key()) {
            diag.warn(
                "packages",
                format!("duplicate package {}; keeping the first", rec.key()),
            );
            continue;
        }
        records.push(rec);
    }
    Catalog::new(records)
}

/// Reads the metadata files from `source` and runs [`detect_packages`].
pub fn detect_from_source(
    fs: &FileSet,
    source: &ImageSource,
    rules: &Rules,
    diag: &mut Diagnostics,
) -> Result<Catalog> {
    let wanted = metadata_paths(fs);
    let contents = source.read_files(fs, &wanted, diag)?;
    Ok(detect_packages(fs, &contents, rules, diag))
}
