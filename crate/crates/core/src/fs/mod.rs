//! Container filesystem inventory.
//!
//! A [`FileSet`] maps normalized absolute paths to [`FileEntry`] records. It is
//! built once by one of the loaders ([`load_rootfs`], [`load_tar`],
//! [`load_layers`]) and treated as read-only afterwards. Every non-root entry's
//! parent is present as a directory; loaders synthesize missing parents.

mod layers;
mod rootfs;
mod source;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::path;

pub use layers::{load_layers, load_tar, read_layer, LayerMember, MemberKind};
pub use rootfs::load_rootfs;
pub use source::ImageSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileKind {
    Regular,
    Directory,
    Symlink,
    Other,
}

impl FileKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FileKind::Regular => "regular",
            FileKind::Directory => "directory",
            FileKind::Symlink => "symlink",
            FileKind::Other => "other",
        }
    }
}

impl std::fmt::Display for FileKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub kind: FileKind,
    pub size: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link_target: Option<String>,
    /// Permission bits (`0o7777` mask).
    pub mode: u32,
}

impl FileEntry {
    pub fn regular(path: impl Into<String>, size: u64) -> Self {
        Self {
            path: path.into(),
            kind: FileKind::Regular,
            size,
            link_target: None,
            mode: 0o644,
        }
    }

    pub fn directory(path: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            kind: FileKind::Directory,
            size: 0,
            link_target: None,
            mode: 0o755,
        }
    }

    pub fn symlink(path: impl Into<String>, target: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            kind: FileKind::Symlink,
            size: 0,
            link_target: Some(target.into()),
            mode: 0o777,
        }
    }

    pub fn other(path: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            kind: FileKind::Other,
            size: 0,
            link_target: None,
            mode: 0o644,
        }
    }

    pub fn with_mode(mut self, mode: u32) -> Self {
        self.mode = mode & 0o7777;
        self
    }

    pub fn is_dir(&self) -> bool {
        self.kind == FileKind::Directory
    }

    /// Same path, kind, size and link target; modes are not compared.
    pub fn same_shape(&self, other: &FileEntry) -> bool {
        self.path == other.path
            && self.kind == other.kind
            && self.size == other.size
            && self.link_target == other.link_target
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    RootfsDir,
    FlatTar,
    Layered,
    Derived,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileSet {
    origin: Origin,
    entries: BTreeMap<String, FileEntry>,
}

/// Outcome of walking a path through the inventory's symlinks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resolution {
    /// Path of the entry finally reached. Its last component is not followed.
    pub path: String,
    /// Symlink entries traversed on the way, in order.
    pub links: Vec<String>,
}

const MAX_LINK_HOPS: usize = 40;

impl FileSet {
    /// An inventory holding only the root directory.
    pub fn new(origin: Origin) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert("/".to_string(), FileEntry::directory("/"));
        Self { origin, entries }
    }

    /// An inventory with no entries at all, not even `/`.
    pub fn empty(origin: Origin) -> Self {
        Self {
            origin,
            entries: BTreeMap::new(),
        }
    }

    /// Builds an inventory from arbitrary entries. Paths are normalized,
    /// sizes of non-regular entries forced to 0, and missing parents
    /// synthesized as directories. Later duplicates replace earlier ones.
    pub fn from_entries(origin: Origin, entries: impl IntoIterator<Item = FileEntry>) -> Self {
        let mut fs = Self::new(origin);
        for entry in entries {
            fs.insert(entry);
        }
        fs
    }

    pub(crate) fn insert(&mut self, mut entry: FileEntry) {
        entry.path = path::absolute(&entry.path);
        if entry.kind != FileKind::Regular {
            entry.size = 0;
        }
        if entry.kind != FileKind::Symlink {
            entry.link_target = None;
        }
        self.ensure_parents(&entry.path);
        if let Some(existing) = self.entries.get(&entry.path) {
            if existing.is_dir() && !entry.is_dir() {
                self.remove_subtree(&entry.path.clone(), false);
            }
        }
        self.entries.insert(entry.path.clone(), entry);
    }

    fn ensure_parents(&mut self, p: &str) {
        let parents: Vec<String> = path::ancestors(p).map(str::to_string).collect();
        for parent in parents.into_iter().rev() {
            match self.entries.get(&parent) {
                Some(e) if e.is_dir() => {}
                _ => {
                    self.entries
                        .insert(parent.clone(), FileEntry::directory(parent));
                }
            }
        }
    }

    /// Removes everything strictly below `dir`, and `dir` itself if
    /// `include_self`. Root is never removed.
    pub(crate) fn remove_subtree(&mut self, dir: &str, include_self: bool) {
        let prefix = if dir == "/" {
            "/".to_string()
        } else {
            format!("{dir}/")
        };
        let doomed: Vec<String> = self
            .entries
            .range(prefix.clone()..)
            .take_while(|(k, _)| k.starts_with(&prefix))
            .map(|(k, _)| k.clone())
            .collect();
        for k in doomed {
            if k != "/" {
                self.entries.remove(&k);
            }
        }
        if include_self && dir != "/" {
            self.entries.remove(dir);
        }
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn get(&self, path: &str) -> Option<&FileEntry> {
        self.entries.get(path)
    }

    pub fn contains(&self, path: &str) -> bool {
        self.entries.contains_key(path)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in bytewise path order.
    pub fn iter(&self) -> impl Iterator<Item = &FileEntry> {
        self.entries.values()
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn entries(&self) -> &BTreeMap<String, FileEntry> {
        &self.entries
    }

    pub fn regular_files(&self) -> impl Iterator<Item = &FileEntry> {
        self.iter().filter(|e| e.kind == FileKind::Regular)
    }

    /// Sum of regular-file sizes.
    pub fn total_size(&self) -> u64 {
        total_size(self)
    }

    /// Copies the entries for `paths` that exist in this inventory. No parent
    /// synthesis: the caller decides what the subset means.
    pub fn subset<'a>(&self, paths: impl IntoIterator<Item = &'a str>) -> FileSet {
        let entries = paths
            .into_iter()
            .filter_map(|p| self.entries.get(p).map(|e| (p.to_string(), e.clone())))
            .collect();
        FileSet {
            origin: Origin::Derived,
            entries,
        }
    }

    /// Every entry name under directory `dir` (direct children only).
    pub fn children<'a>(&'a self, dir: &str) -> impl Iterator<Item = &'a FileEntry> + 'a {
        let prefix = if dir == "/" {
            "/".to_string()
        } else {
            format!("{dir}/")
        };
        let plen = prefix.len();
        self.entries
            .range(prefix.clone()..)
            .take_while(move |(k, _)| k.starts_with(&prefix))
            .filter(move |(k, _)| k.len() > plen && !k[plen..].contains('/'))
            .map(|(_, e)| e)
    }

    /// Walks `raw` component by component, following symlinks found in
    /// intermediate components. The final component is looked up but not
    /// followed. Returns `None` if some component is missing, a non-final
    /// component is not a directory, or the walk exceeds 40 symlink hops.
    pub fn resolve(&self, raw: &str) -> Option<Resolution> {
        let mut links = Vec::new();
        let mut pending: Vec<String> = path::absolute(raw)
            .split('/')
            .filter(|s| !s.is_empty())
            .rev()
            .map(str::to_string)
            .collect();
        let mut current = "/".to_string();
        let mut hops = 0;
        while let Some(component) = pending.pop() {
            if component == ".." {
                current = path::parent(&current).unwrap_or("/").to_string();
                continue;
            }
            if component == "." {
                continue;
            }
            let candidate = path::join(&current, &component);
            let entry = self.entries.get(&candidate)?;
            let is_last = pending.is_empty();
            match entry.kind {
                FileKind::Symlink if !is_last => {
                    hops += 1;
                    if hops > MAX_LINK_HOPS {
                        return None;
                    }
                    links.push(candidate.clone());
                    let target = entry.link_target.as_deref().unwrap_or("");
                    if target.starts_with('/') {
                        current = "/".to_string();
                    }
                    for seg in target.split('/').filter(|s| !s.is_empty()).rev() {
                        pending.push(seg.to_string());
                    }
                }
                FileKind::Directory => current = candidate,
                _ if is_last => current = candidate,
                _ => return None,
            }
        }
        Some(Resolution {
            path: current,
            links,
        })
    }

    /// Resolves the target of symlink entry `link` (relative to the link's
    /// directory), following intermediate symlinks. `None` for dangling links.
    pub fn resolve_link_target(&self, link: &FileEntry) -> Option<Resolution> {
        let target = link.link_target.as_deref()?;
        let dir = path::parent(&link.path).unwrap_or("/");
        // `..` is applied to the physical directory reached so far, so the raw
        // join is resolved rather than a lexically normalized one.
        let raw = if target.starts_with('/') {
            target.to_string()
        } else {
            format!("{dir}/{target}")
        };
        self.resolve(&raw)
    }

    /// Parent-closure check: every non-root entry's parent exists and is a
    /// directory.
    pub fn is_parent_closed(&self) -> bool {
        self.entries.keys().all(|p| match path::parent(p) {
            None => true,
            Some(parent) => self.entries.get(parent).is_some_and(FileEntry::is_dir),
        })
    }
}

/// Sum of `size` over regular entries.
pub fn total_size(fs: &FileSet) -> u64 {
    fs.regular_files().map(|e| e.size).sum()
}
