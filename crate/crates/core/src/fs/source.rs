use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::layers::{read_layer, MemberKind};
use super::{load_layers, load_rootfs, load_tar, FileKind, FileSet};
use crate::diag::Diagnostics;
use crate::error::{Error, Result};

/// Where a container filesystem comes from. Used both to build the inventory
/// and later to pull file contents (package metadata, materialization).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "paths", rename_all = "kebab-case")]
pub enum ImageSource {
    Rootfs(PathBuf),
    Tar(PathBuf),
    Layers(Vec<PathBuf>),
}

fn open(p: &Path) -> Result<File> {
    File::open(p).map_err(|e| Error::io(p, e))
}

impl ImageSource {
    pub fn load(&self, diag: &mut Diagnostics) -> Result<FileSet> {
        match self {
            ImageSource::Rootfs(dir) => load_rootfs(dir, diag),
            ImageSource::Tar(p) => load_tar(open(p)?, diag),
            ImageSource::Layers(ps) => {
                let files = ps.iter().map(|p| open(p)).collect::<Result<Vec<_>>>()?;
                load_layers(files, diag)
            }
        }
    }

    /// Host paths of every input file or directory, in order.
    pub fn input_paths(&self) -> Vec<&Path> {
        match self {
            ImageSource::Rootfs(p) | ImageSource::Tar(p) => vec![p.as_path()],
            ImageSource::Layers(ps) => ps.iter().map(PathBuf::as_path).collect(),
        }
    }

    /// Streams the contents of every regular file of `fs` selected by `wanted`.
    /// For layered sources a path may be delivered more than once (once per
    /// layer that writes it); the last delivery is the visible content.
    pub fn for_each_regular(
        &self,
        fs: &FileSet,
        wanted: &dyn Fn(&str) -> bool,
        diag: &mut Diagnostics,
        mut sink: impl FnMut(&str, &mut dyn Read) -> Result<()>,
    ) -> Result<()> {
        let is_wanted = |p: &str| wanted(p) && fs.get(p).is_some_and(|e| e.kind == FileKind::Regular);
        match self {
            ImageSource::Rootfs(dir) => {
                for entry in fs.regular_files().filter(|e| wanted(&e.path)) {
                    let host = dir.join(&entry.path[1..]);
                    let mut f = match File::open(&host) {
                        Ok(f) => f,
                        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                            return Err(Error::MissingSource(entry.path.clone()))
                        }
                        Err(e) => return Err(Error::io(host, e)),
                    };
                    sink(&entry.path, &mut f)?;
                }
                Ok(())
            }
            ImageSource::Tar(p) => stream_layer(0, p, &is_wanted, diag, &mut sink),
            ImageSource::Layers(ps) => {
                for (idx, p) in ps.iter().enumerate() {
                    stream_layer(idx, p, &is_wanted, diag, &mut sink)?;
                }
                Ok(())
            }
        }
    }

    /// Reads the given regular files fully into memory. Paths that are not
    /// regular files of `fs` are silently absent from the result.
    pub fn read_files(
        &self,
        fs: &FileSet,
        paths: &BTreeSet<String>,
        diag: &mut Diagnostics,
    ) -> Result<BTreeMap<String, Vec<u8>>> {
        let mut out = BTreeMap::new();
        self.for_each_regular(fs, &|p| paths.contains(p), diag, |p, r| {
            let mut buf = Vec::new();
            r.read_to_end(&mut buf).map_err(|e| Error::io(p, e))?;
            out.insert(p.to_string(), buf);
            Ok(())
        })?;
        Ok(out)
    }
}

fn stream_layer(
    idx: usize,
    layer: &Path,
    wanted: &dyn Fn(&str) -> bool,
    diag: &mut Diagnostics,
    sink: &mut dyn FnMut(&str, &mut dyn Read) -> Result<()>,
) -> Result<()> {
    // Hard links carry no data; their content is the target member's, which
    // appears earlier in the same archive. Collect them and serve them in a
    // second pass over this layer.
    let mut links: BTreeMap<String, Vec<String>> = BTreeMap::new();
    read_layer(idx, open(layer)?, diag, |m, data| match &m.kind {
        MemberKind::Regular { .. } if wanted(&m.path) => sink(&m.path, data),
        MemberKind::Hardlink { target } if wanted(&m.path) => {
            links.entry(target.clone()).or_default().push(m.path.clone());
            Ok(())
        }
        _ => Ok(()),
    })?;
    if links.is_empty() {
        return Ok(());
    }
    let mut pass_diag = Diagnostics::new();
    read_layer(idx, open(layer)?, &mut pass_diag, |m, data| {
        if let (MemberKind::Regular { .. }, Some(aliases)) = (&m.kind, links.get(&m.path)) {
            let mut buf = Vec::new();
            data.read_to_end(&mut buf).map_err(|e| Error::io(layer, e))?;
            for alias in aliases {
                sink(alias, &mut buf.as_slice())?;
            }
        }
        Ok(())
    })
}
