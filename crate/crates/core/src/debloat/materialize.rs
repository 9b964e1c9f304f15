//! Writing a debloated filesystem out as a directory or a tar.

use std::collections::BTreeSet;
use std::ffi::CString;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, Read};
use std::os::unix::fs::{symlink, PermissionsExt};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diag::Diagnostics;
use crate::error::{Error, Result};
use crate::fs::{FileKind, FileSet, ImageSource};

const STAGE: &str = "materialize";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Directory,
    Tar,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestLine {
    pub kind: FileKind,
    pub size: u64,
    pub path: String,
}

/// `<kind>\t<size>\t<path>` lines, sorted bytewise by path.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub lines: Vec<ManifestLine>,
}

impl Manifest {
    pub fn of(fs: &FileSet) -> Self {
        Self {
            lines: fs
                .iter()
                .map(|e| ManifestLine {
                    kind: e.kind,
                    size: e.size,
                    path: e.path.clone(),
                })
                .collect(),
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for l in &self.lines {
            let _ = writeln!(out, "{}\t{}\t{}", l.kind, l.size, l.path);
        }
        out
    }
}

fn host_path(root: &Path, p: &str) -> PathBuf {
    if p == "/" {
        root.to_path_buf()
    } else {
        root.join(&p[1..])
    }
}

fn mkfifo(p: &Path, mode: u32) -> io::Result<()> {
    let c = CString::new(p.as_os_str().as_encoded_bytes())
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
    // SAFETY: `c` is a valid NUL-terminated path for the duration of the call.
    if unsafe { libc::mkfifo(c.as_ptr(), mode as libc::mode_t) } == 0 {
        Ok(())
    } else {
        Err(io::Error::last_os_error())
    }
}

/// Writes exactly the entries of `retained` under directory `out`, which must
/// not exist yet or be empty. Non-regular, non-link entries become FIFOs.
fn write_tree(retained: &FileSet, source: &ImageSource, out: &Path, diag: &mut Diagnostics) -> Result<()> {
    if out.exists() {
        let mut it = fs::read_dir(out).map_err(|e| Error::io(out, e))?;
        if it.next().is_some() {
            return Err(Error::Contract(format!(
                "output directory {} is not empty",
                out.display()
            )));
        }
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    for e in retained.iter().filter(|e| e.is_dir() && e.path != "/") {
        let hp = host_path(out, &e.path);
        fs::create_dir_all(&hp).map_err(|err| Error::io(&hp, err))?;
    }

    let mut written: BTreeSet<String> = BTreeSet::new();
    source.for_each_regular(retained, &|_| true, diag, |p, data| {
        let hp = host_path(out, p);
        let mut f = File::create(&hp).map_err(|e| Error::io(&hp, e))?;
        io::copy(data, &mut f).map_err(|e| Error::io(&hp, e))?;
        written.insert(p.to_string());
        Ok(())
    })?;
    for e in retained.iter() {
        let hp = host_path(out, &e.path);
        match e.kind {
            FileKind::Regular => {
                if !written.contains(&e.path) {
                    return Err(Error::MissingSource(e.path.clone()));
                }
                let len = fs::metadata(&hp).map_err(|err| Error::io(&hp, err))?.len();
                if len != e.size {
                    diag.warn(
                        STAGE,
                        format!("{}: source has {len} bytes, inventory says {}", e.path, e.size),
                    );
                }
            }
            FileKind::Symlink => {
                let target = e.link_target.as_deref().unwrap_or("");
                symlink(target, &hp).map_err(|err| Error::io(&hp, err))?;
            }
            FileKind::Other => mkfifo(&hp, e.mode).map_err(|err| Error::io(&hp, err))?,
            FileKind::Directory => {}
        }
    }
    // Directories last and deepest first, so read-only modes do not block writes.
    for e in retained.iter().filter(|e| matches!(e.kind, FileKind::Regular | FileKind::Other)) {
        let hp = host_path(out, &e.path);
        fs::set_permissions(&hp, fs::Permissions::from_mode(e.mode)).map_err(|err| Error::io(&hp, err))?;
    }
    for e in retained.iter().filter(|e| e.is_dir()).collect::<Vec<_>>().into_iter().rev() {
        let hp = host_path(out, &e.path);
        fs::set_permissions(&hp, fs::Permissions::from_mode(e.mode)).map_err(|err| Error::io(&hp, err))?;
    }
    Ok(())
}

fn tar_name(p: &str, dir: bool) -> String {
    if p == "/" {
        "./".to_string()
    } else if dir {
        format!("{}/", &p[1..])
    } else {
        p[1..].to_string()
    }
}

fn write_tar(retained: &FileSet, staged: &Path, out: &Path) -> Result<()> {
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = File::create(out).map_err(|e| Error::io(out, e))?;
    let mut builder = tar::Builder::new(file);
    let io_err = |e: io::Error| Error::io(out, e);
    for e in retained.iter() {
        let mut h = tar::Header::new_gnu();
        h.set_mode(e.mode);
        h.set_mtime(0);
        h.set_uid(0);
        h.set_gid(0);
        let name = tar_name(&e.path, e.is_dir());
        match e.kind {
            FileKind::Directory => {
                h.set_entry_type(tar::EntryType::Directory);
                h.set_size(0);
                builder.append_data(&mut h, &name, io::empty()).map_err(io_err)?;
            }
            FileKind::Regular => {
                let hp = host_path(staged, &e.path);
                let mut f = File::open(&hp).map_err(|err| Error::io(&hp, err))?;
                let len = f.metadata().map_err(|err| Error::io(&hp, err))?.len();
                h.set_entry_type(tar::EntryType::Regular);
                h.set_size(len);
                builder
                    .append_data(&mut h, &name, (&mut f).take(len))
                    .map_err(io_err)?;
            }
            FileKind::Symlink => {
                h.set_entry_type(tar::EntryType::Symlink);
                h.set_size(0);
                let target = e.link_target.as_deref().unwrap_or("");
                builder.append_link(&mut h, &name, target).map_err(io_err)?;
            }
            FileKind::Other => {
                h.set_entry_type(tar::EntryType::Fifo);
                h.set_size(0);
                builder.append_data(&mut h, &name, io::empty()).map_err(io_err)?;
            }
        }
    }
    builder.into_inner().map_err(io_err)?;
    Ok(())
}

/// Writes the retained entries, with their original modes and contents from
/// `source`, as a directory tree or a tar at `out`. Fails with
/// [`Error::MissingSource`] if the source lacks a retained regular file.
pub fn materialize(
    retained: &FileSet,
    source: &ImageSource,
    out: &Path,
    format: OutputFormat,
    diag: &mut Diagnostics,
) -> Result<Manifest> {
    match format {
        OutputFormat::Directory => write_tree(retained, source, out, diag)?,
        OutputFormat::Tar => {
            let parent = out
                .parent()
                .filter(|p| !p.as_os_str().is_empty())
                .unwrap_or(Path::new("."));
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            let staging = tempfile::tempdir_in(parent).map_err(|e| Error::io(parent, e))?;
            let root = staging.path().join("root");
            write_tree(retained, source, &root, diag)?;
            write_tar(retained, &root, out)?;
            // Staged directories may be read-only; make them removable.
            for e in retained.iter().filter(|e| e.is_dir()) {
                let _ = fs::set_permissions(host_path(&root, &e.path), fs::Permissions::from_mode(0o755));
            }
        }
    }
    Ok(Manifest::of(retained))
}
