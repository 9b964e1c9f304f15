use std::fs;
use std::os::unix::fs::{FileTypeExt, PermissionsExt};
use std::path::Path;

use super::{FileEntry, FileSet, Origin};
use crate::diag::Diagnostics;
use crate::error::{Error, Result};
use crate::path;

const STAGE: &str = "image-fs";

/// Walks an unpacked root filesystem. `dir` maps to `/`; symlinks are recorded
/// and never followed. Entries that cannot be inspected degrade to
/// [`FileKind::Other`] with a warning.
pub fn load_rootfs(dir: &Path, diag: &mut Diagnostics) -> Result<FileSet> {
    let meta = fs::metadata(dir).map_err(|e| Error::io(dir, e))?;
    if !meta.is_dir() {
        return Err(Error::Ingest {
            what: dir.display().to_string(),
            message: "not a directory".into(),
        });
    }
    let mut set = FileSet::new(Origin::RootfsDir);
    if let Some(root) = set.entries.get_mut("/") {
        root.mode = meta.permissions().mode() & 0o7777;
    }
    let top = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut stack = vec![("/".to_string(), top)];
    while let Some((parent, iter)) = stack.pop() {
        let mut subdirs = Vec::new();
        for dirent in iter {
            let dirent = match dirent {
                Ok(d) => d,
                Err(e) => {
                    diag.warn(STAGE, format!("error listing {parent}: {e}"));
                    continue;
                }
            };
            let name = dirent.file_name();
            let name = match name.to_str() {
                Some(n) => n.to_string(),
                None => {
                    diag.warn(
                        STAGE,
                        format!("non UTF-8 name under {parent} stored lossily"),
                    );
                    name.to_string_lossy().into_owned()
                }
            };
            let vpath = path::join(&parent, &name);
            let host = dirent.path();
            let entry = match fs::symlink_metadata(&host) {
                Ok(m) => {
                    let ft = m.file_type();
                    let mode = m.permissions().mode() & 0o7777;
                    if ft.is_dir() {
                        subdirs.push((vpath.clone(), host.clone()));
                        FileEntry::directory(&vpath).with_mode(mode)
                    } else if ft.is_symlink() {
                        match fs::read_link(&host) {
                            Ok(t) => FileEntry::symlink(&vpath, t.to_string_lossy()).with_mode(mode),
                            Err(e) => {
                                diag.warn(STAGE, format!("cannot read link {vpath}: {e}"));
                                FileEntry::other(&vpath)
                            }
                        }
                    } else if ft.is_file() {
                        FileEntry::regular(&vpath, m.len()).with_mode(mode)
                    } else {
                        if !(ft.is_fifo() || ft.is_socket() || ft.is_block_device() || ft.is_char_device()) {
                            diag.warn(STAGE, format!("unrecognised file type at {vpath}"));
                        }
                        FileEntry::other(&vpath).with_mode(mode)
                    }
                }
                Err(e) => {
                    diag.warn(STAGE, format!("cannot stat {vpath}: {e}"));
                    FileEntry::other(&vpath)
                }
            };
            set.entries.insert(vpath, entry);
        }
        for (vpath, host) in subdirs {
            match fs::read_dir(&host) {
                Ok(iter) => stack.push((vpath, iter)),
                Err(e) => diag.warn(STAGE, format!("cannot read directory {vpath}: {e}")),
            }
        }
    }
    debug_assert!(set.is_parent_closed());
    Ok(set)
}
