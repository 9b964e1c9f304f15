//! Flat tar and layered (OCI) tar ingestion.
//!
//! Layer semantics follow the OCI image layer rules: within layer `k`, a member
//! named `.wh.<name>` deletes `<name>` (and anything below it) from the union
//! of layers `< k`, and `.wh..wh..opq` in a directory hides every lower-layer
//! child of that directory. Whiteout members never appear in the result.
//! Whiteouts only affect lower layers, so they are applied before the layer's
//! own members regardless of their position in the archive.

use std::io::{BufRead, BufReader, Read};

use flate2::read::GzDecoder;

use super::{FileEntry, FileKind, FileSet, Origin};
use crate::diag::Diagnostics;
use crate::error::{Error, Result};
use crate::path;

const STAGE: &str = "image-fs";
const WHITEOUT_PREFIX: &str = ".wh.";
const OPAQUE_MARKER: &str = ".wh..wh..opq";
const BLOCK: u64 = 512;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MemberKind {
    Regular { size: u64 },
    Directory,
    Symlink { target: String },
    /// Hard link to another member, by normalized absolute path.
    Hardlink { target: String },
    Other,
}

/// One archive member with its path normalized to an absolute container path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerMember {
    pub path: String,
    pub kind: MemberKind,
    pub mode: u32,
}

impl LayerMember {
    fn whiteout(&self) -> Option<Whiteout> {
        let name = path::file_name(&self.path);
        let dir = path::parent(&self.path)?;
        if name == OPAQUE_MARKER {
            Some(Whiteout::Opaque(dir.to_string()))
        } else {
            name.strip_prefix(WHITEOUT_PREFIX)
                .filter(|n| !n.is_empty())
                .map(|n| Whiteout::Remove(path::join(dir, n)))
        }
    }
}

enum Whiteout {
    Remove(String),
    Opaque(String),
}

fn maybe_gunzip<'a, R: Read + 'a>(reader: R) -> std::io::Result<Box<dyn Read + 'a>> {
    let mut buf = BufReader::new(reader);
    let head = buf.fill_buf()?;
    if head.len() >= 2 && head[0] == 0x1f && head[1] == 0x8b {
        Ok(Box::new(GzDecoder::new(buf)))
    } else {
        Ok(Box::new(buf))
    }
}

/// Streams the members of one (optionally gzip-wrapped) tar. `visit` receives
/// each member with a reader over its data. Byte offsets in errors refer to
/// the uncompressed stream.
pub fn read_layer<R: Read>(
    layer: usize,
    reader: R,
    diag: &mut Diagnostics,
    mut visit: impl FnMut(&LayerMember, &mut dyn Read) -> Result<()>,
) -> Result<()> {
    let malformed = |offset: u64, message: String| Error::MalformedTar {
        layer,
        offset,
        message,
    };
    let stream = maybe_gunzip(reader).map_err(|e| malformed(0, e.to_string()))?;
    let mut archive = tar::Archive::new(stream);
    let entries = archive.entries().map_err(|e| malformed(0, e.to_string()))?;
    let mut next_offset = 0u64;
    for entry in entries {
        let mut entry = entry.map_err(|e| malformed(next_offset, e.to_string()))?;
        let header_pos = entry.raw_header_position();
        let data_pos = entry.raw_file_position();
        let stored = entry.header().entry_size().unwrap_or(0);
        next_offset = data_pos + stored.div_ceil(BLOCK) * BLOCK;

        let raw_path = entry
            .path()
            .map_err(|e| malformed(header_pos, e.to_string()))?
            .to_string_lossy()
            .into_owned();
        let normalized = path::normalize("/", &raw_path);
        if normalized.clamped {
            diag.warn(
                STAGE,
                format!("layer {layer}: member {raw_path:?} escapes the root; clamped"),
            );
        }
        let header = entry.header();
        let mode = header.mode().unwrap_or(0o644) & 0o7777;
        let etype = header.entry_type();
        let link_name = || -> Result<String> {
            let l = entry
                .link_name()
                .map_err(|e| malformed(header_pos, e.to_string()))?
                .ok_or_else(|| malformed(header_pos, "link without target".into()))?;
            Ok(l.to_string_lossy().into_owned())
        };
        let kind = match etype {
            tar::EntryType::Regular | tar::EntryType::Continuous | tar::EntryType::GNUSparse => {
                MemberKind::Regular { size: entry.size() }
            }
            tar::EntryType::Directory => MemberKind::Directory,
            tar::EntryType::Symlink => MemberKind::Symlink {
                target: link_name()?,
            },
            tar::EntryType::Link => MemberKind::Hardlink {
                target: path::absolute(&link_name()?),
            },
            tar::EntryType::Char | tar::EntryType::Block | tar::EntryType::Fifo => MemberKind::Other,
            other => {
                diag.info(
                    STAGE,
                    format!("layer {layer}: skipping member {raw_path:?} of type {other:?}"),
                );
                continue;
            }
        };
        let member = LayerMember {
            path: normalized.path,
            kind,
            mode,
        };
        visit(&member, &mut entry)?;
    }
    Ok(())
}

fn collect_members<R: Read>(layer: usize, reader: R, diag: &mut Diagnostics) -> Result<Vec<LayerMember>> {
    let mut members = Vec::new();
    read_layer(layer, reader, diag, |m, _| {
        members.push(m.clone());
        Ok(())
    })?;
    Ok(members)
}

/// Applies one layer's members on top of `union`.
fn apply_layer(union: &mut FileSet, layer: usize, members: &[LayerMember], diag: &mut Diagnostics) {
    for member in members {
        match member.whiteout() {
            Some(Whiteout::Opaque(dir)) => union.remove_subtree(&dir, false),
            Some(Whiteout::Remove(target)) => union.remove_subtree(&target, true),
            None => {}
        }
    }
    for member in members.iter().filter(|m| m.whiteout().is_none()) {
        let entry = match &member.kind {
            MemberKind::Regular { size } => FileEntry::regular(&member.path, *size),
            MemberKind::Directory => {
                if let Some(existing) = union.entries.get_mut(&member.path) {
                    if existing.is_dir() {
                        existing.mode = member.mode;
                        continue;
                    }
                }
                FileEntry::directory(&member.path)
            }
            MemberKind::Symlink { target } => FileEntry::symlink(&member.path, target),
            MemberKind::Hardlink { target } => match union.get(target) {
                Some(t) => {
                    let mut e = t.clone();
                    e.path = member.path.clone();
                    e
                }
                None => {
                    diag.warn(
                        STAGE,
                        format!(
                            "layer {layer}: hard link {} points at missing {target}",
                            member.path
                        ),
                    );
                    FileEntry::regular(&member.path, 0)
                }
            },
            MemberKind::Other => FileEntry::other(&member.path),
        };
        if member.path == "/" {
            if let Some(root) = union.entries.get_mut("/") {
                root.mode = member.mode;
            }
            if entry.kind != FileKind::Directory {
                diag.warn(STAGE, format!("layer {layer}: non-directory root member ignored"));
            }
            continue;
        }
        union.insert(entry.with_mode(member.mode));
    }
}

/// Loads a single tar as a flat filesystem. Whiteout members are interpreted
/// exactly as in a one-layer stack, so this equals `load_layers` of one layer.
pub fn load_tar<R: Read>(reader: R, diag: &mut Diagnostics) -> Result<FileSet> {
    let members = collect_members(0, reader, diag)?;
    let mut union = FileSet::new(Origin::FlatTar);
    apply_layer(&mut union, 0, &members, diag);
    Ok(union)
}

/// Unions an ordered, base-first stack of layer tars.
pub fn load_layers<R: Read>(layers: impl IntoIterator<Item = R>, diag: &mut Diagnostics) -> Result<FileSet> {
    let mut union = FileSet::new(Origin::Layered);
    for (idx, reader) in layers.into_iter().enumerate() {
        let members = collect_members(idx, reader, diag)?;
        apply_layer(&mut union, idx, &members, diag);
    }
    Ok(union)
}
