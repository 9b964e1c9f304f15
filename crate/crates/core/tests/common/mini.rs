//! The mini container run through the whole pipeline, shared between the
//! end-to-end tests and the acceptance binary.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use anyhow::{ensure, Context, Result};

use bloatlens::fs::{load_rootfs, FileKind, ImageSource};
use bloatlens::report::{run_pipeline, AnalysisBundle, PipelineConfig};
use bloatlens::vuln::VulnMatch;
use bloatlens::Diagnostics;

use super::*;

pub fn config(dir: &Path, root: &Path) -> PipelineConfig {
    let mut c = PipelineConfig::new(ImageSource::Rootfs(root.to_path_buf()), dir.join("trace.log"));
    c.vuln_report = Some(dir.join("grype.json"));
    c.out = Some(dir.join("out"));
    c.write_tar = true;
    c.container_id = Some("mini".into());
    c.timestamp = Some(FIXTURE_TIMESTAMP.into());
    c.path_base = Some(dir.to_path_buf());
    c
}

pub struct Run {
    _dir: tempfile::TempDir,
    pub dir: std::path::PathBuf,
    pub root: std::path::PathBuf,
    pub bundle: AnalysisBundle,
}

impl Drop for Run {
    fn drop(&mut self) {
        make_removable(&self.dir);
    }
}

pub fn run() -> Result<Run> {
    let tmp = tempfile::tempdir()?;
    let dir = tmp.path().to_path_buf();
    let root = build_mini(&dir)?;
    let bundle = run_pipeline(&config(&dir, &root))?;
    Ok(Run {
        _dir: tmp,
        dir,
        root,
        bundle,
    })
}

pub fn disk_size(root: &Path, p: &str) -> u64 {
    let m = fs::symlink_metadata(host(root, p)).unwrap();
    if m.file_type().is_file() {
        m.len()
    } else {
        0
    }
}

/// The removal rule applied to each match on its own.
pub fn oracle_removed(m: &VulnMatch, retained: &BTreeSet<String>, pkg_files: &BTreeMap<&str, Vec<String>>) -> bool {
    if !m.locations.is_empty() {
        return m.locations.iter().all(|l| !retained.contains(l));
    }
    let name = m.pkg_name.to_lowercase();
    match pkg_files.get(name.as_str()) {
        Some(files) => files.iter().all(|f| !retained.contains(f)),
        None => false,
    }
}

/// Compares `out/bundle.json` with the checked-in golden file, rewriting
/// it first when UPDATE_GOLDEN is set.
pub fn check_golden(r: &Run) -> Result<()> {
    let got = fs::read_to_string(r.dir.join("out/bundle.json"))?;
    let golden = fixtures_dir().join("mini/golden_bundle.json");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&golden, &got)?;
    }
    let want = fs::read_to_string(&golden).with_context(|| golden.display().to_string())?;
    ensure!(got == want, "bundle differs from {}", golden.display());
    Ok(())
}

/// Unpacks `out/debloated.tar` and loads it back, expecting the retained set.
pub fn check_tar_round_trip(r: &Run) -> Result<()> {
    let unpacked = r.dir.join("unpacked");
    fs::create_dir_all(&unpacked)?;
    let mut archive = tar::Archive::new(fs::File::open(r.dir.join("out/debloated.tar"))?);
    archive.set_preserve_permissions(true);
    archive.unpack(&unpacked)?;
    let back = load_rootfs(&unpacked, &mut Diagnostics::new())?;
    let retained = &r.bundle.debloat.retained;
    ensure!(back.len() == retained.len(), "{} entries back, {} retained", back.len(), retained.len());
    for e in retained.iter() {
        let b = back.get(&e.path).with_context(|| format!("{} missing", e.path))?;
        ensure!(b.same_shape(e), "{}: {b:?} vs {e:?}", e.path);
        if e.kind != FileKind::Symlink && e.path != "/" {
            ensure!(b.mode == e.mode, "{}: mode {:o} vs {:o}", e.path, b.mode, e.mode);
        }
    }
    Ok(())
}

pub fn tree_bytes(root: &Path) -> BTreeMap<String, Vec<u8>> {
    walkdir::WalkDir::new(root)
        .into_iter()
        .flatten()
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            let rel = e.path().strip_prefix(root).unwrap().to_string_lossy().into_owned();
            (rel, fs::read(e.path()).unwrap())
        })
        .collect()
}

/// Two fresh runs produce identical output trees.
pub fn check_deterministic() -> Result<()> {
    let a = run()?;
    let b = run()?;
    let (ta, tb) = (tree_bytes(&a.dir.join("out")), tree_bytes(&b.dir.join("out")));
    ensure!(
        ta.keys().eq(tb.keys()),
        "output file lists differ"
    );
    for (k, v) in &ta {
        ensure!(*v == tb[k], "{k} differs between runs");
    }
    ensure!(ta.contains_key("debloated.tar"), "no debloated.tar written");
    Ok(())
}
