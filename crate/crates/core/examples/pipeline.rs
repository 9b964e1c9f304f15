//! Runs the whole pipeline over a rootfs and trace, writing the bundle,
//! tables and plot data.
//!
//! ```text
//! cargo run --example pipeline -- <rootfs-dir> <trace.log> <out-dir> [grype.json]
//! ```
//!
//! With no arguments a tiny rootfs is generated in a temporary directory.

use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use bloatlens::fs::ImageSource;
use bloatlens::report::{run_pipeline, PipelineConfig};

fn demo_inputs(dir: &std::path::Path) -> Result<(PathBuf, PathBuf)> {
    let root = dir.join("rootfs");
    fs::create_dir_all(root.join("usr/bin"))?;
    fs::create_dir_all(root.join("usr/share/doc"))?;
    fs::write(root.join("usr/bin/app"), vec![0u8; 8192])?;
    fs::write(root.join("usr/share/doc/manual.txt"), vec![b'x'; 65536])?;
    let trace = dir.join("trace.log");
    fs::write(
        &trace,
        "1 execve(\"/usr/bin/app\", [\"app\"], 0x0 /* 0 vars */) = 0\n",
    )?;
    Ok((root, trace))
}

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let tmp = tempfile::tempdir()?;
    let (root, trace, out, report) = match args.as_slice() {
        [root, trace, out, rest @ ..] => (root.into(), trace.into(), PathBuf::from(out), rest.first().map(PathBuf::from)),
        [] => {
            let (root, trace) = demo_inputs(tmp.path())?;
            (root, trace, tmp.path().join("out"), None)
        }
        _ => anyhow::bail!("usage: pipeline <rootfs-dir> <trace.log> <out-dir> [grype.json]"),
    };

    let mut config = PipelineConfig::new(ImageSource::Rootfs(root), trace);
    config.vuln_report = report;
    config.out = Some(out.clone());
    let bundle = run_pipeline(&config).context("pipeline failed")?;

    println!("container {}", bundle.container_id);
    println!("d_c = {:.4}", bundle.debloat.d_c);
    println!("{} packages", bundle.packages.catalog.len());
    for entry in walk(&out)? {
        println!("  {}", entry.display());
    }
    Ok(())
}

fn walk(dir: &std::path::Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir)? {
        let p = e?.path();
        if p.is_dir() {
            out.extend(walk(&p)?);
        } else {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}
