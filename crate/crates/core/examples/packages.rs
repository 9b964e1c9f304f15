//! Detects one APT and one PIP package from metadata held in memory and
//! prints their bloat degrees.

use std::collections::BTreeMap;

use anyhow::Result;
use bloatlens::fs::{FileEntry, FileSet, Origin};
use bloatlens::packages::{detect_packages, package_metrics, quartiles_by_manager, Rules};
use bloatlens::Diagnostics;

const STATUS: &str = "Package: zlib1g
Status: install ok installed
Architecture: amd64
Version: 1:1.2.11.dfsg-2
Depends: libc6 (>= 2.14)

";

const SITE: &str = "/usr/lib/python3/site-packages";

fn main() -> Result<()> {
    let dist = format!("{SITE}/six-1.16.0.dist-info");
    let fs = FileSet::from_entries(
        Origin::Derived,
        [
            FileEntry::regular("/var/lib/dpkg/status", STATUS.len() as u64),
            FileEntry::regular("/var/lib/dpkg/info/zlib1g:amd64.list", 64),
            FileEntry::regular("/lib/x86_64-linux-gnu/libz.so.1.2.11", 110_000),
            FileEntry::regular("/usr/share/doc/zlib1g/copyright", 2_000),
            FileEntry::directory(dist.clone()),
            FileEntry::regular(format!("{dist}/METADATA"), 40),
            FileEntry::regular(format!("{dist}/RECORD"), 120),
            FileEntry::regular(format!("{SITE}/six.py"), 34_000),
        ],
    );
    let mut files = BTreeMap::new();
    files.insert("/var/lib/dpkg/status".to_string(), STATUS.as_bytes().to_vec());
    files.insert(
        "/var/lib/dpkg/info/zlib1g:amd64.list".to_string(),
        b"/lib/x86_64-linux-gnu/libz.so.1.2.11\n/usr/share/doc/zlib1g/copyright\n".to_vec(),
    );
    files.insert(format!("{dist}/METADATA"), b"Name: six\nVersion: 1.16.0\n".to_vec());
    files.insert(
        format!("{dist}/RECORD"),
        b"six.py,sha256=x,34000\nsix-1.16.0.dist-info/METADATA,,\nsix-1.16.0.dist-info/RECORD,,\n".to_vec(),
    );

    let mut diag = Diagnostics::new();
    let catalog = detect_packages(&fs, &files, &Rules::bundled(), &mut diag);
    // Pretend only libz itself was used.
    let bloat = fs.subset(fs.paths().filter(|p| !p.contains("libz")));
    let metrics = package_metrics(&catalog, &bloat);
    for m in &metrics {
        println!("{:<24} {:>7} bytes  {} files  d_p={:.3}", m.key.to_string(), m.size, m.files, m.d_p);
    }
    for (mgr, q) in quartiles_by_manager(&metrics) {
        println!("{}: {q:?}", mgr.as_str());
    }
    Ok(())
}
