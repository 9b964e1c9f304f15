//! Partitions a scanner report into removed and surviving CVEs.

use anyhow::Result;
use bloatlens::fs::{FileEntry, FileSet, Origin};
use bloatlens::packages::Catalog;
use bloatlens::vuln::{load_report, severity_table, surviving_cves};
use bloatlens::Diagnostics;

const REPORT: &str = r#"{
  "matches": [
    {
      "vulnerability": { "id": "CVE-2022-0001", "severity": "High" },
      "artifact": { "name": "openssl", "version": "1.1.1k",
                    "locations": [{ "path": "/usr/lib/libssl.so.1.1" }] }
    },
    {
      "vulnerability": { "id": "CVE-2022-0002", "severity": "moderate" },
      "artifact": { "name": "docs", "version": "1.0",
                    "locations": [{ "path": "/usr/share/doc/README" }] }
    },
    {
      "vulnerability": { "id": "CVE-2022-0003", "severity": "Low" },
      "artifact": { "name": "zlib", "version": "1.2.11",
                    "locations": [{ "path": "/usr/lib/libz.so.1" }] }
    }
  ]
}"#;

fn main() -> Result<()> {
    let mut diag = Diagnostics::new();
    let matches = load_report(REPORT, &mut diag)?;
    let bloat = FileSet::from_entries(
        Origin::Derived,
        [
            FileEntry::regular("/usr/share/doc/README", 20_000),
            FileEntry::regular("/usr/lib/libz.so.1", 100_000),
        ],
    );
    let diff = surviving_cves(&matches, &bloat, &Catalog::new(vec![]), &mut diag);
    for m in &diff.removed {
        println!("removed  {} {}", m.cve_id, m.severity.as_str());
    }
    for m in &diff.retained {
        println!("retained {} {}", m.cve_id, m.severity.as_str());
    }
    print!("{}", severity_table(&diff).to_csv());
    Ok(())
}
