//! Bloat degrees and CVE reductions from bare before/after numbers, for
//! checking published figures without the images themselves.

use anyhow::Result;
use bloatlens::debloat::container_bloat_degree;
use bloatlens::vuln::{Severity, SeverityRow, SeverityTable};

fn main() -> Result<()> {
    let gb = 1e9;
    for (name, before, after) in [("tf-gpu", 6.34, 2.22), ("torch", 8.52, 1.74), ("jax", 15.10, 3.28)] {
        let d = container_bloat_degree((before * gb) as u64, (after * gb) as u64)?;
        println!("{name:<8} {before:>6.2} GB -> {after:>5.2} GB  d_c = {d:.3}");
    }

    let counts = [(0, 0), (51, 0), (531, 1), (239, 7), (66, 0)];
    let rows = Severity::ALL
        .iter()
        .zip(counts)
        .map(|(&severity, (before, after))| SeverityRow { severity, before, after })
        .collect();
    print!("{}", SeverityTable::from_rows(rows).to_csv());
    Ok(())
}
