//! Computes the retained set and bloat degree for a small inventory.

use anyhow::Result;
use bloatlens::debloat::{debloat, KeepList};
use bloatlens::fs::{FileEntry, FileSet, Origin};
use bloatlens::trace::AccessSet;
use bloatlens::Diagnostics;

fn main() -> Result<()> {
    let fs = FileSet::from_entries(
        Origin::Derived,
        [
            FileEntry::directory("/usr/lib"),
            FileEntry::regular("/usr/lib/libssl.so.1.1", 600_000),
            FileEntry::symlink("/usr/lib/libssl.so", "libssl.so.1.1"),
            FileEntry::regular("/usr/lib/libz.so.1", 100_000),
            FileEntry::regular("/usr/share/doc/README", 20_000),
            FileEntry::regular("/usr/bin/app", 250_000),
            FileEntry::regular("/etc/app.conf", 300),
        ],
    );
    // The workload opened the unversioned symlink, so its target stays too.
    let access = AccessSet::from_paths(["/usr/bin/app", "/usr/lib/libssl.so", "/etc/app.conf"]);
    let keep = KeepList::new(["/etc/**"])?;
    let r = debloat(&fs, &access, &keep, &mut Diagnostics::new())?;

    println!("retained:");
    for p in r.retained.paths() {
        println!("  {p}");
    }
    println!("bloat:");
    for p in r.bloat.paths() {
        println!("  {p}");
    }
    println!("s_c={} s_c'={} d_c={:.4}", r.s_c, r.s_c_prime, r.d_c);
    Ok(())
}
