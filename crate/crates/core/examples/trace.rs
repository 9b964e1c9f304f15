//! Parses a short strace log. Run with a path to parse your own.

use std::io::BufReader;

use anyhow::Result;
use bloatlens::trace::{parse_trace, TraceOptions};
use bloatlens::Diagnostics;

const LOG: &str = r#"1000  execve("/usr/bin/python3", ["python3", "main.py"], 0x7ffd /* 8 vars */) = 0
1000  access("/etc/ld.so.preload", R_OK) = -1 ENOENT (No such file or directory)
1000  openat(AT_FDCWD, "/lib/x86_64-linux-gnu/libc.so.6", O_RDONLY|O_CLOEXEC) = 3
1000  chdir("/app") = 0
1000  openat(AT_FDCWD, "main.py", O_RDONLY) = 3
1000  openat(3, "../etc/app.conf", O_RDONLY) = 4
1000  clone(child_stack=NULL, flags=CLONE_CHILD_SETTID|SIGCHLD) = 1001
1001  stat("data/input.csv", {st_mode=S_IFREG|0644, st_size=10, ...}) = 0
1000  openat(AT_FDCWD, "/app/cache.pyc", O_RDONLY <unfinished ...>
1000  <... openat resumed>) = -1 ENOENT (No such file or directory)
"#;

fn main() -> Result<()> {
    let mut diag = Diagnostics::new();
    let opts = TraceOptions::default();
    let access = match std::env::args().nth(1) {
        Some(p) => parse_trace(BufReader::new(std::fs::File::open(p)?), &opts, &mut diag)?,
        None => parse_trace(LOG.as_bytes(), &opts, &mut diag)?,
    };
    for p in &access.paths {
        println!("{p}");
    }
    println!("{:?}", access.stats);
    for d in diag.records() {
        println!("{:?} {}: {}", d.level, d.stage, d.message);
    }
    Ok(())
}
