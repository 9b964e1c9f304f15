//! Shared fixtures for the integration tests.
#![allow(dead_code)]

pub mod closure;
pub mod graph;
pub mod mini;
pub mod props;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::os::unix::fs::{symlink, PermissionsExt};
use std::path::{Path, PathBuf};

use anyhow::Result;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const SITE: &str = "/usr/local/lib/python3.8/site-packages";
pub const FIXTURE_TIMESTAMP: &str = "2021-06-01T00:00:00Z";

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Filler bytes of a given length.
pub fn blob(len: usize) -> Vec<u8> {
    (0..len).map(|i| (i % 251) as u8).collect()
}

enum Node {
    File(Vec<u8>, u32),
    Dir(u32),
    Link(&'static str),
}

const DPKG_STATUS: &str = "\
Package: libfoo1
Status: install ok installed
Priority: optional
Architecture: amd64
Multi-Arch: same
Version: 1.2-1
Provides: libfoo-abi-1
Depends: libc6 (>= 2.17)
Description: foo runtime library
 Shared objects for the foo toolkit.

Package: footool
Status: install ok installed
Priority: optional
Architecture: amd64
Version: 2.0-3
Depends: libfoo-abi-1 | libfoo0 (>= 1.0), python3.8:any
Description: command-line front end for foo
";

const LIBFOO_LIST: &str = "/.
/usr
/usr/lib
/usr/lib/x86_64-linux-gnu
/usr/lib/x86_64-linux-gnu/libfoo.so.1.2
/usr/share
/usr/share/doc
/usr/share/doc/libfoo1
/usr/share/doc/libfoo1/copyright
/usr/lib/x86_64-linux-gnu/libfoo.so.1
";

const FOOTOOL_LIST: &str = "/.
/usr
/usr/bin
/usr/bin/foo
/usr/share/man/man1/foo.1.gz
";

const REQUESTS_METADATA: &str = "Metadata-Version: 2.1
Name: requests
Version: 2.25.1
Summary: Python HTTP for Humans.
Requires-Dist: urllib3 (<1.27,>=1.21.1)
Requires-Dist: chardet (<5,>=3.0.2)
Requires-Dist: PySocks (!=1.5.7,>=1.5.6) ; extra == 'socks'

long description
";

const REQUESTS_RECORD: &str = "requests/__init__.py,sha256=x,1200
requests/api.py,sha256=x,800
requests/models.py,sha256=x,3000
requests-2.25.1.dist-info/METADATA,sha256=x,
requests-2.25.1.dist-info/RECORD,,
";

const URLLIB3_METADATA: &str = "Metadata-Version: 2.1
Name: urllib3
Version: 1.26.4
Requires-Dist: brotlipy (>=0.6.0) ; extra == 'brotli'
";

const URLLIB3_RECORD: &str = "urllib3/__init__.py,sha256=x,900
urllib3/poolmanager.py,sha256=x,2000
urllib3/contrib/socks.py,sha256=x,600
urllib3-1.26.4.dist-info/METADATA,,
urllib3-1.26.4.dist-info/RECORD,,
";

const CUDATOOLKIT_JSON: &str = r#"{
  "name": "cudatoolkit",
  "version": "11.0.221",
  "build": "h6bb024c_0",
  "files": ["lib/libcudart.so.11.0", "lib/libcublas.so.11"],
  "depends": ["__glibc >=2.17,<3.0.a0"]
}
"#;

fn mini_nodes() -> Vec<(String, Node)> {
    let f = |len: usize| Node::File(blob(len), 0o644);
    let x = |len: usize| Node::File(blob(len), 0o755);
    let t = |s: &str| Node::File(s.as_bytes().to_vec(), 0o644);
    let mut v: Vec<(String, Node)> = vec![
        ("/etc".into(), Node::Dir(0o755)),
        ("/etc/passwd".into(), f(100)),
        ("/app".into(), Node::Dir(0o755)),
        ("/app/main.py".into(), f(500)),
        ("/data".into(), Node::Dir(0o755)),
        ("/data/cache.bin".into(), f(20000)),
        ("/proc".into(), Node::Dir(0o555)),
        ("/tmp".into(), Node::Dir(0o1777)),
        ("/lib".into(), Node::Link("usr/lib")),
        ("/usr".into(), Node::Dir(0o755)),
        ("/usr/bin".into(), Node::Dir(0o755)),
        ("/usr/bin/python3.8".into(), x(6000)),
        ("/usr/bin/foo".into(), x(2500)),
        ("/usr/lib".into(), Node::Dir(0o755)),
        ("/usr/lib/x86_64-linux-gnu".into(), Node::Dir(0o755)),
        ("/usr/lib/x86_64-linux-gnu/libfoo.so.1.2".into(), f(4000)),
        ("/usr/lib/x86_64-linux-gnu/libfoo.so.1".into(), Node::Link("libfoo.so.1.2")),
        ("/usr/share".into(), Node::Dir(0o755)),
        ("/usr/share/doc".into(), Node::Dir(0o755)),
        ("/usr/share/doc/libfoo1".into(), Node::Dir(0o755)),
        ("/usr/share/doc/libfoo1/copyright".into(), f(300)),
        ("/usr/share/man".into(), Node::Dir(0o755)),
        ("/usr/share/man/man1".into(), Node::Dir(0o755)),
        ("/usr/share/man/man1/foo.1.gz".into(), f(700)),
        ("/var".into(), Node::Dir(0o755)),
        ("/var/lib".into(), Node::Dir(0o755)),
        ("/var/lib/dpkg".into(), Node::Dir(0o755)),
        ("/var/lib/dpkg/status".into(), t(DPKG_STATUS)),
        ("/var/lib/dpkg/info".into(), Node::Dir(0o755)),
        ("/var/lib/dpkg/info/libfoo1:amd64.list".into(), t(LIBFOO_LIST)),
        ("/var/lib/dpkg/info/footool.list".into(), t(FOOTOOL_LIST)),
        ("/usr/local".into(), Node::Dir(0o755)),
        ("/usr/local/lib".into(), Node::Dir(0o755)),
        ("/usr/local/lib/python3.8".into(), Node::Dir(0o755)),
        (SITE.into(), Node::Dir(0o755)),
        ("/opt".into(), Node::Dir(0o755)),
        ("/opt/conda".into(), Node::Dir(0o755)),
        ("/opt/conda/lib".into(), Node::Dir(0o755)),
        ("/opt/conda/lib/libcudart.so.11.0".into(), f(50000)),
        ("/opt/conda/lib/libcublas.so.11".into(), f(90000)),
        ("/opt/conda/conda-meta".into(), Node::Dir(0o755)),
        ("/opt/conda/conda-meta/cudatoolkit-11.0.221-h6bb024c_0.json".into(), t(CUDATOOLKIT_JSON)),
    ];
    let site = |rel: &str| format!("{SITE}/{rel}");
    for (rel, node) in [
        ("requests", Node::Dir(0o755)),
        ("requests/__init__.py", f(1200)),
        ("requests/api.py", f(800)),
        ("requests/models.py", f(3000)),
        ("requests-2.25.1.dist-info", Node::Dir(0o755)),
        ("requests-2.25.1.dist-info/METADATA", t(REQUESTS_METADATA)),
        ("requests-2.25.1.dist-info/RECORD", t(REQUESTS_RECORD)),
        ("urllib3", Node::Dir(0o755)),
        ("urllib3/__init__.py", f(900)),
        ("urllib3/poolmanager.py", f(2000)),
        ("urllib3/contrib", Node::Dir(0o755)),
        ("urllib3/contrib/socks.py", f(600)),
        ("urllib3-1.26.4.dist-info", Node::Dir(0o755)),
        ("urllib3-1.26.4.dist-info/METADATA", t(URLLIB3_METADATA)),
        ("urllib3-1.26.4.dist-info/RECORD", t(URLLIB3_RECORD)),
    ] {
        v.push((site(rel), node));
    }
    v
}

/// Paths of the mini container kept by the scripted trace, hand-listed.
pub fn mini_expected_retained() -> BTreeSet<String> {
    let mut s: BTreeSet<String> = [
        "/",
        "/app",
        "/app/main.py",
        "/etc",
        "/etc/passwd",
        "/lib",
        "/usr",
        "/usr/bin",
        "/usr/bin/foo",
        "/usr/bin/python3.8",
        "/usr/lib",
        "/usr/lib/x86_64-linux-gnu",
        "/usr/lib/x86_64-linux-gnu/libfoo.so.1",
        "/usr/lib/x86_64-linux-gnu/libfoo.so.1.2",
        "/usr/local",
        "/usr/local/lib",
        "/usr/local/lib/python3.8",
        SITE,
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for rel in ["requests", "requests/__init__.py", "requests/api.py"] {
        s.insert(format!("{SITE}/{rel}"));
    }
    s
}

/// Hand-listed F_p of each package in the mini container.
pub fn mini_package_files() -> BTreeMap<&'static str, Vec<String>> {
    let site = |rel: &str| format!("{SITE}/{rel}");
    BTreeMap::from([
        (
            "libfoo1",
            vec![
                "/usr/lib/x86_64-linux-gnu/libfoo.so.1.2".to_string(),
                "/usr/lib/x86_64-linux-gnu/libfoo.so.1".into(),
                "/usr/share/doc/libfoo1/copyright".into(),
            ],
        ),
        ("footool", vec!["/usr/bin/foo".to_string(), "/usr/share/man/man1/foo.1.gz".into()]),
        (
            "requests",
            vec![
                site("requests/__init__.py"),
                site("requests/api.py"),
                site("requests/models.py"),
                site("requests-2.25.1.dist-info/METADATA"),
                site("requests-2.25.1.dist-info/RECORD"),
            ],
        ),
        (
            "urllib3",
            vec![
                site("urllib3/__init__.py"),
                site("urllib3/poolmanager.py"),
                site("urllib3/contrib/socks.py"),
                site("urllib3-1.26.4.dist-info/METADATA"),
                site("urllib3-1.26.4.dist-info/RECORD"),
            ],
        ),
        (
            "cudatoolkit",
            vec!["/opt/conda/lib/libcudart.so.11.0".to_string(), "/opt/conda/lib/libcublas.so.11".into()],
        ),
    ])
}

pub fn host(root: &Path, p: &str) -> PathBuf {
    root.join(p.trim_start_matches('/'))
}

/// Builds the mini container under `dir/rootfs` and copies the trace and
/// report next to it. Returns the rootfs path.
pub fn build_mini(dir: &Path) -> Result<PathBuf> {
    let root = dir.join("rootfs");
    fs::create_dir_all(&root)?;
    let nodes = mini_nodes();
    for (p, n) in &nodes {
        let h = host(&root, p);
        match n {
            Node::Dir(_) => fs::create_dir_all(&h)?,
            Node::File(bytes, _) => fs::write(&h, bytes)?,
            Node::Link(t) => symlink(t, &h)?,
        }
    }
    for (p, n) in nodes.iter().rev() {
        let mode = match n {
            Node::Dir(m) | Node::File(_, m) => *m,
            Node::Link(_) => continue,
        };
        fs::set_permissions(host(&root, p), fs::Permissions::from_mode(mode))?;
    }
    fs::set_permissions(&root, fs::Permissions::from_mode(0o755))?;
    let mini = fixtures_dir().join("mini");
    fs::copy(mini.join("trace.log"), dir.join("trace.log"))?;
    fs::copy(mini.join("grype.json"), dir.join("grype.json"))?;
    Ok(root)
}

/// Read-only directories under `root` block tempdir cleanup.
pub fn make_removable(root: &Path) {
    for e in walkdir::WalkDir::new(root).into_iter().flatten() {
        if e.file_type().is_dir() {
            let _ = fs::set_permissions(e.path(), fs::Permissions::from_mode(0o755));
        }
    }
}

/// A random filesystem of at most `max` entries: nested directories,
/// regular files, and relative or absolute symlinks (some dangling, some
/// cyclic, some pointing at directories).
pub fn random_fs(rng: &mut ChaCha8Rng, max: usize) -> Vec<bloatlens::fs::FileEntry> {
    use bloatlens::fs::FileEntry;
    let mut dirs = vec!["/".to_string()];
    let mut out: Vec<FileEntry> = Vec::new();
    let mut names = 0usize;
    let n = rng.gen_range(1..=max);
    while out.len() < n {
        let parent = dirs[rng.gen_range(0..dirs.len())].clone();
        names += 1;
        let path = if parent == "/" { format!("/n{names}") } else { format!("{parent}/n{names}") };
        match rng.gen_range(0..10) {
            0..=2 => {
                dirs.push(path.clone());
                out.push(FileEntry::directory(path));
            }
            3..=7 => out.push(FileEntry::regular(path, rng.gen_range(0..5000))),
            _ => {
                let target = if rng.gen_bool(0.2) {
                    format!("/missing{}", rng.gen_range(0..5))
                } else if !out.is_empty() {
                    let t = &out[rng.gen_range(0..out.len())].path;
                    if rng.gen_bool(0.5) {
                        t.clone()
                    } else {
                        relative(&parent, t)
                    }
                } else {
                    "/".to_string()
                };
                out.push(FileEntry::symlink(path, target));
            }
        }
    }
    out
}

/// Relative spelling of `target` as seen from directory `from`.
pub fn relative(from: &str, target: &str) -> String {
    let a: Vec<&str> = from.split('/').filter(|s| !s.is_empty()).collect();
    let b: Vec<&str> = target.split('/').filter(|s| !s.is_empty()).collect();
    let common = a.iter().zip(&b).take_while(|(x, y)| x == y).count();
    let mut parts: Vec<&str> = vec![".."; a.len() - common];
    parts.extend(&b[common..]);
    if parts.is_empty() {
        ".".into()
    } else {
        parts.join("/")
    }
}

/// Random DAG over `n` nodes: edges only from lower to higher index.
pub fn random_dag(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                edges.push((i, j));
            }
        }
    }
    edges
}
