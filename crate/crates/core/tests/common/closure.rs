//! Naive fixed-point closure used as the reference for compute_retained.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bloatlens::debloat::{compute_retained, KeepList};
use bloatlens::fs::{FileEntry, FileKind, FileSet, Origin};
use bloatlens::trace::AccessSet;
use bloatlens::Diagnostics;

type Tree = BTreeMap<String, FileEntry>;

fn parent(p: &str) -> Option<String> {
    if p == "/" {
        return None;
    }
    match p.rfind('/') {
        Some(0) => Some("/".into()),
        Some(i) => Some(p[..i].into()),
        None => None,
    }
}

fn join(dir: &str, name: &str) -> String {
    if dir == "/" {
        format!("/{name}")
    } else {
        format!("{dir}/{name}")
    }
}

/// Walks `rest` from physical directory `base`; intermediate symlinks are
/// spliced in recursively, the last component is not followed.
fn follow(t: &Tree, base: String, rest: Vec<String>, hops: usize, links: &mut Vec<String>) -> Option<String> {
    let mut base = base;
    for (i, comp) in rest.iter().enumerate() {
        let last = i + 1 == rest.len();
        match comp.as_str() {
            "." => continue,
            ".." => {
                base = parent(&base).unwrap_or_else(|| "/".into());
                continue;
            }
            _ => {}
        }
        let cand = join(&base, comp);
        let e = t.get(&cand)?;
        if last {
            return Some(cand);
        }
        match e.kind {
            FileKind::Directory => base = cand,
            FileKind::Symlink => {
                if hops >= 40 {
                    return None;
                }
                links.push(cand);
                let target = e.link_target.clone().unwrap_or_default();
                let start = if target.starts_with('/') { "/".to_string() } else { base.clone() };
                let mut spliced: Vec<String> = target.split('/').filter(|s| !s.is_empty()).map(String::from).collect();
                spliced.extend(rest[i + 1..].iter().cloned());
                return follow(t, start, spliced, hops + 1, links);
            }
            _ => return None,
        }
    }
    Some(base)
}

pub fn walk(t: &Tree, raw: &str) -> Option<(String, Vec<String>)> {
    let mut links = Vec::new();
    let comps = raw.split('/').filter(|s| !s.is_empty()).map(String::from).collect();
    follow(t, "/".into(), comps, 0, &mut links).map(|p| (p, links))
}

pub fn oracle(t: &Tree, access: &BTreeSet<String>) -> BTreeSet<String> {
    let mut r: BTreeSet<String> = BTreeSet::from(["/".to_string()]);
    for p in access {
        if t.contains_key(p) {
            r.insert(p.clone());
        } else if let Some((q, links)) = walk(t, p) {
            r.insert(q);
            r.extend(links);
        }
    }
    loop {
        let mut next = r.clone();
        for p in &r {
            let mut a = parent(p);
            while let Some(x) = a {
                a = parent(&x);
                next.insert(x);
            }
            if let Some(e) = t.get(p) {
                if e.kind == FileKind::Symlink {
                    let target = e.link_target.as_deref().unwrap();
                    let raw = if target.starts_with('/') {
                        target.to_string()
                    } else {
                        format!("{}/{target}", parent(p).unwrap())
                    };
                    if let Some((q, links)) = walk(t, &raw) {
                        next.insert(q);
                        next.extend(links);
                    }
                }
            }
        }
        if next == r {
            return r;
        }
        r = next;
    }
}

/// Accessed paths: present entries, spellings through symlinked
/// directories, and absent paths.
fn random_access(rng: &mut ChaCha8Rng, fs: &FileSet) -> BTreeSet<String> {
    let paths: Vec<&str> = fs.paths().collect();
    let links: Vec<&FileEntry> = fs.iter().filter(|e| e.kind == FileKind::Symlink).collect();
    let mut out = BTreeSet::new();
    for _ in 0..rng.gen_range(0..=paths.len().min(40)) {
        match rng.gen_range(0..6) {
            0..=2 => {
                out.insert(paths[rng.gen_range(0..paths.len())].to_string());
            }
            3 | 4 if !links.is_empty() => {
                let l = links[rng.gen_range(0..links.len())];
                let child = paths[rng.gen_range(0..paths.len())];
                let name = child.rsplit('/').next().unwrap_or("x");
                out.insert(format!("{}/{}", l.path, name));
            }
            _ => {
                out.insert(format!("/absent{}", rng.gen_range(0..10)));
            }
        }
    }
    out
}


/// Runs `cases` random filesystems of at most 500 entries through both
/// implementations. Returns how many retained sets contained a symlink.
pub fn run_suite(cases: usize, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut with_links = 0;
    for case in 0..cases {
        let fs = FileSet::from_entries(Origin::Derived, super::random_fs(&mut rng, 500));
        let access = random_access(&mut rng, &fs);
        let got = compute_retained(
            &fs,
            &AccessSet::from_paths(access.iter()),
            &KeepList::default(),
            &mut Diagnostics::new(),
        );
        let got: BTreeSet<String> = got.retained.paths().map(String::from).collect();
        let want = oracle(fs.entries(), &access);
        if got != want {
            let extra: Vec<_> = got.symmetric_difference(&want).take(5).collect();
            return Err(format!("case {case}: retained sets differ at {extra:?}"));
        }
        if got.iter().any(|p| fs.get(p).is_some_and(|e| e.kind == FileKind::Symlink)) {
            with_links += 1;
        }
    }
    Ok(with_links)
}
