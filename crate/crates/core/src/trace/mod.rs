//! Syscall trace ingestion.
//!
//! [`parse_trace`] reads multi-process trace text (one syscall per line with a
//! PID prefix, as produced by a follow-forks tracer) and returns the set of
//! container paths the workload touched. Per-PID working directories and file
//! descriptor tables are tracked so relative and `*at` paths resolve, and are
//! inherited across `fork`/`clone`.
//!
//! Calls that count as file accesses:
//! `open`, `openat`, `openat2`, `creat`, `execve`, `execveat`, `stat`,
//! `lstat`, `stat64`, `lstat64`, `newfstatat`, `fstatat64`, `statx`,
//! `access`, `faccessat`, `faccessat2`, `readlink`, `readlinkat`.
//! `chdir`, `fchdir`, `close`, `dup*`, `fcntl(F_DUPFD*)` and the fork family
//! only update state. `mmap` lines are ignored; a mapped file was opened first.

mod syntax;

use std::collections::{BTreeSet, HashMap};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::diag::Diagnostics;
use crate::error::{Error, Result};
use crate::path;

use syntax::{Call, DirFd, Line};

pub use crate::path::Normalized;

const STAGE: &str = "trace";

/// Joins `raw` onto `cwd` when relative and collapses `.`/`..` lexically.
/// Climbing above `/` clamps at `/` and records a diagnostic.
pub fn normalize_path(cwd: &str, raw: &str, diag: &mut Diagnostics) -> String {
    let n = path::normalize(cwd, raw);
    if n.clamped {
        diag.info(STAGE, format!("path {raw:?} relative to {cwd} climbs above /; clamped"));
    }
    n.path
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStats {
    pub lines: u64,
    pub unparseable: u64,
    /// File-access calls whose path was resolved and kept (before dedup).
    pub matched: u64,
    pub failed_excluded: u64,
    pub unresolvable: u64,
    pub outside_root: u64,
}

/// Normalized absolute container paths accessed by a workload.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessSet {
    pub paths: BTreeSet<String>,
    pub stats: TraceStats,
}

impl AccessSet {
    /// Builds an access set directly from paths (normalized against `/`).
    pub fn from_paths<I, S>(paths: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let paths: BTreeSet<String> = paths.into_iter().map(|p| path::absolute(p.as_ref())).collect();
        let stats = TraceStats {
            matched: paths.len() as u64,
            ..TraceStats::default()
        };
        Self { paths, stats }
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn contains(&self, p: &str) -> bool {
        self.paths.contains(p)
    }

    /// Set union of two traces of the same container; stats are summed.
    pub fn union(&self, other: &AccessSet) -> AccessSet {
        let s = &self.stats;
        let o = &other.stats;
        AccessSet {
            paths: self.paths.union(&other.paths).cloned().collect(),
            stats: TraceStats {
                lines: s.lines + o.lines,
                unparseable: s.unparseable + o.unparseable,
                matched: s.matched + o.matched,
                failed_excluded: s.failed_excluded + o.failed_excluded,
                unresolvable: s.unresolvable + o.unresolvable,
                outside_root: s.outside_root + o.outside_root,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceOptions {
    /// Host path of the container root as seen by the tracer.
    pub root_prefix: String,
    pub include_failed: bool,
    /// Working directory of processes whose creation is not in the log.
    /// Defaults to `root_prefix`.
    pub initial_cwd: Option<String>,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            root_prefix: "/".into(),
            include_failed: false,
            initial_cwd: None,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Process {
    /// Host-side cwd; `None` after `fchdir` to an unknown descriptor.
    cwd: Option<String>,
    fds: HashMap<i64, String>,
}

enum PathArg {
    /// Plain path argument at this index, relative to the cwd.
    Cwd(usize),
    /// `(dirfd, path)` pair starting at this index.
    At(usize),
}

fn access_arg(name: &str) -> Option<PathArg> {
    Some(match name {
        "open" | "creat" | "stat" | "lstat" | "stat64" | "lstat64" | "access" | "readlink" | "execve" => {
            PathArg::Cwd(0)
        }
        "openat" | "openat2" | "newfstatat" | "fstatat64" | "statx" | "faccessat" | "faccessat2"
        | "readlinkat" | "execveat" => PathArg::At(0),
        _ => return None,
    })
}

fn is_fork(name: &str) -> bool {
    matches!(name, "fork" | "vfork" | "clone" | "clone3")
}

fn opens_fd(name: &str) -> bool {
    matches!(name, "open" | "openat" | "openat2" | "creat")
}

struct Tracer<'o> {
    opts: &'o TraceOptions,
    root: String,
    initial_cwd: String,
    procs: HashMap<u32, Process>,
    pending: HashMap<u32, (String, String)>,
    /// PIDs with an unfinished fork-family call, most recent last.
    forking: Vec<u32>,
    out: AccessSet,
}

impl<'o> Tracer<'o> {
    fn new(opts: &'o TraceOptions) -> Result<Self> {
        let root = path::absolute(&opts.root_prefix);
        if !opts.root_prefix.starts_with('/') {
            return Err(Error::Contract(format!(
                "root prefix {:?} must be absolute",
                opts.root_prefix
            )));
        }
        let initial_cwd = opts
            .initial_cwd
            .as_deref()
            .map(path::absolute)
            .unwrap_or_else(|| root.clone());
        Ok(Self {
            opts,
            root,
            initial_cwd,
            procs: HashMap::new(),
            pending: HashMap::new(),
            forking: Vec::new(),
            out: AccessSet::default(),
        })
    }

    fn process(&mut self, pid: u32) -> &mut Process {
        if !self.procs.contains_key(&pid) {
            // A child may log before its parent's clone returns.
            let inherited = self
                .forking
                .last()
                .and_then(|parent| self.procs.get(parent))
                .cloned()
                .unwrap_or_else(|| Process {
                    cwd: Some(self.initial_cwd.clone()),
                    fds: HashMap::new(),
                });
            self.procs.insert(pid, inherited);
        }
        self.procs.get_mut(&pid).expect("inserted above")
    }

    fn line(&mut self, raw: &str, diag: &mut Diagnostics) {
        self.out.stats.lines += 1;
        if raw.trim().is_empty() {
            return;
        }
        let Some((pid, body)) = syntax::split_pid(raw) else {
            self.out.stats.unparseable += 1;
            return;
        };
        match syntax::lex(body) {
            Some(Line::Complete(call)) => self.call(pid, &call, diag),
            Some(Line::Unfinished { name, partial }) => {
                if is_fork(name) {
                    self.process(pid);
                    self.forking.push(pid);
                }
                self.pending.insert(pid, (name.to_string(), partial.to_string()));
            }
            Some(Line::Resumed { name, rest }) => {
                let Some((pending_name, partial)) = self.pending.remove(&pid) else {
                    self.out.stats.unparseable += 1;
                    return;
                };
                if pending_name != name {
                    self.out.stats.unparseable += 1;
                    return;
                }
                if is_fork(name) {
                    if let Some(i) = self.forking.iter().rposition(|p| *p == pid) {
                        self.forking.remove(i);
                    }
                }
                let joined = format!("{partial}{rest}");
                match syntax::lex_call(name, &joined) {
                    Some(call) => self.call(pid, &call, diag),
                    None => self.out.stats.unparseable += 1,
                }
            }
            Some(Line::Notice) => {}
            None => self.out.stats.unparseable += 1,
        }
    }

    fn call(&mut self, pid: u32, call: &Call<'_>, diag: &mut Diagnostics) {
        let failed = call.ret.failed();
        let name = call.name;

        if is_fork(name) {
            if let Some(child) = call.ret.value().filter(|v| *v > 0) {
                let state = self.process(pid).clone();
                self.procs.entry(child as u32).or_insert(state);
            }
            return;
        }

        match name {
            "chdir" if !failed => {
                let target = call.args.first().and_then(|a| syntax::c_string(a));
                let p = self.process(pid);
                p.cwd = match (target, p.cwd.take()) {
                    (Some(t), _) if t.starts_with('/') => Some(path::absolute(&t)),
                    (Some(t), Some(cwd)) => Some(path::normalize(&cwd, &t).path),
                    _ => None,
                };
                return;
            }
            "fchdir" if !failed => {
                let fd = call.args.first().and_then(|a| syntax::dir_fd(a));
                let p = self.process(pid);
                p.cwd = match fd {
                    Some(DirFd::Fd(_, Some(annot))) => Some(path::absolute(&annot)),
                    Some(DirFd::Fd(n, None)) => p.fds.get(&n).cloned(),
                    _ => None,
                };
                if p.cwd.is_none() {
                    diag.info(STAGE, format!("pid {pid}: fchdir to untracked descriptor; cwd unknown"));
                }
                return;
            }
            "close" => {
                if let Some(DirFd::Fd(n, _)) = call.args.first().and_then(|a| syntax::dir_fd(a)) {
                    self.process(pid).fds.remove(&n);
                }
                return;
            }
            "dup" | "dup2" | "dup3" | "fcntl" | "fcntl64" if !failed => {
                if (name == "fcntl" || name == "fcntl64")
                    && !call.args.get(1).is_some_and(|a| a.starts_with("F_DUPFD"))
                {
                    return;
                }
                let old = call.args.first().and_then(|a| syntax::dir_fd(a));
                let new = call.ret.value();
                let p = self.process(pid);
                if let (Some(DirFd::Fd(o, annot)), Some(n)) = (old, new) {
                    if let Some(src) = annot.map(|a| path::absolute(&a)).or_else(|| p.fds.get(&o).cloned()) {
                        p.fds.insert(n, src);
                    }
                }
                return;
            }
            _ => {}
        }

        let Some(spec) = access_arg(name) else { return };
        let host_path = self.resolve_arg(pid, &spec, &call.args, diag);
        let Some(host_path) = host_path else { return };

        if failed && !self.opts.include_failed {
            self.out.stats.failed_excluded += 1;
            return;
        }
        if opens_fd(name) && !failed {
            if let Some(fd) = call.ret.value() {
                self.process(pid).fds.insert(fd, host_path.clone());
            }
        }
        match path::rebase(&host_path, &self.root) {
            Some(inside) => {
                self.out.stats.matched += 1;
                self.out.paths.insert(inside);
            }
            None => {
                self.out.stats.outside_root += 1;
                diag.info(STAGE, format!("dropping host path outside the container root: {host_path}"));
            }
        }
    }

    /// Resolves the path argument to a normalized host path. Returns `None`
    /// (and counts it) when it cannot be resolved; `None` without counting
    /// for `AT_EMPTY_PATH`-style empty paths, which name the fd itself.
    fn resolve_arg(&mut self, pid: u32, spec: &PathArg, args: &[&str], diag: &mut Diagnostics) -> Option<String> {
        let (raw, dirfd) = match *spec {
            PathArg::Cwd(i) => (args.get(i).and_then(|a| syntax::c_string(a)), Some(DirFd::Cwd)),
            PathArg::At(i) => (
                args.get(i + 1).and_then(|a| syntax::c_string(a)),
                args.get(i).and_then(|a| syntax::dir_fd(a)),
            ),
        };
        let Some(raw) = raw else {
            self.out.stats.unresolvable += 1;
            return None;
        };
        if raw.is_empty() {
            return None;
        }
        if raw.starts_with('/') {
            return Some(normalize_path("/", &raw, diag));
        }
        let p = self.process(pid);
        let base = match dirfd {
            Some(DirFd::Cwd) => p.cwd.clone(),
            Some(DirFd::Fd(_, Some(annot))) => Some(path::absolute(&annot)),
            Some(DirFd::Fd(n, None)) => p.fds.get(&n).cloned(),
            None => None,
        };
        match base {
            Some(base) => Some(normalize_path(&base, &raw, diag)),
            None => {
                self.out.stats.unresolvable += 1;
                None
            }
        }
    }
}

/// Parses a trace log into the set of accessed container paths.
///
/// Malformed lines are counted in [`TraceStats::unparseable`] and skipped.
/// Only errors from the underlying reader are fatal.
pub fn parse_trace<R: BufRead>(log: R, opts: &TraceOptions, diag: &mut Diagnostics) -> Result<AccessSet> {
    let mut tracer = Tracer::new(opts)?;
    for line in log.split(b'\n') {
        let line = line.map_err(|e| Error::io("<trace>", e))?;
        let text = String::from_utf8_lossy(&line);
        tracer.line(&text, diag);
    }
    let out = tracer.out;
    let s = &out.stats;
    diag.info(
        STAGE,
        format!(
            "{} lines, {} matched, {} distinct paths, {} failed calls excluded, {} unresolvable, {} outside root, {} unparseable",
            s.lines,
            s.matched,
            out.paths.len(),
            s.failed_excluded,
            s.unresolvable,
            s.outside_root,
            s.unparseable
        ),
    );
    Ok(out)
}

/// Convenience wrapper over an in-memory log.
pub fn parse_trace_str(log: &str, opts: &TraceOptions) -> AccessSet {
    parse_trace(log.as_bytes(), opts, &mut Diagnostics::new()).expect("in-memory reads cannot fail")
}
