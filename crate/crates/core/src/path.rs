//! Lexical path normalization shared by every module.
//!
//! Paths are handled as UTF-8 strings with `/` separators. Nothing here touches
//! the host filesystem.

/// Result of normalizing a path: the absolute normalized form and whether a
/// `..` segment tried to climb above `/`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Normalized {
    pub path: String,
    pub clamped: bool,
}

/// Joins `raw` onto `cwd` when `raw` is relative, then collapses `.` and `..`
/// lexically. `..` at the root stays at the root and sets `clamped`.
pub fn normalize(cwd: &str, raw: &str) -> Normalized {
    let mut segments: Vec<&str> = Vec::new();
    let mut clamped = false;
    let joined_cwd = if raw.starts_with('/') { "" } else { cwd };
    for seg in joined_cwd.split('/').chain(raw.split('/')) {
        match seg {
            "" | "." => {}
            ".." => {
                if segments.pop().is_none() {
                    clamped = true;
                }
            }
            s => segments.push(s),
        }
    }
    let mut path = String::with_capacity(raw.len() + cwd.len() + 1);
    if segments.is_empty() {
        path.push('/');
    }
    for seg in segments {
        path.push('/');
        path.push_str(seg);
    }
    Normalized { path, clamped }
}

/// Normalizes an absolute-or-relative path against `/`.
pub fn absolute(raw: &str) -> String {
    normalize("/", raw).path
}

pub fn is_normalized(path: &str) -> bool {
    if path == "/" {
        return true;
    }
    path.starts_with('/')
        && !path.ends_with('/')
        && path[1..]
            .split('/')
            .all(|s| !s.is_empty() && s != "." && s != "..")
}

/// Parent of a normalized absolute path; `None` for `/`.
pub fn parent(path: &str) -> Option<&str> {
    if path == "/" {
        return None;
    }
    match path.rfind('/') {
        Some(0) => Some("/"),
        Some(i) => Some(&path[..i]),
        None => None,
    }
}

/// All proper ancestors of a normalized path, nearest first, ending with `/`.
pub fn ancestors(path: &str) -> impl Iterator<Item = &str> {
    std::iter::successors(parent(path), |p| parent(p))
}

pub fn file_name(path: &str) -> &str {
    match path.rfind('/') {
        Some(i) => &path[i + 1..],
        None => path,
    }
}

pub fn join(base: &str, name: &str) -> String {
    if base == "/" {
        format!("/{name}")
    } else {
        format!("{base}/{name}")
    }
}

/// Strips `prefix` (a normalized absolute path) from `path`, returning the
/// remainder rebased at `/`. `None` if `path` is not under `prefix`.
pub fn rebase(path: &str, prefix: &str) -> Option<String> {
    if prefix == "/" {
        return Some(path.to_string());
    }
    let rest = path.strip_prefix(prefix)?;
    if rest.is_empty() {
        Some("/".to_string())
    } else if rest.starts_with('/') {
        Some(rest.to_string())
    } else {
        None
    }
}

/// True when `path` equals `dir` or lies below it.
pub fn is_within(path: &str, dir: &str) -> bool {
    dir == "/" || path == dir || (path.starts_with(dir) && path.as_bytes().get(dir.len()) == Some(&b'/'))
}
