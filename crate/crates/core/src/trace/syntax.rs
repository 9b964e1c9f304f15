//! Line-level lexing of follow-forks syscall trace output.
//!
//! Accepted line shapes, after a leading PID (optionally `[pid N]`) and an
//! optional timestamp column:
//!
//! ```text
//! name(args) = ret [ERRNO (text)]
//! name(args <unfinished ...>
//! <... name resumed>args) = ret [ERRNO (text)]
//! +++ exited with N +++      --- SIGNAL {...} ---
//! ```

/// A lexed trace line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Line<'a> {
    Complete(Call<'a>),
    Unfinished { name: &'a str, partial: &'a str },
    Resumed { name: &'a str, rest: &'a str },
    /// Exit / signal notices and other non-syscall records.
    Notice,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Call<'a> {
    pub name: &'a str,
    pub args: Vec<&'a str>,
    pub ret: Ret,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Ret {
    /// Non-negative return, with an `N<path>` fd annotation if present.
    Ok { value: Option<i64>, annotation: Option<String> },
    Failed,
    /// `= ?`: the call never returned to the tracee.
    Unknown,
}

impl Ret {
    pub fn failed(&self) -> bool {
        matches!(self, Ret::Failed)
    }

    pub fn value(&self) -> Option<i64> {
        match self {
            Ret::Ok { value, .. } => *value,
            _ => None,
        }
    }
}

/// Splits off the PID and optional timestamp. Returns `(pid, body)`.
pub(crate) fn split_pid(line: &str) -> Option<(u32, &str)> {
    let line = line.trim_start();
    let (pid, rest) = if let Some(rest) = line.strip_prefix("[pid") {
        let rest = rest.trim_start();
        let end = rest.find(']')?;
        (rest[..end].trim().parse().ok()?, &rest[end + 1..])
    } else {
        let end = line.find(|c: char| !c.is_ascii_digit()).unwrap_or(line.len());
        if end == 0 {
            return None;
        }
        (line[..end].parse().ok()?, &line[end..])
    };
    let mut body = rest.trim_start();
    // -t / -tt / -ttt / -r timestamp columns.
    if let Some(tok) = body.split_whitespace().next() {
        if !tok.is_empty()
            && tok.chars().next().is_some_and(|c| c.is_ascii_digit())
            && tok.chars().all(|c| c.is_ascii_digit() || c == '.' || c == ':')
        {
            body = body[tok.len()..].trim_start();
        }
    }
    Some((pid, body))
}

pub(crate) fn lex(body: &str) -> Option<Line<'_>> {
    let body = body.trim_end();
    if body.starts_with("+++") || body.starts_with("---") {
        return Some(Line::Notice);
    }
    if let Some(rest) = body.strip_prefix("<...") {
        let rest = rest.trim_start();
        let end = rest.find(" resumed>")?;
        let name = &rest[..end];
        if !is_ident(name) {
            return None;
        }
        return Some(Line::Resumed {
            name,
            rest: &rest[end + " resumed>".len()..],
        });
    }
    let open = body.find('(')?;
    let name = &body[..open];
    if !is_ident(name) {
        return None;
    }
    let after = &body[open + 1..];
    if let Some(partial) = after.strip_suffix("<unfinished ...>") {
        return Some(Line::Unfinished {
            name,
            partial: partial.trim_end(),
        });
    }
    let call = lex_call(name, after)?;
    Some(Line::Complete(call))
}

/// Lexes `args) = ret ...` for call `name`.
pub(crate) fn lex_call<'a>(name: &'a str, after_paren: &'a str) -> Option<Call<'a>> {
    let (args, close) = split_args(after_paren)?;
    let tail = after_paren[close + 1..].trim_start();
    let ret_text = tail.strip_prefix('=')?.trim_start();
    Some(Call {
        name,
        args,
        ret: parse_ret(ret_text)?,
    })
}

fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

/// Splits top-level comma-separated arguments up to the matching `)`.
/// Returns the trimmed argument slices and the byte index of the `)`.
fn split_args(s: &str) -> Option<(Vec<&str>, usize)> {
    let bytes = s.as_bytes();
    let mut args = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'"' => {
                i += 1;
                while i < bytes.len() && bytes[i] != b'"' {
                    if bytes[i] == b'\\' {
                        i += 1;
                    }
                    i += 1;
                }
                if i >= bytes.len() {
                    return None;
                }
            }
            b'(' | b'[' | b'{' => depth += 1,
            b']' | b'}' => depth -= 1,
            b')' if depth == 0 => {
                let last = s[start..i].trim();
                if !last.is_empty() || !args.is_empty() {
                    args.push(last);
                }
                return Some((args, i));
            }
            b')' => depth -= 1,
            b',' if depth == 0 => {
                args.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
        i += 1;
    }
    None
}

fn parse_ret(text: &str) -> Option<Ret> {
    let tok = text.split_whitespace().next()?;
    if tok == "?" {
        return Some(Ret::Unknown);
    }
    let (num, annotation) = match tok.find('<') {
        Some(i) => {
            let full = &text[i + 1..];
            let end = full.rfind('>')?;
            (&tok[..i], Some(full[..end].to_string()))
        }
        None => (tok, None),
    };
    if num.starts_with('-') {
        return Some(Ret::Failed);
    }
    let value = if let Some(hex) = num.strip_prefix("0x") {
        i64::from_str_radix(hex, 16).ok()
    } else {
        Some(num.parse::<i64>().ok()?)
    };
    Some(Ret::Ok { value, annotation })
}

/// Decodes a C string literal argument (`"..."`). `None` if the argument is
/// not a complete literal (including strace's `"..."...` truncation form).
pub(crate) fn c_string(arg: &str) -> Option<String> {
    let inner = arg.strip_prefix('"')?;
    let end_quote = find_closing_quote(inner)?;
    if inner[end_quote + 1..].trim() != "" {
        return None;
    }
    let raw = &inner[..end_quote];
    let bytes = raw.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != b'\\' {
            out.push(bytes[i]);
            i += 1;
            continue;
        }
        i += 1;
        let c = *bytes.get(i)?;
        i += 1;
        match c {
            b'n' => out.push(b'\n'),
            b't' => out.push(b'\t'),
            b'r' => out.push(b'\r'),
            b'v' => out.push(0x0b),
            b'f' => out.push(0x0c),
            b'x' => {
                let hex = raw.get(i..i + 2)?;
                out.push(u8::from_str_radix(hex, 16).ok()?);
                i += 2;
            }
            b'0'..=b'7' => {
                let mut v = (c - b'0') as u32;
                let mut n = 1;
                while n < 3 && i < bytes.len() && (b'0'..=b'7').contains(&bytes[i]) {
                    v = v * 8 + (bytes[i] - b'0') as u32;
                    i += 1;
                    n += 1;
                }
                out.push(v as u8);
            }
            other => out.push(other),
        }
    }
    String::from_utf8(out).ok()
}

fn find_closing_quote(s: &str) -> Option<usize> {
    let bytes = s.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => i += 2,
            b'"' => return Some(i),
            _ => i += 1,
        }
    }
    None
}

/// A directory-fd argument: `AT_FDCWD`, a number, or a `-y` annotated
/// `N</path>` form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum DirFd {
    Cwd,
    Fd(i64, Option<String>),
}

pub(crate) fn dir_fd(arg: &str) -> Option<DirFd> {
    let arg = arg.trim();
    if arg.starts_with("AT_FDCWD") {
        return Some(DirFd::Cwd);
    }
    match arg.find('<') {
        Some(i) => {
            let fd = arg[..i].parse().ok()?;
            let end = arg.rfind('>')?;
            Some(DirFd::Fd(fd, Some(arg[i + 1..end].to_string())))
        }
        None => Some(DirFd::Fd(arg.parse().ok()?, None)),
    }
}
