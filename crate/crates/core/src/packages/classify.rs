use globset::{GlobBuilder, GlobMatcher};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BUNDLED: &str = include_str!("../../rules/ml.rules");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Functionality {
    Ml,
    Generic,
}

impl Functionality {
    pub fn as_str(self) -> &'static str {
        match self {
            Functionality::Ml => "ML",
            Functionality::Generic => "GENERIC",
        }
    }
}

#[derive(Debug, Clone)]
enum Pattern {
    Substring(String),
    Glob(GlobMatcher),
}

/// Name patterns that mark a package as ML. Plain patterns are
/// case-insensitive substrings; patterns with `*`, `?` or `[` are
/// case-insensitive whole-name globs.
#[derive(Debug, Clone, Default)]
pub struct Rules {
    patterns: Vec<Pattern>,
    source: Vec<String>,
}

impl Rules {
    /// The bundled list, drawn from the ML packages commonly found in GPU
    /// framework images.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled rules are valid")
    }

    /// One pattern per line; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rules = Rules::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let pattern = if line.contains(['*', '?', '[']) {
                let glob = GlobBuilder::new(line)
                    .case_insensitive(true)
                    .build()
                    .map_err(|e| Error::Parse {
                        location: format!("rules line {}", lineno + 1),
                        message: e.to_string(),
                    })?;
                Pattern::Glob(glob.compile_matcher())
            } else {
                Pattern::Substring(line.to_lowercase())
            };
            rules.patterns.push(pattern);
            rules.source.push(line.to_string());
        }
        Ok(rules)
    }

    pub fn patterns(&self) -> &[String] {
        &self.source
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn classify(&self, name: &str) -> Functionality {
        let lower = name.to_lowercase();
        let hit = self.patterns.iter().any(|p| match p {
            Pattern::Substring(s) => lower.contains(s.as_str()),
            Pattern::Glob(g) => g.is_match(&lower),
        });
        if hit {
            Functionality::Ml
        } else {
            Functionality::Generic
        }
    }
}
