//! Non-fatal diagnostics collected while ingesting and analysing inputs.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Info,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub level: Level,
    pub stage: String,
    pub message: String,
}

/// Ordered sink for diagnostics. Every record is also forwarded to `log`.
#[derive(Debug, Default, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Diagnostics {
    records: Vec<Diagnostic>,
}

impl Diagnostics {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn info(&mut self, stage: &str, message: impl Into<String>) {
        let message = message.into();
        log::info!("[{stage}] {message}");
        self.records.push(Diagnostic {
            level: Level::Info,
            stage: stage.to_string(),
            message,
        });
    }

    pub fn warn(&mut self, stage: &str, message: impl Into<String>) {
        let message = message.into();
        log::warn!("[{stage}] {message}");
        self.records.push(Diagnostic {
            level: Level::Warning,
            stage: stage.to_string(),
            message,
        });
    }

    pub fn records(&self) -> &[Diagnostic] {
        &self.records
    }

    pub fn has_warnings(&self) -> bool {
        self.records.iter().any(|d| d.level == Level::Warning)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Diagnostic> {
        self.records.iter().filter(|d| d.level == Level::Warning)
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn extend(&mut self, other: Diagnostics) {
        self.records.extend(other.records);
    }
}
