pub mod debloat;
pub mod diag;
pub mod error;
pub mod fs;
pub mod graph;
pub mod packages;
pub mod path;
pub mod report;
pub mod trace;
pub mod vuln;

pub use diag::{Diagnostic, Diagnostics};
pub use error::{Error, Result};
