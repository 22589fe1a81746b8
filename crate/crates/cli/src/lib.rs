//! File formats, JSON reports and the `mro-audit` command line for
//! precinct-level post-election audits built on `mro-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod report;

pub use error::{Error, Result};
pub use report::AuditReportDocument;
