//! Command-line front end for `sipcq`: the `analyze` and `solve` pipelines
//! and their reports.

pub mod encode;
pub mod error;
pub mod pipeline;
pub mod report;
pub mod text;

pub use error::CliError;
pub use pipeline::{cmd_analyze, cmd_solve, ReportMode, Settings};
pub use report::ReportDocument;
