//! Command-line front end for data valuation runs.
//!
//! Every command reads a [`RunConfig`], writes its artifacts into an output
//! directory together with a `manifest.json`, and maps failures to a one-line
//! `error[<kind>]: <message>` and a fixed exit code.

pub mod app;
pub mod commands;
pub mod config;
#[doc(hidden)]
pub mod fuzz;

use dshap::Error;

pub use app::{run, Cli};
pub use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

/// Machine-readable error kind and exit code.
pub fn classify(e: &Error) -> (&'static str, i32) {
    match e {
        Error::Config(_) => ("config", EXIT_CONFIG),
        Error::EnumerationGuard { .. } => ("enumeration-guard", EXIT_CONFIG),
        Error::InvalidBand { .. } => ("invalid-band", EXIT_CONFIG),
        Error::InvalidLayer { .. } => ("invalid-layer", EXIT_CONFIG),
        Error::IndexOutOfRange { .. } => ("index-out-of-range", EXIT_CONFIG),
        Error::DuplicateMember(_) => ("duplicate-member", EXIT_CONFIG),
        Error::FileNotFound(_) => ("file-not-found", EXIT_DATA),
        Error::Parse { .. } => ("parse", EXIT_DATA),
        Error::Csv(_) => ("csv", EXIT_DATA),
        Error::Json(_) => ("json", EXIT_DATA),
        Error::DegenerateData(_) => ("degenerate-data", EXIT_DATA),
        Error::Alignment(_) => ("alignment", EXIT_DATA),
        Error::UndefinedCorrelation => ("undefined-correlation", EXIT_DATA),
        Error::Divergence { .. } => ("divergence", EXIT_RUNTIME),
        Error::Training(_) => ("training", EXIT_RUNTIME),
        Error::Io(_) => ("io", EXIT_RUNTIME),
    }
}

/// `error[<kind>]: <message>` on a single line.
pub fn error_line(e: &Error) -> String {
    let (kind, _) = classify(e);
    let msg = e.to_string().replace(['\n', '\r'], " ");
    format!("error[{kind}]: {msg}")
}
