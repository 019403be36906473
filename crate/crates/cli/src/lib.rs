//! Command-line front end for the `danger-v2x` model: single evaluations,
//! population and threshold sweeps, analytic-vs-simulation comparisons and
//! placement statistics, written as CSV with optional SVG charts.

pub mod app;
pub mod commands;
pub mod error;
pub mod svg;
pub mod table;

pub use app::{execute, Cli};
pub use error::CliError;
