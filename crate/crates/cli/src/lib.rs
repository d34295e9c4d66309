//! `kkh`: runs suites of harmonicity checks from a JSON config and writes
//! deterministic JSON and CSV reports.

pub mod config;
pub mod emit;
pub mod suite;

pub use config::{ConfigError, Format, SuiteConfig};
pub use emit::emit;
pub use suite::{run_suite, Report};
