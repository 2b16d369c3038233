//! File formats, a rayon executor and the `lpvcert` command-line tool on top
//! of `lpvcert-core`.

pub mod cli;
pub mod exec;
pub mod format;
pub mod report;

pub use cli::run_command;
