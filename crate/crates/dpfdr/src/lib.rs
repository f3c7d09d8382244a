//! Std companion to `dpfdr-core`: a rayon trial executor, the CSV/JSON file
//! formats, the verification suites and the `dpfdr` command-line tool.

pub mod cli;
pub mod exec;
pub mod format;
pub mod io;
pub mod suites;

pub use exec::Parallel;
pub use io::FormatError;
