//! File formats, configuration loading and the experiment runner behind the
//! `sqf` command line. The model itself lives in `sqf-core`.

pub mod cache_dump;
pub mod cli;
pub mod config;
pub mod report;
pub mod runner;
pub mod workload_file;

mod error;

pub use error::{Error, RecordError};
