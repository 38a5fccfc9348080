//! Library side of the `evq` command: configuration, run orchestration and
//! the CSV result schemas with their loaders.

pub mod config;
pub mod export;
pub mod run;
