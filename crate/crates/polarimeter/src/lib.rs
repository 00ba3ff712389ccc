//! File formats, reports and the staged pipeline around `polarimeter-core`.
//!
//! The `polarimeter` binary drives [`pipeline::Pipeline`]; the modules are
//! public so the stages can also be scripted or tested directly.

pub mod config;
pub mod formats;
pub mod ingest;
pub mod pipeline;
pub mod report;

pub use config::Config;
pub use pipeline::{Pipeline, StageError, StageStatus};
pub use polarimeter_core as core;
