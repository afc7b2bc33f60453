//! Pipeline orchestration behind the `forge` binary: ingest → index →
//! prompts → schedule → generate → eval, with provenance headers on every
//! artifact so identical inputs and flags reproduce identical bytes.

pub mod config;
pub mod pipeline;
pub mod provenance;
pub mod store;

pub use pipeline::{run_pipeline, PipelineSummary, RunConfig};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
