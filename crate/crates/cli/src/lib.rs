//! Batch pipeline and bundle server behind the `dimnet` command.

pub mod pipeline;
pub mod server;

pub use pipeline::{
    run_all, NetworkRow, RunConfig, RunError, RunReport, SkippedQuery, REPORT_FILE,
};
pub use server::{resolve_path, ServeError, ServerHandle, StaticServer};
