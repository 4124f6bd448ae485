//! Star-schema benchmark on top of `colcrunch-core`: a deterministic data
//! generator, the thirteen query plans, and a harness that runs them under
//! the sequential and parallel scenarios and records timings as CSV.

pub mod bench;
pub mod compression;
pub mod generate;
pub mod measure;
pub mod queries;
pub mod schema;

use std::path::{Path, PathBuf};

use colcrunch_core::buffer::BufferError;
use colcrunch_core::exec::ExecError;
use colcrunch_core::storage::StorageError;
use thiserror::Error;

pub use bench::{run_iterations, run_scenario, BenchConfig, BenchOutcome, Engine, Scenario};
pub use generate::{generate_dataset, GenConfig};
pub use measure::{summarize, MeasurementRecord, SummaryRow};
pub use queries::{build_query, QueryId};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Storage(StorageError),
    #[error(transparent)]
    Buffer(#[from] BufferError),
    #[error("query {query} failed: {source}")]
    Query { query: QueryId, source: ExecError },
    #[error("query {query} returned checksum {actual}, expected {expected}")]
    ChecksumMismatch { query: QueryId, expected: String, actual: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Config(String),
}

impl BenchError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> BenchError {
        BenchError::Io { path: path.to_path_buf(), source }
    }
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;
