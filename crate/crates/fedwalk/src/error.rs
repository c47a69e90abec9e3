use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("self-loop on vertex {vertex} at {path}:{line}")]
    SelfLoop {
        path: PathBuf,
        line: usize,
        vertex: u64,
    },
    #[error("vertex id {id} out of range (graph has {num_vertices} vertices)")]
    VertexOutOfRange { id: u64, num_vertices: usize },
    #[error("unknown vertex {vertex}")]
    UnknownVertex { vertex: usize },
    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("score list is empty")]
    EmptyScores,
    #[error("non-finite score at index {0}")]
    NonFiniteScore(usize),
    #[error("bin count {k} out of range 1..={num_vertices}")]
    BinCountOutOfRange { k: usize, num_vertices: usize },
    #[error("no degree vector published for neighbor {vertex}")]
    MissingNeighborVector { vertex: usize },
    #[error("ordered degree matrix is empty")]
    EmptyMatrix,
    #[error("column count mismatch: {left} vs {right}")]
    ColumnMismatch { left: usize, right: usize },
    #[error("walk cannot start from isolated vertex {0}")]
    IsolatedStart(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("degenerate split: {0}")]
    DegenerateSplit(String),
    #[error("bad file format in {path}: {message}")]
    BadFormat { path: PathBuf, message: String },
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
