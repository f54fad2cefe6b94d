use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::rdf::TermId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Stream(#[from] io::Error),

    #[error("line {line}: malformed triple: {reason}")]
    MalformedTriple { line: usize, reason: String },

    #[error("unknown term id {0}")]
    UnknownTermId(u32),

    #[error("vertex {0} is not covered by the partition assignment")]
    UncoveredVertex(TermId),

    #[error("partition file line {line}: {reason}")]
    MalformedPartitionLine { line: usize, reason: String },

    #[error("partition index {index} out of range for k = {k}")]
    PartitionOutOfRange { index: usize, k: usize },

    #[error("property {0} has no edges")]
    UnknownProperty(TermId),

    #[error("missing boundary summary from partition {0}")]
    MissingSummary(usize),

    #[error("query syntax error at byte {pos}: {message}")]
    Syntax { pos: usize, message: String },

    #[error("unsupported query feature: {0}")]
    Unsupported(String),

    #[error("query graph is disconnected")]
    DisconnectedQuery,

    #[error("variable predicates are not supported")]
    VariablePredicate,

    #[error("no reachability index for property {0}")]
    MissingReachIndex(String),

    #[error("planner found no executable plan")]
    NoPlan,

    #[error("merge join input is not sorted on the join key")]
    SortContract,

    #[error("transport failure: {0}")]
    Transport(String),

    #[error("query cancelled")]
    Cancelled,

    #[error("snapshot format error: {0}")]
    Snapshot(String),

    #[error("catalog line {line}: {reason}")]
    Catalog { line: usize, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
