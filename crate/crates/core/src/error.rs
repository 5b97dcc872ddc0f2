use thiserror::Error;

use crate::record::Word;

/// Errors raised by the simulator, its primitives and the graph algorithms.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MeshError {
    #[error("invalid mesh configuration: {0}")]
    Config(String),

    #[error("{what} out of range: {value} (limit {limit})")]
    OutOfRange {
        what: &'static str,
        value: usize,
        limit: usize,
    },

    #[error("processor ({row}, {col}) holds {words} words, capacity is {capacity}")]
    CapacityOverflow {
        row: usize,
        col: usize,
        words: usize,
        capacity: usize,
    },

    #[error("processor ({row}, {col}) sent across the boundary of its region")]
    CrossBoundary { row: usize, col: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("{count} flagged records exceed the target capacity of {capacity} (block at rank {block})")]
    CapacityExceeded {
        block: usize,
        count: usize,
        capacity: usize,
    },

    #[error("duplicate directory label {0}")]
    DuplicateDirectoryLabel(Word),

    #[error("no parent entry for label {label} at level {level}")]
    MissingParent { label: Word, level: usize },

    #[error("graph input line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T, E = MeshError> = std::result::Result<T, E>;
