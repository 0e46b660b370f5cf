//! Errors surfaced by the public update API.
//!
//! Structural invariant breaks are caller bugs and panic instead.

use crate::ids::{EdgeKey, VertexId};
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConnError {
    VertexOutOfRange { v: VertexId, n: u32 },
    SelfLoop(VertexId),
    DuplicateEdge(EdgeKey),
    MissingEdge(EdgeKey),
    /// A batch failed validation; nothing was applied.
    BatchRejected { index: usize, reason: Box<ConnError> },
}

impl fmt::Display for ConnError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConnError::VertexOutOfRange { v, n } => {
                write!(f, "vertex {v} out of range (n = {n})")
            }
            ConnError::SelfLoop(v) => write!(f, "self-loop on vertex {v} rejected"),
            ConnError::DuplicateEdge(e) => write!(f, "edge {e:?} is already present"),
            ConnError::MissingEdge(e) => write!(f, "edge {e:?} is not present"),
            ConnError::BatchRejected { index, reason } => {
                write!(f, "batch rejected at element {index}: {reason}")
            }
        }
    }
}

impl std::error::Error for ConnError {}

pub type Result<T> = std::result::Result<T, ConnError>;
