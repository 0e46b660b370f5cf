//! Fully dynamic graph connectivity.
//!
//! This crate maintains the connected components of an undirected graph under
//! edge insertions and deletions. It provides:
//!
//! - [`CfForest`]: a compressed cluster forest with the classic replacement
//!   edge search, in two insertion flavors (root insertion and lowest-common
//!   cluster insertion) plus non-tree edge tracking;
//! - [`BlockedForest`]: a cluster forest maintaining the blocked-edge
//!   invariant, with single updates and batched [`BlockedForest::batch_insert`]
//!   / [`BlockedForest::batch_delete`];
//! - [`HdtConnectivity`]: a level-structure baseline over Euler tour trees,
//!   used for cross-checking and space/time comparisons;
//! - [`oracle`]: ground-truth connectivity and a structural auditor;
//! - [`bench`]: graph/stream file formats, generators and runners behind the
//!   `dyncon` command-line tool.
//!
//! Run `cargo run --example basic` for a tour, and see the `examples/`
//! directory for one runnable example per capability.

pub mod batch_tree;
pub mod bench;
pub mod blocked;
pub mod connectivity;
pub mod container;
pub mod error;
pub mod flat_tree;
pub mod forest;
pub mod ids;
pub mod leaf;
pub mod oracle;
pub mod stats;

mod hdt;

pub use blocked::BlockedForest;
pub use connectivity::{CfForest, InsertMode};
pub use error::{ConnError, Result};
pub use hdt::HdtConnectivity;
pub use ids::{ClusterId, EdgeKey, EdgeRecord, LevelBitmap, VertexId};
pub use stats::{AllocStats, Counters};
