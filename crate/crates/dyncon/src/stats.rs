//! Allocation accounting and operation counters.
//!
//! Every node and edge-record allocation adds its nominal size to a per-forest
//! byte counter, and every release subtracts it. The counter is what the
//! space comparisons read, so they stay platform independent instead of
//! depending on the allocator or process RSS.

/// Nominal cost of one entry in an ordered edge set (key plus tree overhead).
pub const EDGE_SET_ENTRY_BYTES: u64 = 16;
/// Nominal cost of one record in the edge index.
pub const EDGE_INDEX_ENTRY_BYTES: u64 = 24;
/// Nominal cost of one per-level edge-set header in a leaf.
pub const LEVEL_SET_BYTES: u64 = 40;
/// Nominal cost of one non-tree adjacency entry in the level-structure baseline.
pub const ADJ_ENTRY_BYTES: u64 = 16;

#[derive(Clone, Copy, Debug, Default)]
pub struct AllocStats {
    pub current_bytes: u64,
    pub peak_bytes: u64,
}

impl AllocStats {
    #[inline]
    pub fn add(&mut self, bytes: u64) {
        self.current_bytes += bytes;
        if self.current_bytes > self.peak_bytes {
            self.peak_bytes = self.current_bytes;
        }
    }

    #[inline]
    pub fn sub(&mut self, bytes: u64) {
        debug_assert!(self.current_bytes >= bytes);
        self.current_bytes -= bytes;
    }
}

/// Monotone counters sampled by the benchmark harness.
#[derive(Clone, Copy, Debug, Default)]
pub struct Counters {
    /// Edge occurrences examined while searching (fetch and traversal steps).
    pub fetches: u64,
    /// Single-level edge demotions.
    pub pushdowns: u64,
    /// Deletions answered without any search.
    pub nontree_fast_deletes: u64,
    /// Total deletions processed.
    pub deletes: u64,
}

impl Counters {
    pub fn nontree_fraction(&self) -> f64 {
        if self.deletes == 0 {
            0.0
        } else {
            self.nontree_fast_deletes as f64 / self.deletes as f64
        }
    }
}
