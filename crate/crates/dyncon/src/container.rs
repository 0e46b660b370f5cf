//! The child-container contract shared by the two local-tree variants.
//!
//! A cluster node organizes its children through a container so that forest
//! code stays container-agnostic: the sequential forests use the flattened
//! rank-tree container, the blocked forest uses the size-class container.

use crate::ids::ClusterId;
use crate::stats::AllocStats;

/// Metadata snapshot of a child at insertion time. The container owns this
/// copy; the forest re-inserts a child whenever its size or identity changes.
#[derive(Clone, Copy, Debug)]
pub struct ChildRef {
    pub id: ClusterId,
    pub size: u32,
    pub bitmap: u64,
    /// Creation sequence number; deterministic tie-break for equal sizes.
    pub seq: u32,
    /// Carried across re-insertions so container marks survive re-keying.
    pub marked: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct ContainerPolicy {
    /// Rank-tree consolidation is deferred until the root count exceeds this
    /// (the flattening optimization); `floor(log2 n)` of the whole forest.
    pub consolidate_threshold: u32,
}

pub trait ChildContainer: Default + Clone {
    /// Shared internal-node storage, owned by the forest.
    type Arena: Default + Clone;

    /// Inserts a child and returns its slot handle. The forest records the
    /// slot on the child node.
    fn insert(
        &mut self,
        arena: &mut Self::Arena,
        child: ChildRef,
        policy: ContainerPolicy,
        stats: &mut AllocStats,
    ) -> u32;

    /// Removes the child at `slot`. If the removal relocated some other
    /// child's slot, returns `(that child, its new slot)` for the forest to
    /// record.
    fn remove(
        &mut self,
        arena: &mut Self::Arena,
        slot: u32,
        stats: &mut AllocStats,
    ) -> Option<(ClusterId, u32)>;

    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn agg_bitmap(&self) -> u64;

    /// The child's own bitmap changed (size unchanged): re-aggregate along its
    /// internal path, stopping early once an ancestor's bits are unaffected.
    /// Returns whether the container's aggregate bitmap changed.
    fn refresh_child_bitmap(&mut self, arena: &mut Self::Arena, slot: u32, new_bitmap: u64) -> bool;

    /// Deterministic leftmost child whose subtree bitmap has `level` set.
    fn find_child_with_bit(&self, arena: &Self::Arena, level: u8) -> Option<ClusterId>;

    /// All children whose subtree bitmap has `level` set, in traversal order.
    fn children_with_bit(&self, arena: &Self::Arena, level: u8) -> Vec<ClusterId>;

    /// All children in the container's deterministic traversal order.
    fn children(&self, arena: &Self::Arena) -> Vec<ClusterId>;

    /// Children with their hop distance to the owner, for depth audits.
    fn children_with_depth(&self, arena: &Self::Arena) -> Vec<(ClusterId, u32)>;

    fn any_child(&self, arena: &Self::Arena) -> Option<ClusterId>;

    /// Whether the child at `slot` carries a container mark.
    fn slot_marked(&self, _arena: &Self::Arena, _slot: u32) -> bool {
        false
    }
}
