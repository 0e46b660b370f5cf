//! The flattened local tree: rank trees whose roots sit in a flat array
//! sorted by rank, with pairing deferred until the array outgrows
//! `floor(log2 n)` entries.

use crate::container::{ChildContainer, ChildRef, ContainerPolicy};
use crate::ids::{floor_log2, ClusterId};
use crate::stats::AllocStats;

const NONE: u32 = u32::MAX;

/// One node of a rank tree. Leaves carry a cluster id; internal nodes pair
/// two subtrees of equal rank into one of rank + 1.
#[derive(Clone, Debug)]
pub struct RankNode {
    pub rank: u8,
    pub bitmap: u64,
    pub size: u32,
    pub left: u32,
    pub right: u32,
    pub parent: u32,
    /// Cluster id for leaves, `ClusterId::NONE` for internal nodes.
    pub cluster: ClusterId,
    /// Stable ordering key among equal-rank roots.
    pub entry_seq: u32,
}

impl RankNode {
    fn is_leaf(&self) -> bool {
        self.cluster != ClusterId::NONE
    }
}

/// Shared arena of rank nodes, one per forest.
#[derive(Clone, Debug, Default)]
pub struct RankArena {
    nodes: Vec<RankNode>,
    free: Vec<u32>,
    seq: u32,
}

impl RankArena {
    fn alloc(&mut self, node: RankNode, stats: &mut AllocStats) -> u32 {
        stats.add(std::mem::size_of::<RankNode>() as u64);
        if let Some(i) = self.free.pop() {
            self.nodes[i as usize] = node;
            i
        } else {
            self.nodes.push(node);
            (self.nodes.len() - 1) as u32
        }
    }

    fn release(&mut self, i: u32, stats: &mut AllocStats) {
        stats.sub(std::mem::size_of::<RankNode>() as u64);
        self.free.push(i);
    }

    #[inline]
    pub fn node(&self, i: u32) -> &RankNode {
        &self.nodes[i as usize]
    }

    #[inline]
    fn node_mut(&mut self, i: u32) -> &mut RankNode {
        &mut self.nodes[i as usize]
    }

    fn next_seq(&mut self) -> u32 {
        self.seq += 1;
        self.seq
    }
}

#[derive(Clone, Debug, Default)]
pub struct FlattenedLocalTree {
    /// Rank-tree roots, sorted by (rank, entry_seq).
    roots: Vec<u32>,
    len: usize,
    agg: u64,
}

impl FlattenedLocalTree {
    fn root_position(&self, _arena: &RankArena, root: u32) -> usize {
        self.roots
            .iter()
            .position(|&r| r == root)
            .unwrap_or_else(|| panic!("rank node {root} is not a root ({:?})", self.roots)) // structural bug
    }

    fn insert_root(&mut self, arena: &RankArena, root: u32) {
        let key = {
            let n = arena.node(root);
            (n.rank, n.entry_seq)
        };
        let pos = self
            .roots
            .partition_point(|&r| (arena.node(r).rank, arena.node(r).entry_seq) < key);
        self.roots.insert(pos, root);
    }

    fn recompute_agg(&mut self, arena: &RankArena) {
        self.agg = self.roots.iter().map(|&r| arena.node(r).bitmap).fold(0, |a, b| a | b);
    }

    /// Pair equal-rank roots until all ranks are distinct.
    fn consolidate(&mut self, arena: &mut RankArena, stats: &mut AllocStats) {
        let mut i = 0;
        while i + 1 < self.roots.len() {
            let (a, b) = (self.roots[i], self.roots[i + 1]);
            if arena.node(a).rank == arena.node(b).rank {
                let rank = arena.node(a).rank + 1;
                let bitmap = arena.node(a).bitmap | arena.node(b).bitmap;
                let size = arena.node(a).size + arena.node(b).size;
                let seq = arena.next_seq();
                let parent = arena.alloc(
                    RankNode {
                        rank,
                        bitmap,
                        size,
                        left: a,
                        right: b,
                        parent: NONE,
                        cluster: ClusterId::NONE,
                        entry_seq: seq,
                    },
                    stats,
                );
                arena.node_mut(a).parent = parent;
                arena.node_mut(b).parent = parent;
                self.roots.drain(i..=i + 1);
                self.insert_root(arena, parent);
                // The new root may pair again; rescan from the start of its
                // rank run, which can only be at or before its position.
                i = 0;
            } else {
                i += 1;
            }
        }
    }

    fn leftmost_cluster_with_bit(&self, arena: &RankArena, mut t: u32, level: u8) -> ClusterId {
        loop {
            let n = arena.node(t);
            if n.is_leaf() {
                return n.cluster;
            }
            t = if arena.node(n.left).bitmap >> level & 1 != 0 {
                n.left
            } else {
                debug_assert!(arena.node(n.right).bitmap >> level & 1 != 0);
                n.right
            };
        }
    }

    fn collect(&self, arena: &RankArena, t: u32, depth: u32, out: &mut Vec<(ClusterId, u32)>) {
        let n = arena.node(t);
        if n.is_leaf() {
            out.push((n.cluster, depth));
        } else {
            self.collect(arena, n.left, depth + 1, out);
            self.collect(arena, n.right, depth + 1, out);
        }
    }

    pub fn root_count(&self) -> usize {
        self.roots.len()
    }
}

impl ChildContainer for FlattenedLocalTree {
    type Arena = RankArena;

    fn insert(
        &mut self,
        arena: &mut RankArena,
        child: ChildRef,
        policy: ContainerPolicy,
        stats: &mut AllocStats,
    ) -> u32 {
        let seq = arena.next_seq();
        let leaf = arena.alloc(
            RankNode {
                rank: floor_log2(child.size),
                bitmap: child.bitmap,
                size: child.size,
                left: NONE,
                right: NONE,
                parent: NONE,
                cluster: child.id,
                entry_seq: seq,
            },
            stats,
        );
        self.insert_root(arena, leaf);
        self.len += 1;
        self.agg |= child.bitmap;
        if self.roots.len() > policy.consolidate_threshold as usize {
            self.consolidate(arena, stats);
        }
        leaf
    }

    fn remove(
        &mut self,
        arena: &mut RankArena,
        slot: u32,
        stats: &mut AllocStats,
    ) -> Option<(ClusterId, u32)> {
        // Ancestors on the leaf's rank-tree path split back into roots.
        let mut dead = slot;
        let mut climb = arena.node(slot).parent;
        if climb == NONE {
            let pos = self.root_position(arena, slot);
            self.roots.remove(pos);
        } else {
            while climb != NONE {
                let node = arena.node(climb).clone();
                let sibling = if node.left == dead { node.right } else { node.left };
                arena.node_mut(sibling).parent = NONE;
                let up = node.parent;
                if up == NONE {
                    let pos = self.root_position(arena, climb);
                    self.roots.remove(pos);
                }
                arena.release(climb, stats);
                self.insert_root(arena, sibling);
                dead = climb;
                climb = up;
            }
        }
        arena.release(slot, stats);
        self.len -= 1;
        self.recompute_agg(arena);
        None
    }

    fn len(&self) -> usize {
        self.len
    }

    fn agg_bitmap(&self) -> u64 {
        self.agg
    }

    fn refresh_child_bitmap(&mut self, arena: &mut RankArena, slot: u32, new_bitmap: u64) -> bool {
        if arena.node(slot).bitmap == new_bitmap {
            return false;
        }
        arena.node_mut(slot).bitmap = new_bitmap;
        let mut cur = arena.node(slot).parent;
        while cur != NONE {
            let n = arena.node(cur);
            let agg = arena.node(n.left).bitmap | arena.node(n.right).bitmap;
            if arena.node(cur).bitmap == agg {
                return false; // unaffected from here up
            }
            arena.node_mut(cur).bitmap = agg;
            cur = arena.node(cur).parent;
        }
        let old = self.agg;
        self.recompute_agg(arena);
        self.agg != old
    }

    fn find_child_with_bit(&self, arena: &RankArena, level: u8) -> Option<ClusterId> {
        let root = self.roots.iter().copied().find(|&r| arena.node(r).bitmap >> level & 1 != 0)?;
        Some(self.leftmost_cluster_with_bit(arena, root, level))
    }

    fn children_with_bit(&self, arena: &RankArena, level: u8) -> Vec<ClusterId> {
        fn walk(arena: &RankArena, t: u32, level: u8, out: &mut Vec<ClusterId>) {
            let n = arena.node(t);
            if n.bitmap >> level & 1 == 0 {
                return;
            }
            if n.is_leaf() {
                out.push(n.cluster);
            } else {
                walk(arena, n.left, level, out);
                walk(arena, n.right, level, out);
            }
        }
        let mut out = Vec::new();
        for &r in &self.roots {
            walk(arena, r, level, &mut out);
        }
        out
    }

    fn children(&self, arena: &RankArena) -> Vec<ClusterId> {
        self.children_with_depth(arena).into_iter().map(|(c, _)| c).collect()
    }

    fn children_with_depth(&self, arena: &RankArena) -> Vec<(ClusterId, u32)> {
        let mut out = Vec::with_capacity(self.len);
        for &r in &self.roots {
            self.collect(arena, r, 1, &mut out);
        }
        out
    }

    fn any_child(&self, arena: &RankArena) -> Option<ClusterId> {
        let &r = self.roots.first()?;
        let mut t = r;
        while !arena.node(t).is_leaf() {
            t = arena.node(t).left;
        }
        Some(arena.node(t).cluster)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn policy(n: u32) -> ContainerPolicy {
        ContainerPolicy { consolidate_threshold: floor_log2(n) as u32 }
    }

    fn child(id: u32, size: u32, bitmap: u64) -> ChildRef {
        ChildRef { id: ClusterId(id), size, bitmap, seq: id, marked: false }
    }

    #[test]
    fn pairing_two_singletons_gives_one_rank1_root() {
        let mut arena = RankArena::default();
        let mut st = AllocStats::default();
        let mut t = FlattenedLocalTree::default();
        // n = 2: threshold floor(log2 2) = 1, so the second insert consolidates.
        t.insert(&mut arena, child(100, 1, 0), policy(2), &mut st);
        t.insert(&mut arena, child(101, 1, 0), policy(2), &mut st);
        assert_eq!(t.root_count(), 1);
        assert_eq!(arena.node(t.roots[0]).rank, 1);
        assert_eq!(arena.node(t.roots[0]).size, 2);
    }

    #[test]
    fn consolidation_deferred_below_threshold() {
        let mut arena = RankArena::default();
        let mut st = AllocStats::default();
        let mut t = FlattenedLocalTree::default();
        // n = 8: threshold 3, so 3 singleton inserts stay 3 roots.
        for i in 0..3 {
            t.insert(&mut arena, child(100 + i, 1, 0), policy(8), &mut st);
        }
        assert_eq!(t.root_count(), 3);
        assert_eq!(t.len(), 3);
    }

    #[test]
    fn consolidated_root_count_is_bounded() {
        let mut arena = RankArena::default();
        let mut st = AllocStats::default();
        let mut t = FlattenedLocalTree::default();
        let n = 64u32;
        for i in 0..n {
            t.insert(&mut arena, child(100 + i, 1, 0), policy(n), &mut st);
        }
        assert!(t.root_count() <= floor_log2(n) as usize + 1, "{} roots", t.root_count());
        assert_eq!(t.len(), n as usize);
    }

    #[test]
    fn delete_only_child_leaves_empty_tree() {
        let mut arena = RankArena::default();
        let mut st = AllocStats::default();
        let mut t = FlattenedLocalTree::default();
        let slot = t.insert(&mut arena, child(100, 1, 0b100), policy(8), &mut st);
        t.remove(&mut arena, slot, &mut st);
        assert_eq!(t.len(), 0);
        assert_eq!(t.agg_bitmap(), 0);
        assert_eq!(st.current_bytes, 0);
    }

    #[test]
    fn delete_middle_keeps_others() {
        let mut arena = RankArena::default();
        let mut st = AllocStats::default();
        let mut t = FlattenedLocalTree::default();
        let _a = t.insert(&mut arena, child(1, 1, 0), policy(2), &mut st);
        let b = t.insert(&mut arena, child(2, 1, 0), policy(2), &mut st);
        let _c = t.insert(&mut arena, child(3, 1, 0), policy(2), &mut st);
        t.remove(&mut arena, b, &mut st);
        let left: BTreeSet<_> = t.children(&arena).into_iter().collect();
        assert_eq!(left, [ClusterId(1), ClusterId(3)].into_iter().collect());
    }

    #[test]
    fn random_interleaving_matches_shadow_set() {
        let mut arena = RankArena::default();
        let mut st = AllocStats::default();
        let mut t = FlattenedLocalTree::default();
        let mut shadow: BTreeSet<u32> = BTreeSet::new();
        let mut slots = std::collections::HashMap::new();
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut rng = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for step in 0..400u32 {
            if shadow.is_empty() || rng() % 3 != 0 {
                let id = step + 1000;
                let size = (rng() % 50 + 1) as u32;
                let slot = t.insert(&mut arena, child(id, size, rng()), policy(256), &mut st);
                slots.insert(id, slot);
                shadow.insert(id);
            } else {
                let pick = *shadow.iter().nth((rng() as usize) % shadow.len()).unwrap();
                shadow.remove(&pick);
                t.remove(&mut arena, slots.remove(&pick).unwrap(), &mut st);
            }
            let got: BTreeSet<u32> = t.children(&arena).into_iter().map(|c| c.0).collect();
            assert_eq!(got, shadow, "step {step}");
        }
    }

    #[test]
    fn bitmap_refresh_stops_with_contributing_sibling() {
        let mut arena = RankArena::default();
        let mut st = AllocStats::default();
        let mut t = FlattenedLocalTree::default();
        let a = t.insert(&mut arena, child(1, 1, 0b10), policy(2), &mut st);
        let _b = t.insert(&mut arena, child(2, 1, 0b10), policy(2), &mut st);
        // Clearing a's bit must not clear the aggregate: sibling still has it.
        assert!(!t.refresh_child_bitmap(&mut arena, a, 0));
        assert!(t.agg_bitmap() & 0b10 != 0);
        // Full recompute oracle.
        let mut want = 0u64;
        for (c, _) in t.children_with_depth(&arena) {
            want |= if c == ClusterId(1) { 0 } else { 0b10 };
        }
        assert_eq!(t.agg_bitmap(), want);
    }

    #[test]
    fn set_bit_propagates_and_early_stops() {
        let mut arena = RankArena::default();
        let mut st = AllocStats::default();
        let mut t = FlattenedLocalTree::default();
        let a = t.insert(&mut arena, child(1, 1, 0), policy(2), &mut st);
        let b = t.insert(&mut arena, child(2, 1, 0), policy(2), &mut st);
        assert!(t.refresh_child_bitmap(&mut arena, a, 0b100));
        assert!(t.agg_bitmap() & 0b100 != 0);
        // Setting the same bit elsewhere leaves the aggregate unchanged.
        assert!(!t.refresh_child_bitmap(&mut arena, b, 0b100));
    }

    #[test]
    fn leaf_depth_within_four_log_n() {
        let mut arena = RankArena::default();
        let mut st = AllocStats::default();
        let mut t = FlattenedLocalTree::default();
        let n = 1024u32;
        let mut state = 12345u64;
        for i in 0..100u32 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let size = (state % 1000 + 1) as u32;
            t.insert(&mut arena, child(i + 10, size, 0), policy(n), &mut st);
        }
        let bound = 4 * floor_log2(n) as u32;
        for (c, d) in t.children_with_depth(&arena) {
            assert!(d <= bound, "child {c:?} at depth {d} > {bound}");
        }
    }

    #[test]
    fn find_child_with_bit_is_leftmost() {
        let mut arena = RankArena::default();
        let mut st = AllocStats::default();
        let mut t = FlattenedLocalTree::default();
        t.insert(&mut arena, child(1, 4, 0), policy(64), &mut st);
        t.insert(&mut arena, child(2, 1, 0b1000), policy(64), &mut st);
        t.insert(&mut arena, child(3, 1, 0b1000), policy(64), &mut st);
        // Traversal order puts rank-0 entries (ids 2, 3) before the rank-2 one;
        // id 2 was inserted first so it is leftmost among bit holders.
        assert_eq!(t.find_child_with_bit(&arena, 3), Some(ClusterId(2)));
    }
}
