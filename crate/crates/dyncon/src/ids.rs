//! Vertex/edge identifiers, edge records and the per-node level bitmap.

use std::fmt;

/// A vertex of the input graph, in `[0, n)`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub u32);

impl VertexId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Debug for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A node of a cluster forest. Ids below the vertex count are the leaves,
/// one per vertex; higher ids are internal clusters.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClusterId(pub u32);

impl ClusterId {
    pub const NONE: ClusterId = ClusterId(u32::MAX);

    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Debug for ClusterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

/// An undirected edge stored canonically with `a < b`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeKey {
    pub a: VertexId,
    pub b: VertexId,
}

impl EdgeKey {
    /// Canonicalizes the endpoint order. Panics on a self-loop: the graph API
    /// rejects those before an `EdgeKey` is ever formed.
    #[inline]
    pub fn new(u: VertexId, v: VertexId) -> Self {
        assert!(u != v, "self-loop edge ({u}, {v}) has no canonical key");
        if u.0 < v.0 {
            EdgeKey { a: u, b: v }
        } else {
            EdgeKey { a: v, b: u }
        }
    }

    #[inline]
    pub fn other(self, v: VertexId) -> VertexId {
        if v == self.a {
            self.b
        } else {
            debug_assert_eq!(v, self.b);
            self.a
        }
    }

    #[inline]
    pub fn endpoints(self) -> [VertexId; 2] {
        [self.a, self.b]
    }
}

impl fmt::Debug for EdgeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.a, self.b)
    }
}

/// A live edge: its canonical key, current level and tree/non-tree flag.
///
/// `level` only decreases over the edge's lifetime except at (re)insertion.
/// `is_tree` is meaningful only in forests with non-tree tracking enabled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeRecord {
    pub key: EdgeKey,
    pub level: u8,
    pub is_tree: bool,
}

/// One machine word of per-level occupancy bits: bit `i` is set iff the
/// owning subtree contains an endpoint of a level-`i` edge.
#[derive(Clone, Copy, Default, PartialEq, Eq)]
pub struct LevelBitmap(pub u64);

impl LevelBitmap {
    pub const EMPTY: LevelBitmap = LevelBitmap(0);

    #[inline]
    pub fn test(self, level: u8) -> bool {
        self.0 >> level & 1 != 0
    }

    #[inline]
    pub fn set(&mut self, level: u8) {
        self.0 |= 1u64 << level;
    }

    #[inline]
    pub fn clear(&mut self, level: u8) {
        self.0 &= !(1u64 << level);
    }

    /// Number of occupied levels strictly below `level`; this is the index of
    /// the level-`level` entry in a leaf's ordered edge-set vector.
    #[inline]
    pub fn rank_of(self, level: u8) -> usize {
        (self.0 & ((1u64 << level) - 1)).count_ones() as usize
    }

    #[inline]
    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Debug for LevelBitmap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LevelBitmap({:#b})", self.0)
    }
}

/// Ceiling of log2, used for `L_max = ceil(log2 n)`.
pub fn ceil_log2(n: u32) -> u8 {
    assert!(n >= 1);
    (32 - (n - 1).leading_zeros()) as u8
}

/// Floor of log2, used for ranks and size classes.
#[inline]
pub fn floor_log2(n: u32) -> u8 {
    debug_assert!(n >= 1);
    (31 - n.leading_zeros()) as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_key_is_canonical() {
        let e = EdgeKey::new(VertexId(7), VertexId(3));
        assert_eq!(e.a, VertexId(3));
        assert_eq!(e.b, VertexId(7));
        assert_eq!(e.other(VertexId(3)), VertexId(7));
    }

    #[test]
    #[should_panic]
    fn edge_key_rejects_self_loop() {
        let _ = EdgeKey::new(VertexId(2), VertexId(2));
    }

    #[test]
    fn bitmap_rank_matches_popcount_for_all_small_masks() {
        // Exhaustive over 16-bit masks: rank_of(l) must equal the number of
        // occupied levels below l, for every occupied and unoccupied l.
        for mask in 0u64..(1 << 16) {
            let bm = LevelBitmap(mask);
            let mut below = 0;
            for l in 0..16u8 {
                assert_eq!(bm.rank_of(l), below, "mask {mask:#b} level {l}");
                if bm.test(l) {
                    below += 1;
                }
            }
        }
    }

    #[test]
    fn log2_helpers() {
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(16), 4);
        assert_eq!(ceil_log2(17), 5);
        assert_eq!(floor_log2(1), 0);
        assert_eq!(floor_log2(2), 1);
        assert_eq!(floor_log2(3), 1);
        assert_eq!(floor_log2(16), 4);
    }
}
