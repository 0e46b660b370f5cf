//! Per-vertex leaf storage: the leveled edge sets and their occupancy bitmap.
//!
//! A leaf keeps one ordered set of incident edges per occupied level. The sets
//! sit in a vector sorted by level, and the index of the level-`i` set is
//! `popcount` of the bitmap bits below `i`, so no outer map is needed.

use crate::ids::{EdgeKey, LevelBitmap};
use crate::stats::{AllocStats, EDGE_SET_ENTRY_BYTES, LEVEL_SET_BYTES};
use std::collections::BTreeSet;
use std::ops::Bound;

#[derive(Clone, Debug, Default)]
pub struct LeafEdges {
    pub bitmap: LevelBitmap,
    sets: Vec<(u8, BTreeSet<EdgeKey>)>,
}

impl LeafEdges {
    #[inline]
    fn slot(&self, level: u8) -> usize {
        self.bitmap.rank_of(level)
    }

    /// Adds `e` at `level`. Returns true iff the bitmap bit transitioned 0 -> 1,
    /// in which case the caller must propagate the bit up the forest.
    pub fn add_edge(&mut self, e: EdgeKey, level: u8, stats: &mut AllocStats) -> bool {
        let i = self.slot(level);
        if self.bitmap.test(level) {
            debug_assert_eq!(self.sets[i].0, level);
            let fresh = self.sets[i].1.insert(e);
            assert!(fresh, "edge {e:?} already present at level {level}");
            stats.add(EDGE_SET_ENTRY_BYTES);
            false
        } else {
            let mut set = BTreeSet::new();
            set.insert(e);
            self.sets.insert(i, (level, set));
            self.bitmap.set(level);
            stats.add(LEVEL_SET_BYTES + EDGE_SET_ENTRY_BYTES);
            true
        }
    }

    /// Removes `e` from `level`. Returns true iff the set emptied and the bit
    /// was cleared (caller propagates).
    pub fn remove_edge(&mut self, e: EdgeKey, level: u8, stats: &mut AllocStats) -> bool {
        assert!(self.bitmap.test(level), "no level-{level} set in this leaf");
        let i = self.slot(level);
        debug_assert_eq!(self.sets[i].0, level);
        let was = self.sets[i].1.remove(&e);
        assert!(was, "edge {e:?} not present at level {level}");
        stats.sub(EDGE_SET_ENTRY_BYTES);
        if self.sets[i].1.is_empty() {
            self.sets.remove(i);
            self.bitmap.clear(level);
            stats.sub(LEVEL_SET_BYTES);
            true
        } else {
            false
        }
    }

    /// Some edge from the level set, without removing it; always the canonical
    /// least so that repeated calls after removals enumerate deterministically.
    pub fn fetch_any(&self, level: u8) -> EdgeKey {
        assert!(self.bitmap.test(level), "level-{level} bit not set");
        let i = self.slot(level);
        *self.sets[i].1.iter().next().expect("occupied set is non-empty")
    }

    /// The first edge strictly greater than `after` in the level set, used as
    /// a monotone cursor by the replacement search.
    pub fn next_after(&self, level: u8, after: Option<EdgeKey>) -> Option<EdgeKey> {
        if !self.bitmap.test(level) {
            return None;
        }
        let i = self.slot(level);
        let set = &self.sets[i].1;
        match after {
            None => set.iter().next().copied(),
            Some(k) => set.range((Bound::Excluded(k), Bound::Unbounded)).next().copied(),
        }
    }

    pub fn level_edges(&self, level: u8) -> impl Iterator<Item = EdgeKey> + '_ {
        let set = if self.bitmap.test(level) {
            Some(&self.sets[self.slot(level)].1)
        } else {
            None
        };
        set.into_iter().flatten().copied()
    }

    pub fn contains(&self, e: EdgeKey, level: u8) -> bool {
        self.bitmap.test(level) && self.sets[self.slot(level)].1.contains(&e)
    }

    pub fn level_count(&self, level: u8) -> usize {
        if self.bitmap.test(level) {
            self.sets[self.slot(level)].1.len()
        } else {
            0
        }
    }

    pub fn total_edges(&self) -> usize {
        self.sets.iter().map(|(_, s)| s.len()).sum()
    }

    /// Full-scan consistency check: every set non-empty, sorted by level, and
    /// the bitmap matches exactly.
    pub fn check_consistent(&self) -> bool {
        let mut bm = LevelBitmap::EMPTY;
        let mut last: Option<u8> = None;
        for (level, set) in &self.sets {
            if set.is_empty() || last.map_or(false, |p| p >= *level) {
                return false;
            }
            bm.set(*level);
            last = Some(*level);
        }
        bm == self.bitmap
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::VertexId;
    use std::collections::BTreeMap;

    fn key(a: u32, b: u32) -> EdgeKey {
        EdgeKey::new(VertexId(a), VertexId(b))
    }

    #[test]
    fn add_into_empty_sets_bit() {
        let mut leaf = LeafEdges::default();
        let mut st = AllocStats::default();
        assert!(leaf.add_edge(key(0, 1), 3, &mut st));
        assert!(leaf.bitmap.test(3));
        assert!(leaf.check_consistent());
    }

    #[test]
    fn add_to_occupied_level_is_silent() {
        let mut leaf = LeafEdges::default();
        let mut st = AllocStats::default();
        leaf.add_edge(key(0, 1), 3, &mut st);
        assert!(!leaf.add_edge(key(0, 2), 3, &mut st));
    }

    #[test]
    fn popcount_slot_lookup() {
        let mut leaf = LeafEdges::default();
        let mut st = AllocStats::default();
        leaf.add_edge(key(0, 1), 2, &mut st);
        leaf.add_edge(key(0, 2), 5, &mut st);
        // bits {2, 5}: the level-5 set sits at index popcount(bits < 5) = 1.
        assert_eq!(leaf.bitmap.rank_of(5), 1);
        assert_eq!(leaf.fetch_any(5), key(0, 2));
    }

    #[test]
    fn remove_last_clears_bit() {
        let mut leaf = LeafEdges::default();
        let mut st = AllocStats::default();
        leaf.add_edge(key(0, 1), 3, &mut st);
        assert!(leaf.remove_edge(key(0, 1), 3, &mut st));
        assert!(leaf.bitmap.is_empty());
        assert_eq!(st.current_bytes, 0);
    }

    #[test]
    fn remove_with_sibling_keeps_bit() {
        let mut leaf = LeafEdges::default();
        let mut st = AllocStats::default();
        leaf.add_edge(key(0, 1), 3, &mut st);
        leaf.add_edge(key(0, 2), 3, &mut st);
        assert!(!leaf.remove_edge(key(0, 1), 3, &mut st));
        assert!(leaf.bitmap.test(3));
    }

    #[test]
    fn fetch_any_returns_canonical_least() {
        let mut leaf = LeafEdges::default();
        let mut st = AllocStats::default();
        leaf.add_edge(key(0, 2), 3, &mut st);
        leaf.add_edge(key(0, 1), 3, &mut st);
        assert_eq!(leaf.fetch_any(3), key(0, 1));
    }

    #[test]
    fn pushdown_round_trip_matches_naive_map() {
        // Remove at one level, re-add one lower, and compare the whole leaf
        // against a naive per-level map rebuilt from scratch.
        let mut leaf = LeafEdges::default();
        let mut st = AllocStats::default();
        let mut naive: BTreeMap<u8, BTreeSet<EdgeKey>> = BTreeMap::new();
        let edges = [(1u32, 4u8), (2, 4), (3, 4), (4, 2), (5, 7)];
        for &(b, l) in &edges {
            leaf.add_edge(key(0, b), l, &mut st);
            naive.entry(l).or_default().insert(key(0, b));
        }
        for &(b, l) in &[(1u32, 4u8), (4, 2)] {
            leaf.remove_edge(key(0, b), l, &mut st);
            let s = naive.get_mut(&l).unwrap();
            s.remove(&key(0, b));
            if s.is_empty() {
                naive.remove(&l);
            }
            leaf.add_edge(key(0, b), l - 1, &mut st);
            naive.entry(l - 1).or_default().insert(key(0, b));
        }
        assert!(leaf.check_consistent());
        for l in 0..16u8 {
            let want: Vec<_> = naive.get(&l).into_iter().flatten().copied().collect();
            let got: Vec<_> = leaf.level_edges(l).collect();
            assert_eq!(got, want, "level {l}");
        }
    }

    #[test]
    fn enumerate_remove_visits_every_edge_once() {
        let mut leaf = LeafEdges::default();
        let mut st = AllocStats::default();
        let mut expect = BTreeSet::new();
        for b in 1..10u32 {
            leaf.add_edge(key(0, b), 5, &mut st);
            expect.insert(key(0, b));
        }
        let mut seen = BTreeSet::new();
        while leaf.bitmap.test(5) {
            let e = leaf.fetch_any(5);
            assert!(seen.insert(e), "edge {e:?} visited twice");
            leaf.remove_edge(e, 5, &mut st);
        }
        assert_eq!(seen, expect);
    }

    #[test]
    fn cursor_is_monotone() {
        let mut leaf = LeafEdges::default();
        let mut st = AllocStats::default();
        for b in [5u32, 1, 9, 3] {
            leaf.add_edge(key(0, b), 2, &mut st);
        }
        let mut cur = None;
        let mut seen = vec![];
        while let Some(e) = leaf.next_after(2, cur) {
            seen.push(e);
            cur = Some(e);
        }
        assert_eq!(seen, vec![key(0, 1), key(0, 3), key(0, 5), key(0, 9)]);
    }
}
