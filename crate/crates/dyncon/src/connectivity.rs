//! Sequential dynamic connectivity over the compressed cluster forest.
//!
//! Deletion runs the alternating replacement search: two searches advance one
//! edge traversal at a time through two-level queues (a cluster queue feeding
//! a leaf queue with per-leaf cursors). The side with the smaller visited
//! size pays by having its explored edges pushed one level down. Non-tree
//! edge tracking lets most deletions on dense graphs skip the search.

use crate::flat_tree::FlattenedLocalTree;
use crate::forest::ClusterForest;
use crate::ids::{ClusterId, EdgeKey, VertexId};
use crate::error::{ConnError, Result};
use crate::stats::Counters;
use std::collections::{HashSet, VecDeque};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InsertMode {
    /// Connected insertions land at the component root's level.
    Root,
    /// Connected insertions land at the lowest cluster containing both
    /// endpoints, trading insert time for cheaper deletions.
    Lca,
}

#[derive(Clone, Debug)]
pub struct CfForest {
    pub(crate) f: ClusterForest<FlattenedLocalTree>,
    mode: InsertMode,
    tracking: bool,
}

#[derive(Debug)]
enum SearchOutcome {
    Reconnected,
    Split { piece: ClusterId },
}

enum StepResult {
    Traversed,
    Contact(EdgeKey),
    Exhausted,
}

/// One side of the alternating search.
struct SideState {
    seed_vertex: VertexId,
    visited: HashSet<ClusterId>,
    visited_size: u64,
    cluster_queue: VecDeque<ClusterId>,
    leaf_queue: VecDeque<(VertexId, Option<EdgeKey>)>,
    explored: Vec<EdgeKey>,
    explored_set: HashSet<EdgeKey>,
    steps: u64,
}

impl SideState {
    fn new(seed: ClusterId, seed_vertex: VertexId, size: u64) -> Self {
        SideState {
            seed_vertex,
            visited: [seed].into_iter().collect(),
            visited_size: size,
            cluster_queue: [seed].into_iter().collect(),
            leaf_queue: VecDeque::new(),
            explored: Vec::new(),
            explored_set: HashSet::new(),
            steps: 0,
        }
    }

    fn record(&mut self, e: EdgeKey) {
        if self.explored_set.insert(e) {
            self.explored.push(e);
        }
    }

    /// One search step: traverse one level-`i` edge occurrence. Bookkeeping
    /// (advancing cursors, refilling the leaf queue from the cluster queue)
    /// does not count as a step.
    fn step(
        &mut self,
        other: &SideState,
        f: &mut ClusterForest<FlattenedLocalTree>,
        i: u8,
        tracking: bool,
    ) -> StepResult {
        loop {
            if let Some((leaf, cursor)) = self.leaf_queue.front_mut() {
                let leaf = *leaf;
                match f.leaves[leaf.idx()].next_after(i, *cursor) {
                    None => {
                        self.leaf_queue.pop_front();
                        continue;
                    }
                    Some(e) => {
                        *cursor = Some(e);
                        self.steps += 1;
                        f.counters.fetches += 1;
                        let oc = f.cluster_of(e.other(leaf), i - 1);
                        if self.visited.contains(&oc) {
                            self.record(e);
                            return StepResult::Traversed;
                        }
                        if other.visited.contains(&oc) {
                            return StepResult::Contact(e);
                        }
                        self.visited.insert(oc);
                        self.visited_size += f.size_of(oc) as u64;
                        self.cluster_queue.push_back(oc);
                        self.record(e);
                        // First edge to reach a cluster becomes a tree edge,
                        // on both sides of the search.
                        if tracking {
                            f.edges.get_mut(&e).expect("live edge").is_tree = true;
                        }
                        return StepResult::Traversed;
                    }
                }
            }
            match self.cluster_queue.pop_front() {
                None => return StepResult::Exhausted,
                Some(c) => {
                    for leaf in f.collect_level_leaves(c, i) {
                        self.leaf_queue.push_back((leaf, None));
                    }
                }
            }
        }
    }
}

impl CfForest {
    pub fn new(n: u32, mode: InsertMode) -> Self {
        Self::with_tracking(n, mode, true)
    }

    pub fn with_tracking(n: u32, mode: InsertMode, tracking: bool) -> Self {
        CfForest { f: ClusterForest::new(n), mode, tracking }
    }

    pub fn n(&self) -> u32 {
        self.f.n()
    }

    pub fn l_max(&self) -> u8 {
        self.f.l_max()
    }

    pub fn mode(&self) -> InsertMode {
        self.mode
    }

    pub fn tracking(&self) -> bool {
        self.tracking
    }

    pub fn counters(&self) -> Counters {
        self.f.counters
    }

    pub fn current_bytes(&self) -> u64 {
        self.f.stats.current_bytes
    }

    pub fn peak_bytes(&self) -> u64 {
        self.f.stats.peak_bytes
    }

    pub fn edge_count(&self) -> usize {
        self.f.edge_count()
    }

    pub fn edge_record(&self, u: VertexId, v: VertexId) -> Option<crate::ids::EdgeRecord> {
        self.f.edge_record(EdgeKey::new(u, v)).copied()
    }

    fn check_vertex(&self, v: VertexId) -> Result<()> {
        if v.0 < self.f.n() {
            Ok(())
        } else {
            Err(ConnError::VertexOutOfRange { v, n: self.f.n() })
        }
    }

    pub fn connected(&self, u: VertexId, v: VertexId) -> bool {
        assert!(u.0 < self.f.n() && v.0 < self.f.n());
        self.f.connected(u, v)
    }

    pub fn insert(&mut self, u: VertexId, v: VertexId) -> Result<()> {
        self.check_vertex(u)?;
        self.check_vertex(v)?;
        if u == v {
            return Err(ConnError::SelfLoop(u));
        }
        let key = EdgeKey::new(u, v);
        if self.f.edge_record(key).is_some() {
            return Err(ConnError::DuplicateEdge(key));
        }
        if !self.f.connected(u, v) {
            let ru = self.f.root_of(self.f.leaf_cluster(u));
            let rv = self.f.root_of(self.f.leaf_cluster(v));
            self.f.merge_at_level(self.f.l_max(), ru, rv);
            self.f.attach_edge(key, self.f.l_max(), true);
        } else {
            let level = match self.mode {
                InsertMode::Root => {
                    let r = self.f.root_of(self.f.leaf_cluster(u));
                    self.f.level_of(r)
                }
                InsertMode::Lca => {
                    let lca = self.f.lca_of(u, v).expect("connected endpoints share a root");
                    self.f.level_of(lca)
                }
            };
            debug_assert!(level >= 1);
            self.f.attach_edge(key, level, false);
        }
        Ok(())
    }

    pub fn delete(&mut self, u: VertexId, v: VertexId) -> Result<()> {
        self.check_vertex(u)?;
        self.check_vertex(v)?;
        if u == v {
            return Err(ConnError::SelfLoop(u));
        }
        let key = EdgeKey::new(u, v);
        if self.f.edge_record(key).is_none() {
            return Err(ConnError::MissingEdge(key));
        }
        let rec = self.f.detach_edge(key);
        self.f.counters.deletes += 1;
        if self.tracking && !rec.is_tree {
            self.f.counters.nontree_fast_deletes += 1;
            return Ok(());
        }
        let mut level = rec.level;
        loop {
            let cu = self.f.cluster_of(u, level - 1);
            let cv = self.f.cluster_of(v, level - 1);
            if cu == cv {
                break; // the deleted connection is internal to one child; nothing to certify
            }
            let p = self.f.parent_of(cu).expect("distinct siblings have a parent");
            debug_assert_eq!(self.f.parent_of(cv), Some(p));
            debug_assert_eq!(self.f.level_of(p), level);
            match self.replacement_search(p, level, cu, cv, u, v) {
                SearchOutcome::Reconnected => break,
                SearchOutcome::Split { piece } => {
                    self.f.remove_child(p, piece);
                    let gp = self.f.parent_of(p);
                    if self.f.child_count(p) == 1 {
                        // Remaining same-level edges are internal to the one
                        // child; the node is spliced and they rest in place.
                        self.f.splice_out(p);
                    }
                    match gp {
                        None => {
                            // The component itself split.
                            break;
                        }
                        Some(gp) => {
                            self.f.add_child(gp, piece);
                            level = self.f.level_of(gp);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Alternating search over the level-`i` cluster graph of `p`, starting
    /// from the two children `cu` and `cv`.
    fn replacement_search(
        &mut self,
        p: ClusterId,
        i: u8,
        cu: ClusterId,
        cv: ClusterId,
        u: VertexId,
        v: VertexId,
    ) -> SearchOutcome {
        let half = 1u64 << (i - 1);
        let mut sides = [
            SideState::new(cu, u, self.f.size_of(cu) as u64),
            SideState::new(cv, v, self.f.size_of(cv) as u64),
        ];
        let mut turn = 0usize;
        enum Stop {
            Contact(EdgeKey),
            Small(usize),
        }
        let stop = loop {
            let (a, b) = sides.split_at_mut(1);
            let (cur, other) = if turn == 0 { (&mut a[0], &b[0]) } else { (&mut b[0], &a[0]) };
            match cur.step(other, &mut self.f, i, self.tracking) {
                StepResult::Traversed => {
                    turn ^= 1;
                    debug_assert!(sides[0].steps.abs_diff(sides[1].steps) <= 1);
                }
                StepResult::Contact(e) => break Stop::Contact(e),
                StepResult::Exhausted => {
                    if sides[turn].visited_size <= half {
                        break Stop::Small(turn);
                    }
                    // This side is the big half; the other side's component
                    // must be the small one. Run it alone to exhaustion: it
                    // cannot make contact with a completed component.
                    let alone = turn ^ 1;
                    loop {
                        let (a, b) = sides.split_at_mut(1);
                        let (cur, other) =
                            if alone == 0 { (&mut a[0], &b[0]) } else { (&mut b[0], &a[0]) };
                        match cur.step(other, &mut self.f, i, self.tracking) {
                            StepResult::Traversed => {}
                            StepResult::Contact(_) => {
                                unreachable!("contact with an exhausted component")
                            }
                            StepResult::Exhausted => break,
                        }
                    }
                    break Stop::Small(alone);
                }
            }
        };
        match stop {
            Stop::Contact(contact) => {
                // Reconnected; the smaller side's explored edges pay for the
                // search by moving one level down. Ties push the first side.
                let push_side =
                    if sides[0].visited_size <= sides[1].visited_size { 0 } else { 1 };
                assert!(
                    sides[push_side].visited_size <= half,
                    "pushed side exceeds the level size bound"
                );
                for &e in &sides[push_side].explored {
                    debug_assert_ne!(e, contact);
                    self.f.push_edge_one_level(e);
                }
                if self.tracking {
                    self.f.edges.get_mut(&contact).expect("live edge").is_tree = true;
                }
                SearchOutcome::Reconnected
            }
            Stop::Small(side) => {
                let st = &sides[side];
                assert!(st.visited_size <= half, "split side exceeds the level size bound");
                let explored = st.explored.clone();
                let seed = st.seed_vertex;
                for e in explored {
                    self.f.push_edge_one_level(e);
                }
                let piece = self.f.cluster_of(seed, i - 1);
                debug_assert!(self.f.parent_of(piece) == Some(p));
                SearchOutcome::Split { piece }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: u32) -> VertexId {
        VertexId(x)
    }

    #[test]
    fn insert_into_empty_forest() {
        let mut cf = CfForest::new(8, InsertMode::Root);
        cf.insert(v(0), v(1)).unwrap();
        assert!(cf.connected(v(0), v(1)));
        let rec = cf.edge_record(v(0), v(1)).unwrap();
        assert_eq!(rec.level, cf.l_max());
        assert!(rec.is_tree);
    }

    #[test]
    fn duplicate_insert_rejected_and_state_unchanged() {
        let mut cf = CfForest::new(8, InsertMode::Root);
        cf.insert(v(0), v(1)).unwrap();
        let before = cf.edge_count();
        assert_eq!(cf.insert(v(0), v(1)), Err(ConnError::DuplicateEdge(EdgeKey::new(v(0), v(1)))));
        assert_eq!(cf.insert(v(1), v(0)), Err(ConnError::DuplicateEdge(EdgeKey::new(v(0), v(1)))));
        assert_eq!(cf.edge_count(), before);
    }

    #[test]
    fn self_loop_rejected() {
        let mut cf = CfForest::new(8, InsertMode::Root);
        assert_eq!(cf.insert(v(3), v(3)), Err(ConnError::SelfLoop(v(3))));
    }

    #[test]
    fn connected_is_reflexive_and_fresh_forest_disconnected() {
        let cf = CfForest::new(8, InsertMode::Root);
        assert!(cf.connected(v(5), v(5)));
        assert!(!cf.connected(v(0), v(1)));
    }

    #[test]
    fn path_delete_middle() {
        let mut cf = CfForest::new(8, InsertMode::Root);
        cf.insert(v(0), v(1)).unwrap();
        cf.insert(v(1), v(2)).unwrap();
        cf.delete(v(0), v(1)).unwrap();
        assert!(!cf.connected(v(0), v(1)));
        assert!(cf.connected(v(1), v(2)));
    }

    #[test]
    fn missing_delete_rejected() {
        let mut cf = CfForest::new(8, InsertMode::Root);
        cf.insert(v(0), v(1)).unwrap();
        assert!(matches!(cf.delete(v(0), v(2)), Err(ConnError::MissingEdge(_))));
    }

    #[test]
    fn triangle_survives_any_single_deletion() {
        for mode in [InsertMode::Root, InsertMode::Lca] {
            let mut cf = CfForest::new(8, mode);
            cf.insert(v(0), v(1)).unwrap();
            cf.insert(v(1), v(2)).unwrap();
            cf.insert(v(0), v(2)).unwrap();
            cf.delete(v(0), v(1)).unwrap();
            assert!(cf.connected(v(0), v(1)), "mode {mode:?}");
            cf.delete(v(1), v(2)).unwrap();
            assert!(cf.connected(v(1), v(2)), "mode {mode:?}");
            cf.delete(v(0), v(2)).unwrap();
            assert!(!cf.connected(v(0), v(1)), "mode {mode:?}");
            assert!(!cf.connected(v(2), v(1)), "mode {mode:?}");
        }
    }

    #[test]
    fn nontree_fast_path_skips_search() {
        let mut cf = CfForest::new(8, InsertMode::Root);
        cf.insert(v(0), v(1)).unwrap();
        cf.insert(v(1), v(2)).unwrap();
        cf.insert(v(0), v(2)).unwrap(); // closes a cycle: non-tree
        let rec = cf.edge_record(v(0), v(2)).unwrap();
        assert!(!rec.is_tree);
        let fetches_before = cf.counters().fetches;
        cf.delete(v(0), v(2)).unwrap();
        assert_eq!(cf.counters().fetches, fetches_before, "fast path must not search");
        assert_eq!(cf.counters().nontree_fast_deletes, 1);
        assert!(cf.connected(v(0), v(2)));
    }

    #[test]
    fn figure_one_replacement() {
        // Component: 4-5, 5-6, 5-7, 4-6 plus the edge 4-6 deleted; deleting
        // the 4-6 tree edge must keep everything connected through 5.
        let mut cf = CfForest::new(8, InsertMode::Root);
        cf.insert(v(4), v(6)).unwrap();
        cf.insert(v(4), v(5)).unwrap();
        cf.insert(v(5), v(6)).unwrap();
        cf.insert(v(5), v(7)).unwrap();
        cf.delete(v(4), v(6)).unwrap();
        for (a, b) in [(4, 5), (4, 6), (4, 7), (5, 6), (5, 7), (6, 7)] {
            assert!(cf.connected(v(a), v(b)), "{a}-{b}");
        }
    }

    #[test]
    fn lca_mode_stores_nontree_edges_lower() {
        let mut cf = CfForest::new(16, InsertMode::Lca);
        cf.insert(v(0), v(1)).unwrap();
        cf.insert(v(2), v(3)).unwrap();
        cf.insert(v(1), v(2)).unwrap();
        // 0 and 1 share the lowest cluster created by their tree edge; a new
        // non-tree edge between them lands at that cluster's level, not L_max.
        cf.insert(v(0), v(2)).unwrap();
        let rec = cf.edge_record(v(0), v(2)).unwrap();
        assert!(rec.level <= cf.l_max());
        assert!(!rec.is_tree);
    }

    #[test]
    fn component_split_creates_two_roots() {
        let mut cf = CfForest::new(8, InsertMode::Root);
        cf.insert(v(0), v(1)).unwrap();
        cf.insert(v(2), v(3)).unwrap();
        cf.insert(v(1), v(2)).unwrap();
        assert!(cf.connected(v(0), v(3)));
        cf.delete(v(1), v(2)).unwrap();
        assert!(!cf.connected(v(0), v(3)));
        assert!(cf.connected(v(0), v(1)));
        assert!(cf.connected(v(2), v(3)));
    }

    #[test]
    fn star_search_marks_first_visit_edges_as_tree() {
        let mut cf = CfForest::new(16, InsertMode::Root);
        // Star around 0 built as tree edges, then parallel non-tree cycle
        // edges; deleting a tree edge re-marks first-visit edges.
        for b in 1..=4 {
            cf.insert(v(0), v(b)).unwrap();
        }
        cf.insert(v(1), v(2)).unwrap();
        cf.insert(v(2), v(3)).unwrap();
        assert!(!cf.edge_record(v(1), v(2)).unwrap().is_tree);
        cf.delete(v(0), v(1)).unwrap();
        assert!(cf.connected(v(0), v(1)));
        // 1 is only reachable through the 1-2 edge now; some search must have
        // marked it tree (it reached cluster {1} first).
        assert!(cf.edge_record(v(1), v(2)).unwrap().is_tree);
    }
}
