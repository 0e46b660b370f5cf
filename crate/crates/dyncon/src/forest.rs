//! The cluster forest core: leveled cluster nodes over vertex leaves.
//!
//! Nodes live in one arena; ids below `n` are the leaves. A node is explicit
//! only while some edge of its own level lives strictly inside it (leaves
//! always, the protected global root in blocked mode). Internal nodes organize
//! children through a [`ChildContainer`], so everything here is shared by the
//! sequential and the blocked forests.

use crate::container::{ChildContainer, ChildRef, ContainerPolicy};
use crate::ids::{ceil_log2, floor_log2, ClusterId, EdgeKey, EdgeRecord, LevelBitmap, VertexId};
use crate::leaf::LeafEdges;
use crate::stats::{AllocStats, Counters, EDGE_INDEX_ENTRY_BYTES};
use std::collections::BTreeMap;

#[derive(Clone, Debug)]
pub struct ClusterNode<C> {
    pub level: u8,
    pub size: u32,
    pub seq: u32,
    pub parent: Option<ClusterId>,
    /// Slot handle inside the parent's container.
    pub slot: u32,
    pub bitmap: LevelBitmap,
    pub children: C,
    pub live: bool,
}

#[derive(Clone, Debug)]
pub struct ClusterForest<C: ChildContainer> {
    n: u32,
    l_max: u8,
    policy: ContainerPolicy,
    pub(crate) nodes: Vec<ClusterNode<C>>,
    free: Vec<ClusterId>,
    pub(crate) leaves: Vec<LeafEdges>,
    pub(crate) arena: C::Arena,
    pub(crate) edges: BTreeMap<EdgeKey, EdgeRecord>,
    pub stats: AllocStats,
    pub counters: Counters,
    next_seq: u32,
    /// Node exempt from splicing and witness rules (the blocked global root).
    pub(crate) protected: Option<ClusterId>,
}

impl<C: ChildContainer> ClusterForest<C> {
    pub fn new(n: u32) -> Self {
        assert!(n >= 2, "a forest needs at least two vertices");
        let l_max = ceil_log2(n);
        let mut stats = AllocStats::default();
        let node_bytes = std::mem::size_of::<ClusterNode<C>>() as u64;
        let leaf_bytes = std::mem::size_of::<LeafEdges>() as u64;
        stats.add(n as u64 * (node_bytes + leaf_bytes));
        let nodes = (0..n)
            .map(|i| ClusterNode {
                level: 0,
                size: 1,
                seq: i,
                parent: None,
                slot: u32::MAX,
                bitmap: LevelBitmap::EMPTY,
                children: C::default(),
                live: true,
            })
            .collect();
        ClusterForest {
            n,
            l_max,
            policy: ContainerPolicy { consolidate_threshold: floor_log2(n) as u32 },
            nodes,
            free: Vec::new(),
            leaves: (0..n).map(|_| LeafEdges::default()).collect(),
            arena: C::Arena::default(),
            edges: BTreeMap::new(),
            stats,
            counters: Counters::default(),
            next_seq: n,
            protected: None,
        }
    }

    #[inline]
    pub fn n(&self) -> u32 {
        self.n
    }

    #[inline]
    pub fn l_max(&self) -> u8 {
        self.l_max
    }

    #[inline]
    pub fn leaf_cluster(&self, v: VertexId) -> ClusterId {
        ClusterId(v.0)
    }

    #[inline]
    pub fn is_leaf(&self, c: ClusterId) -> bool {
        c.0 < self.n
    }

    #[inline]
    pub(crate) fn node(&self, c: ClusterId) -> &ClusterNode<C> {
        debug_assert!(self.nodes[c.idx()].live, "dead node {c:?}");
        &self.nodes[c.idx()]
    }

    #[inline]
    pub(crate) fn node_mut(&mut self, c: ClusterId) -> &mut ClusterNode<C> {
        debug_assert!(self.nodes[c.idx()].live, "dead node {c:?}");
        &mut self.nodes[c.idx()]
    }

    pub fn is_live(&self, c: ClusterId) -> bool {
        c.idx() < self.nodes.len() && self.nodes[c.idx()].live
    }

    pub fn size_of(&self, c: ClusterId) -> u32 {
        self.node(c).size
    }

    pub fn level_of(&self, c: ClusterId) -> u8 {
        self.node(c).level
    }

    pub fn parent_of(&self, c: ClusterId) -> Option<ClusterId> {
        self.node(c).parent
    }

    pub fn child_count(&self, c: ClusterId) -> usize {
        self.node(c).children.len()
    }

    pub fn edge_record(&self, key: EdgeKey) -> Option<&EdgeRecord> {
        self.edges.get(&key)
    }

    pub fn live_edges(&self) -> impl Iterator<Item = &EdgeRecord> {
        self.edges.values()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    fn child_ref(&self, c: ClusterId) -> ChildRef {
        let n = self.node(c);
        ChildRef { id: c, size: n.size, bitmap: n.bitmap.0, seq: n.seq, marked: false }
    }

    fn with_container<R>(
        &mut self,
        p: ClusterId,
        f: impl FnOnce(&mut C, &mut C::Arena, ContainerPolicy, &mut AllocStats) -> R,
    ) -> R {
        let policy = self.policy;
        let Self { nodes, arena, stats, .. } = self;
        f(&mut nodes[p.idx()].children, arena, policy, stats)
    }

    pub(crate) fn alloc_cluster(&mut self, level: u8) -> ClusterId {
        self.stats.add(std::mem::size_of::<ClusterNode<C>>() as u64);
        let seq = self.next_seq;
        self.next_seq += 1;
        let node = ClusterNode {
            level,
            size: 0,
            seq,
            parent: None,
            slot: u32::MAX,
            bitmap: LevelBitmap::EMPTY,
            children: C::default(),
            live: true,
        };
        if let Some(id) = self.free.pop() {
            self.nodes[id.idx()] = node;
            id
        } else {
            self.nodes.push(node);
            ClusterId((self.nodes.len() - 1) as u32)
        }
    }

    pub(crate) fn free_cluster(&mut self, c: ClusterId) {
        debug_assert!(!self.is_leaf(c), "leaves are never freed");
        debug_assert_eq!(self.node(c).children.len(), 0, "freeing a node with children");
        self.stats.sub(std::mem::size_of::<ClusterNode<C>>() as u64);
        self.nodes[c.idx()].live = false;
        self.free.push(c);
    }

    /// The deepest ancestor of `v` with level <= `l`: the representative of
    /// the (possibly compressed-away) level-`l` cluster containing `v`.
    pub fn cluster_of(&self, v: VertexId, l: u8) -> ClusterId {
        let mut cur = self.leaf_cluster(v);
        loop {
            match self.node(cur).parent {
                Some(p) if self.node(p).level <= l => cur = p,
                _ => return cur,
            }
        }
    }

    pub fn root_of(&self, c: ClusterId) -> ClusterId {
        let mut cur = c;
        while let Some(p) = self.node(cur).parent {
            cur = p;
        }
        cur
    }

    pub fn connected(&self, u: VertexId, v: VertexId) -> bool {
        u == v || self.root_of(self.leaf_cluster(u)) == self.root_of(self.leaf_cluster(v))
    }

    /// Lowest common cluster of two connected vertices: synchronized
    /// leaf-to-root walks aligned by level.
    pub fn lca_of(&self, u: VertexId, v: VertexId) -> Option<ClusterId> {
        let mut a = self.leaf_cluster(u);
        let mut b = self.leaf_cluster(v);
        while a != b {
            let (la, lb) = (self.node(a).level, self.node(b).level);
            if la < lb {
                a = self.node(a).parent?;
            } else if lb < la {
                b = self.node(b).parent?;
            } else {
                a = self.node(a).parent?;
                b = self.node(b).parent?;
            }
        }
        Some(a)
    }

    pub fn add_child(&mut self, p: ClusterId, c: ClusterId) {
        debug_assert!(self.node(c).parent.is_none(), "child {c:?} already attached");
        assert!(
            self.node(c).level < self.node(p).level,
            "level mismatch: child {:?} level {} vs parent {:?} level {}",
            c,
            self.node(c).level,
            p,
            self.node(p).level
        );
        let cref = self.child_ref(c);
        let slot = self.with_container(p, |cont, arena, pol, st| cont.insert(arena, cref, pol, st));
        {
            let cn = self.node_mut(c);
            cn.parent = Some(p);
            cn.slot = slot;
        }
        let pn = self.node_mut(p);
        pn.size += cref.size;
        pn.bitmap.0 |= cref.bitmap;
        self.refresh_upward(p, cref.size as i64);
    }

    pub fn remove_child(&mut self, p: ClusterId, c: ClusterId) {
        debug_assert_eq!(self.node(c).parent, Some(p));
        let slot = self.node(c).slot;
        let csize = self.node(c).size;
        let displaced = self.with_container(p, |cont, arena, _, st| cont.remove(arena, slot, st));
        if let Some((moved, ns)) = displaced {
            self.node_mut(moved).slot = ns;
        }
        {
            let cn = self.node_mut(c);
            cn.parent = None;
            cn.slot = u32::MAX;
        }
        let agg = self.node(p).children.agg_bitmap();
        let pn = self.node_mut(p);
        pn.size -= csize;
        pn.bitmap = LevelBitmap(agg);
        self.refresh_upward(p, -(csize as i64));
    }

    /// Re-keys `x` in its ancestors' containers after its size and/or bitmap
    /// changed; `delta` is added to every ancestor's stored size.
    fn refresh_upward(&mut self, x: ClusterId, delta: i64) {
        let mut cur = x;
        loop {
            let Some(p) = self.node(cur).parent else { break };
            let slot = self.node(cur).slot;
            let marked = {
                let Self { nodes, arena, .. } = self;
                nodes[p.idx()].children.slot_marked(arena, slot)
            };
            let displaced =
                self.with_container(p, |cont, arena, _, st| cont.remove(arena, slot, st));
            if let Some((moved, ns)) = displaced {
                self.node_mut(moved).slot = ns;
            }
            let mut cref = self.child_ref(cur);
            cref.marked = marked;
            let nslot =
                self.with_container(p, |cont, arena, pol, st| cont.insert(arena, cref, pol, st));
            self.node_mut(cur).slot = nslot;
            let agg = self.node(p).children.agg_bitmap();
            let pn = self.node_mut(p);
            let changed = pn.bitmap.0 != agg || delta != 0;
            pn.bitmap = LevelBitmap(agg);
            pn.size = (pn.size as i64 + delta) as u32;
            if !changed {
                break;
            }
            cur = p;
        }
    }

    /// Propagates a bitmap-only change of `x` upward, stopping as soon as an
    /// ancestor's aggregate is unaffected.
    pub(crate) fn propagate_bitmap(&mut self, x: ClusterId) {
        let mut cur = x;
        loop {
            let Some(p) = self.node(cur).parent else { break };
            let bm = self.node(cur).bitmap.0;
            let slot = self.node(cur).slot;
            let changed = self
                .with_container(p, |cont, arena, _, _| cont.refresh_child_bitmap(arena, slot, bm));
            if !changed {
                break;
            }
            let agg = self.node(p).children.agg_bitmap();
            self.node_mut(p).bitmap = LevelBitmap(agg);
            cur = p;
        }
    }

    /// Merges two sibling clusters as the level-`l` cluster containing both.
    /// Both must represent distinct level-`l` clusters (levels <= `l`) under
    /// the same parent, or both be roots.
    pub fn merge_at_level(&mut self, l: u8, x: ClusterId, y: ClusterId) -> ClusterId {
        assert_ne!(x, y, "merging a cluster with itself");
        let (lx, ly) = (self.node(x).level, self.node(y).level);
        assert!(lx <= l && ly <= l, "level mismatch in merge at {l}");
        debug_assert_eq!(self.node(x).parent, self.node(y).parent);
        // Orderings below keep every attached node non-empty: a node is
        // detached from its parent before it can be drained.
        match (lx == l, ly == l) {
            (true, true) => {
                // Absorb into the node with more children.
                let (survivor, loser) = if self.node(x).children.len() >= self.node(y).children.len()
                {
                    (x, y)
                } else {
                    (y, x)
                };
                if let Some(p) = self.node(loser).parent {
                    self.remove_child(p, loser);
                }
                let moved = {
                    let Self { nodes, arena, .. } = self;
                    nodes[loser.idx()].children.children(arena)
                };
                for ch in moved {
                    self.remove_child(loser, ch);
                    self.add_child(survivor, ch);
                }
                self.free_cluster(loser);
                survivor
            }
            (true, false) => {
                if let Some(p) = self.node(y).parent {
                    self.remove_child(p, y);
                }
                self.add_child(x, y);
                x
            }
            (false, true) => {
                if let Some(p) = self.node(x).parent {
                    self.remove_child(p, x);
                }
                self.add_child(y, x);
                y
            }
            (false, false) => {
                let p = self.node(x).parent;
                let m = self.alloc_cluster(l);
                match p {
                    Some(p) => {
                        self.remove_child(p, x);
                        self.add_child(m, x);
                        self.add_child(p, m);
                        self.remove_child(p, y);
                        self.add_child(m, y);
                    }
                    None => {
                        self.add_child(m, x);
                        self.add_child(m, y);
                    }
                }
                m
            }
        }
    }

    /// Splices out a single-child node, promoting the child into its place.
    pub fn splice_out(&mut self, q: ClusterId) -> ClusterId {
        assert_eq!(self.node(q).children.len(), 1, "splice needs exactly one child");
        let c = {
            let Self { nodes, arena, .. } = self;
            nodes[q.idx()].children.any_child(arena).expect("one child")
        };
        match self.node(q).parent {
            Some(gp) => {
                self.remove_child(gp, q);
                self.remove_child(q, c);
                self.free_cluster(q);
                self.add_child(gp, c);
            }
            None => {
                self.remove_child(q, c);
                self.free_cluster(q);
            }
        }
        c
    }

    /// Splices `q` if it is a single-child node with no same-level edge left
    /// inside (the eager compression rule). Returns the promoted child.
    pub(crate) fn maybe_splice(&mut self, q: ClusterId) -> Option<ClusterId> {
        if !self.is_live(q) || self.is_leaf(q) || Some(q) == self.protected {
            return None;
        }
        let n = self.node(q);
        if n.children.len() == 1 && !n.bitmap.test(n.level) {
            Some(self.splice_out(q))
        } else {
            None
        }
    }

    // ----- edge bookkeeping -----

    pub(crate) fn attach_edge(&mut self, key: EdgeKey, level: u8, is_tree: bool) {
        let prev = self.edges.insert(key, EdgeRecord { key, level, is_tree });
        assert!(prev.is_none(), "edge {key:?} already indexed");
        self.stats.add(EDGE_INDEX_ENTRY_BYTES);
        for v in key.endpoints() {
            let Self { leaves, stats, .. } = self;
            if leaves[v.idx()].add_edge(key, level, stats) {
                let leaf = self.leaf_cluster(v);
                self.node_mut(leaf).bitmap.set(level);
                self.propagate_bitmap(leaf);
            }
        }
    }

    pub(crate) fn detach_edge(&mut self, key: EdgeKey) -> EdgeRecord {
        let rec = self.edges.remove(&key).unwrap_or_else(|| panic!("edge {key:?} not indexed"));
        self.stats.sub(EDGE_INDEX_ENTRY_BYTES);
        for v in key.endpoints() {
            let Self { leaves, stats, .. } = self;
            if leaves[v.idx()].remove_edge(key, rec.level, stats) {
                let leaf = self.leaf_cluster(v);
                self.node_mut(leaf).bitmap.clear(rec.level);
                self.propagate_bitmap(leaf);
            }
        }
        rec
    }

    fn move_edge_level(&mut self, key: EdgeKey, new_level: u8) {
        let old = self.edges.get(&key).expect("live edge").level;
        for v in key.endpoints() {
            let Self { leaves, stats, .. } = self;
            if leaves[v.idx()].remove_edge(key, old, stats) {
                let leaf = self.leaf_cluster(v);
                self.node_mut(leaf).bitmap.clear(old);
                self.propagate_bitmap(leaf);
            }
            let Self { leaves, stats, .. } = self;
            if leaves[v.idx()].add_edge(key, new_level, stats) {
                let leaf = self.leaf_cluster(v);
                self.node_mut(leaf).bitmap.set(new_level);
                self.propagate_bitmap(leaf);
            }
        }
        self.edges.get_mut(&key).expect("live edge").level = new_level;
    }

    /// Single-level push-down: moves the edge one level down, merging its two
    /// endpoint clusters there when they are distinct. The vacated witness
    /// node is spliced out if the move left it single-child and unwitnessed.
    pub fn push_edge_one_level(&mut self, key: EdgeKey) {
        let rec = *self.edges.get(&key).expect("live edge");
        let j = rec.level;
        assert!(j >= 1, "cannot push below level 1");
        let x = self.cluster_of(key.a, j - 1);
        let y = self.cluster_of(key.b, j - 1);
        let old_parent = self.node(x).parent;
        if x != y {
            debug_assert_eq!(self.node(x).parent, self.node(y).parent);
            let total = self.node(x).size as u64 + self.node(y).size as u64;
            assert!(
                total <= 1u64 << (j - 1),
                "push of {key:?} to level {} would oversize the merged cluster ({total})",
                j - 1
            );
            self.merge_at_level(j - 1, x, y);
        }
        self.move_edge_level(key, j - 1);
        self.counters.pushdowns += 1;
        if let Some(q) = old_parent {
            if self.is_live(q) && self.node(q).level == j {
                self.maybe_splice(q);
            }
        }
    }

    /// Relocates an edge that rests above the lowest cluster containing both
    /// endpoints down to that cluster's level. No merges happen on the way.
    pub fn push_edge_to_lca(&mut self, key: EdgeKey) {
        let target = {
            let lca = self.lca_of(key.a, key.b).expect("endpoints connected");
            self.node(lca).level
        };
        while self.edges.get(&key).expect("live edge").level > target {
            let level = self.edges[&key].level;
            debug_assert_eq!(
                self.cluster_of(key.a, level - 1),
                self.cluster_of(key.b, level - 1),
                "push to lca crossed a merge point"
            );
            self.push_edge_one_level(key);
        }
    }

    // ----- edge fetching -----

    /// Deterministic leftmost level-`level` edge beneath `c`.
    pub fn fetch_edge(&mut self, c: ClusterId, level: u8) -> EdgeKey {
        assert!(self.node(c).bitmap.test(level), "fetch on unset bit {level} of {c:?}");
        let mut cur = c;
        while !self.is_leaf(cur) {
            let Self { nodes, arena, .. } = self;
            cur = nodes[cur.idx()]
                .children
                .find_child_with_bit(arena, level)
                .expect("aggregate bit has a witness below");
        }
        self.counters.fetches += 1;
        self.leaves[cur.idx()].fetch_any(level)
    }

    /// Up to `k` distinct level-`level` edges beneath `c`, by frontier
    /// expansion over set bits with the frontier truncated to `k` paths.
    pub fn fetch_edges(&mut self, k: usize, c: ClusterId, level: u8) -> Vec<EdgeKey> {
        if k == 0 || !self.node(c).bitmap.test(level) {
            return Vec::new();
        }
        let mut frontier = vec![c];
        let mut leaves: Vec<ClusterId> = Vec::new();
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for x in frontier {
                if self.is_leaf(x) {
                    leaves.push(x);
                } else {
                    let Self { nodes, arena, .. } = self;
                    next.extend(nodes[x.idx()].children.children_with_bit(arena, level));
                }
            }
            if leaves.len() + next.len() > k {
                next.truncate(k.saturating_sub(leaves.len()));
            }
            frontier = next;
        }
        let mut out = std::collections::BTreeSet::new();
        'scan: for leaf in leaves {
            for e in self.leaves[leaf.idx()].level_edges(level) {
                self.counters.fetches += 1;
                out.insert(e);
                if out.len() == k {
                    break 'scan;
                }
            }
        }
        out.into_iter().collect()
    }

    /// All level-`level` edges with at least one endpoint beneath `c`.
    pub fn collect_level_edges(&self, c: ClusterId, level: u8) -> Vec<EdgeKey> {
        let mut out = std::collections::BTreeSet::new();
        let mut stack = vec![c];
        while let Some(x) = stack.pop() {
            if !self.node(x).bitmap.test(level) {
                continue;
            }
            if self.is_leaf(x) {
                out.extend(self.leaves[x.idx()].level_edges(level));
            } else {
                let Self { nodes, arena, .. } = self;
                stack.extend(nodes[x.idx()].children.children_with_bit(arena, level));
            }
        }
        out.into_iter().collect()
    }

    /// Leaves beneath `c` holding level-`level` edges, in traversal order.
    pub fn collect_level_leaves(&self, c: ClusterId, level: u8) -> Vec<VertexId> {
        let mut out = Vec::new();
        let mut stack = vec![c];
        while let Some(x) = stack.pop() {
            if !self.node(x).bitmap.test(level) {
                continue;
            }
            if self.is_leaf(x) {
                out.push(VertexId(x.0));
            } else {
                let Self { nodes, arena, .. } = self;
                let mut kids = nodes[x.idx()].children.children_with_bit(arena, level);
                kids.reverse();
                stack.extend(kids);
            }
        }
        out
    }

    /// All leaves beneath `c`.
    pub fn collect_leaves(&self, c: ClusterId) -> Vec<VertexId> {
        let mut out = Vec::new();
        let mut stack = vec![c];
        while let Some(x) = stack.pop() {
            if self.is_leaf(x) {
                out.push(VertexId(x.0));
            } else {
                let Self { nodes, arena, .. } = self;
                let mut kids = nodes[x.idx()].children.children(arena);
                kids.reverse();
                stack.extend(kids);
            }
        }
        out
    }

    pub fn children_of(&self, c: ClusterId) -> Vec<ClusterId> {
        let Self { nodes, arena, .. } = self;
        nodes[c.idx()].children.children(arena)
    }

    pub(crate) fn live_internal_nodes(&self) -> impl Iterator<Item = ClusterId> + '_ {
        (self.n as usize..self.nodes.len())
            .filter(|&i| self.nodes[i].live)
            .map(|i| ClusterId(i as u32))
    }

    pub fn roots(&self) -> Vec<ClusterId> {
        let mut out: Vec<ClusterId> = (0..self.nodes.len() as u32)
            .map(ClusterId)
            .filter(|&c| self.nodes[c.idx()].live && self.nodes[c.idx()].parent.is_none())
            .collect();
        out.sort();
        out
    }

    pub(crate) fn next_seq(&mut self) -> u32 {
        let s = self.next_seq;
        self.next_seq += 1;
        s
    }

    pub(crate) fn arena_ref(&self) -> &C::Arena {
        &self.arena
    }
}
