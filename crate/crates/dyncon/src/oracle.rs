//! Ground-truth connectivity and the structural auditor.
//!
//! The oracle keeps the live edge set and answers connectivity from a
//! union-find rebuilt on demand; it is the reference every forest is checked
//! against. The auditor turns the structural guarantees into full-scan
//! runtime checks and reports violations instead of panicking, so tests can
//! assert both their absence on healthy forests and their presence under
//! seeded corruption.

use crate::batch_tree::BatchLocalTree;
use crate::blocked::BlockedForest;
use crate::connectivity::CfForest;
use crate::container::ChildContainer;
use crate::error::{ConnError, Result};
use crate::forest::ClusterForest;
use crate::hdt::HdtConnectivity;
use crate::ids::{ClusterId, EdgeKey, VertexId};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

// ----- union-find -----

#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: u32) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub fn find(&mut self, x: u32) -> u32 {
        let mut root = x;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        let mut cur = x;
        while self.parent[cur as usize] != root {
            let next = self.parent[cur as usize];
            self.parent[cur as usize] = root;
            cur = next;
        }
        root
    }

    pub fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[rb as usize] = ra;
        }
    }
}

// ----- ground-truth edge-set oracle -----

/// Mirrors the applied update stream exactly; connectivity is authoritative.
#[derive(Clone, Debug)]
pub struct EdgeSetOracle {
    n: u32,
    live: BTreeSet<EdgeKey>,
    cache: Option<UnionFind>,
}

impl EdgeSetOracle {
    pub fn new(n: u32) -> Self {
        assert!(n >= 2);
        EdgeSetOracle { n, live: BTreeSet::new(), cache: None }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.live.len()
    }

    pub fn contains(&self, u: VertexId, v: VertexId) -> bool {
        u != v && self.live.contains(&EdgeKey::new(u, v))
    }

    pub fn edges(&self) -> impl Iterator<Item = EdgeKey> + '_ {
        self.live.iter().copied()
    }

    fn check_vertex(&self, v: VertexId) -> Result<()> {
        if v.0 < self.n {
            Ok(())
        } else {
            Err(ConnError::VertexOutOfRange { v, n: self.n })
        }
    }

    pub fn insert(&mut self, u: VertexId, v: VertexId) -> Result<()> {
        self.check_vertex(u)?;
        self.check_vertex(v)?;
        if u == v {
            return Err(ConnError::SelfLoop(u));
        }
        let key = EdgeKey::new(u, v);
        if !self.live.insert(key) {
            return Err(ConnError::DuplicateEdge(key));
        }
        self.cache = None;
        Ok(())
    }

    pub fn delete(&mut self, u: VertexId, v: VertexId) -> Result<()> {
        self.check_vertex(u)?;
        self.check_vertex(v)?;
        if u == v {
            return Err(ConnError::SelfLoop(u));
        }
        let key = EdgeKey::new(u, v);
        if !self.live.remove(&key) {
            return Err(ConnError::MissingEdge(key));
        }
        self.cache = None;
        Ok(())
    }

    pub fn connected(&mut self, u: VertexId, v: VertexId) -> bool {
        assert!(u.0 < self.n && v.0 < self.n);
        if u == v {
            return true;
        }
        if self.cache.is_none() {
            let mut uf = UnionFind::new(self.n);
            for e in &self.live {
                uf.union(e.a.0, e.b.0);
            }
            self.cache = Some(uf);
        }
        let uf = self.cache.as_mut().expect("just built");
        uf.find(u.0) == uf.find(v.0)
    }
}

// ----- uncompressed shadow forest -----

/// The full leveled hierarchy rebuilt from scratch: for every level `l`, the
/// partition of vertices into components of the graph restricted to edges
/// with level <= `l`. Compressed forests are checked against it.
#[derive(Clone, Debug)]
pub struct ShadowForest {
    n: u32,
    reps: Vec<Vec<u32>>, // reps[l][v]
}

impl ShadowForest {
    pub fn from_edges(n: u32, top: u8, edges: impl IntoIterator<Item = (EdgeKey, u8)>) -> Self {
        let mut by_level: Vec<Vec<EdgeKey>> = vec![Vec::new(); top as usize + 1];
        for (key, level) in edges {
            by_level[level as usize].push(key);
        }
        let mut reps = Vec::with_capacity(top as usize + 1);
        let mut uf = UnionFind::new(n);
        for l in 0..=top as usize {
            for e in &by_level[l] {
                uf.union(e.a.0, e.b.0);
            }
            reps.push((0..n).map(|v| uf.find(v)).collect());
        }
        ShadowForest { n, reps }
    }

    /// Canonical representative of the level-`l` cluster containing `v`.
    pub fn rep(&self, v: VertexId, l: u8) -> u32 {
        self.reps[l as usize][v.idx()]
    }

    pub fn members(&self, v: VertexId, l: u8) -> Vec<VertexId> {
        let r = self.rep(v, l);
        (0..self.n).filter(|&x| self.reps[l as usize][x as usize] == r).map(VertexId).collect()
    }

    /// Lowest level at which `u` and `v` share a cluster.
    pub fn lowest_shared_level(&self, u: VertexId, v: VertexId) -> Option<u8> {
        (0..self.reps.len() as u8).find(|&l| self.rep(u, l) == self.rep(v, l))
    }
}

// ----- auditor -----

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Check {
    /// Cluster size within the per-level bound.
    SizeInvariant,
    /// Stored sizes equal the sum over children.
    SizeConsistency,
    /// Node bitmaps equal the OR over children.
    BitmapSoundness,
    /// Leaf edge sets sorted, non-empty, bitmap-aligned.
    LeafConsistency,
    /// Children point back at their parent; roots partition the vertices.
    ParentLinks,
    /// No unwitnessed single-child nodes; two-child minimum where required.
    Compression,
    /// Every live edge rests inside an explicit cluster of its own level.
    EdgeStructure,
    /// Leaf set sizes sum to twice the edge count.
    EdgeSum,
    /// Tree-flagged edges keep every cluster graph connected.
    TreeConnectivity,
    /// Every child touches a blocked edge unless its parent is isolated.
    BlockedInvariant,
    /// No two vertex-disjoint blocked edges in one cluster graph.
    BlockedMatching,
    /// Cluster graphs have diameter at most two.
    ClusterGraphDiameter,
    /// Some node reaches all others over blocked edges.
    ClusterGraphCenter,
    /// In graphs of four or more nodes the center is a largest cluster.
    HeavyCenter,
    /// An unblocked inter-cluster edge has an isolated endpoint.
    UnblockedIsolated,
    /// Tracked bytes stay linear in vertices plus edges.
    SpaceBound,
    /// Baseline: per-level component sizes within bound.
    HdtSizeInvariant,
    /// Baseline: tree edges present in every forest from their level up.
    HdtNesting,
}

#[derive(Clone, Debug)]
pub struct Violation {
    pub check: Check,
    pub detail: String,
}

#[derive(Clone, Debug, Default)]
pub struct AuditReport {
    pub violations: Vec<Violation>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, check: Check) -> usize {
        self.violations.iter().filter(|v| v.check == check).count()
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_clean() {
            return write!(f, "clean");
        }
        writeln!(f, "{} violation(s):", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  [{:?}] {}", v.check, v.detail)?;
        }
        Ok(())
    }
}

/// Generous linear-space constant: tracked bytes must stay below
/// `SPACE_FACTOR * (n + m + 1)` bytes.
pub const SPACE_FACTOR: u64 = 900;

struct CgEdge {
    x: ClusterId,
    y: ClusterId,
    blocked: bool,
    is_tree: bool,
}

fn structure_violations<C: ChildContainer>(
    f: &ClusterForest<C>,
    require_two_children: bool,
    blocked: bool,
    tracking: bool,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |check: Check, detail: String| out.push(Violation { check, detail });
    let n = f.n();
    let protected = f.protected;

    // Per-node structural checks.
    let mut all_nodes: Vec<ClusterId> = (0..n).map(ClusterId).collect();
    all_nodes.extend(f.live_internal_nodes());
    for &c in &all_nodes {
        let node = f.node(c);
        let cap = 1u64 << node.level.min(62);
        if node.size as u64 > cap {
            push(Check::SizeInvariant, format!("{c:?} level {} size {}", node.level, node.size));
        }
        if f.is_leaf(c) {
            if node.size != 1 {
                push(Check::SizeConsistency, format!("leaf {c:?} size {}", node.size));
            }
            let leaf = &f.leaves[c.idx()];
            if !leaf.check_consistent() {
                push(Check::LeafConsistency, format!("leaf {c:?} sets inconsistent"));
            }
            if leaf.bitmap != node.bitmap {
                push(Check::BitmapSoundness, format!("leaf {c:?} bitmap mismatch"));
            }
            continue;
        }
        let children = f.children_of(c);
        if children.is_empty() && Some(c) != protected {
            push(Check::Compression, format!("{c:?} has no children"));
            continue;
        }
        let mut size_sum = 0u64;
        let mut bm_or = 0u64;
        for &ch in &children {
            if !f.is_live(ch) {
                push(Check::ParentLinks, format!("{c:?} holds dead child {ch:?}"));
                continue;
            }
            let chn = f.node(ch);
            size_sum += chn.size as u64;
            bm_or |= chn.bitmap.0;
            if chn.parent != Some(c) {
                push(Check::ParentLinks, format!("{ch:?} parent is not {c:?}"));
            }
            if chn.level >= node.level {
                push(Check::ParentLinks, format!("{ch:?} level >= parent {c:?}"));
            }
        }
        if size_sum != node.size as u64 {
            push(
                Check::SizeConsistency,
                format!("{c:?} size {} != children sum {}", node.size, size_sum),
            );
        }
        if bm_or != node.bitmap.0 || node.children.agg_bitmap() != node.bitmap.0 {
            push(Check::BitmapSoundness, format!("{c:?} bitmap mismatch"));
        }
        if Some(c) != protected {
            if require_two_children && children.len() < 2 {
                push(Check::Compression, format!("{c:?} has {} child(ren)", children.len()));
            }
            if children.len() == 1 && !node.bitmap.test(node.level) {
                push(Check::Compression, format!("{c:?} single child, no level edge"));
            }
        }
    }
    // Roots partition the vertex set.
    let root_sum: u64 = f.roots().iter().map(|&r| f.size_of(r) as u64).sum();
    if root_sum != n as u64 {
        push(Check::ParentLinks, format!("roots cover {root_sum} of {n} vertices"));
    }

    // Edge sweep: placement checks plus cluster-graph construction.
    let mut cg: BTreeMap<ClusterId, Vec<CgEdge>> = BTreeMap::new();
    let mut leaf_entries = 0u64;
    for v in 0..n {
        leaf_entries += f.leaves[v as usize].total_edges() as u64;
    }
    if leaf_entries != 2 * f.edge_count() as u64 {
        push(
            Check::EdgeSum,
            format!("leaf entries {leaf_entries} != 2 * {} edges", f.edge_count()),
        );
    }
    for rec in f.live_edges() {
        let key = rec.key;
        let level = rec.level;
        if level == 0 || level > f.l_max() + 1 {
            push(Check::EdgeStructure, format!("{key:?} at level {level}"));
            continue;
        }
        for v in key.endpoints() {
            if !f.leaves[v.idx()].contains(key, level) {
                push(Check::EdgeStructure, format!("{key:?} missing in leaf {v} at {level}"));
            }
        }
        let x = f.cluster_of(key.a, level - 1);
        let y = f.cluster_of(key.b, level - 1);
        if x != y {
            let (px, py) = (f.parent_of(x), f.parent_of(y));
            if px != py || px.is_none() {
                push(Check::EdgeStructure, format!("{key:?} endpoints not siblings"));
                continue;
            }
            let p = px.expect("checked");
            if f.level_of(p) != level {
                push(
                    Check::EdgeStructure,
                    format!("{key:?} level {level} inside level-{} node", f.level_of(p)),
                );
                continue;
            }
            let blocked_flag =
                f.size_of(x) as u64 + f.size_of(y) as u64 > 1u64 << (level - 1);
            cg.entry(p).or_default().push(CgEdge { x, y, blocked: blocked_flag, is_tree: rec.is_tree });
        }
    }

    // Tree-subgraph connectivity over each explicit cluster graph.
    if tracking {
        for &c in &all_nodes {
            if f.is_leaf(c) || Some(c) == protected {
                continue;
            }
            let children = f.children_of(c);
            if children.len() < 2 {
                continue;
            }
            let index: BTreeMap<ClusterId, u32> =
                children.iter().enumerate().map(|(i, &ch)| (ch, i as u32)).collect();
            let mut uf = UnionFind::new(children.len() as u32);
            if let Some(edges) = cg.get(&c) {
                for e in edges {
                    if e.is_tree {
                        uf.union(index[&e.x], index[&e.y]);
                    }
                }
            }
            let root0 = uf.find(0);
            if (1..children.len() as u32).any(|i| uf.find(i) != root0) {
                push(Check::TreeConnectivity, format!("{c:?} children not tree-connected"));
            }
        }
    }

    // Blocked-structure lemmas, audited per explicit cluster graph.
    if blocked {
        for &c in &all_nodes {
            if f.is_leaf(c) || Some(c) == protected {
                continue;
            }
            let children = f.children_of(c);
            let edges = cg.get(&c).map(Vec::as_slice).unwrap_or(&[]);
            let level = f.level_of(c);
            let isolated_parent = children.len() == 1;
            let mut touches_blocked: BTreeSet<ClusterId> = BTreeSet::new();
            let mut blocked_pairs: BTreeSet<(ClusterId, ClusterId)> = BTreeSet::new();
            let mut adj: BTreeMap<ClusterId, BTreeSet<ClusterId>> = BTreeMap::new();
            let mut blocked_adj: BTreeMap<ClusterId, BTreeSet<ClusterId>> = BTreeMap::new();
            for e in edges {
                adj.entry(e.x).or_default().insert(e.y);
                adj.entry(e.y).or_default().insert(e.x);
                if e.blocked {
                    touches_blocked.insert(e.x);
                    touches_blocked.insert(e.y);
                    blocked_pairs.insert((e.x.min(e.y), e.x.max(e.y)));
                    blocked_adj.entry(e.x).or_default().insert(e.y);
                    blocked_adj.entry(e.y).or_default().insert(e.x);
                } else if level >= 2 {
                    let iso = |z: ClusterId| f.level_of(z) < level - 1 || f.child_count(z) == 1;
                    if !iso(e.x) && !iso(e.y) {
                        push(
                            Check::UnblockedIsolated,
                            format!("unblocked edge {:?}-{:?} in {c:?}", e.x, e.y),
                        );
                    }
                }
            }
            if !isolated_parent {
                for &ch in &children {
                    if !touches_blocked.contains(&ch) {
                        push(
                            Check::BlockedInvariant,
                            format!("{ch:?} in {c:?} touches no blocked edge"),
                        );
                    }
                }
            }
            let pairs: Vec<_> = blocked_pairs.iter().collect();
            for i in 0..pairs.len() {
                for j in (i + 1)..pairs.len() {
                    let (a, b) = (pairs[i], pairs[j]);
                    if a.0 != b.0 && a.0 != b.1 && a.1 != b.0 && a.1 != b.1 {
                        push(
                            Check::BlockedMatching,
                            format!("disjoint blocked edges {a:?} and {b:?} in {c:?}"),
                        );
                    }
                }
            }
            if children.len() >= 2 {
                // Diameter <= 2 by two-step closure from each node.
                for &s in &children {
                    let empty = BTreeSet::new();
                    let near = adj.get(&s).unwrap_or(&empty);
                    for &t in &children {
                        if t == s || near.contains(&t) {
                            continue;
                        }
                        let two = near.iter().any(|&m| {
                            adj.get(&m).map_or(false, |nn| nn.contains(&t))
                        });
                        if !two {
                            push(
                                Check::ClusterGraphDiameter,
                                format!("{s:?} and {t:?} beyond distance 2 in {c:?}"),
                            );
                        }
                    }
                }
                let center = children.iter().copied().find(|&cand| {
                    let empty = BTreeSet::new();
                    let ba = blocked_adj.get(&cand).unwrap_or(&empty);
                    children.iter().all(|&o| o == cand || ba.contains(&o))
                });
                if center.is_none() {
                    push(Check::ClusterGraphCenter, format!("no blocked-edge center in {c:?}"));
                } else if children.len() >= 4 {
                    let max_size = children.iter().map(|&ch| f.size_of(ch)).max().unwrap_or(0);
                    let heavy_ok = children.iter().any(|&cand| {
                        f.size_of(cand) == max_size && {
                            let empty = BTreeSet::new();
                            let ba = blocked_adj.get(&cand).unwrap_or(&empty);
                            children.iter().all(|&o| o == cand || ba.contains(&o))
                        }
                    });
                    if !heavy_ok {
                        push(Check::HeavyCenter, format!("largest cluster not a center in {c:?}"));
                    }
                }
            }
        }
        // Quiescent blocked forests keep no edges at the transient top level.
        for rec in f.live_edges() {
            if rec.level > f.l_max() {
                push(Check::EdgeStructure, format!("{:?} rests at the top level", rec.key));
            }
        }
    }

    let space_cap = SPACE_FACTOR * (n as u64 + f.edge_count() as u64 + 1);
    if f.stats.current_bytes > space_cap {
        push(
            Check::SpaceBound,
            format!("tracked {} bytes > cap {space_cap}", f.stats.current_bytes),
        );
    }
    out
}

pub fn audit_cf(cf: &CfForest) -> AuditReport {
    AuditReport { violations: structure_violations(&cf.f, true, false, cf.tracking()) }
}

pub fn audit_blocked(bf: &BlockedForest) -> AuditReport {
    AuditReport { violations: structure_violations(&bf.f, false, true, false) }
}

pub fn audit_hdt(h: &HdtConnectivity) -> AuditReport {
    let mut out = Vec::new();
    for level in 1..=h.l_max() {
        for (root, size) in h.component_sizes_at(level) {
            if size as u64 > 1u64 << level {
                out.push(Violation {
                    check: Check::HdtSizeInvariant,
                    detail: format!("level {level} component at node {root} has size {size}"),
                });
            }
        }
    }
    for (key, level) in h.tree_edges() {
        for j in level..=h.l_max() {
            if !h.has_tree_nodes(j, key) {
                out.push(Violation {
                    check: Check::HdtNesting,
                    detail: format!("tree edge {key:?} (level {level}) absent at {j}"),
                });
            }
        }
    }
    for (key, level) in h.nontree_edges() {
        if !h.connected_at_level(level, key.a, key.b) {
            out.push(Violation {
                check: Check::HdtNesting,
                detail: format!("non-tree edge {key:?} endpoints split at level {level}"),
            });
        }
    }
    AuditReport { violations: out }
}

/// Hop count from the deepest leaf to its forest root, through container
/// internals and cluster nodes, for the depth audits.
pub fn max_forest_depth<C: ChildContainer>(f: &ClusterForest<C>) -> u32 {
    fn walk<C: ChildContainer>(f: &ClusterForest<C>, c: ClusterId, depth: u32, best: &mut u32) {
        if f.is_leaf(c) {
            *best = (*best).max(depth);
            return;
        }
        let kids = {
            let node = f.node(c);
            node.children.children_with_depth(f.arena_ref())
        };
        for (ch, hops) in kids {
            walk(f, ch, depth + hops, best);
        }
    }
    let mut best = 0;
    for r in f.roots() {
        walk(f, r, 0, &mut best);
    }
    best
}

pub fn blocked_forest_depth(bf: &BlockedForest) -> u32 {
    max_forest_depth(&bf.f)
}

pub fn cf_forest_depth(cf: &CfForest) -> u32 {
    max_forest_depth(&cf.f)
}

/// Shadow forest snapshot of a cluster forest's live edges.
pub fn shadow_of_cf(cf: &CfForest) -> ShadowForest {
    ShadowForest::from_edges(
        cf.n(),
        cf.l_max() + 1,
        cf.f.live_edges().map(|r| (r.key, r.level)).collect::<Vec<_>>(),
    )
}

pub fn shadow_of_blocked(bf: &BlockedForest) -> ShadowForest {
    ShadowForest::from_edges(
        bf.n(),
        bf.l_max() + 1,
        bf.f.live_edges().map(|r| (r.key, r.level)).collect::<Vec<_>>(),
    )
}

/// Seeded corruption hooks backing the auditor's own test suite. Each breaks
/// exactly one structural guarantee class on a suitable target, returning
/// false when the forest has no such target.
#[doc(hidden)]
pub mod testing {
    use super::*;

    /// Oversizes one internal node past its level bound.
    pub fn corrupt_node_size(bf: &mut BlockedForest) -> bool {
        let target = bf.f.live_internal_nodes().find(|&c| Some(c) != Some(bf.global_root()));
        let Some(c) = target else { return false };
        let level = bf.f.level_of(c);
        bf.f.node_mut(c).size = (1u64 << level.min(30)) as u32 + 1;
        true
    }

    /// Flips an unused high bit in an internal node's bitmap.
    pub fn corrupt_bitmap_bit(bf: &mut BlockedForest) -> bool {
        let target = bf.f.live_internal_nodes().next();
        let Some(c) = target else { return false };
        bf.f.node_mut(c).bitmap.0 ^= 1 << 60;
        true
    }

    /// Rewrites an edge's indexed level without moving it in the leaves.
    pub fn corrupt_edge_level(bf: &mut BlockedForest) -> bool {
        let key = bf.f.live_edges().find(|r| r.level >= 1).map(|r| r.key);
        let Some(key) = key else { return false };
        let rec = bf.f.edges.get_mut(&key).expect("live");
        rec.level += 1;
        true
    }

    /// Grafts an unwitnessed single-child node above some cluster.
    pub fn graft_single_child(bf: &mut BlockedForest) -> bool {
        let root = bf.global_root();
        let target = bf.f.children_of(root).into_iter().find(|&c| {
            bf.f.level_of(c) + 1 < bf.f.level_of(root)
        });
        let Some(c) = target else { return false };
        let level = bf.f.level_of(c) + 1;
        bf.f.remove_child(root, c);
        let q = bf.f.alloc_cluster(level);
        bf.f.add_child(q, c);
        bf.f.add_child(root, q);
        true
    }

    /// Inflates the endpoints of two disjoint cluster-graph edges so both
    /// read as blocked, faking a matching of size two.
    pub fn corrupt_blocked_matching(bf: &mut BlockedForest) -> bool {
        // Find an explicit cluster whose graph has two vertex-disjoint edges.
        let mut per_parent: BTreeMap<ClusterId, Vec<(ClusterId, ClusterId)>> = BTreeMap::new();
        let records: Vec<_> = bf.f.live_edges().copied().collect();
        for rec in records {
            let x = bf.f.cluster_of(rec.key.a, rec.level - 1);
            let y = bf.f.cluster_of(rec.key.b, rec.level - 1);
            if x == y {
                continue;
            }
            if let Some(p) = bf.f.parent_of(x) {
                if p != bf.global_root() && bf.f.level_of(p) == rec.level {
                    per_parent.entry(p).or_default().push((x.min(y), x.max(y)));
                }
            }
        }
        for (p, pairs) in per_parent {
            let level = bf.f.level_of(p);
            for i in 0..pairs.len() {
                for j in (i + 1)..pairs.len() {
                    let (a, b) = (pairs[i], pairs[j]);
                    if a.0 != b.0 && a.0 != b.1 && a.1 != b.0 && a.1 != b.1 {
                        let bump = (1u64 << level.min(30)) as u32;
                        for c in [a.0, a.1, b.0, b.1] {
                            bf.f.node_mut(c).size = bump;
                        }
                        return true;
                    }
                }
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connectivity::InsertMode;

    fn v(x: u32) -> VertexId {
        VertexId(x)
    }

    #[test]
    fn oracle_reflexive_and_empty() {
        let mut o = EdgeSetOracle::new(8);
        assert!(o.connected(v(3), v(3)));
        assert!(!o.connected(v(0), v(1)));
    }

    #[test]
    fn oracle_matches_matrix_closure_on_small_graphs() {
        // Oracle-of-oracle: boolean matrix closure on n <= 16.
        let n = 10u32;
        let mut o = EdgeSetOracle::new(n);
        let edges = [(0u32, 1u32), (1, 2), (3, 4), (5, 6), (6, 7), (7, 5), (8, 9), (2, 3)];
        for &(a, b) in &edges {
            o.insert(v(a), v(b)).unwrap();
        }
        o.delete(v(2), v(3)).unwrap();
        let mut reach = vec![vec![false; n as usize]; n as usize];
        for i in 0..n as usize {
            reach[i][i] = true;
        }
        for e in o.edges().collect::<Vec<_>>() {
            reach[e.a.idx()][e.b.idx()] = true;
            reach[e.b.idx()][e.a.idx()] = true;
        }
        for k in 0..n as usize {
            for i in 0..n as usize {
                for j in 0..n as usize {
                    reach[i][j] |= reach[i][k] && reach[k][j];
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                assert_eq!(o.connected(v(i), v(j)), reach[i as usize][j as usize], "{i}-{j}");
            }
        }
    }

    #[test]
    fn shadow_matches_cluster_of_on_small_forest() {
        let mut cf = CfForest::new(16, InsertMode::Lca);
        for &(a, b) in &[(0u32, 1u32), (1, 2), (2, 3), (4, 5), (5, 6), (0, 3)] {
            cf.insert(v(a), v(b)).unwrap();
        }
        cf.delete(v(1), v(2)).unwrap();
        let shadow = shadow_of_cf(&cf);
        for l in 0..=cf.l_max() {
            for a in 0..16u32 {
                for b in 0..16u32 {
                    let same_forest =
                        cf.f.cluster_of(v(a), l) == cf.f.cluster_of(v(b), l);
                    let same_shadow = shadow.rep(v(a), l) == shadow.rep(v(b), l);
                    assert_eq!(same_forest, same_shadow, "level {l}, pair {a}-{b}");
                }
            }
        }
    }

    #[test]
    fn clean_forests_audit_clean() {
        let mut cf = CfForest::new(16, InsertMode::Root);
        let mut bf = BlockedForest::new(16);
        for &(a, b) in &[(0u32, 1u32), (1, 2), (2, 0), (3, 4), (4, 5), (2, 3)] {
            cf.insert(v(a), v(b)).unwrap();
            bf.insert(v(a), v(b)).unwrap();
        }
        cf.delete(v(2), v(3)).unwrap();
        bf.delete(v(2), v(3)).unwrap();
        let rc = audit_cf(&cf);
        assert!(rc.is_clean(), "cf: {rc}");
        let rb = audit_blocked(&bf);
        assert!(rb.is_clean(), "blocked: {rb}");
    }

    #[test]
    fn corrupted_size_is_flagged_exactly_once() {
        let mut bf = BlockedForest::new(16);
        for &(a, b) in &[(0u32, 1u32), (1, 2), (3, 4)] {
            bf.insert(v(a), v(b)).unwrap();
        }
        assert!(audit_blocked(&bf).is_clean());
        assert!(testing::corrupt_node_size(&mut bf));
        let report = audit_blocked(&bf);
        assert_eq!(report.count(Check::SizeInvariant), 1, "{report}");
        assert!(!report.is_clean());
    }
}
