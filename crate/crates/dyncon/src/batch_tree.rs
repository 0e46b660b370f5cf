//! The batch-dynamic local tree: children grouped into size classes
//! (`floor(log2 size)`), one weight-balanced search tree per class keyed by
//! (size, creation seq), augmented with subtree totals, bitmap ORs and an
//! unmarked-element count. The class array, kept sorted by class, is the
//! flattened rank layer over the class trees.

use crate::container::{ChildContainer, ChildRef, ContainerPolicy};
use crate::ids::{floor_log2, ClusterId};
use crate::stats::AllocStats;

const NONE: u32 = u32::MAX;

/// Weight-balance parameter: a node is rebalanced when one side's weight
/// drops below 29/100 of the subtree weight.
const ALPHA_NUM: u64 = 29;
const ALPHA_DEN: u64 = 100;

#[derive(Clone, Debug)]
pub struct WbNode {
    cluster: ClusterId,
    key_size: u32,
    key_seq: u32,
    own_bitmap: u64,
    marked: bool,
    in_subset: bool,
    left: u32,
    right: u32,
    parent: u32,
    // Subtree aggregates (including this element).
    count: u32,
    total_size: u64,
    bitmap: u64,
    unmarked: u32,
    sub_count: u32,
    sub_total: u64,
}

#[derive(Clone, Debug, Default)]
pub struct WbArena {
    nodes: Vec<WbNode>,
    free: Vec<u32>,
}

impl WbArena {
    fn alloc(&mut self, node: WbNode, stats: &mut AllocStats) -> u32 {
        stats.add(std::mem::size_of::<WbNode>() as u64);
        if let Some(i) = self.free.pop() {
            self.nodes[i as usize] = node;
            i
        } else {
            self.nodes.push(node);
            (self.nodes.len() - 1) as u32
        }
    }

    fn release(&mut self, i: u32, stats: &mut AllocStats) {
        stats.sub(std::mem::size_of::<WbNode>() as u64);
        self.free.push(i);
    }

    #[inline]
    fn n(&self, i: u32) -> &WbNode {
        &self.nodes[i as usize]
    }

    #[inline]
    fn nm(&mut self, i: u32) -> &mut WbNode {
        &mut self.nodes[i as usize]
    }

    fn count(&self, i: u32) -> u32 {
        if i == NONE {
            0
        } else {
            self.n(i).count
        }
    }

    fn total(&self, i: u32) -> u64 {
        if i == NONE {
            0
        } else {
            self.n(i).total_size
        }
    }

    fn bm(&self, i: u32) -> u64 {
        if i == NONE {
            0
        } else {
            self.n(i).bitmap
        }
    }

    fn pull_up(&mut self, i: u32) {
        let (l, r) = (self.n(i).left, self.n(i).right);
        let own_unmarked = !self.n(i).marked as u32;
        let own_sub = self.n(i).in_subset;
        let own_size = self.n(i).key_size as u64;
        let node = self.nm(i);
        node.count = 1;
        node.total_size = own_size;
        node.bitmap = node.own_bitmap;
        node.unmarked = own_unmarked;
        node.sub_count = own_sub as u32;
        node.sub_total = if own_sub { own_size } else { 0 };
        for c in [l, r] {
            if c != NONE {
                let (cc, ct, cb, cu, cs, cst) = {
                    let cn = self.n(c);
                    (cn.count, cn.total_size, cn.bitmap, cn.unmarked, cn.sub_count, cn.sub_total)
                };
                let node = self.nm(i);
                node.count += cc;
                node.total_size += ct;
                node.bitmap |= cb;
                node.unmarked += cu;
                node.sub_count += cs;
                node.sub_total += cst;
            }
        }
    }

    fn key(&self, i: u32) -> (u32, u32) {
        let n = self.n(i);
        (n.key_size, n.key_seq)
    }
}

#[derive(Clone, Debug, Default)]
pub struct BatchLocalTree {
    /// (size class, root) sorted by class: the local layer over the class trees.
    classes: Vec<(u8, u32)>,
    len: usize,
    agg: u64,
}

impl BatchLocalTree {
    fn class_pos(&self, class: u8) -> Result<usize, usize> {
        self.classes.binary_search_by_key(&class, |&(c, _)| c)
    }

    fn recompute_agg(&mut self, arena: &WbArena) {
        self.agg = self.classes.iter().map(|&(_, r)| arena.bm(r)).fold(0, |a, b| a | b);
    }

    /// Replace the child pointer of `parent` (or the class root) for `old` with `new`.
    fn relink(&mut self, arena: &mut WbArena, class: u8, parent: u32, old: u32, new: u32) {
        if parent == NONE {
            let pos = self.class_pos(class).expect("class exists");
            self.classes[pos].1 = new;
        } else if arena.n(parent).left == old {
            arena.nm(parent).left = new;
        } else {
            debug_assert_eq!(arena.n(parent).right, old);
            arena.nm(parent).right = new;
        }
        if new != NONE {
            arena.nm(new).parent = parent;
        }
    }

    fn rotate(&mut self, arena: &mut WbArena, class: u8, q: u32, to_left: bool) -> u32 {
        let p = arena.n(q).parent;
        let r = if to_left { arena.n(q).right } else { arena.n(q).left };
        debug_assert_ne!(r, NONE);
        if to_left {
            let rl = arena.n(r).left;
            arena.nm(q).right = rl;
            if rl != NONE {
                arena.nm(rl).parent = q;
            }
            arena.nm(r).left = q;
        } else {
            let rr = arena.n(r).right;
            arena.nm(q).left = rr;
            if rr != NONE {
                arena.nm(rr).parent = q;
            }
            arena.nm(r).right = q;
        }
        arena.nm(q).parent = r;
        self.relink(arena, class, p, q, r);
        arena.pull_up(q);
        arena.pull_up(r);
        r
    }

    /// Restore the weight-balance criterion at `q`; returns the node now
    /// rooting this position.
    fn balance_node(&mut self, arena: &mut WbArena, class: u8, q: u32) -> u32 {
        let wl = arena.count(arena.n(q).left) as u64 + 1;
        let wr = arena.count(arena.n(q).right) as u64 + 1;
        let w = wl + wr;
        if wl * ALPHA_DEN < ALPHA_NUM * w {
            // Right-heavy: left rotation, double when the inner grandchild
            // outweighs the outer one.
            let r = arena.n(q).right;
            if arena.count(arena.n(r).left) > arena.count(arena.n(r).right) {
                self.rotate(arena, class, r, false);
            }
            self.rotate(arena, class, q, true)
        } else if wr * ALPHA_DEN < ALPHA_NUM * w {
            let l = arena.n(q).left;
            if arena.count(arena.n(l).right) > arena.count(arena.n(l).left) {
                self.rotate(arena, class, l, true);
            }
            self.rotate(arena, class, q, false)
        } else {
            q
        }
    }

    fn fix_upward(&mut self, arena: &mut WbArena, class: u8, mut cur: u32) {
        while cur != NONE {
            arena.pull_up(cur);
            let now = self.balance_node(arena, class, cur);
            cur = arena.n(now).parent;
        }
        self.recompute_agg(arena);
    }

    fn in_order(&self, arena: &WbArena, t: u32, depth: u32, out: &mut Vec<(ClusterId, u32)>) {
        if t == NONE {
            return;
        }
        let n = arena.n(t);
        self.in_order(arena, n.left, depth + 1, out);
        out.push((n.cluster, depth));
        self.in_order(arena, n.right, depth + 1, out);
    }

    pub fn class_sizes(&self, arena: &WbArena) -> Vec<(u8, usize)> {
        self.classes.iter().map(|&(c, r)| (c, arena.count(r) as usize)).collect()
    }

    /// Ascending (size, seq) walk collecting up to `k` clusters.
    pub fn smallest_k(&self, arena: &WbArena, k: usize) -> Vec<ClusterId> {
        let mut out = Vec::new();
        for &(_, root) in &self.classes {
            self.walk_limit(arena, root, k, &mut out);
            if out.len() >= k {
                break;
            }
        }
        out
    }

    fn walk_limit(&self, arena: &WbArena, t: u32, k: usize, out: &mut Vec<ClusterId>) {
        if t == NONE || out.len() >= k {
            return;
        }
        let n = arena.n(t);
        self.walk_limit(arena, n.left, k, out);
        if out.len() < k {
            out.push(n.cluster);
        }
        self.walk_limit(arena, n.right, k, out);
    }

    pub fn smallest(&self, arena: &WbArena) -> Option<ClusterId> {
        self.smallest_k(arena, 1).into_iter().next()
    }

    /// Descending walk collecting up to `k` (cluster, size) pairs.
    pub fn largest_k(&self, arena: &WbArena, k: usize) -> Vec<(ClusterId, u32)> {
        let mut out = Vec::new();
        for &(_, root) in self.classes.iter().rev() {
            self.walk_limit_desc(arena, root, k, &mut out);
            if out.len() >= k {
                break;
            }
        }
        out
    }

    fn walk_limit_desc(&self, arena: &WbArena, t: u32, k: usize, out: &mut Vec<(ClusterId, u32)>) {
        if t == NONE || out.len() >= k {
            return;
        }
        let n = arena.n(t);
        self.walk_limit_desc(arena, n.right, k, out);
        if out.len() < k {
            out.push((n.cluster, n.key_size));
        }
        self.walk_limit_desc(arena, n.left, k, out);
    }

    /// Longest prefix of children in nondecreasing (size, seq) order whose
    /// total size fits in `budget`.
    pub fn maximal_prefix(&self, arena: &WbArena, budget: u64) -> Vec<ClusterId> {
        let mut out = Vec::new();
        let mut left = budget;
        for &(_, root) in &self.classes {
            if arena.total(root) <= left {
                left -= arena.total(root);
                let mut all = Vec::new();
                self.in_order(arena, root, 0, &mut all);
                out.extend(all.into_iter().map(|(c, _)| c));
            } else {
                self.prefix_in(arena, root, &mut left, &mut out);
                break;
            }
        }
        out
    }

    fn prefix_in(&self, arena: &WbArena, t: u32, left: &mut u64, out: &mut Vec<ClusterId>) -> bool {
        if t == NONE {
            return true;
        }
        let n = arena.n(t);
        if arena.total(n.left) <= *left {
            *left -= arena.total(n.left);
            let mut all = Vec::new();
            self.in_order(arena, n.left, 0, &mut all);
            out.extend(all.into_iter().map(|(c, _)| c));
        } else {
            self.prefix_in(arena, n.left, left, out);
            return false;
        }
        if (n.key_size as u64) <= *left {
            *left -= n.key_size as u64;
            out.push(n.cluster);
        } else {
            return false;
        }
        self.prefix_in(arena, n.right, left, out)
    }

    /// As `maximal_prefix`, restricted to the given subset. The subset is
    /// flagged bottom-up, queried through the subset aggregates, then cleared.
    pub fn maximal_prefix_of_subset(
        &mut self,
        arena: &mut WbArena,
        subset_slots: &[u32],
        budget: u64,
    ) -> Vec<ClusterId> {
        for &s in subset_slots {
            arena.nm(s).in_subset = true;
            let mut cur = s;
            while cur != NONE {
                arena.pull_up(cur);
                cur = arena.n(cur).parent;
            }
        }
        let mut out = Vec::new();
        let mut left = budget;
        'outer: for &(_, root) in &self.classes {
            if root == NONE || arena.n(root).sub_count == 0 {
                continue;
            }
            if arena.n(root).sub_total <= left {
                left -= arena.n(root).sub_total;
                self.subset_in_order(arena, root, &mut out);
            } else if !self.subset_prefix_in(arena, root, &mut left, &mut out) {
                break 'outer;
            }
        }
        for &s in subset_slots {
            arena.nm(s).in_subset = false;
            let mut cur = s;
            while cur != NONE {
                arena.pull_up(cur);
                cur = arena.n(cur).parent;
            }
        }
        out
    }

    fn subset_in_order(&self, arena: &WbArena, t: u32, out: &mut Vec<ClusterId>) {
        if t == NONE || arena.n(t).sub_count == 0 {
            return;
        }
        let n = arena.n(t);
        self.subset_in_order(arena, n.left, out);
        if n.in_subset {
            out.push(n.cluster);
        }
        self.subset_in_order(arena, n.right, out);
    }

    fn subset_prefix_in(
        &self,
        arena: &WbArena,
        t: u32,
        left: &mut u64,
        out: &mut Vec<ClusterId>,
    ) -> bool {
        if t == NONE {
            return true;
        }
        let n = arena.n(t);
        let lsub = if n.left == NONE { 0 } else { arena.n(n.left).sub_total };
        if lsub <= *left {
            *left -= lsub;
            self.subset_in_order(arena, n.left, out);
        } else {
            self.subset_prefix_in(arena, n.left, left, out);
            return false;
        }
        if n.in_subset {
            if (n.key_size as u64) <= *left {
                *left -= n.key_size as u64;
                out.push(n.cluster);
            } else {
                return false;
            }
        }
        self.subset_prefix_in(arena, n.right, left, out)
    }

    pub fn mark(&mut self, arena: &mut WbArena, slot: u32) {
        arena.nm(slot).marked = true;
        let mut cur = slot;
        while cur != NONE {
            arena.pull_up(cur);
            cur = arena.n(cur).parent;
        }
    }

    pub fn unmark(&mut self, arena: &mut WbArena, slot: u32) {
        arena.nm(slot).marked = false;
        let mut cur = slot;
        while cur != NONE {
            arena.pull_up(cur);
            cur = arena.n(cur).parent;
        }
    }

    pub fn is_marked(&self, arena: &WbArena, slot: u32) -> bool {
        arena.n(slot).marked
    }

    /// Any unmarked element, preferring the smallest class and in-order
    /// position; `None` when everything is marked.
    pub fn get_unmarked(&self, arena: &WbArena) -> Option<ClusterId> {
        for &(_, root) in &self.classes {
            if root != NONE && arena.n(root).unmarked > 0 {
                let mut t = root;
                loop {
                    let n = arena.n(t);
                    if n.left != NONE && arena.n(n.left).unmarked > 0 {
                        t = n.left;
                    } else if !n.marked {
                        return Some(n.cluster);
                    } else {
                        debug_assert!(n.right != NONE && arena.n(n.right).unmarked > 0);
                        t = n.right;
                    }
                }
            }
        }
        None
    }

    /// Sequential realization of batched insertion: semisort by class is the
    /// grouping the class array already encodes.
    pub fn batch_insert(
        &mut self,
        arena: &mut WbArena,
        children: &[ChildRef],
        policy: ContainerPolicy,
        stats: &mut AllocStats,
    ) -> Vec<(ClusterId, u32)> {
        let mut sorted: Vec<&ChildRef> = children.iter().collect();
        sorted.sort_by_key(|c| (floor_log2(c.size), c.size, c.seq));
        sorted.iter().map(|c| (c.id, self.insert(arena, **c, policy, stats))).collect()
    }

    pub fn max_depth(&self, arena: &WbArena) -> u32 {
        self.children_with_depth(arena).into_iter().map(|(_, d)| d).max().unwrap_or(0)
    }

    /// Per-node balance audit helper: true when every subtree satisfies the
    /// weight-balance criterion.
    pub fn check_balance(&self, arena: &WbArena) -> bool {
        fn ok(arena: &WbArena, t: u32) -> bool {
            if t == NONE {
                return true;
            }
            let n = arena.n(t);
            let wl = arena.count(n.left) as u64 + 1;
            let wr = arena.count(n.right) as u64 + 1;
            let w = wl + wr;
            if w > 4 && (wl * ALPHA_DEN < ALPHA_NUM * w || wr * ALPHA_DEN < ALPHA_NUM * w) {
                return false;
            }
            ok(arena, n.left) && ok(arena, n.right)
        }
        self.classes.iter().all(|&(_, r)| ok(arena, r))
    }
}

impl ChildContainer for BatchLocalTree {
    type Arena = WbArena;

    fn insert(
        &mut self,
        arena: &mut WbArena,
        child: ChildRef,
        _policy: ContainerPolicy,
        stats: &mut AllocStats,
    ) -> u32 {
        let class = floor_log2(child.size);
        let node = WbNode {
            cluster: child.id,
            key_size: child.size,
            key_seq: child.seq,
            own_bitmap: child.bitmap,
            marked: child.marked,
            in_subset: false,
            left: NONE,
            right: NONE,
            parent: NONE,
            count: 1,
            total_size: child.size as u64,
            bitmap: child.bitmap,
            unmarked: !child.marked as u32,
            sub_count: 0,
            sub_total: 0,
        };
        let idx = arena.alloc(node, stats);
        self.len += 1;
        match self.class_pos(class) {
            Err(pos) => {
                self.classes.insert(pos, (class, idx));
                self.agg |= child.bitmap;
            }
            Ok(pos) => {
                let root = self.classes[pos].1;
                let key = (child.size, child.seq);
                let mut cur = root;
                loop {
                    let next = if key < arena.key(cur) { arena.n(cur).left } else { arena.n(cur).right };
                    if next == NONE {
                        if key < arena.key(cur) {
                            arena.nm(cur).left = idx;
                        } else {
                            arena.nm(cur).right = idx;
                        }
                        arena.nm(idx).parent = cur;
                        break;
                    }
                    cur = next;
                }
                self.fix_upward(arena, class, cur);
            }
        }
        idx
    }

    fn remove(
        &mut self,
        arena: &mut WbArena,
        slot: u32,
        stats: &mut AllocStats,
    ) -> Option<(ClusterId, u32)> {
        let class = floor_log2(arena.n(slot).key_size);
        let mut displaced = None;
        let victim = if arena.n(slot).left != NONE && arena.n(slot).right != NONE {
            // Move the successor's element into this node, then remove the
            // successor's physical node.
            let mut s = arena.n(slot).right;
            while arena.n(s).left != NONE {
                s = arena.n(s).left;
            }
            let (cl, ks, kq, bm, mk) = {
                let n = arena.n(s);
                (n.cluster, n.key_size, n.key_seq, n.own_bitmap, n.marked)
            };
            debug_assert!(!arena.n(s).in_subset);
            let dst = arena.nm(slot);
            dst.cluster = cl;
            dst.key_size = ks;
            dst.key_seq = kq;
            dst.own_bitmap = bm;
            dst.marked = mk;
            displaced = Some((cl, slot));
            s
        } else {
            slot
        };
        let child = if arena.n(victim).left != NONE {
            arena.n(victim).left
        } else {
            arena.n(victim).right
        };
        let parent = arena.n(victim).parent;
        self.relink(arena, class, parent, victim, child);
        arena.release(victim, stats);
        self.len -= 1;
        if parent == NONE && child == NONE {
            let pos = self.class_pos(class).expect("class exists");
            self.classes.remove(pos);
            self.recompute_agg(arena);
        } else {
            self.fix_upward(arena, class, if parent != NONE { parent } else { child });
        }
        displaced
    }

    fn len(&self) -> usize {
        self.len
    }

    fn agg_bitmap(&self) -> u64 {
        self.agg
    }

    fn refresh_child_bitmap(&mut self, arena: &mut WbArena, slot: u32, new_bitmap: u64) -> bool {
        if arena.n(slot).own_bitmap == new_bitmap {
            return false;
        }
        arena.nm(slot).own_bitmap = new_bitmap;
        let mut cur = slot;
        while cur != NONE {
            let before = arena.n(cur).bitmap;
            arena.pull_up(cur);
            if arena.n(cur).bitmap == before {
                return false;
            }
            cur = arena.n(cur).parent;
        }
        let old = self.agg;
        self.recompute_agg(arena);
        self.agg != old
    }

    fn find_child_with_bit(&self, arena: &WbArena, level: u8) -> Option<ClusterId> {
        let mask = 1u64 << level;
        let &(_, root) = self.classes.iter().find(|&&(_, r)| arena.bm(r) & mask != 0)?;
        let mut t = root;
        loop {
            let n = arena.n(t);
            if n.left != NONE && arena.n(n.left).bitmap & mask != 0 {
                t = n.left;
            } else if n.own_bitmap & mask != 0 {
                return Some(n.cluster);
            } else {
                debug_assert!(n.right != NONE && arena.n(n.right).bitmap & mask != 0);
                t = n.right;
            }
        }
    }

    fn children_with_bit(&self, arena: &WbArena, level: u8) -> Vec<ClusterId> {
        fn walk(arena: &WbArena, t: u32, mask: u64, out: &mut Vec<ClusterId>) {
            if t == NONE || arena.n(t).bitmap & mask == 0 {
                return;
            }
            let n = arena.n(t);
            walk(arena, n.left, mask, out);
            if n.own_bitmap & mask != 0 {
                out.push(n.cluster);
            }
            walk(arena, n.right, mask, out);
        }
        let mask = 1u64 << level;
        let mut out = Vec::new();
        for &(_, root) in &self.classes {
            walk(arena, root, mask, &mut out);
        }
        out
    }

    fn children(&self, arena: &WbArena) -> Vec<ClusterId> {
        let mut out = Vec::with_capacity(self.len);
        for &(_, root) in &self.classes {
            let mut part = Vec::new();
            self.in_order(arena, root, 1, &mut part);
            out.extend(part.into_iter().map(|(c, _)| c));
        }
        out
    }

    fn children_with_depth(&self, arena: &WbArena) -> Vec<(ClusterId, u32)> {
        let mut out = Vec::with_capacity(self.len);
        for &(_, root) in &self.classes {
            self.in_order(arena, root, 1, &mut out);
        }
        out
    }

    fn any_child(&self, arena: &WbArena) -> Option<ClusterId> {
        let &(_, root) = self.classes.first()?;
        Some(arena.n(root).cluster)
    }

    fn slot_marked(&self, arena: &WbArena, slot: u32) -> bool {
        arena.n(slot).marked
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn policy() -> ContainerPolicy {
        ContainerPolicy { consolidate_threshold: 8 }
    }

    fn child(id: u32, size: u32) -> ChildRef {
        ChildRef { id: ClusterId(id), size, bitmap: 0, seq: id, marked: false }
    }

    struct Fixture {
        arena: WbArena,
        tree: BatchLocalTree,
        stats: AllocStats,
        slots: std::collections::HashMap<u32, u32>,
    }

    impl Fixture {
        fn new() -> Self {
            Fixture {
                arena: WbArena::default(),
                tree: BatchLocalTree::default(),
                stats: AllocStats::default(),
                slots: Default::default(),
            }
        }

        fn insert(&mut self, id: u32, size: u32) {
            let s = self.tree.insert(&mut self.arena, child(id, size), policy(), &mut self.stats);
            self.slots.insert(id, s);
        }

        fn remove(&mut self, id: u32) {
            let slot = self.slots.remove(&id).unwrap();
            if let Some((moved, new_slot)) = self.tree.remove(&mut self.arena, slot, &mut self.stats)
            {
                self.slots.insert(moved.0, new_slot);
            }
        }
    }

    #[test]
    fn classes_follow_floor_log2() {
        let mut f = Fixture::new();
        for (id, size) in [(1u32, 1u32), (2, 1), (3, 2), (4, 5)] {
            f.insert(id, size);
        }
        assert_eq!(f.tree.class_sizes(&f.arena), vec![(0, 2), (1, 1), (2, 1)]);
    }

    #[test]
    fn empty_batch_is_noop() {
        let mut f = Fixture::new();
        let out = f.tree.batch_insert(&mut f.arena, &[], policy(), &mut f.stats);
        assert!(out.is_empty());
        assert_eq!(f.tree.len(), 0);
    }

    #[test]
    fn enumeration_sorted_by_size_matches_sorted_input() {
        let mut f = Fixture::new();
        let sizes = [9u32, 3, 17, 3, 1, 64, 8, 2];
        let refs: Vec<ChildRef> =
            sizes.iter().enumerate().map(|(i, &s)| child(i as u32, s)).collect();
        for (id, slot) in f.tree.batch_insert(&mut f.arena, &refs, policy(), &mut f.stats) {
            f.slots.insert(id.0, slot);
        }
        let got: Vec<u32> = f
            .tree
            .children(&f.arena)
            .into_iter()
            .map(|c| sizes[c.idx()])
            .collect();
        let mut want = sizes.to_vec();
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn maximal_prefix_basic() {
        let mut f = Fixture::new();
        for (id, size) in [(0u32, 1u32), (1, 2), (2, 3), (3, 8)] {
            f.insert(id, size);
        }
        let got: Vec<u32> = f.tree.maximal_prefix(&f.arena, 6).iter().map(|c| c.0).collect();
        assert_eq!(got, vec![0, 1, 2]);
        assert!(f.tree.maximal_prefix(&f.arena, 0).is_empty());
    }

    #[test]
    fn maximal_prefix_matches_sort_and_scan() {
        let mut f = Fixture::new();
        let mut state = 777u64;
        let mut rng = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        let mut items = Vec::new();
        for id in 0..60u32 {
            let size = (rng() % 200 + 1) as u32;
            items.push((id, size));
            f.insert(id, size);
        }
        for _ in 0..40 {
            let budget = rng() % 3000;
            let got: Vec<u32> =
                f.tree.maximal_prefix(&f.arena, budget).iter().map(|c| c.0).collect();
            let mut sorted = items.clone();
            sorted.sort_by_key(|&(id, s)| (s, id));
            let mut want = Vec::new();
            let mut sum = 0u64;
            for (id, s) in sorted {
                if sum + s as u64 > budget {
                    break;
                }
                sum += s as u64;
                want.push(id);
            }
            assert_eq!(got, want, "budget {budget}");
        }
    }

    #[test]
    fn subset_prefix_matches_sort_oracle() {
        let mut f = Fixture::new();
        let mut items = Vec::new();
        let mut state = 4242u64;
        let mut rng = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for id in 0..50u32 {
            let size = (rng() % 100 + 1) as u32;
            items.push((id, size));
            f.insert(id, size);
        }
        for _ in 0..30 {
            let subset: Vec<(u32, u32)> =
                items.iter().copied().filter(|_| rng() % 2 == 0).collect();
            let slots: Vec<u32> = subset.iter().map(|&(id, _)| f.slots[&id]).collect();
            let budget = rng() % 1500;
            let got: Vec<u32> = f
                .tree
                .maximal_prefix_of_subset(&mut f.arena, &slots, budget)
                .iter()
                .map(|c| c.0)
                .collect();
            let mut sorted = subset.clone();
            sorted.sort_by_key(|&(id, s)| (s, id));
            let mut want = Vec::new();
            let mut sum = 0u64;
            for (id, s) in sorted {
                if sum + s as u64 > budget {
                    break;
                }
                sum += s as u64;
                want.push(id);
            }
            assert_eq!(got, want);
        }
        // Subset = everything degenerates to the plain prefix.
        let all: Vec<u32> = items.iter().map(|&(id, _)| f.slots[&id]).collect();
        assert_eq!(
            f.tree.maximal_prefix_of_subset(&mut f.arena, &all, 500),
            f.tree.maximal_prefix(&f.arena, 500)
        );
    }

    #[test]
    fn smallest_breaks_ties_by_creation_order() {
        let mut f = Fixture::new();
        f.insert(7, 3);
        f.insert(2, 3);
        f.insert(9, 7);
        // Equal sizes tie-break on seq (= id here): 2 before 7.
        assert_eq!(f.tree.smallest(&f.arena), Some(ClusterId(2)));
        assert_eq!(f.tree.largest_k(&f.arena, 1), vec![(ClusterId(9), 7)]);
    }

    #[test]
    fn marking_and_get_unmarked() {
        let mut f = Fixture::new();
        for id in 0..5u32 {
            f.insert(id, id + 1);
        }
        let mut seen = std::collections::BTreeSet::new();
        while let Some(c) = f.tree.get_unmarked(&f.arena) {
            assert!(seen.insert(c.0));
            let slot = f.slots[&c.0];
            f.tree.mark(&mut f.arena, slot);
        }
        assert_eq!(seen.len(), 5);
        f.tree.unmark(&mut f.arena, f.slots[&3]);
        assert_eq!(f.tree.get_unmarked(&f.arena), Some(ClusterId(3)));
    }

    #[test]
    fn random_interleaving_matches_shadow_and_stays_balanced() {
        let mut f = Fixture::new();
        let mut shadow = std::collections::BTreeSet::new();
        let mut state = 31337u64;
        let mut rng = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for step in 0..600u32 {
            if shadow.is_empty() || rng() % 3 != 0 {
                let id = step;
                f.insert(id, (rng() % 300 + 1) as u32);
                shadow.insert(id);
            } else {
                let pick = *shadow.iter().nth(rng() as usize % shadow.len()).unwrap();
                shadow.remove(&pick);
                f.remove(pick);
            }
            if step % 50 == 0 {
                let got: std::collections::BTreeSet<u32> =
                    f.tree.children(&f.arena).into_iter().map(|c| c.0).collect();
                assert_eq!(got, shadow);
                assert!(f.tree.check_balance(&f.arena), "unbalanced at step {step}");
            }
        }
        let got: std::collections::BTreeSet<u32> =
            f.tree.children(&f.arena).into_iter().map(|c| c.0).collect();
        assert_eq!(got, shadow);
    }

    #[test]
    fn bitmap_find_and_refresh() {
        let mut f = Fixture::new();
        for id in 0..20u32 {
            f.insert(id, id % 5 + 1);
        }
        assert_eq!(f.tree.find_child_with_bit(&f.arena, 4), None);
        let slot = f.slots[&13];
        assert!(f.tree.refresh_child_bitmap(&mut f.arena, slot, 1 << 4));
        assert_eq!(f.tree.find_child_with_bit(&f.arena, 4), Some(ClusterId(13)));
        assert!(f.tree.agg_bitmap() & (1 << 4) != 0);
        assert!(!f.tree.refresh_child_bitmap(&mut f.arena, f.slots[&2], 1 << 4));
    }
}
