use std::collections::{BTreeMap, HashSet, VecDeque};

use super::node::{MvPage, Versioned};
use super::MvIndex;
use crate::error::{Error, Result};
use crate::pagestore::PageId;
use crate::types::{ObjectId, Timestamp};

/// Leaf accounting for one interval scan.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScanTrace {
    /// Leaves of the version at `t1` (or the first leaf, if history starts later).
    pub initial_leaves: usize,
    /// Accessed leaves that died inside `(t1, t2]`.
    pub dying_leaves: usize,
    pub accessed_leaves: usize,
}

impl MvIndex {
    /// Objects whose membership contains `t`, sorted.
    pub fn snapshot(&self, t: Timestamp) -> Result<Vec<ObjectId>> {
        let mut out = Vec::new();
        if let Some(root) = self.roots.lookup(t) {
            self.collect_at(root.root, t, &mut |page| {
                if let MvPage::Leaf(leaf) = page {
                    out.extend(leaf.records.iter().filter(|r| r.alive_at(t)).map(|r| r.key));
                }
            })?;
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Visit every node of the version at `t` below `id`, children in key order.
    fn collect_at(&self, id: PageId, t: Timestamp, visit: &mut impl FnMut(&MvPage)) -> Result<Vec<PageId>> {
        let mut leaves = Vec::new();
        let mut stack = vec![id];
        while let Some(id) = stack.pop() {
            let page = self.store.read(id)?;
            visit(page);
            match page {
                MvPage::Leaf(_) => leaves.push(id),
                MvPage::Internal(node) => {
                    let mut kids: Vec<_> = node.records.iter().filter(|r| r.alive_at(t)).collect();
                    kids.sort_by_key(|r| std::cmp::Reverse(r.key));
                    stack.extend(kids.into_iter().map(|r| r.child));
                }
            }
        }
        Ok(leaves)
    }

    /// Whether `key` was live at `t`, along one root-to-leaf path.
    pub fn point_query(&self, key: ObjectId, t: Timestamp) -> Result<bool> {
        let Some(root) = self.roots.lookup(t) else {
            return Ok(false);
        };
        let mut id = root.root;
        loop {
            match self.store.read(id)? {
                MvPage::Leaf(leaf) => return Ok(leaf.records.iter().any(|r| r.key == key && r.alive_at(t))),
                MvPage::Internal(node) => match node.route_at(key, t) {
                    Some(r) => id = r.child,
                    None => return Ok(false),
                },
            }
        }
    }

    /// Objects whose membership meets `[t1, t2]`, sorted.
    pub fn interval_scan(&self, t1: Timestamp, t2: Timestamp) -> Result<Vec<ObjectId>> {
        self.interval_scan_traced(t1, t2).map(|(ids, _)| ids)
    }

    /// Start from the leaves of version `t1` and follow succession pointers
    /// through every leaf that dies within `(t1, t2]`.
    pub fn interval_scan_traced(&self, t1: Timestamp, t2: Timestamp) -> Result<(Vec<ObjectId>, ScanTrace)> {
        if t1 > t2 {
            return Err(Error::Argument(format!("interval [{t1},{t2}] is reversed")));
        }
        let mut trace = ScanTrace::default();
        let mut out = Vec::new();
        let mut queue: VecDeque<PageId> = VecDeque::new();
        let mut seen: HashSet<PageId> = HashSet::new();

        // Leaves of the version at t1 are consumed directly during the descent.
        let mut take = |page: &MvPage, trace: &mut ScanTrace, queue: &mut VecDeque<PageId>, seen: &mut HashSet<PageId>| {
            if let MvPage::Leaf(leaf) = page {
                trace.accessed_leaves += 1;
                out.extend(leaf.records.iter().filter(|r| r.meets(t1, t2)).map(|r| r.key));
                if leaf.died > t1 && leaf.died <= t2 {
                    trace.dying_leaves += 1;
                    for &s in &leaf.successors {
                        if seen.insert(s) {
                            queue.push_back(s);
                        }
                    }
                }
            }
        };

        if let Some(root) = self.roots.lookup(t1) {
            let mut pages: Vec<MvPage> = Vec::new();
            let leaves = self.collect_at(root.root, t1, &mut |p| {
                if matches!(p, MvPage::Leaf(_)) {
                    pages.push(p.clone());
                }
            })?;
            trace.initial_leaves = leaves.len();
            seen.extend(leaves.iter().copied());
            for p in &pages {
                take(p, &mut trace, &mut queue, &mut seen);
            }
        } else if let Some(first) = self.first_leaf {
            let born = self.store.inspect(first).map(|p| p.born()).unwrap_or(Timestamp::MAX);
            if born <= t2 {
                trace.initial_leaves = 1;
                seen.insert(first);
                queue.push_back(first);
            }
        }

        while let Some(id) = queue.pop_front() {
            let page = self.store.read(id)?;
            take(page, &mut trace, &mut queue, &mut seen);
        }
        out.sort_unstable();
        out.dedup();
        Ok((out, trace))
    }

    /// Whether `key`'s membership meets `[t1, t2]`.
    pub fn key_interval_query(&self, key: ObjectId, t1: Timestamp, t2: Timestamp) -> Result<bool> {
        if t1 > t2 {
            return Err(Error::Argument(format!("interval [{t1},{t2}] is reversed")));
        }
        let mut found = false;
        self.walk_key(key, t1, t2, &mut |start, end| {
            if start < end && start <= t2 && end > t1 {
                found = true;
            }
            found
        })?;
        Ok(found)
    }

    /// Every membership span `[start, end)` of `key`, merged across node copies.
    pub fn key_history(&self, key: ObjectId) -> Result<Vec<(Timestamp, Timestamp)>> {
        let Some(latest) = self.latest else {
            return Ok(Vec::new());
        };
        let mut spans: BTreeMap<Timestamp, Timestamp> = BTreeMap::new();
        self.walk_key(key, 0, latest, &mut |start, end| {
            if start < end {
                let e = spans.entry(start).or_insert(end);
                *e = (*e).max(end);
            }
            false
        })?;
        Ok(spans.into_iter().collect())
    }

    /// Visit leaf records of `key` reachable from any version in `[t1, t2]`.
    /// The callback returns `true` to stop early.
    fn walk_key(
        &self,
        key: ObjectId,
        t1: Timestamp,
        t2: Timestamp,
        hit: &mut impl FnMut(Timestamp, Timestamp) -> bool,
    ) -> Result<bool> {
        // Roots whose lifespans meet the window, each with its own sub-window.
        let mut stack: Vec<(PageId, Timestamp, Timestamp)> = self
            .roots
            .entries()
            .iter()
            .filter(|e| e.start < e.end && e.start <= t2 && e.end > t1)
            .map(|e| (e.root, e.start.max(t1), (e.end - 1).min(t2)))
            .collect();
        stack.reverse();
        let mut seen = HashSet::new();
        while let Some((id, lo, hi)) = stack.pop() {
            if seen.contains(&id) {
                continue;
            }
            match self.store.read(id)? {
                MvPage::Leaf(leaf) => {
                    seen.insert(id);
                    for r in leaf.records.iter().filter(|r| r.key == key) {
                        if hit(r.start, r.end) {
                            return Ok(true);
                        }
                    }
                }
                MvPage::Internal(node) => {
                    let cands: Vec<_> = node.records.iter().filter(|r| r.key <= key && r.meets(lo, hi)).collect();
                    let mut next = Vec::new();
                    for e in &cands {
                        let from = e.start.max(lo);
                        let to = (e.end - 1).min(hi);
                        let mut covered: Vec<(Timestamp, Timestamp)> = cands
                            .iter()
                            .filter(|f| f.key > e.key && f.start <= to && f.end > from)
                            .map(|f| (f.start.max(from), (f.end - 1).min(to)))
                            .collect();
                        if let Some(hull) = uncovered_hull(from, to, &mut covered) {
                            next.push((e.child, hull.0, hull.1));
                        }
                    }
                    stack.extend(next.into_iter().rev());
                }
            }
        }
        Ok(false)
    }

    /// Leaves reachable in the version at `t`, read without I/O accounting.
    pub fn leaves_at(&self, t: Timestamp) -> Vec<PageId> {
        let mut leaves = Vec::new();
        let Some(root) = self.roots.lookup(t) else {
            return leaves;
        };
        let mut stack = vec![root.root];
        while let Some(id) = stack.pop() {
            match self.store.inspect(id) {
                Some(MvPage::Leaf(_)) => leaves.push(id),
                Some(MvPage::Internal(n)) => stack.extend(n.records.iter().filter(|r| r.alive_at(t)).map(|r| r.child)),
                None => {}
            }
        }
        leaves
    }
}

/// Smallest interval containing every point of `[from, to]` not covered by
/// the closed intervals in `covered`.
fn uncovered_hull(from: Timestamp, to: Timestamp, covered: &mut [(Timestamp, Timestamp)]) -> Option<(Timestamp, Timestamp)> {
    covered.sort_unstable();
    let mut gaps: Vec<(Timestamp, Timestamp)> = Vec::new();
    let mut cursor = from;
    for &(a, b) in covered.iter() {
        if a > cursor {
            gaps.push((cursor, a - 1));
        }
        if b >= cursor {
            match b.checked_add(1) {
                Some(c) => cursor = c,
                None => return hull(&gaps),
            }
        }
        if cursor > to {
            return hull(&gaps);
        }
    }
    if cursor <= to {
        gaps.push((cursor, to));
    }
    hull(&gaps)
}

fn hull(gaps: &[(Timestamp, Timestamp)]) -> Option<(Timestamp, Timestamp)> {
    Some((gaps.first()?.0, gaps.last()?.1))
}

#[cfg(test)]
mod tests {
    use super::uncovered_hull;

    #[test]
    fn hull_of_gaps() {
        assert_eq!(uncovered_hull(0, 10, &mut []), Some((0, 10)));
        assert_eq!(uncovered_hull(0, 10, &mut [(0, 10)]), None);
        assert_eq!(uncovered_hull(0, 10, &mut [(3, 5)]), Some((0, 10)));
        assert_eq!(uncovered_hull(0, 10, &mut [(0, 4)]), Some((5, 10)));
        assert_eq!(uncovered_hull(0, 10, &mut [(6, 12), (0, 2)]), Some((3, 5)));
    }
}
