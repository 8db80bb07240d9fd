//! Partially persistent (multiversion) B+-tree in the MVAS style.
//!
//! Leaves hold `[key, start, end, info]` records, internal nodes hold
//! `[key, start, end, child]` records. Every update is stamped with a time and
//! only the newest version may be updated; every older version stays
//! queryable. A node that overflows or drops below `d` live records is killed
//! (version split) and its live records are copied into one or two fresh
//! nodes, borrowing from a neighbor when too few remain. Dead leaves point to
//! the leaves that replaced them so history can be walked forward in time.
//!
//! The root is always an internal node, so the tree has at least two levels
//! once the first record arrives.

mod check;
mod node;
mod query;

pub use check::Violation;
pub use node::{DataRecord, IndexRecord, MvPage, Node, NodeRecord, Versioned};
pub use query::ScanTrace;

use crate::error::{Error, Result};
use crate::pagestore::{IoStats, PageId, PageKind, PageStore, StoreConfig};
use crate::types::{ObjectId, Timestamp, OPEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MvConfig {
    pub b: usize,
    /// Minimum live records per non-root node (weak version condition).
    pub d: usize,
    pub split_low: usize,
    pub split_high: usize,
}

impl MvConfig {
    /// `d = b/4`, `split_low = 3b/8`, `split_high = 7b/8`.
    pub fn from_capacity(b: usize) -> Self {
        MvConfig {
            b,
            d: b / 4,
            split_low: 3 * b / 8,
            split_high: 7 * b / 8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.b < 4 {
            return Err(Error::Config(format!("b = {} is below 4", self.b)));
        }
        if !(1 <= self.d && self.d < self.split_low && self.split_low < self.split_high && self.split_high < self.b) {
            return Err(Error::Config(format!(
                "need 1 <= d < split_low < split_high < b, got d={} split_low={} split_high={} b={}",
                self.d, self.split_low, self.split_high, self.b
            )));
        }
        Ok(())
    }
}

impl Default for MvConfig {
    fn default() -> Self {
        MvConfig::from_capacity(42)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RootEntry {
    pub start: Timestamp,
    pub end: Timestamp,
    pub root: PageId,
    /// Levels including the leaf level.
    pub height: u32,
}

/// Version to root map. Lifespans are disjoint; exactly the last entry is live.
#[derive(Debug, Clone, Default)]
pub struct RootLog {
    entries: Vec<RootEntry>,
}

impl RootLog {
    pub fn lookup(&self, t: Timestamp) -> Option<&RootEntry> {
        let idx = self.entries.partition_point(|e| e.start <= t);
        let e = self.entries.get(idx.checked_sub(1)?)?;
        (t < e.end).then_some(e)
    }

    pub fn current(&self) -> Option<&RootEntry> {
        self.entries.last()
    }

    pub fn entries(&self) -> &[RootEntry] {
        &self.entries
    }

    fn push(&mut self, t: Timestamp, root: PageId, height: u32) {
        if self.entries.last().is_some_and(|e| e.start == t) {
            self.entries.pop();
        }
        if let Some(last) = self.entries.last_mut() {
            last.end = t;
        }
        self.entries.push(RootEntry { start: t, end: OPEN, root, height });
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IndexStats {
    /// Updates applied (M).
    pub m_updates: u64,
    /// Live data records in the current version (n).
    pub n_live: u64,
    pub pages: u64,
}

/// A node created by a restructure, with its live count at birth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Birth {
    pub page: PageId,
    pub at: Timestamp,
    pub live: usize,
    /// Whether a neighbor was available when the node came out short.
    pub merge_exhausted: bool,
    pub is_root: bool,
}

struct PathStep {
    page: PageId,
    node: Node<IndexRecord>,
}

#[derive(Debug)]
pub struct MvIndex {
    store: PageStore<MvPage>,
    config: MvConfig,
    roots: RootLog,
    first_leaf: Option<PageId>,
    latest: Option<Timestamp>,
    m_updates: u64,
    n_live: u64,
    births: Vec<Birth>,
}

impl MvIndex {
    pub fn new(config: MvConfig) -> Result<Self> {
        config.validate()?;
        let store = PageStore::new(StoreConfig::with_capacity(config.b)?);
        Ok(MvIndex {
            store,
            config,
            roots: RootLog::default(),
            first_leaf: None,
            latest: None,
            m_updates: 0,
            n_live: 0,
            births: Vec::new(),
        })
    }

    pub fn config(&self) -> MvConfig {
        self.config
    }

    pub fn store(&self) -> &PageStore<MvPage> {
        &self.store
    }

    pub fn io(&self) -> IoStats {
        self.store.stats()
    }

    pub fn reset_io(&self) {
        self.store.reset_stats();
    }

    pub fn roots(&self) -> &RootLog {
        &self.roots
    }

    pub fn births(&self) -> &[Birth] {
        &self.births
    }

    pub fn latest(&self) -> Option<Timestamp> {
        self.latest
    }

    pub fn stats(&self) -> IndexStats {
        IndexStats {
            m_updates: self.m_updates,
            n_live: self.n_live,
            pages: self.store.page_count() as u64,
        }
    }

    /// Levels of the version at `t` (0 for an empty version).
    pub fn height_at(&self, t: Timestamp) -> u32 {
        self.roots.lookup(t).map_or(0, |e| e.height)
    }

    /// Tallest version alive anywhere in `[t1, t2]`.
    pub fn max_height_between(&self, t1: Timestamp, t2: Timestamp) -> u32 {
        self.roots
            .entries()
            .iter()
            .filter(|e| e.start <= t2 && e.end > t1)
            .map(|e| e.height)
            .max()
            .unwrap_or(0)
    }

    pub fn height(&self) -> u32 {
        self.roots.current().map_or(0, |e| e.height)
    }

    /// One line per page: `page_id kind [(key,start,end),...] succ=[ids]`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for id in self.store.page_ids() {
            if let Some(p) = self.store.inspect(id) {
                out.push_str(&format!("{id} {p}\n"));
            }
        }
        out
    }

    fn check_time(&self, t: Timestamp) -> Result<()> {
        match self.latest {
            Some(latest) if t < latest => Err(Error::OutOfOrder { got: t, latest }),
            _ if t == OPEN => Err(Error::Argument("timestamp out of range".into())),
            _ => Ok(()),
        }
    }

    /// Object `key` enters at `t`.
    pub fn insert(&mut self, key: ObjectId, t: Timestamp) -> Result<()> {
        self.check_time(t)?;
        let record = DataRecord { key, start: t, end: OPEN, info: 0 };
        let Some(root) = self.roots.current().copied() else {
            let leaf = self.store.allocate(PageKind::Leaf);
            self.store.write(leaf, MvPage::Leaf(Node::new(0, t, vec![record])))?;
            let root = self.store.allocate(PageKind::Internal);
            let entry = IndexRecord { key: ObjectId(0), start: t, end: OPEN, child: leaf };
            self.store.write(root, MvPage::Internal(Node::new(1, t, vec![entry])))?;
            self.roots.push(t, root, 2);
            self.first_leaf = Some(leaf);
            return self.finish_update(t, 1);
        };
        let (path, leaf_id) = self.descend_live(root.root, key)?;
        let mut leaf = DataRecord::unwrap(self.store.read(leaf_id)?.clone());
        if leaf.records.iter().any(|r| r.key == key && r.is_live()) {
            return Err(Error::AlreadyLive(key));
        }
        leaf.records.push(record);
        leaf.sort();
        self.after_change(path, leaf_id, leaf, t)?;
        self.finish_update(t, 1)
    }

    /// Object `key` leaves at `t`: its live record is closed.
    pub fn logical_delete(&mut self, key: ObjectId, t: Timestamp) -> Result<()> {
        self.check_time(t)?;
        let root = self.roots.current().copied().ok_or(Error::NotLive(key))?;
        let (path, leaf_id) = self.descend_live(root.root, key)?;
        let mut leaf = DataRecord::unwrap(self.store.read(leaf_id)?.clone());
        let pos = leaf
            .records
            .iter()
            .position(|r| r.key == key && r.is_live())
            .ok_or(Error::NotLive(key))?;
        if leaf.records[pos].start == t {
            leaf.records.remove(pos);
        } else {
            leaf.records[pos].end = t;
        }
        self.after_change(path, leaf_id, leaf, t)?;
        self.finish_update(t, -1)
    }

    fn finish_update(&mut self, t: Timestamp, live_delta: i64) -> Result<()> {
        self.latest = Some(t);
        self.m_updates += 1;
        self.n_live = self.n_live.checked_add_signed(live_delta).expect("live count underflow");
        Ok(())
    }

    fn descend_live(&self, root: PageId, key: ObjectId) -> Result<(Vec<PathStep>, PageId)> {
        let mut path = Vec::new();
        let mut id = root;
        loop {
            match self.store.read(id)? {
                MvPage::Leaf(_) => return Ok((path, id)),
                MvPage::Internal(node) => {
                    let (_, rec) = node
                        .route_live(key)
                        .expect("live internal node without a live record covering the key");
                    let child = rec.child;
                    path.push(PathStep { page: id, node: node.clone() });
                    id = child;
                }
            }
        }
    }

    /// Persist a modified node, restructuring it first if it broke a bound.
    fn after_change<R: NodeRecord>(&mut self, mut path: Vec<PathStep>, id: PageId, node: Node<R>, t: Timestamp) -> Result<()> {
        let is_root = path.is_empty();
        let overflow = node.records.len() > self.config.b;
        let exempt = is_root || (path.len() == 1 && path[0].node.live_count() == 1);
        let underflow = !exempt && node.live_count() < self.config.d;
        if overflow || underflow {
            return if is_root {
                self.restructure_root(id, node, t)
            } else {
                let parent = path.pop().expect("non-root has a parent");
                self.restructure(path, parent, id, node, t)
            };
        }
        let collapse = is_root && node.level >= 2 && node.live_count() == 1;
        let page = R::wrap(node);
        if collapse {
            let MvPage::Internal(mut root) = page else { unreachable!() };
            let child = root.records.iter().find(|r| r.is_live()).expect("one live record").child;
            root.kill(t);
            self.store.write(id, MvPage::Internal(root))?;
            let height = self.height() - 1;
            self.roots.push(t, child, height);
            return Ok(());
        }
        self.store.write(id, page)
    }

    fn restructure_root<R: NodeRecord>(&mut self, id: PageId, mut node: Node<R>, t: Timestamp) -> Result<()> {
        let level = node.level;
        let mut live = node.kill(t);
        live.sort_by_key(|r| r.key());
        let groups = self.partition(live);
        let height = self.height();
        let mut fresh = Vec::new();
        for (i, group) in groups.into_iter().enumerate() {
            let sep = if i == 0 { ObjectId(0) } else { group[0].key() };
            let live = group.len();
            let page = self.store.allocate(if level == 0 { PageKind::Leaf } else { PageKind::Internal });
            self.store.write(page, R::wrap(Node::new(level, t, group)))?;
            fresh.push((sep, page, live));
        }
        node.successors = fresh.iter().map(|f| f.1).collect();
        self.store.write(id, R::wrap(node))?;
        if fresh.len() == 1 {
            let (_, page, live) = fresh[0];
            self.births.push(Birth { page, at: t, live, merge_exhausted: false, is_root: true });
            self.roots.push(t, page, height);
        } else {
            for &(_, page, live) in &fresh {
                self.births.push(Birth { page, at: t, live, merge_exhausted: false, is_root: false });
            }
            let records = fresh
                .iter()
                .map(|&(key, child, _)| IndexRecord { key, start: t, end: OPEN, child })
                .collect();
            let root = self.store.allocate(PageKind::Internal);
            self.store.write(root, MvPage::Internal(Node::new(level + 1, t, records)))?;
            self.roots.push(t, root, height + 1);
        }
        Ok(())
    }

    /// Version split of a non-root node, merging with neighbors while the live
    /// set is below `split_low`, then key split if above `split_high`.
    fn restructure<R: NodeRecord>(
        &mut self,
        path: Vec<PathStep>,
        parent: PathStep,
        id: PageId,
        mut node: Node<R>,
        t: Timestamp,
    ) -> Result<()> {
        let PathStep { page: parent_id, node: mut parent_node } = parent;
        let level = node.level;
        let mut live = node.kill(t);

        let slot_key = |pn: &Node<IndexRecord>, child: PageId| {
            pn.records.iter().find(|r| r.is_live() && r.child == child).map(|r| r.key).expect("child has a live index record")
        };
        // Killed nodes, ordered by separator key.
        let mut group: Vec<(ObjectId, PageId, Node<R>)> = vec![(slot_key(&parent_node, id), id, node)];
        let mut exhausted = false;
        while live.len() < self.config.split_low {
            let lo = group.first().unwrap().0;
            let hi = group.last().unwrap().0;
            let mut siblings: Vec<&IndexRecord> = parent_node.records.iter().filter(|r| r.is_live()).collect();
            siblings.sort_by_key(|r| r.key);
            let right = siblings.iter().find(|r| r.key > hi).copied();
            let left = siblings.iter().rev().find(|r| r.key < lo).copied();
            let Some(sib) = right.or(left).copied() else {
                exhausted = true;
                break;
            };
            let mut sib_node = R::unwrap(self.store.read(sib.child)?.clone());
            live.extend(sib_node.kill(t));
            // Mark it closed in the parent copy so the next search skips it.
            for r in parent_node.records.iter_mut().filter(|r| r.is_live() && r.child == sib.child) {
                r.end = t;
            }
            let entry = (sib.key, sib.child, sib_node);
            if sib.key > hi {
                group.push(entry);
            } else {
                group.insert(0, entry);
            }
        }
        live.sort_by_key(|r| r.key());

        let base_key = group[0].0;
        let groups = self.partition(live);
        let mut fresh = Vec::new();
        for (i, recs) in groups.into_iter().enumerate() {
            let sep = if i == 0 { base_key } else { recs[0].key() };
            let live = recs.len();
            let page = self.store.allocate(if level == 0 { PageKind::Leaf } else { PageKind::Internal });
            self.store.write(page, R::wrap(Node::new(level, t, recs)))?;
            self.births.push(Birth { page, at: t, live, merge_exhausted: exhausted, is_root: false });
            fresh.push((sep, page));
        }
        let successors: Vec<PageId> = fresh.iter().map(|f| f.1).collect();
        let killed: Vec<PageId> = group.iter().map(|g| g.1).collect();
        for (_, page, mut dead) in group {
            dead.successors = successors.clone();
            self.store.write(page, R::wrap(dead))?;
        }

        for r in parent_node.records.iter_mut().filter(|r| killed.contains(&r.child)) {
            if r.end == OPEN {
                r.end = t;
            }
        }
        parent_node.records.retain(|r| r.start < r.end);
        parent_node
            .records
            .extend(fresh.iter().map(|&(key, child)| IndexRecord { key, start: t, end: OPEN, child }));
        parent_node.sort();
        self.after_change(path, parent_id, parent_node, t)
    }

    /// One node, or two halves when the live set exceeds `split_high`.
    fn partition<R: Versioned>(&self, mut live: Vec<R>) -> Vec<Vec<R>> {
        if live.len() > self.config.split_high {
            let right = live.split_off(live.len() / 2);
            vec![live, right]
        } else {
            vec![live]
        }
    }
}
