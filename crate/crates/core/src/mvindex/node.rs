use std::fmt::{self, Write as _};

use crate::pagestore::{PageContent, PageId, PageKind};
use crate::types::{ObjectId, Timestamp, OPEN};

/// Leaf entry `[key, start, end, info]`. Live iff `end == OPEN`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DataRecord {
    pub key: ObjectId,
    pub start: Timestamp,
    pub end: Timestamp,
    pub info: u32,
}

/// Internal entry `[key, start, end, child]`. The child holds keys no less
/// than `key`, was created at `start`, and was copied (died) at `end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexRecord {
    pub key: ObjectId,
    pub start: Timestamp,
    pub end: Timestamp,
    pub child: PageId,
}

pub trait Versioned: Copy {
    fn key(&self) -> ObjectId;
    fn start(&self) -> Timestamp;
    fn end(&self) -> Timestamp;
    fn set_end(&mut self, t: Timestamp);

    fn is_live(&self) -> bool {
        self.end() == OPEN
    }

    fn alive_at(&self, t: Timestamp) -> bool {
        self.start() <= t && t < self.end()
    }

    /// Non-empty overlap of `[start, end)` with the closed window `[lo, hi]`.
    fn meets(&self, lo: Timestamp, hi: Timestamp) -> bool {
        self.start() < self.end() && self.start() <= hi && self.end() > lo
    }
}

macro_rules! versioned {
    ($ty:ty) => {
        impl Versioned for $ty {
            fn key(&self) -> ObjectId {
                self.key
            }
            fn start(&self) -> Timestamp {
                self.start
            }
            fn end(&self) -> Timestamp {
                self.end
            }
            fn set_end(&mut self, t: Timestamp) {
                self.end = t;
            }
        }
    };
}

versioned!(DataRecord);
versioned!(IndexRecord);

/// One tree node. `born`/`died` bound the versions in which the node is
/// reachable from a root; `successors` is set when the node dies by restructure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node<R> {
    pub level: u8,
    pub born: Timestamp,
    pub died: Timestamp,
    pub records: Vec<R>,
    pub successors: Vec<PageId>,
}

impl<R: Versioned> Node<R> {
    pub fn new(level: u8, born: Timestamp, records: Vec<R>) -> Self {
        Node {
            level,
            born,
            died: OPEN,
            records,
            successors: Vec::new(),
        }
    }

    pub fn is_live(&self) -> bool {
        self.died == OPEN
    }

    pub fn live_count(&self) -> usize {
        self.records.iter().filter(|r| r.is_live()).count()
    }

    pub fn count_alive_at(&self, t: Timestamp) -> usize {
        self.records.iter().filter(|r| r.alive_at(t)).count()
    }

    pub fn sort(&mut self) {
        self.records.sort_by_key(|r| (r.key(), r.start()));
    }

    /// Close the node at `t`: every live record is copied out and ended at `t`.
    /// Records left with an empty lifespan carry no version and are dropped.
    pub fn kill(&mut self, t: Timestamp) -> Vec<R> {
        let mut live = Vec::new();
        for r in self.records.iter_mut().filter(|r| r.is_live()) {
            live.push(*r);
            r.set_end(t);
        }
        self.records.retain(|r| r.start() < r.end());
        self.died = t;
        live
    }

    /// Routing step: among records alive at `t`, the one with the greatest key `<= key`.
    pub fn route_at(&self, key: ObjectId, t: Timestamp) -> Option<&R> {
        self.records
            .iter()
            .filter(|r| r.alive_at(t) && r.key() <= key)
            .max_by_key(|r| r.key())
    }

    pub fn route_live(&self, key: ObjectId) -> Option<(usize, &R)> {
        self.records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_live() && r.key() <= key)
            .max_by_key(|(_, r)| r.key())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MvPage {
    Leaf(Node<DataRecord>),
    Internal(Node<IndexRecord>),
}

impl MvPage {
    pub fn born(&self) -> Timestamp {
        match self {
            MvPage::Leaf(n) => n.born,
            MvPage::Internal(n) => n.born,
        }
    }

    pub fn died(&self) -> Timestamp {
        match self {
            MvPage::Leaf(n) => n.died,
            MvPage::Internal(n) => n.died,
        }
    }

    pub fn level(&self) -> u8 {
        match self {
            MvPage::Leaf(n) => n.level,
            MvPage::Internal(n) => n.level,
        }
    }

    pub fn successors(&self) -> &[PageId] {
        match self {
            MvPage::Leaf(n) => &n.successors,
            MvPage::Internal(n) => &n.successors,
        }
    }

    pub fn live_count(&self) -> usize {
        match self {
            MvPage::Leaf(n) => n.live_count(),
            MvPage::Internal(n) => n.live_count(),
        }
    }

    pub fn count_alive_at(&self, t: Timestamp) -> usize {
        match self {
            MvPage::Leaf(n) => n.count_alive_at(t),
            MvPage::Internal(n) => n.count_alive_at(t),
        }
    }

    pub fn as_leaf(&self) -> Option<&Node<DataRecord>> {
        match self {
            MvPage::Leaf(n) => Some(n),
            MvPage::Internal(_) => None,
        }
    }

    pub fn as_internal(&self) -> Option<&Node<IndexRecord>> {
        match self {
            MvPage::Internal(n) => Some(n),
            MvPage::Leaf(_) => None,
        }
    }

    /// `[(key,start,end),...]` with `$` for an open end.
    pub fn render_records(&self) -> String {
        fn push<R: Versioned>(out: &mut String, recs: &[R]) {
            out.push('[');
            for (i, r) in recs.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "({},{},", r.key().0, r.start());
                if r.end() == OPEN {
                    out.push('$');
                } else {
                    let _ = write!(out, "{}", r.end());
                }
                out.push(')');
            }
            out.push(']');
        }
        let mut out = String::new();
        match self {
            MvPage::Leaf(n) => push(&mut out, &n.records),
            MvPage::Internal(n) => push(&mut out, &n.records),
        }
        out
    }
}

impl PageContent for MvPage {
    fn empty(kind: PageKind) -> Self {
        match kind {
            PageKind::Internal => MvPage::Internal(Node::new(1, 0, Vec::new())),
            _ => MvPage::Leaf(Node::new(0, 0, Vec::new())),
        }
    }

    fn record_count(&self) -> usize {
        match self {
            MvPage::Leaf(n) => n.records.len(),
            MvPage::Internal(n) => n.records.len(),
        }
    }

    fn kind(&self) -> PageKind {
        match self {
            MvPage::Leaf(_) => PageKind::Leaf,
            MvPage::Internal(_) => PageKind::Internal,
        }
    }
}

impl fmt::Display for MvPage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.kind().name(), self.render_records())?;
        write!(f, " succ=[")?;
        for (i, s) in self.successors().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, "]")
    }
}

/// Conversion between a typed node and the page enum, so restructuring can be
/// written once for both levels.
pub trait NodeRecord: Versioned {
    fn wrap(node: Node<Self>) -> MvPage;
    fn unwrap(page: MvPage) -> Node<Self>;
}

impl NodeRecord for DataRecord {
    fn wrap(node: Node<Self>) -> MvPage {
        MvPage::Leaf(node)
    }
    fn unwrap(page: MvPage) -> Node<Self> {
        match page {
            MvPage::Leaf(n) => n,
            MvPage::Internal(_) => panic!("expected a leaf page"),
        }
    }
}

impl NodeRecord for IndexRecord {
    fn wrap(node: Node<Self>) -> MvPage {
        MvPage::Internal(node)
    }
    fn unwrap(page: MvPage) -> Node<Self> {
        match page {
            MvPage::Internal(n) => n,
            MvPage::Leaf(_) => panic!("expected an internal page"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(key: u64, start: Timestamp, end: Timestamp) -> DataRecord {
        DataRecord { key: ObjectId(key), start, end, info: 0 }
    }

    #[test]
    fn kill_closes_live_and_drops_empty() {
        let mut n = Node::new(0, 1, vec![rec(1, 1, OPEN), rec(2, 2, 3), rec(3, 5, OPEN)]);
        let live = n.kill(5);
        assert_eq!(live.len(), 2);
        assert!(live.iter().all(|r| r.is_live()));
        assert_eq!(n.records, vec![rec(1, 1, 5), rec(2, 2, 3)]);
        assert_eq!(n.died, 5);
    }

    #[test]
    fn routing_picks_greatest_key_alive() {
        let idx = |key, start, end, child| IndexRecord { key: ObjectId(key), start, end, child: PageId(child) };
        let n = Node::new(1, 1, vec![idx(0, 1, 6, 1), idx(0, 6, OPEN, 2), idx(3, 6, OPEN, 3)]);
        assert_eq!(n.route_at(ObjectId(3), 3).unwrap().child, PageId(1));
        assert_eq!(n.route_at(ObjectId(3), 6).unwrap().child, PageId(3));
        assert_eq!(n.route_at(ObjectId(2), 6).unwrap().child, PageId(2));
    }

    #[test]
    fn render_uses_dollar() {
        let p = MvPage::Leaf(Node::new(0, 1, vec![rec(1, 1, OPEN), rec(3, 2, 3)]));
        assert_eq!(p.to_string(), "leaf [(1,1,$),(3,2,3)] succ=[]");
    }
}
