//! Simulated secondary memory with exact node-access accounting.
//!
//! Every call to [`PageStore::read`] is one I/O and every call to
//! [`PageStore::write`] is one I/O. Pages are never freed: dead versions of a
//! multiversion node must stay addressable forever.

use std::fmt;
use std::ops::{Add, AddAssign};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PageId(pub u32);

impl fmt::Display for PageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StoreConfig {
    /// Records per page (B).
    pub record_capacity: usize,
    pub page_size_bytes: usize,
}

impl StoreConfig {
    /// Capacity implied by a page layout where each record is one key plus one pointer.
    pub fn from_layout(page_size_bytes: usize, key_bytes: usize, pointer_bytes: usize) -> Result<Self> {
        if key_bytes + pointer_bytes == 0 {
            return Err(Error::Config("record width must be positive".into()));
        }
        let cfg = StoreConfig {
            record_capacity: page_size_bytes / (key_bytes + pointer_bytes),
            page_size_bytes,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_capacity(record_capacity: usize) -> Result<Self> {
        let cfg = StoreConfig {
            record_capacity,
            page_size_bytes: record_capacity * 12,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.record_capacity < 4 {
            return Err(Error::Config(format!(
                "record_capacity {} is below the minimum of 4",
                self.record_capacity
            )));
        }
        Ok(())
    }
}

impl Default for StoreConfig {
    fn default() -> Self {
        // 512-byte pages, 8-byte keys, 4-byte pointers.
        StoreConfig {
            record_capacity: 42,
            page_size_bytes: 512,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PageKind {
    Leaf,
    Internal,
    ListNode,
}

impl PageKind {
    pub fn name(self) -> &'static str {
        match self {
            PageKind::Leaf => "leaf",
            PageKind::Internal => "internal",
            PageKind::ListNode => "list",
        }
    }
}

/// Contents of one page. Only the record count is checked against capacity;
/// header fields (successor pointers, chain links, lifespans) ride free.
pub trait PageContent {
    fn empty(kind: PageKind) -> Self;
    fn record_count(&self) -> usize;
    fn kind(&self) -> PageKind;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IoStats {
    pub reads: u64,
    pub writes: u64,
    pub allocated_pages: u64,
}

impl Add for IoStats {
    type Output = IoStats;
    fn add(self, o: IoStats) -> IoStats {
        IoStats {
            reads: self.reads + o.reads,
            writes: self.writes + o.writes,
            allocated_pages: self.allocated_pages + o.allocated_pages,
        }
    }
}

impl AddAssign for IoStats {
    fn add_assign(&mut self, o: IoStats) {
        *self = *self + o;
    }
}

#[derive(Debug)]
pub struct PageStore<P> {
    config: StoreConfig,
    pages: Vec<P>,
    reads: AtomicU64,
    writes: AtomicU64,
}

impl<P: PageContent> PageStore<P> {
    pub fn new(config: StoreConfig) -> Self {
        PageStore {
            config,
            pages: Vec::new(),
            reads: AtomicU64::new(0),
            writes: AtomicU64::new(0),
        }
    }

    pub fn config(&self) -> StoreConfig {
        self.config
    }

    pub fn capacity(&self) -> usize {
        self.config.record_capacity
    }

    pub fn allocate(&mut self, kind: PageKind) -> PageId {
        let id = PageId(self.pages.len() as u32);
        self.pages.push(P::empty(kind));
        id
    }

    /// One counted node access.
    pub fn read(&self, id: PageId) -> Result<&P> {
        let page = self.pages.get(id.0 as usize).ok_or(Error::UnknownPage(id))?;
        self.reads.fetch_add(1, Ordering::Relaxed);
        Ok(page)
    }

    pub fn write(&mut self, id: PageId, page: P) -> Result<()> {
        let capacity = self.config.record_capacity;
        let len = page.record_count();
        let slot = self.pages.get_mut(id.0 as usize).ok_or(Error::UnknownPage(id))?;
        if len > capacity {
            return Err(Error::PageOverflow { page: id, len, capacity });
        }
        *slot = page;
        self.writes.fetch_add(1, Ordering::Relaxed);
        Ok(())
    }

    /// Uncounted access for dumps and invariant checkers.
    pub fn inspect(&self, id: PageId) -> Option<&P> {
        self.pages.get(id.0 as usize)
    }

    pub fn page_ids(&self) -> impl Iterator<Item = PageId> {
        (0..self.pages.len() as u32).map(PageId)
    }

    pub fn page_count(&self) -> usize {
        self.pages.len()
    }

    pub fn stats(&self) -> IoStats {
        IoStats {
            reads: self.reads.load(Ordering::Relaxed),
            writes: self.writes.load(Ordering::Relaxed),
            allocated_pages: self.pages.len() as u64,
        }
    }

    /// Zero the read and write counters. The page count is space, not traffic,
    /// and is left alone.
    pub fn reset_stats(&self) {
        self.reads.store(0, Ordering::Relaxed);
        self.writes.store(0, Ordering::Relaxed);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Clone, PartialEq)]
    struct TestPage {
        kind: PageKind,
        records: Vec<u64>,
    }

    impl PageContent for TestPage {
        fn empty(kind: PageKind) -> Self {
            TestPage { kind, records: Vec::new() }
        }
        fn record_count(&self) -> usize {
            self.records.len()
        }
        fn kind(&self) -> PageKind {
            self.kind
        }
    }

    fn store() -> PageStore<TestPage> {
        PageStore::new(StoreConfig::default())
    }

    #[test]
    fn layout_gives_42() {
        let cfg = StoreConfig::from_layout(512, 8, 4).unwrap();
        assert_eq!(cfg.record_capacity, 42);
    }

    #[test]
    fn tiny_capacity_rejected() {
        assert!(StoreConfig::with_capacity(3).is_err());
        assert!(StoreConfig::with_capacity(4).is_ok());
    }

    #[test]
    fn first_allocation() {
        let mut s = store();
        assert_eq!(s.allocate(PageKind::Leaf), PageId(0));
        assert_eq!(s.stats().allocated_pages, 1);
        assert_ne!(s.allocate(PageKind::Leaf), PageId(0));
        for _ in 0..99 {
            s.allocate(PageKind::Internal);
        }
        assert_eq!(s.stats().allocated_pages, 101);
    }

    #[test]
    fn read_after_write_counts() {
        let mut s = store();
        let id = s.allocate(PageKind::Leaf);
        let page = TestPage { kind: PageKind::Leaf, records: (0..42).collect() };
        s.write(id, page.clone()).unwrap();
        assert_eq!(s.read(id).unwrap(), &page);
        s.read(id).unwrap();
        let st = s.stats();
        assert_eq!((st.reads, st.writes), (2, 1));
    }

    #[test]
    fn overflow_rejected() {
        let mut s = store();
        let id = s.allocate(PageKind::Leaf);
        let page = TestPage { kind: PageKind::Leaf, records: (0..43).collect() };
        assert!(matches!(s.write(id, page), Err(Error::PageOverflow { len: 43, .. })));
        assert_eq!(s.stats().writes, 0);
    }

    #[test]
    fn unknown_page() {
        let s = store();
        assert_eq!(s.read(PageId(999)).unwrap_err(), Error::UnknownPage(PageId(999)));
    }

    #[test]
    fn reset_keeps_space() {
        let mut s = store();
        let id = s.allocate(PageKind::Leaf);
        s.read(id).unwrap();
        s.reset_stats();
        assert_eq!(s.stats(), IoStats { reads: 0, writes: 0, allocated_pages: 1 });
    }

    proptest::proptest! {
        #[test]
        fn counters_exact(ops in proptest::collection::vec(proptest::bool::ANY, 0..200)) {
            let mut s = store();
            let id = s.allocate(PageKind::Leaf);
            let (mut r, mut w) = (0, 0);
            for is_read in ops {
                if is_read {
                    s.read(id).unwrap();
                    r += 1;
                } else {
                    s.write(id, TestPage::empty(PageKind::Leaf)).unwrap();
                    w += 1;
                }
            }
            proptest::prop_assert_eq!((s.stats().reads, s.stats().writes), (r, w));
        }
    }
}
