//! Insert-only paged B+-tree with chained leaves. Backs both levels of the
//! primitive solution's structures.

use crate::error::Result;
use crate::pagestore::{IoStats, PageContent, PageId, PageKind, PageStore, StoreConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum BPage<K, V> {
    Leaf { entries: Vec<(K, V)>, next: Option<PageId> },
    /// `children[i]` holds keys in `[keys[i-1], keys[i])`.
    Internal { keys: Vec<K>, children: Vec<PageId> },
}

impl<K, V> PageContent for BPage<K, V> {
    fn empty(kind: PageKind) -> Self {
        match kind {
            PageKind::Internal => BPage::Internal { keys: Vec::new(), children: Vec::new() },
            _ => BPage::Leaf { entries: Vec::new(), next: None },
        }
    }

    fn record_count(&self) -> usize {
        match self {
            BPage::Leaf { entries, .. } => entries.len(),
            BPage::Internal { children, .. } => children.len(),
        }
    }

    fn kind(&self) -> PageKind {
        match self {
            BPage::Leaf { .. } => PageKind::Leaf,
            BPage::Internal { .. } => PageKind::Internal,
        }
    }
}

#[derive(Debug)]
pub struct BPlusTree<K, V> {
    store: PageStore<BPage<K, V>>,
    root: Option<PageId>,
    height: u32,
    len: usize,
}

impl<K: Ord + Copy, V: Copy> BPlusTree<K, V> {
    pub fn new(config: StoreConfig) -> Self {
        BPlusTree {
            store: PageStore::new(config),
            root: None,
            height: 0,
            len: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn page_count(&self) -> usize {
        self.store.page_count()
    }

    pub fn io(&self) -> IoStats {
        self.store.stats()
    }

    pub fn reset_io(&self) {
        self.store.reset_stats();
    }

    fn child_for(keys: &[K], children: &[PageId], key: &K) -> (usize, PageId) {
        let i = keys.partition_point(|k| k <= key);
        (i, children[i])
    }

    /// Insert, or overwrite the value of an existing key.
    pub fn insert(&mut self, key: K, value: V) -> Result<()> {
        let Some(root) = self.root else {
            let id = self.store.allocate(PageKind::Leaf);
            self.store.write(id, BPage::Leaf { entries: vec![(key, value)], next: None })?;
            self.root = Some(id);
            self.height = 1;
            self.len = 1;
            return Ok(());
        };
        let mut path: Vec<(PageId, usize)> = Vec::new();
        let mut id = root;
        for _ in 1..self.height {
            let BPage::Internal { keys, children } = self.store.read(id)? else { unreachable!() };
            let (slot, child) = Self::child_for(keys, children, &key);
            path.push((id, slot));
            id = child;
        }
        let BPage::Leaf { mut entries, next } = self.store.read(id)?.clone() else { unreachable!() };
        match entries.binary_search_by(|(k, _)| k.cmp(&key)) {
            Ok(i) => {
                entries[i].1 = value;
                return self.store.write(id, BPage::Leaf { entries, next });
            }
            Err(i) => entries.insert(i, (key, value)),
        }
        self.len += 1;
        if entries.len() <= self.store.capacity() {
            return self.store.write(id, BPage::Leaf { entries, next });
        }
        let right_entries = entries.split_off(entries.len() / 2);
        let sep = right_entries[0].0;
        let right = self.store.allocate(PageKind::Leaf);
        self.store.write(right, BPage::Leaf { entries: right_entries, next })?;
        self.store.write(id, BPage::Leaf { entries, next: Some(right) })?;
        self.push_up(path, id, sep, right)
    }

    fn push_up(&mut self, mut path: Vec<(PageId, usize)>, left: PageId, sep: K, right: PageId) -> Result<()> {
        let Some((parent, slot)) = path.pop() else {
            let root = self.store.allocate(PageKind::Internal);
            self.store.write(root, BPage::Internal { keys: vec![sep], children: vec![left, right] })?;
            self.root = Some(root);
            self.height += 1;
            return Ok(());
        };
        let BPage::Internal { mut keys, mut children } = self.store.read(parent)?.clone() else { unreachable!() };
        keys.insert(slot, sep);
        children.insert(slot + 1, right);
        if children.len() <= self.store.capacity() {
            return self.store.write(parent, BPage::Internal { keys, children });
        }
        let mid = children.len() / 2;
        let right_children = children.split_off(mid);
        let mut right_keys = keys.split_off(mid - 1);
        let up = right_keys.remove(0);
        let new_right = self.store.allocate(PageKind::Internal);
        self.store.write(new_right, BPage::Internal { keys: right_keys, children: right_children })?;
        self.store.write(parent, BPage::Internal { keys, children })?;
        self.push_up(path, parent, up, new_right)
    }

    /// Feed entries with key `>= from` in order until `f` returns false.
    pub fn scan_from(&self, from: K, mut f: impl FnMut(K, V) -> bool) -> Result<()> {
        let Some(mut leaf) = self.leaf_for(&from)? else { return Ok(()) };
        loop {
            let BPage::Leaf { entries, next } = self.store.read(leaf)? else { unreachable!() };
            for &(k, v) in entries.iter().filter(|(k, _)| *k >= from) {
                if !f(k, v) {
                    return Ok(());
                }
            }
            match next {
                Some(n) => leaf = *n,
                None => return Ok(()),
            }
        }
    }

    /// Descent through internal nodes only; the leaf itself is left unread.
    fn leaf_for(&self, key: &K) -> Result<Option<PageId>> {
        let Some(mut id) = self.root else { return Ok(None) };
        for _ in 1..self.height {
            let BPage::Internal { keys, children } = self.store.read(id)? else { unreachable!() };
            id = Self::child_for(keys, children, key).1;
        }
        Ok(Some(id))
    }

    /// All entries in key order, uncounted.
    pub fn entries(&self) -> Vec<(K, V)> {
        let mut out = Vec::with_capacity(self.len);
        let Some(mut id) = self.root else { return out };
        while let Some(BPage::Internal { children, .. }) = self.store.inspect(id) {
            id = children[0];
        }
        let mut next = Some(id);
        while let Some(BPage::Leaf { entries, next: n }) = next.and_then(|id| self.store.inspect(id)) {
            out.extend_from_slice(entries);
            next = *n;
        }
        out
    }

    /// Entry with the greatest key `<= key`.
    pub fn last_le(&self, key: K) -> Result<Option<(K, V)>> {
        let Some(leaf) = self.leaf_for(&key)? else { return Ok(None) };
        let BPage::Leaf { entries, .. } = self.store.read(leaf)? else { unreachable!() };
        Ok(entries.iter().rev().find(|(k, _)| *k <= key).copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    #[test]
    fn random_inserts_scan_in_order() {
        let mut keys: Vec<u32> = (0..2000).collect();
        keys.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(1));
        let mut t = BPlusTree::new(StoreConfig::with_capacity(8).unwrap());
        for &k in &keys {
            t.insert(k, k * 2).unwrap();
        }
        assert_eq!(t.len(), 2000);
        assert!(t.height() >= 4);
        let mut seen = Vec::new();
        t.scan_from(0, |k, v| {
            assert_eq!(v, k * 2);
            seen.push(k);
            true
        })
        .unwrap();
        assert_eq!(seen, (0..2000).collect::<Vec<_>>());
        let mut tail = Vec::new();
        t.scan_from(1995, |k, _| {
            tail.push(k);
            true
        })
        .unwrap();
        assert_eq!(tail, vec![1995, 1996, 1997, 1998, 1999]);
        assert_eq!(t.last_le(1500).unwrap(), Some((1500, 3000)));
    }

    #[test]
    fn last_le_on_gaps() {
        let mut t = BPlusTree::new(StoreConfig::with_capacity(4).unwrap());
        for k in (10..200).step_by(10) {
            t.insert(k, ()).unwrap();
        }
        assert_eq!(t.last_le(5).unwrap(), None);
        assert_eq!(t.last_le(10).unwrap(), Some((10, ())));
        assert_eq!(t.last_le(57).unwrap(), Some((50, ())));
        assert_eq!(t.last_le(1000).unwrap(), Some((190, ())));
        t.insert(50, ()).unwrap();
        assert_eq!(t.len(), 19);
    }

    #[test]
    fn point_lookup_costs_height_reads() {
        let mut t = BPlusTree::new(StoreConfig::with_capacity(4).unwrap());
        for k in 0..100u32 {
            t.insert(k, ()).unwrap();
        }
        t.reset_io();
        t.last_le(42).unwrap();
        assert_eq!(t.io().reads, t.height() as u64);
    }
}
