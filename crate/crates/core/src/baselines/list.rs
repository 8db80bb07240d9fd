//! Per-cell list of `(object, t)` entries ordered by object id, then time,
//! stored as a packed page chain. Exit entries are kept alongside enters.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashSet};

use super::{walk_chain, ChainPage};
use crate::backend::{spans_from_events, CellBackend};
use crate::error::{Error, Result};
use crate::pagestore::{IoStats, PageId, PageKind, PageStore, StoreConfig};
use crate::types::{CellEvent, EventKind, ObjectId, TemporalConstraint, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ListEntry {
    pub object: ObjectId,
    pub t: Timestamp,
    pub kind: EventKind,
}

impl ListEntry {
    fn sort_key(&self) -> (ObjectId, Timestamp, u8) {
        let rank = match self.kind {
            EventKind::Exit => 0,
            EventKind::Enter => 1,
        };
        (self.object, self.t, rank)
    }
}

impl Ord for ListEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl PartialOrd for ListEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<&CellEvent> for ListEntry {
    fn from(ev: &CellEvent) -> Self {
        ListEntry { object: ev.object, t: ev.t, kind: ev.kind }
    }
}

/// Updates go to an ordered in-memory buffer; [`CellBackend::finish`] lays
/// the whole list out over full pages, every page full except the last.
#[derive(Debug)]
pub struct ListIndex {
    store: PageStore<ChainPage<ListEntry>>,
    chain: Vec<PageId>,
    buffer: BTreeSet<ListEntry>,
    dirty: bool,
    live: HashSet<ObjectId>,
}

impl ListIndex {
    pub fn new(config: StoreConfig) -> Self {
        ListIndex {
            store: PageStore::new(config),
            chain: Vec::new(),
            buffer: BTreeSet::new(),
            dirty: false,
            live: HashSet::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    /// Entries in list order, uncounted.
    pub fn entries(&self) -> impl Iterator<Item = &ListEntry> {
        self.buffer.iter()
    }

    fn ensure_packed(&self) -> Result<()> {
        if self.dirty {
            return Err(Error::Argument("list has unflushed updates; call finish first".into()));
        }
        Ok(())
    }

    /// Whole list, one read per page.
    pub fn scan(&self) -> Result<Vec<ListEntry>> {
        self.ensure_packed()?;
        let mut out = Vec::with_capacity(self.buffer.len());
        walk_chain(&self.store, self.chain.first().copied(), |e| out.push(*e))?;
        Ok(out)
    }
}

/// Split a list-ordered run into per-object slices.
fn by_object(entries: &[ListEntry]) -> impl Iterator<Item = (ObjectId, &[ListEntry])> {
    entries.chunk_by(|a, b| a.object == b.object).map(|run| (run[0].object, run))
}

fn satisfies(run: &[ListEntry], c: TemporalConstraint) -> bool {
    spans_from_events(run.iter().map(|e| (e.t, e.kind))).into_iter().any(|(s, e)| c.meets(s, e))
}

impl CellBackend for ListIndex {
    fn apply(&mut self, ev: &CellEvent) -> Result<()> {
        match ev.kind {
            EventKind::Enter => self.live.insert(ev.object),
            EventKind::Exit => self.live.remove(&ev.object),
        };
        self.buffer.insert(ListEntry::from(ev));
        self.dirty = true;
        Ok(())
    }

    fn finish(&mut self) -> Result<()> {
        if !self.dirty {
            return Ok(());
        }
        let b = self.store.capacity();
        let items: Vec<ListEntry> = self.buffer.iter().copied().collect();
        let pages = items.len().div_ceil(b);
        while self.chain.len() < pages {
            self.chain.push(self.store.allocate(PageKind::ListNode));
        }
        for (i, chunk) in items.chunks(b).enumerate() {
            let page = ChainPage { items: chunk.to_vec(), next: self.chain.get(i + 1).copied() };
            self.store.write(self.chain[i], page)?;
        }
        self.dirty = false;
        Ok(())
    }

    fn eval_predicate(&self, c: TemporalConstraint) -> Result<Vec<ObjectId>> {
        let entries = self.scan()?;
        Ok(by_object(&entries).filter(|(_, run)| satisfies(run, c)).map(|(o, _)| o).collect())
    }

    fn verify(&self, object: ObjectId, c: TemporalConstraint) -> Result<bool> {
        Ok(!self.verify_many(&[object], c)?.is_empty())
    }

    fn verify_many(&self, candidates: &[ObjectId], c: TemporalConstraint) -> Result<Vec<ObjectId>> {
        if candidates.is_empty() {
            return Ok(Vec::new());
        }
        let entries = self.scan()?;
        Ok(by_object(&entries)
            .filter(|(o, run)| candidates.binary_search(o).is_ok() && satisfies(run, c))
            .map(|(o, _)| o)
            .collect())
    }

    fn enter_times(&self, object: ObjectId) -> Result<Vec<Timestamp>> {
        let entries = self.scan()?;
        Ok(entries.iter().filter(|e| e.object == object && e.kind == EventKind::Enter).map(|e| e.t).collect())
    }

    fn members_ever(&self) -> Result<Vec<ObjectId>> {
        let entries = self.scan()?;
        Ok(by_object(&entries).map(|(o, _)| o).collect())
    }

    fn live_count(&self) -> usize {
        self.live.len()
    }

    fn page_count(&self) -> usize {
        self.store.page_count()
    }

    fn io(&self) -> IoStats {
        self.store.stats()
    }

    fn reset_io(&self) {
        self.store.reset_stats();
    }
}

/// Smallest enter time strictly after `after` in each list in turn.
pub(crate) fn ordered_visit(per_cell: &[Vec<Timestamp>]) -> bool {
    let mut prev: Option<Timestamp> = None;
    for times in per_cell {
        let next = times.iter().copied().find(|&t| prev.is_none_or(|p| t > p));
        match next {
            Some(t) => prev = Some(t),
            None => return false,
        }
    }
    true
}

/// Objects that entered `lists[0]`, then `lists[1]`, ... at strictly
/// increasing times. Each list is read once; the scans are merged by object id.
pub fn list_eval_order(lists: &[&ListIndex]) -> Result<Vec<ObjectId>> {
    if lists.is_empty() {
        return Err(Error::Argument("order query needs at least one cell".into()));
    }
    let scans: Vec<Vec<ListEntry>> = lists.iter().map(|l| l.scan()).collect::<Result<_>>()?;
    let mut cursor = vec![0usize; scans.len()];
    let mut out = Vec::new();
    // An object must appear in every list, so the merge ends with the first exhausted list.
    while let Some(heads) = scans.iter().zip(&cursor).map(|(s, &i)| s.get(i).map(|e| e.object)).collect::<Option<Vec<_>>>() {
        let lead = *heads.iter().min().expect("at least one list");
        let mut per_cell = Vec::with_capacity(scans.len());
        for (s, i) in scans.iter().zip(cursor.iter_mut()) {
            let mut times = Vec::new();
            while let Some(e) = s.get(*i).filter(|e| e.object == lead) {
                if e.kind == EventKind::Enter {
                    times.push(e.t);
                }
                *i += 1;
            }
            per_cell.push(times);
        }
        if ordered_visit(&per_cell) {
            out.push(lead);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build(events: &[CellEvent], b: usize) -> ListIndex {
        let mut l = ListIndex::new(StoreConfig::with_capacity(b).unwrap());
        for ev in events {
            l.apply(ev).unwrap();
        }
        l.finish().unwrap();
        l
    }

    fn cell_c1() -> ListIndex {
        build(&[CellEvent::enter(1, 4), CellEvent::exit(1, 5), CellEvent::enter(2, 7), CellEvent::exit(2, 8)], 4)
    }

    fn cell_c2() -> ListIndex {
        build(
            &[
                CellEvent::enter(1, 3),
                CellEvent::enter(3, 3),
                CellEvent::exit(1, 4),
                CellEvent::exit(3, 4),
                CellEvent::enter(2, 8),
                CellEvent::exit(2, 9),
                CellEvent::enter(2, 10),
                CellEvent::exit(2, 11),
            ],
            4,
        )
    }

    #[test]
    fn c1_list_layout() {
        let l = cell_c1();
        let e: Vec<_> = l.scan().unwrap().iter().map(|e| (e.object.0, e.t, e.kind.code())).collect();
        assert_eq!(e, vec![(1, 4, 'E'), (1, 5, 'X'), (2, 7, 'E'), (2, 8, 'X')]);
    }

    #[test]
    fn empty_list() {
        let l = build(&[], 4);
        l.reset_io();
        assert!(l.eval_predicate(TemporalConstraint::Instant(3)).unwrap().is_empty());
        assert_eq!(l.io().reads, 0);
    }

    #[test]
    fn interval_scans_whole_list() {
        let l = cell_c2();
        l.reset_io();
        let got = l.eval_predicate(TemporalConstraint::Interval(6, 8)).unwrap();
        assert_eq!(got, vec![ObjectId(2)]);
        assert_eq!(l.io().reads, 2);
        assert_eq!(l.page_count(), 2);
    }

    #[test]
    fn unflushed_list_refuses_queries() {
        let mut l = cell_c1();
        l.apply(&CellEvent::enter(9, 20)).unwrap();
        assert!(l.eval_predicate(TemporalConstraint::Instant(20)).is_err());
        l.finish().unwrap();
        assert_eq!(l.eval_predicate(TemporalConstraint::Instant(20)).unwrap(), vec![ObjectId(9)]);
    }

    #[test]
    fn ordered_visit_is_strict() {
        assert!(ordered_visit(&[vec![2], vec![3]]));
        assert!(!ordered_visit(&[vec![3], vec![3]]));
        assert!(ordered_visit(&[vec![1, 5], vec![2, 4], vec![3]]));
        assert!(!ordered_visit(&[vec![5], vec![2]]));
        assert!(!ordered_visit(&[vec![1], vec![]]));
    }

    #[test]
    fn order_merge_single_and_pair() {
        let c1 = cell_c1();
        let c2 = cell_c2();
        assert_eq!(list_eval_order(&[&c1]).unwrap(), vec![ObjectId(1), ObjectId(2)]);
        assert_eq!(list_eval_order(&[&c2, &c1]).unwrap(), vec![ObjectId(1)]);
        assert_eq!(list_eval_order(&[&c1, &c2]).unwrap(), vec![ObjectId(2)]);
    }

    proptest::proptest! {
        #[test]
        fn random_events_stay_sorted_and_packed(seq in proptest::collection::vec((0u64..30, 1u64..4), 0..400)) {
            let mut inside = std::collections::HashMap::new();
            let mut t = 0;
            let mut l = ListIndex::new(StoreConfig::with_capacity(6).unwrap());
            for (o, dt) in seq {
                t += dt;
                let entry = inside.entry(o).or_insert(false);
                let ev = if *entry { CellEvent::exit(o, t) } else { CellEvent::enter(o, t) };
                *entry = !*entry;
                l.apply(&ev).unwrap();
            }
            l.finish().unwrap();
            let all = l.scan().unwrap();
            proptest::prop_assert!(all.windows(2).all(|w| w[0] < w[1]));
            proptest::prop_assert_eq!(l.page_count(), all.len().div_ceil(6));
            l.reset_io();
            l.eval_predicate(TemporalConstraint::Instant(t / 2)).unwrap();
            proptest::prop_assert_eq!(l.io().reads as usize, all.len().div_ceil(6));
        }
    }
}
