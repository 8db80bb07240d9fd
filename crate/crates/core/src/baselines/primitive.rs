//! Structure A (membership intervals keyed by object id, then entry time)
//! paired with Structure B (one full snapshot list per distinct event time).

use std::collections::BTreeMap;

use super::bptree::BPlusTree;
use super::{walk_chain, write_chain, ChainPage};
use crate::backend::CellBackend;
use crate::error::{Error, Result};
use crate::pagestore::{IoStats, PageId, PageStore, StoreConfig};
use crate::types::{CellEvent, EventKind, ObjectId, TemporalConstraint, Timestamp, OPEN};

const EMPTY_LIST: u32 = u32::MAX;

#[derive(Debug)]
pub struct PrimitiveIndex {
    /// `(object, enter) -> exit`, exit `OPEN` while inside.
    a: BPlusTree<(ObjectId, Timestamp), Timestamp>,
    b_upper: BPlusTree<Timestamp, u32>,
    b_lists: PageStore<ChainPage<ObjectId>>,
    /// Object to entry time of its open interval.
    live: BTreeMap<ObjectId, Timestamp>,
    /// Time whose snapshot list has not been written yet.
    pending: Option<Timestamp>,
    events: usize,
    cap: Option<usize>,
}

impl PrimitiveIndex {
    pub fn new(config: StoreConfig, cap: Option<usize>) -> Self {
        PrimitiveIndex {
            a: BPlusTree::new(config),
            b_upper: BPlusTree::new(config),
            b_lists: PageStore::new(config),
            live: BTreeMap::new(),
            pending: None,
            events: 0,
            cap,
        }
    }

    pub fn structure_a_pages(&self) -> usize {
        self.a.page_count()
    }

    pub fn structure_b_pages(&self) -> usize {
        self.b_upper.page_count() + self.b_lists.page_count()
    }

    pub fn event_count(&self) -> usize {
        self.events
    }

    fn flush(&mut self, t: Timestamp) -> Result<()> {
        let ids: Vec<ObjectId> = self.live.keys().copied().collect();
        let head = write_chain(&mut self.b_lists, &ids)?;
        self.b_upper.insert(t, head.map_or(EMPTY_LIST, |p| p.0))
    }

    fn ensure_flushed(&self) -> Result<()> {
        if self.pending.is_some() {
            return Err(Error::Argument("latest snapshot list not written; call finish first".into()));
        }
        Ok(())
    }

    fn read_list(&self, head: u32, out: &mut Vec<ObjectId>) -> Result<()> {
        let head = (head != EMPTY_LIST).then_some(PageId(head));
        walk_chain(&self.b_lists, head, |o| out.push(*o))
    }

    /// Snapshot list stored for `t` exactly, if any. Uncounted.
    pub fn snapshot_list(&self, t: Timestamp) -> Option<Vec<ObjectId>> {
        let head = self.b_upper.entries().into_iter().find(|(k, _)| *k == t)?.1;
        let mut out = Vec::new();
        let mut next = (head != EMPTY_LIST).then_some(PageId(head));
        while let Some(id) = next {
            let page = self.b_lists.inspect(id)?;
            out.extend_from_slice(&page.items);
            next = page.next;
        }
        Some(out)
    }

    /// Intervals of one object entered at or before `until`, in time order.
    fn intervals(&self, object: ObjectId, until: Timestamp) -> Result<Vec<(Timestamp, Timestamp)>> {
        let mut out = Vec::new();
        self.a.scan_from((object, 0), |(o, s), e| {
            if o != object || s > until {
                return false;
            }
            out.push((s, e));
            true
        })?;
        Ok(out)
    }
}

impl CellBackend for PrimitiveIndex {
    fn apply(&mut self, ev: &CellEvent) -> Result<()> {
        if let Some(cap) = self.cap {
            if self.events >= cap {
                return Err(Error::CapExceeded { cap });
            }
        }
        if let Some(p) = self.pending {
            if ev.t < p {
                return Err(Error::OutOfOrder { got: ev.t, latest: p });
            }
            if ev.t > p {
                self.flush(p)?;
            }
        }
        match ev.kind {
            EventKind::Enter => {
                if self.live.insert(ev.object, ev.t).is_some() {
                    return Err(Error::AlreadyLive(ev.object));
                }
                self.a.insert((ev.object, ev.t), OPEN)?;
            }
            EventKind::Exit => {
                let start = self.live.remove(&ev.object).ok_or(Error::NotLive(ev.object))?;
                self.a.insert((ev.object, start), ev.t)?;
            }
        }
        self.pending = Some(ev.t);
        self.events += 1;
        Ok(())
    }

    fn finish(&mut self) -> Result<()> {
        if let Some(p) = self.pending.take() {
            self.flush(p)?;
        }
        Ok(())
    }

    fn eval_predicate(&self, c: TemporalConstraint) -> Result<Vec<ObjectId>> {
        self.ensure_flushed()?;
        let (t1, t2) = c.bounds();
        let mut heads = Vec::new();
        if let Some((_, h)) = self.b_upper.last_le(t1)? {
            heads.push(h);
        }
        if t2 > t1 {
            self.b_upper.scan_from(t1 + 1, |t, h| {
                if t > t2 {
                    return false;
                }
                heads.push(h);
                true
            })?;
        }
        let mut out = Vec::new();
        for h in heads {
            self.read_list(h, &mut out)?;
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    fn verify(&self, object: ObjectId, c: TemporalConstraint) -> Result<bool> {
        Ok(self.intervals(object, c.bounds().1)?.into_iter().any(|(s, e)| c.meets(s, e)))
    }

    fn enter_times(&self, object: ObjectId) -> Result<Vec<Timestamp>> {
        Ok(self.intervals(object, OPEN)?.into_iter().map(|(s, _)| s).collect())
    }

    fn members_ever(&self) -> Result<Vec<ObjectId>> {
        let mut out: Vec<ObjectId> = Vec::new();
        self.a.scan_from((ObjectId(0), 0), |(o, _), _| {
            if out.last() != Some(&o) {
                out.push(o);
            }
            true
        })?;
        Ok(out)
    }

    fn live_count(&self) -> usize {
        self.live.len()
    }

    fn page_count(&self) -> usize {
        self.structure_a_pages() + self.structure_b_pages()
    }

    fn io(&self) -> IoStats {
        self.a.io() + self.b_upper.io() + self.b_lists.stats()
    }

    fn reset_io(&self) {
        self.a.reset_io();
        self.b_upper.reset_io();
        self.b_lists.reset_stats();
    }
}
