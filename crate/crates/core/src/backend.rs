//! The per-cell index contract shared by the three backends.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mvindex::MvIndex;
use crate::pagestore::IoStats;
use crate::types::{CellEvent, EventKind, ObjectId, TemporalConstraint, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BackendKind {
    List,
    Primitive,
    Advanced,
}

impl BackendKind {
    pub const ALL: [BackendKind; 3] = [BackendKind::List, BackendKind::Primitive, BackendKind::Advanced];

    pub fn name(self) -> &'static str {
        match self {
            BackendKind::List => "list",
            BackendKind::Primitive => "primitive",
            BackendKind::Advanced => "advanced",
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BackendKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "list" => Ok(BackendKind::List),
            "primitive" => Ok(BackendKind::Primitive),
            "advanced" => Ok(BackendKind::Advanced),
            other => Err(Error::Argument(format!("unknown backend '{other}' (list|primitive|advanced)"))),
        }
    }
}

pub trait CellBackend {
    /// Events arrive in replay order for this cell.
    fn apply(&mut self, ev: &CellEvent) -> Result<()>;

    /// Called once after the last event, before queries.
    fn finish(&mut self) -> Result<()> {
        Ok(())
    }

    /// F(cell, T), sorted.
    fn eval_predicate(&self, c: TemporalConstraint) -> Result<Vec<ObjectId>>;

    fn verify(&self, object: ObjectId, c: TemporalConstraint) -> Result<bool>;

    /// Subset of sorted `candidates` that satisfy `c`.
    fn verify_many(&self, candidates: &[ObjectId], c: TemporalConstraint) -> Result<Vec<ObjectId>> {
        let mut out = Vec::new();
        for &o in candidates {
            if self.verify(o, c)? {
                out.push(o);
            }
        }
        Ok(out)
    }

    /// Times at which `object` entered this cell, ascending.
    fn enter_times(&self, object: ObjectId) -> Result<Vec<Timestamp>>;

    /// Every object that was ever inside, sorted.
    fn members_ever(&self) -> Result<Vec<ObjectId>>;

    /// Objects inside in the newest version.
    fn live_count(&self) -> usize;

    fn page_count(&self) -> usize;

    fn io(&self) -> IoStats;
    fn reset_io(&self);
}

impl CellBackend for MvIndex {
    fn apply(&mut self, ev: &CellEvent) -> Result<()> {
        match ev.kind {
            EventKind::Enter => self.insert(ev.object, ev.t),
            EventKind::Exit => self.logical_delete(ev.object, ev.t),
        }
    }

    fn eval_predicate(&self, c: TemporalConstraint) -> Result<Vec<ObjectId>> {
        match c {
            TemporalConstraint::Instant(t) => self.snapshot(t),
            TemporalConstraint::Interval(a, b) => self.interval_scan(a, b),
        }
    }

    fn verify(&self, object: ObjectId, c: TemporalConstraint) -> Result<bool> {
        match c {
            TemporalConstraint::Instant(t) => self.point_query(object, t),
            TemporalConstraint::Interval(a, b) => self.key_interval_query(object, a, b),
        }
    }

    fn enter_times(&self, object: ObjectId) -> Result<Vec<Timestamp>> {
        Ok(self.key_history(object)?.into_iter().map(|(s, _)| s).collect())
    }

    fn members_ever(&self) -> Result<Vec<ObjectId>> {
        match self.latest() {
            Some(latest) => self.interval_scan(0, latest),
            None => Ok(Vec::new()),
        }
    }

    fn live_count(&self) -> usize {
        self.stats().n_live as usize
    }

    fn page_count(&self) -> usize {
        self.store().page_count()
    }

    fn io(&self) -> IoStats {
        MvIndex::io(self)
    }

    fn reset_io(&self) {
        MvIndex::reset_io(self)
    }
}

/// Membership spans `[enter, exit)` rebuilt from one object's events in time order.
pub(crate) fn spans_from_events(events: impl IntoIterator<Item = (Timestamp, EventKind)>) -> Vec<(Timestamp, Timestamp)> {
    let mut spans = Vec::new();
    let mut open: Option<Timestamp> = None;
    for (t, kind) in events {
        match kind {
            EventKind::Enter => open = Some(t),
            EventKind::Exit => {
                if let Some(s) = open.take() {
                    spans.push((s, t));
                }
            }
        }
    }
    if let Some(s) = open {
        spans.push((s, crate::types::OPEN));
    }
    spans
}
