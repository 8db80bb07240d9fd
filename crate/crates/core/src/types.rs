//! Identifiers and the small value types shared by every module.

use std::fmt;

use crate::error::{Error, Result};

/// Discrete time instant.
pub type Timestamp = u64;

/// Sentinel for an open lifespan end, rendered `$` in dumps.
pub const OPEN: Timestamp = Timestamp::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ObjectId(pub u64);

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "O{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellId {
    pub col: u32,
    pub row: u32,
}

impl CellId {
    pub const fn new(col: u32, row: u32) -> Self {
        CellId { col, row }
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.col, self.row)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    Enter,
    Exit,
}

impl EventKind {
    pub fn code(self) -> char {
        match self {
            EventKind::Enter => 'E',
            EventKind::Exit => 'X',
        }
    }
}

/// An object entering or leaving one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CellEvent {
    pub object: ObjectId,
    pub t: Timestamp,
    pub kind: EventKind,
}

impl CellEvent {
    pub fn enter(object: u64, t: Timestamp) -> Self {
        CellEvent {
            object: ObjectId(object),
            t,
            kind: EventKind::Enter,
        }
    }

    pub fn exit(object: u64, t: Timestamp) -> Self {
        CellEvent {
            object: ObjectId(object),
            t,
            kind: EventKind::Exit,
        }
    }
}

/// A cell event tagged with the cell it belongs to; the unit of an event log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RoutedEvent {
    pub cell: CellId,
    pub event: CellEvent,
}

impl RoutedEvent {
    /// Global replay order: time, then exits before enters.
    pub fn replay_key(&self) -> (Timestamp, u8, CellId, ObjectId) {
        let rank = match self.event.kind {
            EventKind::Exit => 0,
            EventKind::Enter => 1,
        };
        (self.event.t, rank, self.cell, self.event.object)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TemporalConstraint {
    Instant(Timestamp),
    Interval(Timestamp, Timestamp),
}

impl TemporalConstraint {
    pub fn interval(t1: Timestamp, t2: Timestamp) -> Result<Self> {
        if t1 > t2 {
            return Err(Error::Argument(format!("interval [{t1},{t2}] is reversed")));
        }
        Ok(TemporalConstraint::Interval(t1, t2))
    }

    /// Closed bounds `[t1, t2]`; an instant is the degenerate interval.
    pub fn bounds(&self) -> (Timestamp, Timestamp) {
        match *self {
            TemporalConstraint::Instant(t) => (t, t),
            TemporalConstraint::Interval(a, b) => (a, b),
        }
    }

    /// Whether the half-open membership span `[start, end)` meets the constraint.
    pub fn meets(&self, start: Timestamp, end: Timestamp) -> bool {
        let (t1, t2) = self.bounds();
        start < end && start <= t2 && end > t1
    }
}

impl fmt::Display for TemporalConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemporalConstraint::Instant(t) => write!(f, "{t}"),
            TemporalConstraint::Interval(a, b) => write!(f, "[{a},{b}]"),
        }
    }
}
