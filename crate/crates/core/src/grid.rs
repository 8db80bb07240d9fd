//! Uniform grid over a rectangular universe, and conversion of sampled
//! trajectories into per-cell enter/exit events.

use std::collections::HashMap;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::types::{CellEvent, CellId, EventKind, ObjectId, RoutedEvent, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T> {
    pub width_cells: u32,
    pub height_cells: u32,
    pub min_x: T,
    pub min_y: T,
    pub max_x: T,
    pub max_y: T,
}

impl<T: Float> GridSpec<T> {
    /// Square universe `[0, side)^2`.
    pub fn square(side: T, width_cells: u32, height_cells: u32) -> Result<Self> {
        let g = GridSpec {
            width_cells,
            height_cells,
            min_x: T::zero(),
            min_y: T::zero(),
            max_x: side,
            max_y: side,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width_cells == 0 || self.height_cells == 0 {
            return Err(Error::Config("grid needs at least one cell per axis".into()));
        }
        if !(self.min_x < self.max_x && self.min_y < self.max_y) {
            return Err(Error::Config("universe bounds are empty".into()));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.width_cells as usize * self.height_cells as usize
    }

    pub fn cells(&self) -> impl Iterator<Item = CellId> + '_ {
        (0..self.height_cells).flat_map(move |r| (0..self.width_cells).map(move |c| CellId::new(c, r)))
    }

    pub fn contains(&self, x: T, y: T) -> bool {
        x >= self.min_x && x < self.max_x && y >= self.min_y && y < self.max_y
    }

    pub fn contains_cell(&self, cell: CellId) -> bool {
        cell.col < self.width_cells && cell.row < self.height_cells
    }

    /// Cells are half-open `[lo, hi)`, so a shared edge belongs to the higher cell.
    pub fn locate(&self, x: T, y: T) -> Result<CellId> {
        if !self.contains(x, y) {
            return Err(Error::Argument("point lies outside the universe".into()));
        }
        let axis = |v: T, lo: T, hi: T, n: u32| -> u32 {
            let idx = ((v - lo) * T::from(n).unwrap() / (hi - lo)).floor();
            idx.to_u32().unwrap_or(0).min(n - 1)
        };
        Ok(CellId::new(
            axis(x, self.min_x, self.max_x, self.width_cells),
            axis(y, self.min_y, self.max_y, self.height_cells),
        ))
    }
}

/// One position report of a moving object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample<T> {
    pub t: Timestamp,
    pub x: T,
    pub y: T,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Crossings {
    pub events: Vec<RoutedEvent>,
    /// Samples outside the universe, ignored.
    pub dropped: usize,
}

/// Enter the cell of the first sample, and on every cell change exit the old
/// cell and enter the new one at the new sample's time. No interpolation:
/// an object is in the cell of its latest sample.
pub fn samples_to_events<T: Float>(grid: &GridSpec<T>, object: ObjectId, samples: &[Sample<T>]) -> Result<Crossings> {
    let mut out = Crossings::default();
    let mut current: Option<CellId> = None;
    let mut last_t: Option<Timestamp> = None;
    for s in samples {
        if last_t.is_some_and(|lt| s.t <= lt) {
            return Err(Error::Argument(format!("{object}: sample times must increase (t={})", s.t)));
        }
        last_t = Some(s.t);
        let Ok(cell) = grid.locate(s.x, s.y) else {
            out.dropped += 1;
            continue;
        };
        if current == Some(cell) {
            continue;
        }
        if let Some(old) = current {
            out.events.push(RoutedEvent {
                cell: old,
                event: CellEvent { object, t: s.t, kind: EventKind::Exit },
            });
        }
        out.events.push(RoutedEvent {
            cell,
            event: CellEvent { object, t: s.t, kind: EventKind::Enter },
        });
        current = Some(cell);
    }
    Ok(out)
}

/// Tracks, per (object, cell), whether the object is inside, and rejects
/// events that break the Enter/Exit alternation or go back in time.
#[derive(Debug, Default, Clone)]
pub struct AlternationGuard {
    state: HashMap<(ObjectId, CellId), (bool, Timestamp)>,
    last: Option<(Timestamp, u8)>,
}

impl AlternationGuard {
    pub fn check(&mut self, ev: &RoutedEvent) -> Result<()> {
        let key = ev.replay_key();
        if let Some(last) = self.last {
            if (key.0, key.1) < last {
                return Err(Error::OutOfOrder { got: ev.event.t, latest: last.0 });
            }
        }
        self.last = Some((key.0, key.1));
        let slot = self.state.entry((ev.event.object, ev.cell)).or_insert((false, 0));
        let fail = |reason: &str| Error::Alternation {
            object: ev.event.object,
            cell: ev.cell,
            reason: reason.to_string(),
        };
        match (ev.event.kind, slot.0) {
            (EventKind::Enter, true) => return Err(fail("enters while already inside")),
            (EventKind::Exit, false) => return Err(fail("exits without entering")),
            (EventKind::Exit, true) if ev.event.t < slot.1 => return Err(fail("exits before it entered")),
            _ => {}
        }
        *slot = (ev.event.kind == EventKind::Enter, ev.event.t);
        Ok(())
    }
}

/// Sort a batch into replay order: time, exits before enters.
pub fn sort_for_replay(events: &mut [RoutedEvent]) {
    events.sort_by_key(|e| e.replay_key());
}

/// Dispatch globally ordered events to per-cell sinks, validating alternation.
pub fn route(events: &[RoutedEvent], mut sink: impl FnMut(CellId, &CellEvent) -> Result<()>) -> Result<()> {
    let mut guard = AlternationGuard::default();
    for ev in events {
        guard.check(ev)?;
        sink(ev.cell, &ev.event)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec<f64> {
        GridSpec::square(1000.0, 10, 10).unwrap()
    }

    #[test]
    fn locate_corners_and_edges() {
        let g = grid();
        assert_eq!(g.locate(0.0, 0.0).unwrap(), CellId::new(0, 0));
        assert_eq!(g.locate(999.9, 999.9).unwrap(), CellId::new(9, 9));
        assert_eq!(g.locate(100.0, 0.0).unwrap(), CellId::new(1, 0));
        assert!(g.locate(1000.0, 5.0).is_err());
        assert!(g.locate(-0.1, 5.0).is_err());
    }

    #[test]
    fn locate_f32() {
        let g: GridSpec<f32> = GridSpec::square(1000.0, 10, 10).unwrap();
        assert_eq!(g.locate(999.99, 0.0).unwrap(), CellId::new(9, 0));
    }

    #[test]
    fn one_crossing() {
        let g = grid();
        let s = [
            Sample { t: 1, x: 50.0, y: 50.0 },
            Sample { t: 2, x: 60.0, y: 50.0 },
            Sample { t: 3, x: 150.0, y: 50.0 },
        ];
        let out = samples_to_events(&g, ObjectId(1), &s).unwrap();
        let c1 = CellId::new(0, 0);
        let c2 = CellId::new(1, 0);
        assert_eq!(
            out.events,
            vec![
                RoutedEvent { cell: c1, event: CellEvent::enter(1, 1) },
                RoutedEvent { cell: c1, event: CellEvent::exit(1, 3) },
                RoutedEvent { cell: c2, event: CellEvent::enter(1, 3) },
            ]
        );
    }

    #[test]
    fn single_sample_and_monotonicity() {
        let g = grid();
        let out = samples_to_events(&g, ObjectId(1), &[Sample { t: 5, x: 1.0, y: 1.0 }]).unwrap();
        assert_eq!(out.events.len(), 1);
        let bad = [Sample { t: 5, x: 1.0, y: 1.0 }, Sample { t: 5, x: 2.0, y: 1.0 }];
        assert!(samples_to_events(&g, ObjectId(1), &bad).is_err());
    }

    #[test]
    fn out_of_universe_dropped() {
        let g = grid();
        let s = [Sample { t: 1, x: 1.0, y: 1.0 }, Sample { t: 2, x: 1e6, y: 1.0 }, Sample { t: 3, x: 2.0, y: 1.0 }];
        let out = samples_to_events(&g, ObjectId(1), &s).unwrap();
        assert_eq!(out.dropped, 1);
        assert_eq!(out.events.len(), 1);
    }

    #[test]
    fn sample_rows_from_samples() {
        // C2 sits left of C1; O1 reports at 3 in C2 and at 4, 5 further right.
        let g = GridSpec::square(30.0, 3, 1).unwrap();
        let s = [Sample { t: 3, x: 15.0, y: 1.0 }, Sample { t: 4, x: 25.0, y: 1.0 }, Sample { t: 5, x: 5.0, y: 1.0 }];
        let out = samples_to_events(&g, ObjectId(1), &s).unwrap();
        let c2 = CellId::new(1, 0);
        let c1 = CellId::new(2, 0);
        let in_cell = |c| out.events.iter().filter(move |e| e.cell == c).map(|e| (e.event.object, e.event.t)).collect::<Vec<_>>();
        assert_eq!(in_cell(c2), vec![(ObjectId(1), 3), (ObjectId(1), 4)]);
        assert_eq!(in_cell(c1), vec![(ObjectId(1), 4), (ObjectId(1), 5)]);
    }

    #[test]
    fn route_rejects_bad_alternation() {
        let c = CellId::new(0, 0);
        let evs = [RoutedEvent { cell: c, event: CellEvent::enter(1, 1) }, RoutedEvent { cell: c, event: CellEvent::enter(1, 2) }];
        let err = route(&evs, |_, _| Ok(())).unwrap_err();
        assert!(matches!(err, Error::Alternation { .. }));
        let evs = [RoutedEvent { cell: c, event: CellEvent::exit(1, 1) }];
        assert!(route(&evs, |_, _| Ok(())).is_err());
        assert!(route(&[], |_, _| Ok(())).is_ok());
    }

    proptest::proptest! {
        #[test]
        fn partition_is_total(x in 0.0f64..1000.0, y in 0.0f64..1000.0) {
            let g = grid();
            let c = g.locate(x, y).unwrap();
            let (w, h) = (100.0, 100.0);
            proptest::prop_assert!(c.col as f64 * w <= x && x < (c.col + 1) as f64 * w);
            proptest::prop_assert!(c.row as f64 * h <= y && y < (c.row + 1) as f64 * h);
        }
    }
}
