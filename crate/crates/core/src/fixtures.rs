//! The three-cell, three-object example used throughout the documentation:
//! cells C1..C3 in a 3x1 grid and objects O1..O3 crossing them.

use crate::engine::StpQuery;
use crate::grid::sort_for_replay;
use crate::types::{CellEvent, CellId, RoutedEvent, TemporalConstraint};

pub const SAMPLE_COLS: u32 = 3;
pub const SAMPLE_ROWS: u32 = 1;
pub const C1: CellId = CellId::new(0, 0);
pub const C2: CellId = CellId::new(1, 0);
pub const C3: CellId = CellId::new(2, 0);

/// `(cell, object, enter, exit)` membership spans.
const SPANS: [(CellId, u64, u64, u64); 8] = [
    (C1, 1, 4, 5),
    (C1, 2, 7, 8),
    (C2, 1, 3, 4),
    (C2, 2, 8, 9),
    (C2, 2, 10, 11),
    (C2, 3, 3, 4),
    (C3, 2, 3, 4),
    (C3, 2, 9, 10),
];

/// Enter and exit events of every object, in replay order.
pub fn sample_log() -> Vec<RoutedEvent> {
    let mut log: Vec<RoutedEvent> = SPANS
        .iter()
        .flat_map(|&(cell, o, s, e)| {
            [
                RoutedEvent { cell, event: CellEvent::enter(o, s) },
                RoutedEvent { cell, event: CellEvent::exit(o, e) },
            ]
        })
        .collect();
    log.push(RoutedEvent { cell: C3, event: CellEvent::enter(3, 2) });
    log.push(RoutedEvent { cell: C3, event: CellEvent::exit(3, 3) });
    sort_for_replay(&mut log);
    log
}

/// `{(C2, [6,8]), (C1, 7), (C3, 9)}`, answered by O2 alone.
pub fn sample_query() -> StpQuery {
    StpQuery::with_time([
        (C2, TemporalConstraint::Interval(6, 8)),
        (C1, TemporalConstraint::Instant(7)),
        (C3, TemporalConstraint::Instant(9)),
    ])
    .expect("well-formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::EventKind;

    #[test]
    fn enter_lists_per_cell() {
        let log = sample_log();
        let enters = |c: CellId| {
            let mut v: Vec<(u64, u64)> = log
                .iter()
                .filter(|e| e.cell == c && e.event.kind == EventKind::Enter)
                .map(|e| (e.event.object.0, e.event.t))
                .collect();
            v.sort();
            v
        };
        assert_eq!(enters(C1), vec![(1, 4), (2, 7)]);
        assert_eq!(enters(C2), vec![(1, 3), (2, 8), (2, 10), (3, 3)]);
        assert_eq!(enters(C3), vec![(2, 3), (2, 9), (3, 2)]);
    }

    #[test]
    fn routes_cleanly() {
        crate::grid::route(&sample_log(), |_, _| Ok(())).unwrap();
    }
}
