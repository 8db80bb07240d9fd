//! Index-free ground truth computed straight from an event log.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::backend::spans_from_events;
use crate::engine::{QueryVariant, StpQuery};
use crate::error::Result;
use crate::grid::AlternationGuard;
use crate::types::{CellId, EventKind, ObjectId, RoutedEvent, TemporalConstraint, Timestamp};

/// Every object's membership spans per cell, rebuilt by one pass over the log.
#[derive(Debug, Clone, Default)]
pub struct Memberships {
    spans: BTreeMap<CellId, BTreeMap<ObjectId, Vec<(Timestamp, Timestamp)>>>,
}

impl Memberships {
    /// The log must be in replay order.
    pub fn from_log(log: &[RoutedEvent]) -> Result<Self> {
        let mut guard = AlternationGuard::default();
        let mut events: HashMap<(CellId, ObjectId), Vec<(Timestamp, EventKind)>> = HashMap::new();
        for ev in log {
            guard.check(ev)?;
            events.entry((ev.cell, ev.event.object)).or_default().push((ev.event.t, ev.event.kind));
        }
        let mut spans: BTreeMap<CellId, BTreeMap<ObjectId, Vec<(Timestamp, Timestamp)>>> = BTreeMap::new();
        for ((cell, object), evs) in events {
            spans.entry(cell).or_default().insert(object, spans_from_events(evs));
        }
        Ok(Memberships { spans })
    }

    pub fn spans(&self, cell: CellId, object: ObjectId) -> &[(Timestamp, Timestamp)] {
        self.spans.get(&cell).and_then(|m| m.get(&object)).map_or(&[], |v| v.as_slice())
    }

    pub fn satisfies(&self, object: ObjectId, cell: CellId, c: TemporalConstraint) -> bool {
        self.spans(cell, object).iter().any(|&(s, e)| c.meets(s, e))
    }

    /// F(cell, c), sorted.
    pub fn predicate(&self, cell: CellId, c: TemporalConstraint) -> Vec<ObjectId> {
        let Some(m) = self.spans.get(&cell) else { return Vec::new() };
        m.iter().filter(|(_, v)| v.iter().any(|&(s, e)| c.meets(s, e))).map(|(o, _)| *o).collect()
    }

    /// Objects that were ever in `cell`, sorted.
    pub fn population(&self, cell: CellId) -> Vec<ObjectId> {
        self.spans.get(&cell).map_or_else(Vec::new, |m| m.keys().copied().collect())
    }

    pub fn cells(&self) -> impl Iterator<Item = CellId> + '_ {
        self.spans.keys().copied()
    }

    fn visits_in_order(&self, object: ObjectId, cells: &[CellId], after: Option<Timestamp>) -> bool {
        let Some((&first, rest)) = cells.split_first() else { return true };
        self.spans(first, object)
            .iter()
            .filter(|&&(s, _)| after.is_none_or(|a| s > a))
            .any(|&(s, _)| self.visits_in_order(object, rest, Some(s)))
    }

    pub fn eval(&self, query: &StpQuery) -> Vec<ObjectId> {
        let preds = query.predicates();
        let first = self.population(preds[0].cell);
        match query.variant() {
            QueryVariant::WithTime => first
                .into_iter()
                .filter(|&o| preds.iter().all(|p| self.satisfies(o, p.cell, p.constraint.expect("time query"))))
                .collect(),
            QueryVariant::WithOrder => {
                let cells: Vec<CellId> = query.cells().collect();
                first.into_iter().filter(|&o| self.visits_in_order(o, &cells, None)).collect()
            }
        }
    }
}

/// Answer `query` directly from a replay-ordered log.
pub fn oracle_eval(query: &StpQuery, log: &[RoutedEvent]) -> Result<Vec<ObjectId>> {
    Ok(Memberships::from_log(log)?.eval(query))
}

/// A second ground truth for small logs: materialize the member set of every
/// cell at every instant and answer with unions and intersections of sets.
pub fn set_algebra_eval(query: &StpQuery, log: &[RoutedEvent]) -> Result<Vec<ObjectId>> {
    let mut guard = AlternationGuard::default();
    log.iter().try_for_each(|e| guard.check(e))?;
    let horizon = log.iter().map(|e| e.event.t).max().unwrap_or(0);
    let mut inside: BTreeMap<CellId, BTreeSet<ObjectId>> = BTreeMap::new();
    let mut at: Vec<BTreeMap<CellId, BTreeSet<ObjectId>>> = Vec::new();
    let mut pos = 0;
    for t in 0..=horizon {
        while let Some(e) = log.get(pos).filter(|e| e.event.t == t) {
            let set = inside.entry(e.cell).or_default();
            match e.event.kind {
                EventKind::Enter => set.insert(e.event.object),
                EventKind::Exit => set.remove(&e.event.object),
            };
            pos += 1;
        }
        at.push(inside.clone());
    }
    let members = |cell: CellId, t: Timestamp| -> BTreeSet<ObjectId> {
        let t = t.min(horizon) as usize;
        at[t].get(&cell).cloned().unwrap_or_default()
    };
    let answer: BTreeSet<ObjectId> = match query.variant() {
        QueryVariant::WithTime => {
            let mut acc: Option<BTreeSet<ObjectId>> = None;
            for p in query.predicates() {
                let (t1, t2) = p.constraint.expect("time query").bounds();
                let f: BTreeSet<ObjectId> = (t1..=t2.min(horizon.max(t1))).flat_map(|t| members(p.cell, t)).collect();
                acc = Some(match acc {
                    None => f,
                    Some(a) => a.intersection(&f).copied().collect(),
                });
            }
            acc.unwrap_or_default()
        }
        QueryVariant::WithOrder => {
            let enters: BTreeSet<(CellId, ObjectId, Timestamp)> = log
                .iter()
                .filter(|e| e.event.kind == EventKind::Enter)
                .map(|e| (e.cell, e.event.object, e.event.t))
                .collect();
            let cells: Vec<CellId> = query.cells().collect();
            // Objects able to reach predicate i at time t, built forward one predicate at a time.
            let mut reach: BTreeSet<(ObjectId, Timestamp)> =
                enters.iter().filter(|(c, _, _)| *c == cells[0]).map(|&(_, o, t)| (o, t)).collect();
            for &cell in &cells[1..] {
                reach = enters
                    .iter()
                    .filter(|(c, o, t)| *c == cell && reach.iter().any(|(ro, rt)| ro == o && rt < t))
                    .map(|&(_, o, t)| (o, t))
                    .collect();
            }
            reach.into_iter().map(|(o, _)| o).collect()
        }
    };
    Ok(answer.into_iter().collect())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::fixtures;
    use crate::grid::sort_for_replay;
    use crate::types::CellEvent;
    use proptest::prelude::*;

    #[test]
    fn section3_query() {
        let q = fixtures::sample_query();
        assert_eq!(oracle_eval(&q, &fixtures::sample_log()).unwrap(), vec![ObjectId(2)]);
        assert_eq!(set_algebra_eval(&q, &fixtures::sample_log()).unwrap(), vec![ObjectId(2)]);
    }

    #[test]
    fn empty_log() {
        let q = fixtures::sample_query();
        assert!(oracle_eval(&q, &[]).unwrap().is_empty());
        assert!(set_algebra_eval(&q, &[]).unwrap().is_empty());
    }

    #[test]
    fn malformed_log_is_a_data_error() {
        let c = CellId::new(0, 0);
        let log = [RoutedEvent { cell: c, event: CellEvent::exit(1, 1) }];
        let err = oracle_eval(&fixtures::sample_query(), &log).unwrap_err();
        assert!(err.is_data_error());
    }

    #[test]
    fn sample_order_queries() {
        let log = fixtures::sample_log();
        let q = StpQuery::with_order([fixtures::C3, fixtures::C2]).unwrap();
        assert_eq!(oracle_eval(&q, &log).unwrap(), vec![ObjectId(2), ObjectId(3)]);
        let q = StpQuery::with_order([fixtures::C2, fixtures::C3, fixtures::C2]).unwrap();
        assert_eq!(oracle_eval(&q, &log).unwrap(), vec![ObjectId(2)]);
        assert_eq!(set_algebra_eval(&q, &log).unwrap(), vec![ObjectId(2)]);
    }

    /// Random walks of a few objects over a 3x1 grid.
    pub(crate) fn tiny_log() -> impl Strategy<Value = Vec<RoutedEvent>> {
        proptest::collection::vec(proptest::collection::vec((0u32..4, 1u64..3), 1..12), 1..5).prop_map(|objects| {
            let mut log = Vec::new();
            for (o, steps) in objects.into_iter().enumerate() {
                let mut t = 0;
                let mut cur: Option<u32> = None;
                for (col, dt) in steps {
                    t += dt;
                    let next = (col < 3).then_some(col);
                    if next == cur {
                        continue;
                    }
                    if let Some(c) = cur {
                        log.push(RoutedEvent { cell: CellId::new(c, 0), event: CellEvent::exit(o as u64, t) });
                    }
                    if let Some(c) = next {
                        log.push(RoutedEvent { cell: CellId::new(c, 0), event: CellEvent::enter(o as u64, t) });
                    }
                    cur = next;
                }
            }
            sort_for_replay(&mut log);
            log
        })
    }

    fn constraint() -> impl Strategy<Value = TemporalConstraint> {
        prop_oneof![
            (0u64..30).prop_map(TemporalConstraint::Instant),
            (0u64..30, 0u64..6).prop_map(|(a, l)| TemporalConstraint::Interval(a, a + l)),
        ]
    }

    proptest! {
        #[test]
        fn two_oracles_agree_on_time_queries(log in tiny_log(), preds in proptest::collection::vec((0u32..3, constraint()), 1..4)) {
            let q = StpQuery::with_time(preds.into_iter().map(|(c, tc)| (CellId::new(c, 0), tc))).unwrap();
            prop_assert_eq!(oracle_eval(&q, &log).unwrap(), set_algebra_eval(&q, &log).unwrap());
        }

        #[test]
        fn two_oracles_agree_on_order_queries(log in tiny_log(), cells in proptest::collection::vec(0u32..3, 1..4)) {
            let q = StpQuery::with_order(cells.into_iter().map(|c| CellId::new(c, 0))).unwrap();
            prop_assert_eq!(oracle_eval(&q, &log).unwrap(), set_algebra_eval(&q, &log).unwrap());
        }
    }
}
