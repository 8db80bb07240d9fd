//! Query evaluation over a grid of per-cell indexes.

use std::collections::BTreeMap;
use std::fmt;

use crate::backend::{BackendKind, CellBackend};
use crate::baselines::list::ordered_visit;
use crate::baselines::{list_eval_order, ListIndex, PrimitiveIndex};
use crate::error::{Error, Result};
use crate::grid::route;
use crate::mvindex::{MvConfig, MvIndex};
use crate::pagestore::{IoStats, StoreConfig};
use crate::types::{CellEvent, CellId, ObjectId, RoutedEvent, TemporalConstraint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Predicate {
    pub cell: CellId,
    pub constraint: Option<TemporalConstraint>,
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.constraint {
            Some(c) => write!(f, "{}@{}", self.cell, c),
            None => write!(f, "{}", self.cell),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QueryVariant {
    WithTime,
    WithOrder,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StpQuery {
    variant: QueryVariant,
    predicates: Vec<Predicate>,
}

impl StpQuery {
    pub fn with_time(preds: impl IntoIterator<Item = (CellId, TemporalConstraint)>) -> Result<Self> {
        let predicates: Vec<Predicate> = preds
            .into_iter()
            .map(|(cell, c)| Predicate { cell, constraint: Some(c) })
            .collect();
        Self::checked(QueryVariant::WithTime, predicates)
    }

    pub fn with_order(cells: impl IntoIterator<Item = CellId>) -> Result<Self> {
        let predicates = cells.into_iter().map(|cell| Predicate { cell, constraint: None }).collect();
        Self::checked(QueryVariant::WithOrder, predicates)
    }

    fn checked(variant: QueryVariant, predicates: Vec<Predicate>) -> Result<Self> {
        if predicates.is_empty() {
            return Err(Error::Argument("a query needs at least one predicate".into()));
        }
        for p in &predicates {
            if let Some(TemporalConstraint::Interval(a, b)) = p.constraint {
                TemporalConstraint::interval(a, b)?;
            }
        }
        Ok(StpQuery { variant, predicates })
    }

    pub fn variant(&self) -> QueryVariant {
        self.variant
    }

    pub fn predicates(&self) -> &[Predicate] {
        &self.predicates
    }

    /// Time constraint of predicate `i`; only meaningful for time queries.
    pub fn constraint(&self, i: usize) -> TemporalConstraint {
        self.predicates[i].constraint.expect("time query predicates carry a constraint")
    }

    pub fn cells(&self) -> impl Iterator<Item = CellId> + '_ {
        self.predicates.iter().map(|p| p.cell)
    }
}

impl fmt::Display for StpQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.variant {
            QueryVariant::WithTime => "TIME",
            QueryVariant::WithOrder => "ORDER",
        };
        write!(f, "{tag} ")?;
        for (i, p) in self.predicates.iter().enumerate() {
            if i > 0 {
                f.write_str(" ; ")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

/// F(P) together with what computing it cost.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PredicateResult {
    pub objects: Vec<ObjectId>,
    pub io: IoStats,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct QueryAnswer {
    pub objects: Vec<ObjectId>,
    pub io: IoStats,
    /// Index of the predicate evaluated in full; `None` for order queries.
    pub seed: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeedPolicy {
    /// Always predicate 0.
    #[default]
    First,
    /// Predicate whose cell currently holds the fewest objects.
    SmallestCell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexSettings {
    pub backend: BackendKind,
    pub store: StoreConfig,
    pub mv: MvConfig,
    pub primitive_cap: Option<usize>,
}

impl IndexSettings {
    pub fn new(backend: BackendKind) -> Self {
        IndexSettings {
            backend,
            store: StoreConfig::default(),
            mv: MvConfig::default(),
            primitive_cap: None,
        }
    }
}

#[derive(Debug)]
pub enum CellIndex {
    List(ListIndex),
    Primitive(PrimitiveIndex),
    Advanced(MvIndex),
}

impl CellIndex {
    fn new(settings: &IndexSettings) -> Result<Self> {
        Ok(match settings.backend {
            BackendKind::List => CellIndex::List(ListIndex::new(settings.store)),
            BackendKind::Primitive => CellIndex::Primitive(PrimitiveIndex::new(settings.store, None)),
            BackendKind::Advanced => CellIndex::Advanced(MvIndex::new(settings.mv)?),
        })
    }

    pub fn backend(&self) -> &dyn CellBackend {
        match self {
            CellIndex::List(l) => l,
            CellIndex::Primitive(p) => p,
            CellIndex::Advanced(m) => m,
        }
    }

    fn backend_mut(&mut self) -> &mut dyn CellBackend {
        match self {
            CellIndex::List(l) => l,
            CellIndex::Primitive(p) => p,
            CellIndex::Advanced(m) => m,
        }
    }
}

/// Space used by one index, in pages.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SpaceReport {
    pub pages_total: u64,
    pub cells: u64,
    /// Primitive backend only.
    pub structure_a_pages: u64,
    pub structure_b_pages: u64,
}

/// Every cell of a grid, each backed by an index of the configured kind.
/// Cells that never saw an event hold no index and answer empty.
#[derive(Debug)]
pub struct SpatialIndex {
    settings: IndexSettings,
    width_cells: u32,
    height_cells: u32,
    cells: BTreeMap<CellId, CellIndex>,
    seed_policy: SeedPolicy,
    events: usize,
}

impl SpatialIndex {
    pub fn new(settings: IndexSettings, width_cells: u32, height_cells: u32) -> Result<Self> {
        settings.store.validate()?;
        if settings.backend == BackendKind::Advanced {
            settings.mv.validate()?;
        }
        Ok(SpatialIndex {
            settings,
            width_cells,
            height_cells,
            cells: BTreeMap::new(),
            seed_policy: SeedPolicy::First,
            events: 0,
        })
    }

    /// Route a replay-ordered log into a fresh index and finalize it.
    pub fn build(settings: IndexSettings, width_cells: u32, height_cells: u32, log: &[RoutedEvent]) -> Result<Self> {
        let mut idx = SpatialIndex::new(settings, width_cells, height_cells)?;
        route(log, |cell, ev| idx.apply(cell, ev))?;
        idx.finish()?;
        Ok(idx)
    }

    pub fn event_count(&self) -> usize {
        self.events
    }

    pub fn settings(&self) -> &IndexSettings {
        &self.settings
    }

    pub fn set_seed_policy(&mut self, policy: SeedPolicy) {
        self.seed_policy = policy;
    }

    fn check_cell(&self, cell: CellId) -> Result<()> {
        if cell.col >= self.width_cells || cell.row >= self.height_cells {
            return Err(Error::UnknownCell(cell));
        }
        Ok(())
    }

    pub fn apply(&mut self, cell: CellId, ev: &CellEvent) -> Result<()> {
        self.check_cell(cell)?;
        if self.settings.backend == BackendKind::Primitive {
            if let Some(cap) = self.settings.primitive_cap.filter(|&cap| self.events >= cap) {
                return Err(Error::CapExceeded { cap });
            }
        }
        self.events += 1;
        let slot = match self.cells.entry(cell) {
            std::collections::btree_map::Entry::Occupied(o) => o.into_mut(),
            std::collections::btree_map::Entry::Vacant(v) => v.insert(CellIndex::new(&self.settings)?),
        };
        slot.backend_mut().apply(ev)
    }

    pub fn finish(&mut self) -> Result<()> {
        self.cells.values_mut().try_for_each(|c| c.backend_mut().finish())
    }

    pub fn cell(&self, cell: CellId) -> Result<Option<&CellIndex>> {
        self.check_cell(cell)?;
        Ok(self.cells.get(&cell))
    }

    pub fn cells(&self) -> impl Iterator<Item = (&CellId, &CellIndex)> {
        self.cells.iter()
    }

    pub fn space(&self) -> SpaceReport {
        let mut r = SpaceReport { cells: self.cells.len() as u64, ..SpaceReport::default() };
        for c in self.cells.values() {
            r.pages_total += c.backend().page_count() as u64;
            if let CellIndex::Primitive(p) = c {
                r.structure_a_pages += p.structure_a_pages() as u64;
                r.structure_b_pages += p.structure_b_pages() as u64;
            }
        }
        r
    }

    /// Writes and allocations accumulated since the last reset, all cells.
    pub fn total_io(&self) -> IoStats {
        self.cells.values().fold(IoStats::default(), |acc, c| acc + c.backend().io())
    }

    fn reset_cells(&self, cells: impl Iterator<Item = CellId>) {
        for c in cells {
            if let Some(idx) = self.cells.get(&c) {
                idx.backend().reset_io();
            }
        }
    }

    fn io_of(&self, cells: impl Iterator<Item = CellId>) -> IoStats {
        let mut seen = std::collections::BTreeSet::new();
        let mut io = IoStats::default();
        for c in cells {
            if seen.insert(c) {
                if let Some(idx) = self.cells.get(&c) {
                    let s = idx.backend().io();
                    io.reads += s.reads;
                    io.writes += s.writes;
                }
            }
        }
        io
    }

    /// F(cell, c) with its read cost.
    pub fn eval_predicate(&self, cell: CellId, c: TemporalConstraint) -> Result<PredicateResult> {
        let Some(idx) = self.cell(cell)? else { return Ok(PredicateResult::default()) };
        idx.backend().reset_io();
        let objects = idx.backend().eval_predicate(c)?;
        let s = idx.backend().io();
        Ok(PredicateResult { objects, io: IoStats { reads: s.reads, writes: s.writes, allocated_pages: 0 } })
    }

    pub fn choose_seed(&self, query: &StpQuery) -> usize {
        match self.seed_policy {
            SeedPolicy::First => 0,
            SeedPolicy::SmallestCell => {
                let size = |p: &Predicate| self.cells.get(&p.cell).map_or(0, |c| c.backend().live_count());
                let preds = query.predicates();
                (0..preds.len()).min_by_key(|&i| (size(&preds[i]), i)).unwrap_or(0)
            }
        }
    }

    pub fn eval(&self, query: &StpQuery) -> Result<QueryAnswer> {
        match query.variant() {
            QueryVariant::WithTime => self.eval_with_time(query),
            QueryVariant::WithOrder => self.eval_with_order(query),
        }
    }

    /// Evaluate the seed predicate in full, then filter its objects through
    /// every other predicate in turn.
    pub fn eval_with_time(&self, query: &StpQuery) -> Result<QueryAnswer> {
        if query.variant() != QueryVariant::WithTime {
            return Err(Error::Argument("expected a time query".into()));
        }
        query.cells().try_for_each(|c| self.check_cell(c))?;
        self.reset_cells(query.cells());
        let seed = self.choose_seed(query);
        let p = query.predicates()[seed];
        let mut v = match self.cells.get(&p.cell) {
            Some(idx) => idx.backend().eval_predicate(query.constraint(seed))?,
            None => Vec::new(),
        };
        for (i, p) in query.predicates().iter().enumerate() {
            if i == seed {
                continue;
            }
            if v.is_empty() {
                break;
            }
            v = match self.cells.get(&p.cell) {
                Some(idx) => idx.backend().verify_many(&v, query.constraint(i))?,
                None => Vec::new(),
            };
        }
        Ok(QueryAnswer { objects: v, io: self.io_of(query.cells()), seed: Some(seed) })
    }

    /// Objects entering the cells in the given order at strictly increasing times.
    pub fn eval_with_order(&self, query: &StpQuery) -> Result<QueryAnswer> {
        if query.variant() != QueryVariant::WithOrder {
            return Err(Error::Argument("expected an order query".into()));
        }
        query.cells().try_for_each(|c| self.check_cell(c))?;
        self.reset_cells(query.cells());
        let indexes: Option<Vec<&CellIndex>> = query.cells().map(|c| self.cells.get(&c)).collect();
        let Some(indexes) = indexes else {
            return Ok(QueryAnswer { objects: Vec::new(), io: IoStats::default(), seed: None });
        };
        let objects = if self.settings.backend == BackendKind::List {
            let lists: Vec<&ListIndex> = indexes
                .iter()
                .map(|c| match c {
                    CellIndex::List(l) => l,
                    _ => unreachable!("list backend holds list cells"),
                })
                .collect();
            list_eval_order(&lists)?
        } else {
            let mut out = Vec::new();
            'cand: for o in indexes[0].backend().members_ever()? {
                let mut per_cell = Vec::with_capacity(indexes.len());
                for idx in &indexes {
                    let times = idx.backend().enter_times(o)?;
                    if times.is_empty() {
                        continue 'cand;
                    }
                    per_cell.push(times);
                }
                if ordered_visit(&per_cell) {
                    out.push(o);
                }
            }
            out
        };
        Ok(QueryAnswer { objects, io: self.io_of(query.cells()), seed: None })
    }

    /// Height term of the read bound for a predicate on `cell`: the tallest
    /// version of the cell's tree alive within the constraint. Advanced only.
    pub fn height_within(&self, cell: CellId, c: TemporalConstraint) -> u32 {
        match self.cells.get(&cell) {
            Some(CellIndex::Advanced(m)) => {
                let (a, b) = c.bounds();
                m.max_height_between(a, b)
            }
            _ => 0,
        }
    }
}
