//! Workload replay across backends, producing per-query cost rows, per
//! predicate rows and a space summary, plus a gnuplot script for the plots.

use std::io::Write;

use crate::backend::BackendKind;
use crate::config::Config;
use crate::datagen::{generate_queries, generate_trajectories, EventLog};
use crate::engine::{CellIndex, SpatialIndex, StpQuery};
use crate::error::Result;
use crate::oracle::Memberships;
use crate::types::{CellId, TemporalConstraint};

pub const BENCH_HEADER: &str = "backend,query_id,output_size,reads,writes,pages_total";
pub const SPACE_HEADER: &str = "backend,pages_total,structure_a_pages,structure_b_pages,events,build_writes";
pub const PREDICATE_HEADER: &str =
    "backend,query_id,pred_index,cell_col,cell_row,constraint,output_size,reads,cell_pages,cell_population,height";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchRow {
    pub backend: BackendKind,
    pub query_id: usize,
    pub output_size: usize,
    pub reads: u64,
    pub writes: u64,
    pub pages_total: u64,
}

/// One predicate of one query evaluated in full on its own.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateRow {
    pub backend: BackendKind,
    pub query_id: usize,
    pub pred_index: usize,
    pub cell: CellId,
    pub constraint: TemporalConstraint,
    pub output_size: usize,
    pub reads: u64,
    /// Pages held by the cell's index.
    pub cell_pages: u64,
    /// Objects that were ever in the cell.
    pub cell_population: usize,
    /// Tallest tree version within the constraint; 0 off the advanced backend.
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpaceRow {
    pub backend: BackendKind,
    pub pages_total: u64,
    pub structure_a_pages: u64,
    pub structure_b_pages: u64,
    pub events: usize,
    pub build_writes: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub predicates: Vec<PredicateRow>,
    pub space: Vec<SpaceRow>,
}

impl BenchReport {
    pub fn rows_for(&self, backend: BackendKind) -> impl Iterator<Item = &BenchRow> {
        self.rows.iter().filter(move |r| r.backend == backend)
    }

    pub fn predicates_for(&self, backend: BackendKind) -> impl Iterator<Item = &PredicateRow> {
        self.predicates.iter().filter(move |r| r.backend == backend)
    }

    pub fn space_for(&self, backend: BackendKind) -> Option<&SpaceRow> {
        self.space.iter().find(|r| r.backend == backend)
    }
}

/// Build one backend over `log` and run every query of `workload` on it.
pub fn run_backend(cfg: &Config, backend: BackendKind, log: &EventLog, workload: &[StpQuery], m: &Memberships) -> Result<BenchReport> {
    let mut idx = SpatialIndex::build(cfg.index_settings(backend)?, cfg.gen.width_cells, cfg.gen.height_cells, &log.events)?;
    idx.set_seed_policy(cfg.seed_policy);
    let space = idx.space();
    let build = idx.total_io();
    let mut out = BenchReport::default();
    out.space.push(SpaceRow {
        backend,
        pages_total: space.pages_total,
        structure_a_pages: space.structure_a_pages,
        structure_b_pages: space.structure_b_pages,
        events: idx.event_count(),
        build_writes: build.writes,
    });
    for (qid, q) in workload.iter().enumerate() {
        let ans = idx.eval(q)?;
        out.rows.push(BenchRow {
            backend,
            query_id: qid,
            output_size: ans.objects.len(),
            reads: ans.io.reads,
            writes: ans.io.writes,
            pages_total: space.pages_total,
        });
        for (pi, p) in q.predicates().iter().enumerate() {
            let Some(c) = p.constraint else { continue };
            let r = idx.eval_predicate(p.cell, c)?;
            let cell_pages = idx.cell(p.cell)?.map_or(0, |ci: &CellIndex| ci.backend().page_count() as u64);
            out.predicates.push(PredicateRow {
                backend,
                query_id: qid,
                pred_index: pi,
                cell: p.cell,
                constraint: c,
                output_size: r.objects.len(),
                reads: r.io.reads,
                cell_pages,
                cell_population: m.population(p.cell).len(),
                height: idx.height_within(p.cell, c),
            });
        }
    }
    Ok(out)
}

/// Run a fixed log and workload through each backend.
pub fn run_bench_on(cfg: &Config, log: &EventLog, workload: &[StpQuery], backends: &[BackendKind]) -> Result<BenchReport> {
    let m = Memberships::from_log(&log.events)?;
    let mut report = BenchReport::default();
    for &b in backends {
        let r = run_backend(cfg, b, log, workload, &m)?;
        report.rows.extend(r.rows);
        report.predicates.extend(r.predicates);
        report.space.extend(r.space);
    }
    report.rows.sort_by_key(|r| (r.output_size, r.backend, r.query_id));
    Ok(report)
}

/// Generate the configured workload and run it through each backend.
pub fn run_bench(cfg: &Config, backends: &[BackendKind]) -> Result<(EventLog, Vec<StpQuery>, BenchReport)> {
    let log = generate_trajectories(&cfg.gen)?;
    let workload = generate_queries(&cfg.gen, &log)?.queries;
    let report = run_bench_on(cfg, &log, &workload, backends)?;
    Ok((log, workload, report))
}

fn build_info(mut w: impl Write) -> Result<()> {
    writeln!(w, "# stpindex {}", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

pub fn write_bench_csv(mut w: impl Write, rows: &[BenchRow]) -> Result<()> {
    build_info(&mut w)?;
    writeln!(w, "{BENCH_HEADER}")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{},{}", r.backend, r.query_id, r.output_size, r.reads, r.writes, r.pages_total)?;
    }
    Ok(())
}

pub fn write_space_csv(mut w: impl Write, rows: &[SpaceRow]) -> Result<()> {
    build_info(&mut w)?;
    writeln!(w, "{SPACE_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.backend, r.pages_total, r.structure_a_pages, r.structure_b_pages, r.events, r.build_writes
        )?;
    }
    Ok(())
}

pub fn write_predicates_csv(mut w: impl Write, rows: &[PredicateRow]) -> Result<()> {
    build_info(&mut w)?;
    writeln!(w, "{PREDICATE_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.backend,
            r.query_id,
            r.pred_index,
            r.cell.col,
            r.cell.row,
            r.constraint,
            r.output_size,
            r.reads,
            r.cell_pages,
            r.cell_population,
            r.height
        )?;
    }
    Ok(())
}

/// Gnuplot script reading `bench.csv` and `space.csv` from its own directory.
pub fn plot_script() -> String {
    let mut s = String::new();
    s.push_str("# gnuplot plot.gp\n");
    s.push_str("set datafile separator ','\n");
    s.push_str("set terminal pngcairo size 900,600\n");
    s.push_str("set key left top\n\n");
    s.push_str("set output 'io_vs_output.png'\n");
    s.push_str("set xlabel 'output size'\nset ylabel 'page reads'\nset logscale y\n");
    let series: Vec<String> = BackendKind::ALL
        .iter()
        .map(|b| format!("'bench.csv' using ($1 eq '{b}' ? $3 : 1/0):4 skip 2 with points title '{b}'"))
        .collect();
    s.push_str(&format!("plot {}\n\n", series.join(", \\\n     ")));
    s.push_str("unset logscale y\n");
    s.push_str("set output 'space.png'\n");
    s.push_str("set style data histograms\nset style fill solid 0.6\nset boxwidth 0.8\n");
    s.push_str("set xlabel 'backend'\nset ylabel 'pages'\n");
    s.push_str("plot 'space.csv' skip 2 using 2:xtic(1) title 'pages total', '' skip 2 using 3 title 'structure A'\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Config {
        let mut c = Config::default();
        c.gen.num_objects = 150;
        c.gen.width_cells = 6;
        c.gen.height_cells = 6;
        c.gen.duration = 40;
        c.gen.query_count = 12;
        c.gen.predicates_per_query_max = 3;
        c
    }

    #[test]
    fn shape_and_sorting() {
        let (_, w, r) = run_bench(&tiny(), &BackendKind::ALL).unwrap();
        assert_eq!(r.rows.len(), 3 * w.len());
        assert!(r.rows.windows(2).all(|p| p[0].output_size <= p[1].output_size));
        assert_eq!(r.space.len(), 3);
        for b in BackendKind::ALL {
            let sizes: Vec<_> = {
                let mut v: Vec<_> = r.rows_for(b).map(|x| (x.query_id, x.output_size)).collect();
                v.sort();
                v
            };
            let adv: Vec<_> = {
                let mut v: Vec<_> = r.rows_for(BackendKind::Advanced).map(|x| (x.query_id, x.output_size)).collect();
                v.sort();
                v
            };
            assert_eq!(sizes, adv, "{b}");
        }
    }

    #[test]
    fn csv_is_deterministic() {
        let render = || {
            let (_, _, r) = run_bench(&tiny(), &BackendKind::ALL).unwrap();
            let mut a = Vec::new();
            write_bench_csv(&mut a, &r.rows).unwrap();
            write_space_csv(&mut a, &r.space).unwrap();
            write_predicates_csv(&mut a, &r.predicates).unwrap();
            a
        };
        assert_eq!(render(), render());
    }

    #[test]
    fn list_reads_are_whole_lists() {
        let (_, _, r) = run_bench(&tiny(), &[BackendKind::List]).unwrap();
        assert!(r.predicates.iter().all(|p| p.reads == p.cell_pages));
    }

    #[test]
    fn plot_mentions_every_backend() {
        let s = plot_script();
        for b in BackendKind::ALL {
            assert!(s.contains(&format!("'{b}'")));
        }
    }
}
