use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stpindex::backend::BackendKind;
use stpindex::bench::{plot_script, run_bench_on, write_bench_csv, write_predicates_csv, write_space_csv};
use stpindex::config::Config;
use stpindex::datagen::{for_each_trajectory, generate_queries, generate_trajectories, EventLog};
use stpindex::engine::SpatialIndex;
use stpindex::formats::{format_result, read_events, read_queries, write_events, write_queries, write_trajectory, write_trajectory_header};
use stpindex::grid::AlternationGuard;
use stpindex::types::RoutedEvent;
use stpindex::Error;

#[derive(Parser, Debug)]
#[command(name = "stpindex", version, about = "Spatiotemporal pattern queries over a grid of per-cell indexes")]
struct Cli {
    /// Flat key = value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true, default_value = "advanced")]
    backend: BackendKind,

    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic event log and query workload.
    Generate {
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Also write the raw trajectory samples.
        #[arg(long)]
        trajectories: bool,
    },
    /// Replay an event log into the chosen backend and report its size.
    Build {
        #[arg(long)]
        log: PathBuf,
    },
    /// Answer a query file against an event log.
    Query {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        queries: PathBuf,
    },
    /// Generate, build and query under every backend; write CSVs and a plot script.
    Bench {
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Comma-separated subset of backends.
        #[arg(long, value_delimiter = ',', default_value = "list,primitive,advanced")]
        backends: Vec<BackendKind>,
    },
}

struct Failure {
    err: Error,
    line: Option<usize>,
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Failure { err, line: None }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

type Outcome = Result<(), Failure>;

fn open(path: &Path) -> Result<BufReader<File>, Error> {
    File::open(path).map(BufReader::new).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn load_config(cli: &Cli) -> Result<Config, Error> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg.gen.seed = s;
    }
    Ok(cfg)
}

/// Replay file-ordered events, attributing failures to their file line.
fn build_index(cfg: &Config, backend: BackendKind, events: &[RoutedEvent]) -> Result<SpatialIndex, Failure> {
    let mut idx = SpatialIndex::new(cfg.index_settings(backend)?, cfg.gen.width_cells, cfg.gen.height_cells)?;
    idx.set_seed_policy(cfg.seed_policy);
    let mut guard = AlternationGuard::default();
    for (i, ev) in events.iter().enumerate() {
        let at_line = |err| Failure { err, line: Some(i + 2) };
        guard.check(ev).map_err(at_line)?;
        idx.apply(ev.cell, &ev.event).map_err(at_line)?;
    }
    idx.finish()?;
    Ok(idx)
}

fn cmd_generate(cfg: &Config, out_dir: &Path, trajectories: bool) -> Outcome {
    std::fs::create_dir_all(out_dir)?;
    let log = generate_trajectories(&cfg.gen)?;
    let workload = generate_queries(&cfg.gen, &log)?;
    let mut w = create(&out_dir.join("events.csv"))?;
    write_events(&mut w, &log.events)?;
    w.flush()?;
    let mut w = create(&out_dir.join("queries.txt"))?;
    write_queries(&mut w, &workload.queries)?;
    w.flush()?;
    if trajectories {
        let mut w = create(&out_dir.join("trajectories.csv"))?;
        write_trajectory_header(&mut w)?;
        for_each_trajectory(&cfg.gen, |o, s| write_trajectory(&mut w, o, s))?;
        w.flush()?;
    }
    println!(
        "objects={} events={} cells_touched={} dropped_samples={} queries={} off_target={}",
        log.objects,
        log.events.len(),
        log.cells_touched(),
        log.dropped_samples,
        workload.queries.len(),
        workload.misses
    );
    Ok(())
}

fn cmd_build(cfg: &Config, backend: BackendKind, log: &Path) -> Outcome {
    let events = read_events(open(log)?)?;
    let idx = build_index(cfg, backend, &events)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "cell_col,cell_row,pages,writes")?;
    for (cell, ci) in idx.cells() {
        let b = ci.backend();
        writeln!(out, "{},{},{},{}", cell.col, cell.row, b.page_count(), b.io().writes)?;
    }
    let space = idx.space();
    let io = idx.total_io();
    write!(out, "# backend={backend} events={} cells={} pages_total={} writes={}", events.len(), space.cells, space.pages_total, io.writes)?;
    if backend == BackendKind::Primitive {
        write!(out, " structure_a_pages={} structure_b_pages={}", space.structure_a_pages, space.structure_b_pages)?;
    }
    writeln!(out)?;
    Ok(())
}

fn cmd_query(cfg: &Config, backend: BackendKind, log: &Path, queries: &Path) -> Outcome {
    let queries = read_queries(open(queries)?)?;
    let events = read_events(open(log)?)?;
    let idx = build_index(cfg, backend, &events)?;
    let mut out = std::io::stdout().lock();
    for q in &queries {
        let ans = idx.eval(q)?;
        writeln!(out, "{}", format_result(&ans.objects, ans.io.reads))?;
    }
    Ok(())
}

fn cmd_bench(cfg: &Config, out_dir: &Path, backends: &[BackendKind]) -> Outcome {
    std::fs::create_dir_all(out_dir)?;
    let log: EventLog = generate_trajectories(&cfg.gen)?;
    let workload = generate_queries(&cfg.gen, &log)?.queries;
    let report = run_bench_on(cfg, &log, &workload, backends)?;
    let mut w = create(&out_dir.join("bench.csv"))?;
    write_bench_csv(&mut w, &report.rows)?;
    w.flush()?;
    let mut w = create(&out_dir.join("space.csv"))?;
    write_space_csv(&mut w, &report.space)?;
    w.flush()?;
    let mut w = create(&out_dir.join("predicates.csv"))?;
    write_predicates_csv(&mut w, &report.predicates)?;
    w.flush()?;
    std::fs::write(out_dir.join("plot.gp"), plot_script())?;
    for s in &report.space {
        let rows: Vec<_> = report.rows_for(s.backend).collect();
        let mean = rows.iter().map(|r| r.reads).sum::<u64>() as f64 / rows.len().max(1) as f64;
        println!("{}: pages_total={} mean_reads={mean:.2} queries={}", s.backend, s.pages_total, rows.len());
    }
    Ok(())
}

fn run(cli: &Cli) -> Outcome {
    let cfg = load_config(cli)?;
    match &cli.cmd {
        Command::Generate { out_dir, trajectories } => cmd_generate(&cfg, out_dir, *trajectories),
        Command::Build { log } => cmd_build(&cfg, cli.backend, log),
        Command::Query { log, queries } => cmd_query(&cfg, cli.backend, log, queries),
        Command::Bench { out_dir, backends } => cmd_bench(&cfg, out_dir, backends),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match f.line {
                Some(n) => eprintln!("error: line {n}: {}", f.err),
                None => eprintln!("error: {}", f.err),
            }
            ExitCode::from(if f.err.is_data_error() { 2 } else { 1 })
        }
    }
}
