//! Running every (cell, seed) pair of a configuration.

use std::fs;
use std::path::{Path, PathBuf};

use probls::optimizer::{sgd_fixed_rate, sgd_with_line_search};
use rayon::prelude::*;

use crate::config::{Cell, ExperimentConfig, MethodKind};
use crate::error::{HarnessError, Result};
use crate::summary::{summarize_files, Summary};
use crate::trace::{write_atomic, TraceFile};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "PROBLS_OUT_DIR";
const FALLBACK_OUT_DIR: &str = "probls-out";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TRACE_DIR: &str = "traces";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses all cores.
    pub jobs: Option<usize>,
    /// Overrides the configured output directory.
    pub out_dir: Option<PathBuf>,
    pub seed_offset: u64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub traces: Vec<PathBuf>,
    pub summary_path: PathBuf,
    pub summary: Summary,
}

/// Flag, then config, then environment, then `probls-out`.
pub fn resolve_out_dir(config: &ExperimentConfig, flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| config.output.dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(FALLBACK_OUT_DIR))
}

pub fn trace_file_name(cell: &Cell, seed: u64) -> String {
    format!("{}_s{seed}.csv", cell.stem())
}

/// Runs one optimizer to its budget and returns the trace file contents.
pub fn run_single(config: &ExperimentConfig, config_hash: &str, cell: &Cell, seed: u64) -> Result<TraceFile> {
    let runtime = |e: probls::Error| HarnessError::Runtime(format!("{} seed {seed}: {e}", cell.stem()));
    let mut problem = config.build_problem()?;
    let x0 = problem.initial_point();
    let budget = config.budget.evaluations;
    let trace = match (cell.method, &cell.search) {
        (MethodKind::LineSearch, Some(search)) => {
            sgd_with_line_search(&mut problem, &x0, cell.alpha, budget, cell.batch_size, search, seed)
        }
        (MethodKind::Fixed, _) => sgd_fixed_rate(&mut problem, &x0, cell.alpha, budget, cell.batch_size, seed),
        (MethodKind::LineSearch, None) => unreachable!("line-search cells carry search constants"),
    }
    .map_err(runtime)?;
    let final_loss = problem.full_loss(&trace.final_x).map_err(runtime)?;
    Ok(TraceFile::from_run(cell, config_hash, &trace, final_loss))
}

pub fn run_experiment(config: &ExperimentConfig, options: &RunOptions) -> Result<RunReport> {
    config.validate()?;
    let hash = config.hash();
    let cells = config.cells()?;
    let start = config
        .seeds
        .start
        .checked_add(options.seed_offset)
        .ok_or_else(|| HarnessError::Config("seed offset overflows".into()))?;
    let seeds: Vec<u64> = (0..config.seeds.count).map(|i| start.wrapping_add(i)).collect();
    let jobs: Vec<(Cell, u64)> = cells
        .iter()
        .flat_map(|c| seeds.iter().map(move |&s| (*c, s)))
        .collect();

    let out_dir = resolve_out_dir(config, options.out_dir.as_deref());
    let trace_dir = out_dir.join(TRACE_DIR);
    fs::create_dir_all(&trace_dir).map_err(|e| HarnessError::io(&trace_dir, e))?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = options.jobs {
        if n == 0 {
            return Err(HarnessError::Config("--jobs must be positive".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| HarnessError::Runtime(e.to_string()))?;
    let traces = pool.install(|| {
        jobs.par_iter()
            .map(|(cell, seed)| {
                let trace = run_single(config, &hash, cell, *seed)?;
                let path = trace_dir.join(trace_file_name(cell, *seed));
                write_atomic(&path, &trace.to_bytes())?;
                Ok(path)
            })
            .collect::<Result<Vec<PathBuf>>>()
    })?;

    let summary = summarize_files(&traces)?;
    let summary_path = out_dir.join(SUMMARY_FILE);
    summary.write(&summary_path)?;
    Ok(RunReport {
        out_dir,
        traces,
        summary_path,
        summary,
    })
}
