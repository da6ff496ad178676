//! Tabulation of trace files into per-run and per-cell statistics.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::trace::{write_atomic, TraceFile};

/// One summary row. Run rows carry a seed; cell rows aggregate all seeds of
/// a grid cell and carry the final-loss spread instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    /// `run` or `cell`.
    pub row: String,
    pub method: String,
    pub batch_size: usize,
    pub alpha: f64,
    pub c2: Option<f64>,
    pub c_w: Option<f64>,
    pub alpha_ext: Option<f64>,
    pub seed: Option<u64>,
    pub runs: usize,
    /// Run: full-batch loss at the end. Cell: mean over runs.
    pub final_loss: f64,
    /// Cell only: sample standard deviation over runs.
    pub final_loss_std: Option<f64>,
    pub mean_alpha: Option<f64>,
    pub max_alpha: Option<f64>,
    pub mean_evals_per_search: Option<f64>,
    pub steps: usize,
    pub total_evals: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub runs: Vec<SummaryRow>,
    pub cells: Vec<SummaryRow>,
}

/// Mean and sample standard deviation, accumulated relative to the first
/// value so that identical inputs give exactly their value and zero spread.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let first = values[0];
    let n = values.len() as f64;
    let shift = values.iter().map(|v| v - first).sum::<f64>() / n;
    let mean = first + shift;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss = values.iter().map(|v| (v - first - shift).powi(2)).sum::<f64>();
    (mean, (ss / (n - 1.0)).sqrt())
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    (!v.is_empty()).then(|| mean_std(&v).0)
}

pub fn run_row(trace: &TraceFile) -> SummaryRow {
    let m = &trace.meta;
    let rows = &trace.rows;
    SummaryRow {
        row: "run".into(),
        method: m.method.to_string(),
        batch_size: m.batch_size,
        alpha: m.alpha,
        c2: m.c2,
        c_w: m.c_w,
        alpha_ext: m.alpha_ext,
        seed: Some(m.seed),
        runs: 1,
        final_loss: m.final_full_loss,
        final_loss_std: None,
        mean_alpha: mean(rows.iter().map(|r| r.accepted_alpha)),
        max_alpha: rows.iter().map(|r| r.accepted_alpha).reduce(f64::max),
        mean_evals_per_search: mean(rows.iter().map(|r| r.evals_in_search as f64)),
        steps: rows.len(),
        total_evals: rows.last().map_or(0, |r| r.cum_evals),
    }
}

fn same_cell(a: &SummaryRow, b: &SummaryRow) -> bool {
    let bits = |v: Option<f64>| v.map(f64::to_bits);
    a.method == b.method
        && a.batch_size == b.batch_size
        && a.alpha.to_bits() == b.alpha.to_bits()
        && bits(a.c2) == bits(b.c2)
        && bits(a.c_w) == bits(b.c_w)
        && bits(a.alpha_ext) == bits(b.alpha_ext)
}

fn cell_row(members: &[&SummaryRow]) -> SummaryRow {
    let first = members[0];
    let losses: Vec<f64> = members.iter().map(|r| r.final_loss).collect();
    let (loss, std) = mean_std(&losses);
    SummaryRow {
        row: "cell".into(),
        seed: None,
        runs: members.len(),
        final_loss: loss,
        final_loss_std: Some(std),
        mean_alpha: mean(members.iter().filter_map(|r| r.mean_alpha)),
        max_alpha: members.iter().filter_map(|r| r.max_alpha).reduce(f64::max),
        mean_evals_per_search: mean(members.iter().filter_map(|r| r.mean_evals_per_search)),
        steps: members.iter().map(|r| r.steps).sum(),
        total_evals: members.iter().map(|r| r.total_evals).sum(),
        ..first.clone()
    }
}

fn order(a: &SummaryRow, b: &SummaryRow) -> std::cmp::Ordering {
    let opt = |v: Option<f64>| v.unwrap_or(f64::NEG_INFINITY);
    a.method
        .cmp(&b.method)
        .then(a.batch_size.cmp(&b.batch_size))
        .then(a.alpha.total_cmp(&b.alpha))
        .then(opt(a.c2).total_cmp(&opt(b.c2)))
        .then(opt(a.c_w).total_cmp(&opt(b.c_w)))
        .then(opt(a.alpha_ext).total_cmp(&opt(b.alpha_ext)))
        .then(a.seed.cmp(&b.seed))
}

/// Summarises traces; rows are ordered by method, grid parameters and seed
/// regardless of input order.
pub fn summarize_traces(traces: &[TraceFile]) -> Summary {
    let mut runs: Vec<SummaryRow> = traces.iter().map(run_row).collect();
    runs.sort_by(order);
    let mut groups: Vec<Vec<&SummaryRow>> = Vec::new();
    for r in &runs {
        match groups.iter_mut().find(|g| same_cell(g[0], r)) {
            Some(g) => g.push(r),
            None => groups.push(vec![r]),
        }
    }
    let cells = groups.iter().map(|g| cell_row(g)).collect();
    Summary { runs, cells }
}

pub fn summarize_files(paths: &[PathBuf]) -> Result<Summary> {
    if paths.is_empty() {
        return Err(HarnessError::Io("no trace files to summarise".into()));
    }
    let traces = paths
        .iter()
        .map(|p| TraceFile::read(p))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize_traces(&traces))
}

/// Expands a glob pattern into a sorted list of files.
pub fn expand_glob(pattern: &str) -> Result<Vec<PathBuf>> {
    let entries = glob::glob(pattern).map_err(|e| HarnessError::Config(format!("bad glob {pattern:?}: {e}")))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| HarnessError::Io(e.to_string()))?;
        if path.is_file() {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

impl Summary {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in self.runs.iter().chain(&self.cells) {
            w.serialize(row).expect("write to vec");
        }
        w.into_inner().expect("flush to vec")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| HarnessError::trace(path, e.to_string()))?;
        let rows = reader
            .deserialize()
            .collect::<std::result::Result<Vec<SummaryRow>, _>>()
            .map_err(|e| HarnessError::trace(path, e.to_string()))?;
        let (cells, runs) = rows.into_iter().partition(|r| r.row == "cell");
        Ok(Summary { runs, cells })
    }
}
