//! Per-run trace files: `# key = value` metadata lines followed by a CSV
//! table with one row per optimizer step.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use probls::optimizer::OptimizerTrace;
use serde::{Deserialize, Serialize};

use crate::config::{Cell, MethodKind};
use crate::error::{HarnessError, Result};

pub const TRACE_VERSION: &str = "probls-trace-1";

const TERMINATIONS: [&str; 4] = ["wolfe-accept", "budget-lowest-mean", "uphill-retreat", "fixed"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub cum_evals: usize,
    pub accepted_alpha: f64,
    pub evals_in_search: usize,
    pub train_loss: f64,
    pub sigma_f: f64,
    pub sigma_df: f64,
    pub termination: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeta {
    pub seed: u64,
    pub config_hash: String,
    pub method: MethodKind,
    pub batch_size: usize,
    pub alpha: f64,
    pub c2: Option<f64>,
    pub c_w: Option<f64>,
    pub alpha_ext: Option<f64>,
    pub eval_budget: usize,
    pub initial_loss: f64,
    /// Full-batch loss at the final iterate.
    pub final_full_loss: f64,
    pub stop: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub meta: TraceMeta,
    pub rows: Vec<TraceRow>,
}

impl TraceFile {
    pub fn from_run(cell: &Cell, config_hash: &str, trace: &OptimizerTrace, final_full_loss: f64) -> Self {
        let rows = trace
            .records
            .iter()
            .map(|r| TraceRow {
                step: r.step,
                cum_evals: r.cum_evals,
                accepted_alpha: r.accepted_alpha,
                evals_in_search: r.evals_in_search,
                train_loss: r.train_loss,
                sigma_f: r.sigma_f,
                sigma_df: r.sigma_df,
                termination: r.termination.to_string(),
            })
            .collect();
        TraceFile {
            meta: TraceMeta {
                seed: trace.seed,
                config_hash: config_hash.to_string(),
                method: cell.method,
                batch_size: cell.batch_size,
                alpha: cell.alpha,
                c2: cell.search.map(|s| s.c2),
                c_w: cell.search.map(|s| s.c_w),
                alpha_ext: cell.search.map(|s| s.alpha_ext),
                eval_budget: trace.eval_budget,
                initial_loss: trace.initial_loss,
                final_full_loss,
                stop: trace.stop.to_string(),
            },
            rows,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let m = &self.meta;
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        let mut out = Vec::new();
        let lines = [
            ("format", TRACE_VERSION.to_string()),
            ("seed", m.seed.to_string()),
            ("config_hash", m.config_hash.clone()),
            ("method", m.method.to_string()),
            ("batch_size", m.batch_size.to_string()),
            ("alpha", m.alpha.to_string()),
            ("c2", opt(m.c2)),
            ("c_w", opt(m.c_w)),
            ("alpha_ext", opt(m.alpha_ext)),
            ("eval_budget", m.eval_budget.to_string()),
            ("initial_loss", m.initial_loss.to_string()),
            ("final_full_loss", m.final_full_loss.to_string()),
            ("stop", m.stop.clone()),
        ];
        for (k, v) in lines {
            writeln!(out, "# {k} = {v}").expect("write to vec");
        }
        let mut w = csv::Writer::from_writer(out);
        if self.rows.is_empty() {
            w.write_record([
                "step",
                "cum_evals",
                "accepted_alpha",
                "evals_in_search",
                "train_loss",
                "sigma_f",
                "sigma_df",
                "termination",
            ])
            .expect("write to vec");
        }
        for row in &self.rows {
            w.serialize(row).expect("write to vec");
        }
        w.into_inner().expect("flush to vec")
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let bad = |msg: String| HarnessError::trace(path, msg);
        let mut meta = std::collections::HashMap::new();
        let mut body_start = 0;
        for raw in text.split_inclusive('\n') {
            let line = raw.trim_end_matches(['\r', '\n']);
            let Some(rest) = line.strip_prefix('#') else { break };
            body_start += raw.len();
            let (k, v) = rest
                .split_once('=')
                .ok_or_else(|| bad(format!("malformed metadata line {line:?}")))?;
            meta.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| meta.get(k).ok_or_else(|| bad(format!("missing metadata {k}")));
        let num = |k: &str| -> Result<f64> {
            get(k)?.parse().map_err(|_| bad(format!("metadata {k} is not a number")))
        };
        let int = |k: &str| -> Result<u64> {
            get(k)?.parse().map_err(|_| bad(format!("metadata {k} is not an integer")))
        };
        let opt = |k: &str| -> Result<Option<f64>> {
            match get(k)?.as_str() {
                "" => Ok(None),
                _ => num(k).map(Some),
            }
        };
        if get("format")? != TRACE_VERSION {
            return Err(bad("unknown trace format".into()));
        }
        let meta = TraceMeta {
            seed: int("seed")?,
            config_hash: get("config_hash")?.clone(),
            method: get("method")?.parse().map_err(|e: HarnessError| bad(e.to_string()))?,
            batch_size: int("batch_size")? as usize,
            alpha: num("alpha")?,
            c2: opt("c2")?,
            c_w: opt("c_w")?,
            alpha_ext: opt("alpha_ext")?,
            eval_budget: int("eval_budget")? as usize,
            initial_loss: num("initial_loss")?,
            final_full_loss: num("final_full_loss")?,
            stop: get("stop")?.clone(),
        };
        let body = &text[body_start..];
        let mut reader = csv::Reader::from_reader(body.as_bytes());
        let rows = reader
            .deserialize()
            .collect::<std::result::Result<Vec<TraceRow>, _>>()
            .map_err(|e| bad(e.to_string()))?;
        let mut last_evals = 0;
        for (i, r) in rows.iter().enumerate() {
            if r.step != i + 1 {
                return Err(bad(format!("step {} out of sequence", r.step)));
            }
            if r.cum_evals <= last_evals {
                return Err(bad(format!("cumulative evaluations not increasing at step {}", r.step)));
            }
            last_evals = r.cum_evals;
            if !TERMINATIONS.contains(&r.termination.as_str()) {
                return Err(bad(format!("unknown termination {:?}", r.termination)));
            }
        }
        Ok(TraceFile { meta, rows })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(path, &text)
    }
}

/// Writes `bytes` to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| HarnessError::Io(format!("{} has no file name", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".{}.tmp", std::process::id()));
    let tmp: PathBuf = dir.join(tmp_name);
    fs::write(&tmp, bytes).map_err(|e| HarnessError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        HarnessError::io(path, e)
    })
}
