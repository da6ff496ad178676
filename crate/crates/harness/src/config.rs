//! Experiment configuration read from TOML.
//!
//! ```toml
//! [problem]
//! kind = "logistic"
//! dim = 20
//! samples = 2000
//! separation = 4.0
//!
//! [batch]
//! size = 128
//!
//! [method]
//! methods = ["problinesearch", "fixed"]
//!
//! [grid]
//! alpha_min = 1e-5
//! alpha_max = 10.0
//! alpha_count = 7
//!
//! [budget]
//! evaluations = 2000
//!
//! [seeds]
//! count = 10
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use probls::acquisition::AcquisitionMode;
use probls::linesearch::SearchConfig;
use probls::noise::{NoiseConfig, ProjectionMode};
use probls::problems::{
    load_csv, log_spectrum, make_logistic_regression, make_noisy_quadratic, make_small_mlp,
    make_synthetic_blobs, Activation, Dataset, FiniteSumProblem, MlpLoss,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub batch: BatchConfig,
    #[serde(default)]
    pub method: MethodConfig,
    pub grid: GridConfig,
    pub budget: BudgetConfig,
    #[serde(default)]
    pub seeds: SeedConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// `quadratic`, `logistic` or `mlp`.
    pub kind: String,
    #[serde(default = "defaults::dim")]
    pub dim: usize,
    #[serde(default = "defaults::samples")]
    pub samples: usize,
    #[serde(default)]
    pub data_seed: u64,
    /// Quadratic: ratio of largest to smallest Hessian eigenvalue.
    #[serde(default = "defaults::condition")]
    pub condition: f64,
    /// Quadratic: spread of the per-sample offsets.
    #[serde(default = "defaults::one")]
    pub noise_scale: f64,
    /// Blob datasets: distance between class means.
    #[serde(default = "defaults::separation")]
    pub separation: f64,
    #[serde(default)]
    pub l2: f64,
    /// Load features and ±1 labels (last column) from a CSV file instead of
    /// generating blobs.
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default = "defaults::yes")]
    pub has_header: bool,
    #[serde(default = "defaults::hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "defaults::activation")]
    pub activation: String,
    #[serde(default = "defaults::loss")]
    pub loss: String,
    #[serde(default)]
    pub init_seed: u64,
    /// `diagonal` or `exact`.
    #[serde(default = "defaults::projection")]
    pub projection: String,
    #[serde(default)]
    pub finite_population: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchConfig {
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    #[serde(default = "defaults::methods")]
    pub methods: Vec<String>,
    #[serde(default = "defaults::c1")]
    pub c1: f64,
    #[serde(default = "defaults::c2")]
    pub c2: f64,
    #[serde(default = "defaults::c_w")]
    pub c_w: f64,
    #[serde(default = "defaults::alpha_ext")]
    pub alpha_ext: f64,
    #[serde(default = "defaults::theta_reset")]
    pub theta_reset: f64,
    #[serde(default = "defaults::budget_l")]
    pub budget_l: usize,
    #[serde(default = "defaults::tau")]
    pub tau: f64,
    #[serde(default = "defaults::gamma")]
    pub gamma: f64,
    #[serde(default = "defaults::uphill_r")]
    pub uphill_r: f64,
    #[serde(default = "defaults::acquisition")]
    pub acquisition: String,
}

impl Default for MethodConfig {
    fn default() -> Self {
        let d = SearchConfig::default();
        Self {
            methods: defaults::methods(),
            c1: d.c1,
            c2: d.c2,
            c_w: d.c_w,
            alpha_ext: d.alpha_ext,
            theta_reset: d.theta_reset,
            budget_l: d.budget_l,
            tau: d.tau,
            gamma: d.gamma,
            uphill_r: d.uphill_r,
            acquisition: defaults::acquisition(),
        }
    }
}

/// Grid axes. Every listed value is crossed with every other; the search
/// constants only multiply line-search cells.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Explicit step sizes (fixed rate) or initial steps (line search).
    #[serde(default)]
    pub alpha: Option<Vec<f64>>,
    /// Log-spaced alternative to `alpha`.
    #[serde(default)]
    pub alpha_min: Option<f64>,
    #[serde(default)]
    pub alpha_max: Option<f64>,
    #[serde(default)]
    pub alpha_count: Option<usize>,
    #[serde(default)]
    pub batch_size: Option<Vec<usize>>,
    #[serde(default)]
    pub c2: Option<Vec<f64>>,
    #[serde(default)]
    pub c_w: Option<Vec<f64>>,
    #[serde(default)]
    pub alpha_ext: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    /// Mini-batch evaluations per run.
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedConfig {
    #[serde(default = "defaults::seed_count")]
    pub count: u64,
    #[serde(default)]
    pub start: u64,
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self {
            count: defaults::seed_count(),
            start: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

mod defaults {
    use probls::linesearch::SearchConfig;

    pub fn dim() -> usize {
        10
    }
    pub fn samples() -> usize {
        1000
    }
    pub fn condition() -> f64 {
        100.0
    }
    pub fn one() -> f64 {
        1.0
    }
    pub fn separation() -> f64 {
        4.0
    }
    pub fn yes() -> bool {
        true
    }
    pub fn hidden() -> Vec<usize> {
        vec![16]
    }
    pub fn activation() -> String {
        "tanh".into()
    }
    pub fn loss() -> String {
        "cross-entropy".into()
    }
    pub fn projection() -> String {
        "diagonal".into()
    }
    pub fn methods() -> Vec<String> {
        vec!["problinesearch".into()]
    }
    pub fn c1() -> f64 {
        SearchConfig::default().c1
    }
    pub fn c2() -> f64 {
        SearchConfig::default().c2
    }
    pub fn c_w() -> f64 {
        SearchConfig::default().c_w
    }
    pub fn alpha_ext() -> f64 {
        SearchConfig::default().alpha_ext
    }
    pub fn theta_reset() -> f64 {
        SearchConfig::default().theta_reset
    }
    pub fn budget_l() -> usize {
        SearchConfig::default().budget_l
    }
    pub fn tau() -> f64 {
        SearchConfig::default().tau
    }
    pub fn gamma() -> f64 {
        SearchConfig::default().gamma
    }
    pub fn uphill_r() -> f64 {
        SearchConfig::default().uphill_r
    }
    pub fn acquisition() -> String {
        "product".into()
    }
    pub fn seed_count() -> u64 {
        1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodKind {
    LineSearch,
    Fixed,
}

impl MethodKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MethodKind::LineSearch => "problinesearch",
            MethodKind::Fixed => "fixed",
        }
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "problinesearch" => Ok(MethodKind::LineSearch),
            "fixed" => Ok(MethodKind::Fixed),
            other => Err(HarnessError::Config(format!("unknown method {other:?}"))),
        }
    }
}

/// One grid point: everything that identifies a run except the seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub method: MethodKind,
    pub batch_size: usize,
    pub alpha: f64,
    /// Search constants; `None` for fixed-rate cells.
    pub search: Option<SearchConfig>,
}

impl Cell {
    /// File-name stem without the seed.
    pub fn stem(&self) -> String {
        let mut s = format!("{}_b{}_a{:e}", self.method, self.batch_size, self.alpha);
        if let Some(c) = &self.search {
            s.push_str(&format!("_c2-{}_cw-{}_ext-{}", c.c2, c.c_w, c.alpha_ext));
        }
        s
    }
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

fn core_config_err(e: probls::Error) -> HarnessError {
    HarnessError::Config(e.to_string())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// SHA-256 of the canonical re-serialisation, so formatting and comments
    /// in the source file do not change it.
    pub fn hash(&self) -> String {
        let canonical = toml::to_string(self).expect("config serialises");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.methods()?;
        self.search_base()?;
        self.noise()?;
        let p = &self.problem;
        match p.kind.as_str() {
            "quadratic" => {
                if !(p.condition >= 1.0 && p.condition.is_finite()) {
                    return Err(config_err(format!("condition must be >= 1, got {}", p.condition)));
                }
            }
            "logistic" => {}
            "mlp" => {
                p.activation.parse::<Activation>().map_err(core_config_err)?;
                p.loss.parse::<MlpLoss>().map_err(core_config_err)?;
            }
            other => return Err(config_err(format!("unknown problem kind {other:?}"))),
        }
        if self.budget.evaluations < 2 {
            return Err(config_err("budget.evaluations must be at least 2"));
        }
        if self.seeds.count == 0 {
            return Err(config_err("seeds.count must be positive"));
        }
        let cells = self.cells()?;
        if cells.is_empty() {
            return Err(config_err("grid is empty"));
        }
        Ok(())
    }

    pub fn methods(&self) -> Result<Vec<MethodKind>> {
        let methods = self
            .method
            .methods
            .iter()
            .map(|m| m.parse())
            .collect::<Result<Vec<MethodKind>>>()?;
        if methods.is_empty() {
            return Err(config_err("method.methods is empty"));
        }
        Ok(methods)
    }

    fn search_base(&self) -> Result<SearchConfig> {
        let m = &self.method;
        let config = SearchConfig {
            c1: m.c1,
            c2: m.c2,
            c_w: m.c_w,
            alpha_ext: m.alpha_ext,
            theta_reset: m.theta_reset,
            budget_l: m.budget_l,
            tau: m.tau,
            gamma: m.gamma,
            uphill_r: m.uphill_r,
            acquisition: m.acquisition.parse::<AcquisitionMode>().map_err(core_config_err)?,
        };
        config.validate().map_err(core_config_err)?;
        Ok(config)
    }

    pub fn noise(&self) -> Result<NoiseConfig> {
        let projection = match self.problem.projection.as_str() {
            "diagonal" => ProjectionMode::Diagonal,
            "exact" => ProjectionMode::Exact,
            other => return Err(config_err(format!("unknown projection {other:?}"))),
        };
        Ok(NoiseConfig {
            projection,
            finite_population: self.problem.finite_population,
        })
    }

    pub fn alphas(&self) -> Result<Vec<f64>> {
        let g = &self.grid;
        let alphas = match (&g.alpha, g.alpha_min, g.alpha_max, g.alpha_count) {
            (Some(list), None, None, None) => list.clone(),
            (None, Some(lo), Some(hi), Some(n)) => {
                if !(lo > 0.0 && hi >= lo && n >= 1) {
                    return Err(config_err("need 0 < alpha_min <= alpha_max and alpha_count >= 1"));
                }
                if n == 1 {
                    vec![lo]
                } else {
                    let (a, b) = (lo.log10(), hi.log10());
                    (0..n)
                        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
                        .collect()
                }
            }
            _ => {
                return Err(config_err(
                    "grid needs either alpha = [...] or all of alpha_min, alpha_max, alpha_count",
                ))
            }
        };
        if let Some(bad) = alphas.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(config_err(format!("grid step sizes must be positive, got {bad}")));
        }
        Ok(alphas)
    }

    /// All grid cells in a fixed order: method, batch size, step size, then
    /// the search constants.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        let base = self.search_base()?;
        let alphas = self.alphas()?;
        let batches = self.grid.batch_size.clone().unwrap_or_else(|| vec![self.batch.size]);
        if let Some(&m) = batches.iter().find(|&&m| m < 2) {
            return Err(config_err(format!("batch size must be at least 2, got {m}")));
        }
        if self.problem.csv.is_none() {
            if let Some(&m) = batches.iter().find(|&&m| m > self.problem.samples) {
                return Err(config_err(format!(
                    "batch size {m} exceeds the {} generated samples",
                    self.problem.samples
                )));
            }
        }
        let axis = |v: &Option<Vec<f64>>, default: f64| v.clone().unwrap_or_else(|| vec![default]);
        let c2s = axis(&self.grid.c2, base.c2);
        let cws = axis(&self.grid.c_w, base.c_w);
        let exts = axis(&self.grid.alpha_ext, base.alpha_ext);

        let mut cells = Vec::new();
        for method in self.methods()? {
            for &batch_size in &batches {
                for &alpha in &alphas {
                    match method {
                        MethodKind::Fixed => cells.push(Cell {
                            method,
                            batch_size,
                            alpha,
                            search: None,
                        }),
                        MethodKind::LineSearch => {
                            for &c2 in &c2s {
                                for &c_w in &cws {
                                    for &alpha_ext in &exts {
                                        let search = SearchConfig {
                                            c2,
                                            c_w,
                                            alpha_ext,
                                            ..base
                                        };
                                        search.validate().map_err(core_config_err)?;
                                        cells.push(Cell {
                                            method,
                                            batch_size,
                                            alpha,
                                            search: Some(search),
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(cells)
    }

    /// Builds a fresh problem instance; identical for every call.
    pub fn build_problem(&self) -> Result<FiniteSumProblem> {
        let p = &self.problem;
        let dataset = || -> Result<Dataset> {
            match &p.csv {
                Some(path) => load_csv(path, p.has_header).map_err(|e| match e {
                    probls::Error::Data(msg) => HarnessError::Io(msg),
                    other => HarnessError::Runtime(other.to_string()),
                }),
                None => make_synthetic_blobs(p.dim, p.samples, p.separation, p.data_seed).map_err(core_config_err),
            }
        };
        let problem = match p.kind.as_str() {
            "quadratic" => make_noisy_quadratic(
                &log_spectrum(p.dim, p.condition),
                p.noise_scale,
                p.samples,
                p.data_seed,
            )
            .map_err(core_config_err)?,
            "logistic" => make_logistic_regression(dataset()?, p.l2).map_err(core_config_err)?,
            "mlp" => {
                let data = dataset()?;
                let loss: MlpLoss = p.loss.parse().map_err(core_config_err)?;
                let mut layers = vec![data.dim()];
                layers.extend(&p.hidden);
                layers.push(1);
                let targets = DMatrix::from_column_slice(data.len(), 1, &data.labels);
                make_small_mlp(
                    &layers,
                    p.activation.parse().map_err(core_config_err)?,
                    loss,
                    data.features,
                    targets,
                    p.init_seed,
                )
                .map_err(core_config_err)?
            }
            other => return Err(config_err(format!("unknown problem kind {other:?}"))),
        };
        Ok(problem.with_noise(self.noise()?))
    }
}
