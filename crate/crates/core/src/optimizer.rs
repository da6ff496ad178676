//! Outer SGD loops: one driven by successive line searches and a
//! fixed-learning-rate baseline, both budgeted in mini-batch evaluations.

use std::fmt;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linesearch::{probabilistic_line_search, SearchConfig, Termination, MIN_SLOPE};
use crate::noise::project_variance;
use crate::problems::FiniteSumProblem;

/// Initial step size used when none is configured.
pub const DEFAULT_ALPHA_INIT: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Search(Termination),
    Fixed,
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepKind::Search(t) => t.fmt(f),
            StepKind::Fixed => f.write_str("fixed"),
        }
    }
}

/// Why a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    BudgetSpent,
    /// The batch gradient vanished, so no descent direction exists.
    Converged,
    /// A loss or gradient became non-finite.
    Diverged,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::BudgetSpent => "budget-spent",
            StopReason::Converged => "converged",
            StopReason::Diverged => "diverged",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    /// 1-based step index.
    pub step: usize,
    pub cum_evals: usize,
    pub accepted_alpha: f64,
    pub evals_in_search: usize,
    /// Mini-batch loss at the accepted point (line search) or at the point
    /// the step was computed from (fixed rate).
    pub train_loss: f64,
    /// Line search: scaled noise levels of the surrogate. Fixed rate: raw
    /// standard deviations of the batch loss and of the projected gradient.
    pub sigma_f: f64,
    pub sigma_df: f64,
    pub termination: StepKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    LineSearch,
    Fixed,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::LineSearch => "problinesearch",
            Method::Fixed => "fixed",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerTrace {
    pub method: Method,
    pub seed: u64,
    /// Initial step (line search) or the learning rate (fixed).
    pub alpha: f64,
    pub batch_size: usize,
    pub eval_budget: usize,
    pub search: Option<SearchConfig>,
    /// Loss of the first batch drawn at the initial point.
    pub initial_loss: f64,
    pub records: Vec<StepRecord>,
    pub final_x: DVector<f64>,
    pub stop: StopReason,
}

impl OptimizerTrace {
    pub fn total_evals(&self) -> usize {
        self.records.last().map_or(0, |r| r.cum_evals)
    }
}

fn check_run(alpha: f64, eval_budget: usize, min_budget: usize, x: &DVector<f64>, problem: &FiniteSumProblem) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "step size must be positive and finite, got {alpha}"
        )));
    }
    if eval_budget < min_budget {
        return Err(Error::InvalidConfig(format!(
            "evaluation budget must be at least {min_budget}, got {eval_budget}"
        )));
    }
    if x.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            found: x.len(),
        });
    }
    Ok(())
}

/// SGD whose step sizes come from successive probabilistic line searches.
///
/// The first batch at `x_init` counts towards `eval_budget`; searches run
/// until the budget is reached, so the last one may overrun it by at most
/// one search's worth of evaluations.
#[allow(clippy::too_many_arguments)]
pub fn sgd_with_line_search(
    problem: &mut FiniteSumProblem,
    x_init: &DVector<f64>,
    alpha_init: f64,
    eval_budget: usize,
    batch_size: usize,
    config: &SearchConfig,
    seed: u64,
) -> Result<OptimizerTrace> {
    check_run(alpha_init, eval_budget, 2, x_init, problem)?;
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut batch = problem.evaluate_batch(x_init, batch_size, &mut rng)?;
    let mut trace = OptimizerTrace {
        method: Method::LineSearch,
        seed,
        alpha: alpha_init,
        batch_size,
        eval_budget,
        search: Some(*config),
        initial_loss: batch.loss,
        records: Vec::new(),
        final_x: x_init.clone(),
        stop: StopReason::BudgetSpent,
    };
    let mut cum = 1;
    let mut x = x_init.clone();
    let (mut alpha, mut alpha_stats) = (alpha_init, alpha_init);

    while cum < eval_budget {
        if !batch.is_finite() {
            trace.stop = StopReason::Diverged;
            break;
        }
        if batch.grad.norm_squared() < MIN_SLOPE {
            trace.stop = StopReason::Converged;
            break;
        }
        let direction = -&batch.grad;
        let out = {
            let mut objective = problem.objective(batch_size, &mut rng);
            probabilistic_line_search(&mut objective, &x, &direction, &batch, alpha, alpha_stats, config)?
        };
        cum += out.evals_used;
        trace.records.push(StepRecord {
            step: trace.records.len() + 1,
            cum_evals: cum,
            accepted_alpha: out.alpha_accepted,
            evals_in_search: out.evals_used,
            train_loss: out.batch_at_accept.loss,
            sigma_f: out.sigma_f,
            sigma_df: out.sigma_df,
            termination: StepKind::Search(out.termination),
        });
        x = out.x_new;
        alpha = out.alpha_next;
        alpha_stats = out.alpha_stats;
        batch = out.batch_at_accept;
    }
    trace.final_x = x;
    Ok(trace)
}

/// Plain SGD `x ← x − α·∇L̂(x)` with one batch evaluation per step.
pub fn sgd_fixed_rate(
    problem: &mut FiniteSumProblem,
    x_init: &DVector<f64>,
    alpha: f64,
    eval_budget: usize,
    batch_size: usize,
    seed: u64,
) -> Result<OptimizerTrace> {
    check_run(alpha, eval_budget, 1, x_init, problem)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trace = OptimizerTrace {
        method: Method::Fixed,
        seed,
        alpha,
        batch_size,
        eval_budget,
        search: None,
        initial_loss: f64::NAN,
        records: Vec::with_capacity(eval_budget),
        final_x: x_init.clone(),
        stop: StopReason::BudgetSpent,
    };
    let mut x = x_init.clone();
    for step in 1..=eval_budget {
        let batch = problem.evaluate_batch(&x, batch_size, &mut rng)?;
        if step == 1 {
            trace.initial_loss = batch.loss;
        }
        let projected = project_variance(&batch.var_grad, &batch.grad)?;
        trace.records.push(StepRecord {
            step,
            cum_evals: step,
            accepted_alpha: alpha,
            evals_in_search: 1,
            train_loss: batch.loss,
            sigma_f: batch.var_loss.sqrt(),
            sigma_df: projected.sqrt(),
            termination: StepKind::Fixed,
        });
        if !batch.is_finite() {
            trace.stop = StopReason::Diverged;
            break;
        }
        x -= &batch.grad * alpha;
        if x.iter().any(|v| !v.is_finite()) {
            trace.stop = StopReason::Diverged;
            break;
        }
    }
    trace.final_x = x;
    Ok(trace)
}
