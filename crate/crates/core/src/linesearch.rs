//! The probabilistic line search along a fixed direction.
//!
//! Positions are measured in units of the initial step `alpha0`, values are
//! shifted by `f(x0)` and divided by `alpha0·β` with `β = |dᵀ∇f(x0)|`, so
//! the scaled problem always starts at value 0 with slope −1 and the GP can
//! use a unit output scale.

use std::fmt;

use nalgebra::DVector;

use crate::acquisition::{
    cell_minimum, choose_candidate_with, generate_candidates, AcquisitionMode,
};
use crate::error::{Error, Result};
use crate::kernel::KernelParams;
use crate::noise::{clamp_and_scale_noise, BatchEvaluation};
use crate::surrogate::SurrogateState;
use crate::wolfe::{is_acceptable, prob_wolfe};

/// Attempts at the first trial position before a non-finite value is fatal.
const FIRST_EVAL_RETRIES: usize = 3;
/// Smallest usable `|dᵀ∇f(x0)|`.
pub const MIN_SLOPE: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    /// Armijo constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    /// Acceptance threshold on the Wolfe probability.
    pub c_w: f64,
    /// Factor applied to the accepted step to seed the next search.
    pub alpha_ext: f64,
    /// Allowed ratio between the next step and the running average.
    pub theta_reset: f64,
    /// Objective evaluations in the main loop.
    pub budget_l: usize,
    pub tau: f64,
    /// Running-average factor for accepted steps.
    pub gamma: f64,
    /// Fraction of the first cell used when the start looks uphill.
    pub uphill_r: f64,
    pub acquisition: AcquisitionMode,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            c1: 0.05,
            c2: 0.5,
            c_w: 0.3,
            alpha_ext: 1.3,
            theta_reset: 100.0,
            budget_l: 6,
            tau: 10.0,
            gamma: 0.95,
            uphill_r: 0.01,
            acquisition: AcquisitionMode::Product,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(0.0 <= self.c1 && self.c1 < self.c2 && self.c2 <= 1.0) {
            return bad(format!(
                "need 0 <= c1 < c2 <= 1, got c1 = {}, c2 = {}",
                self.c1, self.c2
            ));
        }
        if !(self.c_w > 0.0 && self.c_w <= 1.0) {
            return bad(format!("need 0 < c_w <= 1, got {}", self.c_w));
        }
        if !(self.alpha_ext >= 1.0 && self.alpha_ext.is_finite()) {
            return bad(format!("need alpha_ext >= 1, got {}", self.alpha_ext));
        }
        if !(self.theta_reset > 1.0 && self.theta_reset.is_finite()) {
            return bad(format!("need theta_reset > 1, got {}", self.theta_reset));
        }
        if self.budget_l < 1 {
            return bad("need budget_l >= 1".into());
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("need tau > 0, got {}", self.tau));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("need 0 <= gamma < 1, got {}", self.gamma));
        }
        if !(self.uphill_r > 0.0 && self.uphill_r < 0.5) {
            return bad(format!("need 0 < uphill_r < 0.5, got {}", self.uphill_r));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    WolfeAccept,
    BudgetLowestMean,
    UphillRetreat,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::WolfeAccept => "wolfe-accept",
            Termination::BudgetLowestMean => "budget-lowest-mean",
            Termination::UphillRetreat => "uphill-retreat",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Mini-batch oracle evaluated by the search.
pub trait Objective {
    fn evaluate(&mut self, x: &DVector<f64>) -> Result<BatchEvaluation>;
}

impl<F> Objective for F
where
    F: FnMut(&DVector<f64>) -> Result<BatchEvaluation>,
{
    fn evaluate(&mut self, x: &DVector<f64>) -> Result<BatchEvaluation> {
        self(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub alpha_accepted: f64,
    pub alpha_next: f64,
    pub alpha_stats: f64,
    pub x_new: DVector<f64>,
    pub batch_at_accept: BatchEvaluation,
    pub evals_used: usize,
    pub termination: Termination,
    /// Accepted position in scaled units.
    pub t_accepted: f64,
    /// Scaled positions in evaluation order.
    pub trials: Vec<f64>,
    /// Every Wolfe probability computed during the search.
    pub wolfe_probabilities: Vec<f64>,
    pub beta: f64,
    /// Scaled noise levels of the surrogate.
    pub sigma_f: f64,
    pub sigma_df: f64,
}

/// `|dᵀ·grad0|`, failing unless `d` is a descent direction.
pub fn scale_factor(direction: &DVector<f64>, grad0: &DVector<f64>) -> Result<f64> {
    if direction.len() != grad0.len() {
        return Err(Error::DimensionMismatch {
            expected: grad0.len(),
            found: direction.len(),
        });
    }
    let slope = direction.dot(grad0);
    if slope.is_nan() || slope >= 0.0 {
        return Err(Error::NotDescentDirection(slope));
    }
    if slope.abs() < MIN_SLOPE {
        return Err(Error::VanishingGradient(slope));
    }
    Ok(slope.abs())
}

/// Scaled value and projected gradient of a raw evaluation.
pub fn scale_observation(
    y_raw: f64,
    grad_raw: &DVector<f64>,
    f0_raw: f64,
    direction: &DVector<f64>,
    alpha0: f64,
    beta: f64,
) -> (f64, f64) {
    (
        (y_raw - f0_raw) / (alpha0 * beta),
        grad_raw.dot(direction) / beta,
    )
}

/// Step-size bookkeeping after accepting scaled position `tt`.
pub fn rescale_outcome(
    x0: &DVector<f64>,
    alpha0: f64,
    direction: &DVector<f64>,
    tt: f64,
    alpha_stats: f64,
    config: &SearchConfig,
) -> (f64, DVector<f64>, f64, f64) {
    let alpha_accepted = tt * alpha0;
    let x_new = x0 + direction * alpha_accepted;
    let alpha_stats = config.gamma * alpha_stats + (1.0 - config.gamma) * alpha_accepted;
    let mut alpha_next = alpha_accepted * config.alpha_ext;
    if alpha_next < alpha_stats / config.theta_reset || alpha_next > alpha_stats * config.theta_reset
    {
        alpha_next = alpha_stats;
    }
    (alpha_accepted, x_new, alpha_stats, alpha_next)
}

struct Search<'a, O: Objective + ?Sized> {
    objective: &'a mut O,
    x0: &'a DVector<f64>,
    direction: &'a DVector<f64>,
    f0: f64,
    alpha0: f64,
    beta: f64,
    config: &'a SearchConfig,
    state: SurrogateState,
    evals: usize,
    trials: Vec<f64>,
    probabilities: Vec<f64>,
}

impl<O: Objective + ?Sized> Search<'_, O> {
    /// Evaluates at scaled position `tt` and returns the raw batch with its
    /// scaled value and slope.
    fn evaluate(&mut self, tt: f64) -> Result<(BatchEvaluation, f64, f64)> {
        let x = self.x0 + self.direction * (tt * self.alpha0);
        let batch = self.objective.evaluate(&x)?;
        self.evals += 1;
        self.trials.push(tt);
        if batch.grad.len() != self.direction.len() {
            return Err(Error::DimensionMismatch {
                expected: self.direction.len(),
                found: batch.grad.len(),
            });
        }
        let (y, dy) = scale_observation(
            batch.loss,
            &batch.grad,
            self.f0,
            self.direction,
            self.alpha0,
            self.beta,
        );
        Ok((batch, y, dy))
    }

    /// Evaluates at `tt` and adds the observation to the surrogate, moving
    /// `tt` slightly right if it collides with an existing node.
    fn observe(&mut self, tt: f64) -> Result<(f64, BatchEvaluation)> {
        let tt = self.separate(tt);
        let (batch, y, dy) = self.evaluate(tt)?;
        self.state.add_observation(tt, y, dy)?;
        Ok((tt, batch))
    }

    fn separate(&self, tt: f64) -> f64 {
        if !self.state.contains(tt) {
            return tt;
        }
        let sorted = self.state.sorted_positions();
        let width = sorted
            .iter()
            .position(|&s| s > tt + crate::surrogate::DUPLICATE_TOLERANCE)
            .map(|i| sorted[i] - tt)
            .unwrap_or(1.0);
        tt + 1e-6 * width
    }

    fn wolfe_ok(&mut self, t: f64) -> Result<bool> {
        let a = prob_wolfe(&self.state, t, self.config.c1, self.config.c2)?;
        self.probabilities.push(a.p_wolfe);
        Ok(is_acceptable(&a, self.config.c_w))
    }

    fn first_observation(&mut self) -> Result<(f64, BatchEvaluation)> {
        let retries = FIRST_EVAL_RETRIES.min(self.config.budget_l - 1);
        let mut tt = 1.0;
        for attempt in 0..=retries {
            let (batch, y, dy) = self.evaluate(tt)?;
            if y.is_finite() && dy.is_finite() {
                self.state.add_observation(tt, y, dy)?;
                return Ok((tt, batch));
            }
            if attempt == retries {
                return Err(Error::NonFiniteObservation {
                    t: tt,
                    value: y,
                    slope: dy,
                });
            }
            tt *= 0.5;
        }
        unreachable!("the last attempt returns")
    }

    fn finish(
        self,
        tt: f64,
        batch: BatchEvaluation,
        alpha_stats: f64,
        termination: Termination,
    ) -> SearchOutcome {
        let (alpha_accepted, x_new, alpha_stats, alpha_next) =
            rescale_outcome(self.x0, self.alpha0, self.direction, tt, alpha_stats, self.config);
        SearchOutcome {
            alpha_accepted,
            alpha_next,
            alpha_stats,
            x_new,
            batch_at_accept: batch,
            evals_used: self.evals,
            termination,
            t_accepted: tt,
            trials: self.trials,
            wolfe_probabilities: self.probabilities,
            beta: self.beta,
            sigma_f: self.state.sigma_f(),
            sigma_df: self.state.sigma_df(),
        }
    }
}

/// Runs one line search from `x0` along `direction`.
///
/// `batch0` holds the statistics at `x0` (normally the accepted batch of the
/// previous search), `alpha0` is the initial step and `alpha_stats` the
/// running average of accepted steps.
pub fn probabilistic_line_search<O: Objective + ?Sized>(
    objective: &mut O,
    x0: &DVector<f64>,
    direction: &DVector<f64>,
    batch0: &BatchEvaluation,
    alpha0: f64,
    alpha_stats: f64,
    config: &SearchConfig,
) -> Result<SearchOutcome> {
    config.validate()?;
    if !(alpha0 > 0.0 && alpha0.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "initial step must be positive and finite, got {alpha0}"
        )));
    }
    if x0.len() != direction.len() {
        return Err(Error::DimensionMismatch {
            expected: x0.len(),
            found: direction.len(),
        });
    }
    let beta = scale_factor(direction, &batch0.grad)?;
    let projected = batch0.projected_variance(direction)?;
    let (sigma_f, sigma_df) = clamp_and_scale_noise(batch0.var_loss, projected, alpha0, beta);
    let kernel = KernelParams::new(config.tau, 1.0);
    let dy0 = batch0.grad.dot(direction) / beta;
    let state = SurrogateState::with_origin(kernel, sigma_f, sigma_df, 0.0, dy0)?;

    let mut s = Search {
        objective,
        x0,
        direction,
        f0: batch0.loss,
        alpha0,
        beta,
        config,
        state,
        evals: 0,
        trials: Vec::with_capacity(config.budget_l + 2),
        probabilities: Vec::new(),
    };

    let mut t_ext = 1.0;
    let (mut tt, mut batch) = s.first_observation()?;
    loop {
        if s.wolfe_ok(tt)? {
            return Ok(s.finish(tt, batch, alpha_stats, Termination::WolfeAccept));
        }

        let sorted = s.state.sorted_positions();
        let mut wolfes = Vec::new();
        for (n, cell) in sorted.windows(2).enumerate() {
            if cell_minimum(&s.state, cell[0], cell[1]).is_none()
                && n == 0
                && s.state.d1mean(0.0) > 0.0
            {
                let t_back = config.uphill_r * (cell[0] + cell[1]);
                let (t_back, b) = s.observe(t_back)?;
                return Ok(s.finish(t_back, b, alpha_stats, Termination::UphillRetreat));
            }
            if n > 0 && s.wolfe_ok(cell[0])? {
                wolfes.push(cell[0]);
            }
        }

        if !wolfes.is_empty() {
            if wolfes.contains(&tt) {
                return Ok(s.finish(tt, batch, alpha_stats, Termination::WolfeAccept));
            }
            let best = lowest_mean(&s.state, &wolfes);
            // fresh statistics at the chosen node; the surrogate is not needed again
            let (b, _, _) = s.evaluate(best)?;
            return Ok(s.finish(best, b, alpha_stats, Termination::WolfeAccept));
        }

        let candidates = generate_candidates(&s.state, t_ext, config.c1, config.c2)?;
        s.probabilities.extend(candidates.iter().map(|c| c.p_wolfe));
        let (best, extrapolated) = choose_candidate_with(&candidates, config.acquisition)?;
        if extrapolated {
            t_ext *= 2.0;
        }
        let next = candidates[best].t;

        if s.evals >= config.budget_l {
            let (t_final, b) = s.observe(next)?;
            tt = t_final;
            batch = b;
            break;
        }
        (tt, batch) = s.observe(next)?;
    }

    if s.wolfe_ok(tt)? {
        return Ok(s.finish(tt, batch, alpha_stats, Termination::WolfeAccept));
    }
    let positive: Vec<f64> = s
        .state
        .positions()
        .iter()
        .copied()
        .filter(|&t| t > 0.0)
        .collect();
    let lowest = lowest_mean(&s.state, &positive);
    if lowest == tt {
        return Ok(s.finish(tt, batch, alpha_stats, Termination::BudgetLowestMean));
    }
    let (b, _, _) = s.evaluate(lowest)?;
    Ok(s.finish(lowest, b, alpha_stats, Termination::BudgetLowestMean))
}

/// Position with the smallest posterior mean, first on ties.
fn lowest_mean(state: &SurrogateState, positions: &[f64]) -> f64 {
    let mut best = positions[0];
    let mut best_mean = state.mean(best);
    for &t in &positions[1..] {
        let m = state.mean(t);
        if m < best_mean {
            best = t;
            best_mean = m;
        }
    }
    best
}
