//! Mini-batch estimates of loss, gradient and their sampling variances.
//!
//! All variances are variances of the batch *mean*, i.e. the per-sample
//! spread divided by the batch size, estimated as `(Ŝ − L̂²)/(m − 1)` where
//! `Ŝ` is the mean of squares.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BatchEvaluation {
    pub loss: f64,
    pub grad: DVector<f64>,
    pub var_loss: f64,
    /// Per-coordinate variance of `grad`.
    pub var_grad: DVector<f64>,
    pub batch_size: usize,
    /// Variance of `−gradᵀ·grad` from the full sample covariance, when the
    /// problem was asked to provide it.
    pub exact_projected_var: Option<f64>,
}

impl BatchEvaluation {
    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    /// Whether loss, gradient and variances are all finite.
    pub fn is_finite(&self) -> bool {
        self.loss.is_finite()
            && self.var_loss.is_finite()
            && self.grad.iter().all(|g| g.is_finite())
            && self.var_grad.iter().all(|v| v.is_finite())
            && self.exact_projected_var.is_none_or(f64::is_finite)
    }

    /// Projected gradient variance along `direction`, preferring the exact
    /// estimate when it was computed for the steepest-descent direction.
    pub fn projected_variance(&self, direction: &DVector<f64>) -> Result<f64> {
        match self.exact_projected_var {
            Some(v) if *direction == -&self.grad => Ok(v),
            _ => project_variance(&self.var_grad, direction),
        }
    }
}

/// Which projected-gradient variance estimator a problem reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProjectionMode {
    /// Coordinates treated as independent.
    #[default]
    Diagonal,
    /// Full sample covariance projected on the steepest-descent direction.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NoiseConfig {
    pub projection: ProjectionMode,
    /// Apply the `(M − m)/M` finite-population correction.
    pub finite_population: bool,
}

fn population_factor(m: usize, population: Option<usize>) -> f64 {
    match population {
        Some(big_m) if big_m > 0 => (big_m.saturating_sub(m)) as f64 / big_m as f64,
        _ => 1.0,
    }
}

/// Mean and mean squared deviation, accumulated relative to the first value
/// so identical samples give exactly zero spread.
fn shifted_moments(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let Some(first) = values.clone().next() else {
        return (0.0, 0.0);
    };
    let n = values.clone().count() as f64;
    let shift = values.clone().map(|v| v - first).sum::<f64>() / n;
    let spread = values.map(|v| (v - first - shift).powi(2)).sum::<f64>() / n;
    (first + shift, spread)
}

/// Statistics of a batch given per-sample losses and an `m × D` matrix of
/// per-sample gradients.
pub fn batch_statistics(losses: &[f64], grads: &DMatrix<f64>) -> Result<BatchEvaluation> {
    batch_statistics_with(losses, grads, None)
}

/// [`batch_statistics`] with an optional finite-population size `M`, which
/// scales every variance by `(M − m)/M`.
pub fn batch_statistics_with(
    losses: &[f64],
    grads: &DMatrix<f64>,
    population: Option<usize>,
) -> Result<BatchEvaluation> {
    let m = losses.len();
    if m < 2 {
        return Err(Error::BatchTooSmall(m));
    }
    if grads.nrows() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: grads.nrows(),
        });
    }
    let mf = m as f64;
    let scale = population_factor(m, population) / (mf - 1.0);

    // Ŝ − L̂² evaluated as the mean squared deviation after shifting by the
    // first sample, which is the same quantity without the cancellation
    let (loss, spread) = shifted_moments(losses.iter().copied());
    let var_loss = spread * scale;

    let d = grads.ncols();
    let mut grad = DVector::zeros(d);
    let mut var_grad = DVector::zeros(d);
    for j in 0..d {
        let (mean, spread) = shifted_moments(grads.column(j).iter().copied());
        grad[j] = mean;
        var_grad[j] = spread * scale;
    }

    Ok(BatchEvaluation {
        loss,
        grad,
        var_loss,
        var_grad,
        batch_size: m,
        exact_projected_var: None,
    })
}

/// `Σ dᵢ²·var_gradᵢ`.
pub fn project_variance(var_grad: &DVector<f64>, direction: &DVector<f64>) -> Result<f64> {
    if var_grad.len() != direction.len() {
        return Err(Error::DimensionMismatch {
            expected: var_grad.len(),
            found: direction.len(),
        });
    }
    Ok(direction.component_mul(direction).dot(var_grad).max(0.0))
}

/// Variance of the projected batch gradient `dᵀ·∇L̂` using the full sample
/// covariance of the per-sample gradients.
pub fn exact_projected_variance(grads: &DMatrix<f64>, direction: &DVector<f64>) -> Result<f64> {
    exact_projected_variance_with(grads, direction, None)
}

/// [`exact_projected_variance`] with an optional finite-population size.
pub fn exact_projected_variance_with(
    grads: &DMatrix<f64>,
    direction: &DVector<f64>,
    population: Option<usize>,
) -> Result<f64> {
    let m = grads.nrows();
    if m < 2 {
        return Err(Error::BatchTooSmall(m));
    }
    if grads.ncols() != direction.len() {
        return Err(Error::DimensionMismatch {
            expected: grads.ncols(),
            found: direction.len(),
        });
    }
    let projected = grads * direction;
    let (_, spread) = shifted_moments(projected.iter().copied());
    Ok(spread * population_factor(m, population) / (m as f64 - 1.0))
}

/// Noise levels in scaled line-search units.
pub fn clamp_and_scale_noise(var_loss: f64, projected_var: f64, alpha0: f64, beta: f64) -> (f64, f64) {
    (
        var_loss.max(0.0).sqrt() / (alpha0 * beta),
        projected_var.max(0.0).sqrt() / beta,
    )
}
