//! Gaussian process surrogate over the scaled one-dimensional objective.
//!
//! The prior is the once-integrated Wiener process of [`crate::kernel`], so
//! the posterior mean is a cubic spline in `t` with knots at the observed
//! positions. Observations carry independent Gaussian noise on values and
//! on projected gradients.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, LU};

use crate::error::{Error, Result};
use crate::kernel::KernelParams;

/// Positions closer than this are treated as the same node.
pub const DUPLICATE_TOLERANCE: f64 = 1e-12;
/// Third (and, in the quadratic branch, second) derivatives of the mean
/// below this magnitude are treated as zero by [`SurrogateState::cubic_minimum`].
pub const CUBIC_TOLERANCE: f64 = 1e-9;
/// Slightly negative posterior variances above `-VARIANCE_TOLERANCE` (relative
/// to the prior variance at that point) are rounding and clamp to zero.
pub const VARIANCE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
enum Factor {
    Cholesky(Cholesky<f64, Dyn>),
    Lu(LU<f64, Dyn, Dyn>),
}

impl Factor {
    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        match self {
            Factor::Cholesky(c) => c.solve(rhs),
            // invertibility was checked when the factor was built
            Factor::Lu(lu) => lu.solve(rhs).expect("factorization checked at fit time"),
        }
    }
}

/// Posterior cross-covariances between `(f(0), f'(0))` and `(f(t), f'(t))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OriginCovariances {
    /// `cov(f(0), f(t))`
    pub v0f: f64,
    /// `cov(f'(0), f(t))`
    pub vd0f: f64,
    /// `cov(f(0), f'(t))`
    pub v0df: f64,
    /// `cov(f'(0), f'(t))`
    pub vd0df: f64,
}

/// Fitted GP state: observations in insertion order plus the solved system.
#[derive(Debug, Clone)]
pub struct SurrogateState {
    kernel: KernelParams,
    t: Vec<f64>,
    y: Vec<f64>,
    dy: Vec<f64>,
    sigma_f: f64,
    sigma_df: f64,
    gram: DMatrix<f64>,
    weights: DVector<f64>,
    factor: Factor,
}

/// Surrogate holding the scaled origin observation `(0, 0, -1)`.
pub fn init_surrogate(sigma_f: f64, sigma_df: f64) -> SurrogateState {
    SurrogateState::with_origin(KernelParams::default(), sigma_f, sigma_df, 0.0, -1.0)
        .expect("a single-node system with positive prior variance is always solvable")
}

impl SurrogateState {
    /// Surrogate with one observation `(0, y0, dy0)` under an arbitrary kernel.
    pub fn with_origin(
        kernel: KernelParams,
        sigma_f: f64,
        sigma_df: f64,
        y0: f64,
        dy0: f64,
    ) -> Result<Self> {
        if !(sigma_f >= 0.0 && sigma_df >= 0.0) || !sigma_f.is_finite() || !sigma_df.is_finite()
        {
            return Err(Error::Numerical(format!(
                "noise levels must be finite and non-negative, got ({sigma_f}, {sigma_df})"
            )));
        }
        if !y0.is_finite() || !dy0.is_finite() {
            return Err(Error::NonFiniteObservation {
                t: 0.0,
                value: y0,
                slope: dy0,
            });
        }
        let mut state = Self {
            kernel,
            t: vec![0.0],
            y: vec![y0],
            dy: vec![dy0],
            sigma_f,
            sigma_df,
            gram: DMatrix::zeros(0, 0),
            weights: DVector::zeros(0),
            factor: Factor::Lu(DMatrix::<f64>::identity(1, 1).lu()),
        };
        state.refit()?;
        Ok(state)
    }

    /// Appends `(t, y, dy)` and refits from scratch.
    pub fn add_observation(&mut self, t: f64, y: f64, dy: f64) -> Result<()> {
        if !t.is_finite() || t <= 0.0 {
            return Err(Error::InvalidPosition(t));
        }
        if !y.is_finite() || !dy.is_finite() {
            return Err(Error::NonFiniteObservation {
                t,
                value: y,
                slope: dy,
            });
        }
        if self.contains(t) {
            return Err(Error::DuplicatePosition(t));
        }
        self.t.push(t);
        self.y.push(y);
        self.dy.push(dy);
        if let Err(e) = self.refit() {
            self.t.pop();
            self.y.pop();
            self.dy.pop();
            self.refit()?;
            return Err(e);
        }
        Ok(())
    }

    /// Whether `t` coincides with an observed position.
    pub fn contains(&self, t: f64) -> bool {
        self.t.iter().any(|&s| (s - t).abs() <= DUPLICATE_TOLERANCE)
    }

    fn refit(&mut self) -> Result<()> {
        let n = self.t.len();
        let k = &self.kernel;
        let t = &self.t;
        let mut gram = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
            let (a, b) = (t[i % n], t[j % n]);
            match (i < n, j < n) {
                (true, true) => k.k(a, b),
                (true, false) => k.kd(a, b),
                (false, true) => k.dk(a, b),
                (false, false) => k.dkd(a, b),
            }
        });
        for i in 0..n {
            gram[(i, i)] += self.sigma_f * self.sigma_f;
            gram[(n + i, n + i)] += self.sigma_df * self.sigma_df;
        }

        let factor = if let Some(c) = gram.clone().cholesky() {
            Factor::Cholesky(c)
        } else {
            let jittered = (self.sigma_f == 0.0 && self.sigma_df == 0.0)
                .then(|| {
                    let jitter = 1e-10 * gram.trace() / (2 * n) as f64;
                    let mut g = gram.clone();
                    for i in 0..2 * n {
                        g[(i, i)] += jitter;
                    }
                    g.clone().cholesky().map(|c| (g, c))
                })
                .flatten();
            match jittered {
                Some((g, c)) => {
                    gram = g;
                    Factor::Cholesky(c)
                }
                None => {
                    let lu = gram.clone().lu();
                    if !lu.is_invertible() {
                        return Err(Error::Numerical(format!(
                            "singular Gram matrix with {n} observations"
                        )));
                    }
                    Factor::Lu(lu)
                }
            }
        };

        let mut targets = DVector::zeros(2 * n);
        for i in 0..n {
            targets[i] = self.y[i];
            targets[n + i] = self.dy[i];
        }
        let mut weights = factor.solve(&targets);
        // one step of iterative refinement
        let residual = &targets - &gram * &weights;
        weights += factor.solve(&residual);
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Numerical("non-finite GP weights".into()));
        }
        self.gram = gram;
        self.weights = weights;
        self.factor = factor;
        Ok(())
    }

    pub fn kernel(&self) -> &KernelParams {
        &self.kernel
    }

    /// Observed positions in insertion order.
    pub fn positions(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn slopes(&self) -> &[f64] {
        &self.dy
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn sigma_f(&self) -> f64 {
        self.sigma_f
    }

    pub fn sigma_df(&self) -> f64 {
        self.sigma_df
    }

    /// Gram matrix including the noise diagonal.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Solution of `G · A = [Y; dY]`.
    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    /// Positions sorted ascending.
    pub fn sorted_positions(&self) -> Vec<f64> {
        let mut t = self.t.clone();
        t.sort_by(f64::total_cmp);
        t
    }

    fn cross(&self, f: impl Fn(&KernelParams, f64, f64) -> f64, g: impl Fn(&KernelParams, f64, f64) -> f64, t: f64) -> DVector<f64> {
        let n = self.t.len();
        DVector::from_fn(2 * n, |i, _| {
            if i < n {
                f(&self.kernel, t, self.t[i])
            } else {
                g(&self.kernel, t, self.t[i - n])
            }
        })
    }

    /// Covariances of `f(t)` with all observations.
    fn cross_f(&self, t: f64) -> DVector<f64> {
        self.cross(KernelParams::k, KernelParams::kd, t)
    }

    /// Covariances of `f'(t)` with all observations.
    fn cross_df(&self, t: f64) -> DVector<f64> {
        self.cross(KernelParams::dk, KernelParams::dkd, t)
    }

    pub fn mean(&self, t: f64) -> f64 {
        self.cross_f(t).dot(&self.weights)
    }

    pub fn d1mean(&self, t: f64) -> f64 {
        self.cross_df(t).dot(&self.weights)
    }

    pub fn d2mean(&self, t: f64) -> f64 {
        self.cross(KernelParams::ddk, KernelParams::ddkd, t)
            .dot(&self.weights)
    }

    /// Piecewise constant between observed positions.
    pub fn d3mean(&self, t: f64) -> f64 {
        self.cross(KernelParams::dddk, |_, _, _| 0.0, t)
            .dot(&self.weights)
    }

    fn clamp_variance(&self, v: f64, prior: f64) -> Result<f64> {
        if v >= 0.0 {
            Ok(v)
        } else if v > -VARIANCE_TOLERANCE * prior.abs().max(1.0) {
            Ok(0.0)
        } else {
            Err(Error::Numerical(format!("negative posterior variance {v}")))
        }
    }

    /// Posterior variance of `f(t)`.
    pub fn var_f(&self, t: f64) -> Result<f64> {
        let kf = self.cross_f(t);
        let prior = self.kernel.k(t, t);
        self.clamp_variance(prior - kf.dot(&self.factor.solve(&kf)), prior)
    }

    /// Posterior variance of `f'(t)`.
    pub fn var_df(&self, t: f64) -> Result<f64> {
        let kdf = self.cross_df(t);
        let prior = self.kernel.dkd(t, t);
        self.clamp_variance(prior - kdf.dot(&self.factor.solve(&kdf)), prior)
    }

    /// Posterior covariance of `f(t)` and `f'(t)`.
    pub fn cov_f_df(&self, t: f64) -> f64 {
        let kf = self.cross_f(t);
        let kdf = self.cross_df(t);
        self.kernel.kd(t, t) - kf.dot(&self.factor.solve(&kdf))
    }

    /// Posterior covariances between the origin and position `t`.
    pub fn cov_with_origin(&self, t: f64) -> OriginCovariances {
        let k = &self.kernel;
        let f0 = self.cross_f(0.0);
        let df0 = self.cross_df(0.0);
        let gf = self.factor.solve(&self.cross_f(t));
        let gdf = self.factor.solve(&self.cross_df(t));
        OriginCovariances {
            v0f: k.k(0.0, t) - f0.dot(&gf),
            vd0f: k.dk(0.0, t) - df0.dot(&gf),
            v0df: k.kd(0.0, t) - f0.dot(&gdf),
            vd0df: k.dkd(0.0, t) - df0.dot(&gdf),
        }
    }

    /// Stationary point of the cubic mean piece around `t_rep` that is a
    /// local minimum, or `None` if that piece has none.
    pub fn cubic_minimum(&self, t_rep: f64) -> Option<f64> {
        let d1 = self.d1mean(t_rep);
        let d2 = self.d2mean(t_rep);
        let d3 = self.d3mean(t_rep);
        let a = 0.5 * d3;
        let b = d2 - t_rep * d3;
        let c = d1 - d2 * t_rep + 0.5 * d3 * t_rep * t_rep;

        if d3.abs() < CUBIC_TOLERANCE {
            // essentially quadratic: one extremum, a minimum only for positive
            // curvature; a flat piece is a line with its minimum at infinity
            if d2 < CUBIC_TOLERANCE {
                return None;
            }
            let t_min = -(d1 - t_rep * d2) / d2;
            return t_min.is_finite().then_some(t_min);
        }

        let discriminant = b * b - 4.0 * a * c;
        if discriminant < 0.0 {
            return None;
        }
        let sq = a.signum() * discriminant.sqrt();
        let left = (-b - sq) / (2.0 * a);
        let right = (-b + sq) / (2.0 * a);
        let cubic = |s: f64| {
            let dt = s - t_rep;
            d1 * dt + 0.5 * d2 * dt * dt + d3 * dt * dt * dt / 6.0
        };
        let t_min = if cubic(left) < cubic(right) { left } else { right };
        t_min.is_finite().then_some(t_min)
    }
}
