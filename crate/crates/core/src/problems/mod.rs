//! Finite-sum objectives `L(x) = (1/M) Σ ℓ(x, dᵢ)` with mini-batch access.

mod data;
mod logistic;
mod mlp;
mod quadratic;

pub use data::{load_csv, make_synthetic_blobs, Dataset};
pub use logistic::{make_logistic_regression, LogisticRegression};
pub use mlp::{make_small_mlp, Activation, Mlp, MlpLoss};
pub use quadratic::{log_spectrum, make_noisy_quadratic, NoisyQuadratic};

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linesearch::Objective;
use crate::noise::{batch_statistics_with, exact_projected_variance_with, BatchEvaluation, NoiseConfig, ProjectionMode};

/// Per-sample access to a finite sum.
pub trait FiniteSum: Send + Sync {
    /// Parameter dimension `D`.
    fn dim(&self) -> usize;
    /// Number of summands `M`.
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Loss of sample `i` at `x`; its gradient is written into `grad`.
    fn sample(&self, x: &[f64], i: usize, grad: &mut [f64]) -> f64;
    /// A reasonable starting point.
    fn initial_point(&self) -> DVector<f64> {
        DVector::zeros(self.dim())
    }
}

/// A finite sum together with its noise settings and an evaluation counter.
pub struct FiniteSumProblem {
    model: Box<dyn FiniteSum>,
    noise: NoiseConfig,
    evaluations: usize,
}

impl std::fmt::Debug for FiniteSumProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FiniteSumProblem")
            .field("dim", &self.dim())
            .field("len", &self.len())
            .field("noise", &self.noise)
            .field("evaluations", &self.evaluations)
            .finish()
    }
}

impl FiniteSumProblem {
    pub fn new(model: impl FiniteSum + 'static) -> Self {
        Self {
            model: Box::new(model),
            noise: NoiseConfig::default(),
            evaluations: 0,
        }
    }

    pub fn with_noise(mut self, noise: NoiseConfig) -> Self {
        self.noise = noise;
        self
    }

    pub fn noise(&self) -> NoiseConfig {
        self.noise
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn len(&self) -> usize {
        self.model.len()
    }

    pub fn is_empty(&self) -> bool {
        self.model.len() == 0
    }

    pub fn model(&self) -> &dyn FiniteSum {
        self.model.as_ref()
    }

    pub fn initial_point(&self) -> DVector<f64> {
        self.model.initial_point()
    }

    /// Number of batch evaluations so far.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Statistics over `m` indices drawn uniformly with replacement.
    pub fn evaluate_batch(
        &mut self,
        x: &DVector<f64>,
        m: usize,
        rng: &mut impl Rng,
    ) -> Result<BatchEvaluation> {
        if m < 2 {
            return Err(Error::BatchTooSmall(m));
        }
        if m > self.len() {
            return Err(Error::InvalidConfig(format!(
                "batch size {m} exceeds dataset size {}",
                self.len()
            )));
        }
        let indices: Vec<usize> = (0..m).map(|_| rng.random_range(0..self.len())).collect();
        self.evaluate_indices(x, &indices)
    }

    /// Statistics over the given sample indices; counts as one evaluation.
    pub fn evaluate_indices(&mut self, x: &DVector<f64>, indices: &[usize]) -> Result<BatchEvaluation> {
        self.check_dim(x)?;
        if indices.len() < 2 {
            return Err(Error::BatchTooSmall(indices.len()));
        }
        let (losses, grads) = self.per_sample(x, indices)?;
        let population = self.noise.finite_population.then_some(self.len());
        let mut batch = batch_statistics_with(&losses, &grads, population)?;
        if self.noise.projection == ProjectionMode::Exact {
            let direction = -&batch.grad;
            batch.exact_projected_var =
                Some(exact_projected_variance_with(&grads, &direction, population)?);
        }
        self.evaluations += 1;
        Ok(batch)
    }

    /// Per-sample losses and the `m × D` matrix of per-sample gradients.
    pub fn per_sample(&self, x: &DVector<f64>, indices: &[usize]) -> Result<(Vec<f64>, DMatrix<f64>)> {
        self.check_dim(x)?;
        let d = self.dim();
        let mut losses = Vec::with_capacity(indices.len());
        let mut grads = DMatrix::zeros(indices.len(), d);
        let mut g = vec![0.0; d];
        for (row, &i) in indices.iter().enumerate() {
            if i >= self.len() {
                return Err(Error::Data(format!("sample index {i} out of range")));
            }
            g.iter_mut().for_each(|v| *v = 0.0);
            losses.push(self.model.sample(x.as_slice(), i, &mut g));
            for (j, v) in g.iter().enumerate() {
                grads[(row, j)] = *v;
            }
        }
        Ok((losses, grads))
    }

    /// Exact empirical risk and its gradient; not counted.
    pub fn full_objective(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        self.check_dim(x)?;
        let d = self.dim();
        let mut total = 0.0;
        let mut grad = DVector::zeros(d);
        let mut g = vec![0.0; d];
        for i in 0..self.len() {
            g.iter_mut().for_each(|v| *v = 0.0);
            total += self.model.sample(x.as_slice(), i, &mut g);
            for (acc, v) in grad.iter_mut().zip(&g) {
                *acc += v;
            }
        }
        let m = self.len() as f64;
        Ok((total / m, grad / m))
    }

    /// Exact empirical risk; not counted.
    pub fn full_loss(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.full_objective(x)?.0)
    }

    /// Adapter drawing batches of size `m` from `rng` on every call.
    pub fn objective<'a, R: Rng>(&'a mut self, m: usize, rng: &'a mut R) -> BatchObjective<'a, R> {
        BatchObjective {
            problem: self,
            batch_size: m,
            rng,
        }
    }
}

/// Mini-batch oracle over a [`FiniteSumProblem`].
pub struct BatchObjective<'a, R: Rng> {
    problem: &'a mut FiniteSumProblem,
    batch_size: usize,
    rng: &'a mut R,
}

impl<R: Rng> Objective for BatchObjective<'_, R> {
    fn evaluate(&mut self, x: &DVector<f64>) -> Result<BatchEvaluation> {
        self.problem.evaluate_batch(x, self.batch_size, self.rng)
    }
}

/// Numerically stable `log(1 + exp(z))`.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Numerically stable logistic sigmoid.
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
