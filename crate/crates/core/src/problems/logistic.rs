use nalgebra::DVector;

use super::{sigmoid, softplus, Dataset, FiniteSum, FiniteSumProblem};
use crate::error::{Error, Result};

/// `ℓᵢ(w) = log(1 + exp(−yᵢ·wᵀxᵢ)) + (l2/2)·‖w‖²/M`.
#[derive(Debug, Clone)]
pub struct LogisticRegression {
    data: Dataset,
    l2: f64,
}

impl LogisticRegression {
    pub fn new(data: Dataset, l2: f64) -> Result<Self> {
        if data.len() < 2 {
            return Err(Error::BatchTooSmall(data.len()));
        }
        if !(l2 >= 0.0 && l2.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "l2 must be non-negative, got {l2}"
            )));
        }
        Ok(Self { data, l2 })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    /// Fraction of samples with `yᵢ·wᵀxᵢ > 0`.
    pub fn accuracy(&self, w: &DVector<f64>) -> f64 {
        let margins = &self.data.features * w;
        let correct = margins
            .iter()
            .zip(&self.data.labels)
            .filter(|(z, y)| *z * *y > 0.0)
            .count();
        correct as f64 / self.data.len() as f64
    }
}

impl FiniteSum for LogisticRegression {
    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn len(&self) -> usize {
        self.data.len()
    }

    fn sample(&self, w: &[f64], i: usize, grad: &mut [f64]) -> f64 {
        let row = self.data.features.row(i);
        let y = self.data.labels[i];
        let z: f64 = row.iter().zip(w).map(|(a, b)| a * b).sum();
        let reg = self.l2 / self.data.len() as f64;
        let scale = -y * sigmoid(-y * z);
        let mut norm2 = 0.0;
        for (j, (&xj, &wj)) in row.iter().zip(w).enumerate() {
            grad[j] = scale * xj + reg * wj;
            norm2 += wj * wj;
        }
        softplus(-y * z) + 0.5 * reg * norm2
    }
}

/// Logistic regression without intercept on `data`.
pub fn make_logistic_regression(data: Dataset, l2: f64) -> Result<FiniteSumProblem> {
    Ok(FiniteSumProblem::new(LogisticRegression::new(data, l2)?))
}
