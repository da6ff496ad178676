use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{FiniteSum, FiniteSumProblem};
use crate::error::{Error, Result};

/// `ℓᵢ(x) = ½ (x − εᵢ)ᵀ H (x − εᵢ)` with diagonal `H` and fixed offsets `εᵢ`.
#[derive(Debug, Clone)]
pub struct NoisyQuadratic {
    spectrum: Vec<f64>,
    /// `M × D`, one offset per row.
    offsets: DMatrix<f64>,
}

impl NoisyQuadratic {
    pub fn new(spectrum: &[f64], noise_scale: f64, m: usize, seed: u64) -> Result<Self> {
        if spectrum.is_empty() {
            return Err(Error::InvalidConfig("quadratic needs D >= 1".into()));
        }
        if m < 2 {
            return Err(Error::BatchTooSmall(m));
        }
        if let Some(&bad) = spectrum.iter().find(|&&h| !(h > 0.0 && h.is_finite())) {
            return Err(Error::InvalidSpectrum(bad));
        }
        if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "noise scale must be non-negative, got {noise_scale}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let offsets = DMatrix::from_fn(m, spectrum.len(), |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            noise_scale * z
        });
        Ok(Self {
            spectrum: spectrum.to_vec(),
            offsets,
        })
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    /// Minimizer of the full objective: the mean offset.
    pub fn minimizer(&self) -> DVector<f64> {
        self.offsets.row_mean().transpose()
    }
}

impl FiniteSum for NoisyQuadratic {
    fn dim(&self) -> usize {
        self.spectrum.len()
    }

    fn len(&self) -> usize {
        self.offsets.nrows()
    }

    fn sample(&self, x: &[f64], i: usize, grad: &mut [f64]) -> f64 {
        let mut loss = 0.0;
        for (j, (&h, &xj)) in self.spectrum.iter().zip(x).enumerate() {
            let r = xj - self.offsets[(i, j)];
            loss += 0.5 * h * r * r;
            grad[j] = h * r;
        }
        loss
    }

    fn initial_point(&self) -> DVector<f64> {
        DVector::from_element(self.dim(), 1.0)
    }
}

/// Noisy quadratic with the given Hessian eigenvalues.
pub fn make_noisy_quadratic(
    spectrum: &[f64],
    noise_scale: f64,
    m: usize,
    seed: u64,
) -> Result<FiniteSumProblem> {
    Ok(FiniteSumProblem::new(NoisyQuadratic::new(spectrum, noise_scale, m, seed)?))
}

/// `D` eigenvalues spaced log-uniformly from 1 to `condition`.
pub fn log_spectrum(d: usize, condition: f64) -> Vec<f64> {
    if d == 1 {
        return vec![1.0];
    }
    (0..d)
        .map(|i| condition.powf(i as f64 / (d - 1) as f64))
        .collect()
}
