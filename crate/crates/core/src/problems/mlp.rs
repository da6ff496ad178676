use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{sigmoid, softplus, FiniteSum, FiniteSumProblem};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(z),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation value `a`.
    fn slope(self, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlpLoss {
    /// Sigmoid output with binary cross-entropy; one output unit, targets ±1.
    CrossEntropy,
    /// `½‖z − target‖²` on the linear output.
    Squared,
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::InvalidConfig(format!("unknown activation {other:?}"))),
        }
    }
}

impl FromStr for MlpLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cross-entropy" => Ok(MlpLoss::CrossEntropy),
            "squared" => Ok(MlpLoss::Squared),
            other => Err(Error::InvalidConfig(format!("unknown loss {other:?}"))),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
        })
    }
}

impl fmt::Display for MlpLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MlpLoss::CrossEntropy => "cross-entropy",
            MlpLoss::Squared => "squared",
        })
    }
}

/// Fully connected network with activated hidden layers and a linear output.
///
/// Parameters are stored layer by layer, each as a row-major weight matrix
/// (`out × in`) followed by the bias vector.
#[derive(Debug, Clone)]
pub struct Mlp {
    layers: Vec<usize>,
    activation: Activation,
    loss: MlpLoss,
    features: DMatrix<f64>,
    targets: DMatrix<f64>,
    init: DVector<f64>,
}

impl Mlp {
    pub fn new(
        layers: &[usize],
        activation: Activation,
        loss: MlpLoss,
        features: DMatrix<f64>,
        targets: DMatrix<f64>,
        seed: u64,
    ) -> Result<Self> {
        if layers.len() < 2 || layers.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "layer sizes must list at least input and output widths, all positive, got {layers:?}"
            )));
        }
        if features.ncols() != layers[0] {
            return Err(Error::DimensionMismatch {
                expected: layers[0],
                found: features.ncols(),
            });
        }
        let out = *layers.last().expect("checked length");
        if targets.ncols() != out {
            return Err(Error::DimensionMismatch {
                expected: out,
                found: targets.ncols(),
            });
        }
        if targets.nrows() != features.nrows() {
            return Err(Error::DimensionMismatch {
                expected: features.nrows(),
                found: targets.nrows(),
            });
        }
        if features.nrows() < 2 {
            return Err(Error::BatchTooSmall(features.nrows()));
        }
        if loss == MlpLoss::CrossEntropy {
            if out != 1 {
                return Err(Error::InvalidConfig(
                    "cross-entropy needs a single output unit".into(),
                ));
            }
            if targets.iter().any(|&y| y != 1.0 && y != -1.0) {
                return Err(Error::Data("cross-entropy targets must be -1 or +1".into()));
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut init = Vec::new();
        for w in layers.windows(2) {
            let std = 1.0 / (w[0] as f64).sqrt();
            for _ in 0..w[0] * w[1] {
                let z: f64 = StandardNormal.sample(&mut rng);
                init.push(std * z);
            }
            init.extend(std::iter::repeat_n(0.0, w[1]));
        }
        Ok(Self {
            layers: layers.to_vec(),
            activation,
            loss,
            features,
            targets,
            init: DVector::from_vec(init),
        })
    }

    pub fn layers(&self) -> &[usize] {
        &self.layers
    }

    /// Offsets of each layer's weights in the parameter vector.
    fn offsets(&self) -> Vec<usize> {
        let mut at = 0;
        self.layers
            .windows(2)
            .map(|w| {
                let start = at;
                at += w[0] * w[1] + w[1];
                start
            })
            .collect()
    }

    /// Output of the network for sample `i`.
    pub fn forward(&self, params: &[f64], i: usize) -> Vec<f64> {
        let acts = self.activations(params, i);
        acts.last().expect("at least one layer").clone()
    }

    fn activations(&self, params: &[f64], i: usize) -> Vec<Vec<f64>> {
        let n_layers = self.layers.len() - 1;
        let mut acts: Vec<Vec<f64>> = vec![self.features.row(i).iter().copied().collect()];
        for (l, start) in self.offsets().into_iter().enumerate() {
            let (n_in, n_out) = (self.layers[l], self.layers[l + 1]);
            let w = &params[start..start + n_in * n_out];
            let b = &params[start + n_in * n_out..start + n_in * n_out + n_out];
            let prev = &acts[l];
            let next: Vec<f64> = (0..n_out)
                .map(|r| {
                    let z = b[r] + (0..n_in).map(|c| w[r * n_in + c] * prev[c]).sum::<f64>();
                    if l + 1 < n_layers {
                        self.activation.apply(z)
                    } else {
                        z
                    }
                })
                .collect();
            acts.push(next);
        }
        acts
    }
}

impl FiniteSum for Mlp {
    fn dim(&self) -> usize {
        self.layers.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn len(&self) -> usize {
        self.features.nrows()
    }

    fn sample(&self, params: &[f64], i: usize, grad: &mut [f64]) -> f64 {
        let acts = self.activations(params, i);
        let out = acts.last().expect("at least one layer");
        let target = self.targets.row(i);

        let (loss, mut delta): (f64, Vec<f64>) = match self.loss {
            MlpLoss::CrossEntropy => {
                let (z, y) = (out[0], target[0]);
                (softplus(-y * z), vec![-y * sigmoid(-y * z)])
            }
            MlpLoss::Squared => {
                let r: Vec<f64> = out.iter().zip(target.iter()).map(|(z, t)| z - t).collect();
                (0.5 * r.iter().map(|v| v * v).sum::<f64>(), r)
            }
        };

        let offsets = self.offsets();
        for l in (0..self.layers.len() - 1).rev() {
            let (n_in, n_out) = (self.layers[l], self.layers[l + 1]);
            let start = offsets[l];
            let prev = &acts[l];
            for r in 0..n_out {
                for c in 0..n_in {
                    grad[start + r * n_in + c] = delta[r] * prev[c];
                }
                grad[start + n_in * n_out + r] = delta[r];
            }
            if l > 0 {
                let w = &params[start..start + n_in * n_out];
                delta = (0..n_in)
                    .map(|c| {
                        let back: f64 = (0..n_out).map(|r| w[r * n_in + c] * delta[r]).sum();
                        back * self.activation.slope(prev[c])
                    })
                    .collect();
            }
        }
        loss
    }

    fn initial_point(&self) -> DVector<f64> {
        self.init.clone()
    }
}

/// Small MLP on `features` (`M × layers[0]`) and `targets`
/// (`M × layers.last()`); `seed` draws the initial weights.
pub fn make_small_mlp(
    layers: &[usize],
    activation: Activation,
    loss: MlpLoss,
    features: DMatrix<f64>,
    targets: DMatrix<f64>,
    seed: u64,
) -> Result<FiniteSumProblem> {
    Ok(FiniteSumProblem::new(Mlp::new(
        layers, activation, loss, features, targets, seed,
    )?))
}
