//! Probabilistic line search for stochastic gradient descent.
//!
//! A Gaussian process with an integrated-Wiener-process prior models the
//! objective along the search direction from noisy values and projected
//! gradients. Steps are accepted when the posterior probability of the weak
//! Wolfe conditions exceeds a threshold, and new trial positions are picked
//! by expected improvement weighted with that probability.

pub mod acquisition;
pub mod bvn;
pub mod classic;
pub mod error;
pub mod kernel;
pub mod linesearch;
pub mod noise;
pub mod optimizer;
pub mod problems;
pub mod surrogate;
pub mod wolfe;

pub use error::{Error, Result};
