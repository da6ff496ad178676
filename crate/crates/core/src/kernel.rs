//! Once-integrated Wiener process covariance and its derivative forms.
//!
//! Naming follows the convention that a leading `d` differentiates the first
//! argument and a trailing `d` differentiates the second one, so `kd(a, b)`
//! is `∂k/∂b`, `dk(a, b)` is `∂k/∂a` and `dkd(a, b)` is `∂²k/∂a∂b`.
//! The indicator conventions at `a == b` are fixed; all branches agree there.

/// Default position offset of the kernel.
pub const DEFAULT_TAU: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub tau: f64,
    pub theta: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            theta: 1.0,
        }
    }
}

impl KernelParams {
    pub fn new(tau: f64, theta: f64) -> Self {
        assert!(tau > 0.0, "kernel offset must be positive, got {tau}");
        assert!(theta > 0.0, "kernel scale must be positive, got {theta}");
        Self { tau, theta }
    }

    #[inline]
    fn scale(&self) -> f64 {
        self.theta * self.theta
    }

    /// Covariance of `f(a)` and `f(b)`.
    #[inline]
    pub fn k(&self, a: f64, b: f64) -> f64 {
        let m = (a + self.tau).min(b + self.tau);
        self.scale() * (m * m * m / 3.0 + 0.5 * (a - b).abs() * m * m)
    }

    /// Covariance of `f(a)` and `f'(b)`.
    #[inline]
    pub fn kd(&self, a: f64, b: f64) -> f64 {
        let (at, bt) = (a + self.tau, b + self.tau);
        let v = if a < b {
            0.5 * at * at
        } else {
            at * bt - 0.5 * bt * bt
        };
        self.scale() * v
    }

    /// Covariance of `f'(a)` and `f(b)`.
    #[inline]
    pub fn dk(&self, a: f64, b: f64) -> f64 {
        let (at, bt) = (a + self.tau, b + self.tau);
        let v = if a > b {
            0.5 * bt * bt
        } else {
            at * bt - 0.5 * at * at
        };
        self.scale() * v
    }

    /// Covariance of `f'(a)` and `f'(b)`: the Wiener process kernel.
    #[inline]
    pub fn dkd(&self, a: f64, b: f64) -> f64 {
        self.scale() * (a + self.tau).min(b + self.tau)
    }

    /// `∂²k/∂a²`.
    #[inline]
    pub fn ddk(&self, a: f64, b: f64) -> f64 {
        if a <= b {
            self.scale() * (b - a)
        } else {
            0.0
        }
    }

    /// `∂³k/∂a²∂b`.
    #[inline]
    pub fn ddkd(&self, a: f64, b: f64) -> f64 {
        if a <= b {
            self.scale()
        } else {
            0.0
        }
    }

    /// `∂³k/∂a³`.
    #[inline]
    pub fn dddk(&self, a: f64, b: f64) -> f64 {
        if a <= b {
            -self.scale()
        } else {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, SymmetricEigen};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const K: KernelParams = KernelParams {
        tau: 10.0,
        theta: 1.0,
    };

    #[test]
    fn hand_values() {
        assert!((K.k(0.0, 0.0) - 1000.0 / 3.0).abs() < 1e-12);
        assert!((K.k(1.0, 2.0) - (1331.0 / 3.0 + 60.5)).abs() < 1e-12);
        assert!((K.kd(1.0, 2.0) - 60.5).abs() < 1e-12);
        assert!((K.kd(2.0, 1.0) - 71.5).abs() < 1e-12);
        assert!((K.dkd(1.0, 2.0) - 11.0).abs() < 1e-12);
        assert_eq!(K.ddk(3.0, 3.0), 0.0);
        assert_eq!(K.dddk(1.0, 5.0), -1.0);
        assert_eq!(K.dddk(5.0, 1.0), 0.0);
        assert_eq!(K.ddkd(2.0, 2.0), 1.0);
    }

    #[test]
    fn symmetry_and_transposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let a = rng.random_range(0.0..20.0);
            let b = rng.random_range(0.0..20.0);
            assert_eq!(K.k(a, b), K.k(b, a));
            assert_eq!(K.dk(a, b), K.kd(b, a));
            assert_eq!(K.dkd(a, b), K.dkd(b, a));
        }
    }

    #[test]
    fn theta_scales_quadratically() {
        let p = KernelParams::new(10.0, 3.0);
        assert!((p.k(1.0, 2.5) - 9.0 * K.k(1.0, 2.5)).abs() < 1e-9);
        assert!((p.kd(2.5, 1.0) - 9.0 * K.kd(2.5, 1.0)).abs() < 1e-9);
        assert_eq!(p.dddk(0.0, 1.0), -9.0);
    }

    fn joint_gram(ts: &[f64]) -> DMatrix<f64> {
        let n = ts.len();
        DMatrix::from_fn(2 * n, 2 * n, |i, j| {
            let (a, b) = (ts[i % n], ts[j % n]);
            match (i < n, j < n) {
                (true, true) => K.k(a, b),
                (true, false) => K.kd(a, b),
                (false, true) => K.dk(a, b),
                (false, false) => K.dkd(a, b),
            }
        })
    }

    fn assert_psd(m: &DMatrix<f64>) {
        let eig = SymmetricEigen::new(m.clone()).eigenvalues;
        let max = eig.max();
        let min = eig.min();
        assert!(min >= -1e-8 * max, "min eigenvalue {min}, max {max}");
    }

    #[test]
    fn gram_matrices_are_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let n = rng.random_range(1..9);
            let mut ts: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..50.0)).collect();
            ts.sort_by(f64::total_cmp);
            ts.dedup();
            let values = DMatrix::from_fn(ts.len(), ts.len(), |i, j| K.k(ts[i], ts[j]));
            assert_psd(&values);
            assert_psd(&joint_gram(&ts));
        }
    }

    #[test]
    fn finite_difference_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let a: f64 = rng.random_range(0.5..20.0);
            let b: f64 = rng.random_range(0.5..20.0);
            if (a - b).abs() < 1e-2 {
                continue;
            }
            for h in [1e-4, 1e-5] {
                let fd_a = (K.k(a + h, b) - K.k(a - h, b)) / (2.0 * h);
                let fd_b = (K.k(a, b + h) - K.k(a, b - h)) / (2.0 * h);
                let fd_mixed = (K.kd(a + h, b) - K.kd(a - h, b)) / (2.0 * h);
                let fd_dd = (K.dk(a + h, b) - K.dk(a - h, b)) / (2.0 * h);
                let fd_ddd = (K.ddk(a + h, b) - K.ddk(a - h, b)) / (2.0 * h);
                let fd_ddkd = (K.dkd(a + h, b) - K.dkd(a - h, b)) / (2.0 * h);
                // truncation is O(h^2) with unit third derivative; the rest is rounding
                let tol = h * h + 1e-9 / h;
                assert!((fd_a - K.dk(a, b)).abs() < tol, "dk at ({a},{b})");
                assert!((fd_b - K.kd(a, b)).abs() < tol, "kd at ({a},{b})");
                assert!((fd_mixed - K.dkd(a, b)).abs() < tol, "dkd at ({a},{b})");
                assert!((fd_dd - K.ddk(a, b)).abs() < tol, "ddk at ({a},{b})");
                assert!((fd_ddd - K.dddk(a, b)).abs() < tol, "dddk at ({a},{b})");
                assert!((fd_ddkd - K.ddkd(a, b)).abs() < tol, "ddkd at ({a},{b})");
            }
        }
    }

    #[test]
    fn continuous_across_diagonal() {
        for a in [0.0, 0.3, 1.0, 7.5, 42.0] {
            let eps = 1e-13;
            for f in [KernelParams::k, KernelParams::kd, KernelParams::dk, KernelParams::dkd] {
                let left = f(&K, a, a + eps);
                let right = f(&K, a + eps, a);
                let at = f(&K, a, a);
                assert!((left - at).abs() <= 1e-12 * at.abs().max(1.0));
                assert!((right - at).abs() <= 1e-12 * at.abs().max(1.0));
            }
        }
    }
}
