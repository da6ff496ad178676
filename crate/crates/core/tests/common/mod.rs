//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls into the crate under test except for plain data types.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

// ---------------------------------------------------------------------------
// Gaussian process with value and slope observations, built densely.

/// Observation kind at a position: the function or its derivative.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Obs {
    F,
    D,
}

/// Prior covariance of the once-integrated Wiener process started at `-tau`,
/// `cov(g(a), h(b))` with `g, h ∈ {f, f'}`, written out from the integrals
/// `f(s) = ∫ W`, `cov(W(a), W(b)) = min(a, b) + tau`.
pub fn prior_cov(tau: f64, ka: Obs, a: f64, kb: Obs, b: f64) -> f64 {
    let (x, y) = (a + tau, b + tau);
    match (ka, kb) {
        (Obs::D, Obs::D) => x.min(y),
        // ∫_0^x min(s, y) ds
        (Obs::F, Obs::D) => {
            if x <= y {
                x * x / 2.0
            } else {
                y * y / 2.0 + y * (x - y)
            }
        }
        (Obs::D, Obs::F) => prior_cov(tau, Obs::F, b, Obs::D, a),
        // ∫_0^x ∫_0^y min(s, u) du ds
        (Obs::F, Obs::F) => {
            let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
            lo * lo * lo / 3.0 + (hi - lo) * lo * lo / 2.0
        }
    }
}

/// Dense posterior over `(f, f')` given noisy observations.
pub struct DenseGp {
    pub tau: f64,
    pub points: Vec<(Obs, f64)>,
    pub inverse: DMatrix<f64>,
    pub alpha: DVector<f64>,
}

impl DenseGp {
    pub fn new(tau: f64, t: &[f64], y: &[f64], dy: &[f64], sf: f64, sdf: f64) -> Self {
        let n = t.len();
        let mut points = Vec::with_capacity(2 * n);
        points.extend(t.iter().map(|&s| (Obs::F, s)));
        points.extend(t.iter().map(|&s| (Obs::D, s)));
        let mut g = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
            let (ki, ti) = points[i];
            let (kj, tj) = points[j];
            prior_cov(tau, ki, ti, kj, tj)
        });
        for i in 0..n {
            g[(i, i)] += sf * sf;
            g[(n + i, n + i)] += sdf * sdf;
        }
        let inverse = g.try_inverse().expect("gram matrix must be invertible");
        let obs = DVector::from_iterator(2 * n, y.iter().chain(dy).copied());
        let alpha = &inverse * obs;
        Self {
            tau,
            points,
            inverse,
            alpha,
        }
    }

    fn cross(&self, k: Obs, t: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.points.len(),
            self.points.iter().map(|&(kp, tp)| prior_cov(self.tau, k, t, kp, tp)),
        )
    }

    pub fn mean(&self, k: Obs, t: f64) -> f64 {
        self.cross(k, t).dot(&self.alpha)
    }

    pub fn cov(&self, ka: Obs, a: f64, kb: Obs, b: f64) -> f64 {
        let ca = self.cross(ka, a);
        let cb = self.cross(kb, b);
        prior_cov(self.tau, ka, a, kb, b) - ca.dot(&(&self.inverse * cb))
    }

    /// Mean and covariance of `(a, b)` for the two Wolfe constraints at `t`,
    /// obtained as a linear map of the joint posterior of
    /// `(f(0), f'(0), f(t), f'(t))`.
    pub fn wolfe_moments(&self, t: f64, c1: f64, c2: f64) -> (f64, f64, f64, f64, f64) {
        let vars = [(Obs::F, 0.0), (Obs::D, 0.0), (Obs::F, t), (Obs::D, t)];
        let mu = DVector::from_iterator(4, vars.iter().map(|&(k, s)| self.mean(k, s)));
        let sigma = DMatrix::from_fn(4, 4, |i, j| {
            self.cov(vars[i].0, vars[i].1, vars[j].0, vars[j].1)
        });
        let l = DMatrix::from_row_slice(2, 4, &[1.0, c1 * t, -1.0, 0.0, 0.0, -c2, 0.0, 1.0]);
        let m = &l * mu;
        let c = &l * sigma * l.transpose();
        (m[0], m[1], c[(0, 0)], c[(1, 1)], c[(0, 1)])
    }
}

// ---------------------------------------------------------------------------
// Bivariate normal rectangle by adaptive quadrature.

fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal CDF through `statrs`, a separate error function
/// implementation from the one behind the crate's `gauss_cdf`.
pub fn normal_cdf(x: f64) -> f64 {
    if x.is_infinite() {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Adaptive Gauss–Kronrod (7/15) integration on `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    const XGK: [f64; 8] = [
        0.991_455_371_120_812_6,
        0.949_107_912_342_758_5,
        0.864_864_423_359_769_1,
        0.741_531_185_599_394_4,
        0.586_087_235_467_691_1,
        0.405_845_151_377_397_2,
        0.207_784_955_007_898_5,
        0.0,
    ];
    const WGK: [f64; 8] = [
        0.022_935_322_010_529_22,
        0.063_092_092_629_978_55,
        0.104_790_010_322_250_2,
        0.140_653_259_715_525_9,
        0.169_004_726_639_267_9,
        0.190_350_578_064_785_4,
        0.204_432_940_075_298_9,
        0.209_482_141_084_728,
    ];
    const WG: [f64; 4] = [
        0.129_484_966_168_869_7,
        0.279_705_391_489_276_7,
        0.381_830_050_505_118_9,
        0.417_959_183_673_469_4,
    ];
    fn rule(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let fc = f(c);
        let mut kron = WGK[7] * fc;
        let mut gauss = WG[3] * fc;
        for j in 0..7 {
            let v = f(c - h * XGK[j]) + f(c + h * XGK[j]);
            kron += WGK[j] * v;
            if j % 2 == 1 {
                gauss += WG[j / 2] * v;
            }
        }
        (kron * h, ((kron - gauss) * h).abs())
    }
    fn recurse(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, err) = rule(f, a, b);
        if err <= tol || depth == 0 || (b - a) < 1e-12 {
            return v;
        }
        let m = 0.5 * (a + b);
        recurse(f, a, m, tol / 2.0, depth - 1) + recurse(f, m, b, tol / 2.0, depth - 1)
    }
    recurse(f, a, b, tol, 40)
}

/// `P(xl ≤ X ≤ xu, yl ≤ Y ≤ yu)` for a standard bivariate normal with
/// correlation `rho`, integrating the conditional distribution of `Y`.
pub fn bvn_quadrature(xl: f64, xu: f64, yl: f64, yu: f64, rho: f64) -> f64 {
    let (lo, hi) = (xl.max(-12.0), xu.min(12.0));
    if lo >= hi {
        return 0.0;
    }
    let s = (1.0 - rho * rho).sqrt();
    let inner = |x: f64| {
        let up = if yu.is_infinite() { yu } else { (yu - rho * x) / s };
        let low = if yl.is_infinite() { yl } else { (yl - rho * x) / s };
        phi(x) * (normal_cdf(up) - normal_cdf(low)).max(0.0)
    };
    // split where the conditional window moves fastest
    let mut cuts = vec![lo, hi];
    for edge in [yl, yu] {
        if edge.is_finite() && rho != 0.0 {
            let c = edge / rho;
            if c > lo && c < hi {
                cuts.push(c);
            }
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.windows(2).map(|w| integrate(&inner, w[0], w[1], 1e-13)).sum()
}

// ---------------------------------------------------------------------------
// Batch statistics by the textbook two-pass formulas.

/// Mean and variance of the mean, `Σ(v − v̄)²/(m(m − 1))`.
pub fn two_pass(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, ss / (m * (m - 1.0)))
}

/// `dᵀ S d` with `S` the unbiased sample covariance of the rows divided by `m`.
pub fn dense_projected_variance(grads: &DMatrix<f64>, d: &DVector<f64>) -> f64 {
    let m = grads.nrows();
    let dim = grads.ncols();
    let mean = DVector::from_fn(dim, |j, _| grads.column(j).sum() / m as f64);
    let mut s = DMatrix::zeros(dim, dim);
    for k in 0..m {
        let r = grads.row(k).transpose() - &mean;
        s += &r * r.transpose();
    }
    s /= (m - 1) as f64 * m as f64;
    (d.transpose() * s * d)[(0, 0)]
}

// ---------------------------------------------------------------------------
// Deterministic test objectives.

use probls::noise::BatchEvaluation;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `Σ aᵢ(xᵢ − cᵢ)²/2 + bᵢ cos(xᵢ)` with `|bᵢ| < aᵢ`, strictly convex and
/// smooth.
#[derive(Debug, Clone)]
pub struct SmoothObjective {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub scale: f64,
}

impl SmoothObjective {
    pub fn random(seed: u64, dim: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<f64> = (0..dim).map(|_| rng.random_range(0.2..5.0)).collect();
        let b = a.iter().map(|&ai| rng.random_range(-0.9..0.9) * ai).collect();
        let c = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
        Self { a, b, c, scale: 1.0 }
    }

    pub fn value_grad(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let mut f = 0.0;
        let mut g = DVector::zeros(x.len());
        for i in 0..x.len() {
            let r = x[i] - self.c[i];
            f += 0.5 * self.a[i] * r * r + self.b[i] * x[i].cos();
            g[i] = self.a[i] * r - self.b[i] * x[i].sin();
        }
        (self.scale * f, g * self.scale)
    }

    /// Noise-free batch at `x`.
    pub fn batch(&self, x: &DVector<f64>) -> BatchEvaluation {
        let (loss, grad) = self.value_grad(x);
        let d = grad.len();
        BatchEvaluation {
            loss,
            grad,
            var_loss: 0.0,
            var_grad: DVector::zeros(d),
            batch_size: 1,
            exact_projected_var: None,
        }
    }
}
