mod common;

use common::{bvn_quadrature, dense_projected_variance, integrate, two_pass, DenseGp, Obs};
use nalgebra::{DMatrix, DVector};
use probls::bvn::{bvn_rectangle, gauss_cdf};
use probls::classic::classic_cubic_interpolant;
use probls::kernel::KernelParams;
use probls::noise::{batch_statistics, exact_projected_variance, project_variance};
use probls::surrogate::SurrogateState;
use probls::wolfe::wolfe_moments;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Posterior second moments are differences of prior terms of size
/// `k(t, t)`, so they are compared on that scale.
fn close_on_scale(a: f64, b: f64, scale: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * scale.max(1.0)
}

struct RandomState {
    t: Vec<f64>,
    y: Vec<f64>,
    dy: Vec<f64>,
    sf: f64,
    sdf: f64,
}

fn random_state(rng: &mut ChaCha8Rng, noisy: bool) -> RandomState {
    let n = rng.random_range(1..=6);
    let mut t = vec![0.0];
    while t.len() <= n {
        let s: f64 = rng.random_range(0.05..8.0);
        if t.iter().all(|&u| (u - s).abs() > 0.05) {
            t.push(s);
        }
    }
    let y = t.iter().map(|_| rng.random_range(-2.0..2.0)).collect();
    let mut dy: Vec<f64> = t.iter().map(|_| rng.random_range(-2.0..2.0)).collect();
    dy[0] = -1.0;
    let (sf, sdf) = if noisy {
        (rng.random_range(0.01..1.0), rng.random_range(0.01..1.0))
    } else {
        (0.0, 0.0)
    };
    RandomState { t, y, dy, sf, sdf }
}

fn build(r: &RandomState) -> SurrogateState {
    let mut s = SurrogateState::with_origin(KernelParams::new(10.0, 1.0), r.sf, r.sdf, r.y[0], r.dy[0])
        .unwrap();
    for i in 1..r.t.len() {
        s.add_observation(r.t[i], r.y[i], r.dy[i]).unwrap();
    }
    s
}

#[test]
fn prior_covariance_matches_kernel() {
    let k = KernelParams::new(10.0, 1.0);
    for &(a, b) in &[(0.0, 0.0), (0.3, 2.0), (2.0, 0.3), (5.0, 5.0), (1.0, 7.5)] {
        assert!(close(k.k(a, b), common::prior_cov(10.0, Obs::F, a, Obs::F, b), 1e-14));
        assert!(close(k.kd(a, b), common::prior_cov(10.0, Obs::F, a, Obs::D, b), 1e-14));
        assert!(close(k.dk(a, b), common::prior_cov(10.0, Obs::D, a, Obs::F, b), 1e-14));
        assert!(close(k.dkd(a, b), common::prior_cov(10.0, Obs::D, a, Obs::D, b), 1e-14));
    }
}

#[test]
fn posterior_matches_dense_gp() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let r = random_state(&mut rng, true);
        let s = build(&r);
        let gp = DenseGp::new(10.0, &r.t, &r.y, &r.dy, r.sf, r.sdf);
        for _ in 0..10 {
            let t: f64 = rng.random_range(0.0..10.0);
            assert!(close(s.mean(t), gp.mean(Obs::F, t), 1e-9), "mean at {t}");
            assert!(close(s.d1mean(t), gp.mean(Obs::D, t), 1e-9), "slope at {t}");
            let scale = KernelParams::new(10.0, 1.0).k(t, t);
            let near = |a: f64, b: f64| close_on_scale(a, b, scale, 1e-9);
            assert!(near(s.var_f(t).unwrap(), gp.cov(Obs::F, t, Obs::F, t).max(0.0)));
            assert!(near(s.var_df(t).unwrap(), gp.cov(Obs::D, t, Obs::D, t).max(0.0)));
            assert!(near(s.cov_f_df(t), gp.cov(Obs::F, t, Obs::D, t)));
            let o = s.cov_with_origin(t);
            assert!(near(o.v0f, gp.cov(Obs::F, 0.0, Obs::F, t)));
            assert!(near(o.vd0f, gp.cov(Obs::D, 0.0, Obs::F, t)));
            assert!(near(o.v0df, gp.cov(Obs::F, 0.0, Obs::D, t)));
            assert!(near(o.vd0df, gp.cov(Obs::D, 0.0, Obs::D, t)));
        }
    }
}

#[test]
fn noise_free_mean_is_hermite_interpolant() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..50 {
        let mut r = random_state(&mut rng, false);
        // observations of a smooth function rather than unrelated values
        let (a, w, phase, b) = (
            rng.random_range(0.1..2.0),
            rng.random_range(0.2..2.0),
            rng.random_range(0.0..6.0),
            rng.random_range(-0.5..0.5),
        );
        let f = |t: f64| a * (w * t + phase).sin() + b * t * t;
        let df = |t: f64| a * w * (w * t + phase).cos() + 2.0 * b * t;
        r.y = r.t.iter().map(|&t| f(t)).collect();
        r.dy = r.t.iter().map(|&t| df(t)).collect();
        let s = build(&r);
        let mut idx: Vec<usize> = (0..r.t.len()).collect();
        idx.sort_by(|&a, &b| r.t[a].partial_cmp(&r.t[b]).unwrap());
        for w in idx.windows(2) {
            let (a, b) = (w[0], w[1]);
            for k in 1..10 {
                let t = r.t[a] + (r.t[b] - r.t[a]) * k as f64 / 10.0;
                let want = classic_cubic_interpolant(r.t[a], r.y[a], r.dy[a], r.t[b], r.y[b], r.dy[b], t)
                    .unwrap();
                assert!(close(s.mean(t), want, 1e-8), "{} vs {want} at {t}", s.mean(t));
            }
        }
    }
}

#[test]
fn higher_derivatives_match_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let noisy = rng.random_bool(0.5);
        let r = random_state(&mut rng, noisy);
        let s = build(&r);
        let mut cells = s.sorted_positions();
        cells.push(cells.last().unwrap() + 3.0);
        for w in cells.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let t = 0.5 * (lo + hi);
            let h = 1e-3 * (hi - lo);
            // the mean is cubic inside a cell, so central differences of the
            // slope are exact up to rounding
            let d2 = (s.d1mean(t + h) - s.d1mean(t - h)) / (2.0 * h);
            let d3 = (s.d1mean(t + h) - 2.0 * s.d1mean(t) + s.d1mean(t - h)) / (h * h);
            assert!(close(s.d2mean(t), d2, 1e-6), "d2 {} vs {d2}", s.d2mean(t));
            assert!(close(s.d3mean(t), d3, 1e-3), "d3 {} vs {d3}", s.d3mean(t));
        }
    }
}

#[test]
fn wolfe_moments_match_joint_posterior() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..50 {
        let r = random_state(&mut rng, true);
        let s = build(&r);
        let gp = DenseGp::new(10.0, &r.t, &r.y, &r.dy, r.sf, r.sdf);
        for _ in 0..5 {
            let t: f64 = rng.random_range(0.01..10.0);
            let w = wolfe_moments(&s, t, 0.05, 0.5).unwrap();
            let (ma, mb, caa, cbb, cab) = gp.wolfe_moments(t, 0.05, 0.5);
            assert!(close(w.m_a, ma, 1e-9));
            assert!(close(w.m_b, mb, 1e-9));
            let scale = KernelParams::new(10.0, 1.0).k(t, t);
            assert!(close_on_scale(w.c_aa, caa, scale, 1e-9), "caa {} vs {caa}", w.c_aa);
            assert!(close_on_scale(w.c_bb, cbb, scale, 1e-9));
            assert!(close_on_scale(w.c_ab, cab, scale, 1e-9));
        }
    }
}

#[test]
fn quadrature_sanity() {
    let v = integrate(&|x: f64| x.exp(), 0.0, 1.0, 1e-14);
    assert!((v - (1f64.exp() - 1.0)).abs() < 1e-14);
    let v = integrate(&|x: f64| x.powi(20), -1.0, 1.0, 1e-14);
    assert!((v - 2.0 / 21.0).abs() < 1e-14);
    // statrs' erfc is good to about 1e-11, far below the bvn tolerance
    assert!((common::normal_cdf(1.3) - gauss_cdf(1.3)).abs() < 1e-10);
    // orthant under independence
    assert!((bvn_quadrature(0.0, f64::INFINITY, 0.0, f64::INFINITY, 0.0) - 0.25).abs() < 1e-10);
    let r: f64 = 0.5;
    let want = 0.25 + r.asin() / (2.0 * std::f64::consts::PI);
    assert!((bvn_quadrature(0.0, f64::INFINITY, 0.0, f64::INFINITY, r) - want).abs() < 1e-10);
}

#[test]
fn bvn_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..100 {
        let rho = match i % 4 {
            0 => rng.random_range(-0.9..0.9),
            1 => 0.95,
            2 => -0.99,
            _ => 0.999,
        };
        let xl: f64 = rng.random_range(-4.0..3.0);
        let yl: f64 = rng.random_range(-4.0..3.0);
        let xu = if rng.random_bool(0.5) { f64::INFINITY } else { xl + rng.random_range(0.1..4.0) };
        let yu = if rng.random_bool(0.5) { f64::INFINITY } else { yl + rng.random_range(0.1..4.0) };
        let got = bvn_rectangle(xl, xu, yl, yu, rho).unwrap();
        let want = bvn_quadrature(xl, xu, yl, yu, rho);
        assert!((got - want).abs() < 1e-6, "{xl} {xu} {yl} {yu} {rho}: {got} vs {want}");
    }
}

#[test]
fn batch_statistics_match_two_pass() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let m = rng.random_range(2..40);
        let d = rng.random_range(1..6);
        let offset = rng.random_range(-1e3..1e3);
        let losses: Vec<f64> = (0..m).map(|_| offset + rng.random_range(-1.0..1.0)).collect();
        let grads = DMatrix::from_fn(m, d, |_, _| rng.random_range(-5.0..5.0));
        let b = batch_statistics(&losses, &grads).unwrap();
        let (mean, var) = two_pass(&losses);
        assert!(close(b.loss, mean, 1e-10));
        assert!((b.var_loss - var).abs() <= 1e-10 * var.max(1.0));
        for j in 0..d {
            let col: Vec<f64> = grads.column(j).iter().copied().collect();
            let (gm, gv) = two_pass(&col);
            assert!(close(b.grad[j], gm, 1e-10));
            assert!((b.var_grad[j] - gv).abs() <= 1e-10 * gv.max(1.0));
        }
    }
}

#[test]
fn projected_variance_matches_dense_covariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let m = rng.random_range(2..30);
        let d = rng.random_range(1..8);
        let grads = DMatrix::from_fn(m, d, |_, _| rng.random_range(-3.0..3.0));
        let dir = DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
        let got = exact_projected_variance(&grads, &dir).unwrap();
        let want = dense_projected_variance(&grads, &dir);
        assert!((got - want).abs() <= 1e-9 * want.max(1.0));
    }
}

#[test]
fn diagonal_projection_is_exact_for_uncorrelated_coordinates() {
    // rows ±e_j patterns give a sample covariance that is exactly diagonal
    let grads = DMatrix::from_row_slice(
        4,
        2,
        &[1.0, 1.0, -1.0, 1.0, 1.0, -1.0, -1.0, -1.0],
    );
    let b = batch_statistics(&[0.0, 1.0, 2.0, 3.0], &grads).unwrap();
    let dir = DVector::from_vec(vec![0.7, -1.3]);
    let diag = project_variance(&b.var_grad, &dir).unwrap();
    let full = exact_projected_variance(&grads, &dir).unwrap();
    assert!((diag - full).abs() < 1e-15);
}
