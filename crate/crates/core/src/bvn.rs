//! Standard normal helpers and rectangle probabilities of the standard
//! bivariate normal distribution.
//!
//! The orthant routine follows Drezner & Wesolowsky (1990) in the refined
//! form of Genz's TVPACK `BVND`: Gauss–Legendre quadrature over `asin(ρ)`
//! for moderate correlations and a series plus transformed quadrature for
//! `|ρ| ≥ 0.925`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

/// Standard normal cumulative distribution function.
#[inline]
pub fn gauss_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal density.
#[inline]
pub fn gauss_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / TWO_PI.sqrt()
}

// Positive halves of the 6, 12 and 20 point Gauss–Legendre rules on [-1, 1].
const GL6: ([f64; 3], [f64; 3]) = (
    [0.932469514203152, 0.6612093864662645, 0.23861918608319693],
    [0.17132449237916975, 0.36076157304813894, 0.46791393457269137],
);
const GL12: ([f64; 6], [f64; 6]) = (
    [
        0.9815606342467192,
        0.9041172563704748,
        0.7699026741943047,
        0.5873179542866175,
        0.3678314989981802,
        0.1252334085114689,
    ],
    [
        0.04717533638651202,
        0.10693932599531888,
        0.1600783285433461,
        0.20316742672306565,
        0.23349253653835464,
        0.2491470458134027,
    ],
);
const GL20: ([f64; 10], [f64; 10]) = (
    [
        0.9931285991850949,
        0.9639719272779138,
        0.9122344282513258,
        0.8391169718222188,
        0.7463319064601508,
        0.636053680726515,
        0.5108670019508271,
        0.37370608871541955,
        0.2277858511416451,
        0.07652652113349734,
    ],
    [
        0.017614007139153273,
        0.04060142980038622,
        0.06267204833410944,
        0.08327674157670467,
        0.10193011981724026,
        0.11819453196151825,
        0.13168863844917653,
        0.14209610931838187,
        0.14917298647260366,
        0.15275338713072578,
    ],
);

fn rule(r: f64) -> (&'static [f64], &'static [f64]) {
    let r = r.abs();
    if r < 0.3 {
        (&GL6.0, &GL6.1)
    } else if r < 0.75 {
        (&GL12.0, &GL12.1)
    } else {
        (&GL20.0, &GL20.1)
    }
}

/// `P(A > h, B > k)` for a standard bivariate normal with correlation `r`,
/// `|r| < 1`. Infinite limits are allowed.
fn upper_orthant(h: f64, k: f64, r: f64) -> f64 {
    if h == f64::INFINITY || k == f64::INFINITY {
        return 0.0;
    }
    if h == f64::NEG_INFINITY {
        return if k == f64::NEG_INFINITY {
            1.0
        } else {
            gauss_cdf(-k)
        };
    }
    if k == f64::NEG_INFINITY {
        return gauss_cdf(-h);
    }
    if r == 0.0 {
        return gauss_cdf(-h) * gauss_cdf(-k);
    }

    let (nodes, weights) = rule(r);
    let mut hk = h * k;
    let mut bvn = 0.0;

    if r.abs() < 0.925 {
        // Integrate the density derivative over θ ∈ [0, asin r], nodes at 1 ± x.
        let hs = 0.5 * (h * h + k * k);
        let asr = 0.5 * r.asin();
        for (&x, &w) in nodes.iter().zip(weights) {
            for sn in [(asr * (1.0 - x)).sin(), (asr * (1.0 + x)).sin()] {
                bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        bvn = bvn * asr / TWO_PI + gauss_cdf(-h) * gauss_cdf(-k);
    } else {
        let mut k = k;
        if r < 0.0 {
            k = -k;
            hk = -hk;
        }
        let a_s = (1.0 - r) * (1.0 + r);
        let mut a = a_s.sqrt();
        let bs = (h - k) * (h - k);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        let asr = -0.5 * (bs / a_s + hk);
        if asr > -100.0 {
            bvn = a
                * asr.exp()
                * (1.0 - c * (bs - a_s) * (1.0 - d * bs / 5.0) / 3.0 + c * d * a_s * a_s / 5.0);
        }
        if hk > -160.0 {
            let b = bs.sqrt();
            bvn -= (-0.5 * hk).exp()
                * TWO_PI.sqrt()
                * gauss_cdf(-b / a)
                * b
                * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
        }
        a *= 0.5;
        for (&x, &w) in nodes.iter().zip(weights) {
            for xi in [1.0 - x, 1.0 + x] {
                let xs = (a * xi) * (a * xi);
                let asr = -0.5 * (bs / xs + hk);
                if asr > -100.0 {
                    let rs = (1.0 - xs).sqrt();
                    let ep = (-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs;
                    let sp = 1.0 + c * xs * (1.0 + d * xs);
                    bvn += a * w * asr.exp() * (ep - sp);
                }
            }
        }
        bvn = -bvn / TWO_PI;
        if r > 0.0 {
            bvn += gauss_cdf(-h.max(k));
        } else {
            bvn = -bvn + (gauss_cdf(-h) - gauss_cdf(-k)).max(0.0);
        }
    }
    bvn.clamp(0.0, 1.0)
}

/// Probability that a standard bivariate normal pair with correlation `rho`
/// falls into `[xl, xu] × [yl, yu]`. Limits may be infinite.
pub fn bvn_rectangle(xl: f64, xu: f64, yl: f64, yu: f64, rho: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::InvalidCorrelation(rho));
    }
    for (lower, upper) in [(xl, xu), (yl, yu)] {
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(Error::InvalidLimits { lower, upper });
        }
    }

    let p = if rho == 1.0 {
        interval(xl.max(yl), xu.min(yu))
    } else if rho == -1.0 {
        interval(xl.max(-yu), xu.min(-yl))
    } else {
        upper_orthant(xl, yl, rho) - upper_orthant(xu, yl, rho) - upper_orthant(xl, yu, rho)
            + upper_orthant(xu, yu, rho)
    };
    Ok(p.clamp(0.0, 1.0))
}

fn interval(lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        0.0
    } else if lo >= 0.0 {
        gauss_cdf(-lo) - gauss_cdf(-hi)
    } else {
        gauss_cdf(hi) - gauss_cdf(lo)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const INF: f64 = f64::INFINITY;

    #[test]
    fn normal_helpers() {
        assert_eq!(gauss_cdf(0.0), 0.5);
        assert!((gauss_pdf(0.0) - 0.3989422804014327).abs() < 1e-15);
        for z in [0.1, 1.0, 2.5, 6.0] {
            assert!((gauss_cdf(z) + gauss_cdf(-z) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn orthant_values() {
        let full = bvn_rectangle(-INF, INF, -INF, INF, 0.7).unwrap();
        assert!((full - 1.0).abs() < 1e-12);
        let p0 = bvn_rectangle(0.0, INF, 0.0, INF, 0.0).unwrap();
        assert!((p0 - 0.25).abs() < 1e-12);
        let p5 = bvn_rectangle(0.0, INF, 0.0, INF, 0.5).unwrap();
        assert!((p5 - 1.0 / 3.0).abs() < 1e-12);
        let p1 = bvn_rectangle(0.0, INF, 0.0, INF, 1.0).unwrap();
        assert!((p1 - 0.5).abs() < 1e-12);
        let pm1 = bvn_rectangle(0.0, INF, 0.0, INF, -1.0).unwrap();
        assert_eq!(pm1, 0.0);
    }

    #[test]
    fn orthant_formula_across_rho() {
        for i in -99..=99 {
            let rho = i as f64 / 100.0;
            let exact = 0.25 + rho.asin() / TWO_PI;
            let p = bvn_rectangle(0.0, INF, 0.0, INF, rho).unwrap();
            assert!((p - exact).abs() < 1e-12, "rho {rho}: {p} vs {exact}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            bvn_rectangle(0.0, 1.0, 0.0, 1.0, 1.5),
            Err(Error::InvalidCorrelation(_))
        ));
        assert!(matches!(
            bvn_rectangle(1.0, 0.0, 0.0, 1.0, 0.1),
            Err(Error::InvalidLimits { .. })
        ));
        assert!(matches!(
            bvn_rectangle(0.0, 1.0, 2.0, 1.0, 0.1),
            Err(Error::InvalidLimits { .. })
        ));
    }

    fn limit() -> impl Strategy<Value = f64> {
        prop_oneof![1 => Just(-INF), 1 => Just(INF), 8 => -5.0..5.0f64]
    }

    fn ordered() -> impl Strategy<Value = (f64, f64)> {
        (limit(), limit()).prop_map(|(a, b)| if a <= b { (a, b) } else { (b, a) })
    }

    proptest! {
        #[test]
        fn additivity((xl, xu) in ordered(), (yl, yu) in ordered(), s in 0.0..1.0f64, rho in -0.999..0.999f64) {
            let xm = if xl.is_finite() && xu.is_finite() {
                xl + s * (xu - xl)
            } else {
                (10.0 * s - 5.0).clamp(xl, xu)
            };
            let left = bvn_rectangle(xl, xm, yl, yu, rho).unwrap();
            let right = bvn_rectangle(xm, xu, yl, yu, rho).unwrap();
            let whole = bvn_rectangle(xl, xu, yl, yu, rho).unwrap();
            prop_assert!((left + right - whole).abs() < 1e-7);
        }

        #[test]
        fn marginalization((xl, xu) in ordered(), rho in -1.0..=1.0f64) {
            let p = bvn_rectangle(xl, xu, -INF, INF, rho).unwrap();
            let m = gauss_cdf(xu) - gauss_cdf(xl);
            prop_assert!((p - m).abs() < 1e-8);
        }

        #[test]
        fn argument_symmetry((xl, xu) in ordered(), (yl, yu) in ordered(), rho in -1.0..=1.0f64) {
            let a = bvn_rectangle(xl, xu, yl, yu, rho).unwrap();
            let b = bvn_rectangle(yl, yu, xl, xu, rho).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
