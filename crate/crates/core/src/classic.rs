//! Deterministic Wolfe test and two-point cubic Hermite interpolation, the
//! noise-free reference for the probabilistic routines.

use crate::error::{Error, Result};

/// Smallest interval accepted by [`classic_cubic_interpolant`].
pub const MIN_INTERVAL: f64 = 1e-14;

/// Weak (or strong, if `strong`) Wolfe conditions at step `t`.
#[allow(clippy::too_many_arguments)]
pub fn classic_wolfe_check(
    f0: f64,
    df0: f64,
    ft: f64,
    dft: f64,
    t: f64,
    c1: f64,
    c2: f64,
    strong: bool,
) -> bool {
    let armijo = ft <= f0 + c1 * t * df0;
    let curvature = if strong {
        dft.abs() <= c2 * df0.abs()
    } else {
        dft >= c2 * df0
    };
    armijo && curvature
}

/// The cubic through `(t_a, f_a)` and `(t_b, f_b)` with slopes `df_a` and
/// `df_b`, evaluated at `t`.
pub fn classic_cubic_interpolant(
    t_a: f64,
    f_a: f64,
    df_a: f64,
    t_b: f64,
    f_b: f64,
    df_b: f64,
    t: f64,
) -> Result<f64> {
    let h = t_b - t_a;
    if h.is_nan() || h < MIN_INTERVAL {
        return Err(Error::DegenerateInterval(h));
    }
    let s = (t - t_a) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    Ok(h00 * f_a + h10 * h * df_a + h01 * f_b + h11 * h * df_b)
}
