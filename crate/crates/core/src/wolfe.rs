//! Probability that the weak Wolfe conditions hold at a trial position.
//!
//! Under the GP posterior the Armijo variable `a = f(0) − f(t) + c1·t·f'(0)`
//! and the curvature variable `b = f'(t) − c2·f'(0)` are jointly Gaussian.
//! The acceptance probability is the mass of that bivariate normal in the
//! region `a ≥ 0`, `0 ≤ b ≤ b_max`, where `b_max` approximates the strong
//! curvature bound.

use crate::bvn::bvn_rectangle;
use crate::error::Result;
use crate::surrogate::SurrogateState;

/// Both constraint variances at or below this are treated as exact.
pub const DETERMINISTIC_VARIANCE: f64 = 1e-9;

/// Means and covariance of the constraint variables `(a_t, b_t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WolfeMoments {
    pub m_a: f64,
    pub m_b: f64,
    pub c_aa: f64,
    pub c_bb: f64,
    pub c_ab: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WolfeAssessment {
    pub p_wolfe: f64,
    pub m_a: f64,
    pub m_b: f64,
    /// Clamped at zero.
    pub c_aa: f64,
    /// Clamped at zero.
    pub c_bb: f64,
    pub c_ab: f64,
    /// Zero on the deterministic branch.
    pub rho: f64,
    pub deterministic: bool,
}

/// Posterior moments of `(a_t, b_t)` for constants `c1 < c2`.
pub fn wolfe_moments(state: &SurrogateState, t: f64, c1: f64, c2: f64) -> Result<WolfeMoments> {
    let mu0 = state.mean(0.0);
    let dmu0 = state.d1mean(0.0);
    let v0 = state.var_f(0.0)?;
    let vd0 = state.cov_f_df(0.0);
    let dvd0 = state.var_df(0.0)?;

    let mu = state.mean(t);
    let dmu = state.d1mean(t);
    let v = state.var_f(t)?;
    let vd = state.cov_f_df(t);
    let dvd = state.var_df(t)?;
    let o = state.cov_with_origin(t);

    let c1t = c1 * t;
    Ok(WolfeMoments {
        m_a: mu0 - mu + c1t * dmu0,
        m_b: dmu - c2 * dmu0,
        c_aa: v0 + c1t * c1t * dvd0 + v + 2.0 * (c1t * (vd0 - o.vd0f) - o.v0f),
        c_bb: c2 * c2 * dvd0 - 2.0 * c2 * o.vd0df + dvd,
        c_ab: -c2 * (vd0 + c1t * dvd0) + c2 * o.vd0f + o.v0df + c1t * o.vd0df - vd,
    })
}

/// Wolfe probability at `t` including the strong-curvature upper limit.
pub fn prob_wolfe(state: &SurrogateState, t: f64, c1: f64, c2: f64) -> Result<WolfeAssessment> {
    let WolfeMoments {
        m_a,
        m_b,
        c_aa,
        c_bb,
        c_ab,
    } = wolfe_moments(state, t, c1, c2)?;
    let mut out = WolfeAssessment {
        p_wolfe: 0.0,
        m_a,
        m_b,
        c_aa: c_aa.max(0.0),
        c_bb: c_bb.max(0.0),
        c_ab,
        rho: 0.0,
        deterministic: false,
    };

    if c_aa <= DETERMINISTIC_VARIANCE && c_bb <= DETERMINISTIC_VARIANCE {
        out.deterministic = true;
        out.p_wolfe = if m_a >= 0.0 && m_b >= 0.0 { 1.0 } else { 0.0 };
        return Ok(out);
    }
    if c_aa <= 0.0 || c_bb <= 0.0 {
        return Ok(out);
    }

    let rho = (c_ab / (c_aa * c_bb).sqrt()).clamp(-1.0, 1.0);
    out.rho = rho;
    let (sa, sb) = (c_aa.sqrt(), c_bb.sqrt());
    let dmu0 = state.d1mean(0.0);
    let dvd0 = state.var_df(0.0)?;
    let low_a = -m_a / sa;
    let low_b = -m_b / sb;
    let up_b = (2.0 * c2 * (dmu0.abs() + 2.0 * dvd0.sqrt()) - m_b) / sb;
    // c2 = 0 leaves an empty curvature window
    out.p_wolfe = if up_b > low_b {
        bvn_rectangle(low_a, f64::INFINITY, low_b, up_b, rho)?
    } else {
        0.0
    };
    Ok(out)
}

/// Strict threshold test.
pub fn is_acceptable(assessment: &WolfeAssessment, c_w: f64) -> bool {
    assessment.p_wolfe > c_w
}
