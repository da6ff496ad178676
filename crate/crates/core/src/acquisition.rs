//! Candidate positions for the next evaluation and the rule choosing one.
//!
//! Candidates are the local minimizers of the posterior mean inside each
//! cell between sorted observations plus one extrapolation node beyond the
//! largest observation. Each is scored by expected improvement over the
//! best posterior mean at the data, times its Wolfe probability.

use std::fmt;
use std::str::FromStr;

use crate::bvn::{gauss_cdf, gauss_pdf};
use crate::error::{Error, Result};
use crate::surrogate::SurrogateState;
use crate::wolfe::prob_wolfe;

/// Interpolation candidates closer than this to an observation are dropped.
pub const CANDIDATE_SEPARATION: f64 = 1e-10;
/// Relative offset placing the representative point of a cell just right of
/// its left node.
pub const CELL_OFFSET: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateKind {
    Interpolation,
    Extrapolation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub t: f64,
    pub mean: f64,
    pub std: f64,
    pub ei: f64,
    pub p_wolfe: f64,
    pub kind: CandidateKind,
}

/// Score used to rank candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AcquisitionMode {
    /// Expected improvement times Wolfe probability.
    #[default]
    Product,
    EiOnly,
    PWolfeOnly,
}

impl AcquisitionMode {
    pub fn score(self, c: &Candidate) -> f64 {
        match self {
            AcquisitionMode::Product => c.ei * c.p_wolfe,
            AcquisitionMode::EiOnly => c.ei,
            AcquisitionMode::PWolfeOnly => c.p_wolfe,
        }
    }
}

impl fmt::Display for AcquisitionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AcquisitionMode::Product => "product",
            AcquisitionMode::EiOnly => "ei-only",
            AcquisitionMode::PWolfeOnly => "pwolfe-only",
        })
    }
}

impl FromStr for AcquisitionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "product" => Ok(AcquisitionMode::Product),
            "ei-only" => Ok(AcquisitionMode::EiOnly),
            "pwolfe-only" => Ok(AcquisitionMode::PWolfeOnly),
            other => Err(Error::InvalidConfig(format!(
                "unknown acquisition mode {other:?} (expected product, ei-only or pwolfe-only)"
            ))),
        }
    }
}

/// Expected amount by which a Gaussian `N(mean, std²)` undercuts `eta`.
pub fn expected_improvement(mean: f64, std: f64, eta: f64) -> f64 {
    let gap = eta - mean;
    if std <= 0.0 {
        return gap.max(0.0);
    }
    let z = gap / std;
    (gap * gauss_cdf(z) + std * gauss_pdf(z)).max(0.0)
}

/// Smallest posterior mean over the observed positions.
pub fn incumbent(state: &SurrogateState) -> f64 {
    state
        .positions()
        .iter()
        .map(|&t| state.mean(t))
        .fold(f64::INFINITY, f64::min)
}

/// Representative point of the cell `[lo, hi]`.
pub fn cell_representative(lo: f64, hi: f64) -> f64 {
    lo + CELL_OFFSET * (hi - lo)
}

/// Interior minimizer of the mean on `[lo, hi]`, if any.
pub fn cell_minimum(state: &SurrogateState, lo: f64, hi: f64) -> Option<f64> {
    let t = state.cubic_minimum(cell_representative(lo, hi))?;
    (t > lo && t < hi && t > 0.0).then_some(t)
}

fn score_position(
    state: &SurrogateState,
    t: f64,
    eta: f64,
    c1: f64,
    c2: f64,
    kind: CandidateKind,
) -> Result<Candidate> {
    let mean = state.mean(t);
    let std = state.var_f(t)?.sqrt();
    Ok(Candidate {
        t,
        mean,
        std,
        ei: expected_improvement(mean, std, eta),
        p_wolfe: prob_wolfe(state, t, c1, c2)?.p_wolfe,
        kind,
    })
}

/// Cell minima in ascending order followed by the extrapolation node at
/// `max(T) + t_ext`.
pub fn generate_candidates(
    state: &SurrogateState,
    t_ext: f64,
    c1: f64,
    c2: f64,
) -> Result<Vec<Candidate>> {
    let eta = incumbent(state);
    let sorted = state.sorted_positions();
    let mut out = Vec::with_capacity(sorted.len());
    for cell in sorted.windows(2) {
        let Some(t) = cell_minimum(state, cell[0], cell[1]) else {
            continue;
        };
        if sorted.iter().any(|&s| (s - t).abs() < CANDIDATE_SEPARATION) {
            continue;
        }
        out.push(score_position(
            state,
            t,
            eta,
            c1,
            c2,
            CandidateKind::Interpolation,
        )?);
    }
    let t_max = *sorted.last().expect("surrogate always holds the origin");
    out.push(score_position(
        state,
        t_max + t_ext,
        eta,
        c1,
        c2,
        CandidateKind::Extrapolation,
    )?);
    Ok(out)
}

/// Index of the best candidate by `mode`, first one on ties, and whether it
/// is the extrapolation node.
pub fn choose_candidate_with(
    candidates: &[Candidate],
    mode: AcquisitionMode,
) -> Result<(usize, bool)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let score = mode.score(c);
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((i, score));
        }
    }
    let (i, _) = best.ok_or(Error::EmptyCandidates)?;
    Ok((i, candidates[i].kind == CandidateKind::Extrapolation))
}

/// [`choose_candidate_with`] using the product score.
pub fn choose_candidate(candidates: &[Candidate]) -> Result<(usize, bool)> {
    choose_candidate_with(candidates, AcquisitionMode::Product)
}
