//! Besov sequence norms and the level/threshold schedules of the
//! convergence theory: the linear-estimator level rule, the gradient-case
//! level rule, and the hard-thresholding parameters
//! `(s', epsilon, alpha, j0, j1, K0, lambda_j)`.

use crate::error::{Error, Result};
use crate::estimator::CoefficientSet;
use crate::wavelet::{DilationMatrix, WaveletBasis};
use serde::{Deserialize, Serialize};

/// Smoothness class parameters; `p` and `q` may be `f64::INFINITY` with the
/// usual sup-norm conventions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesovParams {
    pub s: f64,
    pub p: f64,
    pub q: f64,
    /// norm bound K of the class F_{s,p,q}(K, A)
    pub norm_bound: f64,
    /// support box, None for unbounded domains
    pub support: Option<(Vec<f64>, Vec<f64>)>,
}

impl BesovParams {
    pub fn new(s: f64, p: f64, q: f64) -> Self {
        BesovParams { s, p, q, norm_bound: f64::INFINITY, support: None }
    }
}

/// Derived quantities of the hard-thresholding theory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub p_prime: f64,
    pub s_prime: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub j0: i32,
    pub j1: i32,
    pub k0: f64,
    /// thresholds for levels j0 <= j < j1
    pub lambda_bar: Vec<f64>,
}

/// Floor with a relative tolerance: dyadic-izing logarithms of exact powers
/// lands a hair under the integer, which must not round down a level.
fn floor_tol(x: f64) -> f64 {
    (x + 1e-9 * x.abs().max(1.0)).floor()
}

fn inv(p: f64) -> f64 {
    if p.is_infinite() {
        0.0
    } else {
        1.0 / p
    }
}

fn lp_norm(values: impl Iterator<Item = f64>, p: f64) -> f64 {
    if p.is_infinite() {
        values.fold(0.0f64, |acc, v| acc.max(v.abs()))
    } else {
        values.map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// The sequence-space Besov norm of the stored coefficients:
/// `||theta||_p + (sum_k sum_j |M|^{j(s+1/2-1/p)q} ||upsilon_{k,j,.}||_p^q)^{1/q}`
/// over the stored truncation, with sup conventions when `p` or `q` is
/// infinite. An empty coefficient set has norm zero.
pub fn besov_seq_norm(coeffs: &CoefficientSet, params: &BesovParams, basis: &WaveletBasis) -> f64 {
    if coeffs.theta.is_empty() && coeffs.details.is_empty() {
        log::warn!("besov_seq_norm called on an empty coefficient set");
        return 0.0;
    }
    let det = basis.det();
    let exponent = params.s + 0.5 - inv(params.p);
    let theta_part = lp_norm(coeffs.theta.values().copied(), params.p);

    let mut q_sum = 0.0f64;
    let mut q_sup = 0.0f64;
    for (&j, per_k) in &coeffs.details {
        let weight = det.powf(j as f64 * exponent);
        for map in per_k {
            if map.is_empty() {
                continue;
            }
            let term = weight * lp_norm(map.values().copied(), params.p);
            if params.q.is_infinite() {
                q_sup = q_sup.max(term);
            } else {
                q_sum += term.powf(params.q);
            }
        }
    }
    let detail_part =
        if params.q.is_infinite() { q_sup } else { q_sum.powf(inv(params.q)) };
    theta_part + detail_part
}

/// Besov smoothness of an `r`-Hoelder function under the given dilation:
/// `s = r ln(zeta_min) / (d ln(zeta_max))`, which is `r/d` for `M = 2I`.
pub fn holder_embedding_s(r: f64, d: usize, dilation: &DilationMatrix) -> f64 {
    assert!(r > 0.0 && r <= 1.0, "Hoelder exponent must lie in (0, 1]");
    r * dilation.zeta_min().ln() / (d as f64 * dilation.zeta_max().ln())
}

/// Largest level with `|M|^j <= target`, never below zero.
fn level_for(target: f64, det: f64) -> i32 {
    if target <= 1.0 {
        return 0;
    }
    let mut j = floor_tol(target.ln() / det.ln()) as i32;
    // guard the tolerant floor against boundary rounding
    while det.powi(j + 1) <= target * (1.0 + 1e-12) {
        j += 1;
    }
    while j > 0 && det.powi(j) > target * (1.0 + 1e-12) {
        j -= 1;
    }
    j.max(0)
}

/// The linear-estimator level: the unique `j >= 0` with
/// `|M|^j <= |I_n|^{1/(2s'+1)} < |M|^{j+1}`.
pub fn linear_level(s_prime: f64, cardinality: usize, dilation: &DilationMatrix) -> i32 {
    assert!(s_prime > 0.0);
    let target = (cardinality as f64).powf(1.0 / (2.0 * s_prime + 1.0));
    level_for(target, dilation.det_abs())
}

/// The level rule for densities with bounded gradient:
/// `j = j_offset + floor(ln|I_n| / (2 ln zeta_min + d ln zeta_max))`.
pub fn differentiable_level(
    cardinality: usize,
    d: usize,
    dilation: &DilationMatrix,
    j_offset: i32,
) -> i32 {
    assert!(cardinality >= 1);
    let denom = 2.0 * dilation.zeta_min().ln() + d as f64 * dilation.zeta_max().ln();
    j_offset + floor_tol((cardinality as f64).ln() / denom) as i32
}

/// The pure exponent formulas of the thresholding schedule:
/// `s' = s + (1/p' - 1/p) ^ 0`, `epsilon = sp - (p'-p)/2` and the rate
/// exponent `alpha` with its two regimes.
pub fn thresholding_exponents(s: f64, p: f64, p_prime: f64) -> (f64, f64, f64) {
    let s_prime = s + (inv(p_prime) - inv(p)).min(0.0);
    let epsilon = if p.is_infinite() { f64::INFINITY } else { s * p - (p_prime - p) / 2.0 };
    let alpha = if epsilon >= 0.0 {
        s / (2.0 * s + 1.0)
    } else {
        s_prime / (2.0 * s + 1.0 - 2.0 * inv(p))
    };
    (s_prime, epsilon, alpha)
}

/// All hard-thresholding schedule parameters for an estimation problem:
/// the regime discriminant `epsilon = sp - (p'-p)/2`, the rate exponent
/// `alpha`, the levels `j0, j1`, the threshold constant
/// `K0^2 = p' ln|M| / (1-2 alpha)` and the level thresholds
/// `lambda_j = K0 sqrt(j / |I_n|)`.
pub fn rate_params(
    bp: &BesovParams,
    p_prime: f64,
    cardinality: usize,
    dilation: &DilationMatrix,
) -> Result<RateParams> {
    if !(bp.s > inv(bp.p)) {
        return Err(Error::HypothesisViolation(format!(
            "need s > 1/p, got s={} and p={}",
            bp.s, bp.p
        )));
    }
    if cardinality < 2 {
        return Err(Error::HypothesisViolation("need |I_n| >= 2".into()));
    }
    let (s_prime, epsilon, alpha) = thresholding_exponents(bp.s, bp.p, p_prime);
    if alpha >= 0.5 {
        return Err(Error::DegenerateRate { alpha });
    }
    let n = cardinality as f64;
    let det = dilation.det_abs();
    let j0 = level_for(n.powf(1.0 - 2.0 * alpha), det);
    let j1 = level_for(n.powf(alpha / s_prime), det).max(j0);
    let k0 = (p_prime * det.ln() / (1.0 - 2.0 * alpha)).sqrt();
    let lambda_bar = (j0..j1).map(|j| k0 * (j as f64 / n).sqrt()).collect();
    Ok(RateParams { p_prime, s_prime, epsilon, alpha, j0, j1, k0, lambda_bar })
}
