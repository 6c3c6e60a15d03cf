//! Standard-normal helpers and the small sample statistics the simulation
//! diagnostics rely on.

use statrs::distribution::{ContinuousCDF, Normal};
use std::sync::OnceLock;

fn std_normal() -> &'static Normal {
    static N: OnceLock<Normal> = OnceLock::new();
    N.get_or_init(|| Normal::new(0.0, 1.0).unwrap())
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

/// Standard normal quantile; requires p in (0, 1).
pub fn norm_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    std_normal().inverse_cdf(p)
}

/// One-sample Kolmogorov-Smirnov statistic against `cdf`.
pub fn ks_statistic(data: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    assert!(!data.is_empty());
    data.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = data.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in data.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i as f64 + 1.0) / n - f).abs());
    }
    d
}

/// Asymptotic KS critical value at significance `alpha`.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n-1 denominator).
pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let ss = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    (ss / (xs.len() as f64 - 1.0)).sqrt()
}

pub fn pearson_corr(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let mx = mean(xs);
    let my = mean(ys);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_inverts_cdf() {
        for p in [0.01, 0.1587, 0.5, 0.8413, 0.99] {
            let x = norm_quantile(p);
            assert!((norm_cdf(x) - p).abs() < 1e-9);
        }
        assert!(norm_quantile(0.5).abs() < 1e-12);
        assert!((norm_quantile(0.8413) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn ks_detects_fit_and_misfit() {
        // a fine uniform grid of N(0,1) quantiles fits
        let mut data: Vec<f64> = (1..=1000).map(|i| norm_quantile(i as f64 / 1001.0)).collect();
        let d = ks_statistic(&mut data, norm_cdf);
        assert!(d < ks_critical(1000, 0.01));

        // a shifted sample does not
        let mut shifted: Vec<f64> = data.iter().map(|x| x + 0.5).collect();
        let d = ks_statistic(&mut shifted, norm_cdf);
        assert!(d > ks_critical(1000, 0.01));
    }

    #[test]
    fn corr_of_exact_line_is_one() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 3.0).collect();
        assert!((pearson_corr(&xs, &ys) - 1.0).abs() < 1e-12);
    }
}
