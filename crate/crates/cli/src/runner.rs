//! The experiment machinery behind the subcommands: seeded replication
//! simulation, verification tables, and the rate study. Replications run
//! in parallel on independent ChaCha streams and are aggregated in
//! replication order, so results do not depend on scheduling.

use crate::config::{ExperimentConfig, RatesTarget};
use crate::CliError;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;
use wavedens::besov::{linear_level, rate_params, thresholding_exponents, BesovParams};
use wavedens::estimator::{
    empirical_coefficient_set, hard_threshold_from_coeffs, linear_estimate, DensityEstimate,
    Sample,
};
use wavedens::gmrf::{
    sample_iid_fields, simulate_fields, transform_to_target, TargetDensity,
};
use wavedens::lattice::{partition_train_validate, LatticeShape};
use wavedens::postprocess::{ise, normalize, ver_hat, QuadratureGrid, VerKey, VerReport};
use wavedens::stats::{mean, std_dev};
use wavedens::wavelet::{filter_bank_by_name, tensor_basis, DilationMatrix, WaveletBasis};

/// One simulated data set, split into the rectangular training block and
/// the L-shaped validation complement.
#[derive(Clone, Debug)]
pub struct Replication {
    pub full: Sample,
    pub train: Sample,
    pub validate: Sample,
}

/// Deterministic per-replication stream id, independent of the execution
/// order: the seed selects the key, `(size, rep)` selects the stream.
fn replication_rng(seed: u64, size: usize, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((size as u64) << 32) | rep as u64);
    rng
}

/// Simulates one replication of the five-field system on an `n x n`
/// lattice and transforms it to the mixture target. The independent
/// reference mode swaps the Gibbs chain for the matched i.i.d. sampler on
/// the same innovation stream.
pub fn simulate_replication(
    cfg: &ExperimentConfig,
    size: usize,
    rep: usize,
) -> Result<Replication, CliError> {
    let shape = LatticeShape::square(size)?;
    let mut rng = replication_rng(cfg.seed, size, rep);
    let multi = if cfg.iid {
        sample_iid_fields(&shape, &cfg.copula, cfg.iterations, &mut rng)?
    } else {
        simulate_fields(&shape, &cfg.etas, &cfg.copula, cfg.iterations, &mut rng)?
    };
    let full = transform_to_target(&multi);
    let (train_sites, validate_sites) = partition_train_validate(&shape, cfg.train_fraction)?;
    let flat = |sites: &[wavedens::lattice::Site]| -> Result<Vec<usize>, CliError> {
        sites.iter().map(|s| Ok(shape.flat_index(s)?)).collect()
    };
    let train = full.subset(&flat(&train_sites)?);
    let validate = full.subset(&flat(&validate_sites)?);
    Ok(Replication { full, train, validate })
}

/// All replications of one size, in parallel.
pub fn simulate_replications(
    cfg: &ExperimentConfig,
    size: usize,
) -> Result<Vec<Replication>, CliError> {
    (0..cfg.replications)
        .into_par_iter()
        .map(|rep| simulate_replication(cfg, size, rep))
        .collect()
}

pub fn basis_for(name: &str) -> Result<Arc<WaveletBasis>, CliError> {
    Ok(Arc::new(tensor_basis(filter_bank_by_name(name)?, 2)?))
}

/// The verification criterion of one estimate under the configured
/// variant: raw (Parseval quadratic term) or positive-part normalized.
fn criterion(
    cfg: &ExperimentConfig,
    est: &DensityEstimate,
    validate: &Sample,
    grid: &QuadratureGrid,
) -> Result<f64, CliError> {
    if cfg.normalized_ver {
        let normalized = normalize(est, grid)?;
        Ok(ver_hat(&normalized, validate, grid)?)
    } else {
        Ok(ver_hat(est, validate, grid)?)
    }
}

/// Verification values of every table configuration on one replication:
/// the linear estimator at each level and the hard estimator with coarse
/// level zero, fine level `j1 = 1..=j_max` and each threshold multiple.
pub fn table_row_values(
    cfg: &ExperimentConfig,
    rep: &Replication,
    basis: &Arc<WaveletBasis>,
    grid: &QuadratureGrid,
) -> Result<Vec<(VerKey, f64)>, CliError> {
    let n = rep.full.len();
    let mut rows = Vec::new();
    for j in 0..=cfg.j_max {
        let est = linear_estimate(&rep.train, basis, j)?;
        let value = criterion(cfg, &est, &rep.validate, grid)?;
        rows.push((
            VerKey { sample_size: n, level: j, estimator: "linear".into(), threshold: None },
            value,
        ));
    }
    let coeffs = empirical_coefficient_set(&rep.train, basis, 0, cfg.j_max)?;
    for j1 in 1..=cfg.j_max {
        for &mult in &cfg.multiples {
            let lambda = wavedens::estimator::relative_thresholds(
                &coeffs,
                mult,
                0,
                j1,
                cfg.threshold_scope,
            );
            let est = hard_threshold_from_coeffs(basis, &coeffs, 0, j1, &lambda)?;
            let value = criterion(cfg, &est, &rep.validate, grid)?;
            rows.push((
                VerKey {
                    sample_size: n,
                    level: j1,
                    estimator: "hard".into(),
                    threshold: Some(mult),
                },
                value,
            ));
        }
    }
    Ok(rows)
}

/// Builds the full verification table for one wavelet from precomputed
/// replications.
pub fn table_from_replications(
    cfg: &ExperimentConfig,
    wavelet: &str,
    replications_by_size: &[(usize, &[Replication])],
) -> Result<VerReport, CliError> {
    let basis = basis_for(wavelet)?;
    let grid = QuadratureGrid::target_default();
    let mut aggregated: Vec<(VerKey, Vec<f64>)> = Vec::new();
    for &(_, reps) in replications_by_size {
        let per_rep: Vec<Vec<(VerKey, f64)>> = reps
            .par_iter()
            .map(|rep| table_row_values(cfg, rep, &basis, &grid))
            .collect::<Result<_, _>>()?;
        for rows in per_rep {
            for (key, value) in rows {
                match aggregated.iter_mut().find(|(k, _)| *k == key) {
                    Some((_, values)) => values.push(value),
                    None => aggregated.push((key, vec![value])),
                }
            }
        }
    }
    Ok(VerReport::from_replications(aggregated))
}

/// Simulates and tabulates in one go (the `table` subcommand).
pub fn run_table(cfg: &ExperimentConfig, wavelet: &str) -> Result<VerReport, CliError> {
    let mut owned: Vec<(usize, Vec<Replication>)> = Vec::new();
    for &size in &cfg.sizes {
        owned.push((size * size, simulate_replications(cfg, size)?));
    }
    let view: Vec<(usize, &[Replication])> =
        owned.iter().map(|(n, reps)| (*n, reps.as_slice())).collect();
    table_from_replications(cfg, wavelet, &view)
}

// ---------------------------------------------------------------------------
// rate study
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct RatesRow {
    pub wavelet: String,
    pub sample_size: usize,
    pub estimator: String,
    pub j0: i32,
    pub j1: i32,
    pub mean_ise: f64,
    pub std_ise: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RatesReport {
    pub target: RatesTarget,
    pub s_prime: f64,
    pub rows: Vec<RatesRow>,
    /// least-squares slope of ln(mean ISE) on ln |I_n|, per (wavelet, estimator)
    pub slopes: Vec<(String, String, f64)>,
}

fn tent_inverse_cdf(u: f64) -> f64 {
    if u <= 0.5 {
        (u / 2.0).sqrt()
    } else {
        1.0 - ((1.0 - u) / 2.0).sqrt()
    }
}

fn uniform01(rng: &mut ChaCha8Rng) -> f64 {
    // 53-bit uniform in [0, 1)
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

/// Draws one rate-study sample of `n = size^2` points from the configured
/// target.
fn rates_sample(cfg: &ExperimentConfig, size: usize, rep: usize) -> Result<Sample, CliError> {
    let mut rng = replication_rng(cfg.seed, size, rep);
    let n = size * size;
    match cfg.rates_target {
        RatesTarget::Uniform => {
            let flat: Vec<f64> = (0..2 * n).map(|_| uniform01(&mut rng)).collect();
            Ok(Sample::new(2, flat)?)
        }
        RatesTarget::Tent => {
            let flat: Vec<f64> =
                (0..2 * n).map(|_| tent_inverse_cdf(uniform01(&mut rng))).collect();
            Ok(Sample::new(2, flat)?)
        }
        RatesTarget::Mixture => {
            let shape = LatticeShape::square(size)?;
            let multi = if cfg.iid {
                sample_iid_fields(&shape, &cfg.copula, cfg.iterations, &mut rng)?
            } else {
                simulate_fields(&shape, &cfg.etas, &cfg.copula, cfg.iterations, &mut rng)?
            };
            Ok(transform_to_target(&multi))
        }
    }
}

fn rates_pdf(cfg: &ExperimentConfig) -> Result<Box<dyn Fn(&[f64]) -> f64 + Sync>, CliError> {
    match cfg.rates_target {
        RatesTarget::Uniform => Ok(Box::new(|x: &[f64]| {
            if x.iter().all(|&v| (0.0..1.0).contains(&v)) {
                1.0
            } else {
                0.0
            }
        })),
        RatesTarget::Tent => Ok(Box::new(|x: &[f64]| {
            let g = |t: f64| 4.0 * t.min(1.0 - t).max(0.0);
            g(x[0]) * g(x[1])
        })),
        RatesTarget::Mixture => {
            let target = TargetDensity::new(0.1)?;
            Ok(Box::new(move |x: &[f64]| target.pdf(x)))
        }
    }
}

/// Runs the rate study: mean ISE of the linear estimator at the
/// theory-chosen level and of the hard estimator under the Theorem-driven
/// `(j0, j1, lambda)` schedule, across the configured sizes, plus the
/// fitted log-log slopes.
pub fn run_rates(cfg: &ExperimentConfig) -> Result<RatesReport, CliError> {
    let dilation = DilationMatrix::dyadic(2);
    let pdf = rates_pdf(cfg)?;
    let (s_prime, _, _) = thresholding_exponents(cfg.rates_s, cfg.rates_p, cfg.rates_p_prime);
    let bp = BesovParams::new(cfg.rates_s, cfg.rates_p, 2.0);
    let grid = QuadratureGrid::target_default();

    let mut rows = Vec::new();
    for wavelet in cfg.wavelet.names() {
        let basis = basis_for(wavelet)?;
        for &size in &cfg.sizes {
            let n = size * size;
            let j_lin = linear_level(s_prime, n, &dilation);
            let rp = rate_params(&bp, cfg.rates_p_prime, n, &dilation)?;
            let thresholds: Vec<f64> =
                rp.lambda_bar.iter().map(|l| l * cfg.k0_scale).collect();

            let per_rep: Vec<(f64, f64)> = (0..cfg.replications)
                .into_par_iter()
                .map(|rep| -> Result<(f64, f64), CliError> {
                    let sample = rates_sample(cfg, size, rep)?;
                    let lin = linear_estimate(&sample, &basis, j_lin)?;
                    let lin_ise = ise(&lin, &|x: &[f64]| pdf(x), &grid);
                    let coeffs = empirical_coefficient_set(&sample, &basis, rp.j0, rp.j1)?;
                    let hard =
                        hard_threshold_from_coeffs(&basis, &coeffs, rp.j0, rp.j1, &thresholds)?;
                    let hard_ise = ise(&hard, &|x: &[f64]| pdf(x), &grid);
                    Ok((lin_ise, hard_ise))
                })
                .collect::<Result<_, _>>()?;
            let lin: Vec<f64> = per_rep.iter().map(|p| p.0).collect();
            let hard: Vec<f64> = per_rep.iter().map(|p| p.1).collect();
            rows.push(RatesRow {
                wavelet: wavelet.to_string(),
                sample_size: n,
                estimator: "linear".into(),
                j0: j_lin,
                j1: j_lin,
                mean_ise: mean(&lin),
                std_ise: if lin.len() > 1 { std_dev(&lin) } else { 0.0 },
            });
            rows.push(RatesRow {
                wavelet: wavelet.to_string(),
                sample_size: n,
                estimator: "hard".into(),
                j0: rp.j0,
                j1: rp.j1,
                mean_ise: mean(&hard),
                std_ise: if hard.len() > 1 { std_dev(&hard) } else { 0.0 },
            });
        }
    }

    let mut slopes = Vec::new();
    for wavelet in cfg.wavelet.names() {
        for estimator in ["linear", "hard"] {
            let points: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.wavelet == wavelet && r.estimator == estimator)
                .map(|r| ((r.sample_size as f64).ln(), r.mean_ise.ln()))
                .collect();
            if points.len() >= 2 {
                slopes.push((wavelet.to_string(), estimator.to_string(), ls_slope(&points)));
            }
        }
    }
    Ok(RatesReport { target: cfg.rates_target, s_prime, rows, slopes })
}

/// Least-squares slope of y on x.
pub fn ls_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use wavedens::estimator::ThresholdScope;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            sizes: vec![10],
            replications: 3,
            iterations: 30,
            j_max: 2,
            multiples: vec![0.1],
            ..Default::default()
        }
    }

    #[test]
    fn replications_are_deterministic_and_split() {
        let cfg = small_config();
        let a = simulate_replication(&cfg, 10, 1).unwrap();
        let b = simulate_replication(&cfg, 10, 1).unwrap();
        assert_eq!(a.full, b.full);
        assert_eq!(a.train.len(), 81);
        assert_eq!(a.validate.len(), 19);

        let c = simulate_replication(&cfg, 10, 2).unwrap();
        assert_ne!(a.full, c.full);
    }

    #[test]
    fn iid_mode_differs_only_in_sampler() {
        let mut cfg = small_config();
        let dep = simulate_replication(&cfg, 10, 0).unwrap();
        cfg.iid = true;
        let ind = simulate_replication(&cfg, 10, 0).unwrap();
        assert_eq!(dep.full.len(), ind.full.len());
        assert_ne!(dep.full, ind.full);
    }

    #[test]
    fn table_report_covers_all_cells() {
        let cfg = small_config();
        let report = run_table(&cfg, "haar").unwrap();
        // linear rows 0..=2 plus hard rows for j1 in 1..=2, one multiple
        assert_eq!(report.cells.len(), 3 + 2);
        assert!(report.cells.iter().all(|c| c.replications == 3));
        assert_eq!(report.cells.iter().filter(|c| c.is_min).count(), 1);
    }

    #[test]
    fn table_is_reproducible() {
        let cfg = small_config();
        let a = run_table(&cfg, "haar").unwrap();
        let b = run_table(&cfg, "haar").unwrap();
        for (x, y) in a.cells.iter().zip(&b.cells) {
            assert_eq!(x.mean.to_bits(), y.mean.to_bits());
        }
    }

    #[test]
    fn scope_flag_changes_thresholds() {
        let mut cfg = small_config();
        cfg.replications = 2;
        let a = run_table(&cfg, "haar").unwrap();
        cfg.threshold_scope = ThresholdScope::Global;
        let b = run_table(&cfg, "haar").unwrap();
        // same linear rows, different hard rows in general
        let lin_a = a.cell(100, 1, "linear", None).unwrap().mean;
        let lin_b = b.cell(100, 1, "linear", None).unwrap().mean;
        assert_eq!(lin_a, lin_b);
    }

    #[test]
    fn rates_report_slopes_present() {
        let cfg = ExperimentConfig {
            sizes: vec![10, 14],
            replications: 4,
            rates_target: RatesTarget::Uniform,
            rates_s: 0.55,
            rates_p: 2.0,
            ..Default::default()
        };
        let report = run_rates(&cfg).unwrap();
        assert_eq!(report.rows.len(), 2 * 2 * 2); // both wavelets, both estimators
        assert_eq!(report.slopes.len(), 4);
        // uniform target: the linear ISE shrinks with n
        let lin: Vec<&RatesRow> = report
            .rows
            .iter()
            .filter(|r| r.wavelet == "haar" && r.estimator == "linear")
            .collect();
        assert!(lin[1].mean_ise < lin[0].mean_ise);
    }

    #[test]
    fn ls_slope_recovers_line() {
        let pts: Vec<(f64, f64)> = (1..6).map(|i| (i as f64, 3.0 - 2.0 * i as f64)).collect();
        assert!((ls_slope(&pts) + 2.0).abs() < 1e-12);
    }
}
