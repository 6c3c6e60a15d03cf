//! Positive-part normalization, integrated squared error, the sample-based
//! verification criterion `int fhat^2 - (2/|I_2|) sum fhat(Z)` and the
//! region-wise primary level selection.

use crate::error::{Error, Result};
use crate::estimator::{empirical_coefficient_set, linear_estimate, DensityEstimate, Sample};
use crate::wavelet::WaveletBasis;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

pub use crate::quad::QuadratureGrid;

/// Positive-part normalization `fhat = max(f, 0) / S` with
/// `S = int max(f, 0)` computed on the grid. Returns the normalized
/// estimate carrying `S`; a normalized input is already a density and is
/// returned unchanged.
pub fn normalize(estimate: &DensityEstimate, grid: &QuadratureGrid) -> Result<DensityEstimate> {
    let raw = match estimate {
        DensityEstimate::Raw(raw) => raw,
        DensityEstimate::Normalized { .. } => return Ok(estimate.clone()),
    };
    let mut mass = 0.0;
    grid.for_each_node(|x| mass += raw.evaluate(x).max(0.0));
    let mass = mass * grid.cell_volume();
    if mass <= 1e-12 {
        return Err(Error::DegenerateEstimate { mass });
    }
    Ok(DensityEstimate::Normalized { inner: raw.clone(), mass })
}

/// `int fhat^2`: exact by Parseval for raw estimates, midpoint quadrature
/// for normalized ones.
pub fn l2_norm_sq(estimate: &DensityEstimate, grid: &QuadratureGrid) -> f64 {
    match estimate {
        DensityEstimate::Raw(raw) => raw.l2_norm_sq(),
        DensityEstimate::Normalized { .. } => {
            let mut acc = 0.0;
            grid.for_each_node(|x| {
                let v = estimate.evaluate(x);
                acc += v * v;
            });
            acc * grid.cell_volume()
        }
    }
}

/// Integrated squared error against a known density by midpoint quadrature.
pub fn ise(
    estimate: &DensityEstimate,
    target: &dyn Fn(&[f64]) -> f64,
    grid: &QuadratureGrid,
) -> f64 {
    let mut acc = 0.0;
    grid.for_each_node(|x| {
        let d = estimate.evaluate(x) - target(x);
        acc += d * d;
    });
    acc * grid.cell_volume()
}

/// The exact verification part `int fhat^2 - 2 int fhat f` with the cross
/// term by quadrature; `ise = ver + ||f||^2`.
pub fn ver_exact(
    estimate: &DensityEstimate,
    target: &dyn Fn(&[f64]) -> f64,
    grid: &QuadratureGrid,
) -> f64 {
    let mut cross = 0.0;
    grid.for_each_node(|x| cross += estimate.evaluate(x) * target(x));
    l2_norm_sq(estimate, grid) - 2.0 * cross * grid.cell_volume()
}

/// The empirical verification criterion
/// `int fhat^2 - (2/|I_{n,2}|) sum_{s in I_{n,2}} fhat(Z(s))`.
pub fn ver_hat(
    estimate: &DensityEstimate,
    validation: &Sample,
    grid: &QuadratureGrid,
) -> Result<f64> {
    if validation.is_empty() {
        return Err(Error::EmptyValidation);
    }
    let sample_term: f64 =
        validation.iter().map(|p| estimate.evaluate(p)).sum::<f64>() / validation.len() as f64;
    Ok(l2_norm_sq(estimate, grid) - 2.0 * sample_term)
}

// ---------------------------------------------------------------------------
// primary level selection
// ---------------------------------------------------------------------------

/// An axis-aligned evaluation region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Region {
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&v, (&a, &b))| v >= a && v < b)
    }
}

/// The default partition: the `2^d` equal quadrants of a box.
pub fn quadrant_regions(lo: &[f64], hi: &[f64]) -> Vec<Region> {
    let d = lo.len();
    let mid: Vec<f64> = lo.iter().zip(hi).map(|(&a, &b)| 0.5 * (a + b)).collect();
    (0..1usize << d)
        .map(|mask| {
            let mut rlo = Vec::with_capacity(d);
            let mut rhi = Vec::with_capacity(d);
            for axis in 0..d {
                if (mask >> axis) & 1 == 1 {
                    rlo.push(mid[axis]);
                    rhi.push(hi[axis]);
                } else {
                    rlo.push(lo[axis]);
                    rhi.push(mid[axis]);
                }
            }
            Region { lo: rlo, hi: rhi }
        })
        .collect()
}

/// Outcome of the level search within one region.
#[derive(Clone, Debug)]
pub struct RegionChoice {
    pub region: Region,
    pub best_level: i32,
    pub best_criterion: f64,
    /// detail energy of the pilot estimate inside the region
    pub roughness: f64,
}

/// Result of the primary-level selection across regions.
#[derive(Clone, Debug)]
pub struct LevelSelection {
    pub per_region: Vec<RegionChoice>,
    pub chosen: i32,
}

/// Hall-style primary level selection: for every region take the level
/// minimizing the region-restricted verification criterion of the linear
/// estimator (smallest level on ties), then choose the minimum over the
/// regions. Regions are reported together with a pilot roughness given by
/// the detail energy of a full coefficient set on the candidate range.
pub fn select_primary_level(
    train: &Sample,
    validation: &Sample,
    basis: &Arc<WaveletBasis>,
    regions: &[Region],
    candidates: &[i32],
    grid: &QuadratureGrid,
) -> Result<LevelSelection> {
    if validation.is_empty() {
        return Err(Error::EmptyValidation);
    }
    assert!(!candidates.is_empty() && !regions.is_empty());

    // region-restricted criteria for every candidate level in one sweep
    let mut criteria = vec![vec![0.0f64; regions.len()]; candidates.len()];
    for (ci, &j) in candidates.iter().enumerate() {
        let est = linear_estimate(train, basis, j)?;
        let mut quad = vec![0.0f64; regions.len()];
        grid.for_each_node(|x| {
            if let Some(ri) = regions.iter().position(|r| r.contains(x)) {
                let v = est.evaluate(x);
                quad[ri] += v * v;
            }
        });
        let mut sample = vec![0.0f64; regions.len()];
        for p in validation.iter() {
            if let Some(ri) = regions.iter().position(|r| r.contains(p)) {
                sample[ri] += est.evaluate(p);
            }
        }
        for ri in 0..regions.len() {
            criteria[ci][ri] = quad[ri] * grid.cell_volume()
                - 2.0 * sample[ri] / validation.len() as f64;
        }
    }

    // pilot roughness: detail energy of the coefficient cells whose support
    // center falls inside the region
    let j_max = *candidates.iter().max().unwrap();
    let pilot = empirical_coefficient_set(train, basis, 0, j_max.max(1))?;
    let l_half = basis.support() as f64 / 2.0;
    let mut roughness = vec![0.0f64; regions.len()];
    for (&j, per_k) in &pilot.details {
        let inv = 2.0f64.powi(-j);
        for map in per_k {
            for (gamma, &v) in map {
                let center: Vec<f64> =
                    gamma.iter().map(|&g| (g as f64 + l_half) * inv).collect();
                if let Some(ri) = regions.iter().position(|r| r.contains(&center)) {
                    roughness[ri] += v * v;
                }
            }
        }
    }

    let mut per_region = Vec::with_capacity(regions.len());
    for ri in 0..regions.len() {
        let mut best = 0usize;
        for ci in 1..candidates.len() {
            if criteria[ci][ri] < criteria[best][ri] {
                best = ci;
            }
        }
        per_region.push(RegionChoice {
            region: regions[ri].clone(),
            best_level: candidates[best],
            best_criterion: criteria[best][ri],
            roughness: roughness[ri],
        });
    }
    let chosen = per_region.iter().map(|c| c.best_level).min().unwrap();
    Ok(LevelSelection { per_region, chosen })
}

// ---------------------------------------------------------------------------
// verification reports
// ---------------------------------------------------------------------------

/// Identity of one table cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerKey {
    pub sample_size: usize,
    pub level: i32,
    pub estimator: String,
    pub threshold: Option<f64>,
}

/// Aggregated verification criterion for one configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerCell {
    pub key: VerKey,
    pub mean: f64,
    pub std: f64,
    pub replications: usize,
    /// marks the minimum mean within its sample-size group
    pub is_min: bool,
}

/// The table of verification criteria across configurations.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct VerReport {
    pub cells: Vec<VerCell>,
}

impl VerReport {
    /// Aggregates per-replication values and marks each sample-size
    /// group's minimal mean.
    pub fn from_replications(data: Vec<(VerKey, Vec<f64>)>) -> VerReport {
        let mut cells: Vec<VerCell> = data
            .into_iter()
            .map(|(key, values)| {
                assert!(!values.is_empty());
                let mean = crate::stats::mean(&values);
                let std = if values.len() > 1 { crate::stats::std_dev(&values) } else { 0.0 };
                VerCell { key, mean, std, replications: values.len(), is_min: false }
            })
            .collect();
        let sizes: Vec<usize> = {
            let mut s: Vec<usize> = cells.iter().map(|c| c.key.sample_size).collect();
            s.sort_unstable();
            s.dedup();
            s
        };
        for size in sizes {
            let best = cells
                .iter()
                .filter(|c| c.key.sample_size == size)
                .map(|c| c.mean)
                .fold(f64::INFINITY, f64::min);
            for c in &mut cells {
                if c.key.sample_size == size && c.mean == best {
                    c.is_min = true;
                }
            }
        }
        VerReport { cells }
    }

    pub fn cell(&self, size: usize, level: i32, estimator: &str, threshold: Option<f64>) -> Option<&VerCell> {
        self.cells.iter().find(|c| {
            c.key.sample_size == size
                && c.key.level == level
                && c.key.estimator == estimator
                && c.key.threshold == threshold
        })
    }
}
