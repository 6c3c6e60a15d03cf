//! Empirical wavelet coefficients from lattice samples and the density
//! estimators built from them: the level-`j` linear projection, the
//! two-level hard-thresholding estimator with strict keep rule, and soft
//! thresholding. Raw estimates may be negative; positivity and
//! normalization live in [`crate::postprocess`].

use crate::error::{Error, Result};
use crate::quad::QuadratureGrid;
use crate::wavelet::{BasisDescriptor, Gamma, WaveletBasis};
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

// ---------------------------------------------------------------------------
// samples
// ---------------------------------------------------------------------------

/// A site-indexed list of `d`-dimensional observations, stored row-major in
/// the lattice's flat site order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    d: usize,
    points: Vec<f64>,
}

impl Sample {
    pub fn new(d: usize, points: Vec<f64>) -> Result<Self> {
        if d == 0 || points.len() % d != 0 {
            return Err(Error::InvalidShape(format!(
                "flat point buffer of length {} does not hold {d}-dimensional points",
                points.len()
            )));
        }
        Ok(Sample { d, points })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let d = points.first().map(|p| p.len()).unwrap_or(1);
        let mut flat = Vec::with_capacity(points.len() * d);
        for p in points {
            if p.len() != d {
                return Err(Error::InvalidShape("ragged point list".into()));
            }
            flat.extend_from_slice(p);
        }
        Sample::new(d, flat)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.d)
    }

    /// Restricts to the given indices (e.g. the train or validate sites).
    pub fn subset(&self, indices: &[usize]) -> Sample {
        let mut flat = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            flat.extend_from_slice(self.point(i));
        }
        Sample { d: self.d, points: flat }
    }

    pub fn bounding_box(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.is_empty() {
            return Err(Error::EmptySample);
        }
        let mut lo = vec![f64::INFINITY; self.d];
        let mut hi = vec![f64::NEG_INFINITY; self.d];
        for p in self.iter() {
            for (axis, &v) in p.iter().enumerate() {
                lo[axis] = lo[axis].min(v);
                hi[axis] = hi[axis].max(v);
            }
        }
        Ok((lo, hi))
    }
}

// ---------------------------------------------------------------------------
// coefficient sets
// ---------------------------------------------------------------------------

/// Sparse empirical coefficients: the father coefficients at the coarse
/// level `j0` and the detail coefficients keyed by `(k, j, gamma)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CoefficientSet {
    pub j0: i32,
    pub theta: HashMap<Gamma, f64>,
    /// level -> per-mother maps, entry `k-1` belongs to mother `k`
    pub details: BTreeMap<i32, Vec<HashMap<Gamma, f64>>>,
}

impl CoefficientSet {
    pub fn detail_levels(&self) -> impl Iterator<Item = i32> + '_ {
        self.details.keys().copied()
    }

    /// `max |upsilon_{k,j,gamma}|` over `k` and `gamma` at one level.
    pub fn max_abs_detail(&self, j: i32) -> f64 {
        self.details
            .get(&j)
            .map(|per_k| {
                per_k
                    .iter()
                    .flat_map(|m| m.values())
                    .fold(0.0f64, |acc, &v| acc.max(v.abs()))
            })
            .unwrap_or(0.0)
    }

    pub fn detail_count(&self) -> usize {
        self.details.values().flat_map(|per_k| per_k.iter()).map(|m| m.len()).sum()
    }

    /// Parseval sum of squares of all stored coefficients.
    pub fn energy(&self) -> f64 {
        let theta: f64 = self.theta.values().map(|v| v * v).sum();
        let details: f64 = self
            .details
            .values()
            .flat_map(|per_k| per_k.iter())
            .flat_map(|m| m.values())
            .map(|v| v * v)
            .sum();
        theta + details
    }
}

/// Per-axis translation offsets covering a point: integers in `[t - L, t]`
/// where `t` is the dilated coordinate.
#[inline]
fn gather_range(t: f64, support: usize) -> (i64, i64) {
    ((t - support as f64).ceil() as i64, t.floor() as i64)
}

/// Evaluates all `2^d` father/mother products at every translation covering
/// the dilated point and hands them to the visitor.
fn visit_translations(
    basis: &WaveletBasis,
    j: i32,
    x: &[f64],
    visit: &mut dyn FnMut(&Gamma, &[f64]),
) {
    let d = basis.dim();
    let dil = 2.0f64.powi(j);
    let support = basis.support();
    let mut ranges: SmallVec<[(i64, i64); 4]> = SmallVec::new();
    let mut phi_axis: SmallVec<[SmallVec<[f64; 8]>; 4]> = SmallVec::new();
    let mut psi_axis: SmallVec<[SmallVec<[f64; 8]>; 4]> = SmallVec::new();
    for axis in 0..d {
        let t = dil * x[axis];
        let (lo, hi) = gather_range(t, support);
        let mut phis: SmallVec<[f64; 8]> = SmallVec::new();
        let mut psis: SmallVec<[f64; 8]> = SmallVec::new();
        for g in lo..=hi {
            let arg = t - g as f64;
            phis.push(basis.father_1d(arg));
            psis.push(basis.mother_1d(arg));
        }
        ranges.push((lo, hi));
        phi_axis.push(phis);
        psi_axis.push(psis);
    }

    let combos = 1usize << d;
    let mut offsets: SmallVec<[usize; 4]> = SmallVec::from_elem(0, d);
    let mut products: SmallVec<[f64; 16]> = SmallVec::from_elem(0.0, combos);
    let mut gamma: Gamma = ranges.iter().map(|&(lo, _)| lo as i32).collect();
    loop {
        products[0] = 1.0;
        let mut filled = 1usize;
        for axis in 0..d {
            let phi = phi_axis[axis][offsets[axis]];
            let psi = psi_axis[axis][offsets[axis]];
            for i in 0..filled {
                products[filled + i] = products[i] * psi;
                products[i] *= phi;
            }
            filled *= 2;
        }
        visit(&gamma, &products);

        let mut axis = d;
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            offsets[axis] += 1;
            if (ranges[axis].0 + offsets[axis] as i64) <= ranges[axis].1 {
                gamma[axis] = (ranges[axis].0 + offsets[axis] as i64) as i32;
                break;
            }
            offsets[axis] = 0;
            gamma[axis] = ranges[axis].0 as i32;
        }
    }
}

fn level_sums(sample: &Sample, basis: &WaveletBasis, j: i32) -> Result<Vec<HashMap<Gamma, f64>>> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    assert_eq!(sample.dim(), basis.dim());
    let combos = 1usize << basis.dim();
    let mut sums: Vec<HashMap<Gamma, f64>> = (0..combos).map(|_| HashMap::new()).collect();
    for p in sample.iter() {
        visit_translations(basis, j, p, &mut |gamma, products| {
            for (k, &v) in products.iter().enumerate() {
                if v != 0.0 {
                    *sums[k].entry(gamma.clone()).or_insert(0.0) += v;
                }
            }
        });
    }
    let scale = basis.scale(j) / sample.len() as f64;
    for map in &mut sums {
        for v in map.values_mut() {
            *v *= scale;
        }
        map.retain(|_, v| *v != 0.0);
    }
    Ok(sums)
}

/// Empirical father coefficients
/// `theta_hat_{j,gamma} = |I_n|^{-1} sum_s Phi_{j,gamma}(Z(s))`.
pub fn empirical_father_coeffs(
    sample: &Sample,
    basis: &WaveletBasis,
    j: i32,
) -> Result<HashMap<Gamma, f64>> {
    let mut sums = level_sums(sample, basis, j)?;
    Ok(std::mem::take(&mut sums[0]))
}

/// Empirical mother coefficients
/// `upsilon_hat_{k,j,gamma} = |I_n|^{-1} sum_s Psi_{k,j,gamma}(Z(s))`.
pub fn empirical_mother_coeffs(
    sample: &Sample,
    basis: &WaveletBasis,
    k: usize,
    j: i32,
) -> Result<HashMap<Gamma, f64>> {
    if k == 0 || k > basis.mother_count() {
        return Err(Error::InvalidMotherIndex { k, max: basis.mother_count() });
    }
    let mut sums = level_sums(sample, basis, j)?;
    Ok(std::mem::take(&mut sums[k]))
}

/// Father coefficients at `j0` plus detail coefficients for all levels
/// `j0 <= j < j1`, accumulated in one pass per level.
pub fn empirical_coefficient_set(
    sample: &Sample,
    basis: &WaveletBasis,
    j0: i32,
    j1: i32,
) -> Result<CoefficientSet> {
    if j0 > j1 {
        return Err(Error::InvalidLevels { j0, j1 });
    }
    let mut set = CoefficientSet { j0, ..Default::default() };
    set.theta = empirical_father_coeffs(sample, basis, j0)?;
    for j in j0..j1 {
        let mut sums = level_sums(sample, basis, j)?;
        set.details.insert(j, sums.drain(1..).collect());
    }
    Ok(set)
}

// ---------------------------------------------------------------------------
// estimates
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum EstimateKind {
    Linear { j: i32 },
    Hard { j0: i32, j1: i32, thresholds: Vec<f64> },
    Soft { j0: i32, j1: i32, delta: f64 },
}

/// A raw (possibly signed) wavelet density estimate: the stored
/// coefficients are exactly the terms of the expansion.
#[derive(Clone, Debug)]
pub struct RawEstimate {
    pub basis: Arc<WaveletBasis>,
    pub coeffs: CoefficientSet,
    pub kind: EstimateKind,
}

/// A density estimate, either raw or positive-part normalized.
#[derive(Clone, Debug)]
pub enum DensityEstimate {
    Raw(RawEstimate),
    /// `max(raw, 0) / mass` with `mass` the positive-part integral.
    Normalized { inner: RawEstimate, mass: f64 },
}

impl RawEstimate {
    /// `int f^2` by Parseval: the stored coefficients are orthonormal
    /// expansion terms, so the integral is their energy.
    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.energy()
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.basis.dim());
        let coeffs = &self.coeffs;
        // visit_translations yields undilated products, so every level
        // contributes through its |M|^{j/2} scale
        let mut total = 0.0;
        let scale0 = self.basis.scale(coeffs.j0);
        visit_translations(&self.basis, coeffs.j0, x, &mut |gamma, products| {
            if let Some(&c) = coeffs.theta.get(gamma) {
                total += c * products[0] * scale0;
            }
        });
        for (&j, per_k) in &coeffs.details {
            let scale = self.basis.scale(j);
            visit_translations(&self.basis, j, x, &mut |gamma, products| {
                for (ki, map) in per_k.iter().enumerate() {
                    if let Some(&c) = map.get(gamma) {
                        total += c * products[ki + 1] * scale;
                    }
                }
            });
        }
        total
    }
}

impl DensityEstimate {
    pub fn raw(&self) -> &RawEstimate {
        match self {
            DensityEstimate::Raw(r) => r,
            DensityEstimate::Normalized { inner, .. } => inner,
        }
    }

    pub fn basis(&self) -> &Arc<WaveletBasis> {
        &self.raw().basis
    }

    pub fn normalization_mass(&self) -> Option<f64> {
        match self {
            DensityEstimate::Raw(_) => None,
            DensityEstimate::Normalized { mass, .. } => Some(*mass),
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        match self {
            DensityEstimate::Raw(r) => r.evaluate(x),
            DensityEstimate::Normalized { inner, mass } => inner.evaluate(x).max(0.0) / mass,
        }
    }

    /// Evaluates on all midpoint nodes of the grid in row-major order.
    pub fn evaluate_grid(&self, grid: &QuadratureGrid) -> Vec<f64> {
        let mut out = Vec::with_capacity(grid.len());
        grid.for_each_node(|x| out.push(self.evaluate(x)));
        out
    }
}

/// The linear estimator: level-`j` projection with empirical coefficients.
pub fn linear_estimate(
    sample: &Sample,
    basis: &Arc<WaveletBasis>,
    j: i32,
) -> Result<DensityEstimate> {
    let theta = empirical_father_coeffs(sample, basis, j)?;
    Ok(DensityEstimate::Raw(RawEstimate {
        basis: Arc::clone(basis),
        coeffs: CoefficientSet { j0: j, theta, details: BTreeMap::new() },
        kind: EstimateKind::Linear { j },
    }))
}

/// Builds the hard-thresholding estimator from precomputed coefficients:
/// the `j0` linear part plus every detail with `|upsilon| > lambda_j`
/// (strict inequality, ties suppressed). `thresholds[i]` belongs to level
/// `j0 + i`.
pub fn hard_threshold_from_coeffs(
    basis: &Arc<WaveletBasis>,
    coeffs: &CoefficientSet,
    j0: i32,
    j1: i32,
    thresholds: &[f64],
) -> Result<DensityEstimate> {
    if j0 > j1 {
        return Err(Error::InvalidLevels { j0, j1 });
    }
    assert_eq!(coeffs.j0, j0, "coefficient set anchored at a different coarse level");
    assert_eq!(thresholds.len(), (j1 - j0) as usize);
    let mut kept = CoefficientSet { j0, theta: coeffs.theta.clone(), ..Default::default() };
    for j in j0..j1 {
        let lambda = thresholds[(j - j0) as usize];
        let Some(per_k) = coeffs.details.get(&j) else { continue };
        let filtered: Vec<HashMap<Gamma, f64>> = per_k
            .iter()
            .map(|m| {
                m.iter()
                    .filter(|(_, v)| v.abs() > lambda)
                    .map(|(g, v)| (g.clone(), *v))
                    .collect()
            })
            .collect();
        kept.details.insert(j, filtered);
    }
    Ok(DensityEstimate::Raw(RawEstimate {
        basis: Arc::clone(basis),
        coeffs: kept,
        kind: EstimateKind::Hard { j0, j1, thresholds: thresholds.to_vec() },
    }))
}

/// The hard-thresholding estimator computed directly from a sample.
pub fn hard_threshold_estimate(
    sample: &Sample,
    basis: &Arc<WaveletBasis>,
    j0: i32,
    j1: i32,
    thresholds: &[f64],
) -> Result<DensityEstimate> {
    let coeffs = empirical_coefficient_set(sample, basis, j0, j1)?;
    hard_threshold_from_coeffs(basis, &coeffs, j0, j1, thresholds)
}

/// Whether the relative threshold multiplies the per-level detail maximum
/// or one maximum taken across all levels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdScope {
    PerLevel,
    Global,
}

/// Thresholds `lambda_j = multiple * max |upsilon_hat|` for levels
/// `j_lo <= j < j_hi`.
pub fn relative_thresholds(
    coeffs: &CoefficientSet,
    multiple: f64,
    j_lo: i32,
    j_hi: i32,
    scope: ThresholdScope,
) -> Vec<f64> {
    assert!(multiple >= 0.0);
    match scope {
        ThresholdScope::PerLevel => {
            (j_lo..j_hi).map(|j| multiple * coeffs.max_abs_detail(j)).collect()
        }
        ThresholdScope::Global => {
            let global = (j_lo..j_hi).map(|j| coeffs.max_abs_detail(j)).fold(0.0f64, f64::max);
            vec![multiple * global; (j_hi - j_lo).max(0) as usize]
        }
    }
}

/// Soft thresholding: every detail coefficient is shrunk by
/// `sgn(v) (|v| - delta)_+` before reconstruction.
pub fn soft_threshold_estimate(
    sample: &Sample,
    basis: &Arc<WaveletBasis>,
    j0: i32,
    j1: i32,
    delta: f64,
) -> Result<DensityEstimate> {
    assert!(delta >= 0.0);
    let coeffs = empirical_coefficient_set(sample, basis, j0, j1)?;
    let mut shrunk = CoefficientSet { j0, theta: coeffs.theta, ..Default::default() };
    for (j, per_k) in coeffs.details {
        let filtered: Vec<HashMap<Gamma, f64>> = per_k
            .into_iter()
            .map(|m| {
                m.into_iter()
                    .filter_map(|(g, v)| {
                        let s = v.abs() - delta;
                        (s > 0.0).then(|| (g, v.signum() * s))
                    })
                    .collect()
            })
            .collect();
        shrunk.details.insert(j, filtered);
    }
    Ok(DensityEstimate::Raw(RawEstimate {
        basis: Arc::clone(basis),
        coeffs: shrunk,
        kind: EstimateKind::Soft { j0, j1, delta },
    }))
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

/// Flat JSON form of an estimate: basis descriptor, kind and the non-zero
/// coefficient triples.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EstimateDto {
    pub basis: BasisDescriptor,
    pub kind: EstimateKind,
    pub theta_level: i32,
    pub coefficients: Vec<CoeffRow>,
    /// positive-part mass for normalized estimates
    pub normalization: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoeffRow {
    /// 0 = father, 1..|M|-1 = mother index
    pub k: usize,
    pub j: i32,
    pub gamma: Vec<i32>,
    pub value: f64,
}

impl DensityEstimate {
    pub fn to_dto(&self) -> EstimateDto {
        let raw = self.raw();
        let mut rows = Vec::new();
        for (gamma, &value) in &raw.coeffs.theta {
            rows.push(CoeffRow { k: 0, j: raw.coeffs.j0, gamma: gamma.to_vec(), value });
        }
        for (&j, per_k) in &raw.coeffs.details {
            for (ki, map) in per_k.iter().enumerate() {
                for (gamma, &value) in map {
                    rows.push(CoeffRow { k: ki + 1, j, gamma: gamma.to_vec(), value });
                }
            }
        }
        rows.sort_by(|a, b| (a.k, a.j, &a.gamma).cmp(&(b.k, b.j, &b.gamma)));
        EstimateDto {
            basis: raw.basis.descriptor(),
            kind: raw.kind.clone(),
            theta_level: raw.coeffs.j0,
            coefficients: rows,
            normalization: self.normalization_mass(),
        }
    }

    pub fn from_dto(dto: &EstimateDto) -> Result<DensityEstimate> {
        let basis = Arc::new(WaveletBasis::from_descriptor(&dto.basis)?);
        let mut coeffs = CoefficientSet { j0: dto.theta_level, ..Default::default() };
        let mothers = basis.mother_count();
        for row in &dto.coefficients {
            let gamma: Gamma = row.gamma.iter().copied().collect();
            if row.k == 0 {
                coeffs.theta.insert(gamma, row.value);
            } else {
                if row.k > mothers {
                    return Err(Error::InvalidMotherIndex { k: row.k, max: mothers });
                }
                let per_k =
                    coeffs.details.entry(row.j).or_insert_with(|| vec![HashMap::new(); mothers]);
                per_k[row.k - 1].insert(gamma, row.value);
            }
        }
        let raw = RawEstimate { basis, coeffs, kind: dto.kind.clone() };
        Ok(match dto.normalization {
            Some(mass) => DensityEstimate::Normalized { inner: raw, mass },
            None => DensityEstimate::Raw(raw),
        })
    }
}
