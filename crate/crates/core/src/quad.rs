//! Midpoint quadrature grids and a small adaptive Simpson integrator.
//!
//! Midpoint grids integrate the piecewise-constant Haar estimates exactly
//! whenever the grid is dyadically aligned with the estimate's cells, which
//! is why they are the default for the ISE and normalization integrals.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

/// A regular midpoint rule on an axis-aligned box in `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    lo: Vec<f64>,
    hi: Vec<f64>,
    res: Vec<usize>,
}

impl QuadratureGrid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, res: Vec<usize>) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() != res.len() || lo.is_empty() {
            return Err(Error::InvalidShape("mismatched quadrature grid axes".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) || res.iter().any(|&r| r == 0) {
            return Err(Error::InvalidShape("empty quadrature box".into()));
        }
        Ok(QuadratureGrid { lo, hi, res })
    }

    /// The default grid for the bivariate mixture target: 512x512 midpoints
    /// on [-0.5, 1.5]^2. The box captures all but ~1e-12 of the Gaussian
    /// block's mass and is dyadically aligned with Haar cells up to level 8.
    pub fn target_default() -> Self {
        QuadratureGrid {
            lo: vec![-0.5, -0.5],
            hi: vec![1.5, 1.5],
            res: vec![512, 512],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn resolution(&self) -> &[usize] {
        &self.res
    }

    pub fn len(&self) -> usize {
        self.res.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(&self.res)
            .map(|((a, b), &r)| (b - a) / r as f64)
            .product()
    }

    pub fn axis_midpoints(&self, axis: usize) -> Vec<f64> {
        let step = (self.hi[axis] - self.lo[axis]) / self.res[axis] as f64;
        (0..self.res[axis])
            .map(|i| self.lo[axis] + (i as f64 + 0.5) * step)
            .collect()
    }

    /// Visits every midpoint node in row-major order.
    pub fn for_each_node(&self, mut visit: impl FnMut(&[f64])) {
        let axes: Vec<Vec<f64>> = (0..self.dim()).map(|a| self.axis_midpoints(a)).collect();
        let mut index = vec![0usize; self.dim()];
        let mut point: SmallVec<[f64; 4]> = axes.iter().map(|a| a[0]).collect();
        loop {
            visit(&point);
            // increment the multi-index, last axis fastest
            let mut axis = self.dim();
            loop {
                if axis == 0 {
                    return;
                }
                axis -= 1;
                index[axis] += 1;
                if index[axis] < self.res[axis] {
                    point[axis] = axes[axis][index[axis]];
                    break;
                }
                index[axis] = 0;
                point[axis] = axes[axis][0];
            }
        }
    }

    pub fn integrate(&self, f: impl FnMut(&[f64]) -> f64) -> f64 {
        let mut f = f;
        let mut sum = 0.0;
        self.for_each_node(|x| sum += f(x));
        sum * self.cell_volume()
    }

    /// Integrates row-major node values produced by a previous sweep.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        values.iter().sum::<f64>() * self.cell_volume()
    }
}

fn simpson_step(f: &mut impl FnMut(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
}

#[allow(clippy::too_many_arguments)]
fn simpson_recurse(
    f: &mut impl FnMut(f64) -> f64,
    a: f64,
    fa: f64,
    m: f64,
    fm: f64,
    b: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let (ml, fml, left) = simpson_step(f, a, fa, m, fm);
    let (mr, fmr, right) = simpson_step(f, m, fm, b, fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol || depth == 0 {
        return left + right + delta / 15.0;
    }
    simpson_recurse(f, a, fa, ml, fml, m, fm, left, 0.5 * tol, depth - 1)
        + simpson_recurse(f, m, fm, mr, fmr, b, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature on [a, b].
pub fn adaptive_simpson(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let (m, fm, whole) = simpson_step(&mut f, a, fa, b, fb);
    simpson_recurse(&mut f, a, fa, m, fm, b, fb, whole, tol, 40)
}

/// Adaptive Simpson with interior breakpoints at which the integrand may be
/// discontinuous; the rule is applied per smooth segment.
pub fn adaptive_simpson_with_breaks(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: f64,
) -> f64 {
    let mut cuts: Vec<f64> = std::iter::once(a)
        .chain(breaks.iter().copied().filter(|&t| t > a && t < b))
        .chain(std::iter::once(b))
        .collect();
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let seg_tol = tol / (cuts.len() - 1) as f64;
    cuts.windows(2)
        .map(|w| adaptive_simpson(&mut f, w[0], w[1], seg_tol))
        .sum()
}
