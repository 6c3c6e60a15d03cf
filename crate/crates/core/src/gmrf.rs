//! Conclique-based Gibbs simulation of five coupled Gaussian Markov random
//! fields on a rectangular lattice, with a Gaussian copula tying the
//! per-site innovations together, and the transformation to a bivariate
//! uniform/Gaussian mixture target with known density.
//!
//! The conditional specification at a site is
//! `N(alpha + eta * sum_neighbors (z - alpha), sigma^2(s))` with the
//! conditional variances chosen so that every marginal is standard normal.
//! A full sweep updates one conclique given the other and then swaps; all
//! sites inside a conclique are conditionally independent, so the chain
//! mixes in two half-steps per sweep.

use crate::error::{Error, Result};
use crate::estimator::Sample;
use crate::lattice::{concliques, four_neighbors, LatticeShape, Site};
use crate::stats::{norm_cdf, norm_quantile};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use smallvec::SmallVec;

/// Number of coupled field components.
pub const COMPONENTS: usize = 5;

/// A 5x5 copula correlation matrix.
pub type Correlation5 = [[f64; 5]; 5];

/// Keeps copula uniforms strictly inside (0, 1) so the normal quantile
/// stays finite.
const UNIFORM_CLAMP: (f64, f64) = (1e-300, 1.0 - 1e-16);

// ---------------------------------------------------------------------------
// adjacency spectrum and admissibility
// ---------------------------------------------------------------------------

/// Extreme eigenvalues `(h0, hm)` of the four-neighbor adjacency matrix of
/// the free rectangular grid. The grid graph is a Kronecker sum of two
/// paths, so `hm = 2cos(pi/(n1+1)) + 2cos(pi/(n2+1))`, and bipartiteness
/// gives `h0 = -hm`.
pub fn adjacency_eigen_bounds(shape: &LatticeShape) -> Result<(f64, f64)> {
    if shape.ndim() != 2 {
        return Err(Error::UnsupportedLattice(format!(
            "adjacency spectrum implemented for N=2, got N={}",
            shape.ndim()
        )));
    }
    let hm: f64 = shape
        .dims()
        .iter()
        .map(|&n| 2.0 * (std::f64::consts::PI / (n as f64 + 1.0)).cos())
        .sum();
    Ok((-hm, hm))
}

/// Adjacency eigenvalue bounds for the lattice wrapped on a torus;
/// diagnostic companion to [`adjacency_eigen_bounds`]. The wave numbers
/// give eigenvalues `2cos(2 pi k1/n1) + 2cos(2 pi k2/n2)`.
pub fn adjacency_eigen_bounds_torus(shape: &LatticeShape) -> Result<(f64, f64)> {
    if shape.ndim() != 2 {
        return Err(Error::UnsupportedLattice("torus spectrum needs N=2".into()));
    }
    let (n1, n2) = (shape.dims()[0], shape.dims()[1]);
    let mut h0 = f64::INFINITY;
    let mut hm = f64::NEG_INFINITY;
    for k1 in 0..n1 {
        let a = 2.0 * (2.0 * std::f64::consts::PI * k1 as f64 / n1 as f64).cos();
        for k2 in 0..n2 {
            let b = 2.0 * (2.0 * std::f64::consts::PI * k2 as f64 / n2 as f64).cos();
            h0 = h0.min(a + b);
            hm = hm.max(a + b);
        }
    }
    Ok((h0, hm))
}

/// The open interval of dependence parameters for which `I - eta H` is
/// invertible via the Neumann series: `((h0)^{-1}, (hm)^{-1})`.
pub fn admissible_eta_range(h0: f64, hm: f64) -> Result<(f64, f64)> {
    if !(h0 < 0.0 && hm > 0.0) {
        return Err(Error::BipartiteViolation { h0, hm });
    }
    Ok((1.0 / h0, 1.0 / hm))
}

fn check_eta(shape: &LatticeShape, eta: f64) -> Result<()> {
    if eta == 0.0 {
        return Ok(());
    }
    let (h0, hm) = adjacency_eigen_bounds(shape)?;
    let (lo, hi) = admissible_eta_range(h0, hm)?;
    if eta <= lo || eta >= hi {
        return Err(Error::EtaOutOfRange { eta, lo, hi });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// conditional variances
// ---------------------------------------------------------------------------

/// Per-site conditional variances `sigma^2(s) = 1 / [(I - eta H)^{-1}]_ss`,
/// which make every marginal exactly standard normal.
///
/// The free grid is a Kronecker sum of paths with known sine eigenvectors,
/// so the diagonal of the inverse factors into two small matrix products;
/// this is exact and much cheaper than a dense inverse, which the tests
/// keep as the oracle.
pub fn conditional_variances(shape: &LatticeShape, eta: f64) -> Result<Vec<f64>> {
    if shape.ndim() != 2 {
        return Err(Error::UnsupportedLattice("conditional variances need N=2".into()));
    }
    let n = shape.cardinality();
    if eta == 0.0 {
        return Ok(vec![1.0; n]);
    }
    check_eta(shape, eta)?;

    let (n1, n2) = (shape.dims()[0], shape.dims()[1]);
    let axis = |len: usize| -> (Vec<f64>, Vec<f64>) {
        // eigenvalues and squared eigenvector entries of the path graph
        let base = std::f64::consts::PI / (len as f64 + 1.0);
        let lambda: Vec<f64> = (1..=len).map(|k| 2.0 * (base * k as f64).cos()).collect();
        let mut sq = vec![0.0; len * len]; // sq[i*len + k] = v_k(i)^2
        for i in 1..=len {
            for k in 1..=len {
                let v = (2.0 / (len as f64 + 1.0)).sqrt() * (base * (i * k) as f64).sin();
                sq[(i - 1) * len + (k - 1)] = v * v;
            }
        }
        (lambda, sq)
    };
    let (lam1, sq1) = axis(n1);
    let (lam2, sq2) = axis(n2);

    // b[k1][i2] = sum_k2 sq2[i2][k2] / (1 - eta (lam1[k1] + lam2[k2]))
    let mut b = vec![0.0f64; n1 * n2];
    for k1 in 0..n1 {
        for i2 in 0..n2 {
            let mut acc = 0.0;
            for k2 in 0..n2 {
                let denom = 1.0 - eta * (lam1[k1] + lam2[k2]);
                debug_assert!(denom > 0.0);
                acc += sq2[i2 * n2 + k2] / denom;
            }
            b[k1 * n2 + i2] = acc;
        }
    }
    let mut out = vec![0.0f64; n];
    for i1 in 0..n1 {
        for i2 in 0..n2 {
            let mut diag = 0.0;
            for k1 in 0..n1 {
                diag += sq1[i1 * n1 + k1] * b[k1 * n2 + i2];
            }
            out[i1 * n2 + i2] = 1.0 / diag;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// field specification
// ---------------------------------------------------------------------------

/// Parameters of one Gaussian Markov random field component.
#[derive(Clone, Debug)]
pub struct GmrfSpec {
    pub shape: LatticeShape,
    pub eta: f64,
    pub mean: f64,
    pub cond_var: Vec<f64>,
}

impl GmrfSpec {
    pub fn build(shape: &LatticeShape, eta: f64, mean: f64) -> Result<Self> {
        let cond_var = conditional_variances(shape, eta)?;
        Ok(GmrfSpec { shape: shape.clone(), eta, mean, cond_var })
    }
}

/// One conditional draw at a site given its neighbors and a uniform
/// innovation: `alpha + eta sum_t (z(t) - alpha) + sigma(s) Phi^{-1}(u)`.
pub fn conditional_update(site: &Site, field: &[f64], spec: &GmrfSpec, u: f64) -> Result<f64> {
    let mut acc = 0.0;
    for t in four_neighbors(site, &spec.shape)? {
        acc += field[spec.shape.flat_index(&t)?] - spec.mean;
    }
    let idx = spec.shape.flat_index(site)?;
    Ok(spec.mean + spec.eta * acc + spec.cond_var[idx].sqrt() * norm_quantile(u))
}

// ---------------------------------------------------------------------------
// copula coupling
// ---------------------------------------------------------------------------

/// Lower Cholesky factor of a copula correlation matrix, precomputed for
/// the per-site innovation draws.
#[derive(Clone, Debug)]
pub struct CopulaCoupler {
    l: [[f64; 5]; 5],
}

impl CopulaCoupler {
    pub fn new(r: &Correlation5) -> Result<Self> {
        for i in 0..5 {
            if (r[i][i] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidCorrelation { rho: r[i][i] });
            }
            for j in 0..i {
                if (r[i][j] - r[j][i]).abs() > 1e-12 {
                    return Err(Error::NotPositiveDefinite);
                }
            }
        }
        let m = nalgebra::SMatrix::<f64, 5, 5>::from_fn(|i, j| r[i][j]);
        let chol = m.cholesky().ok_or(Error::NotPositiveDefinite)?;
        let lm = chol.l();
        let mut l = [[0.0; 5]; 5];
        for i in 0..5 {
            for j in 0..=i {
                l[i][j] = lm[(i, j)];
            }
        }
        Ok(CopulaCoupler { l })
    }

    /// `u = Phi(L g)` componentwise, clamped into the open unit interval.
    #[inline]
    pub fn coupled_uniforms(&self, g: &[f64; 5]) -> [f64; 5] {
        let mut u = [0.0; 5];
        for i in 0..5 {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += self.l[i][j] * g[j];
            }
            u[i] = norm_cdf(acc).clamp(UNIFORM_CLAMP.0, UNIFORM_CLAMP.1);
        }
        u
    }
}

/// Copula-coupled uniforms from independent standard normal draws.
pub fn copula_coupled_uniforms(r: &Correlation5, g: &[f64; 5]) -> Result<[f64; 5]> {
    Ok(CopulaCoupler::new(r)?.coupled_uniforms(g))
}

/// The paper's copula: components one/two and three/four correlated at
/// 0.1, component five independent.
pub fn default_copula_correlation() -> Correlation5 {
    let mut r = [[0.0; 5]; 5];
    for (i, row) in r.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    r[0][1] = 0.1;
    r[1][0] = 0.1;
    r[2][3] = 0.1;
    r[3][2] = 0.1;
    r
}

/// The paper's dependence parameters for the five components.
pub const PAPER_ETAS: [f64; 5] = [0.2, -0.1, -0.22, 0.2, 0.22];

// ---------------------------------------------------------------------------
// coupled fields and the chain
// ---------------------------------------------------------------------------

/// The five coupled lattice fields plus everything the sweeps need:
/// per-component specs, the copula factor, conclique site lists in
/// row-major order and flat neighbor lists.
#[derive(Clone, Debug)]
pub struct MultiField {
    shape: LatticeShape,
    specs: Vec<GmrfSpec>,
    coupler: CopulaCoupler,
    correlation: Correlation5,
    fields: Vec<Vec<f64>>,
    conclique_sites: [Vec<u32>; 2],
    neighbors: Vec<SmallVec<[u32; 4]>>,
}

impl MultiField {
    /// Validates the copula matrix (symmetric positive definite, unit
    /// diagonal, fifth component independent) and the admissibility of
    /// every `eta`; fields start at zero until [`MultiField::init_iid`].
    pub fn new(shape: &LatticeShape, etas: &[f64; 5], r: &Correlation5) -> Result<Self> {
        for i in 0..4 {
            if r[4][i] != 0.0 || r[i][4] != 0.0 {
                return Err(Error::InvalidCorrelation { rho: r[4][i].max(r[i][4]) });
            }
        }
        let coupler = CopulaCoupler::new(r)?;
        let specs = etas
            .iter()
            .map(|&eta| GmrfSpec::build(shape, eta, 0.0))
            .collect::<Result<Vec<_>>>()?;
        let pair = concliques(shape)?;
        let flat = |sites: &[Site]| -> Vec<u32> {
            sites.iter().map(|s| shape.flat_index(s).unwrap() as u32).collect()
        };
        let n = shape.cardinality();
        let mut neighbors = Vec::with_capacity(n);
        for i in 0..n {
            let site = shape.site_at(i);
            let list: SmallVec<[u32; 4]> = four_neighbors(&site, shape)
                .unwrap()
                .into_iter()
                .map(|t| shape.flat_index(&t).unwrap() as u32)
                .collect();
            neighbors.push(list);
        }
        Ok(MultiField {
            shape: shape.clone(),
            specs,
            coupler,
            correlation: *r,
            fields: vec![vec![0.0; n]; COMPONENTS],
            conclique_sites: [flat(&pair.c1), flat(&pair.c2)],
            neighbors,
        })
    }

    pub fn shape(&self) -> &LatticeShape {
        &self.shape
    }

    pub fn etas(&self) -> [f64; 5] {
        std::array::from_fn(|i| self.specs[i].eta)
    }

    pub fn correlation(&self) -> &Correlation5 {
        &self.correlation
    }

    pub fn field(&self, component: usize) -> &[f64] {
        &self.fields[component]
    }

    /// Independent standard normal start, site-major then component order.
    pub fn init_iid(&mut self, rng: &mut ChaCha8Rng) {
        for site in 0..self.shape.cardinality() {
            for comp in 0..COMPONENTS {
                self.fields[comp][site] = rng.sample(StandardNormal);
            }
        }
    }
}

/// Runs `iterations` full conclique sweeps in place. Each sweep updates
/// every site of the first conclique given the second, then the second
/// given the refreshed first; one five-dimensional copula draw per site
/// and half-sweep is shared across the components.
pub fn run_chain(multi: &mut MultiField, iterations: usize, rng: &mut ChaCha8Rng) {
    let specs = &multi.specs;
    let sds: Vec<Vec<f64>> = specs
        .iter()
        .map(|sp| sp.cond_var.iter().map(|v| v.sqrt()).collect())
        .collect();
    let etas: Vec<f64> = specs.iter().map(|sp| sp.eta).collect();
    let means: Vec<f64> = specs.iter().map(|sp| sp.mean).collect();
    for _ in 0..iterations {
        for class in &multi.conclique_sites {
            for &s in class {
                let s = s as usize;
                let g: [f64; 5] = std::array::from_fn(|_| rng.sample(StandardNormal));
                let u = multi.coupler.coupled_uniforms(&g);
                for comp in 0..COMPONENTS {
                    let field = &mut multi.fields[comp];
                    let mut acc = 0.0;
                    for &t in &multi.neighbors[s] {
                        acc += field[t as usize] - means[comp];
                    }
                    field[s] =
                        means[comp] + etas[comp] * acc + sds[comp][s] * norm_quantile(u[comp]);
                }
            }
        }
    }
}

/// Simulates the five coupled fields from scratch: i.i.d. initialization
/// followed by `iterations` sweeps, all driven by one seeded stream.
pub fn simulate_fields(
    shape: &LatticeShape,
    etas: &[f64; 5],
    r: &Correlation5,
    iterations: usize,
    rng: &mut ChaCha8Rng,
) -> Result<MultiField> {
    let mut multi = MultiField::new(shape, etas, r)?;
    multi.init_iid(rng);
    run_chain(&mut multi, iterations, rng);
    Ok(multi)
}

/// The independent reference sampler: the same initialization, sweep
/// structure and innovation stream as [`run_chain`], but each value is the
/// plain copula innovation `Phi^{-1}(u)`. With every `eta = 0` the chain
/// degenerates to exactly this path, bit for bit.
pub fn sample_iid_fields(
    shape: &LatticeShape,
    r: &Correlation5,
    iterations: usize,
    rng: &mut ChaCha8Rng,
) -> Result<MultiField> {
    let mut multi = MultiField::new(shape, &[0.0; 5], r)?;
    multi.init_iid(rng);
    for _ in 0..iterations {
        for class_idx in 0..2 {
            let class = multi.conclique_sites[class_idx].clone();
            for &s in &class {
                let g: [f64; 5] = std::array::from_fn(|_| rng.sample(StandardNormal));
                let u = multi.coupler.coupled_uniforms(&g);
                for comp in 0..COMPONENTS {
                    multi.fields[comp][s as usize] = norm_quantile(u[comp]);
                }
            }
        }
    }
    Ok(multi)
}

// ---------------------------------------------------------------------------
// target transformation
// ---------------------------------------------------------------------------

/// Gaussian-block scale of the mixture target.
pub const TARGET_SIGMA: f64 = 0.2;
/// Gaussian-block center of the mixture target.
pub const TARGET_MEAN: f64 = 0.5;

/// Per-site transformation to the mixture target: component five selects
/// the block (`S = 1 iff Phi(Z5) > 0.5`, i.e. `Z5 > 0`), components one
/// and two give the uniforms, three and four the Gaussian pair.
pub fn transform_to_target(multi: &MultiField) -> Sample {
    let n = multi.shape.cardinality();
    let mut flat = Vec::with_capacity(2 * n);
    for s in 0..n {
        if multi.fields[4][s] > 0.0 {
            flat.push(TARGET_MEAN + TARGET_SIGMA * multi.fields[2][s]);
            flat.push(TARGET_MEAN + TARGET_SIGMA * multi.fields[3][s]);
        } else {
            flat.push(norm_cdf(multi.fields[0][s]));
            flat.push(norm_cdf(multi.fields[1][s]));
        }
    }
    Sample::new(2, flat).expect("transform produces well-formed 2-d points")
}

/// The mixture density on `R^2`: half a unit-square uniform block, half a
/// bivariate normal centered at (0.5, 0.5) with scale 0.2 and correlation
/// `rho`.
pub fn target_pdf(x: &[f64], rho: f64) -> Result<f64> {
    if !(rho.abs() < 1.0) {
        return Err(Error::InvalidCorrelation { rho });
    }
    let uniform = if (0.0..=1.0).contains(&x[0]) && (0.0..=1.0).contains(&x[1]) { 1.0 } else { 0.0 };
    let dx = (x[0] - TARGET_MEAN) / TARGET_SIGMA;
    let dy = (x[1] - TARGET_MEAN) / TARGET_SIGMA;
    let det = 1.0 - rho * rho;
    let quad = (dx * dx - 2.0 * rho * dx * dy + dy * dy) / det;
    let gauss = (-0.5 * quad).exp()
        / (2.0 * std::f64::consts::PI * TARGET_SIGMA * TARGET_SIGMA * det.sqrt());
    Ok(0.5 * uniform + 0.5 * gauss)
}

/// The mixture target with a fixed Gaussian-block correlation.
#[derive(Clone, Copy, Debug)]
pub struct TargetDensity {
    pub rho: f64,
}

impl TargetDensity {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho.abs() < 1.0) {
            return Err(Error::InvalidCorrelation { rho });
        }
        Ok(TargetDensity { rho })
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        target_pdf(x, self.rho).expect("rho validated at construction")
    }
}

// ---------------------------------------------------------------------------
// diagnostics
// ---------------------------------------------------------------------------

/// Pearson correlation over all symmetrized four-neighbor pairs of a flat
/// field; its sign tracks the sign of `eta`.
pub fn neighbor_correlation(shape: &LatticeShape, field: &[f64]) -> f64 {
    let (n1, n2) = (shape.dims()[0], shape.dims()[1]);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i1 in 0..n1 {
        for i2 in 0..n2 {
            let s = i1 * n2 + i2;
            if i2 + 1 < n2 {
                xs.push(field[s]);
                ys.push(field[s + 1]);
            }
            if i1 + 1 < n1 {
                xs.push(field[s]);
                ys.push(field[s + n2]);
            }
        }
    }
    let mut both_x = xs.clone();
    both_x.extend_from_slice(&ys);
    let mut both_y = ys;
    both_y.extend_from_slice(&xs);
    crate::stats::pearson_corr(&both_x, &both_y)
}
