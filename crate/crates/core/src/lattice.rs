//! Index sets on the N-dimensional integer lattice, the four-nearest
//! neighborhood graph, the checkerboard conclique partition and the
//! rectangular train/validate split used by the validation criterion.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

/// Aspect-ratio constant below which a shape is flagged as degenerate for
/// the asymptotic theory. Finite computations are unaffected, so a
/// violation only logs a warning.
pub const DEFAULT_ASPECT_RATIO: f64 = 0.2;

/// A rectangular index set `{s : 1 <= s_i <= n_i}` on `Z^N`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeShape {
    dims: Vec<usize>,
}

/// A single lattice site with 1-based coordinates.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct Site {
    pub coords: SmallVec<[i64; 2]>,
}

impl Site {
    pub fn new(coords: impl Into<SmallVec<[i64; 2]>>) -> Self {
        Site { coords: coords.into() }
    }

    pub fn from_coords(coords: &[i64]) -> Self {
        Site { coords: SmallVec::from_slice(coords) }
    }

    pub fn row(&self) -> i64 {
        self.coords[0]
    }

    pub fn col(&self) -> i64 {
        self.coords[1]
    }
}

impl LatticeShape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidShape("no dimensions given".into()));
        }
        if dims.iter().any(|&n| n == 0) {
            return Err(Error::InvalidShape(format!("zero-sized dimension in {dims:?}")));
        }
        let shape = LatticeShape { dims };
        let (min, max) = shape.min_max_dims();
        if (min as f64) < DEFAULT_ASPECT_RATIO * max as f64 {
            log::warn!(
                "lattice shape {:?} has aspect ratio {:.3} below {DEFAULT_ASPECT_RATIO}; \
                 the mixing-theory constant C' is not respected",
                shape.dims,
                min as f64 / max as f64,
            );
        }
        Ok(shape)
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(vec![n, n])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Lattice dimension N.
    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    /// `|I_n|`, the number of sites.
    pub fn cardinality(&self) -> usize {
        self.dims.iter().product()
    }

    fn min_max_dims(&self) -> (usize, usize) {
        let min = *self.dims.iter().min().unwrap();
        let max = *self.dims.iter().max().unwrap();
        (min, max)
    }

    pub fn contains(&self, site: &Site) -> bool {
        site.coords.len() == self.dims.len()
            && site
                .coords
                .iter()
                .zip(&self.dims)
                .all(|(&c, &n)| c >= 1 && c <= n as i64)
    }

    /// Row-major flat index of a site; sites are ordered lexicographically
    /// by their coordinates, the last coordinate varying fastest.
    pub fn flat_index(&self, site: &Site) -> Result<usize> {
        if !self.contains(site) {
            return Err(Error::SiteOutOfRange {
                site: site.coords.to_vec(),
                dims: self.dims.clone(),
            });
        }
        let mut idx = 0usize;
        for (&c, &n) in site.coords.iter().zip(&self.dims) {
            idx = idx * n + (c as usize - 1);
        }
        Ok(idx)
    }

    pub fn site_at(&self, mut flat: usize) -> Site {
        debug_assert!(flat < self.cardinality());
        let mut coords = SmallVec::<[i64; 2]>::from_elem(0, self.dims.len());
        for (slot, &n) in coords.iter_mut().zip(&self.dims).rev() {
            *slot = (flat % n) as i64 + 1;
            flat /= n;
        }
        Site { coords }
    }
}

/// The two-color partition of a rectangular lattice: no two sites within
/// the same class are four-neighbors.
#[derive(Clone, Debug)]
pub struct ConcliquePair {
    pub c1: Vec<Site>,
    pub c2: Vec<Site>,
}

/// All sites of the shape in row-major order.
pub fn build_index_set(shape: &LatticeShape) -> Vec<Site> {
    (0..shape.cardinality()).map(|i| shape.site_at(i)).collect()
}

/// The sites at L1-distance one inside the shape (free boundary).
pub fn four_neighbors(site: &Site, shape: &LatticeShape) -> Result<Vec<Site>> {
    if !shape.contains(site) {
        return Err(Error::SiteOutOfRange {
            site: site.coords.to_vec(),
            dims: shape.dims().to_vec(),
        });
    }
    let mut out = Vec::with_capacity(2 * shape.ndim());
    for axis in 0..shape.ndim() {
        for step in [-1i64, 1] {
            let mut coords = site.coords.clone();
            coords[axis] += step;
            let neighbor = Site { coords };
            if shape.contains(&neighbor) {
                out.push(neighbor);
            }
        }
    }
    Ok(out)
}

/// Checkerboard concliques for a two-dimensional lattice: `c1` holds the
/// sites with even coordinate sum.
pub fn concliques(shape: &LatticeShape) -> Result<ConcliquePair> {
    if shape.ndim() != 2 {
        return Err(Error::UnsupportedLattice(format!(
            "concliques are implemented for N=2, got N={}",
            shape.ndim()
        )));
    }
    let mut c1 = Vec::new();
    let mut c2 = Vec::new();
    for site in build_index_set(shape) {
        if (site.row() + site.col()) % 2 == 0 {
            c1.push(site);
        } else {
            c2.push(site);
        }
    }
    Ok(ConcliquePair { c1, c2 })
}

/// Splits the index set into the rectangular training block
/// `{s : s_i <= floor(fraction * n_i)}` and its L-shaped complement.
pub fn partition_train_validate(
    shape: &LatticeShape,
    fraction: f64,
) -> Result<(Vec<Site>, Vec<Site>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::DegenerateSplit { fraction });
    }
    let cut: Vec<i64> = shape
        .dims()
        .iter()
        .map(|&n| (fraction * n as f64).floor() as i64)
        .collect();
    if cut.iter().any(|&c| c < 1) || cut.iter().zip(shape.dims()).all(|(&c, &n)| c == n as i64) {
        return Err(Error::DegenerateSplit { fraction });
    }
    let mut train = Vec::new();
    let mut validate = Vec::new();
    for site in build_index_set(shape) {
        if site.coords.iter().zip(&cut).all(|(&s, &c)| s <= c) {
            train.push(site);
        } else {
            validate.push(site);
        }
    }
    Ok((train, validate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn site(coords: &[i64]) -> Site {
        Site::new(SmallVec::from_slice(coords))
    }

    #[test]
    fn index_set_single_site() {
        let shape = LatticeShape::new(vec![1, 1]).unwrap();
        assert_eq!(build_index_set(&shape), vec![site(&[1, 1])]);
    }

    #[test]
    fn index_set_row_major_2x2() {
        let shape = LatticeShape::new(vec![2, 2]).unwrap();
        assert_eq!(
            build_index_set(&shape),
            vec![site(&[1, 1]), site(&[1, 2]), site(&[2, 1]), site(&[2, 2])]
        );
    }

    #[test]
    fn index_set_paper_size() {
        let shape = LatticeShape::square(20).unwrap();
        let sites = build_index_set(&shape);
        assert_eq!(sites.len(), 400);
        // flat_index must be the inverse of site_at
        for (i, s) in sites.iter().enumerate() {
            assert_eq!(shape.flat_index(s).unwrap(), i);
        }
    }

    #[test]
    fn invalid_shapes_rejected() {
        assert!(matches!(LatticeShape::new(vec![0, 3]), Err(Error::InvalidShape(_))));
        assert!(matches!(LatticeShape::new(vec![]), Err(Error::InvalidShape(_))));
    }

    #[test]
    fn neighbors_corner_interior_edge() {
        let shape = LatticeShape::square(3).unwrap();
        let corner: HashSet<_> = four_neighbors(&site(&[1, 1]), &shape).unwrap().into_iter().collect();
        assert_eq!(corner, HashSet::from([site(&[1, 2]), site(&[2, 1])]));

        let interior: HashSet<_> = four_neighbors(&site(&[2, 2]), &shape).unwrap().into_iter().collect();
        assert_eq!(
            interior,
            HashSet::from([site(&[1, 2]), site(&[3, 2]), site(&[2, 1]), site(&[2, 3])])
        );

        let edge: HashSet<_> = four_neighbors(&site(&[1, 2]), &shape).unwrap().into_iter().collect();
        assert_eq!(edge, HashSet::from([site(&[1, 1]), site(&[1, 3]), site(&[2, 2])]));
    }

    #[test]
    fn neighbors_outside_rejected() {
        let shape = LatticeShape::square(3).unwrap();
        assert!(matches!(
            four_neighbors(&site(&[0, 1]), &shape),
            Err(Error::SiteOutOfRange { .. })
        ));
    }

    #[test]
    fn neighbor_symmetry() {
        let shape = LatticeShape::new(vec![4, 7]).unwrap();
        for s in build_index_set(&shape) {
            for t in four_neighbors(&s, &shape).unwrap() {
                assert!(four_neighbors(&t, &shape).unwrap().contains(&s));
            }
        }
    }

    #[test]
    fn conclique_examples() {
        let shape = LatticeShape::square(2).unwrap();
        let pair = concliques(&shape).unwrap();
        assert_eq!(pair.c1, vec![site(&[1, 1]), site(&[2, 2])]);
        assert_eq!(pair.c2, vec![site(&[1, 2]), site(&[2, 1])]);

        let pair = concliques(&LatticeShape::square(3).unwrap()).unwrap();
        assert_eq!((pair.c1.len(), pair.c2.len()), (5, 4));

        let pair = concliques(&LatticeShape::square(20).unwrap()).unwrap();
        assert_eq!((pair.c1.len(), pair.c2.len()), (200, 200));
    }

    #[test]
    fn conclique_unsupported_dimension() {
        let shape = LatticeShape::new(vec![2, 2, 2]).unwrap();
        assert!(matches!(concliques(&shape), Err(Error::UnsupportedLattice(_))));
    }

    /// Exhaustive checkerboard check on every shape up to 8x8: the two
    /// classes partition the index set and contain no neighboring pair.
    #[test]
    fn conclique_partition_exhaustive() {
        for n1 in 1..=8usize {
            for n2 in 1..=8usize {
                let shape = LatticeShape::new(vec![n1, n2]).unwrap();
                let pair = concliques(&shape).unwrap();
                let all: HashSet<_> = build_index_set(&shape).into_iter().collect();
                let c1: HashSet<_> = pair.c1.iter().cloned().collect();
                let c2: HashSet<_> = pair.c2.iter().cloned().collect();
                assert_eq!(c1.union(&c2).count(), all.len());
                assert!(c1.is_disjoint(&c2));
                for class in [&pair.c1, &pair.c2] {
                    for s in class {
                        for t in four_neighbors(s, &shape).unwrap() {
                            assert!(!class.contains(&t), "neighbors {s:?},{t:?} share a conclique");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn split_paper_example() {
        let shape = LatticeShape::square(20).unwrap();
        let (train, validate) = partition_train_validate(&shape, 0.9).unwrap();
        assert_eq!(train.len(), 324);
        assert_eq!(validate.len(), 76);
    }

    #[test]
    fn split_floor_behavior() {
        let shape = LatticeShape::square(10).unwrap();
        let (train, _) = partition_train_validate(&shape, 0.99).unwrap();
        assert_eq!(train.len(), 81);

        let shape = LatticeShape::square(65).unwrap();
        let (train, _) = partition_train_validate(&shape, 0.9).unwrap();
        assert_eq!(train.len(), 58 * 58);
    }

    #[test]
    fn split_covers_lattice() {
        for frac in [0.3, 0.5, 0.9, 0.95] {
            let shape = LatticeShape::new(vec![6, 9]).unwrap();
            let (train, validate) = partition_train_validate(&shape, frac).unwrap();
            let t: HashSet<_> = train.into_iter().collect();
            let v: HashSet<_> = validate.into_iter().collect();
            assert!(t.is_disjoint(&v));
            assert_eq!(t.len() + v.len(), 54);
        }
    }

    #[test]
    fn split_degenerate_rejected() {
        let shape = LatticeShape::square(3).unwrap();
        assert!(matches!(
            partition_train_validate(&shape, 0.1),
            Err(Error::DegenerateSplit { .. })
        ));
        assert!(matches!(
            partition_train_validate(&shape, 1.0),
            Err(Error::DegenerateSplit { .. })
        ));
    }
}
