//! End-to-end checks of the sampling -> estimation -> assessment pipeline
//! on the bivariate mixture target.

use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use std::sync::Arc;
use wavedens::estimator::linear_estimate;
use wavedens::gmrf::{
    default_copula_correlation, sample_iid_fields, transform_to_target, TargetDensity,
};
use wavedens::lattice::LatticeShape;
use wavedens::postprocess::{ise, QuadratureGrid};
use wavedens::stats::mean;
use wavedens::wavelet::{haar_filters, tensor_basis};

/// Monte-Carlo ISE oracle: on mixture samples the level-2 Haar estimator
/// beats level 0, and more data improves the level-2 estimator.
#[test]
fn mixture_ise_improves_with_level_and_size() {
    let basis = Arc::new(tensor_basis(haar_filters(), 2).unwrap());
    let grid = QuadratureGrid::target_default();
    let target = TargetDensity::new(0.1).unwrap();
    let r = default_copula_correlation();

    let mut ise_j0_large = Vec::new();
    let mut ise_j2_large = Vec::new();
    let mut ise_j2_small = Vec::new();
    for rep in 0..12u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + rep);
        let big = sample_iid_fields(&LatticeShape::square(50).unwrap(), &r, 1, &mut rng).unwrap();
        let y = transform_to_target(&big);
        let est0 = linear_estimate(&y, &basis, 0).unwrap();
        let est2 = linear_estimate(&y, &basis, 2).unwrap();
        ise_j0_large.push(ise(&est0, &|x: &[f64]| target.pdf(x), &grid));
        ise_j2_large.push(ise(&est2, &|x: &[f64]| target.pdf(x), &grid));

        let mut rng = ChaCha8Rng::seed_from_u64(2000 + rep);
        let small = sample_iid_fields(&LatticeShape::square(20).unwrap(), &r, 1, &mut rng).unwrap();
        let y = transform_to_target(&small);
        let est2 = linear_estimate(&y, &basis, 2).unwrap();
        ise_j2_small.push(ise(&est2, &|x: &[f64]| target.pdf(x), &grid));
    }
    let (j0_large, j2_large, j2_small) =
        (mean(&ise_j0_large), mean(&ise_j2_large), mean(&ise_j2_small));
    assert!(
        j2_large < j0_large,
        "level 2 should beat level 0 at n=2500: {j2_large} vs {j0_large}"
    );
    assert!(
        j2_large < j2_small,
        "n=2500 should beat n=400 at level 2: {j2_large} vs {j2_small}"
    );
}
