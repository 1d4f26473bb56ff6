//! Synthetic Gaussian blobs for benchmarks and tests.

use activeclust_core::similarity::Dataset;
use activeclust_core::Matrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// `k` isotropic blobs of `per_cluster` samples in `dim >= 2` dimensions.
/// Centres sit evenly on a circle of radius `radius` in the first two
/// coordinates; every coordinate gets noise with standard deviation `spread`.
/// Samples are labelled `0..k` and shuffled, so that index order carries no
/// class information.
pub fn gaussian_blobs(k: usize, per_cluster: usize, dim: usize, radius: f64, spread: f64, seed: u64) -> Dataset {
    assert!(dim >= 2, "blobs need at least two dimensions");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spread).expect("finite spread");
    let n = k * per_cluster;
    let mut labels: Vec<usize> = (0..n).map(|i| i / per_cluster).collect();
    labels.shuffle(&mut rng);
    let mut data = Vec::with_capacity(n * dim);
    for &c in &labels {
        let angle = std::f64::consts::TAU * c as f64 / k as f64;
        let centre = [radius * angle.cos(), radius * angle.sin()];
        for d in 0..dim {
            data.push(centre.get(d).copied().unwrap_or(0.0) + noise.sample(&mut rng));
        }
    }
    Dataset::new(Matrix::from_vec(n, dim, data).expect("sized"), Some(labels)).expect("valid blobs")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let a = gaussian_blobs(3, 20, 2, 10.0, 0.5, 4);
        assert_eq!(a.len(), 60);
        assert_eq!(a.class_count(), Some(3));
        assert_eq!(a.features(), gaussian_blobs(3, 20, 2, 10.0, 0.5, 4).features());
        let labels = a.labels().unwrap();
        assert!((0..3).all(|c| labels.iter().filter(|&&l| l == c).count() == 20));
        assert!(labels[..20].iter().any(|&l| l != labels[0]), "order is shuffled");
    }

    #[test]
    fn samples_stay_near_their_centre() {
        let ds = gaussian_blobs(4, 50, 3, 10.0, 0.5, 1);
        for (i, &l) in ds.labels().unwrap().iter().enumerate() {
            let angle = std::f64::consts::TAU * l as f64 / 4.0;
            let row = ds.features().row(i);
            let d2 = (row[0] - 10.0 * angle.cos()).powi(2) + (row[1] - 10.0 * angle.sin()).powi(2) + row[2].powi(2);
            assert!(d2.sqrt() < 4.0);
        }
    }
}
