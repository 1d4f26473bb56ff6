//! Datasets and pairwise affinity matrices.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::matrix::{squared_distance, Matrix};
use crate::{Error, Result};

/// Guard added to each chi-squared bin denominator.
pub const CHI2_EPS: f64 = 1e-12;

/// Largest asymmetry tolerated when importing a precomputed matrix.
pub const ASYMMETRY_TOL: f64 = 1e-8;

/// `n x d` feature matrix with optional ground-truth classes. Sample ids are
/// the row indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Matrix,
    labels: Option<Vec<usize>>,
}

impl Dataset {
    /// `labels`, when given, must already be dense in `0..C`; see
    /// [`canonicalize_labels`].
    pub fn new(features: Matrix, labels: Option<Vec<usize>>) -> Result<Self> {
        let n = features.rows();
        if n < 2 {
            return Err(Error::TooFewSamples(n));
        }
        if features.cols() == 0 {
            return Err(Error::Shape("samples have no features".into()));
        }
        if features.as_slice().iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite feature value".into()));
        }
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(Error::Shape(format!("{} labels for {n} samples", labels.len())));
            }
            let classes = labels.iter().max().map_or(0, |m| m + 1);
            let mut seen = alloc::vec![false; classes];
            for &l in labels {
                seen[l] = true;
            }
            if seen.iter().any(|s| !s) {
                return Err(Error::InvalidInput("labels are not contiguous".into()));
            }
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn class_count(&self) -> Option<usize> {
        self.labels.as_ref().map(|l| l.iter().max().map_or(0, |m| m + 1))
    }

    /// Rescales every feature column to zero mean and unit variance.
    /// Constant columns are centred only.
    pub fn standardized(&self) -> Self {
        let (n, d) = (self.len(), self.dim());
        let mut out = self.features.clone();
        for j in 0..d {
            let col = self.features.column(j);
            let mean = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
            let sd = libm::sqrt(var);
            for i in 0..n {
                let centred = col[i] - mean;
                out[(i, j)] = if sd > 0.0 { centred / sd } else { centred };
            }
        }
        Self { features: out, labels: self.labels.clone() }
    }
}

/// Maps arbitrary labels to dense integers in order of first appearance.
pub fn canonicalize_labels<T: Ord + Clone>(raw: &[T]) -> Vec<usize> {
    let mut ids = BTreeMap::new();
    raw.iter()
        .map(|l| {
            let next = ids.len();
            *ids.entry(l.clone()).or_insert(next)
        })
        .collect()
}

/// Symmetric `n x n` affinity matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    w: Matrix,
}

impl SimilarityMatrix {
    /// Imports a precomputed matrix: rejects non-square or noticeably
    /// asymmetric input, averages away residual asymmetry, zeroes the diagonal.
    pub fn from_matrix(m: Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Shape(format!("similarity matrix must be square, got {}x{}", m.rows(), m.cols())));
        }
        if m.as_slice().iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite similarity".into()));
        }
        let asym = m.max_asymmetry();
        if asym > ASYMMETRY_TOL {
            return Err(Error::Asymmetric(asym));
        }
        let n = m.rows();
        let mut w = m;
        for i in 0..n {
            w[(i, i)] = 0.0;
            for j in (i + 1)..n {
                let mean = 0.5 * (w[(i, j)] + w[(j, i)]);
                w[(i, j)] = mean;
                w[(j, i)] = mean;
            }
        }
        Ok(Self { w })
    }

    pub fn len(&self) -> usize {
        self.w.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[(i, j)]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.w.row(i)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.w
    }

    /// Writes `value` to both `(i, j)` and `(j, i)`.
    pub(crate) fn set_pair(&mut self, i: usize, j: usize, value: f64) {
        self.w[(i, j)] = value;
        self.w[(j, i)] = value;
    }

    fn from_pair_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut w = Matrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = f(i, j);
                w[(i, j)] = v;
                w[(j, i)] = v;
            }
        }
        Self { w }
    }
}

/// `exp(-|x_i - x_j|^2 / (2 sigma^2))` off the diagonal.
pub fn gaussian_similarity(ds: &Dataset, sigma: f64) -> Result<SimilarityMatrix> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("gaussian sigma must be positive, got {sigma}")));
    }
    let x = ds.features();
    let denom = 2.0 * sigma * sigma;
    Ok(SimilarityMatrix::from_pair_fn(ds.len(), |i, j| libm::exp(-squared_distance(x.row(i), x.row(j)) / denom)))
}

/// `exp(-gamma * sum_k (x_ik - x_jk)^2 / (x_ik + x_jk + eps))` off the
/// diagonal. Features must be nonnegative.
pub fn chi2_similarity(ds: &Dataset, gamma: f64) -> Result<SimilarityMatrix> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("chi-squared gamma must be positive, got {gamma}")));
    }
    let x = ds.features();
    if let Some(neg) = x.as_slice().iter().find(|&&v| v < 0.0) {
        return Err(Error::InvalidInput(format!("chi-squared kernel needs nonnegative features, found {neg}")));
    }
    Ok(SimilarityMatrix::from_pair_fn(ds.len(), |i, j| libm::exp(-gamma * chi2_distance(x.row(i), x.row(j)))))
}

fn chi2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d / (x + y + CHI2_EPS)
        })
        .sum()
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}

fn pairwise(ds: &Dataset, f: impl Fn(&[f64], &[f64]) -> f64) -> Vec<f64> {
    let x = ds.features();
    let n = ds.len();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            out.push(f(x.row(i), x.row(j)));
        }
    }
    out
}

/// Median Euclidean distance over all unordered sample pairs. Used as the
/// default Gaussian bandwidth.
pub fn median_pairwise_distance(ds: &Dataset) -> f64 {
    median(pairwise(ds, |a, b| libm::sqrt(squared_distance(a, b))))
}

/// Median chi-squared distance over all unordered sample pairs. Its
/// reciprocal is the default chi-squared `gamma`.
pub fn median_chi2_distance(ds: &Dataset) -> f64 {
    median(pairwise(ds, chi2_distance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dataset(rows: &[&[f64]]) -> Dataset {
        Dataset::new(Matrix::from_rows(rows).unwrap(), None).unwrap()
    }

    fn random_dataset(n: usize, d: usize, seed: u64, nonneg: bool) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..d)
                    .map(|_| {
                        let x: f64 = rng.random();
                        if nonneg {
                            x * 3.0
                        } else {
                            x * 4.0 - 2.0
                        }
                    })
                    .collect()
            })
            .collect();
        Dataset::new(Matrix::from_rows(&rows).unwrap(), None).unwrap()
    }

    #[test]
    fn dataset_validation() {
        assert_eq!(Dataset::new(Matrix::from_rows(&[[1.0]]).unwrap(), None), Err(Error::TooFewSamples(1)));
        let m = Matrix::from_rows(&[[1.0], [2.0], [3.0]]).unwrap();
        assert!(Dataset::new(m.clone(), Some(alloc::vec![0, 2, 2])).is_err());
        let ds = Dataset::new(m, Some(alloc::vec![1, 0, 1])).unwrap();
        assert_eq!(ds.class_count(), Some(2));
    }

    #[test]
    fn labels_canonicalized_by_first_appearance() {
        assert_eq!(canonicalize_labels(&["b", "a", "b", "c"]), alloc::vec![0, 1, 0, 2]);
    }

    #[test]
    fn gaussian_identical_rows_and_analytic_point() {
        let ds = dataset(&[&[1.0, 2.0], &[1.0, 2.0], &[1.0 + 2f64.sqrt(), 2.0]]);
        let w = gaussian_similarity(&ds, 1.0).unwrap();
        assert_eq!(w.get(0, 1), 1.0);
        assert_relative_eq!(w.get(0, 2), (-1.0f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(w.get(0, 2), 0.367879, epsilon = 1e-6);
        assert_eq!(w.get(1, 1), 0.0);
        assert!(matches!(gaussian_similarity(&ds, 0.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(gaussian_similarity(&ds, -1.0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn gaussian_matches_double_loop() {
        let ds = random_dataset(5, 3, 11, false);
        let sigma = 0.8;
        let w = gaussian_similarity(&ds, sigma).unwrap();
        let x = ds.features();
        for i in 0..5 {
            for j in 0..5 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += (x[(i, k)] - x[(j, k)]).powi(2);
                }
                let expected = if i == j { 0.0 } else { (-s / (2.0 * sigma * sigma)).exp() };
                assert_relative_eq!(w.get(i, j), expected, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn chi2_cases() {
        let ds = dataset(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 0.0]]);
        let w = chi2_similarity(&ds, 1.0).unwrap();
        assert_relative_eq!(w.get(0, 1), (-2.0f64).exp(), max_relative = 1e-10);
        assert_eq!(w.get(0, 2), 1.0);
        let neg = dataset(&[&[1.0, -0.5], &[0.0, 1.0]]);
        assert!(matches!(chi2_similarity(&neg, 1.0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn chi2_matches_brute_force() {
        let ds = random_dataset(6, 4, 5, true);
        let gamma = 0.7;
        let w = chi2_similarity(&ds, gamma).unwrap();
        let x = ds.features();
        for i in 0..6 {
            for j in 0..6 {
                if i == j {
                    assert_eq!(w.get(i, j), 0.0);
                    continue;
                }
                let mut s = 0.0;
                for k in 0..4 {
                    let (a, b) = (x[(i, k)], x[(j, k)]);
                    s += (a - b) * (a - b) / (a + b + 1e-12);
                }
                assert_relative_eq!(w.get(i, j), (-gamma * s).exp(), max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn precomputed_symmetrized() {
        let m = Matrix::from_rows(&[[0.3, 0.5, 0.1], [0.5 + 1e-10, 0.2, 0.4], [0.1, 0.4, 0.9]]).unwrap();
        let w = SimilarityMatrix::from_matrix(m).unwrap();
        assert_relative_eq!(w.get(0, 1), 0.5 + 0.5e-10, max_relative = 1e-15);
        assert_relative_eq!(w.get(0, 1), 0.5, epsilon = 1e-9);
        assert_eq!(w.get(0, 1), w.get(1, 0));
        assert_eq!(w.get(2, 2), 0.0);

        let wide = Matrix::zeros(3, 4);
        assert!(matches!(SimilarityMatrix::from_matrix(wide), Err(Error::Shape(_))));
        let skew = Matrix::from_rows(&[[0.0, 0.5], [0.6, 0.0]]).unwrap();
        assert!(matches!(SimilarityMatrix::from_matrix(skew), Err(Error::Asymmetric(_))));
    }

    #[test]
    fn median_distance() {
        let ds = dataset(&[&[0.0], &[1.0], &[3.0]]);
        // distances 1, 3, 2
        assert_eq!(median_pairwise_distance(&ds), 2.0);
    }

    #[test]
    fn standardize_columns() {
        let ds = dataset(&[&[1.0, 5.0], &[3.0, 5.0]]);
        let s = ds.standardized();
        assert_eq!(s.features().column(0), alloc::vec![-1.0, 1.0]);
        assert_eq!(s.features().column(1), alloc::vec![0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn kernels_symmetric_zero_diagonal(seed in 0u64..500, n in 2usize..9, d in 1usize..5) {
            let ds = random_dataset(n, d, seed, true);
            for w in [gaussian_similarity(&ds, 0.9).unwrap(), chi2_similarity(&ds, 0.5).unwrap()] {
                for i in 0..n {
                    prop_assert_eq!(w.get(i, i), 0.0);
                    for j in 0..n {
                        prop_assert_eq!(w.get(i, j), w.get(j, i));
                        prop_assert!((0.0..=1.0).contains(&w.get(i, j)));
                    }
                }
            }
        }

        #[test]
        fn gaussian_monotone_in_distance(seed in 0u64..500) {
            let ds = random_dataset(3, 2, seed, false);
            let w = gaussian_similarity(&ds, 1.3).unwrap();
            let x = ds.features();
            let d01 = squared_distance(x.row(0), x.row(1));
            let d02 = squared_distance(x.row(0), x.row(2));
            if d01 < d02 {
                prop_assert!(w.get(0, 1) >= w.get(0, 2));
            }
        }
    }
}
