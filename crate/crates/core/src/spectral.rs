//! Unnormalized graph Laplacian, its smallest eigenpairs, and spectral
//! learning: pairwise constraints are written straight into the affinity
//! matrix (+1 must-link, -1 cannot-link) before clustering.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::eigen::{self, fix_sign};
use crate::kmeans::{kmeans_assign, ClusterAssignment};
use crate::matrix::{dot, norm, Matrix};
use crate::similarity::SimilarityMatrix;
use crate::{Error, Result};

/// Largest accepted `|L v - lambda v|`, relative to `max(1, |lambda|)`.
pub const RESIDUAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    MustLink,
    CannotLink,
}

impl ConstraintKind {
    /// Value written into the affinity matrix.
    pub fn affinity(self) -> f64 {
        match self {
            ConstraintKind::MustLink => 1.0,
            ConstraintKind::CannotLink => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    pub i: usize,
    pub j: usize,
    pub kind: ConstraintKind,
}

/// Pairwise constraints keyed on the unordered pair; a later entry for the
/// same pair replaces the earlier one.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "Vec<Constraint>", try_from = "Vec<Constraint>")]
pub struct ConstraintSet {
    entries: BTreeMap<(usize, usize), ConstraintKind>,
}

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a constraint. Returns the previous kind when it conflicted
    /// with the new one.
    pub fn insert(&mut self, i: usize, j: usize, kind: ConstraintKind) -> Result<Option<ConstraintKind>> {
        if i == j {
            return Err(Error::InvalidConstraint(i));
        }
        let key = (i.min(j), i.max(j));
        match self.entries.insert(key, kind) {
            Some(prev) if prev != kind => {
                log::warn!("constraint on {key:?} changed from {prev:?} to {kind:?}");
                Ok(Some(prev))
            }
            _ => Ok(None),
        }
    }

    pub fn extend(&mut self, other: &ConstraintSet) -> usize {
        let mut conflicts = 0;
        for c in other.iter() {
            if self.insert(c.i, c.j, c.kind).expect("stored constraints are valid").is_some() {
                conflicts += 1;
            }
        }
        conflicts
    }

    pub fn get(&self, i: usize, j: usize) -> Option<ConstraintKind> {
        self.entries.get(&(i.min(j), i.max(j))).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Constraints ordered by `(min, max)` index pair.
    pub fn iter(&self) -> impl Iterator<Item = Constraint> + '_ {
        self.entries.iter().map(|(&(i, j), &kind)| Constraint { i, j, kind })
    }
}

impl From<ConstraintSet> for Vec<Constraint> {
    fn from(set: ConstraintSet) -> Self {
        set.iter().collect()
    }
}

impl TryFrom<Vec<Constraint>> for ConstraintSet {
    type Error = Error;

    fn try_from(list: Vec<Constraint>) -> Result<Self> {
        let mut set = ConstraintSet::new();
        for c in list {
            set.insert(c.i, c.j, c.kind)?;
        }
        Ok(set)
    }
}

impl FromIterator<Constraint> for ConstraintSet {
    /// Panics on a self-pair.
    fn from_iter<T: IntoIterator<Item = Constraint>>(iter: T) -> Self {
        let mut set = ConstraintSet::new();
        for c in iter {
            set.insert(c.i, c.j, c.kind).expect("self-pair constraint");
        }
        set
    }
}

/// First `n_c` Laplacian eigenpairs. Row `s` of `vectors` is sample `s`'s
/// embedding; column `k` is eigenvector `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralEmbedding {
    pub vectors: Matrix,
    pub values: Vec<f64>,
}

impl SpectralEmbedding {
    pub fn n_c(&self) -> usize {
        self.values.len()
    }

    pub fn len(&self) -> usize {
        self.vectors.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        self.vectors.column(k)
    }

    fn from_columns(values: Vec<f64>, columns: &[Vec<f64>], n: usize) -> Self {
        let mut vectors = Matrix::zeros(n, columns.len());
        for (k, col) in columns.iter().enumerate() {
            for (s, &x) in col.iter().enumerate() {
                vectors[(s, k)] = x;
            }
        }
        Self { vectors, values }
    }
}

/// Laplacian `L = D - W` together with the degree vector `diag(D)`.
pub fn build_laplacian(w: &SimilarityMatrix) -> (Matrix, Vec<f64>) {
    let n = w.len();
    let mut lap = Matrix::zeros(n, n);
    let mut degrees = Vec::with_capacity(n);
    for i in 0..n {
        let row = w.row(i);
        let d: f64 = row.iter().sum();
        degrees.push(d);
        let out = lap.row_mut(i);
        for (o, &x) in out.iter_mut().zip(row) {
            *o = -x;
        }
        out[i] += d;
    }
    (lap, degrees)
}

/// The `n_c` smallest eigenpairs of a symmetric `L`, ascending, with the
/// largest-magnitude entry of each eigenvector made positive. Fails if a
/// returned pair misses the residual or orthonormality bound.
pub fn smallest_eigenpairs(lap: &Matrix, n_c: usize) -> Result<SpectralEmbedding> {
    smallest_eigenpairs_with_limit(lap, n_c, eigen::DENSE_LIMIT)
}

pub(crate) fn smallest_eigenpairs_with_limit(
    lap: &Matrix,
    n_c: usize,
    dense_limit: usize,
) -> Result<SpectralEmbedding> {
    let n = lap.rows();
    if !lap.is_square() {
        return Err(Error::Shape(format!("Laplacian is {}x{}", lap.rows(), lap.cols())));
    }
    if n_c == 0 || n_c > n {
        return Err(Error::InvalidParameter(format!("eigenvector count {n_c} must lie in 1..={n}")));
    }
    let mut eig = eigen::smallest_with_limit(lap, n_c, dense_limit)?;
    for v in &mut eig.vectors {
        fix_sign(v);
    }
    for (k, (lambda, v)) in eig.values.iter().zip(&eig.vectors).enumerate() {
        let lv = lap.mul_vec(v);
        let res: Vec<f64> = lv.iter().zip(v).map(|(a, b)| a - lambda * b).collect();
        let r = norm(&res);
        if !(r <= RESIDUAL_TOL * lambda.abs().max(1.0)) {
            return Err(Error::Numerical(format!("eigenpair {k} residual {r:e} exceeds tolerance")));
        }
        for (p, u) in eig.vectors[..k].iter().enumerate() {
            let overlap = dot(u, v).abs();
            if overlap > RESIDUAL_TOL {
                return Err(Error::Numerical(format!("eigenvectors {p} and {k} overlap by {overlap:e}")));
            }
        }
    }
    Ok(SpectralEmbedding::from_columns(eig.values, &eig.vectors, n))
}

/// Copy of `w` with each constraint written into both symmetric cells.
pub fn apply_constraints(w: &SimilarityMatrix, q: &ConstraintSet) -> Result<SimilarityMatrix> {
    let n = w.len();
    let mut out = w.clone();
    for c in q.iter() {
        for index in [c.i, c.j] {
            if index >= n {
                return Err(Error::IndexOutOfRange { index, n });
            }
        }
        out.set_pair(c.i, c.j, c.kind.affinity());
    }
    Ok(out)
}

/// Everything one constrained clustering pass produces.
#[derive(Debug, Clone)]
pub struct SpectralResult {
    pub assignment: ClusterAssignment,
    pub embedding: SpectralEmbedding,
    pub similarity: SimilarityMatrix,
}

/// Constraint edit, Laplacian, smallest eigenpairs, then k-means on the
/// embedding rows.
pub fn spectral_learning_cluster(
    w: &SimilarityMatrix,
    q: &ConstraintSet,
    n_c: usize,
    seed: u64,
) -> Result<SpectralResult> {
    let similarity = apply_constraints(w, q)?;
    let (lap, _) = build_laplacian(&similarity);
    let embedding = smallest_eigenpairs(&lap, n_c)?;
    let assignment = kmeans_assign(&embedding, n_c, seed)?;
    Ok(SpectralResult { assignment, embedding, similarity })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sim(rows: &[&[f64]]) -> SimilarityMatrix {
        SimilarityMatrix::from_matrix(Matrix::from_rows(rows).unwrap()).unwrap()
    }

    fn random_similarity(n: usize, seed: u64) -> SimilarityMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let x: f64 = rng.random();
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
        }
        SimilarityMatrix::from_matrix(m).unwrap()
    }

    #[test]
    fn laplacian_two_nodes() {
        let (lap, d) = build_laplacian(&sim(&[&[0.0, 1.0], &[1.0, 0.0]]));
        assert_eq!(d, vec![1.0, 1.0]);
        assert_eq!(lap.as_slice(), &[1.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn laplacian_of_zero_matrix() {
        let (lap, _) = build_laplacian(&SimilarityMatrix::from_matrix(Matrix::zeros(4, 4)).unwrap());
        assert!(lap.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        let w = random_similarity(6, 1);
        let (lap, d) = build_laplacian(&w);
        for i in 0..6 {
            let mut direct = 0.0;
            for k in 0..6 {
                direct += w.get(i, k);
            }
            assert!((d[i] - direct).abs() < 1e-12);
            assert!(lap.row(i).iter().sum::<f64>().abs() < 1e-10);
        }
        assert_eq!(lap.max_asymmetry(), 0.0);
    }

    #[test]
    fn disconnected_components_give_null_space() {
        let w = sim(&[
            &[0.0, 0.8, 0.5, 0.0, 0.0],
            &[0.8, 0.0, 0.7, 0.0, 0.0],
            &[0.5, 0.7, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 0.0, 0.9],
            &[0.0, 0.0, 0.0, 0.9, 0.0],
        ]);
        let (lap, _) = build_laplacian(&w);
        let emb = smallest_eigenpairs(&lap, 2).unwrap();
        assert!(emb.values[0].abs() < 1e-10 && emb.values[1].abs() < 1e-10);
        // Each eigenvector is constant on each component.
        for k in 0..2 {
            let v = emb.eigenvector(k);
            assert!((v[0] - v[1]).abs() < 1e-9 && (v[1] - v[2]).abs() < 1e-9);
            assert!((v[3] - v[4]).abs() < 1e-9);
        }
        // The two vectors span both indicators: rows of the two components differ.
        let a = emb.vectors.row(0);
        let b = emb.vectors.row(3);
        assert!(crate::matrix::squared_distance(a, b) > 0.1);
    }

    #[test]
    fn identity_has_unit_spectrum() {
        let emb = smallest_eigenpairs(&Matrix::identity(5), 3).unwrap();
        for v in &emb.values {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn eigenpair_count_validated() {
        assert!(matches!(smallest_eigenpairs(&Matrix::identity(3), 0), Err(Error::InvalidParameter(_))));
        assert!(matches!(smallest_eigenpairs(&Matrix::identity(3), 4), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn largest_entry_positive() {
        let (lap, _) = build_laplacian(&random_similarity(12, 4));
        let emb = smallest_eigenpairs(&lap, 4).unwrap();
        for k in 0..4 {
            let v = emb.eigenvector(k);
            let big = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn iterative_path_agrees_with_dense() {
        let (lap, _) = build_laplacian(&random_similarity(50, 9));
        let dense = smallest_eigenpairs_with_limit(&lap, 3, 1000).unwrap();
        let iter = smallest_eigenpairs_with_limit(&lap, 3, 10).unwrap();
        for k in 0..3 {
            assert!((dense.values[k] - iter.values[k]).abs() < 1e-8);
            let a = dense.eigenvector(k);
            let b = iter.eigenvector(k);
            // The sign rule makes both paths pick the same orientation.
            assert!(crate::matrix::squared_distance(&a, &b).sqrt() < 1e-6);
        }
    }

    #[test]
    fn constraint_edits() {
        let w = sim(&[&[0.0, 0.2, 0.3], &[0.2, 0.0, 0.4], &[0.3, 0.4, 0.0]]);
        assert_eq!(apply_constraints(&w, &ConstraintSet::new()).unwrap(), w);

        let mut q = ConstraintSet::new();
        q.insert(0, 1, ConstraintKind::MustLink).unwrap();
        let edited = apply_constraints(&w, &q).unwrap();
        assert_eq!((edited.get(0, 1), edited.get(1, 0)), (1.0, 1.0));
        assert_eq!(edited.get(0, 2), 0.3);
        assert_eq!(edited.get(1, 2), 0.4);
        assert_eq!(w.get(0, 1), 0.2, "input untouched");

        let mut q = ConstraintSet::new();
        q.insert(0, 2, ConstraintKind::CannotLink).unwrap();
        let edited = apply_constraints(&w, &q).unwrap();
        assert_eq!((edited.get(0, 2), edited.get(2, 0)), (-1.0, -1.0));
    }

    #[test]
    fn self_constraint_rejected() {
        let mut q = ConstraintSet::new();
        assert_eq!(q.insert(2, 2, ConstraintKind::MustLink), Err(Error::InvalidConstraint(2)));
    }

    #[test]
    fn last_constraint_wins() {
        let mut q = ConstraintSet::new();
        assert_eq!(q.insert(3, 1, ConstraintKind::MustLink).unwrap(), None);
        assert_eq!(q.insert(1, 3, ConstraintKind::MustLink).unwrap(), None);
        assert_eq!(q.insert(1, 3, ConstraintKind::CannotLink).unwrap(), Some(ConstraintKind::MustLink));
        assert_eq!(q.len(), 1);
        assert_eq!(q.get(3, 1), Some(ConstraintKind::CannotLink));
    }

    #[test]
    fn out_of_range_constraint() {
        let w = random_similarity(3, 0);
        let mut q = ConstraintSet::new();
        q.insert(0, 5, ConstraintKind::MustLink).unwrap();
        assert_eq!(apply_constraints(&w, &q), Err(Error::IndexOutOfRange { index: 5, n: 3 }));
    }

    proptest! {
        #[test]
        fn edits_idempotent_and_local(seed in 0u64..200, pairs in proptest::collection::vec((0usize..10, 0usize..10, any::<bool>()), 0..15)) {
            let w = random_similarity(10, seed);
            let mut q = ConstraintSet::new();
            for (i, j, must) in pairs {
                if i != j {
                    let kind = if must { ConstraintKind::MustLink } else { ConstraintKind::CannotLink };
                    q.insert(i, j, kind).unwrap();
                }
            }
            let once = apply_constraints(&w, &q).unwrap();
            let twice = apply_constraints(&once, &q).unwrap();
            prop_assert_eq!(&once, &twice);
            prop_assert_eq!(once.as_matrix().max_asymmetry(), 0.0);
            let changed = (0..10)
                .flat_map(|i| (0..10).map(move |j| (i, j)))
                .filter(|&(i, j)| once.get(i, j) != w.get(i, j))
                .count();
            // Random U[0,1) affinities never equal +-1, so every edit changes a cell.
            prop_assert_eq!(changed, 2 * q.len());
        }

        #[test]
        fn must_link_never_lowers_affinity(seed in 0u64..200, i in 0usize..8, j in 0usize..8) {
            prop_assume!(i != j);
            let w = random_similarity(8, seed);
            let mut q = ConstraintSet::new();
            q.insert(i, j, ConstraintKind::MustLink).unwrap();
            let edited = apply_constraints(&w, &q).unwrap();
            prop_assert!(edited.get(i, j) > w.get(i, j));
        }
    }
}
