//! Seeded k-means with k-means++ initialisation, run on the rows of a
//! spectral embedding.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::{squared_distance, Matrix};
use crate::spectral::SpectralEmbedding;
use crate::{Error, Result};

pub const RESTARTS: usize = 10;
pub const MAX_ITER: usize = 300;
pub const REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub n_c: usize,
    /// `n_c x dim` centroids in embedding space.
    pub centers: Matrix,
    /// `empty[c]` is set when no sample landed in cluster `c`.
    pub empty: Vec<bool>,
    /// Within-cluster sum of squares.
    pub inertia: f64,
}

impl ClusterAssignment {
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_c];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

pub fn kmeans_assign(emb: &SpectralEmbedding, n_c: usize, seed: u64) -> Result<ClusterAssignment> {
    kmeans(&emb.vectors, n_c, seed)
}

/// Best of [`RESTARTS`] Lloyd runs by inertia. Deterministic for a seed.
pub fn kmeans(points: &Matrix, n_c: usize, seed: u64) -> Result<ClusterAssignment> {
    let n = points.rows();
    if n_c == 0 || n < n_c {
        return Err(Error::InvalidParameter(format!("cannot form {n_c} clusters from {n} points")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<ClusterAssignment> = None;
    for _ in 0..RESTARTS {
        let centers = plus_plus_init(points, n_c, &mut rng);
        let run = lloyd(points, centers);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn plus_plus_init(points: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let n = points.rows();
    let mut centers = Matrix::zeros(k, points.cols());
    let first = rng.random_range(0..n);
    centers.row_mut(0).copy_from_slice(points.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| squared_distance(points.row(i), centers.row(0))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(c).copy_from_slice(points.row(pick));
        for (i, di) in d2.iter_mut().enumerate() {
            *di = di.min(squared_distance(points.row(i), centers.row(c)));
        }
    }
    centers
}

fn nearest(point: &[f64], centers: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centers.rows() {
        let d = squared_distance(point, centers.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn lloyd(points: &Matrix, mut centers: Matrix) -> ClusterAssignment {
    let (n, dim, k) = (points.rows(), points.cols(), centers.rows());
    let mut labels = vec![0; n];
    let mut prev = f64::INFINITY;
    for _ in 0..MAX_ITER {
        let mut inertia = 0.0;
        let mut changed = false;
        for i in 0..n {
            let (c, d) = nearest(points.row(i), &centers);
            changed |= labels[i] != c;
            labels[i] = c;
            inertia += d;
        }
        // Empty clusters keep their previous centre.
        let mut sums = Matrix::zeros(k, dim);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[labels[i]] += 1;
            for (s, x) in sums.row_mut(labels[i]).iter_mut().zip(points.row(i)) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for (dst, s) in centers.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s / counts[c] as f64;
                }
            }
        }
        let converged = !changed || (prev - inertia).abs() <= REL_TOL * prev.abs().max(f64::MIN_POSITIVE);
        prev = inertia;
        if converged {
            break;
        }
    }
    // Final assignment, then centres moved to the means of that assignment.
    for (i, l) in labels.iter_mut().enumerate() {
        *l = nearest(points.row(i), &centers).0;
    }
    let mut sums = Matrix::zeros(k, dim);
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (s, x) in sums.row_mut(l).iter_mut().zip(points.row(i)) {
            *s += x;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            for (dst, s) in centers.row_mut(c).iter_mut().zip(sums.row(c)) {
                *dst = s / counts[c] as f64;
            }
        }
    }
    let inertia = labels.iter().enumerate().map(|(i, &l)| squared_distance(points.row(i), centers.row(l))).sum();
    let mut empty = vec![true; k];
    for &l in &labels {
        empty[l] = false;
    }
    ClusterAssignment { labels, n_c: k, centers, empty, inertia }
}

/// Within-cluster sum of squares of an arbitrary labelling, using the label
/// means as centres.
pub fn within_cluster_ss(points: &Matrix, labels: &[usize], k: usize) -> f64 {
    let dim = points.cols();
    let mut sums = Matrix::zeros(k, dim);
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (s, x) in sums.row_mut(l).iter_mut().zip(points.row(i)) {
            *s += x;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            for s in sums.row_mut(c) {
                *s /= counts[c] as f64;
            }
        }
    }
    labels.iter().enumerate().map(|(i, &l)| squared_distance(points.row(i), sums.row(l))).sum()
}
