//! Full-covariance Gaussian mixture fitted by EM on the rows of the spectral
//! embedding. Posterior responsibilities give the parametric cluster
//! distribution used as a step scale.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::kmeans::ClusterAssignment;
use crate::matrix::Matrix;
use crate::spectral::SpectralEmbedding;
use crate::uncertainty::ClusterDistribution;
use crate::{Error, Result};

/// Ridge added to every covariance.
pub const COV_REG: f64 = 1e-6;
pub const MAX_EM_ITER: usize = 200;
pub const EM_REL_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Matrix>,
    /// Log-likelihood after each E-step, in order.
    pub log_likelihoods: Vec<f64>,
    #[serde(skip)]
    factors: Vec<Factor>,
}

/// Cached Cholesky factor and log-normaliser for one component.
#[derive(Debug, Clone, PartialEq)]
struct Factor {
    chol: Matrix,
    log_norm: f64,
}

impl MixtureModel {
    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    /// `log(alpha_c f(x; theta_c))` for every component.
    pub fn weighted_log_densities(&self, x: &[f64]) -> Vec<f64> {
        let factors =
            if self.factors.len() == self.components() { None } else { Some(factorize_all(&self.covariances)) };
        let factors = factors.as_deref().unwrap_or(&self.factors);
        (0..self.components())
            .map(|c| libm::log(self.weights[c]) + log_gaussian(x, &self.means[c], &factors[c]))
            .collect()
    }

    /// Posterior `P(c | x)`; uniform when every density underflows.
    pub fn posterior(&self, x: &[f64]) -> ClusterDistribution {
        let logs = self.weighted_log_densities(x);
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            log::warn!("all mixture densities vanished; falling back to uniform");
            return ClusterDistribution::uniform(self.components());
        }
        let probs: Vec<f64> = logs.iter().map(|l| libm::exp(l - top)).collect();
        ClusterDistribution::from_weights(probs)
    }
}

fn cholesky(a: &Matrix) -> Option<Matrix> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[(i, i)] = libm::sqrt(s);
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Some(l)
}

fn factorize(cov: &Matrix) -> Factor {
    let d = cov.rows();
    let mut extra = 0.0;
    loop {
        let mut a = cov.clone();
        for i in 0..d {
            a[(i, i)] += extra;
        }
        if let Some(chol) = cholesky(&a) {
            let log_det: f64 = (0..d).map(|i| 2.0 * libm::log(chol[(i, i)])).sum();
            let log_norm = -0.5 * (d as f64 * libm::log(2.0 * core::f64::consts::PI) + log_det);
            return Factor { chol, log_norm };
        }
        extra = if extra == 0.0 { COV_REG } else { extra * 10.0 };
    }
}

fn factorize_all(covs: &[Matrix]) -> Vec<Factor> {
    covs.iter().map(factorize).collect()
}

fn log_gaussian(x: &[f64], mean: &[f64], f: &Factor) -> f64 {
    // Solve L z = x - mean; density uses |z|^2.
    let d = mean.len();
    let mut z = vec![0.0; d];
    for i in 0..d {
        let mut s = x[i] - mean[i];
        for k in 0..i {
            s -= f.chol[(i, k)] * z[k];
        }
        z[i] = s / f.chol[(i, i)];
    }
    f.log_norm - 0.5 * z.iter().map(|v| v * v).sum::<f64>()
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let top = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return top;
    }
    top + libm::log(xs.iter().map(|x| libm::exp(x - top)).sum::<f64>())
}

/// Weighted mean and ridge-regularised covariance.
fn weighted_moments(points: &Matrix, resp: &[f64]) -> (f64, Vec<f64>, Matrix) {
    let (n, d) = (points.rows(), points.cols());
    let total: f64 = resp.iter().sum();
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, x) in mean.iter_mut().zip(points.row(i)) {
            *m += resp[i] * x;
        }
    }
    for m in &mut mean {
        *m /= total;
    }
    let mut cov = Matrix::zeros(d, d);
    for i in 0..n {
        if resp[i] == 0.0 {
            continue;
        }
        let row = points.row(i);
        for a in 0..d {
            let da = row[a] - mean[a];
            for b in 0..=a {
                cov[(a, b)] += resp[i] * da * (row[b] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in 0..=a {
            let v = cov[(a, b)] / total;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
        cov[(a, a)] += COV_REG;
    }
    (total, mean, cov)
}

/// Fits `n_c` Gaussian components to the embedding rows with EM, starting
/// from the hard assignment `asg`. Stops when the log-likelihood changes by
/// less than [`EM_REL_TOL`] relative, or after [`MAX_EM_ITER`] iterations.
pub fn fit_mixture(emb: &SpectralEmbedding, asg: &ClusterAssignment, n_c: usize) -> Result<MixtureModel> {
    let points = &emb.vectors;
    let n = points.rows();
    if n_c == 0 || n_c > n {
        return Err(Error::InvalidParameter(format!("cannot fit {n_c} components to {n} points")));
    }
    if asg.labels.len() != n {
        return Err(Error::Shape(format!("{} cluster labels for {n} embedded samples", asg.labels.len())));
    }

    // Initial parameters from the hard clusters; an empty cluster starts at
    // the global moments with a token weight.
    let ones = vec![1.0; n];
    let (_, global_mean, global_cov) = weighted_moments(points, &ones);
    let mut weights = Vec::with_capacity(n_c);
    let mut means = Vec::with_capacity(n_c);
    let mut covariances = Vec::with_capacity(n_c);
    for c in 0..n_c {
        let resp: Vec<f64> = asg.labels.iter().map(|&l| if l == c { 1.0 } else { 0.0 }).collect();
        let count: f64 = resp.iter().sum();
        if count > 0.0 {
            let (_, m, s) = weighted_moments(points, &resp);
            weights.push(count);
            means.push(m);
            covariances.push(s);
        } else {
            weights.push(1.0);
            means.push(global_mean.clone());
            covariances.push(global_cov.clone());
        }
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }

    let mut model = MixtureModel { weights, means, covariances, log_likelihoods: Vec::new(), factors: Vec::new() };
    let mut resp = Matrix::zeros(n, n_c);
    for _ in 0..MAX_EM_ITER {
        model.factors = factorize_all(&model.covariances);
        // E-step
        let mut ll = 0.0;
        for i in 0..n {
            let logs = model.weighted_log_densities(points.row(i));
            let lse = log_sum_exp(&logs);
            ll += lse;
            for (r, l) in resp.row_mut(i).iter_mut().zip(&logs) {
                *r = libm::exp(l - lse);
            }
        }
        let prev = model.log_likelihoods.last().copied();
        model.log_likelihoods.push(ll);
        if let Some(prev) = prev {
            if (ll - prev).abs() <= EM_REL_TOL * prev.abs().max(1e-300) {
                break;
            }
        }
        // M-step
        for c in 0..n_c {
            let rc = resp.column(c);
            let nk: f64 = rc.iter().sum();
            if nk <= 1e-10 {
                continue;
            }
            let (_, m, s) = weighted_moments(points, &rc);
            model.weights[c] = nk / n as f64;
            model.means[c] = m;
            model.covariances[c] = s;
        }
        let wsum: f64 = model.weights.iter().sum();
        for w in &mut model.weights {
            *w /= wsum;
        }
    }
    model.factors = factorize_all(&model.covariances);
    Ok(model)
}

/// Posterior over components at sample `x`'s embedding row.
pub fn parametric_probs(x: usize, mm: &MixtureModel, emb: &SpectralEmbedding) -> ClusterDistribution {
    mm.posterior(emb.vectors.row(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kmeans::kmeans;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gaussian_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
        let u1: f64 = rng.random::<f64>().max(1e-300);
        let u2: f64 = rng.random();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let t = 2.0 * core::f64::consts::PI * u2;
        (r * libm::cos(t), r * libm::sin(t))
    }

    fn embedding_from_rows(rows: &[Vec<f64>]) -> SpectralEmbedding {
        let d = rows[0].len();
        SpectralEmbedding { vectors: Matrix::from_rows(rows).unwrap(), values: vec![0.0; d] }
    }

    fn model(weights: Vec<f64>, means: Vec<Vec<f64>>, covs: Vec<Matrix>) -> MixtureModel {
        let factors = factorize_all(&covs);
        MixtureModel { weights, means, covariances: covs, log_likelihoods: Vec::new(), factors }
    }

    #[test]
    fn separated_blobs_recover_centroids() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let sigma = 0.1;
        let centres = [[-3.0, 0.0], [3.0, 1.0]];
        let mut rows = Vec::new();
        for c in &centres {
            for _ in 0..200 {
                let (a, b) = gaussian_pair(&mut rng);
                rows.push(vec![c[0] + sigma * a, c[1] + sigma * b]);
            }
        }
        let emb = embedding_from_rows(&rows);
        let asg = kmeans(&emb.vectors, 2, 1).unwrap();
        let mm = fit_mixture(&emb, &asg, 2).unwrap();
        for c in 0..2 {
            // Oracle: the sample mean of the generated blob.
            let blob = &rows[c * 200..(c + 1) * 200];
            let sm: Vec<f64> = (0..2).map(|k| blob.iter().map(|r| r[k]).sum::<f64>() / 200.0).collect();
            let nearest = (0..2)
                .min_by(|&a, &b| {
                    crate::matrix::squared_distance(&mm.means[a], &sm)
                        .total_cmp(&crate::matrix::squared_distance(&mm.means[b], &sm))
                })
                .unwrap();
            let dist = crate::matrix::squared_distance(&mm.means[nearest], &sm).sqrt();
            assert!(dist < 0.05 * sigma, "mean off by {dist}");
        }
        assert!((mm.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_component_is_data_mean() {
        let rows = vec![vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, -1.0]];
        let emb = embedding_from_rows(&rows);
        let asg = kmeans(&emb.vectors, 1, 0).unwrap();
        let mm = fit_mixture(&emb, &asg, 1).unwrap();
        assert_eq!(mm.weights, vec![1.0]);
        assert!((mm.means[0][0] - 2.0).abs() < 1e-12 && (mm.means[0][1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_likelihood_non_decreasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for trial in 0..5 {
            let rows: Vec<Vec<f64>> = (0..120)
                .map(|i| {
                    let (a, b) = gaussian_pair(&mut rng);
                    let shift = (i % 3) as f64 * 1.5;
                    vec![shift + a * 0.8, b * 0.5 - shift, rng.random::<f64>()]
                })
                .collect();
            let emb = embedding_from_rows(&rows);
            let asg = kmeans(&emb.vectors, 3, trial).unwrap();
            let mm = fit_mixture(&emb, &asg, 3).unwrap();
            for w in mm.log_likelihoods.windows(2) {
                assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn dominant_component() {
        let tiny = {
            let mut m = Matrix::identity(2);
            m[(0, 0)] = 1e-4;
            m[(1, 1)] = 1e-4;
            m
        };
        let mm = model(vec![0.5, 0.5], vec![vec![0.0, 0.0], vec![1.0, 1.0]], vec![tiny.clone(), tiny]);
        let p = mm.posterior(&[0.0, 0.0]);
        assert!((p.probs()[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn identical_components_are_uniform() {
        let mm = model(vec![1.0 / 3.0; 3], vec![vec![0.5]; 3], vec![Matrix::identity(1); 3]);
        let p = mm.posterior(&[2.0]);
        for &q in p.probs() {
            assert!((q - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn posterior_matches_direct_density_ratio() {
        let cov_a = Matrix::from_rows(&[[0.5, 0.1], [0.1, 0.3]]).unwrap();
        let cov_b = Matrix::from_rows(&[[0.2, -0.05], [-0.05, 0.4]]).unwrap();
        let mm = model(vec![0.3, 0.7], vec![vec![0.0, 0.0], vec![1.0, -0.5]], vec![cov_a.clone(), cov_b.clone()]);
        // Direct 2x2 Gaussian densities via explicit inverse and determinant.
        let dens = |x: [f64; 2], m: [f64; 2], c: &Matrix| {
            let det = c[(0, 0)] * c[(1, 1)] - c[(0, 1)] * c[(1, 0)];
            let inv = [[c[(1, 1)] / det, -c[(0, 1)] / det], [-c[(1, 0)] / det, c[(0, 0)] / det]];
            let d = [x[0] - m[0], x[1] - m[1]];
            let q = d[0] * (inv[0][0] * d[0] + inv[0][1] * d[1]) + d[1] * (inv[1][0] * d[0] + inv[1][1] * d[1]);
            (-0.5 * q).exp() / (2.0 * core::f64::consts::PI * det.sqrt())
        };
        for x in [[0.2, 0.1], [0.7, -0.2], [-1.0, 1.0]] {
            let a = 0.3 * dens(x, [0.0, 0.0], &cov_a);
            let b = 0.7 * dens(x, [1.0, -0.5], &cov_b);
            let p = mm.posterior(&x);
            assert!((p.probs()[0] - a / (a + b)).abs() < 1e-12);
        }
    }

    #[test]
    fn bad_component_count() {
        let emb = embedding_from_rows(&[vec![0.0], vec![1.0]]);
        let asg = kmeans(&emb.vectors, 1, 0).unwrap();
        assert!(matches!(fit_mixture(&emb, &asg, 3), Err(Error::InvalidParameter(_))));
    }
}
