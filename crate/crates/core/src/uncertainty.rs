//! Uncertainty-reduction scoring.
//!
//! A candidate's expected effect on the clustering is modelled as
//! `gradient * step_scale`:
//!
//! * the gradient sums first-order eigenvector sensitivities to the
//!   affinity edits that resolving the candidate would cause (one edit per
//!   certain-set representative);
//! * the step scale is the entropy of the candidate's current cluster
//!   distribution, estimated either from its k nearest neighbours
//!   (nonparametric) or from a Gaussian mixture on the embedding
//!   (parametric).
//!
//! To keep selection linear in `n`, the combined modes score step scales for
//! every candidate and compute gradients only for the `b` largest.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::certain::CertainSets;
use crate::kmeans::ClusterAssignment;
use crate::mixture::{fit_mixture, parametric_probs, MixtureModel};
use crate::similarity::SimilarityMatrix;
use crate::spectral::SpectralEmbedding;
use crate::{Error, Result};

pub const DEFAULT_KNN: usize = 20;
pub const DEFAULT_B: usize = 20;

/// Probability distribution over the current clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterDistribution {
    probs: Vec<f64>,
}

impl ClusterDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let sum: f64 = probs.iter().sum();
        if probs.is_empty() || probs.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("not a probability distribution (sum {sum})")));
        }
        Ok(Self { probs })
    }

    pub fn uniform(k: usize) -> Self {
        Self { probs: vec![1.0 / k as f64; k] }
    }

    /// Normalises nonnegative weights; all-zero weights give the uniform
    /// distribution.
    pub fn from_weights(mut w: Vec<f64>) -> Self {
        let total: f64 = w.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Self::uniform(w.len());
        }
        for x in &mut w {
            *x /= total;
        }
        Self { probs: w }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Shannon entropy in nats, `0 ln 0 = 0`.
pub fn entropy(d: &ClusterDistribution) -> f64 {
    -d.probs.iter().filter(|&&p| p > 0.0).map(|&p| p * libm::log(p)).sum::<f64>()
}

/// Eigen-gaps smaller than this are treated as degenerate.
pub fn degeneracy_threshold(emb: &SpectralEmbedding) -> f64 {
    let lmax = emb.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    1e-8 * lmax.max(1.0)
}

/// `dv_i / dw_jk` for every embedded eigenvector `i`, from first-order
/// perturbation theory restricted to the embedded eigenpairs:
///
/// `sum_{p != i} (v_i[j] - v_i[k]) (v_p[j] - v_p[k]) / (lambda_i - lambda_p) v_p`
///
/// Near-degenerate pairs are skipped.
pub fn eigvec_derivative(emb: &SpectralEmbedding, j: usize, k: usize) -> Result<Vec<Vec<f64>>> {
    if j == k {
        return Err(Error::InvalidPair(j));
    }
    let n = emb.len();
    for index in [j, k] {
        if index >= n {
            return Err(Error::IndexOutOfRange { index, n });
        }
    }
    let nc = emb.n_c();
    let delta = degeneracy_threshold(emb);
    let v = &emb.vectors;
    let diff: Vec<f64> = (0..nc).map(|p| v[(j, p)] - v[(k, p)]).collect();
    let mut out = Vec::with_capacity(nc);
    for i in 0..nc {
        let mut dv = vec![0.0; n];
        for p in 0..nc {
            let gap = emb.values[i] - emb.values[p];
            if p == i || gap.abs() < delta {
                continue;
            }
            let coef = diff[i] * diff[p] / gap;
            if coef == 0.0 {
                continue;
            }
            for (s, d) in dv.iter_mut().enumerate() {
                *d += coef * v[(s, p)];
            }
        }
        out.push(dv);
    }
    Ok(out)
}

/// Gradient term for candidate `x`:
/// `sum_i | sum_{r in reps} dv_i / dw_xr |_2`, one representative per
/// certain set.
///
/// The summed derivative of `v_i` is a combination of the orthonormal
/// embedded eigenvectors, so its norm is the norm of the coefficient vector;
/// this avoids forming length-`n` vectors.
pub fn gradient_score(x: usize, emb: &SpectralEmbedding, sets: &CertainSets, w: &SimilarityMatrix) -> Result<f64> {
    if sets.m() == 0 {
        return Err(Error::NoCertainSets);
    }
    let reps = sets.representatives(x, w)?;
    let nc = emb.n_c();
    let delta = degeneracy_threshold(emb);
    let v = &emb.vectors;
    let vx = v.row(x);
    // cross[i][p] = sum_r (v_i[x] - v_i[r]) (v_p[x] - v_p[r])
    let mut cross = vec![0.0; nc * nc];
    let mut diff = vec![0.0; nc];
    for rep in &reps {
        let vr = v.row(rep.sample);
        for p in 0..nc {
            diff[p] = vx[p] - vr[p];
        }
        for i in 0..nc {
            for p in 0..nc {
                cross[i * nc + p] += diff[i] * diff[p];
            }
        }
    }
    let mut score = 0.0;
    for i in 0..nc {
        let mut sq = 0.0;
        for p in 0..nc {
            let gap = emb.values[i] - emb.values[p];
            if p == i || gap.abs() < delta {
                continue;
            }
            let c = cross[i * nc + p] / gap;
            sq += c * c;
        }
        score += libm::sqrt(sq);
    }
    Ok(score)
}

/// Per-sample k-nearest-neighbour lists by similarity, built once from the
/// kernel matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnGraph {
    pub k: usize,
    pub neighbors: Vec<Vec<usize>>,
}

impl KnnGraph {
    /// Highest-similarity neighbours first, ties to the lower index; a sample
    /// is never its own neighbour.
    pub fn build(w: &SimilarityMatrix, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("neighbour count must be at least 1".into()));
        }
        let n = w.len();
        let neighbors = (0..n)
            .map(|i| {
                let row = w.row(i);
                let mut idx: Vec<usize> = (0..n).filter(|&j| j != i).collect();
                let take = k.min(idx.len());
                let cmp = |a: &usize, b: &usize| row[*b].total_cmp(&row[*a]).then(a.cmp(b));
                if take < idx.len() {
                    idx.select_nth_unstable_by(take, cmp);
                    idx.truncate(take);
                }
                idx.sort_by(cmp);
                idx
            })
            .collect();
        Ok(Self { k, neighbors })
    }
}

/// Similarity-weighted vote of `x`'s nearest neighbours over the current
/// clusters. Negative (cannot-link) affinities count as zero.
pub fn nonparametric_probs(
    x: usize,
    w: &SimilarityMatrix,
    asg: &ClusterAssignment,
    knn: &KnnGraph,
) -> ClusterDistribution {
    let mut votes = vec![0.0; asg.n_c];
    for &l in &knn.neighbors[x] {
        votes[asg.labels[l]] += w.get(x, l).max(0.0);
    }
    ClusterDistribution::from_weights(votes)
}

/// Which terms of the uncertainty-reduction model drive selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// Gradient times nonparametric (kNN) entropy.
    Nonparametric,
    /// Gradient times mixture-model entropy.
    Parametric,
    /// Gradient alone.
    GradientOnly,
    /// Nonparametric entropy alone.
    NonparametricOnly,
    /// Mixture-model entropy alone.
    ParametricOnly,
}

impl SelectionMode {
    fn step_model(self) -> Option<StepModel> {
        match self {
            SelectionMode::Nonparametric | SelectionMode::NonparametricOnly => Some(StepModel::Knn),
            SelectionMode::Parametric | SelectionMode::ParametricOnly => Some(StepModel::Mixture),
            SelectionMode::GradientOnly => None,
        }
    }

    fn uses_gradient(self) -> bool {
        matches!(self, SelectionMode::Nonparametric | SelectionMode::Parametric | SelectionMode::GradientOnly)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum StepModel {
    Knn,
    Mixture,
}

/// Score of one candidate. Factors a mode does not use are `None`, and
/// `product` is the product of the factors that are present.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyScore {
    pub sample: usize,
    pub gradient: Option<f64>,
    pub step_scale: Option<f64>,
    pub product: f64,
}

impl UncertaintyScore {
    /// Whether this candidate competed in the final argmax.
    pub fn is_ranked(&self, mode: SelectionMode) -> bool {
        !mode.uses_gradient() || self.gradient.is_some()
    }
}

/// Read-only view of the session state that selection needs.
#[derive(Debug, Clone, Copy)]
pub struct SelectionContext<'a> {
    pub embedding: &'a SpectralEmbedding,
    pub assignment: &'a ClusterAssignment,
    /// Current (constraint-edited) affinities.
    pub similarity: &'a SimilarityMatrix,
    pub sets: &'a CertainSets,
    pub knn: &'a KnnGraph,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub chosen: usize,
    pub scores: Vec<UncertaintyScore>,
}

/// Entropy step scales for `candidates` under one probability model.
fn step_scales(candidates: &[usize], ctx: &SelectionContext<'_>, model: StepModel) -> Result<Vec<f64>> {
    Ok(match model {
        StepModel::Knn => candidates
            .iter()
            .map(|&x| entropy(&nonparametric_probs(x, ctx.similarity, ctx.assignment, ctx.knn)))
            .collect(),
        StepModel::Mixture => {
            let mm: MixtureModel = fit_mixture(ctx.embedding, ctx.assignment, ctx.assignment.n_c)?;
            candidates.iter().map(|&x| entropy(&parametric_probs(x, &mm, ctx.embedding))).collect()
        }
    })
}

/// Picks the candidate with the largest estimated uncertainty reduction.
///
/// Combined modes compute step scales for all candidates, keep the `b`
/// largest (ties to lower index) and evaluate gradients only for those.
/// The argmax breaks ties toward the lowest sample index.
pub fn select_informative(
    candidates: &[usize],
    ctx: &SelectionContext<'_>,
    mode: SelectionMode,
    b: usize,
) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::AllSamplesCertain);
    }
    if b == 0 {
        return Err(Error::InvalidParameter("candidate budget b must be at least 1".into()));
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if let Some(&x) = sorted.iter().find(|&&x| ctx.sets.is_certain(x)) {
        return Err(Error::AlreadyCertain(x));
    }

    let steps = match mode.step_model() {
        Some(model) => Some(step_scales(&sorted, ctx, model)?),
        None => None,
    };

    let mut scores: Vec<UncertaintyScore> = sorted
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let step = steps.as_ref().map(|s| s[k]);
            UncertaintyScore { sample: x, gradient: None, step_scale: step, product: step.unwrap_or(f64::NAN) }
        })
        .collect();

    if mode.uses_gradient() {
        let shortlist: Vec<usize> = if steps.is_some() {
            let mut order: Vec<usize> = (0..scores.len()).collect();
            order.sort_by(|&a, &b| {
                let (sa, sb) = (scores[a].step_scale.unwrap(), scores[b].step_scale.unwrap());
                sb.total_cmp(&sa).then(scores[a].sample.cmp(&scores[b].sample))
            });
            order.truncate(b);
            order
        } else {
            (0..scores.len()).collect()
        };
        for k in shortlist {
            let g = gradient_score(scores[k].sample, ctx.embedding, ctx.sets, ctx.similarity)?;
            let s = &mut scores[k];
            s.gradient = Some(g);
            s.product = match s.step_scale {
                Some(h) => g * h,
                None => g,
            };
        }
    }

    let mut chosen: Option<&UncertaintyScore> = None;
    for s in scores.iter().filter(|s| s.is_ranked(mode)) {
        // Strict comparison keeps the lowest index among equal products;
        // NaN products never win.
        if chosen.is_none_or(|c| s.product > c.product || (c.product.is_nan() && !s.product.is_nan())) {
            chosen = Some(s);
        }
    }
    let chosen = chosen.expect("at least one ranked candidate").sample;
    Ok(Selection { chosen, scores })
}
