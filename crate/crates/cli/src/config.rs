//! Session configuration as read from JSON files and HTTP bodies.
//!
//! ```json
//! {
//!   "dataset": { "path": "wine.csv", "kernel": "gaussian", "label_column": "class" },
//!   "strategy": "urasc_n", "n_c": 3, "query_budget": 150, "seed": 0,
//!   "noise_rate": 0.0, "b": 20, "knn_k": 20, "eval_every": 1
//! }
//! ```

use std::path::{Path, PathBuf};

use activeclust_core::engine::{EngineConfig, Session};
use activeclust_core::similarity::{
    chi2_similarity, gaussian_similarity, median_chi2_distance, median_pairwise_distance, Dataset, SimilarityMatrix,
};
use activeclust_core::Matrix;
use serde::{Deserialize, Serialize};

use crate::data::{load_dataset, load_labels, LabelColumn};
use crate::error::{Error, Result};
use crate::matrix_io::load_precomputed_similarity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    #[default]
    Gaussian,
    Chi2,
    Precomputed,
}

/// Where the samples come from and how affinities are built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSource {
    /// Feature CSV, or the matrix file for `precomputed`.
    pub path: PathBuf,
    #[serde(default)]
    pub kernel: KernelKind,
    /// Gaussian bandwidth; the median pairwise distance when absent.
    #[serde(default)]
    pub sigma: Option<f64>,
    /// Chi-squared scale; the reciprocal median chi-squared distance when
    /// absent.
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub label_column: Option<LabelColumn>,
    /// One label per line, for `precomputed` matrices.
    #[serde(default)]
    pub labels_path: Option<PathBuf>,
    /// Z-score every feature column before building the kernel.
    #[serde(default)]
    pub standardize: bool,
}

impl DatasetSource {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            kernel: KernelKind::Gaussian,
            sigma: None,
            gamma: None,
            label_column: None,
            labels_path: None,
            standardize: false,
        }
    }

    fn resolve(base: Option<&Path>, p: &Path) -> PathBuf {
        match base {
            Some(b) if p.is_relative() => b.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// Loads the data and builds `W^0`. Relative paths are taken from
    /// `base` when given.
    pub fn prepare(&self, base: Option<&Path>) -> Result<PreparedData> {
        let path = Self::resolve(base, &self.path);
        if self.kernel == KernelKind::Precomputed {
            let similarity = load_precomputed_similarity(&path)?;
            let labels = match &self.labels_path {
                Some(lp) => {
                    let labels = load_labels(&Self::resolve(base, lp))?;
                    if labels.len() != similarity.len() {
                        return Err(Error::Config(format!(
                            "{} labels for a {}-sample matrix",
                            labels.len(),
                            similarity.len()
                        )));
                    }
                    Some(labels)
                }
                None => None,
            };
            return Ok(PreparedData { similarity, labels, features: None, feature_names: None, bandwidth: None });
        }
        let loaded = load_dataset(&path, self.label_column.as_ref())?;
        let ds = if self.standardize { loaded.dataset.standardized() } else { loaded.dataset };
        let (similarity, bandwidth) = self.kernel_matrix(&ds)?;
        Ok(PreparedData {
            similarity,
            labels: ds.labels().map(<[usize]>::to_vec),
            features: Some(ds.features().clone()),
            feature_names: loaded.feature_names,
            bandwidth: Some(bandwidth),
        })
    }

    /// Kernel matrix plus the bandwidth actually used.
    pub fn kernel_matrix(&self, ds: &Dataset) -> Result<(SimilarityMatrix, f64)> {
        match self.kernel {
            KernelKind::Gaussian => {
                let sigma = self.sigma.unwrap_or_else(|| median_pairwise_distance(ds));
                Ok((gaussian_similarity(ds, sigma)?, sigma))
            }
            KernelKind::Chi2 => {
                let gamma = self.gamma.unwrap_or_else(|| 1.0 / median_chi2_distance(ds));
                Ok((chi2_similarity(ds, gamma)?, gamma))
            }
            KernelKind::Precomputed => Err(Error::Config("precomputed kernel needs a matrix file".into())),
        }
    }
}

/// Everything a session needs from the dataset.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub similarity: SimilarityMatrix,
    pub labels: Option<Vec<usize>>,
    pub features: Option<Matrix>,
    pub feature_names: Option<Vec<String>>,
    /// Kernel sigma or gamma in effect.
    pub bandwidth: Option<f64>,
}

impl PreparedData {
    pub fn from_dataset(ds: &Dataset, similarity: SimilarityMatrix) -> Self {
        Self {
            similarity,
            labels: ds.labels().map(<[usize]>::to_vec),
            features: Some(ds.features().clone()),
            feature_names: None,
            bandwidth: None,
        }
    }

    pub fn session(&self, engine: &EngineConfig) -> Result<Session> {
        Ok(Session::new(engine.clone(), self.similarity.clone(), self.labels.clone())?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub dataset: DatasetSource,
    #[serde(flatten)]
    pub engine: EngineConfig,
}

impl SessionConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Checks that do not need the data.
    pub fn validate(&self) -> Result<()> {
        let e = &self.engine;
        if e.query_budget == 0 {
            return Err(Error::Config("query_budget must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&e.noise_rate) {
            return Err(Error::Config(format!("noise_rate {} outside [0, 1]", e.noise_rate)));
        }
        if e.b == 0 || e.knn_k == 0 || e.eval_every == 0 {
            return Err(Error::Config("b, knn_k and eval_every must be at least 1".into()));
        }
        for (name, v) in [("sigma", self.dataset.sigma), ("gamma", self.dataset.gamma)] {
            if v.is_some_and(|v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}
