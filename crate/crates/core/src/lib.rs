//! Active semi-supervised spectral clustering.
//!
//! The crate is `no_std` (it needs `alloc`). It contains the numerical
//! pieces of the active loop:
//!
//! | module | purpose |
//! |--------|---------|
//! | [`similarity`] | datasets, Gaussian / chi-squared kernels, precomputed affinities |
//! | [`spectral`] | Laplacian, smallest eigenpairs, constraint edits, spectral learning |
//! | [`eigen`] | dense and subspace-iteration symmetric eigensolvers |
//! | [`kmeans`] | seeded k-means++ on the spectral embedding |
//! | [`certain`] | certain-sample sets and the pairwise query protocol |
//! | [`uncertainty`] | eigenvector-perturbation gradients, entropy step scales, selection |
//! | [`mixture`] | Gaussian mixture fitted on the embedding (parametric step scale) |
//! | [`oracle`] | ground-truth, noisy and interactive answer sources |
//! | [`metrics`] | Jaccard coefficient and V-measure |
//! | [`engine`] | the iterative session: cluster, select, query, repeat |
//! | [`rng`] | seeded, platform-independent random streams |
//!
//! IO, file formats, the CLI and the HTTP service live in the `activeclust`
//! companion crate.
#![no_std]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod certain;
pub mod eigen;
pub mod engine;
mod error;
pub mod kmeans;
pub mod matrix;
pub mod metrics;
pub mod mixture;
pub mod oracle;
pub mod rng;
pub mod similarity;
pub mod spectral;
pub mod uncertainty;

pub use error::{Error, Result};
pub use matrix::Matrix;
