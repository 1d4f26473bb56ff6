//! Std companion to `activeclust-core`: dataset and matrix files, session
//! configuration and persistence, the benchmark runner, and the HTTP session
//! service.
//!
//! | module          | contents                                           |
//! |-----------------|----------------------------------------------------|
//! | [`data`]        | feature CSV loading with header and label handling |
//! | [`matrix_io`]   | precomputed similarity files (CSV and `ACSM`)      |
//! | [`config`]      | JSON session configuration, kernel construction    |
//! | [`runner`]      | simulated runs, sweeps, curve output               |
//! | [`session_file`]| versioned session save and load                    |
//! | [`service`]     | axum router for interactive sessions               |
//! | [`synth`]       | Gaussian blob generator                            |

pub mod config;
pub mod data;
mod error;
pub mod matrix_io;
pub mod runner;
pub mod service;
pub mod session_file;
pub mod synth;

pub use activeclust_core;
pub use error::{Error, Result};
