//! Sparse deconvolution and spectral analysis of quasi-periodic spike-convolution
//! signals such as electrograms.
//!
//! The crate covers the whole chain: synthetic signal generation, Hermite
//! wavelet dictionaries, LASSO and cross-products LASSO inference, refractory
//! selection, deflation-based spectral analysis and a configurable pipeline.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod coefficients;
pub mod config;
pub mod cp_lasso;
pub mod dictionary;
pub mod dsp;
pub mod error;
pub mod io;
pub mod lasso;
pub mod linalg;
pub mod pipeline;
pub mod refractory;
mod rng;
pub mod signal_model;
pub mod spectral;

pub use coefficients::CoefficientVector;
pub use config::PipelineConfig;
pub use dictionary::{
    BoundaryMode, DictionaryOperator, DictionarySpec, HermiteWavelet, WaveletAtom,
};
pub use error::{Error, Result};
pub use lasso::{solve_lasso, LassoProblem, SolverReport};
pub use pipeline::{compare_solvers, run_pipeline, ReportDocument};
pub use refractory::{ActivationSequence, SelectionParams};
pub use signal_model::{Band, ChannelBank, EgmRecord, FociSpec};
pub use spectral::{FociEstimate, SsaParams};
