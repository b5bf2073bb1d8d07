//! Deep-image-prior fitting on 1D signals and 2D images with a small
//! reverse-mode differentiation engine, plus spectral diagnostics of how the
//! fitted output approaches its target frequency by frequency.

pub mod architectures;
pub mod autodiff;
pub mod error;
mod linalg;
pub mod optimizer;
pub mod pgm;
pub mod signals;
pub mod spectral;
pub mod tensor;
pub mod upsample;
pub mod upsample_response;

pub use architectures::{build_model, Family, Model, ModelSpec};
pub use autodiff::{grad_check, Activation, Graph, Var};
pub use error::{Error, PgmError, Result};
pub use optimizer::{run_dip, run_dip_with, FitConfig, Flow, OptimizerKind, Trajectory};
pub use tensor::Tensor;
pub use upsample::UpsampleMode;
