//! Robust multi-view intact space learning.
//!
//! Given several noisy, individually insufficient views of the same examples,
//! the library learns one generation map per view and a shared latent
//! representation by minimizing a Cauchy-loss reconstruction objective with
//! iteratively reweighted residuals.

pub mod error;
pub mod estimators;
pub mod cli;
pub mod config;
pub mod eval;
pub mod inference;
pub mod io;
pub mod irr;
pub mod kernel;
pub mod linalg;
pub mod model;
pub mod synth;

pub use error::{Error, Result};
pub use estimators::{BlockLoss, EstimatorKind};
pub use irr::{fit, fit_with_loss, SubproblemResult};
pub use kernel::{kernel_embed, kernel_fit, KernelModel, KernelSpec};
pub use model::{
    standardize_views, FitHistory, Hyperparams, IntactEmbedding, IntactModel, ModelMode,
    ModelParams, MultiViewDataset, Standardization, StepKind, StopReason, TraceEntry,
    ViewTransform,
};
