//! Domain types shared by the optimizer, inference and I/O layers.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelModel;

/// Optimization hyperparameters.
///
/// `w_penalty` and `x_penalty` weight the Frobenius penalty on the view
/// generation matrices and the squared norm penalty on latent points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyperparams {
    /// Cauchy scale `c`, in the units of the (standardized) features.
    #[serde(alias = "c")]
    pub scale: f64,
    /// `C1`, weight of the view-map penalty.
    #[serde(alias = "C1")]
    pub w_penalty: f64,
    /// `C2`, weight of the latent-point penalty.
    #[serde(alias = "C2")]
    pub x_penalty: f64,
    /// `d`, the latent dimension.
    #[serde(alias = "d")]
    pub latent_dim: usize,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Relative objective change that stops the outer loop.
    pub tol_obj: f64,
    /// Iterate change (Euclidean / Frobenius) that stops inner and outer loops.
    pub tol_x: f64,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            scale: 1.0,
            w_penalty: 1e-4,
            x_penalty: 1e-4,
            latent_dim: 3,
            max_outer: 200,
            max_inner: 100,
            tol_obj: 1e-8,
            tol_x: 1e-8,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(Error::NonPositiveScale(self.scale));
        }
        if !(self.w_penalty >= 0.0) || !self.w_penalty.is_finite() {
            return bad(format!("w_penalty must be >= 0, got {}", self.w_penalty));
        }
        if !(self.x_penalty >= 0.0) || !self.x_penalty.is_finite() {
            return bad(format!("x_penalty must be >= 0, got {}", self.x_penalty));
        }
        if self.latent_dim == 0 {
            return bad("latent_dim must be >= 1".into());
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return bad("max_outer and max_inner must be >= 1".into());
        }
        if !(self.tol_obj > 0.0) || !(self.tol_x > 0.0) {
            return bad("tolerances must be > 0".into());
        }
        Ok(())
    }
}

/// Validated multi-view data: `m` views sharing `n` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    views: Vec<DMatrix<f64>>,
    labels: Option<Vec<u32>>,
}

impl MultiViewDataset {
    /// Checks shapes and finiteness.
    pub fn new(views: Vec<DMatrix<f64>>, labels: Option<Vec<u32>>) -> Result<Self> {
        let Some(first) = views.first() else {
            return Err(Error::EmptyView("dataset has no views".into()));
        };
        let n = first.nrows();
        for (v, view) in views.iter().enumerate() {
            if view.nrows() == 0 || view.ncols() == 0 {
                return Err(Error::EmptyView(format!(
                    "view {v} has shape {}x{}",
                    view.nrows(),
                    view.ncols()
                )));
            }
            if view.nrows() != n {
                return Err(Error::ShapeMismatch(format!(
                    "view {v} has {} rows, view 0 has {n}",
                    view.nrows()
                )));
            }
            check_finite(view, &format!("view {v}"))?;
        }
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "{} labels for {n} examples",
                    labels.len()
                )));
            }
        }
        Ok(Self { views, labels })
    }

    pub fn views(&self) -> &[DMatrix<f64>] {
        &self.views
    }

    pub fn view(&self, v: usize) -> &DMatrix<f64> {
        &self.views[v]
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn n_examples(&self) -> usize {
        self.views[0].nrows()
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn view_dims(&self) -> Vec<usize> {
        self.views.iter().map(|v| v.ncols()).collect()
    }

    /// The m view vectors of example `i`.
    pub fn example(&self, i: usize) -> Vec<DVector<f64>> {
        self.views
            .iter()
            .map(|v| v.row(i).transpose().into_owned())
            .collect()
    }

    pub fn into_views(self) -> Vec<DMatrix<f64>> {
        self.views
    }
}

pub(crate) fn check_finite(m: &DMatrix<f64>, context: &str) -> Result<()> {
    for col in 0..m.ncols() {
        for row in 0..m.nrows() {
            if !m[(row, col)].is_finite() {
                return Err(Error::NonFiniteInput {
                    context: context.to_string(),
                    row,
                    col,
                });
            }
        }
    }
    Ok(())
}

/// Per-column affine map of one view: `standardized = (raw - mean) / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewTransform {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl ViewTransform {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, raw: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(raw.nrows(), raw.ncols(), |i, j| {
            (raw[(i, j)] - self.mean[j]) / self.scale[j]
        })
    }

    pub fn apply_vec(&self, raw: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(raw.len(), |j, _| (raw[j] - self.mean[j]) / self.scale[j])
    }

    pub fn invert(&self, standardized: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(standardized.nrows(), standardized.ncols(), |i, j| {
            standardized[(i, j)] * self.scale[j] + self.mean[j]
        })
    }
}

/// The transform record produced by [`standardize_views`], one entry per view.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub views: Vec<ViewTransform>,
}

impl Standardization {
    pub fn apply_example(&self, z: &[DVector<f64>]) -> Vec<DVector<f64>> {
        z.iter()
            .zip(&self.views)
            .map(|(zv, t)| t.apply_vec(zv))
            .collect()
    }

    pub fn apply_views(&self, views: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
        views.iter().zip(&self.views).map(|(z, t)| t.apply(z)).collect()
    }

    pub fn invert_views(&self, views: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
        views.iter().zip(&self.views).map(|(z, t)| t.invert(z)).collect()
    }
}

/// Centers every column and scales it to unit (population) standard deviation.
/// Constant columns keep scale 1.
pub fn standardize_views(dataset: &MultiViewDataset) -> (MultiViewDataset, Standardization) {
    let n = dataset.n_examples() as f64;
    let mut transforms = Vec::with_capacity(dataset.n_views());
    let mut views = Vec::with_capacity(dataset.n_views());
    for view in dataset.views() {
        let mut mean = Vec::with_capacity(view.ncols());
        let mut scale = Vec::with_capacity(view.ncols());
        for col in view.column_iter() {
            let mu = col.sum() / n;
            let var = col.iter().map(|&z| (z - mu) * (z - mu)).sum::<f64>() / n;
            let sd = var.sqrt();
            mean.push(mu);
            scale.push(if sd > 1e-12 * mu.abs().max(1.0) { sd } else { 1.0 });
        }
        let t = ViewTransform { mean, scale };
        views.push(t.apply(view));
        transforms.push(t);
    }
    let dataset = MultiViewDataset {
        views,
        labels: dataset.labels.clone(),
    };
    (dataset, Standardization { views: transforms })
}

/// The n×d latent coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct IntactEmbedding {
    x: DMatrix<f64>,
}

impl IntactEmbedding {
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        check_finite(&x, "embedding")?;
        Ok(Self { x })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.x
    }

    pub fn point(&self, i: usize) -> DVector<f64> {
        self.x.row(i).transpose().into_owned()
    }

    pub fn n_examples(&self) -> usize {
        self.x.nrows()
    }

    pub fn latent_dim(&self) -> usize {
        self.x.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelMode {
    Linear,
    Kernel,
}

/// Learned generation maps, linear matrices or kernel atoms.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    /// `W_v` of shape D_v×d per view.
    Linear(Vec<DMatrix<f64>>),
    Kernel(KernelModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntactModel {
    pub params: ModelParams,
    pub hyperparams: Hyperparams,
}

impl IntactModel {
    pub fn linear(weights: Vec<DMatrix<f64>>, hyperparams: Hyperparams) -> Result<Self> {
        let d = hyperparams.latent_dim;
        for (v, w) in weights.iter().enumerate() {
            if w.ncols() != d {
                return Err(Error::ShapeMismatch(format!(
                    "W_{v} has {} columns, latent_dim is {d}",
                    w.ncols()
                )));
            }
            check_finite(w, &format!("W_{v}"))?;
        }
        Ok(Self {
            params: ModelParams::Linear(weights),
            hyperparams,
        })
    }

    pub fn mode(&self) -> ModelMode {
        match self.params {
            ModelParams::Linear(_) => ModelMode::Linear,
            ModelParams::Kernel(_) => ModelMode::Kernel,
        }
    }

    /// The generation matrices; errors for kernel models.
    pub fn weights(&self) -> Result<&[DMatrix<f64>]> {
        match &self.params {
            ModelParams::Linear(w) => Ok(w),
            ModelParams::Kernel(_) => Err(Error::InvalidParameter(
                "operation requires a linear model".into(),
            )),
        }
    }

    pub fn kernel(&self) -> Result<&KernelModel> {
        match &self.params {
            ModelParams::Kernel(k) => Ok(k),
            ModelParams::Linear(_) => Err(Error::InvalidParameter(
                "operation requires a kernel model".into(),
            )),
        }
    }

    pub fn n_views(&self) -> usize {
        match &self.params {
            ModelParams::Linear(w) => w.len(),
            ModelParams::Kernel(k) => k.n_views(),
        }
    }

    pub fn view_dims(&self) -> Vec<usize> {
        match &self.params {
            ModelParams::Linear(w) => w.iter().map(|w| w.nrows()).collect(),
            ModelParams::Kernel(k) => k.training_views().iter().map(|z| z.ncols()).collect(),
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.hyperparams.latent_dim
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    XUpdate,
    WUpdate,
}

impl StepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::XUpdate => "x-update",
            StepKind::WUpdate => "w-update",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    ObjectiveTol,
    IterateTol,
    MaxIter,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::ObjectiveTol => "objective_tol",
            StopReason::IterateTol => "iterate_tol",
            StopReason::MaxIter => "max_iter",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub kind: StepKind,
    pub objective: f64,
    /// Largest inner IRR iteration count over the blocks of this half step.
    pub inner_iterations: usize,
}

/// Objective after every half step of the alternation.
#[derive(Debug, Clone, PartialEq)]
pub struct FitHistory {
    pub initial_objective: f64,
    pub trace: Vec<TraceEntry>,
    pub outer_iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
}

impl FitHistory {
    pub fn objectives(&self) -> Vec<f64> {
        std::iter::once(self.initial_objective)
            .chain(self.trace.iter().map(|e| e.objective))
            .collect()
    }

    pub fn final_objective(&self) -> f64 {
        self.trace
            .last()
            .map(|e| e.objective)
            .unwrap_or(self.initial_objective)
    }

    /// True when no recorded step raised the objective by more than
    /// `rel_tol * max(1, |previous|)`.
    pub fn is_monotone(&self, rel_tol: f64) -> bool {
        self.objectives()
            .windows(2)
            .all(|w| w[1] <= w[0] + rel_tol * w[0].abs().max(1.0))
    }
}
