//! Iteratively Reweighted Residuals (IRR) and the alternating fit.
//!
//! The fit alternates two block minimizations of the full objective
//!
//! ```text
//! F(W, X) = 1/(mn) sum_v sum_i loss(||z_i^v - W_v x_i||^2)
//!         + (C1/m) sum_v ||W_v||_F^2 + (C2/n) sum_i ||x_i||^2
//! ```
//!
//! With W fixed, `n * F` splits into independent per-example problems
//! `J(x) = 1/m sum_v loss(||z^v - W_v x||^2) + C2 ||x||^2`; with X fixed,
//! `m * F` splits into per-view problems
//! `J(W) = 1/n sum_i loss(||z_i - W x_i||^2) + C1 ||W||_F^2`.
//! Each block is solved by IRR: freeze the weights `Q = loss'(r^2)`, solve
//! the resulting ridge system, repeat. Because the loss is concave in the
//! squared residual, every IRR step minimizes a quadratic majorant and the
//! objective never increases.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::BlockLoss;
use crate::linalg::{self, solve_spd, solve_spd_vec};
use crate::model::{
    FitHistory, Hyperparams, IntactEmbedding, IntactModel, MultiViewDataset, StepKind,
    StopReason, TraceEntry,
};

/// Relative objective increase treated as a broken descent guarantee.
pub const DIVERGENCE_TOL: f64 = 1e-6;

/// Outcome of one IRR block solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemResult<T> {
    pub solution: T,
    pub iterations: usize,
    /// Squared residual norms at the solution (per view for x, per example for W).
    pub final_residuals: Vec<f64>,
    pub objective_before: f64,
    pub objective_after: f64,
    /// Block objective after every IRR iteration, starting with the initial value.
    pub trace: Vec<f64>,
}

/// Drives a fixed-point IRR iteration.
///
/// Stops when the iterate moves less than `tol` or after `max_iter` updates.
/// A step that raises the objective can only come from rounding at the
/// fixed point; it is discarded and the loop ends.
pub(crate) fn run_irr<T: Clone>(
    start: T,
    max_iter: usize,
    tol: f64,
    mut update: impl FnMut(&T) -> Result<T>,
    objective: impl Fn(&T) -> f64,
    distance: impl Fn(&T, &T) -> f64,
) -> Result<(T, usize, Vec<f64>)> {
    let mut current = start;
    let mut trace = vec![objective(&current)];
    let mut iterations = 0;
    while iterations < max_iter {
        let next = update(&current)?;
        iterations += 1;
        let obj = objective(&next);
        let prev = *trace.last().unwrap();
        if obj > prev {
            break;
        }
        let step = distance(&current, &next);
        current = next;
        trace.push(obj);
        if step <= tol {
            break;
        }
    }
    Ok((current, iterations, trace))
}

/// The per-example subproblem expressed through its quadratic pieces.
///
/// The linear model supplies `W_v^T W_v` and `W_v^T z^v`; the kernel model
/// supplies `A_v^T K_v A_v` and `A_v^T k_v(z)`.
pub(crate) trait XBlock {
    fn n_views(&self) -> usize;
    fn residual_sq(&self, v: usize, x: &DVector<f64>) -> f64;
    fn gram(&self, v: usize) -> &DMatrix<f64>;
    fn cross(&self, v: usize) -> &DVector<f64>;
}

pub(crate) fn block_objective(
    blk: &impl XBlock,
    loss: BlockLoss,
    x_penalty: f64,
    x: &DVector<f64>,
) -> f64 {
    let m = blk.n_views();
    let data: f64 = (0..m).map(|v| loss.value(blk.residual_sq(v, x))).sum();
    data / m as f64 + x_penalty * x.norm_squared()
}

pub(crate) fn block_update(
    blk: &impl XBlock,
    loss: BlockLoss,
    x_penalty: f64,
    x: &DVector<f64>,
) -> Result<DVector<f64>> {
    let m = blk.n_views();
    let d = x.len();
    let mut lhs = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DVector::<f64>::zeros(d);
    for v in 0..m {
        let q = loss.weight(blk.residual_sq(v, x));
        lhs += blk.gram(v) * q;
        rhs += blk.cross(v) * q;
    }
    for k in 0..d {
        lhs[(k, k)] += m as f64 * x_penalty;
    }
    solve_spd_vec(&lhs, &rhs, "x-update")
}

pub(crate) fn block_solve(
    blk: &impl XBlock,
    loss: BlockLoss,
    x_penalty: f64,
    x0: &DVector<f64>,
    max_inner: usize,
    tol_x: f64,
) -> Result<SubproblemResult<DVector<f64>>> {
    let (x, iterations, trace) = run_irr(
        x0.clone(),
        max_inner,
        tol_x,
        |x| block_update(blk, loss, x_penalty, x),
        |x| block_objective(blk, loss, x_penalty, x),
        |a, b| (a - b).norm(),
    )?;
    let final_residuals = (0..blk.n_views()).map(|v| blk.residual_sq(v, &x)).collect();
    Ok(SubproblemResult {
        solution: x,
        iterations,
        final_residuals,
        objective_before: trace[0],
        objective_after: *trace.last().unwrap(),
        trace,
    })
}

/// An x-subproblem given directly by its quadratic pieces:
/// `residual_v(x) = self_v - 2 cross_v^T x + x^T gram_v x`.
pub(crate) struct QuadBlock {
    pub grams: Vec<DMatrix<f64>>,
    pub cross: Vec<DVector<f64>>,
    pub self_sq: Vec<f64>,
}

impl XBlock for QuadBlock {
    fn n_views(&self) -> usize {
        self.grams.len()
    }

    fn residual_sq(&self, v: usize, x: &DVector<f64>) -> f64 {
        (self.self_sq[v] - 2.0 * self.cross[v].dot(x) + x.dot(&(&self.grams[v] * x))).max(0.0)
    }

    fn gram(&self, v: usize) -> &DMatrix<f64> {
        &self.grams[v]
    }

    fn cross(&self, v: usize) -> &DVector<f64> {
        &self.cross[v]
    }
}

/// Hessian of the per-example objective:
/// `1/m sum_v (2 q_v G_v - 4 q_v^2 g_v g_v^T) + 2 C2 I` with `g_v = cross_v - G_v x`.
pub(crate) fn block_hessian(
    blk: &impl XBlock,
    scale: f64,
    x_penalty: f64,
    x: &DVector<f64>,
) -> DMatrix<f64> {
    let m = blk.n_views() as f64;
    let d = x.len();
    let mut h = DMatrix::<f64>::identity(d, d) * (2.0 * x_penalty);
    for v in 0..blk.n_views() {
        let q = 1.0 / (scale * scale + blk.residual_sq(v, x));
        let g = blk.cross(v) - blk.gram(v) * x;
        h += blk.gram(v) * (2.0 * q / m);
        h -= &g * g.transpose() * (4.0 * q * q / m);
    }
    h
}

struct LinearBlock<'a> {
    weights: &'a [DMatrix<f64>],
    grams: &'a [DMatrix<f64>],
    z: &'a [DVector<f64>],
    cross: Vec<DVector<f64>>,
}

impl<'a> LinearBlock<'a> {
    fn new(weights: &'a [DMatrix<f64>], grams: &'a [DMatrix<f64>], z: &'a [DVector<f64>]) -> Self {
        let cross = weights.iter().zip(z).map(|(w, zv)| w.tr_mul(zv)).collect();
        Self {
            weights,
            grams,
            z,
            cross,
        }
    }
}

impl XBlock for LinearBlock<'_> {
    fn n_views(&self) -> usize {
        self.weights.len()
    }

    fn residual_sq(&self, v: usize, x: &DVector<f64>) -> f64 {
        (&self.z[v] - &self.weights[v] * x).norm_squared()
    }

    fn gram(&self, v: usize) -> &DMatrix<f64> {
        &self.grams[v]
    }

    fn cross(&self, v: usize) -> &DVector<f64> {
        &self.cross[v]
    }
}

fn grams_of(weights: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    weights.iter().map(|w| w.tr_mul(w)).collect()
}

fn check_example(z: &[DVector<f64>], weights: &[DMatrix<f64>], x: &DVector<f64>) -> Result<()> {
    if z.len() != weights.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} view vectors for a {}-view model",
            z.len(),
            weights.len()
        )));
    }
    for (v, (zv, w)) in z.iter().zip(weights).enumerate() {
        if zv.len() != w.nrows() {
            return Err(Error::DimensionMismatch {
                view: v,
                expected: w.nrows(),
                found: zv.len(),
            });
        }
        if w.ncols() != x.len() {
            return Err(Error::ShapeMismatch(format!(
                "latent point has {} entries, W_{v} has {} columns",
                x.len(),
                w.ncols()
            )));
        }
    }
    Ok(())
}

fn cauchy(hp: &Hyperparams) -> BlockLoss {
    BlockLoss::Cauchy { scale: hp.scale }
}

/// Full training objective for a linear model under an arbitrary block loss.
pub fn objective_with_loss(
    dataset: &MultiViewDataset,
    weights: &[DMatrix<f64>],
    x: &DMatrix<f64>,
    loss: BlockLoss,
    hp: &Hyperparams,
) -> Result<f64> {
    check_shapes(dataset, weights, x)?;
    let m = dataset.n_views() as f64;
    let n = dataset.n_examples() as f64;
    let data: f64 = dataset
        .views()
        .iter()
        .zip(weights)
        .map(|(z, w)| {
            let r = z - x * w.transpose();
            r.row_iter().map(|row| loss.value(row.norm_squared())).sum::<f64>()
        })
        .sum();
    let w_norm: f64 = weights.iter().map(|w| w.norm_squared()).sum();
    Ok(data / (m * n) + hp.w_penalty / m * w_norm + hp.x_penalty / n * x.norm_squared())
}

fn check_shapes(dataset: &MultiViewDataset, weights: &[DMatrix<f64>], x: &DMatrix<f64>) -> Result<()> {
    if weights.len() != dataset.n_views() {
        return Err(Error::ShapeMismatch(format!(
            "{} generation matrices for {} views",
            weights.len(),
            dataset.n_views()
        )));
    }
    if x.nrows() != dataset.n_examples() {
        return Err(Error::ShapeMismatch(format!(
            "embedding has {} rows, dataset has {} examples",
            x.nrows(),
            dataset.n_examples()
        )));
    }
    for (v, (z, w)) in dataset.views().iter().zip(weights).enumerate() {
        if w.nrows() != z.ncols() || w.ncols() != x.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "W_{v} is {}x{}, expected {}x{}",
                w.nrows(),
                w.ncols(),
                z.ncols(),
                x.ncols()
            )));
        }
    }
    Ok(())
}

/// Full Cauchy objective of a linear model on a dataset.
pub fn objective_full(
    dataset: &MultiViewDataset,
    model: &IntactModel,
    embedding: &IntactEmbedding,
) -> Result<f64> {
    let hp = &model.hyperparams;
    objective_with_loss(dataset, model.weights()?, embedding.matrix(), cauchy(hp), hp)
}

/// Per-example objective `1/m sum_v log(1 + ||z^v - W_v x||^2 / c^2) + C2 ||x||^2`.
pub fn objective_x(z: &[DVector<f64>], model: &IntactModel, x: &DVector<f64>) -> Result<f64> {
    let weights = model.weights()?;
    check_example(z, weights, x)?;
    let grams = grams_of(weights);
    let blk = LinearBlock::new(weights, &grams, z);
    let hp = &model.hyperparams;
    Ok(block_objective(&blk, cauchy(hp), hp.x_penalty, x))
}

/// Gradient of [`objective_x`].
pub fn grad_x(z: &[DVector<f64>], model: &IntactModel, x: &DVector<f64>) -> Result<DVector<f64>> {
    let weights = model.weights()?;
    check_example(z, weights, x)?;
    let hp = &model.hyperparams;
    let loss = cauchy(hp);
    let m = weights.len() as f64;
    let mut g = x * (2.0 * hp.x_penalty);
    for (w, zv) in weights.iter().zip(z) {
        let r = zv - w * x;
        let q = loss.weight(r.norm_squared());
        g -= w.tr_mul(&r) * (2.0 * q / m);
    }
    Ok(g)
}

/// One IRR step for a latent point:
/// `(sum_v Q_v W_v^T W_v + m C2)^-1 sum_v Q_v W_v^T z^v`.
pub fn update_x_once(
    z: &[DVector<f64>],
    model: &IntactModel,
    x_current: &DVector<f64>,
) -> Result<DVector<f64>> {
    let weights = model.weights()?;
    check_example(z, weights, x_current)?;
    let grams = grams_of(weights);
    let blk = LinearBlock::new(weights, &grams, z);
    let hp = &model.hyperparams;
    block_update(&blk, cauchy(hp), hp.x_penalty, x_current)
}

/// Runs IRR on one latent point until the iterate settles.
pub fn solve_x(
    z: &[DVector<f64>],
    model: &IntactModel,
    x0: &DVector<f64>,
) -> Result<SubproblemResult<DVector<f64>>> {
    let weights = model.weights()?;
    check_example(z, weights, x0)?;
    let grams = grams_of(weights);
    let blk = LinearBlock::new(weights, &grams, z);
    let hp = &model.hyperparams;
    block_solve(&blk, cauchy(hp), hp.x_penalty, x0, hp.max_inner, hp.tol_x)
}

/// Value of the quadratic majorant of [`objective_x`] built at `x_k`:
/// `J(x_k) + (x - x_k)^T J'(x_k) + (x - x_k)^T C(x_k) (x - x_k)` with
/// `C(x_k) = 1/m sum_v Q_v W_v^T W_v + C2 I`.
pub fn majorant_value(
    x: &DVector<f64>,
    x_k: &DVector<f64>,
    z: &[DVector<f64>],
    model: &IntactModel,
) -> Result<f64> {
    let j = objective_x(z, model, x_k)?;
    let g = grad_x(z, model, x_k)?;
    let c = majorant_curvature(z, model, x_k)?;
    let dx = x - x_k;
    Ok(j + dx.dot(&g) + dx.dot(&(c * &dx)))
}

/// The matrix `C(x_k)` of the majorant.
pub fn majorant_curvature(
    z: &[DVector<f64>],
    model: &IntactModel,
    x_k: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let weights = model.weights()?;
    check_example(z, weights, x_k)?;
    let hp = &model.hyperparams;
    let loss = cauchy(hp);
    let m = weights.len() as f64;
    let d = x_k.len();
    let mut c = DMatrix::<f64>::identity(d, d) * hp.x_penalty;
    for (w, zv) in weights.iter().zip(z) {
        let q = loss.weight((zv - w * x_k).norm_squared());
        c += w.tr_mul(w) * (q / m);
    }
    Ok(c)
}

/// Closed-form minimizer of the majorant: `x_k - C(x_k)^-1 J'(x_k) / 2`.
pub fn majorant_minimizer(
    x_k: &DVector<f64>,
    z: &[DVector<f64>],
    model: &IntactModel,
) -> Result<DVector<f64>> {
    let g = grad_x(z, model, x_k)?;
    let c = majorant_curvature(z, model, x_k)?;
    let step = solve_spd_vec(&c, &g, "majorant")?;
    Ok(x_k - step * 0.5)
}

fn check_w_inputs(view: &DMatrix<f64>, x: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<()> {
    if view.nrows() != x.nrows() || w.nrows() != view.ncols() || w.ncols() != x.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "view {}x{}, embedding {}x{}, W {}x{}",
            view.nrows(),
            view.ncols(),
            x.nrows(),
            x.ncols(),
            w.nrows(),
            w.ncols()
        )));
    }
    Ok(())
}

fn row_residuals(view: &DMatrix<f64>, x: &DMatrix<f64>, w: &DMatrix<f64>) -> Vec<f64> {
    let r = view - x * w.transpose();
    r.row_iter().map(|row| row.norm_squared()).collect()
}

pub(crate) fn w_objective(
    view: &DMatrix<f64>,
    x: &DMatrix<f64>,
    w: &DMatrix<f64>,
    loss: BlockLoss,
    w_penalty: f64,
) -> f64 {
    let n = view.nrows() as f64;
    let data: f64 = row_residuals(view, x, w).into_iter().map(|s| loss.value(s)).sum();
    data / n + w_penalty * w.norm_squared()
}

/// `X^T diag(q) X + n C1 I`, the system matrix shared by the linear and
/// kernel W-updates.
pub(crate) fn weighted_second_moment(x: &DMatrix<f64>, q: &[f64], w_penalty: f64) -> DMatrix<f64> {
    let n = x.nrows();
    let d = x.ncols();
    let mut s = DMatrix::<f64>::zeros(d, d);
    for i in 0..n {
        let xi = x.row(i);
        s += xi.transpose() * xi * q[i];
    }
    for k in 0..d {
        s[(k, k)] += n as f64 * w_penalty;
    }
    s
}

pub(crate) fn update_w_with_loss(
    view: &DMatrix<f64>,
    x: &DMatrix<f64>,
    w_current: &DMatrix<f64>,
    loss: BlockLoss,
    w_penalty: f64,
) -> Result<DMatrix<f64>> {
    let q: Vec<f64> = row_residuals(view, x, w_current)
        .into_iter()
        .map(|s| loss.weight(s))
        .collect();
    let s_xx = weighted_second_moment(x, &q, w_penalty);
    // sum_i q_i x_i z_i^T, the transpose of sum_i z_i q_i x_i^T
    let mut qx = x.clone();
    for (i, mut row) in qx.row_iter_mut().enumerate() {
        row *= q[i];
    }
    let s_xz = qx.tr_mul(view);
    Ok(solve_spd(&s_xx, &s_xz, "W-update")?.transpose())
}

/// One IRR step for a view generation matrix:
/// `(sum_i Q_i z_i x_i^T) (sum_i Q_i x_i x_i^T + n C1)^-1`.
pub fn update_w_once(
    view: &DMatrix<f64>,
    embedding: &IntactEmbedding,
    w_current: &DMatrix<f64>,
    hp: &Hyperparams,
) -> Result<DMatrix<f64>> {
    check_w_inputs(view, embedding.matrix(), w_current)?;
    update_w_with_loss(view, embedding.matrix(), w_current, cauchy(hp), hp.w_penalty)
}

pub(crate) fn solve_w_with_loss(
    view: &DMatrix<f64>,
    x: &DMatrix<f64>,
    w0: &DMatrix<f64>,
    loss: BlockLoss,
    hp: &Hyperparams,
) -> Result<SubproblemResult<DMatrix<f64>>> {
    let (w, iterations, trace) = run_irr(
        w0.clone(),
        hp.max_inner,
        hp.tol_x,
        |w| update_w_with_loss(view, x, w, loss, hp.w_penalty),
        |w| w_objective(view, x, w, loss, hp.w_penalty),
        |a, b| (a - b).norm(),
    )?;
    let final_residuals = row_residuals(view, x, &w);
    Ok(SubproblemResult {
        solution: w,
        iterations,
        final_residuals,
        objective_before: trace[0],
        objective_after: *trace.last().unwrap(),
        trace,
    })
}

/// Runs IRR on one view generation matrix.
pub fn solve_w(
    view: &DMatrix<f64>,
    embedding: &IntactEmbedding,
    w0: &DMatrix<f64>,
    hp: &Hyperparams,
) -> Result<SubproblemResult<DMatrix<f64>>> {
    check_w_inputs(view, embedding.matrix(), w0)?;
    solve_w_with_loss(view, embedding.matrix(), w0, cauchy(hp), hp)
}

/// Per-view W objective `1/n sum_i log(1 + ||z_i - W x_i||^2 / c^2) + C1 ||W||_F^2`.
pub fn objective_w(
    view: &DMatrix<f64>,
    embedding: &IntactEmbedding,
    w: &DMatrix<f64>,
    hp: &Hyperparams,
) -> Result<f64> {
    check_w_inputs(view, embedding.matrix(), w)?;
    Ok(w_objective(view, embedding.matrix(), w, cauchy(hp), hp.w_penalty))
}

/// One side of the alternation. Implemented by the linear and kernel models.
pub(crate) trait Alternation: Sync {
    fn objective(&self, x: &DMatrix<f64>) -> f64;
    /// Re-solves every latent point; returns the new X and the largest inner count.
    fn x_sweep(&self, x: &DMatrix<f64>, hp: &Hyperparams) -> Result<(DMatrix<f64>, usize)>;
    /// Re-solves every view map in place; returns the Frobenius change and largest inner count.
    fn w_sweep(&mut self, x: &DMatrix<f64>, hp: &Hyperparams) -> Result<(f64, usize)>;
}

fn check_descent(kind: StepKind, before: f64, after: f64) -> Result<()> {
    if !after.is_finite() || after > before + DIVERGENCE_TOL * before.abs().max(1.0) {
        return Err(Error::DivergenceDetected {
            step: kind.as_str().to_string(),
            before,
            after,
        });
    }
    Ok(())
}

/// Alternates x- and W-sweeps until the objective or the iterates settle,
/// then finishes with one more x-sweep so that the returned X is optimal for
/// the returned maps.
pub(crate) fn alternate<S: Alternation>(
    state: &mut S,
    x0: DMatrix<f64>,
    hp: &Hyperparams,
) -> Result<(DMatrix<f64>, FitHistory)> {
    let mut x = x0;
    let initial_objective = state.objective(&x);
    let mut trace = Vec::new();
    let mut current = initial_objective;
    let mut stop_reason = StopReason::MaxIter;
    let mut outer = 0;

    let record = |kind, before: f64, after: f64, inner, trace: &mut Vec<TraceEntry>| {
        check_descent(kind, before, after)?;
        trace.push(TraceEntry {
            kind,
            objective: after,
            inner_iterations: inner,
        });
        Ok::<_, Error>(())
    };

    while outer < hp.max_outer {
        outer += 1;
        let start = current;

        let (x_new, inner) = state.x_sweep(&x, hp)?;
        let after_x = state.objective(&x_new);
        record(StepKind::XUpdate, current, after_x, inner, &mut trace)?;
        let dx = (&x_new - &x).norm();
        x = x_new;
        current = after_x;

        let (dw, inner) = state.w_sweep(&x, hp)?;
        let after_w = state.objective(&x);
        record(StepKind::WUpdate, current, after_w, inner, &mut trace)?;
        current = after_w;

        log::debug!("outer {outer}: objective {current:.12e} (dx {dx:.3e}, dw {dw:.3e})");
        if (start - current).abs() <= hp.tol_obj * start.abs() {
            stop_reason = StopReason::ObjectiveTol;
            break;
        }
        if dx.max(dw) <= hp.tol_x {
            stop_reason = StopReason::IterateTol;
            break;
        }
    }

    let (x_new, inner) = state.x_sweep(&x, hp)?;
    let after_x = state.objective(&x_new);
    record(StepKind::XUpdate, current, after_x, inner, &mut trace)?;
    x = x_new;

    let history = FitHistory {
        initial_objective,
        trace,
        outer_iterations: outer,
        converged: stop_reason != StopReason::MaxIter,
        stop_reason,
    };
    Ok((x, history))
}

/// Initial latent coordinates: scores of the concatenated views on their
/// top-d principal directions, or seeded Gaussian entries scaled by
/// `1/sqrt(d)` when fewer than d non-degenerate directions exist.
pub fn initial_embedding(dataset: &MultiViewDataset, d: usize, seed: u64) -> DMatrix<f64> {
    let n = dataset.n_examples();
    let p: usize = dataset.view_dims().iter().sum();
    let mut concat = DMatrix::<f64>::zeros(n, p);
    let mut offset = 0;
    for view in dataset.views() {
        concat.columns_mut(offset, view.ncols()).copy_from(view);
        offset += view.ncols();
    }
    for mut col in concat.column_iter_mut() {
        let mean = col.sum() / n as f64;
        col.add_scalar_mut(-mean);
    }

    let scores = if d <= n.min(p) {
        if p <= n {
            let (values, vectors) = linalg::sorted_eigen(&concat.tr_mul(&concat));
            nondegenerate(&values, d).then(|| &concat * vectors.columns(0, d))
        } else {
            let (values, vectors) = linalg::sorted_eigen(&(&concat * concat.transpose()));
            nondegenerate(&values, d).then(|| {
                let mut s = vectors.columns(0, d).into_owned();
                for (k, mut col) in s.column_iter_mut().enumerate() {
                    col *= values[k].sqrt();
                }
                s
            })
        }
    } else {
        None
    };

    match scores {
        Some(mut x) => {
            linalg::canonical_column_signs(&mut x);
            x
        }
        None => {
            log::info!("principal initialization degenerate; using seeded Gaussian start");
            crate::synth::gaussian_matrix(n, d, seed, 0) / (d as f64).sqrt()
        }
    }
}

fn nondegenerate(values: &[f64], d: usize) -> bool {
    let top = values.first().copied().unwrap_or(0.0);
    top > 0.0 && values.len() >= d && values[d - 1] > 1e-12 * top
}

/// One ridge least-squares map per view against a fixed X (IRR weights of 1).
pub fn initial_weights(
    dataset: &MultiViewDataset,
    x: &DMatrix<f64>,
    hp: &Hyperparams,
) -> Vec<DMatrix<f64>> {
    let n = x.nrows();
    let s_xx = weighted_second_moment(x, &vec![1.0; n], hp.w_penalty);
    dataset
        .views()
        .iter()
        .enumerate()
        .map(|(v, z)| match solve_spd(&s_xx, &x.tr_mul(z), "initial W") {
            Ok(wt) => wt.transpose(),
            Err(_) => {
                crate::synth::gaussian_matrix(z.ncols(), hp.latent_dim, hp.seed, 1 + v as u64)
                    / (hp.latent_dim as f64).sqrt()
            }
        })
        .collect()
}

struct LinearAlternation<'a> {
    dataset: &'a MultiViewDataset,
    weights: Vec<DMatrix<f64>>,
    loss: BlockLoss,
    hp: Hyperparams,
}

impl Alternation for LinearAlternation<'_> {
    fn objective(&self, x: &DMatrix<f64>) -> f64 {
        objective_with_loss(self.dataset, &self.weights, x, self.loss, &self.hp)
            .unwrap_or(f64::NAN)
    }

    fn x_sweep(&self, x: &DMatrix<f64>, hp: &Hyperparams) -> Result<(DMatrix<f64>, usize)> {
        let grams = grams_of(&self.weights);
        let rows: Vec<SubproblemResult<DVector<f64>>> = (0..x.nrows())
            .into_par_iter()
            .map(|i| {
                let z = self.dataset.example(i);
                let blk = LinearBlock::new(&self.weights, &grams, &z);
                let x0 = x.row(i).transpose();
                block_solve(&blk, self.loss, hp.x_penalty, &x0, hp.max_inner, hp.tol_x)
            })
            .collect::<Result<_>>()?;
        let inner = rows.iter().map(|r| r.iterations).max().unwrap_or(0);
        let mut out = DMatrix::zeros(x.nrows(), x.ncols());
        for (i, r) in rows.iter().enumerate() {
            out.set_row(i, &r.solution.transpose());
        }
        Ok((out, inner))
    }

    fn w_sweep(&mut self, x: &DMatrix<f64>, hp: &Hyperparams) -> Result<(f64, usize)> {
        let solved: Vec<SubproblemResult<DMatrix<f64>>> = self
            .dataset
            .views()
            .par_iter()
            .zip(self.weights.par_iter())
            .map(|(z, w)| solve_w_with_loss(z, x, w, self.loss, hp))
            .collect::<Result<_>>()?;
        let mut change = 0.0;
        let mut inner = 0;
        for (w, r) in self.weights.iter_mut().zip(solved) {
            change += (&r.solution - &*w).norm_squared();
            inner = inner.max(r.iterations);
            *w = r.solution;
        }
        Ok((change.sqrt(), inner))
    }
}

/// Linear fit under an arbitrary block loss (the Cauchy loss or the ridge baseline).
pub fn fit_with_loss(
    dataset: &MultiViewDataset,
    hp: &Hyperparams,
    loss: BlockLoss,
    init: Option<(IntactModel, IntactEmbedding)>,
) -> Result<(IntactModel, IntactEmbedding, FitHistory)> {
    hp.validate()?;
    let (weights, x0) = match init {
        Some((model, emb)) => {
            let w = model.weights()?.to_vec();
            check_shapes(dataset, &w, emb.matrix())?;
            (w, emb.into_matrix())
        }
        None => {
            let x0 = initial_embedding(dataset, hp.latent_dim, hp.seed);
            (initial_weights(dataset, &x0, hp), x0)
        }
    };
    let mut state = LinearAlternation {
        dataset,
        weights,
        loss,
        hp: *hp,
    };
    let (x, history) = alternate(&mut state, x0, hp)?;
    let model = IntactModel::linear(state.weights, *hp)?;
    Ok((model, IntactEmbedding::new(x)?, history))
}

/// Learns per-view generation matrices and the shared latent embedding.
pub fn fit(
    dataset: &MultiViewDataset,
    hp: &Hyperparams,
    init: Option<(IntactModel, IntactEmbedding)>,
) -> Result<(IntactModel, IntactEmbedding, FitHistory)> {
    fit_with_loss(dataset, hp, cauchy(hp), init)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn scalar_model(w: f64, hp: Hyperparams) -> IntactModel {
        IntactModel::linear(vec![DMatrix::from_element(1, 1, w)], hp).unwrap()
    }

    fn hp(x_penalty: f64, w_penalty: f64) -> Hyperparams {
        Hyperparams {
            scale: 1.0,
            x_penalty,
            w_penalty,
            latent_dim: 1,
            ..Default::default()
        }
    }

    fn v1(a: f64) -> DVector<f64> {
        DVector::from_element(1, a)
    }

    #[test]
    fn objective_x_zero_residual_term() {
        let model = scalar_model(1.0, hp(0.1, 0.0));
        let j = objective_x(&[v1(2.0)], &model, &v1(2.0)).unwrap();
        assert_abs_diff_eq!(j, 0.4, epsilon = 1e-15);
        let j0 = objective_x(&[v1(0.0)], &model, &v1(0.0)).unwrap();
        assert_eq!(j0, 0.0);
    }

    #[test]
    fn grad_x_scalar() {
        let model = scalar_model(1.0, hp(0.0, 0.0));
        let g = grad_x(&[v1(0.0)], &model, &v1(1.0)).unwrap();
        assert_abs_diff_eq!(g[0], 1.0, epsilon = 1e-15);
        let g0 = grad_x(&[v1(3.0)], &model, &v1(3.0)).unwrap();
        assert_eq!(g0[0], 0.0);
    }

    #[test]
    fn update_x_scalar_cases() {
        let model = scalar_model(1.0, hp(0.0, 0.0));
        for start in [-5.0, 0.0, 2.0, 10.0] {
            let x = update_x_once(&[v1(2.0)], &model, &v1(start)).unwrap();
            assert_abs_diff_eq!(x[0], 2.0, epsilon = 1e-14);
        }
        let model = scalar_model(1.0, hp(0.5, 0.0));
        let x = update_x_once(&[v1(1.0)], &model, &v1(1.0)).unwrap();
        assert_abs_diff_eq!(x[0], 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn update_x_singular_without_penalty() {
        let model = scalar_model(0.0, hp(0.0, 0.0));
        assert!(matches!(
            update_x_once(&[v1(1.0)], &model, &v1(0.0)),
            Err(Error::SingularSystem(_))
        ));
    }

    #[test]
    fn update_w_scalar_cases() {
        let emb = IntactEmbedding::new(DMatrix::from_element(1, 1, 1.0)).unwrap();
        let w = update_w_once(
            &DMatrix::from_element(1, 1, 1.0),
            &emb,
            &DMatrix::from_element(1, 1, 1.0),
            &hp(0.0, 0.0),
        )
        .unwrap();
        assert_abs_diff_eq!(w[(0, 0)], 1.0, epsilon = 1e-15);

        let w = update_w_once(
            &DMatrix::from_element(1, 1, 2.0),
            &emb,
            &DMatrix::from_element(1, 1, 0.0),
            &hp(0.0, 0.5),
        )
        .unwrap();
        assert_abs_diff_eq!(w[(0, 0)], 0.4 / 0.7, epsilon = 1e-15);
    }

    #[test]
    fn solve_x_fixed_point_takes_one_iteration() {
        let model = scalar_model(1.0, hp(0.0, 0.0));
        let r = solve_x(&[v1(2.0)], &model, &v1(2.0)).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.solution[0], 2.0);
    }

    #[test]
    fn solve_w_fixed_point_unchanged() {
        let emb = IntactEmbedding::new(DMatrix::from_element(1, 1, 1.0)).unwrap();
        let view = DMatrix::from_element(1, 1, 1.0);
        let w0 = DMatrix::from_element(1, 1, 1.0);
        let r = solve_w(&view, &emb, &w0, &hp(0.0, 0.0)).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.solution, w0);
    }

    #[test]
    fn scalar_trace_strictly_decreasing() {
        let model = scalar_model(1.0, hp(0.5, 0.0));
        let r = solve_x(&[v1(1.0)], &model, &v1(1.0)).unwrap();
        assert!(r.trace.len() > 2);
        for w in r.trace.windows(2) {
            assert!(w[1] < w[0] || (w[0] - w[1]).abs() < 1e-15);
        }
        assert!(r.trace[1] < r.trace[0]);
        assert!(r.objective_after < r.objective_before);
    }

    #[test]
    fn shape_errors() {
        let model = scalar_model(1.0, hp(0.0, 0.0));
        assert!(objective_x(&[v1(1.0), v1(1.0)], &model, &v1(0.0)).is_err());
        assert!(matches!(
            objective_x(&[DVector::zeros(2)], &model, &v1(0.0)),
            Err(Error::DimensionMismatch { view: 0, .. })
        ));
    }

    #[test]
    fn run_irr_discards_increasing_step() {
        let (x, iters, trace) = run_irr(
            0.0f64,
            10,
            1e-12,
            |x| Ok(x + 1.0),
            |x| *x,
            |a, b| (a - b).abs(),
        )
        .unwrap();
        assert_eq!(x, 0.0);
        assert_eq!(iters, 1);
        assert_eq!(trace, vec![0.0]);
    }
}
