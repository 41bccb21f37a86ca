//! Kernelized intact space learning.
//!
//! Each view map lives in the feature space of a kernel and is expressed
//! through atoms over the training images, `phi(W_v) = phi(Z^v) A_v` with
//! `A_v` of shape n×d. Residuals and map norms only need the Gram matrix:
//!
//! ```text
//! ||phi(z_i) - phi(W_v) x||^2 = k(z_i, z_i) - 2 k_i^T A_v x + x^T A_v^T K_v A_v x
//! ||phi(W_v)||^2             = trace(A_v^T K_v A_v)
//! ```
//!
//! The optimizer is the linear one with `W_v^T W_v -> A_v^T K_v A_v` and
//! `W_v^T z -> A_v^T k_v(z)`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::BlockLoss;
use crate::irr::{
    alternate, block_solve, initial_embedding, run_irr, weighted_second_moment, Alternation,
    QuadBlock, SubproblemResult, XBlock,
};
use crate::linalg::{self, solve_spd};
use crate::model::{
    check_finite, FitHistory, Hyperparams, IntactEmbedding, IntactModel, ModelParams,
    MultiViewDataset,
};

/// Kernel function on a single view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// `<z, z'>`
    Linear,
    /// `exp(-gamma ||z - z'||^2)`
    Rbf { gamma: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Rbf { gamma } if !(gamma > 0.0 && gamma.is_finite()) => Err(
                Error::InvalidParameter(format!("rbf gamma must be > 0, got {gamma}")),
            ),
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            KernelSpec::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }

    /// RBF kernel with `gamma = 1 / median pairwise squared distance`.
    pub fn rbf_median(view: &DMatrix<f64>) -> KernelSpec {
        let rows = rows_of(view);
        let mut d2 = Vec::with_capacity(rows.len() * rows.len().saturating_sub(1) / 2);
        for i in 0..rows.len() {
            for j in 0..i {
                d2.push(
                    rows[i]
                        .iter()
                        .zip(&rows[j])
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum::<f64>(),
                );
            }
        }
        d2.sort_by(f64::total_cmp);
        let median = match d2.len() {
            0 => 0.0,
            len if len % 2 == 1 => d2[len / 2],
            len => 0.5 * (d2[len / 2 - 1] + d2[len / 2]),
        };
        KernelSpec::Rbf {
            gamma: if median > 0.0 { 1.0 / median } else { 1.0 },
        }
    }
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// `K[i][j] = k(z_i, z_j)` for the rows of `view`.
pub fn gram(view: &DMatrix<f64>, kernel: &KernelSpec) -> Result<DMatrix<f64>> {
    kernel.validate()?;
    check_finite(view, "kernel input")?;
    let rows = rows_of(view);
    let n = rows.len();
    let entries: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let rows = &rows;
            (0..n).map(move |j| kernel.eval(&rows[i], &rows[j]))
        })
        .collect();
    Ok(DMatrix::from_row_slice(n, n, &entries))
}

/// Minimum eigenvalue below which a Gram matrix is rejected, relative to `max(1, mean diag)`.
pub const GRAM_REJECT: f64 = -1e-4;
/// Minimum eigenvalue below which diagonal jitter is added.
pub const GRAM_JITTER_TRIGGER: f64 = -1e-8;

/// Checks a Gram matrix for PSD-ness, adding diagonal jitter for small
/// negative eigenvalues.
pub fn regularize_gram(mut k: DMatrix<f64>, view: usize) -> Result<DMatrix<f64>> {
    let n = k.nrows();
    if n == 0 {
        return Ok(k);
    }
    let mean_diag = k.diagonal().mean();
    let unit = mean_diag.abs().max(1.0);
    let min_eig = linalg::min_eigenvalue(&k);
    if min_eig < GRAM_REJECT * unit {
        return Err(Error::GramNotPsd {
            view,
            min_eigenvalue: min_eig,
        });
    }
    if min_eig < GRAM_JITTER_TRIGGER * unit {
        let jitter = -min_eig + 1e-10 * mean_diag.abs();
        log::warn!("view {view}: gram min eigenvalue {min_eig:.3e}, adding jitter {jitter:.3e}");
        for i in 0..n {
            k[(i, i)] += jitter;
        }
    }
    Ok(k)
}

/// Trained kernel maps plus what is needed to evaluate them on new inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelModel {
    atoms: Vec<DMatrix<f64>>,
    training_views: Vec<DMatrix<f64>>,
    kernels: Vec<KernelSpec>,
    grams: Vec<DMatrix<f64>>,
}

impl KernelModel {
    /// Builds the model, computing and checking the Gram matrix of every view.
    pub fn new(
        atoms: Vec<DMatrix<f64>>,
        training_views: Vec<DMatrix<f64>>,
        kernels: Vec<KernelSpec>,
    ) -> Result<Self> {
        let m = training_views.len();
        if atoms.len() != m || kernels.len() != m {
            return Err(Error::ShapeMismatch(format!(
                "{} atom matrices and {} kernels for {m} views",
                atoms.len(),
                kernels.len()
            )));
        }
        let n = training_views.first().map_or(0, |z| z.nrows());
        for (v, (a, z)) in atoms.iter().zip(&training_views).enumerate() {
            if z.nrows() != n || a.nrows() != n {
                return Err(Error::ShapeMismatch(format!(
                    "view {v}: atoms {}x{}, training view {}x{}, expected {n} rows",
                    a.nrows(),
                    a.ncols(),
                    z.nrows(),
                    z.ncols()
                )));
            }
            check_finite(a, &format!("A_{v}"))?;
        }
        let grams = training_views
            .iter()
            .zip(&kernels)
            .enumerate()
            .map(|(v, (z, k))| regularize_gram(gram(z, k)?, v))
            .collect::<Result<_>>()?;
        Ok(Self {
            atoms,
            training_views,
            kernels,
            grams,
        })
    }

    pub fn atoms(&self) -> &[DMatrix<f64>] {
        &self.atoms
    }

    pub fn training_views(&self) -> &[DMatrix<f64>] {
        &self.training_views
    }

    pub fn kernels(&self) -> &[KernelSpec] {
        &self.kernels
    }

    pub fn grams(&self) -> &[DMatrix<f64>] {
        &self.grams
    }

    pub fn n_views(&self) -> usize {
        self.training_views.len()
    }

    pub fn n_train(&self) -> usize {
        self.training_views.first().map_or(0, |z| z.nrows())
    }

    pub fn latent_dim(&self) -> usize {
        self.atoms.first().map_or(0, |a| a.ncols())
    }

    /// Cross-kernel vector `[k(z, z_j)]_j` against the training rows of view `v`.
    pub fn cross_kernel(&self, v: usize, z: &DVector<f64>) -> DVector<f64> {
        let train = &self.training_views[v];
        let zs = z.as_slice();
        DVector::from_fn(train.nrows(), |j, _| {
            let row: Vec<f64> = train.row(j).iter().copied().collect();
            self.kernels[v].eval(zs, &row)
        })
    }
}

/// Feature-space squared residual of training example `i` in view `v` at latent point `x`,
/// clamped at zero.
pub fn kernel_residual_sq(i: usize, v: usize, x: &DVector<f64>, km: &KernelModel) -> Result<f64> {
    if v >= km.n_views() || i >= km.n_train() {
        return Err(Error::IndexOutOfRange(format!(
            "example {i} / view {v} for {} examples and {} views",
            km.n_train(),
            km.n_views()
        )));
    }
    if x.len() != km.latent_dim() {
        return Err(Error::ShapeMismatch(format!(
            "latent point has {} entries, model uses {}",
            x.len(),
            km.latent_dim()
        )));
    }
    let k = &km.grams[v];
    let a = &km.atoms[v];
    let ax = a * x;
    let cross = k.row(i).dot(&ax.transpose());
    let quad = ax.dot(&(k * &ax));
    Ok((k[(i, i)] - 2.0 * cross + quad).max(0.0))
}

/// `trace(A_v^T K_v A_v)`, the squared feature-space Frobenius norm of the view map.
pub fn kernel_w_norm_sq(v: usize, km: &KernelModel) -> Result<f64> {
    if v >= km.n_views() {
        return Err(Error::IndexOutOfRange(format!("view {v}")));
    }
    let a = &km.atoms[v];
    Ok((a.transpose() * &km.grams[v] * a).trace().max(0.0))
}

/// Precomputed per-view pieces for a fixed set of atoms.
struct KernelPieces {
    /// `K_v A_v`, n×d.
    ka: Vec<DMatrix<f64>>,
    /// `A_v^T K_v A_v`, d×d.
    aka: Vec<DMatrix<f64>>,
}

impl KernelPieces {
    fn new(atoms: &[DMatrix<f64>], grams: &[DMatrix<f64>]) -> Self {
        let ka: Vec<DMatrix<f64>> = grams.iter().zip(atoms).map(|(k, a)| k * a).collect();
        let aka = atoms.iter().zip(&ka).map(|(a, ka)| a.tr_mul(ka)).collect();
        Self { ka, aka }
    }
}

fn expansion(self_k: f64, cross: &DVector<f64>, aka: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    (self_k - 2.0 * cross.dot(x) + x.dot(&(aka * x))).max(0.0)
}

struct KernelBlock<'a> {
    aka: &'a [DMatrix<f64>],
    cross: Vec<DVector<f64>>,
    self_k: Vec<f64>,
}

impl XBlock for KernelBlock<'_> {
    fn n_views(&self) -> usize {
        self.aka.len()
    }

    fn residual_sq(&self, v: usize, x: &DVector<f64>) -> f64 {
        expansion(self.self_k[v], &self.cross[v], &self.aka[v], x)
    }

    fn gram(&self, v: usize) -> &DMatrix<f64> {
        &self.aka[v]
    }

    fn cross(&self, v: usize) -> &DVector<f64> {
        &self.cross[v]
    }
}

fn training_block<'a>(pieces: &'a KernelPieces, grams: &[DMatrix<f64>], i: usize) -> KernelBlock<'a> {
    KernelBlock {
        aka: &pieces.aka,
        cross: pieces.ka.iter().map(|ka| ka.row(i).transpose()).collect(),
        self_k: grams.iter().map(|k| k[(i, i)]).collect(),
    }
}

fn view_residuals(k: &DMatrix<f64>, a: &DMatrix<f64>, x: &DMatrix<f64>) -> Vec<f64> {
    let ka = k * a;
    let aka = a.tr_mul(&ka);
    (0..x.nrows())
        .map(|i| {
            let xi = x.row(i).transpose();
            expansion(k[(i, i)], &ka.row(i).transpose(), &aka, &xi)
        })
        .collect()
}

fn view_objective(k: &DMatrix<f64>, a: &DMatrix<f64>, x: &DMatrix<f64>, loss: BlockLoss, w_penalty: f64) -> f64 {
    let n = x.nrows() as f64;
    let data: f64 = view_residuals(k, a, x).into_iter().map(|s| loss.value(s)).sum();
    let norm = (a.transpose() * k * a).trace().max(0.0);
    data / n + w_penalty * norm
}

/// `A = diag(Q) X (X^T diag(Q) X + n C1)^-1`, the atom-space form of the W-update.
fn update_atoms(
    k: &DMatrix<f64>,
    a: &DMatrix<f64>,
    x: &DMatrix<f64>,
    loss: BlockLoss,
    w_penalty: f64,
) -> Result<DMatrix<f64>> {
    let q: Vec<f64> = view_residuals(k, a, x)
        .into_iter()
        .map(|s| loss.weight(s))
        .collect();
    let s = weighted_second_moment(x, &q, w_penalty);
    let mut qx = x.clone();
    for (i, mut row) in qx.row_iter_mut().enumerate() {
        row *= q[i];
    }
    Ok(solve_spd(&s, &qx.transpose(), "atom update")?.transpose())
}

fn solve_atoms(
    k: &DMatrix<f64>,
    a0: &DMatrix<f64>,
    x: &DMatrix<f64>,
    loss: BlockLoss,
    hp: &Hyperparams,
) -> Result<SubproblemResult<DMatrix<f64>>> {
    let (a, iterations, trace) = run_irr(
        a0.clone(),
        hp.max_inner,
        hp.tol_x,
        |a| update_atoms(k, a, x, loss, hp.w_penalty),
        |a| view_objective(k, a, x, loss, hp.w_penalty),
        |p, q| (p - q).norm(),
    )?;
    let final_residuals = view_residuals(k, &a, x);
    Ok(SubproblemResult {
        solution: a,
        iterations,
        final_residuals,
        objective_before: trace[0],
        objective_after: *trace.last().unwrap(),
        trace,
    })
}

struct KernelAlternation<'a> {
    grams: &'a [DMatrix<f64>],
    atoms: Vec<DMatrix<f64>>,
    loss: BlockLoss,
    hp: Hyperparams,
}

impl Alternation for KernelAlternation<'_> {
    fn objective(&self, x: &DMatrix<f64>) -> f64 {
        let m = self.grams.len() as f64;
        let n = x.nrows() as f64;
        let mut data = 0.0;
        let mut norm = 0.0;
        for (k, a) in self.grams.iter().zip(&self.atoms) {
            data += view_residuals(k, a, x)
                .into_iter()
                .map(|s| self.loss.value(s))
                .sum::<f64>();
            norm += (a.transpose() * k * a).trace().max(0.0);
        }
        data / (m * n) + self.hp.w_penalty / m * norm + self.hp.x_penalty / n * x.norm_squared()
    }

    fn x_sweep(&self, x: &DMatrix<f64>, hp: &Hyperparams) -> Result<(DMatrix<f64>, usize)> {
        let pieces = KernelPieces::new(&self.atoms, self.grams);
        let rows: Vec<SubproblemResult<DVector<f64>>> = (0..x.nrows())
            .into_par_iter()
            .map(|i| {
                let blk = training_block(&pieces, self.grams, i);
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
            .grams
            .par_iter()
            .zip(self.atoms.par_iter())
            .map(|(k, a)| solve_atoms(k, a, x, self.loss, hp))
            .collect::<Result<_>>()?;
        let mut change = 0.0;
        let mut inner = 0;
        for (a, r) in self.atoms.iter_mut().zip(solved) {
            change += (&r.solution - &*a).norm_squared();
            inner = inner.max(r.iterations);
            *a = r.solution;
        }
        Ok((change.sqrt(), inner))
    }
}

/// Kernel fit with one kernel per view.
pub fn kernel_fit_per_view(
    dataset: &MultiViewDataset,
    hp: &Hyperparams,
    kernels: Vec<KernelSpec>,
) -> Result<(IntactModel, IntactEmbedding, FitHistory)> {
    hp.validate()?;
    if kernels.len() != dataset.n_views() {
        return Err(Error::ShapeMismatch(format!(
            "{} kernels for {} views",
            kernels.len(),
            dataset.n_views()
        )));
    }
    for k in &kernels {
        k.validate()?;
    }
    let n = dataset.n_examples();
    let x0 = initial_embedding(dataset, hp.latent_dim, hp.seed);
    // ridge start in atom coordinates; for the linear kernel Z^T A equals the linear ridge start
    let s = weighted_second_moment(&x0, &vec![1.0; n], hp.w_penalty);
    let a0 = match solve_spd(&s, &x0.transpose(), "initial atoms") {
        Ok(at) => at.transpose(),
        Err(_) => crate::synth::gaussian_matrix(n, hp.latent_dim, hp.seed, 1)
            / (hp.latent_dim as f64).sqrt(),
    };
    let template = KernelModel::new(
        vec![a0; dataset.n_views()],
        dataset.views().to_vec(),
        kernels,
    )?;
    let mut state = KernelAlternation {
        grams: &template.grams,
        atoms: template.atoms.clone(),
        loss: BlockLoss::Cauchy { scale: hp.scale },
        hp: *hp,
    };
    let (x, history) = alternate(&mut state, x0, hp)?;
    let atoms = state.atoms;
    let km = KernelModel { atoms, ..template };
    let model = IntactModel {
        params: ModelParams::Kernel(km),
        hyperparams: *hp,
    };
    Ok((model, IntactEmbedding::new(x)?, history))
}

/// Kernel fit with the same kernel on every view.
pub fn kernel_fit(
    dataset: &MultiViewDataset,
    hp: &Hyperparams,
    kernel: KernelSpec,
) -> Result<(IntactModel, IntactEmbedding, FitHistory)> {
    kernel_fit_per_view(dataset, hp, vec![kernel; dataset.n_views()])
}

/// Embeds a new multi-view example with a trained kernel model, starting from zero.
pub fn kernel_embed(z_new: &[DVector<f64>], model: &IntactModel) -> Result<DVector<f64>> {
    Ok(kernel_embed_from(z_new, model, &DVector::zeros(model.latent_dim()))?.solution)
}

pub(crate) fn kernel_embed_from(
    z_new: &[DVector<f64>],
    model: &IntactModel,
    x0: &DVector<f64>,
) -> Result<SubproblemResult<DVector<f64>>> {
    let blk = kernel_example_block(model.kernel()?, z_new)?;
    let hp = &model.hyperparams;
    block_solve(
        &blk,
        BlockLoss::Cauchy { scale: hp.scale },
        hp.x_penalty,
        x0,
        hp.max_inner,
        hp.tol_x,
    )
}

/// Quadratic pieces of the feature-space x-subproblem for a new example.
pub(crate) fn kernel_example_block(km: &KernelModel, z_new: &[DVector<f64>]) -> Result<QuadBlock> {
    if z_new.len() != km.n_views() {
        return Err(Error::ShapeMismatch(format!(
            "{} view vectors for a {}-view model",
            z_new.len(),
            km.n_views()
        )));
    }
    for (v, (z, train)) in z_new.iter().zip(&km.training_views).enumerate() {
        if z.len() != train.ncols() {
            return Err(Error::DimensionMismatch {
                view: v,
                expected: train.ncols(),
                found: z.len(),
            });
        }
        if z.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFiniteInput {
                context: format!("view {v} of new example"),
                row: 0,
                col: z.iter().position(|a| !a.is_finite()).unwrap_or(0),
            });
        }
    }
    let pieces = KernelPieces::new(&km.atoms, &km.grams);
    Ok(QuadBlock {
        grams: pieces.aka,
        cross: z_new
            .iter()
            .enumerate()
            .map(|(v, z)| km.atoms[v].tr_mul(&km.cross_kernel(v, z)))
            .collect(),
        self_sq: z_new
            .iter()
            .enumerate()
            .map(|(v, z)| km.kernels[v].eval(z.as_slice(), z.as_slice()))
            .collect(),
    })
}

/// Full kernel objective of a trained model on its own training data.
pub fn kernel_objective(model: &IntactModel, embedding: &IntactEmbedding) -> Result<f64> {
    let km = model.kernel()?;
    if embedding.n_examples() != km.n_train() || embedding.latent_dim() != km.latent_dim() {
        return Err(Error::ShapeMismatch("embedding does not match kernel model".into()));
    }
    let state = KernelAlternation {
        grams: &km.grams,
        atoms: km.atoms.clone(),
        loss: BlockLoss::Cauchy {
            scale: model.hyperparams.scale,
        },
        hp: model.hyperparams,
    };
    Ok(state.objective(embedding.matrix()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gram_examples() {
        let eye = DMatrix::<f64>::identity(2, 2);
        assert_eq!(gram(&eye, &KernelSpec::Linear).unwrap(), eye);

        let pts = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 5.0, -2.0]);
        let k = gram(&pts, &KernelSpec::Rbf { gamma: 1.0 }).unwrap();
        for i in 0..3 {
            assert_eq!(k[(i, i)], 1.0);
        }
        assert_abs_diff_eq!(k[(0, 1)], (-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(k[(0, 1)], 0.367879, epsilon = 1e-6);
        assert_eq!(k, k.transpose());

        let bad = DMatrix::from_row_slice(1, 1, &[f64::INFINITY]);
        assert!(matches!(
            gram(&bad, &KernelSpec::Linear),
            Err(Error::NonFiniteInput { .. })
        ));
        assert!(gram(&pts, &KernelSpec::Rbf { gamma: 0.0 }).is_err());
    }

    #[test]
    fn indefinite_gram_rejected() {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            regularize_gram(k, 3),
            Err(Error::GramNotPsd { view: 3, .. })
        ));
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 1.0 + 1e-7, 1.0 + 1e-7, 1.0]);
        let fixed = regularize_gram(k, 0).unwrap();
        assert!(linalg::min_eigenvalue(&fixed) >= -1e-12);
    }

    #[test]
    fn median_heuristic() {
        let pts = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 3.0]);
        // squared distances 1, 4, 9 -> median 4
        assert_eq!(KernelSpec::rbf_median(&pts), KernelSpec::Rbf { gamma: 0.25 });
    }

    fn small_model(kernel: KernelSpec, atoms: DMatrix<f64>, z: DMatrix<f64>) -> KernelModel {
        KernelModel::new(vec![atoms], vec![z], vec![kernel]).unwrap()
    }

    #[test]
    fn residual_at_zero_and_zero_atoms() {
        let z = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -1.0, 0.5, 0.0, 3.0]);
        let rbf = small_model(KernelSpec::Rbf { gamma: 0.3 }, DMatrix::from_element(3, 2, 0.1), z.clone());
        let r = kernel_residual_sq(1, 0, &DVector::zeros(2), &rbf).unwrap();
        assert_abs_diff_eq!(r, 1.0, epsilon = 1e-15);

        let lin = small_model(KernelSpec::Linear, DMatrix::zeros(3, 2), z.clone());
        let x = DVector::from_vec(vec![0.7, -1.2]);
        for i in 0..3 {
            let r = kernel_residual_sq(i, 0, &x, &lin).unwrap();
            assert_abs_diff_eq!(r, z.row(i).norm_squared(), epsilon = 1e-12);
        }
        assert!(matches!(
            kernel_residual_sq(3, 0, &x, &lin),
            Err(Error::IndexOutOfRange(_))
        ));
        assert!(kernel_residual_sq(0, 1, &x, &lin).is_err());
    }

    #[test]
    fn w_norm_zero_and_quadratic() {
        let z = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -1.0, 0.5, 0.0, 3.0]);
        let zero = small_model(KernelSpec::Rbf { gamma: 0.5 }, DMatrix::zeros(3, 2), z.clone());
        assert_eq!(kernel_w_norm_sq(0, &zero).unwrap(), 0.0);
        let a = DMatrix::from_row_slice(3, 2, &[0.3, -0.1, 0.2, 0.4, -0.5, 0.1]);
        let one = small_model(KernelSpec::Rbf { gamma: 0.5 }, a.clone(), z.clone());
        let two = small_model(KernelSpec::Rbf { gamma: 0.5 }, a * 2.0, z);
        assert_abs_diff_eq!(
            kernel_w_norm_sq(0, &two).unwrap(),
            4.0 * kernel_w_norm_sq(0, &one).unwrap(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn single_example_interpolates() {
        let z = DMatrix::from_row_slice(1, 2, &[0.4, -1.0]);
        let ds = MultiViewDataset::new(vec![z], None).unwrap();
        let hp = Hyperparams {
            latent_dim: 1,
            w_penalty: 0.0,
            x_penalty: 0.0,
            ..Default::default()
        };
        let (model, emb, hist) = kernel_fit(&ds, &hp, KernelSpec::Rbf { gamma: 1.0 }).unwrap();
        let r = kernel_residual_sq(0, 0, &emb.point(0), model.kernel().unwrap()).unwrap();
        assert!(r < 1e-10, "residual {r}");
        assert!(hist.final_objective() < 1e-10);
    }
}
