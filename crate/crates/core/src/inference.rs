//! Out-of-sample embedding and multi-view stability diagnostics.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::irr::{block_hessian, solve_x, QuadBlock, SubproblemResult};
use crate::kernel::{kernel_embed_from, kernel_example_block};
use crate::linalg;
use crate::model::{IntactModel, ModelParams};
use crate::synth::rng_for;

/// Embeds a new multi-view example by minimizing
/// `1/m sum_v log(1 + ||z^v - W_v x||^2 / c^2) + C2 ||x||^2` from a zero start.
///
/// Works for both linear and kernel models; the kernel objective measures
/// residuals in feature space.
pub fn embed_example(z_new: &[DVector<f64>], model: &IntactModel) -> Result<DVector<f64>> {
    Ok(embed_from(z_new, model, &DVector::zeros(model.latent_dim()))?.solution)
}

/// Embeds a new example starting from `x0`.
pub fn embed_from(
    z_new: &[DVector<f64>],
    model: &IntactModel,
    x0: &DVector<f64>,
) -> Result<SubproblemResult<DVector<f64>>> {
    match &model.params {
        ModelParams::Linear(_) => solve_x(z_new, model, x0),
        ModelParams::Kernel(_) => kernel_embed_from(z_new, model, x0),
    }
}

/// Embeds every row of a set of view matrices.
pub fn embed_views(views: &[DMatrix<f64>], model: &IntactModel) -> Result<DMatrix<f64>> {
    if views.len() != model.n_views() {
        return Err(Error::ShapeMismatch(format!(
            "{} views for a {}-view model",
            views.len(),
            model.n_views()
        )));
    }
    let dims = model.view_dims();
    for (v, z) in views.iter().enumerate() {
        if z.ncols() != dims[v] {
            return Err(Error::DimensionMismatch {
                view: v,
                expected: dims[v],
                found: z.ncols(),
            });
        }
    }
    let n = views.first().map_or(0, |z| z.nrows());
    if n == 0 {
        return Err(Error::EmptyView("no rows to embed".into()));
    }
    if let Some(v) = views.iter().position(|z| z.nrows() != n) {
        return Err(Error::ShapeMismatch(format!(
            "view {v} has {} rows, view 0 has {n}",
            views[v].nrows()
        )));
    }
    let rows: Vec<DVector<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let z: Vec<DVector<f64>> = views.iter().map(|m| m.row(i).transpose()).collect();
            embed_example(&z, model)
        })
        .collect::<Result<_>>()?;
    let d = model.latent_dim();
    Ok(DMatrix::from_fn(n, d, |i, k| rows[i][k]))
}

/// Spectral norm of each view map (`sqrt(lambda_max(A^T K A))` in kernel mode).
pub fn view_map_norms(model: &IntactModel) -> Vec<f64> {
    match &model.params {
        ModelParams::Linear(ws) => ws.iter().map(linalg::spectral_norm).collect(),
        ModelParams::Kernel(km) => km
            .atoms()
            .iter()
            .zip(km.grams())
            .map(|(a, k)| {
                let aka = a.tr_mul(&(k * a));
                let sym = (&aka + aka.transpose()) * 0.5;
                linalg::sorted_eigen(&sym).0[0].max(0.0).sqrt()
            })
            .collect(),
    }
}

/// Multi-view stability bound
/// `beta = sqrt(2)/c |tau| + sum_v 128^(1/4) Omega_v / c * sqrt(|tau| / (m c C2))`
/// with `Omega_v` the spectral norm of view map v.
pub fn stability_bound(tau: f64, model: &IntactModel) -> Result<f64> {
    let hp = &model.hyperparams;
    if hp.x_penalty <= 0.0 {
        return Err(Error::ZeroRegularizer);
    }
    let c = hp.scale;
    let m = model.n_views() as f64;
    let t = tau.abs();
    let root = (t / (m * c * hp.x_penalty)).sqrt();
    let spread: f64 = view_map_norms(model)
        .into_iter()
        .map(|omega| 128f64.powf(0.25) * omega / c * root)
        .sum();
    Ok(2f64.sqrt() / c * t + spread)
}

/// Outcome of one single-coordinate perturbation probe.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub tau: f64,
    pub view_index: usize,
    pub coord_index: usize,
    /// `sum_v |f_v(z, x) - f_v(z_hat, x_hat)|` with the per-view Cauchy loss `f_v`.
    pub measured_deviation: f64,
    pub beta_bound: f64,
    pub holds: bool,
    /// Whether the per-example objective was convex at every sampled point
    /// around the two embeddings (the bound's standing assumption).
    pub locally_convex: bool,
}

impl StabilityReport {
    /// A violation that cannot be blamed on a failed convexity assumption.
    pub fn unexplained_violation(&self) -> bool {
        !self.holds && self.locally_convex
    }
}

fn quad_block(z: &[DVector<f64>], model: &IntactModel) -> Result<QuadBlock> {
    match &model.params {
        ModelParams::Linear(ws) => Ok(QuadBlock {
            grams: ws.iter().map(|w| w.tr_mul(w)).collect(),
            cross: ws.iter().zip(z).map(|(w, zv)| w.tr_mul(zv)).collect(),
            self_sq: z.iter().map(|zv| zv.norm_squared()).collect(),
        }),
        ModelParams::Kernel(km) => kernel_example_block(km, z),
    }
}

/// Per-view losses `f_v = log(1 + ||z^v - W_v x||^2 / c^2)`.
pub fn view_losses(z: &[DVector<f64>], model: &IntactModel, x: &DVector<f64>) -> Result<Vec<f64>> {
    let c2 = model.hyperparams.scale.powi(2);
    match &model.params {
        ModelParams::Linear(ws) => {
            if z.len() != ws.len() {
                return Err(Error::ShapeMismatch(format!(
                    "{} view vectors for a {}-view model",
                    z.len(),
                    ws.len()
                )));
            }
            ws.iter()
                .zip(z)
                .enumerate()
                .map(|(v, (w, zv))| {
                    if zv.len() != w.nrows() {
                        return Err(Error::DimensionMismatch {
                            view: v,
                            expected: w.nrows(),
                            found: zv.len(),
                        });
                    }
                    Ok(((zv - w * x).norm_squared() / c2).ln_1p())
                })
                .collect()
        }
        ModelParams::Kernel(km) => {
            use crate::irr::XBlock;
            let blk = kernel_example_block(km, z)?;
            Ok((0..blk.n_views())
                .map(|v| (blk.residual_sq(v, x) / c2).ln_1p())
                .collect())
        }
    }
}

const CONVEXITY_SAMPLES: usize = 8;

/// Checks positive semi-definiteness of the Hessian of the perturbed
/// per-example objective along the segment `x -> x_hat` and at seeded points
/// in the ball around `x` that contains `x_hat`.
fn locally_convex(
    blk: &QuadBlock,
    model: &IntactModel,
    x: &DVector<f64>,
    x_hat: &DVector<f64>,
    seed: u64,
) -> bool {
    let hp = &model.hyperparams;
    let radius = (x_hat - x).norm().max(1e-6);
    let mut points: Vec<DVector<f64>> = (0..=4).map(|k| x + (x_hat - x) * (k as f64 / 4.0)).collect();
    let mut rng = rng_for(seed, 0);
    for _ in 0..CONVEXITY_SAMPLES {
        let dir = DVector::<f64>::from_fn(x.len(), |_, _| rng.sample(StandardNormal));
        let r = radius * rng.random::<f64>();
        let norm = dir.norm();
        if norm > 0.0 {
            points.push(x + dir * (r / norm));
        }
    }
    points.iter().all(|p| {
        let h = block_hessian(blk, hp.scale, hp.x_penalty, p);
        let sym = (&h + h.transpose()) * 0.5;
        let scale = sym.diagonal().abs().max().max(1e-300);
        linalg::min_eigenvalue(&sym) >= -1e-10 * scale
    })
}

/// Perturbs coordinate `coord_index` of view `view_index` by `tau`, re-embeds
/// starting from the unperturbed solution, and compares the change in
/// per-view losses with [`stability_bound`].
pub fn stability_probe(
    z: &[DVector<f64>],
    model: &IntactModel,
    tau: f64,
    view_index: usize,
    coord_index: usize,
) -> Result<StabilityReport> {
    let beta_bound = stability_bound(tau, model)?;
    if view_index >= z.len() || coord_index >= z[view_index].len() {
        return Err(Error::IndexOutOfRange(format!(
            "view {view_index}, coordinate {coord_index}"
        )));
    }
    let x = embed_example(z, model)?;
    let mut z_hat = z.to_vec();
    z_hat[view_index][coord_index] += tau;
    let x_hat = embed_from(&z_hat, model, &x)?.solution;

    let f = view_losses(z, model, &x)?;
    let f_hat = view_losses(&z_hat, model, &x_hat)?;
    let measured_deviation: f64 = f.iter().zip(&f_hat).map(|(a, b)| (a - b).abs()).sum();

    let blk = quad_block(&z_hat, model)?;
    let seed = model.hyperparams.seed ^ ((view_index as u64) << 32 | coord_index as u64);
    let locally_convex = locally_convex(&blk, model, &x, &x_hat, seed);
    let holds = measured_deviation <= beta_bound + 1e-12;
    if !holds {
        log::warn!(
            "stability bound violated: tau {tau}, view {view_index}, coord {coord_index}, \
             deviation {measured_deviation:.6e} > beta {beta_bound:.6e} (locally convex: {locally_convex})"
        );
    }
    Ok(StabilityReport {
        tau,
        view_index,
        coord_index,
        measured_deviation,
        beta_bound,
        holds,
        locally_convex,
    })
}

/// One probe of a seeded grid: which example was perturbed, and the outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRecord {
    pub example_index: usize,
    pub report: StabilityReport,
}

/// Runs `n_probes` seeded probes per `tau`, each on a random training
/// example, view and coordinate. Probes are independent and run in parallel.
pub fn probe_grid(
    views: &[DMatrix<f64>],
    model: &IntactModel,
    taus: &[f64],
    n_probes: usize,
    seed: u64,
) -> Result<Vec<ProbeRecord>> {
    stability_bound(1.0, model)?;
    let n = views.first().map_or(0, |z| z.nrows());
    if n == 0 {
        return Err(Error::EmptyView("no examples to probe".into()));
    }
    let mut rng = rng_for(seed, 7);
    let mut jobs = Vec::with_capacity(taus.len() * n_probes);
    for &tau in taus {
        for _ in 0..n_probes {
            let i = rng.random_range(0..n);
            let v = rng.random_range(0..views.len());
            let j = rng.random_range(0..views[v].ncols());
            jobs.push((tau, i, v, j));
        }
    }
    jobs.into_par_iter()
        .map(|(tau, i, v, j)| {
            let z: Vec<DVector<f64>> = views.iter().map(|m| m.row(i).transpose()).collect();
            Ok(ProbeRecord {
                example_index: i,
                report: stability_probe(&z, model, tau, v, j)?,
            })
        })
        .collect()
}
