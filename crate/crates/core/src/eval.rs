//! Evaluation: reconstruction error, latent-space alignment, k-NN
//! classification and the contamination robustness benchmark.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimators::BlockLoss;
use crate::irr::{fit_with_loss, objective_with_loss};
use crate::kernel::kernel_residual_sq;
use crate::model::{
    standardize_views, Hyperparams, IntactEmbedding, IntactModel, ModelParams, MultiViewDataset,
};
use crate::synth::contaminate_entries;

/// Mean Cauchy reconstruction loss `1/(mn) sum_v sum_i log(1 + ||z_i^v - W_v x_i||^2 / c^2)`,
/// i.e. the training objective without its regularizers.
///
/// In kernel mode the model's retained training views are used and `dataset`
/// only supplies the expected shape.
pub fn reconstruction_error(
    dataset: &MultiViewDataset,
    model: &IntactModel,
    embedding: &IntactEmbedding,
) -> Result<f64> {
    let loss = BlockLoss::Cauchy {
        scale: model.hyperparams.scale,
    };
    match &model.params {
        ModelParams::Linear(ws) => {
            let hp = Hyperparams {
                w_penalty: 0.0,
                x_penalty: 0.0,
                ..model.hyperparams
            };
            objective_with_loss(dataset, ws, embedding.matrix(), loss, &hp)
        }
        ModelParams::Kernel(km) => {
            if embedding.n_examples() != km.n_train() || dataset.n_examples() != km.n_train() {
                return Err(Error::ShapeMismatch(
                    "kernel reconstruction error is defined on the training set".into(),
                ));
            }
            let mut total = 0.0;
            for v in 0..km.n_views() {
                for i in 0..km.n_train() {
                    total += loss.value(kernel_residual_sq(i, v, &embedding.point(i), km)?);
                }
            }
            Ok(total / (km.n_views() * km.n_train()) as f64)
        }
    }
}

/// Quality of an estimated latent space up to an affine map.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentScore {
    /// `||T - 1 b^T - E A||_F / ||T - 1 b^T||_F` after centering, for the best `A`.
    pub relative_residual: f64,
    /// The fitted `d_est × d_true` map `A`.
    pub map: DMatrix<f64>,
    /// The fitted offset `b = mean(T) - mean(E) A`.
    pub offset: DVector<f64>,
}

fn centered(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let n = m.nrows() as f64;
    let mean = DVector::from_fn(m.ncols(), |j, _| m.column(j).sum() / n);
    let mut c = m.clone();
    for (j, mut col) in c.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    (c, mean)
}

/// Least-squares alignment of an estimated embedding to ground truth:
/// `min_{A,b} ||X_true - 1 b^T - X_est A||_F`, reported relative to the
/// centered truth.
///
/// Both matrices are centered first, so the score ignores translations as well
/// as invertible linear re-parameterizations of `X_est`.
pub fn align_to_truth(x_est: &DMatrix<f64>, x_true: &DMatrix<f64>) -> Result<AlignmentScore> {
    if x_est.nrows() != x_true.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "estimate has {} rows, truth has {}",
            x_est.nrows(),
            x_true.nrows()
        )));
    }
    if x_est.nrows() == 0 || x_est.ncols() == 0 || x_true.ncols() == 0 {
        return Err(Error::EmptyView("alignment input".into()));
    }
    let (e, e_mean) = centered(x_est);
    let (t, t_mean) = centered(x_true);
    let svd = e.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if x_est.nrows() < x_est.ncols() || !(smax > 0.0) || smin <= 1e-10 * smax {
        return Err(Error::RankDeficient);
    }
    let map = svd
        .solve(&t, 0.0)
        .map_err(|e| Error::SingularSystem(format!("alignment: {e}")))?;
    let truth_norm = t.norm();
    if truth_norm == 0.0 {
        return Err(Error::DegenerateSignal);
    }
    let relative_residual = (&t - &e * &map).norm() / truth_norm;
    let offset = t_mean - map.tr_mul(&e_mean);
    Ok(AlignmentScore {
        relative_residual,
        map,
        offset,
    })
}

/// Majority vote among the `k` Euclidean nearest training rows for each test row.
///
/// Neighbors at equal distance are ordered by label; vote ties go to the
/// label with the smallest summed neighbor distance, then the lowest label.
pub fn knn_predict(
    train_x: &DMatrix<f64>,
    train_labels: &[u32],
    test_x: &DMatrix<f64>,
    k: usize,
) -> Result<Vec<u32>> {
    let n = train_x.nrows();
    if n == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    if train_labels.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {n} training rows",
            train_labels.len()
        )));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "k must be in 1..={n}, got {k}"
        )));
    }
    if test_x.ncols() != train_x.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "test rows have {} columns, training rows {}",
            test_x.ncols(),
            train_x.ncols()
        )));
    }
    let predictions = test_x
        .row_iter()
        .map(|q| {
            let mut dist: Vec<(f64, u32)> = train_x
                .row_iter()
                .zip(train_labels)
                .map(|(r, &l)| ((r - q).norm(), l))
                .collect();
            dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut votes: BTreeMap<u32, (usize, f64)> = BTreeMap::new();
            for &(d, l) in &dist[..k] {
                let e = votes.entry(l).or_insert((0, 0.0));
                e.0 += 1;
                e.1 += d;
            }
            // BTreeMap iterates labels in increasing order, so strict comparisons keep the lowest label
            let mut best: Option<(u32, usize, f64)> = None;
            for (&l, &(count, sum)) in &votes {
                let better = match best {
                    None => true,
                    Some((_, bc, bs)) => count > bc || (count == bc && sum < bs),
                };
                if better {
                    best = Some((l, count, sum));
                }
            }
            best.map(|b| b.0).unwrap_or(0)
        })
        .collect();
    Ok(predictions)
}

/// Predictions and accuracy of [`knn_predict`] against known test labels.
pub fn knn_classify(
    train_x: &DMatrix<f64>,
    train_labels: &[u32],
    test_x: &DMatrix<f64>,
    test_labels: &[u32],
    k: usize,
) -> Result<(Vec<u32>, f64)> {
    if test_labels.len() != test_x.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {} test rows",
            test_labels.len(),
            test_x.nrows()
        )));
    }
    let pred = knn_predict(train_x, train_labels, test_x, k)?;
    let correct = pred.iter().zip(test_labels).filter(|(a, b)| a == b).count();
    let accuracy = if pred.is_empty() {
        0.0
    } else {
        correct as f64 / pred.len() as f64
    };
    Ok((pred, accuracy))
}

/// Cauchy versus squared-loss reconstruction error under contamination.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessReport {
    pub rate: f64,
    pub contaminated_entries: usize,
    /// Relative squared reconstruction error of the Cauchy fit against the clean views.
    pub cauchy_error: f64,
    /// Same for the alternating ridge least-squares baseline.
    pub l2_error: f64,
    /// `cauchy_error / l2_error`.
    pub ratio: f64,
}

/// The view that receives outliers in [`robustness_benchmark`].
pub const CONTAMINATED_VIEW: usize = 0;

/// `sum_v ||Z_clean^v - X W_v^T||_F^2 / sum_v ||Z_clean^v||_F^2`.
pub fn relative_reconstruction_error(
    clean_views: &[DMatrix<f64>],
    reconstructions: &[DMatrix<f64>],
) -> f64 {
    let num: f64 = clean_views
        .iter()
        .zip(reconstructions)
        .map(|(z, r)| (z - r).norm_squared())
        .sum();
    let den: f64 = clean_views.iter().map(|z| z.norm_squared()).sum();
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

/// Contaminates a seeded `rate` fraction of the entries of view
/// [`CONTAMINATED_VIEW`] with `±magnitude·rms(view)` outliers, standardizes
/// the contaminated views, fits both the Cauchy model and the squared-loss
/// baseline (same initialization, schedule and regularizers), and scores each
/// against the clean views in raw units.
pub fn robustness_benchmark(
    base: &MultiViewDataset,
    rate: f64,
    magnitude: f64,
    hp: &Hyperparams,
) -> Result<RobustnessReport> {
    robustness_benchmark_with(base, rate, magnitude, hp, true)
}

/// [`robustness_benchmark`] with per-view standardization switchable; when on,
/// reconstructions are mapped back to raw units before scoring.
pub fn robustness_benchmark_with(
    base: &MultiViewDataset,
    rate: f64,
    magnitude: f64,
    hp: &Hyperparams,
    standardize: bool,
) -> Result<RobustnessReport> {
    if !(0.0..0.5).contains(&rate) {
        return Err(Error::InvalidParameter(format!(
            "contamination rate must be in [0, 0.5), got {rate}"
        )));
    }
    if !(magnitude >= 0.0 && magnitude.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "magnitude must be finite and >= 0, got {magnitude}"
        )));
    }
    hp.validate()?;
    let target = base.view(CONTAMINATED_VIEW);
    let rms = (target.norm_squared() / target.len() as f64).sqrt();
    let (dirty, count) = contaminate_entries(target, rate, magnitude * rms, hp.seed, 101);
    let mut views = base.views().to_vec();
    views[CONTAMINATED_VIEW] = dirty;
    let contaminated = MultiViewDataset::new(views, None)?;

    let (train, record) = if standardize {
        let (ds, rec) = standardize_views(&contaminated);
        (ds, Some(rec))
    } else {
        (contaminated, None)
    };

    let score = |loss: BlockLoss| -> Result<f64> {
        let (model, emb, _) = fit_with_loss(&train, hp, loss, None)?;
        let x = emb.matrix();
        let recon: Vec<DMatrix<f64>> = model.weights()?.iter().map(|w| x * w.transpose()).collect();
        let recon = match &record {
            Some(rec) => rec.invert_views(&recon),
            None => recon,
        };
        Ok(relative_reconstruction_error(base.views(), &recon))
    };
    let cauchy_error = score(BlockLoss::Cauchy { scale: hp.scale })?;
    let l2_error = score(BlockLoss::Squared)?;
    let ratio = if l2_error > 0.0 {
        cauchy_error / l2_error
    } else if cauchy_error > 0.0 {
        f64::INFINITY
    } else {
        1.0
    };
    Ok(RobustnessReport {
        rate,
        contaminated_entries: count,
        cauchy_error,
        l2_error,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alignment_identity_and_transform() {
        let t = crate::synth::gaussian_matrix(30, 3, 5, 0);
        let s = align_to_truth(&t, &t).unwrap();
        assert!(s.relative_residual < 1e-12);
        assert!((s.map.clone() - DMatrix::identity(3, 3)).norm() < 1e-10);
        let r = DMatrix::from_row_slice(3, 3, &[2.0, 0.1, 0.0, -1.0, 1.0, 0.3, 0.0, 0.5, 3.0]);
        let s = align_to_truth(&(&t * r), &t).unwrap();
        assert!(s.relative_residual <= 1e-10);
        let flat = DMatrix::from_fn(30, 2, |i, j| if j == 0 { i as f64 } else { 2.0 * i as f64 });
        assert!(matches!(align_to_truth(&flat, &t.columns(0, 2).into_owned()), Err(Error::RankDeficient)));
    }

    #[test]
    fn knn_examples() {
        let train = DMatrix::from_row_slice(5, 1, &[0.0, 0.2, -0.1, 10.0, 10.3]);
        let labels = [0, 0, 0, 1, 1];
        let test = DMatrix::from_row_slice(1, 1, &[1.0]);
        assert_eq!(knn_predict(&train, &labels, &test, 3).unwrap(), vec![0]);
        let (_, acc) = knn_classify(&train, &labels, &train, &labels, 1).unwrap();
        assert_eq!(acc, 1.0);
        assert!(matches!(
            knn_predict(&DMatrix::zeros(0, 1), &[], &test, 1),
            Err(Error::EmptyTrainingSet)
        ));
    }

    #[test]
    fn knn_vote_tie_uses_summed_distance_then_label() {
        let train = DMatrix::from_row_slice(2, 1, &[-1.0, 2.0]);
        let test = DMatrix::from_row_slice(1, 1, &[0.0]);
        assert_eq!(knn_predict(&train, &[7, 3], &test, 2).unwrap(), vec![7]);
        let train = DMatrix::from_row_slice(2, 1, &[-1.0, 1.0]);
        assert_eq!(knn_predict(&train, &[7, 3], &test, 2).unwrap(), vec![3]);
    }

    #[test]
    fn rate_must_be_below_half() {
        let p = crate::synth::planted_linear(10, &[3, 3], 2, 0);
        let ds = MultiViewDataset::new(p.views, None).unwrap();
        let hp = Hyperparams {
            latent_dim: 2,
            ..Default::default()
        };
        assert!(robustness_benchmark(&ds, 0.6, 10.0, &hp).is_err());
        assert!(robustness_benchmark(&ds, 0.5, 10.0, &hp).is_err());
    }
}
