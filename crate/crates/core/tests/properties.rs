//! Invariants of the fit, the synthetic generators, the kernel machinery and
//! the evaluation harness.

use intact::eval::{align_to_truth, knn_predict};
use intact::kernel::{gram, kernel_residual_sq, kernel_w_norm_sq};
use intact::synth::{
    add_window_noise_detailed, gaussian_matrix, gen_s_curve, planted_linear, project_to_planes,
    window_variance, NoiseSpec,
};
use intact::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn planted_dataset(seed: u64) -> MultiViewDataset {
    let p = planted_linear(60, &[4, 5, 3], 2, seed);
    let ds = MultiViewDataset::new(p.views, None).unwrap();
    standardize_views(&ds).0
}

#[test]
fn fit_is_invariant_to_view_order() {
    let ds = planted_dataset(2);
    let hp = Hyperparams { latent_dim: 2, max_outer: 40, ..Default::default() };
    let (m1, e1, h1) = fit(&ds, &hp, None).unwrap();
    let perm = [2, 0, 1];
    let permuted = MultiViewDataset::new(perm.iter().map(|&v| ds.view(v).clone()).collect(), None).unwrap();
    let (m2, e2, h2) = fit(&permuted, &hp, None).unwrap();
    for (a, b) in h1.objectives().iter().zip(h2.objectives()) {
        assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }
    assert!((e1.matrix() - e2.matrix()).norm() < 1e-6 * e1.matrix().norm());
    for (k, &v) in perm.iter().enumerate() {
        let (a, b) = (&m1.weights().unwrap()[v], &m2.weights().unwrap()[k]);
        assert!((a - b).norm() < 1e-6 * a.norm());
    }
}

#[test]
fn fit_is_identical_across_thread_counts() {
    let ds = planted_dataset(3);
    let hp = Hyperparams { latent_dim: 2, max_outer: 30, ..Default::default() };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| fit(&ds, &hp, None).unwrap())
    };
    let (m1, e1, h1) = run(1);
    let (m4, e4, h4) = run(4);
    assert_eq!(e1.matrix(), e4.matrix());
    assert_eq!(m1.weights().unwrap(), m4.weights().unwrap());
    assert_eq!(h1, h4);
}

#[test]
fn fit_is_seed_deterministic() {
    let ds = planted_dataset(4);
    let hp = Hyperparams { latent_dim: 2, max_outer: 20, seed: 9, ..Default::default() };
    let a = fit(&ds, &hp, None).unwrap();
    let b = fit(&ds, &hp, None).unwrap();
    assert_eq!(a.1.matrix(), b.1.matrix());
}

#[test]
fn s_curve_points_lie_on_the_manifold() {
    let pts = gen_s_curve(1000, 3);
    for i in 0..pts.nrows() {
        let (x, y, z) = (pts[(i, 0)], pts[(i, 1)], pts[(i, 2)]);
        assert!((0.0..=2.0).contains(&y));
        assert!(x.abs() <= 1.0);
        // (sin t, sign(t)(cos t - 1)) lies on the unit circle centred at (0, -sign(t))
        let centre = if z <= 0.0 { -1.0 } else { 1.0 };
        let on_circle = (x * x + (z - centre).powi(2) - 1.0).abs() < 1e-12;
        let at_origin = x.abs() < 1e-12 && z.abs() < 1e-12;
        assert!(on_circle || at_origin, "point {i} off the S-curve");
    }
    let views = project_to_planes(&pts).unwrap();
    assert_eq!(views.len(), 3);
    assert_eq!(views[0].column(0), pts.column(0));
    assert_eq!(views[2].column(1), pts.column(2));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// The noise actually injected realizes the requested SNR within 1 dB and
    /// leaves rows outside the window untouched.
    #[test]
    fn window_noise_hits_target_snr(seed in 0u64..1000, snr in 0.0f64..30.0, frac in 0.3f64..1.0) {
        let view = project_to_planes(&gen_s_curve(600, seed)).unwrap().remove(0);
        let spec = NoiseSpec { snr_db: snr, window_fraction: frac, copies_per_base: 1, seed };
        let noisy = add_window_noise_detailed(&view, &spec).unwrap();
        let signal = window_variance(&view, &noisy.window);
        let diff = &noisy.data - &view;
        let added: f64 = noisy.window.iter().flat_map(|&i| diff.row(i).iter().map(|e| e * e).collect::<Vec<_>>()).sum::<f64>()
            / (noisy.window.len() * view.ncols()) as f64;
        let measured = 10.0 * (signal / added).log10();
        prop_assert!((measured - snr).abs() < 1.0, "measured {} dB for target {}", measured, snr);
        let inside: std::collections::HashSet<usize> = noisy.window.iter().copied().collect();
        for i in (0..view.nrows()).filter(|i| !inside.contains(i)) {
            prop_assert_eq!(diff.row(i).norm(), 0.0);
        }
    }

    /// Linear-kernel quantities equal their explicit-feature counterparts with
    /// W = Z^T A.
    #[test]
    fn linear_kernel_matches_explicit_features(seed in 0u64..1000, n in 3usize..15, dv in 1usize..5) {
        let z = gaussian_matrix(n, dv, seed, 0);
        let a = gaussian_matrix(n, 2, seed, 1);
        let km = KernelModel::new(vec![a.clone()], vec![z.clone()], vec![KernelSpec::Linear]).unwrap();
        let w = z.transpose() * &a;
        let x = gaussian_matrix(2, 1, seed, 2).column(0).into_owned();
        for i in 0..n {
            let explicit = (z.row(i).transpose() - &w * &x).norm_squared();
            let got = kernel_residual_sq(i, 0, &x, &km).unwrap();
            prop_assert!((got - explicit).abs() <= 1e-9 * explicit.max(1.0));
        }
        let wn = kernel_w_norm_sq(0, &km).unwrap();
        prop_assert!((wn - w.norm_squared()).abs() <= 1e-9 * wn.max(1.0));
    }

    /// RBF Gram matrices are symmetric with unit diagonal, entries in (0, 1]
    /// and no eigenvalue meaningfully below zero.
    #[test]
    fn rbf_gram_is_symmetric_psd(seed in 0u64..1000, n in 2usize..30, gamma in 0.01f64..5.0) {
        let z = gaussian_matrix(n, 3, seed, 0);
        let k = gram(&z, &KernelSpec::Rbf { gamma }).unwrap();
        for i in 0..n {
            prop_assert!((k[(i, i)] - 1.0).abs() < 1e-15);
            for j in 0..n {
                prop_assert_eq!(k[(i, j)], k[(j, i)]);
                prop_assert!(k[(i, j)] > 0.0 && k[(i, j)] <= 1.0);
            }
        }
        let min_eig = k.symmetric_eigenvalues().min();
        prop_assert!(min_eig > -1e-10);
    }

    /// Reordering the training set does not change kNN predictions.
    #[test]
    fn knn_is_invariant_to_training_order(seed in 0u64..1000, n in 5usize..40, k in 1usize..5) {
        let train = gaussian_matrix(n, 3, seed, 0);
        let labels: Vec<u32> = (0..n).map(|i| ((i * 7 + seed as usize) % 3) as u32).collect();
        let test = gaussian_matrix(10, 3, seed, 1);
        let base = knn_predict(&train, &labels, &test, k).unwrap();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let shuffled = train.select_rows(&perm);
        let shuffled_labels: Vec<u32> = perm.iter().map(|&i| labels[i]).collect();
        prop_assert_eq!(base, knn_predict(&shuffled, &shuffled_labels, &test, k).unwrap());
    }

    /// The alignment score ignores invertible affine re-parameterizations of the estimate.
    #[test]
    fn alignment_is_affine_invariant(seed in 0u64..1000) {
        let truth = gaussian_matrix(50, 3, seed, 0);
        let est = &truth * gaussian_matrix(3, 3, seed, 1) + gaussian_matrix(50, 3, seed, 2) * 0.3;
        let base = align_to_truth(&est, &truth).unwrap().relative_residual;
        let map = gaussian_matrix(3, 3, seed, 3) + DMatrix::identity(3, 3) * 3.0;
        let shift = DVector::from_vec(vec![1.0, -2.0, 5.0]);
        let mut moved = &est * map;
        for mut row in moved.row_iter_mut() {
            row += shift.transpose();
        }
        let again = align_to_truth(&moved, &truth).unwrap().relative_residual;
        prop_assert!((base - again).abs() < 1e-9);
        let exact = align_to_truth(&(&truth * 2.0), &truth).unwrap().relative_residual;
        prop_assert!(exact < 1e-12);
    }
}
