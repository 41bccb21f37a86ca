//! Synthetic benchmark data: the S-curve, axis-plane projections of 3-D
//! point clouds, and windowed noise at a target SNR.
//!
//! Every generator is a pure function of its parameters and seed. Each
//! derived view draws from its own ChaCha stream, so views can be generated
//! in any order (or in parallel) with identical results.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Standard normal entries, filled row by row.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64, stream: u64) -> DMatrix<f64> {
    let mut rng = rng_for(seed, stream);
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    DMatrix::from_row_slice(rows, cols, &data)
}

/// Samples `n` points of the S-curve: `t ~ U[-3pi/2, 3pi/2]`, `y ~ U[0, 2]`,
/// point `(sin t, y, sign(t) (cos t - 1))`.
pub fn gen_s_curve(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng_for(seed, 0);
    let mut out = DMatrix::zeros(n, 3);
    for i in 0..n {
        let t = 3.0 * PI * (rng.random::<f64>() - 0.5);
        let y = 2.0 * rng.random::<f64>();
        out[(i, 0)] = t.sin();
        out[(i, 1)] = y;
        out[(i, 2)] = t.signum() * (t.cos() - 1.0);
    }
    out
}

/// The X-Y, X-Z and Y-Z projections of an n×3 point cloud.
pub fn project_to_planes(points: &DMatrix<f64>) -> Result<Vec<DMatrix<f64>>> {
    if points.ncols() != 3 {
        return Err(Error::ShapeMismatch(format!(
            "expected 3 columns, found {}",
            points.ncols()
        )));
    }
    crate::model::check_finite(points, "point cloud")?;
    Ok([(0, 1), (0, 2), (1, 2)]
        .iter()
        .map(|&(a, b)| {
            DMatrix::from_fn(points.nrows(), 2, |i, j| points[(i, if j == 0 { a } else { b })])
        })
        .collect())
}

/// Noise injected into a random window of rows of each view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Signal-to-noise ratio in decibels of variance; `f64::INFINITY` disables noise.
    pub snr_db: f64,
    /// Fraction of rows covered by the window, in (0, 1].
    pub window_fraction: f64,
    pub copies_per_base: usize,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            snr_db: 20.0,
            window_fraction: 0.3,
            copies_per_base: 3,
            seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_fraction > 0.0 && self.window_fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "window_fraction must lie in (0, 1], got {}",
                self.window_fraction
            )));
        }
        if self.copies_per_base == 0 {
            return Err(Error::InvalidParameter("copies_per_base must be >= 1".into()));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::InvalidParameter(format!("invalid snr_db {}", self.snr_db)));
        }
        Ok(())
    }
}

/// A noisy view together with the rows that received noise.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyView {
    pub data: DMatrix<f64>,
    /// Row indices inside the window, in shuffled order.
    pub window: Vec<usize>,
    pub noise_variance: f64,
}

/// Mean per-column population variance of `view` restricted to `rows`.
pub fn window_variance(view: &DMatrix<f64>, rows: &[usize]) -> f64 {
    if rows.is_empty() || view.ncols() == 0 {
        return 0.0;
    }
    let k = rows.len() as f64;
    let mut total = 0.0;
    for j in 0..view.ncols() {
        let mean = rows.iter().map(|&i| view[(i, j)]).sum::<f64>() / k;
        total += rows.iter().map(|&i| (view[(i, j)] - mean).powi(2)).sum::<f64>() / k;
    }
    total / view.ncols() as f64
}

pub(crate) fn add_window_noise_stream(
    view: &DMatrix<f64>,
    spec: &NoiseSpec,
    stream: u64,
) -> Result<NoisyView> {
    spec.validate()?;
    let n = view.nrows();
    let mut rng = rng_for(spec.seed, stream);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let size = ((spec.window_fraction * n as f64).ceil() as usize).clamp(usize::from(n > 0), n);
    order.truncate(size);
    let window = order;

    if spec.snr_db == f64::INFINITY {
        return Ok(NoisyView {
            data: view.clone(),
            window,
            noise_variance: 0.0,
        });
    }
    let signal = window_variance(view, &window);
    if !(signal > 0.0) {
        return Err(Error::DegenerateSignal);
    }
    let noise_variance = signal / 10f64.powf(spec.snr_db / 10.0);
    let sd = noise_variance.sqrt();
    let mut data = view.clone();
    for &i in &window {
        for j in 0..view.ncols() {
            let e: f64 = rng.sample(StandardNormal);
            data[(i, j)] += sd * e;
        }
    }
    Ok(NoisyView {
        data,
        window,
        noise_variance,
    })
}

/// Adds zero-mean Gaussian noise to a seeded random window of rows so that
/// the in-window SNR equals `spec.snr_db`. Rows outside the window are untouched.
pub fn add_window_noise(view: &DMatrix<f64>, spec: &NoiseSpec) -> Result<DMatrix<f64>> {
    Ok(add_window_noise_stream(view, spec, 0)?.data)
}

/// Like [`add_window_noise`], also reporting the window and the noise variance.
pub fn add_window_noise_detailed(view: &DMatrix<f64>, spec: &NoiseSpec) -> Result<NoisyView> {
    add_window_noise_stream(view, spec, 0)
}

/// `copies_per_base` independently windowed noisy copies of every base view,
/// ordered base-major, copy-minor.
pub fn make_noisy_views(base_views: &[DMatrix<f64>], spec: &NoiseSpec) -> Result<Vec<DMatrix<f64>>> {
    spec.validate()?;
    let copies = spec.copies_per_base;
    (0..base_views.len() * copies)
        .into_par_iter()
        .map(|k| {
            let base = &base_views[k / copies];
            add_window_noise_stream(base, spec, 1 + k as u64).map(|v| v.data)
        })
        .collect()
}

/// Reads an XYZ point cloud: one `x y z` row per line, separated by
/// whitespace and/or commas. Blank lines and lines starting with `#` are skipped.
pub fn load_xyz_point_cloud(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_xyz(&text, path)
}

pub(crate) fn parse_xyz(text: &str, path: &Path) -> Result<DMatrix<f64>> {
    let mut data = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                path,
                lineno + 1,
                format!("expected 3 coordinates, found {}", fields.len()),
            ));
        }
        for f in fields {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::parse(path, lineno + 1, format!("not a number: {f:?}")))?;
            if !v.is_finite() {
                return Err(Error::parse(path, lineno + 1, "non-finite coordinate"));
            }
            data.push(v);
        }
    }
    Ok(DMatrix::from_row_slice(data.len() / 3, 3, &data))
}

/// Views generated exactly as `z^v = W_v x` from Gaussian latents.
#[derive(Debug, Clone)]
pub struct PlantedModel {
    pub latent: DMatrix<f64>,
    pub weights: Vec<DMatrix<f64>>,
    pub views: Vec<DMatrix<f64>>,
}

/// `x_i ~ N(0, I_d)`, `W_v` entries `~ N(0, 1/d)`, so view entries have unit variance.
pub fn planted_linear(n: usize, view_dims: &[usize], d: usize, seed: u64) -> PlantedModel {
    let latent = gaussian_matrix(n, d, seed, 0);
    let weights: Vec<DMatrix<f64>> = view_dims
        .iter()
        .enumerate()
        .map(|(v, &dim)| gaussian_matrix(dim, d, seed, 1 + v as u64) / (d as f64).sqrt())
        .collect();
    let views = weights.iter().map(|w| &latent * w.transpose()).collect();
    PlantedModel {
        latent,
        weights,
        views,
    }
}

/// Two isotropic unit-variance Gaussian clusters in 3-D whose centers are
/// `separation` apart along the diagonal. Labels 0 and 1.
pub fn gaussian_blobs(n_per_class: usize, separation: f64, seed: u64) -> (DMatrix<f64>, Vec<u32>) {
    let mut points = gaussian_matrix(2 * n_per_class, 3, seed, 0);
    let offset = Vector3::repeat(separation / 3f64.sqrt());
    let mut labels = Vec::with_capacity(2 * n_per_class);
    for i in 0..2 * n_per_class {
        let class = u32::from(i >= n_per_class);
        if class == 1 {
            for j in 0..3 {
                points[(i, j)] += offset[j];
            }
        }
        labels.push(class);
    }
    (points, labels)
}

/// Contaminates a seeded random subset of entries with `±magnitude` outliers.
/// Returns the corrupted matrix and the number of entries replaced.
pub fn contaminate_entries(
    view: &DMatrix<f64>,
    rate: f64,
    magnitude: f64,
    seed: u64,
    stream: u64,
) -> (DMatrix<f64>, usize) {
    let mut rng = rng_for(seed, stream);
    let total = view.len();
    let count = (rate * total as f64).round() as usize;
    let mut idx: Vec<usize> = (0..total).collect();
    idx.shuffle(&mut rng);
    let mut out = view.clone();
    for &k in &idx[..count] {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        out[k] += sign * magnitude;
    }
    (out, count)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn s_curve_deterministic_and_on_manifold() {
        let one = gen_s_curve(1, 3);
        assert_eq!(one, gen_s_curve(1, 3));
        assert!(one.iter().all(|v| v.is_finite()));

        let pts = gen_s_curve(2000, 11);
        for row in pts.row_iter() {
            let (x, y, z) = (row[0], row[1], row[2]);
            assert!((0.0..=2.0).contains(&y));
            let upper = x * x + (z + 1.0).powi(2) - 1.0;
            let lower = x * x + (z - 1.0).powi(2) - 1.0;
            assert!(upper.abs() < 1e-12 || lower.abs() < 1e-12, "{x} {z}");
        }
        assert_ne!(gen_s_curve(50, 1), gen_s_curve(50, 2));
    }

    #[test]
    fn plane_projection() {
        let p = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0]);
        let v = project_to_planes(&p).unwrap();
        assert_eq!(v[0].as_slice(), &[1.0, 2.0]);
        assert_eq!(v[1].as_slice(), &[1.0, 3.0]);
        assert_eq!(v[2].as_slice(), &[2.0, 3.0]);

        let z = project_to_planes(&DMatrix::zeros(4, 3)).unwrap();
        assert!(z.iter().all(|m| m.shape() == (4, 2) && m.iter().all(|&e| e == 0.0)));

        let pts = gen_s_curve(20, 5);
        let v = project_to_planes(&pts).unwrap();
        for i in 0..20 {
            assert_eq!(v[0][(i, 0)], v[1][(i, 0)]);
            assert_eq!(v[0][(i, 1)], v[2][(i, 0)]);
            assert_eq!(v[1][(i, 1)], v[2][(i, 1)]);
            assert_eq!(v[0][(i, 0)], pts[(i, 0)]);
            assert_eq!(v[2][(i, 0)], pts[(i, 1)]);
            assert_eq!(v[2][(i, 1)], pts[(i, 2)]);
        }
    }

    #[test]
    fn window_noise_is_local_and_seeded() {
        let view = gaussian_matrix(300, 2, 9, 0);
        let spec = NoiseSpec {
            snr_db: 10.0,
            window_fraction: 0.3,
            copies_per_base: 1,
            seed: 4,
        };
        let noisy = add_window_noise_detailed(&view, &spec).unwrap();
        assert_eq!(noisy.window.len(), 90);
        let inside: std::collections::HashSet<_> = noisy.window.iter().copied().collect();
        let mut untouched = 0;
        for i in 0..300 {
            if !inside.contains(&i) {
                assert_eq!(noisy.data.row(i), view.row(i));
                untouched += 1;
            } else {
                assert_ne!(noisy.data.row(i), view.row(i));
            }
        }
        assert!(untouched as f64 >= 0.7 * 300.0 - 1.0);
        assert_eq!(noisy.data, add_window_noise(&view, &spec).unwrap());
    }

    #[test]
    fn noise_variance_matches_db_definition() {
        // unit-variance signal, full window: 10 dB means noise variance 0.1
        let view = gaussian_matrix(1000, 1, 21, 0);
        let spec = NoiseSpec {
            snr_db: 10.0,
            window_fraction: 1.0,
            copies_per_base: 1,
            seed: 2,
        };
        let noisy = add_window_noise_detailed(&view, &spec).unwrap();
        let signal = window_variance(&view, &noisy.window);
        assert!((noisy.noise_variance - signal / 10.0).abs() < 1e-15);
        let all: Vec<usize> = (0..1000).collect();
        let realized = window_variance(&(&noisy.data - &view), &all);
        assert!((realized / 0.1 - 1.0).abs() < 0.2, "realized {realized}");
    }

    #[test]
    fn degenerate_window_rejected() {
        let view = DMatrix::from_element(10, 2, 3.0);
        assert!(matches!(
            add_window_noise(&view, &NoiseSpec::default()),
            Err(Error::DegenerateSignal)
        ));
        let bad = NoiseSpec {
            window_fraction: 0.0,
            ..Default::default()
        };
        assert!(add_window_noise(&gaussian_matrix(5, 1, 0, 0), &bad).is_err());
    }

    #[test]
    fn noisy_view_counts_and_noiseless_limit() {
        let base = project_to_planes(&gen_s_curve(50, 0)).unwrap();
        for (copies, expected) in [(3, 9), (6, 18), (9, 27)] {
            let spec = NoiseSpec {
                copies_per_base: copies,
                ..Default::default()
            };
            assert_eq!(make_noisy_views(&base, &spec).unwrap().len(), expected);
        }
        let clean = NoiseSpec {
            snr_db: f64::INFINITY,
            copies_per_base: 2,
            ..Default::default()
        };
        let views = make_noisy_views(&base, &clean).unwrap();
        assert_eq!(views[0], base[0]);
        assert_eq!(views[1], base[0]);
        assert_eq!(views[5], base[2]);
        let noisy = make_noisy_views(&base, &NoiseSpec::default()).unwrap();
        assert_ne!(noisy[0], noisy[1]);
    }

    #[test]
    fn xyz_parsing() {
        let p = Path::new("mem.xyz");
        let m = parse_xyz("0 0 0\n1 2 3", p).unwrap();
        assert_eq!(m.shape(), (2, 3));
        assert_eq!(m.row(1).iter().copied().collect::<Vec<_>>(), vec![1.0, 2.0, 3.0]);
        let m = parse_xyz("#header\n1,2,3\n\n4, 5 6\n", p).unwrap();
        assert_eq!(m.shape(), (2, 3));
        match parse_xyz("0 0 0\n1 2\n", p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_xyz("a b c", p), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(
            load_xyz_point_cloud("/nonexistent/cloud.xyz"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn planted_views_are_exact() {
        let p = planted_linear(10, &[4, 5], 2, 3);
        for (z, w) in p.views.iter().zip(&p.weights) {
            assert!((z - &p.latent * w.transpose()).abs().max() == 0.0);
        }
    }

    #[test]
    fn contamination_count() {
        let v = DMatrix::zeros(10, 5);
        let (c, k) = contaminate_entries(&v, 0.3, 10.0, 1, 0);
        assert_eq!(k, 15);
        assert_eq!(c.iter().filter(|e| e.abs() == 10.0).count(), 15);
    }
}
