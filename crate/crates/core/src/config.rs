//! TOML run configuration, one optional section per command.
//!
//! Unknown keys are rejected. Relative paths are resolved against the
//! directory containing the config file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::Hyperparams;
use crate::synth::NoiseSpec;

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Default output directory for every command (overridden by `--out`).
    pub out_dir: Option<PathBuf>,
    pub synth: Option<SynthConfig>,
    pub train: Option<TrainConfig>,
    pub embed: Option<EmbedConfig>,
    pub eval: Option<EvalConfig>,
    pub probe: Option<ProbeConfig>,
    pub bench: Option<BenchConfig>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum SynthSource {
    /// S-curve points projected onto the three axis planes.
    SCurve,
    /// A user-supplied XYZ point cloud projected onto the three axis planes.
    Xyz,
    /// Two labelled Gaussian blobs in 3-D projected onto the axis planes.
    Blobs,
    /// Views generated exactly by random linear maps from Gaussian latents.
    Planted,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub source: SynthSource,
    /// Number of points (per class for `blobs`).
    pub n: usize,
    pub seed: u64,
    pub xyz_path: Option<PathBuf>,
    /// Blob center distance in units of the cluster standard deviation.
    pub separation: f64,
    /// View dimensions and latent dimension for `planted`.
    pub view_dims: Vec<usize>,
    pub latent_dim: usize,
    /// Derive noisy copies of each base view; otherwise the base views are written as-is.
    pub noise: bool,
    /// Decibels; `inf` disables noise while keeping the copy structure.
    pub snr_db: f64,
    pub window_fraction: f64,
    pub copies_per_base: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let noise = NoiseSpec::default();
        Self {
            source: SynthSource::SCurve,
            n: 500,
            seed: 0,
            xyz_path: None,
            separation: 6.0,
            view_dims: vec![5, 5, 5],
            latent_dim: 3,
            noise: false,
            snr_db: noise.snr_db,
            window_fraction: noise.window_fraction,
            copies_per_base: noise.copies_per_base,
        }
    }
}

impl SynthConfig {
    pub fn noise_spec(&self) -> NoiseSpec {
        NoiseSpec {
            snr_db: self.snr_db,
            window_fraction: self.window_fraction,
            copies_per_base: self.copies_per_base,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("synth.n must be >= 1".into()));
        }
        if self.noise {
            self.noise_spec().validate()?;
        }
        match self.source {
            SynthSource::Xyz => match &self.xyz_path {
                None => Err(Error::MissingInput("synth.xyz_path is required for source = \"xyz\"".into())),
                Some(p) => require_file(p),
            },
            SynthSource::Planted if self.view_dims.is_empty() || self.view_dims.contains(&0) || self.latent_dim == 0 => {
                Err(Error::InvalidParameter("planted data needs non-empty view_dims and latent_dim >= 1".into()))
            }
            SynthSource::Blobs if !(self.separation >= 0.0) => {
                Err(Error::InvalidParameter("separation must be >= 0".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FitMode {
    #[default]
    Linear,
    Kernel,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Linear,
    #[default]
    Rbf,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// View CSV files, in view order. Alternatively give `manifest`.
    pub views: Vec<PathBuf>,
    /// A manifest written by `synth`; its view files are used when `views` is empty.
    pub manifest: Option<PathBuf>,
    pub standardize: bool,
    pub mode: FitMode,
    pub kernel: KernelKind,
    /// RBF bandwidth; the per-view median heuristic when absent.
    pub gamma: Option<f64>,
    pub hyperparams: Hyperparams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            views: Vec::new(),
            manifest: None,
            standardize: true,
            mode: FitMode::Linear,
            kernel: KernelKind::Rbf,
            gamma: None,
            hyperparams: Hyperparams::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields, default)]
pub struct EmbedConfig {
    pub model: Option<PathBuf>,
    pub views: Vec<PathBuf>,
    pub manifest: Option<PathBuf>,
    /// Output file name inside the output directory.
    pub output: Option<String>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub embedding: Option<PathBuf>,
    /// Ground-truth latent coordinates for the alignment residual.
    pub truth: Option<PathBuf>,
    /// Labels of the embedded rows for k-NN accuracy (alternate rows train / test).
    pub labels: Option<PathBuf>,
    /// Model and training views for the reconstruction error.
    pub model: Option<PathBuf>,
    pub views: Vec<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub k: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            embedding: None,
            truth: None,
            labels: None,
            model: None,
            views: Vec::new(),
            manifest: None,
            k: 3,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub model: Option<PathBuf>,
    /// Raw view files of the examples to probe.
    pub views: Vec<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub taus: Vec<f64>,
    /// Probes per tau.
    pub n_probes: usize,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            model: None,
            views: Vec::new(),
            manifest: None,
            taus: vec![1e-3, 1e-2],
            n_probes: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub rates: Vec<f64>,
    /// Outlier size in multiples of the contaminated view's RMS.
    pub magnitude: f64,
    pub n: usize,
    pub view_dims: Vec<usize>,
    /// Number of seeds; the table reports medians over seeds.
    pub seeds: usize,
    pub seed: u64,
    pub standardize: bool,
    pub hyperparams: Hyperparams,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            rates: vec![0.0, 0.1, 0.2, 0.3],
            magnitude: 10.0,
            n: 200,
            view_dims: vec![5, 5, 5],
            seeds: 10,
            seed: 0,
            standardize: true,
            hyperparams: Hyperparams::default(),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(r) = self.rates.iter().find(|r| !(0.0..0.5).contains(*r)) {
            return Err(Error::InvalidParameter(format!(
                "contamination rate must be in [0, 0.5), got {r}"
            )));
        }
        if self.seeds == 0 || self.n == 0 || self.view_dims.is_empty() {
            return Err(Error::InvalidParameter("bench needs seeds, n and view_dims >= 1".into()));
        }
        self.hyperparams.validate()
    }
}

fn require_file(p: &Path) -> Result<()> {
    if p.is_file() {
        Ok(())
    } else {
        Err(Error::MissingInput(format!("{} does not exist", p.display())))
    }
}

/// Fails with [`Error::MissingInput`] unless every path is an existing file.
pub fn require_files<'a>(paths: impl IntoIterator<Item = &'a PathBuf>) -> Result<()> {
    paths.into_iter().try_for_each(|p| require_file(p))
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn resolve_opt(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(p) = p {
        resolve(base, p);
    }
}

fn resolve_all(base: &Path, ps: &mut [PathBuf]) {
    ps.iter_mut().for_each(|p| resolve(base, p));
}

impl RunConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].lines().count().max(1))
                .unwrap_or(0);
            Error::parse(path, line, e.message().to_string())
        })
    }

    /// Reads a config file and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        cfg.resolve_paths(&base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        resolve_opt(base, &mut self.out_dir);
        if let Some(s) = &mut self.synth {
            resolve_opt(base, &mut s.xyz_path);
        }
        if let Some(t) = &mut self.train {
            resolve_all(base, &mut t.views);
            resolve_opt(base, &mut t.manifest);
        }
        if let Some(e) = &mut self.embed {
            resolve_opt(base, &mut e.model);
            resolve_all(base, &mut e.views);
            resolve_opt(base, &mut e.manifest);
        }
        if let Some(e) = &mut self.eval {
            resolve_opt(base, &mut e.embedding);
            resolve_opt(base, &mut e.truth);
            resolve_opt(base, &mut e.labels);
            resolve_opt(base, &mut e.model);
            resolve_all(base, &mut e.views);
            resolve_opt(base, &mut e.manifest);
        }
        if let Some(p) = &mut self.probe {
            resolve_opt(base, &mut p.model);
            resolve_all(base, &mut p.views);
            resolve_opt(base, &mut p.manifest);
        }
    }
}
