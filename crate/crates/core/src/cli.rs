//! The `intact` command line: synth | train | embed | eval | probe | bench.
//!
//! Each command is also exposed as a library function returning the lines it
//! prints, so runs can be scripted and tested without spawning a process.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::config::{
    require_files, BenchConfig, EmbedConfig, EvalConfig, FitMode, KernelKind, ProbeConfig,
    RunConfig, SynthConfig, SynthSource, TrainConfig,
};
use crate::error::{Error, Result};
use crate::eval::{align_to_truth, knn_classify, reconstruction_error, robustness_benchmark_with};
use crate::inference::{embed_views, probe_grid};
use crate::io::{self, fmt_f64, ModelFile};
use crate::kernel::{kernel_fit_per_view, KernelSpec};
use crate::model::{standardize_views, IntactEmbedding, MultiViewDataset};
use crate::synth;

#[derive(Debug, Parser)]
#[command(name = "intact", version, about = "Robust multi-view intact space learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Maximum number of worker threads.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Overrides the seed of the selected command's config section.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Subcommand, PartialEq, Eq)]
pub enum Command {
    /// Generate synthetic multi-view data.
    Synth,
    /// Fit a model to view files.
    Train,
    /// Embed new examples with a trained model.
    Embed,
    /// Score an embedding against truth and/or labels.
    Eval,
    /// Run multi-view stability probes on a trained model.
    Probe,
    /// Compare the Cauchy fit with a squared-loss baseline under contamination.
    Bench,
}

/// Parses arguments, sets up the thread pool and runs the selected command,
/// returning the lines to print on stdout.
pub fn run(cli: &Cli) -> Result<Vec<String>> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    if let Some(seed) = cli.seed {
        apply_seed(&mut cfg, cli.command, seed);
    }
    let work = || dispatch(cli.command, &cfg, &out);
    match cli.threads {
        Some(0) => Err(Error::InvalidParameter("--threads must be >= 1".into())),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}

fn apply_seed(cfg: &mut RunConfig, cmd: Command, seed: u64) {
    match cmd {
        Command::Synth => cfg.synth.get_or_insert_with(Default::default).seed = seed,
        Command::Train => cfg.train.get_or_insert_with(Default::default).hyperparams.seed = seed,
        Command::Probe => cfg.probe.get_or_insert_with(Default::default).seed = seed,
        Command::Bench => cfg.bench.get_or_insert_with(Default::default).seed = seed,
        Command::Embed | Command::Eval => {}
    }
}

fn dispatch(cmd: Command, cfg: &RunConfig, out: &Path) -> Result<Vec<String>> {
    match cmd {
        Command::Synth => cmd_synth(&cfg.synth.clone().unwrap_or_default(), out),
        Command::Train => cmd_train(&cfg.train.clone().unwrap_or_default(), out),
        Command::Embed => cmd_embed(&cfg.embed.clone().unwrap_or_default(), out),
        Command::Eval => cmd_eval(&cfg.eval.clone().unwrap_or_default(), out),
        Command::Probe => cmd_probe(&cfg.probe.clone().unwrap_or_default(), out),
        Command::Bench => cmd_bench(&cfg.bench.clone().unwrap_or_default(), out),
    }
}

/// Record of a `synth` run; file names are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub source: String,
    pub n_examples: usize,
    pub seed: u64,
    /// `null` when no noise was added.
    pub snr_db: Option<f64>,
    pub window_fraction: Option<f64>,
    pub copies_per_base: Option<usize>,
    pub truth: String,
    pub labels: Option<String>,
    pub views: Vec<String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = io::read_text(path)?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
    }

    fn dir(path: &Path) -> PathBuf {
        path.parent().unwrap_or(Path::new("")).to_path_buf()
    }
}

fn view_paths(views: &[PathBuf], manifest: &Option<PathBuf>, what: &str) -> Result<Vec<PathBuf>> {
    if !views.is_empty() {
        return Ok(views.to_vec());
    }
    match manifest {
        Some(m) => {
            let dir = Manifest::dir(m);
            Ok(Manifest::load(m)?.views.iter().map(|v| dir.join(v)).collect())
        }
        None => Err(Error::MissingInput(format!("{what}: give `views` or `manifest`"))),
    }
}

fn read_views(paths: &[PathBuf]) -> Result<Vec<DMatrix<f64>>> {
    require_files(paths)?;
    paths.iter().map(|p| io::read_matrix_csv(p)).collect()
}

fn require_model(model: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    let p = model
        .clone()
        .ok_or_else(|| Error::MissingInput(format!("{what}: `model` is required")))?;
    require_files([&p])?;
    Ok(p)
}

/// Generates base views (optionally with noisy copies), ground truth and a manifest.
pub fn cmd_synth(cfg: &SynthConfig, out: &Path) -> Result<Vec<String>> {
    cfg.validate()?;
    let (truth, base, labels) = match cfg.source {
        SynthSource::SCurve => {
            let pts = synth::gen_s_curve(cfg.n, cfg.seed);
            let views = synth::project_to_planes(&pts)?;
            (pts, views, None)
        }
        SynthSource::Xyz => {
            let pts = synth::load_xyz_point_cloud(cfg.xyz_path.as_ref().expect("validated"))?;
            let views = synth::project_to_planes(&pts)?;
            (pts, views, None)
        }
        SynthSource::Blobs => {
            let (pts, labels) = synth::gaussian_blobs(cfg.n, cfg.separation, cfg.seed);
            let views = synth::project_to_planes(&pts)?;
            (pts, views, Some(labels))
        }
        SynthSource::Planted => {
            let p = synth::planted_linear(cfg.n, &cfg.view_dims, cfg.latent_dim, cfg.seed);
            (p.latent, p.views, None)
        }
    };
    let views = if cfg.noise {
        synth::make_noisy_views(&base, &cfg.noise_spec())?
    } else {
        base
    };

    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut names = Vec::with_capacity(views.len());
    for (v, view) in views.iter().enumerate() {
        let name = format!("view_{v}.csv");
        io::write_view_csv(&out.join(&name), v, view)?;
        names.push(name);
    }
    io::write_matrix_csv(
        &out.join("truth.csv"),
        &truth,
        Some(&format!("truth n {} dims {}", truth.nrows(), truth.ncols())),
    )?;
    let labels_name = match &labels {
        Some(l) => {
            io::write_labels(&out.join("labels.csv"), l)?;
            Some("labels.csv".to_string())
        }
        None => None,
    };
    let source = match cfg.source {
        SynthSource::SCurve => "s-curve",
        SynthSource::Xyz => "xyz",
        SynthSource::Blobs => "blobs",
        SynthSource::Planted => "planted",
    };
    let manifest = Manifest {
        source: source.into(),
        n_examples: truth.nrows(),
        seed: cfg.seed,
        snr_db: (cfg.noise && cfg.snr_db.is_finite()).then_some(cfg.snr_db),
        window_fraction: cfg.noise.then_some(cfg.window_fraction),
        copies_per_base: cfg.noise.then_some(cfg.copies_per_base),
        truth: "truth.csv".into(),
        labels: labels_name,
        views: names,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    io::write_text(&out.join("manifest.json"), &json)?;
    Ok(vec![
        format!("views = {}", views.len()),
        format!("examples = {}", truth.nrows()),
        format!("manifest = {}", out.join("manifest.json").display()),
    ])
}

/// Fits a linear or kernel model and writes `model.txt`, `embedding.csv` and `history.csv`.
pub fn cmd_train(cfg: &TrainConfig, out: &Path) -> Result<Vec<String>> {
    let hp = cfg.hyperparams;
    hp.validate()?;
    if let Some(g) = cfg.gamma {
        KernelSpec::Rbf { gamma: g }.validate()?;
    }
    let paths = view_paths(&cfg.views, &cfg.manifest, "train")?;
    require_files(&paths)?;
    let raw = MultiViewDataset::new(read_views(&paths)?, None)?;
    let (data, standardization) = if cfg.standardize {
        let (d, s) = standardize_views(&raw);
        (d, Some(s))
    } else {
        (raw, None)
    };
    let (model, embedding, history) = match cfg.mode {
        FitMode::Linear => crate::irr::fit(&data, &hp, None)?,
        FitMode::Kernel => {
            let kernels = data
                .views()
                .iter()
                .map(|z| match (cfg.kernel, cfg.gamma) {
                    (KernelKind::Linear, _) => KernelSpec::Linear,
                    (KernelKind::Rbf, Some(gamma)) => KernelSpec::Rbf { gamma },
                    (KernelKind::Rbf, None) => KernelSpec::rbf_median(z),
                })
                .collect();
            kernel_fit_per_view(&data, &hp, kernels)?
        }
    };
    let file = ModelFile {
        model,
        standardization,
    };
    file.save(&out.join("model.txt"))?;
    io::write_matrix_csv(
        &out.join("embedding.csv"),
        embedding.matrix(),
        Some(&format!("embedding n {} dims {}", embedding.n_examples(), embedding.latent_dim())),
    )?;
    io::write_text(&out.join("history.csv"), &io::history_to_csv(&history))?;
    Ok(vec![
        format!("initial_objective = {}", fmt_f64(history.initial_objective)),
        format!("final_objective = {}", fmt_f64(history.final_objective())),
        format!("outer_iterations = {}", history.outer_iterations),
        format!("converged = {}", history.converged),
        format!("stop_reason = {}", history.stop_reason.as_str()),
        format!("monotone = {}", history.is_monotone(1e-9)),
    ])
}

fn load_for_model(file: &ModelFile, paths: &[PathBuf]) -> Result<Vec<DMatrix<f64>>> {
    let views = read_views(paths)?;
    let dims = file.model.view_dims();
    if views.len() != dims.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} view files for a {}-view model",
            views.len(),
            dims.len()
        )));
    }
    for (v, z) in views.iter().enumerate() {
        if z.ncols() != dims[v] {
            return Err(Error::DimensionMismatch {
                view: v,
                expected: dims[v],
                found: z.ncols(),
            });
        }
    }
    Ok(match &file.standardization {
        Some(s) => s.apply_views(&views),
        None => views,
    })
}

/// Embeds the rows of new view files with a trained model.
pub fn cmd_embed(cfg: &EmbedConfig, out: &Path) -> Result<Vec<String>> {
    let model_path = require_model(&cfg.model, "embed")?;
    let paths = view_paths(&cfg.views, &cfg.manifest, "embed")?;
    require_files(&paths)?;
    let file = ModelFile::load(&model_path)?;
    let views = load_for_model(&file, &paths)?;
    let x = embed_views(&views, &file.model)?;
    let name = cfg.output.clone().unwrap_or_else(|| "embedding_new.csv".into());
    let path = out.join(name);
    io::write_matrix_csv(
        &path,
        &x,
        Some(&format!("embedding n {} dims {}", x.nrows(), x.ncols())),
    )?;
    Ok(vec![
        format!("embedded = {}", x.nrows()),
        format!("output = {}", path.display()),
    ])
}

/// Even rows train, odd rows test.
fn alternate_split(x: &DMatrix<f64>, labels: &[u32]) -> (DMatrix<f64>, Vec<u32>, DMatrix<f64>, Vec<u32>) {
    let train: Vec<usize> = (0..x.nrows()).step_by(2).collect();
    let test: Vec<usize> = (1..x.nrows()).step_by(2).collect();
    (
        x.select_rows(&train),
        train.iter().map(|&i| labels[i]).collect(),
        x.select_rows(&test),
        test.iter().map(|&i| labels[i]).collect(),
    )
}

/// Scores an embedding: alignment residual against truth, k-NN accuracy on
/// labels (even rows train, odd rows test), and the reconstruction error when
/// a model and its training views are given.
pub fn cmd_eval(cfg: &EvalConfig, out: &Path) -> Result<Vec<String>> {
    let emb_path = cfg
        .embedding
        .clone()
        .ok_or_else(|| Error::MissingInput("eval: `embedding` is required".into()))?;
    let manifest = match &cfg.manifest {
        Some(m) => Some((Manifest::dir(m), Manifest::load(m)?)),
        None => None,
    };
    let truth = cfg
        .truth
        .clone()
        .or_else(|| manifest.as_ref().map(|(d, m)| d.join(&m.truth)));
    let labels = cfg.labels.clone().or_else(|| {
        manifest
            .as_ref()
            .and_then(|(d, m)| m.labels.as_ref().map(|l| d.join(l)))
    });
    if truth.is_none() && labels.is_none() {
        return Err(Error::MissingInput(
            "eval needs `truth` and/or `labels` to score against".into(),
        ));
    }
    if cfg.k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    require_files([&emb_path])?;
    require_files(truth.iter().chain(labels.iter()))?;

    let x = io::read_matrix_csv(&emb_path)?;
    let mut metrics: BTreeMap<String, f64> = BTreeMap::new();
    if let Some(t) = &truth {
        let t = io::read_matrix_csv(t)?;
        metrics.insert("alignment_residual".into(), align_to_truth(&x, &t)?.relative_residual);
    }
    if let Some(l) = &labels {
        let l = io::read_labels(l)?;
        if l.len() != x.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} embedded rows",
                l.len(),
                x.nrows()
            )));
        }
        let (tx, tl, qx, ql) = alternate_split(&x, &l);
        let (_, acc) = knn_classify(&tx, &tl, &qx, &ql, cfg.k)?;
        metrics.insert("knn_accuracy".into(), acc);
        metrics.insert("knn_k".into(), cfg.k as f64);
    }
    if cfg.model.is_some() {
        let model_path = require_model(&cfg.model, "eval")?;
        let file = ModelFile::load(&model_path)?;
        let paths = view_paths(&cfg.views, &cfg.manifest, "eval")?;
        let views = load_for_model(&file, &paths)?;
        let ds = MultiViewDataset::new(views, None)?;
        let emb = IntactEmbedding::new(x.clone())?;
        metrics.insert(
            "reconstruction_error".into(),
            reconstruction_error(&ds, &file.model, &emb)?,
        );
    }
    let json = serde_json::to_string_pretty(&metrics).expect("metrics serialize") + "\n";
    io::write_text(&out.join("metrics.json"), &json)?;
    Ok(metrics
        .iter()
        .map(|(k, v)| format!("{k} = {}", fmt_metric(k, *v)))
        .collect())
}

fn fmt_metric(key: &str, v: f64) -> String {
    if key == "knn_k" {
        format!("{}", v as u64)
    } else {
        format!("{v}")
    }
}

/// Runs the seeded probe grid and writes `probes.csv`.
pub fn cmd_probe(cfg: &ProbeConfig, out: &Path) -> Result<Vec<String>> {
    let model_path = require_model(&cfg.model, "probe")?;
    let paths = view_paths(&cfg.views, &cfg.manifest, "probe")?;
    require_files(&paths)?;
    let file = ModelFile::load(&model_path)?;
    crate::inference::stability_bound(1.0, &file.model)?;
    let views = load_for_model(&file, &paths)?;
    let records = probe_grid(&views, &file.model, &cfg.taus, cfg.n_probes, cfg.seed)?;

    let mut csv = String::from(
        "example,view,coord,tau,measured_deviation,beta_bound,holds,locally_convex\n",
    );
    for r in &records {
        let p = &r.report;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            r.example_index,
            p.view_index,
            p.coord_index,
            fmt_f64(p.tau),
            fmt_f64(p.measured_deviation),
            fmt_f64(p.beta_bound),
            p.holds,
            p.locally_convex
        );
    }
    io::write_text(&out.join("probes.csv"), &csv)?;
    let violations = records.iter().filter(|r| !r.report.holds).count();
    let unexplained = records
        .iter()
        .filter(|r| r.report.unexplained_violation())
        .count();
    let nonconvex = records.iter().filter(|r| !r.report.locally_convex).count();
    Ok(vec![
        format!("probes = {}", records.len()),
        format!("violations = {violations}"),
        format!("violations_with_local_convexity = {unexplained}"),
        format!("locally_nonconvex = {nonconvex}"),
        format!("table = {}", out.join("probes.csv").display()),
    ])
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// One row of the robustness table: medians over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub rate: f64,
    pub cauchy_error: f64,
    pub l2_error: f64,
    pub ratio: f64,
}

/// Runs the robustness benchmark over the configured rate grid and seeds.
pub fn bench_table(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    cfg.validate()?;
    let d = cfg.hyperparams.latent_dim;
    cfg.rates
        .iter()
        .map(|&rate| {
            let mut c = Vec::new();
            let mut l = Vec::new();
            let mut r = Vec::new();
            for s in 0..cfg.seeds as u64 {
                let seed = cfg.seed.wrapping_add(s);
                let planted = synth::planted_linear(cfg.n, &cfg.view_dims, d, seed);
                let ds = MultiViewDataset::new(planted.views, None)?;
                let hp = crate::model::Hyperparams {
                    seed,
                    ..cfg.hyperparams
                };
                let rep = robustness_benchmark_with(&ds, rate, cfg.magnitude, &hp, cfg.standardize)?;
                c.push(rep.cauchy_error);
                l.push(rep.l2_error);
                r.push(rep.ratio);
            }
            Ok(BenchRow {
                rate,
                cauchy_error: median(c),
                l2_error: median(l),
                ratio: median(r),
            })
        })
        .collect()
}

/// Writes `bench.csv` and returns the table.
pub fn cmd_bench(cfg: &BenchConfig, out: &Path) -> Result<Vec<String>> {
    let rows = bench_table(cfg)?;
    let mut csv = String::from("rate,cauchy_error,l2_error,ratio\n");
    let mut lines = vec![format!(
        "{:>6}  {:>14}  {:>14}  {:>10}",
        "rate", "cauchy_error", "l2_error", "ratio"
    )];
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            r.rate,
            fmt_f64(r.cauchy_error),
            fmt_f64(r.l2_error),
            fmt_f64(r.ratio)
        );
        lines.push(format!(
            "{:>6.3}  {:>14.6e}  {:>14.6e}  {:>10.4}",
            r.rate, r.cauchy_error, r.l2_error, r.ratio
        ));
    }
    io::write_text(&out.join("bench.csv"), &csv)?;
    Ok(lines)
}
