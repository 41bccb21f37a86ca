//! Text formats: matrix CSV files, label lists, training histories and the
//! model file.
//!
//! Floating-point values are written with 17 significant digits
//! (`{:.16e}`), which round-trips every `f64` exactly, so saving a loaded
//! model reproduces the original file byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kernel::{KernelModel, KernelSpec};
use crate::model::{
    FitHistory, Hyperparams, IntactModel, ModelMode, ModelParams, Standardization, ViewTransform,
};

/// Current model file format version.
pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "intact-model";

/// 17-significant-digit scientific notation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_rows(out: &mut String, m: &DMatrix<f64>, sep: &str) {
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|&x| fmt_f64(x)).collect();
        out.push_str(&cells.join(sep));
        out.push('\n');
    }
}

/// Serializes a matrix as CSV, one row per line, preceded by optional `#` header lines.
pub fn matrix_to_csv(m: &DMatrix<f64>, header: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(h) = header {
        for line in h.lines() {
            let _ = writeln!(out, "# {line}");
        }
    }
    write_rows(&mut out, m, ",");
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>, header: Option<&str>) -> Result<()> {
    write_text(path, &matrix_to_csv(m, header))
}

/// Writes one view file with the header `# view v dims D_v`.
pub fn write_view_csv(path: &Path, view_index: usize, m: &DMatrix<f64>) -> Result<()> {
    write_matrix_csv(path, m, Some(&format!("view {view_index} dims {}", m.ncols())))
}

fn split_fields(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
}

/// Parses comma- or whitespace-separated numeric rows; blank lines and lines
/// starting with `#` are skipped. Fails with [`Error::EmptyView`] when there
/// are no data rows.
pub fn parse_matrix_csv(text: &str, path: &Path) -> Result<DMatrix<f64>> {
    let mut data = Vec::new();
    let mut cols: Option<usize> = None;
    let mut rows = 0;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut count = 0;
        for field in split_fields(line) {
            let v: f64 = field.parse().map_err(|_| {
                Error::parse(path, lineno + 1, format!("cannot parse '{field}' as a number"))
            })?;
            if !v.is_finite() {
                return Err(Error::NonFiniteInput {
                    context: path.display().to_string(),
                    row: rows,
                    col: count,
                });
            }
            data.push(v);
            count += 1;
        }
        match cols {
            None => cols = Some(count),
            Some(c) if c != count => {
                return Err(Error::parse(
                    path,
                    lineno + 1,
                    format!("expected {c} columns, found {count}"),
                ))
            }
            _ => {}
        }
        rows += 1;
    }
    match cols {
        None => Err(Error::EmptyView(format!("{} has no data rows", path.display()))),
        Some(c) => Ok(DMatrix::from_row_slice(rows, c, &data)),
    }
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    parse_matrix_csv(&read_text(path)?, path)
}

/// One non-negative integer label per line; `#` lines are comments.
pub fn read_labels(path: &Path) -> Result<Vec<u32>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(line.parse().map_err(|_| {
            Error::parse(path, lineno + 1, format!("cannot parse '{line}' as a label"))
        })?);
    }
    Ok(out)
}

pub fn write_labels(path: &Path, labels: &[u32]) -> Result<()> {
    let mut out = String::from("# labels\n");
    for l in labels {
        let _ = writeln!(out, "{l}");
    }
    write_text(path, &out)
}

/// `step,kind,objective,inner_iterations`, starting with the initial objective as step 0.
pub fn history_to_csv(h: &FitHistory) -> String {
    let mut out = String::from("step,kind,objective,inner_iterations\n");
    let _ = writeln!(out, "0,initial,{},0", fmt_f64(h.initial_objective));
    for (k, e) in h.trace.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            k + 1,
            e.kind.as_str(),
            fmt_f64(e.objective),
            e.inner_iterations
        );
    }
    out
}

/// A trained model plus the standardization applied to its training views.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: IntactModel,
    pub standardization: Option<Standardization>,
}

fn join_f64(xs: &[f64]) -> String {
    xs.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(" ")
}

fn write_matrix_block(out: &mut String, name: &str, v: usize, m: &DMatrix<f64>) {
    let _ = writeln!(out, "matrix {name} {v} {} {}", m.nrows(), m.ncols());
    write_rows(out, m, " ");
}

impl ModelFile {
    pub fn to_text(&self) -> String {
        let model = &self.model;
        let hp = &model.hyperparams;
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC} {FORMAT_VERSION}");
        let mode = match model.mode() {
            ModelMode::Linear => "linear",
            ModelMode::Kernel => "kernel",
        };
        let _ = writeln!(out, "mode {mode}");
        let _ = writeln!(out, "views {}", model.n_views());
        let dims: Vec<String> = model.view_dims().iter().map(|d| d.to_string()).collect();
        let _ = writeln!(out, "view_dims {}", dims.join(" "));
        let _ = writeln!(out, "latent_dim {}", model.latent_dim());
        if let ModelParams::Kernel(km) = &model.params {
            let _ = writeln!(out, "n_train {}", km.n_train());
        }
        let _ = writeln!(out, "scale {}", fmt_f64(hp.scale));
        let _ = writeln!(out, "w_penalty {}", fmt_f64(hp.w_penalty));
        let _ = writeln!(out, "x_penalty {}", fmt_f64(hp.x_penalty));
        let _ = writeln!(out, "max_outer {}", hp.max_outer);
        let _ = writeln!(out, "max_inner {}", hp.max_inner);
        let _ = writeln!(out, "tol_obj {}", fmt_f64(hp.tol_obj));
        let _ = writeln!(out, "tol_x {}", fmt_f64(hp.tol_x));
        let _ = writeln!(out, "seed {}", hp.seed);
        match &self.standardization {
            None => {
                let _ = writeln!(out, "standardization none");
            }
            Some(s) => {
                let _ = writeln!(out, "standardization per-view");
                for (v, t) in s.views.iter().enumerate() {
                    let _ = writeln!(out, "mean {v} {}", join_f64(&t.mean));
                    let _ = writeln!(out, "std {v} {}", join_f64(&t.scale));
                }
            }
        }
        match &model.params {
            ModelParams::Linear(ws) => {
                for (v, w) in ws.iter().enumerate() {
                    write_matrix_block(&mut out, "W", v, w);
                }
            }
            ModelParams::Kernel(km) => {
                for (v, k) in km.kernels().iter().enumerate() {
                    match k {
                        KernelSpec::Linear => {
                            let _ = writeln!(out, "kernel {v} linear");
                        }
                        KernelSpec::Rbf { gamma } => {
                            let _ = writeln!(out, "kernel {v} rbf {}", fmt_f64(*gamma));
                        }
                    }
                }
                for (v, a) in km.atoms().iter().enumerate() {
                    write_matrix_block(&mut out, "A", v, a);
                }
                for (v, z) in km.training_views().iter().enumerate() {
                    write_matrix_block(&mut out, "Z", v, z);
                }
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut r = LineReader {
            lines: text.lines().collect(),
            pos: 0,
            path,
        };
        let head = r.fields()?;
        if head.len() != 2 || head[0] != MAGIC {
            return Err(r.err("not an intact model file"));
        }
        let version: u32 = r.num(head[1])?;
        if version != FORMAT_VERSION {
            return Err(r.err(format!("unsupported format version {version}")));
        }
        let mode = r.keyed("mode")?;
        let kernel_mode = match mode.as_str() {
            "linear" => false,
            "kernel" => true,
            other => return Err(r.err(format!("unknown mode '{other}'"))),
        };
        let m: usize = r.keyed_num("views")?;
        let dims_line = r.keyed_fields("view_dims")?;
        let dims: Vec<usize> = dims_line.iter().map(|s| r.num(s)).collect::<Result<_>>()?;
        if dims.len() != m {
            return Err(r.err(format!("{} view dims for {m} views", dims.len())));
        }
        let d: usize = r.keyed_num("latent_dim")?;
        let n_train: usize = if kernel_mode { r.keyed_num("n_train")? } else { 0 };
        let hp = Hyperparams {
            scale: r.keyed_num("scale")?,
            w_penalty: r.keyed_num("w_penalty")?,
            x_penalty: r.keyed_num("x_penalty")?,
            max_outer: r.keyed_num("max_outer")?,
            max_inner: r.keyed_num("max_inner")?,
            tol_obj: r.keyed_num("tol_obj")?,
            tol_x: r.keyed_num("tol_x")?,
            seed: r.keyed_num("seed")?,
            latent_dim: d,
        };
        hp.validate()?;
        let standardization = match r.keyed("standardization")?.as_str() {
            "none" => None,
            "per-view" => {
                let mut views = Vec::with_capacity(m);
                for (v, &dim) in dims.iter().enumerate() {
                    let mean = r.indexed_values("mean", v, dim)?;
                    let scale = r.indexed_values("std", v, dim)?;
                    views.push(ViewTransform { mean, scale });
                }
                Some(Standardization { views })
            }
            other => return Err(r.err(format!("unknown standardization '{other}'"))),
        };
        let params = if kernel_mode {
            let mut kernels = Vec::with_capacity(m);
            for v in 0..m {
                let f = r.fields()?;
                if f.len() < 3 || f[0] != "kernel" || r.num::<usize>(f[1])? != v {
                    return Err(r.err(format!("expected 'kernel {v} ...'")));
                }
                kernels.push(match (f[2], f.len()) {
                    ("linear", 3) => KernelSpec::Linear,
                    ("rbf", 4) => KernelSpec::Rbf { gamma: r.num(f[3])? },
                    _ => return Err(r.err("kernel must be 'linear' or 'rbf GAMMA'")),
                });
            }
            let atoms = (0..m)
                .map(|v| r.matrix("A", v, n_train, d))
                .collect::<Result<Vec<_>>>()?;
            let train = (0..m)
                .map(|v| r.matrix("Z", v, n_train, dims[v]))
                .collect::<Result<Vec<_>>>()?;
            ModelParams::Kernel(KernelModel::new(atoms, train, kernels)?)
        } else {
            let ws = (0..m)
                .map(|v| r.matrix("W", v, dims[v], d))
                .collect::<Result<Vec<_>>>()?;
            IntactModel::linear(ws, hp)?.params
        };
        let last = r.fields()?;
        if last != ["end"] {
            return Err(r.err("expected 'end'"));
        }
        Ok(Self {
            model: IntactModel {
                params,
                hyperparams: hp,
            },
            standardization,
        })
    }
}

struct LineReader<'a> {
    lines: Vec<&'a str>,
    pos: usize,
    path: &'a Path,
}

impl<'a> LineReader<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.path, self.pos.max(1), msg)
    }

    fn fields(&mut self) -> Result<Vec<&'a str>> {
        let line = self
            .lines
            .get(self.pos)
            .ok_or_else(|| Error::parse(self.path, self.pos + 1, "unexpected end of file"))?;
        self.pos += 1;
        Ok(line.split_whitespace().collect())
    }

    fn num<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse()
            .map_err(|_| self.err(format!("cannot parse '{s}'")))
    }

    fn keyed_fields(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let f = self.fields()?;
        if f.first() != Some(&key) {
            return Err(self.err(format!("expected '{key}'")));
        }
        Ok(f[1..].to_vec())
    }

    fn keyed(&mut self, key: &str) -> Result<String> {
        let f = self.keyed_fields(key)?;
        if f.len() != 1 {
            return Err(self.err(format!("'{key}' takes one value")));
        }
        Ok(f[0].to_string())
    }

    fn keyed_num<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let s = self.keyed(key)?;
        self.num(&s)
    }

    fn indexed_values(&mut self, key: &str, v: usize, len: usize) -> Result<Vec<f64>> {
        let f = self.keyed_fields(key)?;
        if f.is_empty() || self.num::<usize>(f[0])? != v || f.len() != len + 1 {
            return Err(self.err(format!("expected '{key} {v}' with {len} values")));
        }
        f[1..].iter().map(|s| self.num(s)).collect()
    }

    fn matrix(&mut self, name: &str, v: usize, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        let f = self.keyed_fields("matrix")?;
        let ok = f.len() == 4
            && f[0] == name
            && self.num::<usize>(f[1])? == v
            && self.num::<usize>(f[2])? == rows
            && self.num::<usize>(f[3])? == cols;
        if !ok {
            return Err(self.err(format!("expected 'matrix {name} {v} {rows} {cols}'")));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let f = self.fields()?;
            if f.len() != cols {
                return Err(self.err(format!("expected {cols} values")));
            }
            for s in f {
                data.push(self.num::<f64>(s)?);
            }
        }
        Ok(DMatrix::from_row_slice(rows, cols, &data))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let m = DMatrix::from_row_slice(2, 3, &[0.1, -1.0 / 3.0, 1e-300, 2.5e17, -0.0, 7.0]);
        let text = matrix_to_csv(&m, Some("view 0 dims 3"));
        assert!(text.starts_with("# view 0 dims 3\n"));
        let back = parse_matrix_csv(&text, Path::new("m.csv")).unwrap();
        assert_eq!(back, m);
        assert_eq!(matrix_to_csv(&back, Some("view 0 dims 3")), text);
    }

    #[test]
    fn csv_errors() {
        let p = Path::new("x.csv");
        assert!(matches!(parse_matrix_csv("# only header\n", p), Err(Error::EmptyView(_))));
        assert!(matches!(
            parse_matrix_csv("1,2\n3\n", p),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_matrix_csv("1,abc\n", p),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn linear_model_text_round_trip() {
        let ws = vec![
            DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.25, 1.0 / 3.0]),
            DMatrix::from_row_slice(1, 2, &[2.0, 1e-20]),
        ];
        let hp = Hyperparams {
            latent_dim: 2,
            seed: 42,
            ..Default::default()
        };
        let file = ModelFile {
            model: IntactModel::linear(ws, hp).unwrap(),
            standardization: Some(Standardization {
                views: vec![
                    ViewTransform {
                        mean: vec![0.1, 0.2],
                        scale: vec![1.5, 1.0],
                    },
                    ViewTransform::identity(1),
                ],
            }),
        };
        let text = file.to_text();
        let back = ModelFile::parse(&text, Path::new("m.txt")).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.to_text(), text);
    }
}
