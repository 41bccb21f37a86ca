//! C ABI for the `intact` library.
//!
//! Conventions:
//! - Every fallible function returns an [`IntactStatus`]; `INTACT_STATUS_OK` is 0.
//! - On failure, [`intact_last_error`] returns a message for the calling thread.
//! - Objects are opaque handles created by `*_new` / `*_fit` / `*_load`
//!   functions and released with the matching `*_free` function.
//! - Matrices are passed as row-major `double` arrays.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use intact::io::ModelFile;
use intact::{Error, Hyperparams, KernelSpec};
use nalgebra::{DMatrix, DVector};

/// Result codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntactStatus {
    Ok = 0,
    NullPointer = 1,
    ShapeMismatch = 2,
    NonFiniteInput = 3,
    EmptyView = 4,
    NonPositiveScale = 5,
    SingularSystem = 6,
    DivergenceDetected = 7,
    GramNotPsd = 8,
    IndexOutOfRange = 9,
    ZeroRegularizer = 10,
    DegenerateSignal = 11,
    RankDeficient = 12,
    EmptyTrainingSet = 13,
    DimensionMismatch = 14,
    MissingInput = 15,
    InvalidParameter = 16,
    ParseError = 17,
    IoError = 18,
    NegativeResidual = 19,
    InvalidUtf8 = 20,
    BufferTooSmall = 21,
    Panic = 99,
}

impl From<&Error> for IntactStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::ShapeMismatch(_) => IntactStatus::ShapeMismatch,
            Error::NonFiniteInput { .. } => IntactStatus::NonFiniteInput,
            Error::EmptyView(_) => IntactStatus::EmptyView,
            Error::NonPositiveScale(_) => IntactStatus::NonPositiveScale,
            Error::NegativeResidual(_) => IntactStatus::NegativeResidual,
            Error::SingularSystem(_) => IntactStatus::SingularSystem,
            Error::DivergenceDetected { .. } => IntactStatus::DivergenceDetected,
            Error::GramNotPsd { .. } => IntactStatus::GramNotPsd,
            Error::IndexOutOfRange(_) => IntactStatus::IndexOutOfRange,
            Error::ZeroRegularizer => IntactStatus::ZeroRegularizer,
            Error::DegenerateSignal => IntactStatus::DegenerateSignal,
            Error::RankDeficient => IntactStatus::RankDeficient,
            Error::EmptyTrainingSet => IntactStatus::EmptyTrainingSet,
            Error::DimensionMismatch { .. } => IntactStatus::DimensionMismatch,
            Error::MissingInput(_) => IntactStatus::MissingInput,
            Error::InvalidParameter(_) => IntactStatus::InvalidParameter,
            Error::Parse { .. } => IntactStatus::ParseError,
            Error::Io { .. } => IntactStatus::IoError,
        }
    }
}

/// Optimization hyperparameters; see [`intact_hyperparams_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct IntactHyperparams {
    /// Cauchy scale c (> 0).
    pub scale: f64,
    /// C1, penalty on the view maps (>= 0).
    pub w_penalty: f64,
    /// C2, penalty on latent points (>= 0).
    pub x_penalty: f64,
    /// Latent dimension d (>= 1).
    pub latent_dim: usize,
    pub max_outer: usize,
    pub max_inner: usize,
    pub tol_obj: f64,
    pub tol_x: f64,
    pub seed: u64,
}

impl From<IntactHyperparams> for Hyperparams {
    fn from(h: IntactHyperparams) -> Self {
        Hyperparams {
            scale: h.scale,
            w_penalty: h.w_penalty,
            x_penalty: h.x_penalty,
            latent_dim: h.latent_dim,
            max_outer: h.max_outer,
            max_inner: h.max_inner,
            tol_obj: h.tol_obj,
            tol_x: h.tol_x,
            seed: h.seed,
        }
    }
}

impl From<Hyperparams> for IntactHyperparams {
    fn from(h: Hyperparams) -> Self {
        IntactHyperparams {
            scale: h.scale,
            w_penalty: h.w_penalty,
            x_penalty: h.x_penalty,
            latent_dim: h.latent_dim,
            max_outer: h.max_outer,
            max_inner: h.max_inner,
            tol_obj: h.tol_obj,
            tol_x: h.tol_x,
            seed: h.seed,
        }
    }
}

/// Kernel selector for [`intact_kernel_fit`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntactKernel {
    Linear = 0,
    Rbf = 1,
}

/// A validated multi-view dataset.
pub struct IntactDataset {
    inner: intact::MultiViewDataset,
}

/// A trained model (linear or kernel), with the standardization of its training data if any.
pub struct IntactModel {
    inner: ModelFile,
}

/// An n×d latent embedding.
pub struct IntactEmbedding {
    inner: intact::IntactEmbedding,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: IntactStatus, msg: impl Into<String>) -> IntactStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, converting library errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), IntactStatus>) -> IntactStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IntactStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(IntactStatus::Panic, "internal panic"),
    }
}

fn lib_err(e: Error) -> IntactStatus {
    let status = IntactStatus::from(&e);
    fail(status, e.to_string())
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), IntactStatus> {
    if p.is_null() {
        Err(fail(IntactStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn path_arg(path: *const c_char) -> Result<&'static Path, IntactStatus> {
    non_null(path, "path")?;
    let s = CStr::from_ptr(path)
        .to_str()
        .map_err(|_| fail(IntactStatus::InvalidUtf8, "path is not valid UTF-8"))?;
    Ok(Path::new(s))
}

/// Message describing the last failure on this thread, or NULL if the last
/// call succeeded. The pointer stays valid until the next library call on
/// the same thread.
#[no_mangle]
pub extern "C" fn intact_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library defaults: c = 1, C1 = C2 = 1e-4, d = 3, 200 outer / 100 inner
/// iterations, tolerances 1e-8, seed 0.
#[no_mangle]
pub extern "C" fn intact_hyperparams_default() -> IntactHyperparams {
    Hyperparams::default().into()
}

/// Builds a dataset from `n_views` row-major matrices, view v of shape
/// `n × dims[v]`. `labels` may be NULL; otherwise it holds `n` entries.
#[no_mangle]
pub unsafe extern "C" fn intact_dataset_new(
    n_views: usize,
    views: *const *const f64,
    dims: *const usize,
    n: usize,
    labels: *const u32,
    out: *mut *mut IntactDataset,
) -> IntactStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        if n_views > 0 {
            non_null(views, "views")?;
            non_null(dims, "dims")?;
        }
        let mut mats = Vec::with_capacity(n_views);
        for v in 0..n_views {
            let p = *views.add(v);
            let d = *dims.add(v);
            if n * d > 0 {
                non_null(p, "view data")?;
            }
            let data = if n * d > 0 {
                std::slice::from_raw_parts(p, n * d)
            } else {
                &[]
            };
            mats.push(DMatrix::from_row_slice(n, d, data));
        }
        let labels = if labels.is_null() {
            None
        } else {
            Some(std::slice::from_raw_parts(labels, n).to_vec())
        };
        let ds = intact::MultiViewDataset::new(mats, labels).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(IntactDataset { inner: ds }));
        Ok(())
    })
}

/// Replaces every view by its column-standardized version (zero mean, unit
/// standard deviation).
#[no_mangle]
pub unsafe extern "C" fn intact_dataset_standardize(dataset: *mut IntactDataset) -> IntactStatus {
    guard(|| {
        non_null(dataset, "dataset")?;
        let ds = &mut *dataset;
        ds.inner = intact::standardize_views(&ds.inner).0;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn intact_dataset_free(dataset: *mut IntactDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

unsafe fn store_fit(
    result: intact::Result<(intact::IntactModel, intact::IntactEmbedding, intact::FitHistory)>,
    out_model: *mut *mut IntactModel,
    out_embedding: *mut *mut IntactEmbedding,
) -> Result<(), IntactStatus> {
    let (model, emb, _) = result.map_err(lib_err)?;
    *out_model = Box::into_raw(Box::new(IntactModel {
        inner: ModelFile {
            model,
            standardization: None,
        },
    }));
    *out_embedding = Box::into_raw(Box::new(IntactEmbedding { inner: emb }));
    Ok(())
}

/// Fits the linear model. On success `*out_model` and `*out_embedding` own new handles.
#[no_mangle]
pub unsafe extern "C" fn intact_fit(
    dataset: *const IntactDataset,
    hyperparams: *const IntactHyperparams,
    out_model: *mut *mut IntactModel,
    out_embedding: *mut *mut IntactEmbedding,
) -> IntactStatus {
    guard(|| {
        non_null(dataset, "dataset")?;
        non_null(hyperparams, "hyperparams")?;
        non_null(out_model, "out_model")?;
        non_null(out_embedding, "out_embedding")?;
        *out_model = ptr::null_mut();
        *out_embedding = ptr::null_mut();
        let hp: Hyperparams = (*hyperparams).into();
        store_fit(intact::fit(&(*dataset).inner, &hp, None), out_model, out_embedding)
    })
}

/// Fits the kernel model. For `INTACT_KERNEL_RBF`, `gamma <= 0` selects the
/// per-view median heuristic.
#[no_mangle]
pub unsafe extern "C" fn intact_kernel_fit(
    dataset: *const IntactDataset,
    hyperparams: *const IntactHyperparams,
    kernel: IntactKernel,
    gamma: f64,
    out_model: *mut *mut IntactModel,
    out_embedding: *mut *mut IntactEmbedding,
) -> IntactStatus {
    guard(|| {
        non_null(dataset, "dataset")?;
        non_null(hyperparams, "hyperparams")?;
        non_null(out_model, "out_model")?;
        non_null(out_embedding, "out_embedding")?;
        *out_model = ptr::null_mut();
        *out_embedding = ptr::null_mut();
        let hp: Hyperparams = (*hyperparams).into();
        let ds = &(*dataset).inner;
        let kernels = ds
            .views()
            .iter()
            .map(|z| match kernel {
                IntactKernel::Linear => KernelSpec::Linear,
                IntactKernel::Rbf if gamma > 0.0 => KernelSpec::Rbf { gamma },
                IntactKernel::Rbf => KernelSpec::rbf_median(z),
            })
            .collect();
        store_fit(
            intact::kernel::kernel_fit_per_view(ds, &hp, kernels),
            out_model,
            out_embedding,
        )
    })
}

#[no_mangle]
pub unsafe extern "C" fn intact_model_n_views(model: *const IntactModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.model.n_views())
}

#[no_mangle]
pub unsafe extern "C" fn intact_model_latent_dim(model: *const IntactModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.model.latent_dim())
}

/// Feature dimension of view `v`, or 0 if the handle or index is invalid.
#[no_mangle]
pub unsafe extern "C" fn intact_model_view_dim(model: *const IntactModel, v: usize) -> usize {
    model
        .as_ref()
        .and_then(|m| m.inner.model.view_dims().get(v).copied())
        .unwrap_or(0)
}

/// Embeds one new example. `views[v]` points to `intact_model_view_dim(model, v)`
/// values; `out_x` receives `intact_model_latent_dim(model)` values. Inputs are
/// standardized first when the model was saved with a standardization record.
#[no_mangle]
pub unsafe extern "C" fn intact_model_embed(
    model: *const IntactModel,
    views: *const *const f64,
    out_x: *mut f64,
    out_len: usize,
) -> IntactStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(views, "views")?;
        non_null(out_x, "out_x")?;
        let file = &(*model).inner;
        let d = file.model.latent_dim();
        if out_len < d {
            return Err(fail(
                IntactStatus::BufferTooSmall,
                format!("out_x holds {out_len} values, need {d}"),
            ));
        }
        let mut z = Vec::with_capacity(file.model.n_views());
        for (v, dim) in file.model.view_dims().into_iter().enumerate() {
            let p = *views.add(v);
            non_null(p, "view vector")?;
            z.push(DVector::from_column_slice(std::slice::from_raw_parts(p, dim)));
        }
        let z = match &file.standardization {
            Some(s) => s.apply_example(&z),
            None => z,
        };
        let x = intact::inference::embed_example(&z, &file.model).map_err(lib_err)?;
        std::slice::from_raw_parts_mut(out_x, d).copy_from_slice(x.as_slice());
        Ok(())
    })
}

/// Writes the model to a text file.
#[no_mangle]
pub unsafe extern "C" fn intact_model_save(
    model: *const IntactModel,
    path: *const c_char,
) -> IntactStatus {
    guard(|| {
        non_null(model, "model")?;
        let path = path_arg(path)?;
        (*model).inner.save(path).map_err(lib_err)
    })
}

/// Reads a model file written by [`intact_model_save`] or `intact train`.
#[no_mangle]
pub unsafe extern "C" fn intact_model_load(
    path: *const c_char,
    out_model: *mut *mut IntactModel,
) -> IntactStatus {
    guard(|| {
        non_null(out_model, "out_model")?;
        *out_model = ptr::null_mut();
        let path = path_arg(path)?;
        let file = ModelFile::load(path).map_err(lib_err)?;
        *out_model = Box::into_raw(Box::new(IntactModel { inner: file }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn intact_model_free(model: *mut IntactModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of rows (`n`) and columns (`d`) of an embedding.
#[no_mangle]
pub unsafe extern "C" fn intact_embedding_shape(
    embedding: *const IntactEmbedding,
    out_n: *mut usize,
    out_d: *mut usize,
) -> IntactStatus {
    guard(|| {
        non_null(embedding, "embedding")?;
        non_null(out_n, "out_n")?;
        non_null(out_d, "out_d")?;
        *out_n = (*embedding).inner.n_examples();
        *out_d = (*embedding).inner.latent_dim();
        Ok(())
    })
}

/// Copies the embedding into `out` in row-major order; `len` must be at least `n·d`.
#[no_mangle]
pub unsafe extern "C" fn intact_embedding_copy(
    embedding: *const IntactEmbedding,
    out: *mut f64,
    len: usize,
) -> IntactStatus {
    guard(|| {
        non_null(embedding, "embedding")?;
        non_null(out, "out")?;
        let x = (*embedding).inner.matrix();
        let need = x.nrows() * x.ncols();
        if len < need {
            return Err(fail(
                IntactStatus::BufferTooSmall,
                format!("buffer holds {len} values, need {need}"),
            ));
        }
        let dst = std::slice::from_raw_parts_mut(out, need);
        for (i, row) in x.row_iter().enumerate() {
            for (j, &val) in row.iter().enumerate() {
                dst[i * x.ncols() + j] = val;
            }
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn intact_embedding_free(embedding: *mut IntactEmbedding) {
    if !embedding.is_null() {
        drop(Box::from_raw(embedding));
    }
}
