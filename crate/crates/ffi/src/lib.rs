//! C ABI over the mvfusion library.
//!
//! Every fallible function returns an [`MvStatus`]; on failure the message is
//! kept per thread and read with [`mv_last_error`]. Objects are opaque handles
//! released by their `_free` function. Matrices follow the library layout:
//! rows are features, columns are samples, and flat buffers are row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::slice;

use mvfusion::cca::{self, CcaTransform, FuseMode};
use mvfusion::matrixio::{self, FeatureMatrix, FeatureSet, MatrixFormat};
use mvfusion::mcca::{self, MccaPlan};
use mvfusion::metrics;
use mvfusion::netspec::{self, ConvStackSpec};
use mvfusion::noise::{self, ImagePatch};
use mvfusion::svm::{self, Loss, SvmConfig, SvmModel};
use mvfusion::Error;
use nalgebra::{DMatrix, DVector};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    BufferSize = 3,
    Config = 10,
    Range = 11,
    Parse = 12,
    Dimension = 13,
    Data = 14,
    Io = 15,
    Label = 16,
    Empty = 17,
    Degenerate = 20,
    Singular = 21,
    Unfitted = 22,
    Numeric = 23,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MvMatrixFormat {
    Csv = 0,
    Fmat = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MvFuseMode {
    Sum = 0,
    Concat = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MvLoss {
    HingeL1 = 1,
    HingeL2 = 2,
}

/// Training settings; fill with [`mv_svm_config_default`] then adjust.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MvSvmConfig {
    pub c_penalty: f64,
    pub loss: MvLoss,
    pub batch_size: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    pub lr_initial: f64,
    pub lr_decay_factor: f64,
    pub max_lr_decays: usize,
    pub patience_epochs: usize,
    pub max_epochs: usize,
    pub plateau_rel_tol: f64,
    pub seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MvClassMetrics {
    pub single_accuracy: f64,
    pub error_single: f64,
    pub total_accuracy: f64,
    pub error_total: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub fpr: f64,
    pub degenerate: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MvOverallMetrics {
    pub accuracy: f64,
    pub error: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub fpr: f64,
}

pub struct MvMatrix(FeatureMatrix);
pub struct MvCca(CcaTransform);
pub struct MvMccaPlan(MccaPlan);
pub struct MvSvm(SvmModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MvStatus {
    match e.root() {
        Error::Config(_) => MvStatus::Config,
        Error::Range(_) => MvStatus::Range,
        Error::Parse(_) => MvStatus::Parse,
        Error::Dimension(_) => MvStatus::Dimension,
        Error::Data(_) => MvStatus::Data,
        Error::Io { .. } => MvStatus::Io,
        Error::Label(_) => MvStatus::Label,
        Error::Empty(_) => MvStatus::Empty,
        Error::Degenerate(_) => MvStatus::Degenerate,
        Error::Singular(_) => MvStatus::Singular,
        Error::Unfitted(_) => MvStatus::Unfitted,
        Error::Numeric(_) => MvStatus::Numeric,
        Error::Stage { .. } => unreachable!("root() strips stage wrappers"),
    }
}

/// Status and message handed back across the boundary.
struct Fail(MvStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MvStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            MvStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref()
        .ok_or_else(|| Fail(MvStatus::NullPointer, format!("{what} is null")))
}

unsafe fn input<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail(MvStatus::NullPointer, format!("{what} is null")));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Fail(MvStatus::NullPointer, format!("{what} is null")));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

fn need(len: usize, want: usize, what: &str) -> Result<(), Fail> {
    if len < want {
        return Err(Fail(MvStatus::BufferSize, format!("{what} holds {len}, needs {want}")));
    }
    Ok(())
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail(MvStatus::NullPointer, "output handle is null".into()));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn path(p: *const c_char) -> Result<PathBuf, Fail> {
    let s = deref(p, "path")?;
    let s = CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Fail(MvStatus::InvalidUtf8, "path is not valid UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

fn fuse_mode(m: MvFuseMode) -> FuseMode {
    match m {
        MvFuseMode::Sum => FuseMode::Sum,
        MvFuseMode::Concat => FuseMode::Concat,
    }
}

fn set(m: &MvMatrix) -> FeatureSet {
    FeatureSet::new("view", m.0.clone())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `data` must hold `rows * cols` doubles in row-major order; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mv_matrix_new(
    rows: usize,
    cols: usize,
    data: *const f64,
    out: *mut *mut MvMatrix,
) -> MvStatus {
    guard(|| {
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Fail(MvStatus::Dimension, "matrix size overflows".into()))?;
        let values = input(data, len, "data")?;
        let m = FeatureMatrix::new(DMatrix::from_row_slice(rows, cols, values))?;
        put(out, MvMatrix(m))
    })
}

/// # Safety
/// `m` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mv_matrix_rows(m: *const MvMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.data().nrows())
}

/// # Safety
/// `m` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mv_matrix_cols(m: *const MvMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.data().ncols())
}

/// Copies the matrix row-major into `out`, which holds `len` doubles.
///
/// # Safety
/// `m` must be a live handle; `out` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mv_matrix_copy(m: *const MvMatrix, out: *mut f64, len: usize) -> MvStatus {
    guard(|| {
        let data = deref(m, "matrix")?.0.data();
        need(len, data.len(), "output buffer")?;
        let buf = output(out, len, "output buffer")?;
        for (k, v) in data.transpose().iter().enumerate() {
            buf[k] = *v;
        }
        Ok(())
    })
}

/// # Safety
/// `file` must be a NUL-terminated path; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mv_matrix_load(
    file: *const c_char,
    format: MvMatrixFormat,
    out: *mut *mut MvMatrix,
) -> MvStatus {
    guard(|| {
        let fmt = match format {
            MvMatrixFormat::Csv => MatrixFormat::Csv,
            MvMatrixFormat::Fmat => MatrixFormat::Fmat,
        };
        put(out, MvMatrix(matrixio::load_matrix(path(file)?, fmt)?))
    })
}

/// # Safety
/// `m` must be a live handle; `file` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn mv_matrix_save(
    m: *const MvMatrix,
    file: *const c_char,
    format: MvMatrixFormat,
) -> MvStatus {
    guard(|| {
        let fmt = match format {
            MvMatrixFormat::Csv => MatrixFormat::Csv,
            MvMatrixFormat::Fmat => MatrixFormat::Fmat,
        };
        Ok(matrixio::save_matrix(&deref(m, "matrix")?.0, path(file)?, fmt)?)
    })
}

/// Numerical rank; `tol <= 0` selects the default tolerance.
///
/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mv_matrix_rank(m: *const MvMatrix, tol: f64, out: *mut usize) -> MvStatus {
    guard(|| {
        let tol = (tol > 0.0).then_some(tol);
        let r = matrixio::numerical_rank(deref(m, "matrix")?.0.data(), tol);
        output(out, 1, "out")?[0] = r;
        Ok(())
    })
}

/// # Safety
/// `m` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mv_matrix_free(m: *mut MvMatrix) {
    free(m)
}

/// # Safety
/// `x`, `y` must be live handles with equal column counts; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mv_cca_fit(
    x: *const MvMatrix,
    y: *const MvMatrix,
    ridge_rel: f64,
    out: *mut *mut MvCca,
) -> MvStatus {
    guard(|| {
        let t = cca::fit_cca(&set(deref(x, "x")?), &set(deref(y, "y")?), ridge_rel)?;
        put(out, MvCca(t))
    })
}

/// Number of canonical pairs kept, 0 for null.
///
/// # Safety
/// `t` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mv_cca_rank(t: *const MvCca) -> usize {
    t.as_ref().map_or(0, |t| t.0.r())
}

/// Copies the canonical correlations (non-increasing) into `out`.
///
/// # Safety
/// `t` must be a live handle; `out` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mv_cca_correlations(t: *const MvCca, out: *mut f64, len: usize) -> MvStatus {
    guard(|| {
        let g = &deref(t, "transform")?.0.gamma;
        need(len, g.len(), "output buffer")?;
        output(out, len, "output buffer")?[..g.len()].copy_from_slice(g.as_slice());
        Ok(())
    })
}

/// Projects `x` and `y` and fuses the canonical variates.
///
/// # Safety
/// All handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mv_cca_fuse(
    t: *const MvCca,
    x: *const MvMatrix,
    y: *const MvMatrix,
    mode: MvFuseMode,
    out: *mut *mut MvMatrix,
) -> MvStatus {
    guard(|| {
        let t = &deref(t, "transform")?.0;
        let v = cca::project(t, deref(x, "x")?.0.data(), deref(y, "y")?.0.data())?;
        let fused = cca::fuse(&v, fuse_mode(mode))?;
        put(out, MvMatrix(FeatureMatrix::new(fused.data)?))
    })
}

/// # Safety
/// `t` must be a live handle; `file` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn mv_cca_save(t: *const MvCca, file: *const c_char) -> MvStatus {
    guard(|| {
        let p = path(file)?;
        std::fs::write(&p, deref(t, "transform")?.0.to_bytes()).map_err(|e| Error::io(p, e))?;
        Ok(())
    })
}

/// # Safety
/// `file` must be a NUL-terminated path; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mv_cca_load(file: *const c_char, out: *mut *mut MvCca) -> MvStatus {
    guard(|| {
        let p = path(file)?;
        let bytes = std::fs::read(&p).map_err(|e| Error::io(p, e))?;
        put(out, MvCca(CcaTransform::from_bytes(&bytes)?))
    })
}

/// # Safety
/// `t` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mv_cca_free(t: *mut MvCca) {
    free(t)
}

unsafe fn views<'a>(views: *const *const MvMatrix, count: usize) -> Result<Vec<&'a MvMatrix>, Fail> {
    input(views, count, "views")?
        .iter()
        .enumerate()
        .map(|(i, &v)| deref(v, &format!("view {i}")))
        .collect()
}

/// Fits the multi-set fusion on `count` views and returns the plan and the
/// fused training features.
///
/// # Safety
/// `views` must hold `count` live handles; `plan_out` and `fused_out` writable.
#[no_mangle]
pub unsafe extern "C" fn mv_mcca_fit(
    views_ptr: *const *const MvMatrix,
    count: usize,
    mode: MvFuseMode,
    ridge_rel: f64,
    plan_out: *mut *mut MvMccaPlan,
    fused_out: *mut *mut MvMatrix,
) -> MvStatus {
    guard(|| {
        if plan_out.is_null() || fused_out.is_null() {
            return Err(Fail(MvStatus::NullPointer, "output handle is null".into()));
        }
        let sets: Vec<FeatureSet> = views(views_ptr, count)?.into_iter().map(set).collect();
        let (plan, fused) = mcca::fit_mcca(&sets, fuse_mode(mode), ridge_rel)?;
        let fused = FeatureMatrix::new(fused.data)?;
        put(plan_out, MvMccaPlan(plan))?;
        put(fused_out, MvMatrix(fused))
    })
}

/// # Safety
/// `plan` must be live; `views` must hold `count` live handles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mv_mcca_apply(
    plan: *const MvMccaPlan,
    views_ptr: *const *const MvMatrix,
    count: usize,
    out: *mut *mut MvMatrix,
) -> MvStatus {
    guard(|| {
        let plan = &deref(plan, "plan")?.0;
        let raws: Vec<DMatrix<f64>> = views(views_ptr, count)?.into_iter().map(|m| m.0.data().clone()).collect();
        let fused = mcca::apply_mcca(plan, &raws)?;
        put(out, MvMatrix(FeatureMatrix::new(fused.data)?))
    })
}

/// Number of fusion stages, 0 for null.
///
/// # Safety
/// `plan` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mv_mcca_stage_count(plan: *const MvMccaPlan) -> usize {
    plan.as_ref().map_or(0, |p| p.0.stages.len())
}

/// Writes stage `stage`'s input set ids (inputs are `0..λ`, stage outputs
/// `λ..`).
///
/// # Safety
/// `plan` must be live; `left` and `right` writable.
#[no_mangle]
pub unsafe extern "C" fn mv_mcca_stage_pair(
    plan: *const MvMccaPlan,
    stage: usize,
    left: *mut usize,
    right: *mut usize,
) -> MvStatus {
    guard(|| {
        let plan = &deref(plan, "plan")?.0;
        let s = plan
            .stages
            .get(stage)
            .ok_or_else(|| Fail(MvStatus::Range, format!("stage {stage} of {}", plan.stages.len())))?;
        output(left, 1, "left")?[0] = s.left;
        output(right, 1, "right")?[0] = s.right;
        Ok(())
    })
}

/// # Safety
/// `plan` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mv_mcca_free(plan: *mut MvMccaPlan) {
    free(plan)
}

impl From<SvmConfig> for MvSvmConfig {
    fn from(c: SvmConfig) -> Self {
        MvSvmConfig {
            c_penalty: c.c_penalty,
            loss: match c.loss {
                Loss::HingeL1 => MvLoss::HingeL1,
                Loss::HingeL2 => MvLoss::HingeL2,
            },
            batch_size: c.batch_size,
            momentum: c.momentum,
            weight_decay: c.weight_decay,
            lr_initial: c.lr_initial,
            lr_decay_factor: c.lr_decay_factor,
            max_lr_decays: c.max_lr_decays,
            patience_epochs: c.patience_epochs,
            max_epochs: c.max_epochs,
            plateau_rel_tol: c.plateau_rel_tol,
            seed: c.seed,
        }
    }
}

impl From<MvSvmConfig> for SvmConfig {
    fn from(c: MvSvmConfig) -> Self {
        SvmConfig {
            c_penalty: c.c_penalty,
            loss: match c.loss {
                MvLoss::HingeL1 => Loss::HingeL1,
                MvLoss::HingeL2 => Loss::HingeL2,
            },
            batch_size: c.batch_size,
            momentum: c.momentum,
            weight_decay: c.weight_decay,
            lr_initial: c.lr_initial,
            lr_decay_factor: c.lr_decay_factor,
            max_lr_decays: c.max_lr_decays,
            patience_epochs: c.patience_epochs,
            max_epochs: c.max_epochs,
            plateau_rel_tol: c.plateau_rel_tol,
            seed: c.seed,
        }
    }
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mv_svm_config_default(out: *mut MvSvmConfig) -> MvStatus {
    guard(|| {
        output(out, 1, "out")?[0] = SvmConfig::default().into();
        Ok(())
    })
}

/// One-vs-rest training on the columns of `data`.
///
/// # Safety
/// `data` must be live; `labels` must hold one entry per column; `cfg` readable; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mv_svm_train(
    data: *const MvMatrix,
    labels: *const usize,
    n_labels: usize,
    classes: usize,
    cfg: *const MvSvmConfig,
    out: *mut *mut MvSvm,
) -> MvStatus {
    guard(|| {
        let data = deref(data, "data")?.0.data();
        let labels = input(labels, n_labels, "labels")?;
        let cfg: SvmConfig = (*deref(cfg, "config")?).into();
        put(out, MvSvm(svm::train_multiclass(data, labels, classes, &cfg)?))
    })
}

/// Predicted class per column of `data` into `labels_out`.
///
/// # Safety
/// `model` and `data` must be live; `labels_out` must hold `len` writable entries.
#[no_mangle]
pub unsafe extern "C" fn mv_svm_predict(
    model: *const MvSvm,
    data: *const MvMatrix,
    labels_out: *mut usize,
    len: usize,
) -> MvStatus {
    guard(|| {
        let pred = deref(model, "model")?.0.predict(deref(data, "data")?.0.data())?;
        need(len, pred.labels.len(), "label buffer")?;
        output(labels_out, len, "label buffer")?[..pred.labels.len()].copy_from_slice(&pred.labels);
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mv_svm_classes(model: *const MvSvm) -> usize {
    model.as_ref().map_or(0, |m| m.0.classes())
}

/// # Safety
/// `model` must be live; `file` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn mv_svm_save(model: *const MvSvm, file: *const c_char) -> MvStatus {
    guard(|| {
        let p = path(file)?;
        std::fs::write(&p, deref(model, "model")?.0.to_bytes()).map_err(|e| Error::io(p, e))?;
        Ok(())
    })
}

/// # Safety
/// `file` must be a NUL-terminated path; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mv_svm_load(file: *const c_char, out: *mut *mut MvSvm) -> MvStatus {
    guard(|| {
        let p = path(file)?;
        let bytes = std::fs::read(&p).map_err(|e| Error::io(p, e))?;
        put(out, MvSvm(SvmModel::from_bytes(&bytes)?))
    })
}

/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mv_svm_free(model: *mut MvSvm) {
    free(model)
}

/// Gradient of one sample's hinge term with respect to its input `m`.
///
/// # Safety
/// `w`, `m` and `out` must each hold `dim` doubles; `cfg` readable.
#[no_mangle]
pub unsafe extern "C" fn mv_svm_grad_input(
    w: *const f64,
    m: *const f64,
    dim: usize,
    target: f64,
    cfg: *const MvSvmConfig,
    out: *mut f64,
) -> MvStatus {
    guard(|| {
        let w = DVector::from_column_slice(input(w, dim, "w")?);
        let m = DVector::from_column_slice(input(m, dim, "m")?);
        let cfg: SvmConfig = (*deref(cfg, "config")?).into();
        let g = svm::grad_wrt_input(&w, &m, target, &cfg);
        output(out, dim, "out")?.copy_from_slice(g.as_slice());
        Ok(())
    })
}

/// Per-class metrics into `per_class` (`classes` entries) and the overall
/// row into `overall`; either output may be null.
///
/// # Safety
/// `actual` and `predicted` must hold `n` entries; non-null outputs writable.
#[no_mangle]
pub unsafe extern "C" fn mv_metrics(
    actual: *const usize,
    predicted: *const usize,
    n: usize,
    classes: usize,
    per_class: *mut MvClassMetrics,
    overall: *mut MvOverallMetrics,
) -> MvStatus {
    guard(|| {
        let cm = metrics::confusion_matrix(input(actual, n, "actual")?, input(predicted, n, "predicted")?, classes)?;
        if !per_class.is_null() {
            let out = output(per_class, classes, "per_class")?;
            for (slot, m) in out.iter_mut().zip(metrics::per_class_metrics(&cm)?) {
                *slot = MvClassMetrics {
                    single_accuracy: m.single_accuracy,
                    error_single: m.error_single,
                    total_accuracy: m.total_accuracy,
                    error_total: m.error_total,
                    sensitivity: m.sensitivity,
                    specificity: m.specificity,
                    precision: m.precision,
                    fpr: m.fpr,
                    degenerate: m.degenerate,
                };
            }
        }
        if !overall.is_null() {
            let o = metrics::overall_metrics(&cm)?;
            *overall = MvOverallMetrics {
                accuracy: o.accuracy,
                error: o.error,
                sensitivity: o.sensitivity,
                specificity: o.specificity,
                precision: o.precision,
                fpr: o.fpr,
            };
        }
        Ok(())
    })
}

/// Weight count `depth · k² · channels²` of a conv stack.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mv_netspec_params(
    filter_size: u64,
    depth: u64,
    channels: u64,
    out: *mut u64,
) -> MvStatus {
    guard(|| {
        let spec = ConvStackSpec::new(filter_size, depth, channels)?;
        output(out, 1, "out")?[0] = netspec::stack_params(&spec);
        Ok(())
    })
}

/// Receptive field of `count` layers with the given filter sizes and strides.
///
/// # Safety
/// `filters` and `strides` must hold `count` entries; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mv_netspec_receptive_field(
    filters: *const u64,
    strides: *const u64,
    count: usize,
    out: *mut u64,
) -> MvStatus {
    guard(|| {
        let layers: Vec<(u64, u64)> = input(filters, count, "filters")?
            .iter()
            .copied()
            .zip(input(strides, count, "strides")?.iter().copied())
            .collect();
        output(out, 1, "out")?[0] = netspec::effective_receptive_field(&layers)?;
        Ok(())
    })
}

/// Replaces `floor(level·h·w)` pixels of a row-major `h × w` patch with
/// uniform draws over `[lo, hi]`, writing the result to `out`.
///
/// # Safety
/// `pixels` and `out` must each hold `h * w` doubles.
#[no_mangle]
pub unsafe extern "C" fn mv_noise_inject(
    pixels: *const f64,
    h: usize,
    w: usize,
    lo: f64,
    hi: f64,
    level: f64,
    seed: u64,
    out: *mut f64,
) -> MvStatus {
    guard(|| {
        let len = h
            .checked_mul(w)
            .ok_or_else(|| Fail(MvStatus::Dimension, "patch size overflows".into()))?;
        let img = ImagePatch::with_range(DMatrix::from_row_slice(h, w, input(pixels, len, "pixels")?), lo, hi)?;
        let noisy = noise::inject_noise(&img, level, seed)?;
        let buf = output(out, len, "out")?;
        for (k, v) in noisy.pixels.transpose().iter().enumerate() {
            buf[k] = *v;
        }
        Ok(())
    })
}
