//! C interface to `midas_ll1`.
//!
//! All objects cross the boundary as opaque handles created by a
//! `midas_*_new` / `midas_*_read` call and released with the matching
//! `midas_*_free`. Fallible functions return a [`MidasStatus`]; on failure
//! [`midas_last_error`] describes the problem for the calling thread.
//! Dense data is exchanged column-major (first index fastest), matching the
//! `DTENSOR` file layout.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use midas_ll1::io::{parse_config, read_config, read_tensor, write_tensor};
use midas_ll1::metrics;
use midas_ll1::model::reconstruct;
use midas_ll1::{
    DenseTensor3, EstimatorKind, LL1Factors, MidasError, Mode, RankVector, RunTrace, SolverConfig, StepSize,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MidasStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    InvalidConfig = 4,
    Diverged = 5,
    Io = 6,
    Format = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MidasEstimator {
    Sgd = 0,
    Saga = 1,
    Sarah = 2,
}

/// One trace row. `lyapunov_surrogate` is NaN when it was not recorded.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MidasTraceRecord {
    pub epoch: u64,
    pub iter: u64,
    pub phi: f64,
    pub f: f64,
    pub elapsed_s: f64,
    pub step_norm: f64,
    pub lyapunov_surrogate: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MidasMetrics {
    pub psnr: f64,
    pub rmse: f64,
    pub sam: f64,
    pub cc: f64,
    pub sam_skipped: u64,
    pub cc_skipped: u64,
}

pub struct MidasTensor(DenseTensor3);
pub struct MidasConfig(SolverConfig);
pub struct MidasFactors(LL1Factors);
pub struct MidasTrace(RunTrace);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: MidasStatus, msg: impl Into<String>) -> MidasStatus {
    set_error(msg.into());
    status
}

fn status_of(err: &MidasError) -> MidasStatus {
    match err {
        MidasError::Shape(_)
        | MidasError::InvalidMode(_)
        | MidasError::FiberOutOfRange { .. }
        | MidasError::InvalidBatch(_) => MidasStatus::ShapeMismatch,
        MidasError::Config(_) | MidasError::Parse { .. } | MidasError::Uninitialized(_) => MidasStatus::InvalidConfig,
        MidasError::NonFinite(_) | MidasError::NegativeTensor => MidasStatus::InvalidArgument,
        MidasError::Diverged { .. } => MidasStatus::Diverged,
        MidasError::Io { .. } => MidasStatus::Io,
        MidasError::Format { .. } => MidasStatus::Format,
    }
}

/// Runs `body`, mapping library errors and panics to status codes.
fn guard(body: impl FnOnce() -> Result<(), MidasStatus>) -> MidasStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            MidasStatus::Ok
        }
        Ok(Err(status)) => status,
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(MidasStatus::Panic, format!("internal error: {msg}"))
        }
    }
}

fn lib<T>(r: midas_ll1::Result<T>) -> Result<T, MidasStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, MidasStatus> {
    p.as_ref().ok_or_else(|| fail(MidasStatus::NullPointer, format!("{what} is null")))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, MidasStatus> {
    p.as_mut().ok_or_else(|| fail(MidasStatus::NullPointer, format!("{what} is null")))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, MidasStatus> {
    let s = deref(p, "path")?;
    let s = CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(MidasStatus::InvalidArgument, "path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), MidasStatus> {
    let slot = deref_mut(out, "output pointer")?;
    *slot = Box::into_raw(Box::new(value));
    Ok(())
}

fn mode_arg(mode: u32) -> Result<Mode, MidasStatus> {
    lib(Mode::from_number(mode as usize))
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next `midas_*` call on the same thread.
#[no_mangle]
pub extern "C" fn midas_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

// ---- tensors ----

/// Copies `i1 * i2 * i3` column-major values into a new tensor.
///
/// # Safety
/// `data` must point to `i1 * i2 * i3` readable doubles; `out` must be a
/// valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn midas_tensor_new(
    i1: usize,
    i2: usize,
    i3: usize,
    data: *const f64,
    out: *mut *mut MidasTensor,
) -> MidasStatus {
    guard(|| {
        let data = deref(data, "data")?;
        let len = i1
            .checked_mul(i2)
            .and_then(|n| n.checked_mul(i3))
            .ok_or_else(|| fail(MidasStatus::InvalidArgument, "dimensions overflow"))?;
        let values = std::slice::from_raw_parts(data, len).to_vec();
        let t = lib(DenseTensor3::new([i1, i2, i3], values))?;
        put(out, MidasTensor(t))
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn midas_tensor_read(path: *const c_char, out: *mut *mut MidasTensor) -> MidasStatus {
    guard(|| {
        let t = lib(read_tensor(path_arg(path)?))?;
        put(out, MidasTensor(t))
    })
}

/// # Safety
/// `t` must be a live tensor handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn midas_tensor_write(t: *const MidasTensor, path: *const c_char) -> MidasStatus {
    guard(|| {
        let t = deref(t, "tensor")?;
        lib(write_tensor(path_arg(path)?, &t.0))
    })
}

/// Writes the three dimensions to `dims`.
///
/// # Safety
/// `t` must be a live tensor handle; `dims` must point to 3 writable sizes.
#[no_mangle]
pub unsafe extern "C" fn midas_tensor_dims(t: *const MidasTensor, dims: *mut usize) -> MidasStatus {
    guard(|| {
        let t = deref(t, "tensor")?;
        deref_mut(dims, "dims")?;
        std::slice::from_raw_parts_mut(dims, 3).copy_from_slice(&t.0.dims());
        Ok(())
    })
}

/// Borrowed pointer to the column-major values, valid while `t` lives.
///
/// # Safety
/// `t` must be a live tensor handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn midas_tensor_data(t: *const MidasTensor) -> *const f64 {
    t.as_ref().map_or(ptr::null(), |t| t.0.data().as_ptr())
}

/// # Safety
/// `t` must be NULL or a handle from this library that was not freed yet.
#[no_mangle]
pub unsafe extern "C" fn midas_tensor_free(t: *mut MidasTensor) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

// ---- configs ----

/// Default configuration for the given block ranks.
///
/// # Safety
/// `ranks` must point to `terms` readable sizes; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn midas_config_new(
    ranks: *const usize,
    terms: usize,
    out: *mut *mut MidasConfig,
) -> MidasStatus {
    guard(|| {
        let ranks = deref(ranks, "ranks")?;
        let ranks = std::slice::from_raw_parts(ranks, terms).to_vec();
        let ranks = lib(RankVector::new(ranks))?;
        put(out, MidasConfig(SolverConfig::new(ranks)))
    })
}

/// Parses `key = value` configuration text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn midas_config_parse(text: *const c_char, out: *mut *mut MidasConfig) -> MidasStatus {
    guard(|| {
        let text = CStr::from_ptr(deref(text, "text")?)
            .to_str()
            .map_err(|_| fail(MidasStatus::InvalidArgument, "config text is not valid UTF-8"))?;
        let c = lib(parse_config(text, std::path::Path::new("<string>")))?;
        put(out, MidasConfig(c))
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn midas_config_read(path: *const c_char, out: *mut *mut MidasConfig) -> MidasStatus {
    guard(|| {
        let c = lib(read_config(path_arg(path)?))?;
        put(out, MidasConfig(c))
    })
}

/// # Safety
/// `c` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn midas_config_set_seed(c: *mut MidasConfig, seed: u64) -> MidasStatus {
    guard(|| {
        deref_mut(c, "config")?.0.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `c` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn midas_config_set_epochs(c: *mut MidasConfig, epochs: usize) -> MidasStatus {
    guard(|| {
        deref_mut(c, "config")?.0.epochs = epochs;
        Ok(())
    })
}

/// Sets the inertial depth `t`.
///
/// # Safety
/// `c` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn midas_config_set_depth(c: *mut MidasConfig, depth: usize) -> MidasStatus {
    guard(|| {
        deref_mut(c, "config")?.0.depth = depth;
        Ok(())
    })
}

/// Constant step `eta > 0`, or `eta == 0` for the per-block `1/L` rule.
///
/// # Safety
/// `c` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn midas_config_set_step(c: *mut MidasConfig, eta: f64) -> MidasStatus {
    guard(|| {
        let c = deref_mut(c, "config")?;
        c.0.step = if eta == 0.0 {
            StepSize::InverseLipschitz
        } else if eta > 0.0 && eta.is_finite() {
            StepSize::Constant(eta)
        } else {
            return Err(fail(MidasStatus::InvalidArgument, format!("step size must be >= 0, got {eta}")));
        };
        Ok(())
    })
}

/// Fiber batch size; 0 restores the `2 * max L_r` default.
///
/// # Safety
/// `c` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn midas_config_set_batch_size(c: *mut MidasConfig, batch: usize) -> MidasStatus {
    guard(|| {
        deref_mut(c, "config")?.0.batch_size = (batch > 0).then_some(batch);
        Ok(())
    })
}

/// # Safety
/// `c` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn midas_config_set_estimator(c: *mut MidasConfig, kind: MidasEstimator) -> MidasStatus {
    guard(|| {
        deref_mut(c, "config")?.0.estimator = match kind {
            MidasEstimator::Sgd => EstimatorKind::Sgd,
            MidasEstimator::Saga => EstimatorKind::Saga,
            MidasEstimator::Sarah => EstimatorKind::Sarah { period: None },
        };
        Ok(())
    })
}

/// # Safety
/// `c` must be NULL or a handle from this library that was not freed yet.
#[no_mangle]
pub unsafe extern "C" fn midas_config_free(c: *mut MidasConfig) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

// ---- solving ----

/// Runs the inertial stochastic solver. `out_trace` may be NULL.
///
/// # Safety
/// `t` and `c` must be live handles; `out_factors` a valid handle slot;
/// `out_trace` NULL or a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn midas_decompose(
    t: *const MidasTensor,
    c: *const MidasConfig,
    out_factors: *mut *mut MidasFactors,
    out_trace: *mut *mut MidasTrace,
) -> MidasStatus {
    guard(|| {
        let t = deref(t, "tensor")?;
        let c = deref(c, "config")?;
        deref_mut(out_factors, "output pointer")?;
        let (factors, trace) = lib(midas_ll1::run(&c.0, &t.0))?;
        put(out_factors, MidasFactors(factors))?;
        if !out_trace.is_null() {
            put(out_trace, MidasTrace(trace))?;
        }
        Ok(())
    })
}

/// Shape of factor `mode` (1, 2 or 3).
///
/// # Safety
/// `f` must be a live factors handle; `rows` and `cols` writable.
#[no_mangle]
pub unsafe extern "C" fn midas_factors_shape(
    f: *const MidasFactors,
    mode: u32,
    rows: *mut usize,
    cols: *mut usize,
) -> MidasStatus {
    guard(|| {
        let f = deref(f, "factors")?;
        let (r, c) = f.0.factor(mode_arg(mode)?).dim();
        *deref_mut(rows, "rows")? = r;
        *deref_mut(cols, "cols")? = c;
        Ok(())
    })
}

/// Copies factor `mode` column-major into `buf`, which holds `capacity`
/// doubles.
///
/// # Safety
/// `f` must be a live factors handle; `buf` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn midas_factors_copy(
    f: *const MidasFactors,
    mode: u32,
    buf: *mut f64,
    capacity: usize,
) -> MidasStatus {
    guard(|| {
        let f = deref(f, "factors")?;
        let m = f.0.factor(mode_arg(mode)?);
        deref_mut(buf, "buffer")?;
        if capacity < m.len() {
            return Err(fail(
                MidasStatus::InvalidArgument,
                format!("buffer holds {capacity} values, factor needs {}", m.len()),
            ));
        }
        let out = std::slice::from_raw_parts_mut(buf, m.len());
        for (slot, v) in out.iter_mut().zip(m.t().iter()) {
            *slot = *v;
        }
        Ok(())
    })
}

/// # Safety
/// `f` must be a live factors handle; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn midas_factors_reconstruct(f: *const MidasFactors, out: *mut *mut MidasTensor) -> MidasStatus {
    guard(|| {
        let f = deref(f, "factors")?;
        put(out, MidasTensor(reconstruct(&f.0)))
    })
}

/// # Safety
/// `f` must be NULL or a handle from this library that was not freed yet.
#[no_mangle]
pub unsafe extern "C" fn midas_factors_free(f: *mut MidasFactors) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

// ---- traces ----

/// Number of rows; 0 for NULL.
///
/// # Safety
/// `tr` must be NULL or a live trace handle.
#[no_mangle]
pub unsafe extern "C" fn midas_trace_len(tr: *const MidasTrace) -> usize {
    tr.as_ref().map_or(0, |t| t.0.records.len())
}

/// # Safety
/// `tr` must be a live trace handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn midas_trace_get(tr: *const MidasTrace, index: usize, out: *mut MidasTraceRecord) -> MidasStatus {
    guard(|| {
        let tr = deref(tr, "trace")?;
        let out = deref_mut(out, "output record")?;
        let r = tr.0.records.get(index).ok_or_else(|| {
            fail(
                MidasStatus::InvalidArgument,
                format!("row {index} out of range ({} rows)", tr.0.records.len()),
            )
        })?;
        *out = MidasTraceRecord {
            epoch: r.epoch as u64,
            iter: r.iter,
            phi: r.phi,
            f: r.f,
            elapsed_s: r.elapsed_seconds,
            step_norm: r.step_norm,
            lyapunov_surrogate: r.lyapunov_surrogate.unwrap_or(f64::NAN),
        };
        Ok(())
    })
}

/// # Safety
/// `tr` must be NULL or a handle from this library that was not freed yet.
#[no_mangle]
pub unsafe extern "C" fn midas_trace_free(tr: *mut MidasTrace) {
    if !tr.is_null() {
        drop(Box::from_raw(tr));
    }
}

// ---- metrics ----

/// Quality of `xhat` against the reference `x`.
///
/// # Safety
/// `x` and `xhat` must be live tensor handles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn midas_metrics(
    x: *const MidasTensor,
    xhat: *const MidasTensor,
    out: *mut MidasMetrics,
) -> MidasStatus {
    guard(|| {
        let x = deref(x, "x")?;
        let xhat = deref(xhat, "xhat")?;
        let out = deref_mut(out, "output metrics")?;
        let r = lib(metrics::evaluate(&x.0, &xhat.0))?;
        *out = MidasMetrics {
            psnr: r.psnr,
            rmse: r.rmse,
            sam: r.sam,
            cc: r.cc,
            sam_skipped: r.sam_skipped as u64,
            cc_skipped: r.cc_skipped as u64,
        };
        Ok(())
    })
}
