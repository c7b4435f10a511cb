//! C interface to the `csrr` solvers.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free` function. Every fallible call returns a [`CsrrStatus`];
//! on failure, [`csrr_last_error_message`] describes the error for the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use csrr::config::{ExperimentConfig, Solver};
use csrr::experiment::{train, Trained};
use csrr::model_file::ModelFile;
use csrr::{CsrrError, ObservationMatrix};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CsrrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NumericFailure = 4,
    Divergence = 5,
    Io = 6,
    Format = 7,
    Internal = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CsrrSolverKind {
    /// Nuclear-norm solver, type I loss.
    CsrrI = 0,
    /// Nuclear-norm solver, type II loss.
    CsrrII = 1,
    /// Bilinear-factorization solver.
    CsrrE = 2,
    /// Nuclear-norm solver without the sparse component.
    CsrrIV0 = 3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CsrrParams {
    pub solver: CsrrSolverKind,
    pub eta: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Positive-class cost; the negative cost is `1 - c_p`.
    pub c_p: f64,
    pub max_iters: u64,
    pub rel_tol: f64,
    /// Used by `CSRR_SOLVER_KIND_CSRR_E` only.
    pub latent_dim: u64,
    pub inner_max_iters: u64,
    pub inner_rel_tol: f64,
    pub seed: u64,
}

/// Binary items × users observation matrix.
pub struct CsrrObservation(ObservationMatrix);

/// Trained model.
pub struct CsrrModel(ModelFile);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn status_of(err: &CsrrError) -> CsrrStatus {
    match err {
        CsrrError::DimensionMismatch { .. } => CsrrStatus::DimensionMismatch,
        CsrrError::NumericFailure { .. } => CsrrStatus::NumericFailure,
        CsrrError::Divergence { .. } => CsrrStatus::Divergence,
        CsrrError::Io(_) | CsrrError::Csv(_) => CsrrStatus::Io,
        CsrrError::Format { .. } => CsrrStatus::Format,
        _ => CsrrStatus::InvalidArgument,
    }
}

struct Failure(CsrrStatus, String);

impl From<CsrrError> for Failure {
    fn from(e: CsrrError) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(CsrrStatus::NullPointer, format!("{what} is null"))
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> CsrrStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_last_error("");
            CsrrStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            CsrrStatus::Internal
        }
    }
}

fn experiment_config(p: &CsrrParams) -> ExperimentConfig {
    ExperimentConfig {
        solver: match p.solver {
            CsrrSolverKind::CsrrI => Solver::CsrrI,
            CsrrSolverKind::CsrrII => Solver::CsrrII,
            CsrrSolverKind::CsrrE => Solver::CsrrE,
            CsrrSolverKind::CsrrIV0 => Solver::CsrrIV0,
        },
        eta: p.eta,
        lambda1: p.lambda1,
        lambda2: p.lambda2,
        c_p: p.c_p,
        max_iters: p.max_iters as usize,
        rel_tol: p.rel_tol,
        latent_dim: p.latent_dim as usize,
        inner_max_iters: p.inner_max_iters as usize,
        inner_rel_tol: p.inner_rel_tol,
        seeds: vec![p.seed],
        ..ExperimentConfig::default()
    }
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn csrr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Fills `out` with the default solver settings.
///
/// # Safety
/// `out` must be null or point to writable memory for one `CsrrParams`.
#[no_mangle]
pub unsafe extern "C" fn csrr_params_default(out: *mut CsrrParams) -> CsrrStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let d = ExperimentConfig::default();
        *out = CsrrParams {
            solver: CsrrSolverKind::CsrrI,
            eta: d.eta,
            lambda1: d.lambda1,
            lambda2: d.lambda2,
            c_p: d.c_p,
            max_iters: d.max_iters as u64,
            rel_tol: d.rel_tol,
            latent_dim: d.latent_dim as u64,
            inner_max_iters: d.inner_max_iters as u64,
            inner_rel_tol: d.inner_rel_tol,
            seed: 0,
        };
        Ok(())
    })
}

/// Builds an observation matrix from `count` positive `(item, user)` pairs.
///
/// # Safety
/// `items` and `users` must each point to `count` readable values (or be
/// null when `count` is 0); `out` must point to writable memory for one
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn csrr_observation_new(
    rows: u64,
    cols: u64,
    items: *const u64,
    users: *const u64,
    count: usize,
    out: *mut *mut CsrrObservation,
) -> CsrrStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ptr::null_mut();
        let (items, users) = if count == 0 {
            (&[][..], &[][..])
        } else {
            if items.is_null() {
                return Err(null("items"));
            }
            if users.is_null() {
                return Err(null("users"));
            }
            (slice::from_raw_parts(items, count), slice::from_raw_parts(users, count))
        };
        let pairs = items.iter().zip(users).map(|(&i, &u)| (i as usize, u as usize));
        let obs = ObservationMatrix::from_positives(rows as usize, cols as usize, pairs)?;
        *out = Box::into_raw(Box::new(CsrrObservation(obs)));
        Ok(())
    })
}

/// # Safety
/// `obs` must be null or a handle from `csrr_observation_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn csrr_observation_free(obs: *mut CsrrObservation) {
    if !obs.is_null() {
        drop(Box::from_raw(obs));
    }
}

/// Trains a model on `obs`.
///
/// # Safety
/// `obs` must be a live observation handle, `params` must point to a valid
/// `CsrrParams`, and `out` to writable memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn csrr_fit(
    obs: *const CsrrObservation,
    params: *const CsrrParams,
    out: *mut *mut CsrrModel,
) -> CsrrStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ptr::null_mut();
        let obs = obs.as_ref().ok_or_else(|| null("obs"))?;
        let params = params.as_ref().ok_or_else(|| null("params"))?;
        let cfg = experiment_config(params);
        cfg.validate()?;
        match train(&cfg, &obs.0, params.seed)? {
            Trained::Model { model, .. } => {
                *out = Box::into_raw(Box::new(CsrrModel(model)));
                Ok(())
            }
            Trained::Popularity(_) => Err(Failure(CsrrStatus::Internal, "unexpected solver".into())),
        }
    })
}

/// Writes the predicted matrix shape.
///
/// # Safety
/// `model` must be a live model handle; `rows` and `cols` must be writable.
#[no_mangle]
pub unsafe extern "C" fn csrr_model_dims(model: *const CsrrModel, rows: *mut u64, cols: *mut u64) -> CsrrStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let rows = rows.as_mut().ok_or_else(|| null("rows"))?;
        let cols = cols.as_mut().ok_or_else(|| null("cols"))?;
        let (r, c) = model.0.shape();
        *rows = r as u64;
        *cols = c as u64;
        Ok(())
    })
}

/// Copies the predicted scores, row-major, into `buffer` of `len` doubles.
/// `len` must equal rows × cols.
///
/// # Safety
/// `model` must be a live model handle and `buffer` must point to `len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn csrr_model_scores(model: *const CsrrModel, buffer: *mut f64, len: usize) -> CsrrStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if buffer.is_null() {
            return Err(null("buffer"));
        }
        let scores = model.0.scores()?;
        if scores.values().len() != len {
            return Err(Failure(
                CsrrStatus::DimensionMismatch,
                format!("buffer holds {len} values, model has {}", scores.values().len()),
            ));
        }
        slice::from_raw_parts_mut(buffer, len).copy_from_slice(scores.values());
        Ok(())
    })
}

unsafe fn path_arg<'a>(path: *const c_char) -> Result<&'a str, Failure> {
    if path.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(path)
        .to_str()
        .map_err(|_| Failure(CsrrStatus::InvalidArgument, "path is not UTF-8".into()))
}

/// # Safety
/// `model` must be a live model handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn csrr_model_save(model: *const CsrrModel, path: *const c_char) -> CsrrStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        model.0.save(path_arg(path)?)?;
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` writable memory for one
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn csrr_model_load(path: *const c_char, out: *mut *mut CsrrModel) -> CsrrStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ptr::null_mut();
        let model = ModelFile::load(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(CsrrModel(model)));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from `csrr_fit` / `csrr_model_load`
/// not yet freed.
#[no_mangle]
pub unsafe extern "C" fn csrr_model_free(model: *mut CsrrModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
