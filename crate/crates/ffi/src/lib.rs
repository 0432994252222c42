//! C ABI over the `sparse-bandit` library.
//!
//! Every function returns an [`SbStatus`]. On failure a message is stored in
//! thread-local storage and can be read with [`sb_last_error`]. Geometries
//! and experiment results are opaque handles owned by the caller and
//! released with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use sparse_bandit::geometry::SupportSet;
use sparse_bandit::harness::{export_csv, run_experiment, ExperimentConfig, ExperimentResult};
use sparse_bandit::linalg::{Matrix, Vector};
use sparse_bandit::oracles::{brute_force, exact_top_h, greedy_select, SparseSolution};
use sparse_bandit::{ActionSetGeometry, Error};

/// Result code of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    InvalidGeometry = 4,
    InvalidSupport = 5,
    UnsupportedGeometry = 6,
    BudgetExceeded = 7,
    SingularBasis = 8,
    Config = 9,
    Io = 10,
    Panic = 11,
}

impl From<&Error> for SbStatus {
    fn from(err: &Error) -> Self {
        match err {
            Error::DimensionMismatch { .. } => SbStatus::DimensionMismatch,
            Error::InvalidGeometry(_) => SbStatus::InvalidGeometry,
            Error::InvalidSupport(_) => SbStatus::InvalidSupport,
            Error::InvalidArgument(_) | Error::NoPendingAction => SbStatus::InvalidArgument,
            Error::UnsupportedGeometry { .. } => SbStatus::UnsupportedGeometry,
            Error::BudgetExceeded { .. } => SbStatus::BudgetExceeded,
            Error::SingularBasis(_) => SbStatus::SingularBasis,
            Error::Config(_) => SbStatus::Config,
            Error::Io(_) => SbStatus::Io,
        }
    }
}

/// Opaque action-set geometry.
pub struct SbGeometry(ActionSetGeometry);

/// Opaque result of a multi-trial experiment.
pub struct SbExperiment(ExperimentResult);

/// Headline numbers of an experiment. Absent values are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SbSummary {
    pub trials: usize,
    pub horizon: u64,
    pub mean_regret: f64,
    pub std_regret: f64,
    pub mean_alpha_regret: f64,
    pub std_alpha_regret: f64,
    pub mean_alpha: f64,
    pub lock_fraction: f64,
    pub mean_lock_cycle: f64,
    pub mean_recovery_cycle: f64,
    pub c0: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Failure::Lib(err)
    }
}

type FfiResult<T = ()> = Result<T, Failure>;

fn guard(f: impl FnOnce() -> FfiResult) -> SbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SbStatus::Ok,
        Ok(Err(Failure::Null(name))) => {
            set_error(format!("null pointer passed as `{name}`"));
            SbStatus::NullPointer
        }
        Ok(Err(Failure::Lib(err))) => {
            set_error(err.to_string());
            SbStatus::from(&err)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            SbStatus::Panic
        }
    }
}

unsafe fn read<'a, T>(p: *const T, len: usize, name: &'static str) -> FfiResult<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn write<'a, T>(p: *mut T, len: usize, name: &'static str) -> FfiResult<&'a mut [T]> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn out<'a, T>(p: *mut T, name: &'static str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or(Failure::Null(name))
}

unsafe fn geometry<'a>(g: *const SbGeometry) -> FfiResult<&'a ActionSetGeometry> {
    g.as_ref().map(|g| &g.0).ok_or(Failure::Null("geometry"))
}

unsafe fn theta_vec(g: &ActionSetGeometry, theta: *const f64) -> FfiResult<Vector> {
    Ok(Vector::from_column_slice(read(theta, g.dim(), "theta")?))
}

unsafe fn text<'a>(s: *const c_char, name: &'static str) -> FfiResult<&'a str> {
    if s.is_null() {
        return Err(Failure::Null(name));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Failure::Lib(Error::InvalidArgument(format!("`{name}` is not valid UTF-8"))))
}

unsafe fn emit_geometry(g: ActionSetGeometry, dst: *mut *mut SbGeometry) -> FfiResult {
    *out(dst, "out")? = Box::into_raw(Box::new(SbGeometry(g)));
    Ok(())
}

unsafe fn emit_solution(
    sol: &SparseSolution,
    d: usize,
    out_support: *mut usize,
    out_len: *mut usize,
    out_action: *mut f64,
    out_value: *mut f64,
) -> FfiResult {
    let idx = sol.support.indices();
    write(out_support, idx.len(), "out_support")?.copy_from_slice(idx);
    *out(out_len, "out_len")? = idx.len();
    write(out_action, d, "out_action")?.copy_from_slice(sol.action.as_slice());
    *out(out_value, "out_value")? = sol.value;
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |m| m.as_ptr()))
}

/// Euclidean ball of the given radius in `dim` dimensions.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn sb_geometry_euclidean_ball(
    dim: usize,
    radius: f64,
    out: *mut *mut SbGeometry,
) -> SbStatus {
    guard(|| emit_geometry(ActionSetGeometry::euclidean_ball(dim, radius)?, out))
}

/// Ellipsoid `{x : xᵀAx ≤ 1}` from a row-major `dim × dim` matrix.
///
/// # Safety
/// `a` must point to `dim * dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_geometry_ellipsoid(
    dim: usize,
    a: *const f64,
    out: *mut *mut SbGeometry,
) -> SbStatus {
    guard(|| {
        let entries = read(a, dim * dim, "a")?;
        let m = Matrix::from_row_slice(dim, dim, entries);
        emit_geometry(ActionSetGeometry::ellipsoid(m)?, out)
    })
}

/// `{x : ‖x‖_p ≤ radius}` for `p ∈ (1, 2]`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_geometry_lp_ball(
    dim: usize,
    p: f64,
    radius: f64,
    out: *mut *mut SbGeometry,
) -> SbStatus {
    guard(|| emit_geometry(ActionSetGeometry::lp_ball(dim, p, radius)?, out))
}

/// `{x : ‖x‖₁ ≤ radius}`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_geometry_l1_ball(
    dim: usize,
    radius: f64,
    out: *mut *mut SbGeometry,
) -> SbStatus {
    guard(|| emit_geometry(ActionSetGeometry::l1_ball(dim, radius)?, out))
}

/// Box `∏ [lo_i, hi_i]`.
///
/// # Safety
/// `lo` and `hi` must each point to `dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_geometry_hypercube(
    dim: usize,
    lo: *const f64,
    hi: *const f64,
    out: *mut *mut SbGeometry,
) -> SbStatus {
    guard(|| {
        let lo = read(lo, dim, "lo")?.to_vec();
        let hi = read(hi, dim, "hi")?.to_vec();
        emit_geometry(ActionSetGeometry::hypercube(lo, hi)?, out)
    })
}

/// Releases a geometry. NULL is ignored.
///
/// # Safety
/// `g` must come from one of the `sb_geometry_*` constructors and not have
/// been freed already.
#[no_mangle]
pub unsafe extern "C" fn sb_geometry_free(g: *mut SbGeometry) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Ambient dimension, or 0 for NULL.
///
/// # Safety
/// `g` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sb_geometry_dim(g: *const SbGeometry) -> usize {
    g.as_ref().map_or(0, |g| g.0.dim())
}

/// `sup_{x ∈ X} ‖x‖₂`.
///
/// # Safety
/// `g` must be a live handle; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_geometry_max_norm(
    g: *const SbGeometry,
    out_value: *mut f64,
) -> SbStatus {
    guard(|| {
        *out(out_value, "out_value")? = geometry(g)?.max_norm();
        Ok(())
    })
}

/// `h(S; θ)` for the support given by `support_len` indices.
///
/// # Safety
/// `theta` must point to `dim` doubles, `support` to `support_len` indices;
/// `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_value_on_support(
    g: *const SbGeometry,
    theta: *const f64,
    support: *const usize,
    support_len: usize,
    out_value: *mut f64,
) -> SbStatus {
    guard(|| {
        let g = geometry(g)?;
        let theta = theta_vec(g, theta)?;
        let s = SupportSet::new(read(support, support_len, "support")?.to_vec(), support_len.max(1), g.dim())?;
        *out(out_value, "out_value")? = g.value_on_support(&s, &theta)?;
        Ok(())
    })
}

/// A maximiser of `θᵀx` over `X ∩ {supp(x) ⊆ S}`, written to `out_action`.
///
/// # Safety
/// `theta` and `out_action` must point to `dim` doubles, `support` to
/// `support_len` indices.
#[no_mangle]
pub unsafe extern "C" fn sb_best_action_on_support(
    g: *const SbGeometry,
    theta: *const f64,
    support: *const usize,
    support_len: usize,
    out_action: *mut f64,
) -> SbStatus {
    guard(|| {
        let g = geometry(g)?;
        let theta = theta_vec(g, theta)?;
        let s = SupportSet::new(read(support, support_len, "support")?.to_vec(), support_len.max(1), g.dim())?;
        let x = g.best_action_on_support(&s, &theta)?;
        write(out_action, g.dim(), "out_action")?.copy_from_slice(x.as_slice());
        Ok(())
    })
}

/// Writes 1 to `out_member` if `x ∈ X`, else 0.
///
/// # Safety
/// `x` must point to `dim` doubles; `out_member` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_membership(
    g: *const SbGeometry,
    x: *const f64,
    out_member: *mut i32,
) -> SbStatus {
    guard(|| {
        let g = geometry(g)?;
        let x = Vector::from_column_slice(read(x, g.dim(), "x")?);
        *out(out_member, "out_member")? = g.membership(&x)? as i32;
        Ok(())
    })
}

/// Exact best H-sparse action on a Euclidean ball.
///
/// # Safety
/// `theta` and `out_action` must point to `dim` doubles, `out_support` to
/// room for `h` indices; `out_len` and `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_exact_top_h(
    g: *const SbGeometry,
    theta: *const f64,
    h: usize,
    out_support: *mut usize,
    out_len: *mut usize,
    out_action: *mut f64,
    out_value: *mut f64,
) -> SbStatus {
    guard(|| {
        let g = geometry(g)?;
        let sol = exact_top_h(g, &theta_vec(g, theta)?, h)?;
        emit_solution(&sol, g.dim(), out_support, out_len, out_action, out_value)
    })
}

/// Best H-sparse action by enumerating every support of size `≤ h`.
///
/// # Safety
/// Same buffer requirements as [`sb_exact_top_h`].
#[no_mangle]
pub unsafe extern "C" fn sb_brute_force(
    g: *const SbGeometry,
    theta: *const f64,
    h: usize,
    out_support: *mut usize,
    out_len: *mut usize,
    out_action: *mut f64,
    out_value: *mut f64,
) -> SbStatus {
    guard(|| {
        let g = geometry(g)?;
        let sol = brute_force(g, &theta_vec(g, theta)?, h)?;
        emit_solution(&sol, g.dim(), out_support, out_len, out_action, out_value)
    })
}

/// Greedy support selection. Writes the `h` indices in selection order, the
/// value of the selected support and the minimum marginal-gain gap
/// (`INFINITY` when undefined).
///
/// # Safety
/// `theta` must point to `dim` doubles, `out_selected` to room for `h`
/// indices; `out_value` and `out_min_gap` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_greedy_select(
    g: *const SbGeometry,
    theta: *const f64,
    h: usize,
    out_selected: *mut usize,
    out_value: *mut f64,
    out_min_gap: *mut f64,
) -> SbStatus {
    guard(|| {
        let g = geometry(g)?;
        let trace = greedy_select(g, &theta_vec(g, theta)?, h)?;
        write(out_selected, h, "out_selected")?.copy_from_slice(&trace.selected);
        *out(out_value, "out_value")? = trace.value;
        *out(out_min_gap, "out_min_gap")? = trace.min_gap;
        Ok(())
    })
}

/// Parses a TOML experiment config and runs every trial. Relative paths in
/// the config resolve against `base_dir`, which may be NULL.
///
/// # Safety
/// `config` must be a nul-terminated string, `base_dir` NULL or one; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_experiment_run(
    config: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut SbExperiment,
) -> SbStatus {
    guard(|| {
        let body = text(config, "config")?;
        let base = if base_dir.is_null() { None } else { Some(Path::new(text(base_dir, "base_dir")?)) };
        let dst = self::out(out, "out")?;
        let cfg = ExperimentConfig::parse(body, base)?;
        let result = run_experiment(&cfg)?;
        *dst = Box::into_raw(Box::new(SbExperiment(result)));
        Ok(())
    })
}

/// Releases an experiment result. NULL is ignored.
///
/// # Safety
/// `e` must come from [`sb_experiment_run`] and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn sb_experiment_free(e: *mut SbExperiment) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// Copies the experiment's headline numbers into `out_summary`.
///
/// # Safety
/// `e` must be a live handle; `out_summary` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_experiment_summary(
    e: *const SbExperiment,
    out_summary: *mut SbSummary,
) -> SbStatus {
    guard(|| {
        let res = &e.as_ref().ok_or(Failure::Null("experiment"))?.0;
        let s = &res.summary;
        *out(out_summary, "out_summary")? = SbSummary {
            trials: res.trials.len(),
            horizon: res.config.horizon,
            mean_regret: s.regret.mean,
            std_regret: s.regret.std,
            mean_alpha_regret: s.alpha_regret.mean,
            std_alpha_regret: s.alpha_regret.std,
            mean_alpha: s.mean_alpha,
            lock_fraction: s.lock_fraction,
            mean_lock_cycle: s.mean_lock_cycle.unwrap_or(f64::NAN),
            mean_recovery_cycle: s.mean_recovery_cycle.unwrap_or(f64::NAN),
            c0: s.c0.unwrap_or(f64::NAN),
        };
        Ok(())
    })
}

/// Writes `regret.csv`, `cycles.csv`, `recovery.csv` and `summary.csv` into
/// `out_dir`, creating it if needed.
///
/// # Safety
/// `e` must be a live handle and `out_dir` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sb_experiment_export_csv(
    e: *const SbExperiment,
    out_dir: *const c_char,
) -> SbStatus {
    guard(|| {
        let res = &e.as_ref().ok_or(Failure::Null("experiment"))?.0;
        export_csv(res, Path::new(text(out_dir, "out_dir")?))?;
        Ok(())
    })
}
