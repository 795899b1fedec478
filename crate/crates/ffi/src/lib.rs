//! C ABI over the dynident core.
//!
//! Conventions:
//! - every fallible function returns a [`DynidentStatus`]; `DYNIDENT_STATUS_OK` is zero;
//! - on failure the message is kept per thread and read with [`dynident_last_error`];
//! - objects are opaque handles created by `*_new`/`*_load`/`*_integrate` style calls and
//!   released with the matching `*_free`, which accepts null;
//! - strings returned to the caller are released with [`dynident_string_free`];
//! - array arguments are pointer plus length, and output arrays must be at least the
//!   documented length.
//!
//! Panics never cross the boundary; they are reported as `DYNIDENT_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use nalgebra::DMatrix;

use dynident::estim::{fit_closed_form, fit_derivative_matching, fit_trajectory_matching};
use dynident::eval::aipw_ate;
use dynident::multiview::{encode, IdentifierModel};
use dynident::solver::{integrate, TimeGrid, Trajectory};
use dynident::systems::{eval_vector_field, lookup, OdeSystem};
use dynident::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynidentStatus {
    Ok = 0,
    InvalidArgument = 1,
    NumericDomain = 2,
    Divergence = 3,
    Unsupported = 4,
    IllConditioned = 5,
    EstimationFailure = 6,
    DegenerateLabels = 7,
    TrainingDiverged = 8,
    Config = 9,
    Io = 10,
    Format = 11,
    NullPointer = 12,
    BufferTooSmall = 13,
    Panic = 14,
}

/// Estimation method selector for [`dynident_fit`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynidentMethod {
    ClosedForm = 0,
    DerivativeMatching = 1,
    TrajectoryMatching = 2,
}

/// Catalog system. Borrowed from the static catalog; freeing only drops the handle.
pub struct DynidentSystem {
    inner: &'static OdeSystem,
}

/// Integrated or loaded trajectory.
pub struct DynidentTrajectory {
    inner: Trajectory,
}

/// Trained multiview identifier.
pub struct DynidentModel {
    inner: IdentifierModel,
}

/// Output of [`dynident_aipw_ate`].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DynidentAte {
    pub ate_hat: f64,
    pub se_hat: f64,
    pub clipped_fraction: f64,
    /// 1 when enough propensities were clipped to make the estimate suspect.
    pub positivity_warning: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> DynidentStatus {
    match e {
        Error::InvalidArgument(_) => DynidentStatus::InvalidArgument,
        Error::NumericDomain { .. } => DynidentStatus::NumericDomain,
        Error::Divergence { .. } => DynidentStatus::Divergence,
        Error::Unsupported(_) => DynidentStatus::Unsupported,
        Error::IllConditioned { .. } => DynidentStatus::IllConditioned,
        Error::EstimationFailure(_) => DynidentStatus::EstimationFailure,
        Error::DegenerateLabels(_) => DynidentStatus::DegenerateLabels,
        Error::TrainingDiverged { .. } => DynidentStatus::TrainingDiverged,
        Error::Config { .. } => DynidentStatus::Config,
        Error::Io { .. } => DynidentStatus::Io,
        Error::Format(_) => DynidentStatus::Format,
    }
}

/// Failure raised inside a wrapper before or after calling the core.
enum Fail {
    Core(Error),
    Null(&'static str),
    Small { need: usize, got: usize },
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DynidentStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DynidentStatus::Ok,
        Ok(Err(Fail::Core(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(&format!("null pointer: {what}"));
            DynidentStatus::NullPointer
        }
        Ok(Err(Fail::Small { need, got })) => {
            set_error(&format!("output buffer holds {got} values, {need} required"));
            DynidentStatus::BufferTooSmall
        }
        Err(_) => {
            set_error("internal panic");
            DynidentStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out(dst: *mut f64, cap: usize, src: &[f64]) -> Result<(), Fail> {
    if cap < src.len() {
        return Err(Fail::Small { need: src.len(), got: cap });
    }
    if !src.is_empty() {
        if dst.is_null() {
            return Err(Fail::Null("output buffer"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    }
    Ok(())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Core(Error::invalid(format!("{what} is not valid UTF-8"))))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the next call
/// that fails on the same thread; do not free.
#[no_mangle]
pub extern "C" fn dynident_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dynident_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Accepts null.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn dynident_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Looks up a catalog system by id (for example `"ode27"`).
///
/// # Safety
/// `id` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dynident_system_lookup(id: *const c_char, out: *mut *mut DynidentSystem) -> DynidentStatus {
    guard(|| {
        let sys = lookup(str_arg(id, "id")?)?;
        put(out, DynidentSystem { inner: sys })
    })
}

/// # Safety
/// `sys` must be null or a handle from [`dynident_system_lookup`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dynident_system_free(sys: *mut DynidentSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// State dimension `d` and parameter count `N`.
///
/// # Safety
/// `sys` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn dynident_system_dims(
    sys: *const DynidentSystem,
    state_dim: *mut usize,
    param_dim: *mut usize,
) -> DynidentStatus {
    guard(|| {
        let s = as_ref(sys, "system")?.inner;
        if state_dim.is_null() || param_dim.is_null() {
            return Err(Fail::Null("dimension output"));
        }
        *state_dim = s.state_dim;
        *param_dim = s.param_dim;
        Ok(())
    })
}

/// Evaluates `f(x; θ)` into `out` (capacity `out_len`, at least `d`).
///
/// # Safety
/// Pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn dynident_field_eval(
    sys: *const DynidentSystem,
    theta: *const f64,
    theta_len: usize,
    x: *const f64,
    x_len: usize,
    out: *mut f64,
    out_len: usize,
) -> DynidentStatus {
    guard(|| {
        let s = as_ref(sys, "system")?.inner;
        let f = eval_vector_field(s, slice(theta, theta_len, "theta")?, slice(x, x_len, "x")?)?;
        write_out(out, out_len, &f)
    })
}

/// Integrates with RK4 on the uniform grid of `n_points` over `[0, t_max]`. A null `x0`
/// uses the catalog initial state.
///
/// # Safety
/// Pointers must be valid for the given lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dynident_integrate(
    sys: *const DynidentSystem,
    theta: *const f64,
    theta_len: usize,
    x0: *const f64,
    x0_len: usize,
    t_max: f64,
    n_points: usize,
    out: *mut *mut DynidentTrajectory,
) -> DynidentStatus {
    guard(|| {
        let s = as_ref(sys, "system")?.inner;
        let x0 = if x0.is_null() { &s.initial_state[..] } else { slice(x0, x0_len, "x0")? };
        let grid = TimeGrid::uniform(0.0, t_max, n_points)?;
        let tr = integrate(s, slice(theta, theta_len, "theta")?, x0, &grid)?;
        put(out, DynidentTrajectory { inner: tr })
    })
}

/// Parses one JSON-lines trajectory record.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dynident_trajectory_from_json(
    json: *const c_char,
    out: *mut *mut DynidentTrajectory,
) -> DynidentStatus {
    guard(|| {
        let tr = Trajectory::from_json_line(str_arg(json, "json")?)?;
        put(out, DynidentTrajectory { inner: tr })
    })
}

/// Serializes a trajectory as one JSON record. Free the string with
/// [`dynident_string_free`].
///
/// # Safety
/// `traj` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dynident_trajectory_to_json(
    traj: *const DynidentTrajectory,
    out: *mut *mut c_char,
) -> DynidentStatus {
    guard(|| {
        let line = as_ref(traj, "trajectory")?.inner.to_json_line()?;
        if out.is_null() {
            return Err(Fail::Null("output string"));
        }
        *out = CString::new(line).map_err(|_| Error::Format("record contains NUL".into()))?.into_raw();
        Ok(())
    })
}

/// Number of grid points `T` and state dimension `d`.
///
/// # Safety
/// `traj` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn dynident_trajectory_shape(
    traj: *const DynidentTrajectory,
    n_points: *mut usize,
    state_dim: *mut usize,
) -> DynidentStatus {
    guard(|| {
        let t = &as_ref(traj, "trajectory")?.inner;
        if n_points.is_null() || state_dim.is_null() {
            return Err(Fail::Null("shape output"));
        }
        *n_points = t.len();
        *state_dim = t.state_dim();
        Ok(())
    })
}

/// Copies the states, row-major `T × d`, into `out` (capacity `out_len`).
///
/// # Safety
/// `traj` must be a live handle; `out` must be valid for `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn dynident_trajectory_states(
    traj: *const DynidentTrajectory,
    out: *mut f64,
    out_len: usize,
) -> DynidentStatus {
    guard(|| write_out(out, out_len, as_ref(traj, "trajectory")?.inner.states()))
}

/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dynident_trajectory_free(traj: *mut DynidentTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Estimates `θ` from a trajectory. `method` is a [`DynidentMethod`] value. `theta0` may be null (box midpoint); it is ignored by
/// the closed form. Writes `N` values to `theta_out` and the final loss to `loss_out`
/// when that is not null.
///
/// # Safety
/// Handles must be live; pointers valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn dynident_fit(
    sys: *const DynidentSystem,
    traj: *const DynidentTrajectory,
    method: i32,
    theta0: *const f64,
    theta0_len: usize,
    theta_out: *mut f64,
    theta_out_len: usize,
    loss_out: *mut f64,
) -> DynidentStatus {
    guard(|| {
        let s = as_ref(sys, "system")?.inner;
        let tr = &as_ref(traj, "trajectory")?.inner;
        let start = if theta0.is_null() { s.param_box.midpoint() } else { slice(theta0, theta0_len, "theta0")?.to_vec() };
        let fit = match method {
            m if m == DynidentMethod::ClosedForm as i32 => fit_closed_form(s, tr)?,
            m if m == DynidentMethod::DerivativeMatching as i32 => fit_derivative_matching(s, tr, &start)?,
            m if m == DynidentMethod::TrajectoryMatching as i32 => fit_trajectory_matching(s, tr, &start)?,
            m => return Err(Error::invalid(format!("unknown method {m}")).into()),
        };
        write_out(theta_out, theta_out_len, &fit.theta_hat)?;
        if !loss_out.is_null() {
            *loss_out = fit.loss_final;
        }
        Ok(())
    })
}

/// AIPW average treatment effect. `x` is row-major `n × p`; `t` holds 0 or 1.
///
/// # Safety
/// Pointers must be valid for the given lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dynident_aipw_ate(
    y: *const f64,
    t: *const u8,
    x: *const f64,
    n: usize,
    p: usize,
    out: *mut DynidentAte,
) -> DynidentStatus {
    guard(|| {
        let y = slice(y, n, "y")?;
        let t = slice(t, n, "t")?;
        if t.iter().any(|&v| v > 1) {
            return Err(Error::invalid("treatment values must be 0 or 1").into());
        }
        let t: Vec<bool> = t.iter().map(|&v| v == 1).collect();
        let x = DMatrix::from_row_slice(n, p, slice(x, n * p, "x")?);
        let r = aipw_ate(y, &t, &x)?;
        if out.is_null() {
            return Err(Fail::Null("output"));
        }
        *out = DynidentAte {
            ate_hat: r.ate_hat,
            se_hat: r.se_hat,
            clipped_fraction: r.clipped_fraction,
            positivity_warning: i32::from(r.warning.is_some()),
        };
        Ok(())
    })
}

/// Loads a model file written by `dynident train-mv`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dynident_model_load(path: *const c_char, out: *mut *mut DynidentModel) -> DynidentStatus {
    guard(|| {
        let m = IdentifierModel::load(Path::new(str_arg(path, "path")?))?;
        put(out, DynidentModel { inner: m })
    })
}

/// Latent dimension of a model.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dynident_model_latent_dim(model: *const DynidentModel, out: *mut usize) -> DynidentStatus {
    guard(|| {
        let m = &as_ref(model, "model")?.inner;
        if out.is_null() {
            return Err(Fail::Null("output"));
        }
        *out = m.layout.latent_dim;
        Ok(())
    })
}

/// Encodes a trajectory into `out` (capacity `out_len`, at least the latent dimension).
///
/// # Safety
/// Handles must be live; `out` valid for `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn dynident_model_encode(
    model: *const DynidentModel,
    traj: *const DynidentTrajectory,
    out: *mut f64,
    out_len: usize,
) -> DynidentStatus {
    guard(|| {
        let z = encode(&as_ref(model, "model")?.inner, &as_ref(traj, "trajectory")?.inner)?;
        write_out(out, out_len, &z)
    })
}

/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dynident_model_free(model: *mut DynidentModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
