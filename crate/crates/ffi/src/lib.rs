//! C ABI for the downwash model, field and controller.
//!
//! Every fallible function returns a [`DwStatus`]; on failure a message is
//! available from [`dw_last_error_message`] on the same thread. Models are
//! opaque handles created by `dw_model_*` constructors and released with
//! [`dw_model_free`]. Rotations are passed as 9 doubles, row-major,
//! inertial-to-leader-body; a null pointer means identity.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use downwash_core::control::{CostWeights, LqrGains};
use downwash_core::dynamics::{INPUT_DIM, STATE_DIM};
use downwash_core::field::FieldParams;
use downwash_core::geometry::{feature_map, FeatureMode, FrameRotation, InteractionState, Vec3};
use downwash_core::learning::Model;
use downwash_core::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Numerical = 4,
    Io = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DwFeatureMode {
    Full = 0,
    NearHover = 1,
}

/// Relative state of the pair, NED, SI units. `delta_p = p_leader - p_follower`.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct DwInteractionState {
    pub delta_p: [f64; 3],
    pub v_leader: [f64; 3],
    pub v_follower: [f64; 3],
}

/// Ground-truth field parameters; see `dw_field_params_default`.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct DwFieldParams {
    pub a_down: f64,
    pub a_lift: f64,
    pub a_rad: f64,
    pub sigma_r: f64,
    pub z_near: f64,
    pub z_far: f64,
    pub eps_sym: f64,
    pub leader_speed_gain: f64,
}

/// Opaque trained model.
pub struct DwModel {
    inner: Model,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> DwStatus {
    match err {
        Error::Json(_) | Error::Csv { .. } | Error::UnsupportedFormat(_) => DwStatus::Parse,
        Error::Io(_) => DwStatus::Io,
        e if e.is_numerical() => DwStatus::Numerical,
        _ => DwStatus::InvalidArgument,
    }
}

fn fail(status: DwStatus, msg: impl Into<String>) -> DwStatus {
    set_error(msg);
    status
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), DwStatus>) -> DwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DwStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(DwStatus::Panic, "internal panic"),
    }
}

fn from_core(e: Error) -> DwStatus {
    fail(status_of(&e), e.to_string())
}

unsafe fn read<'a, T>(p: *const T, what: &str) -> Result<&'a T, DwStatus> {
    p.as_ref().ok_or_else(|| fail(DwStatus::NullPointer, format!("{what} is null")))
}

unsafe fn write<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, DwStatus> {
    p.as_mut().ok_or_else(|| fail(DwStatus::NullPointer, format!("{what} is null")))
}

unsafe fn rotation(r: *const f64) -> Result<FrameRotation, DwStatus> {
    if r.is_null() {
        return Ok(FrameRotation::identity());
    }
    let s = std::slice::from_raw_parts(r, 9);
    let rows = [[s[0], s[1], s[2]], [s[3], s[4], s[5]], [s[6], s[7], s[8]]];
    FrameRotation::try_from(rows).map_err(from_core)
}

unsafe fn c_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, DwStatus> {
    if s.is_null() {
        return Err(fail(DwStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(s).to_str().map_err(|_| fail(DwStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn v3(a: &[f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

impl From<&DwInteractionState> for InteractionState {
    fn from(s: &DwInteractionState) -> Self {
        InteractionState::new(v3(&s.delta_p), v3(&s.v_leader), v3(&s.v_follower))
    }
}

impl From<FieldParams> for DwFieldParams {
    fn from(p: FieldParams) -> Self {
        Self {
            a_down: p.a_down,
            a_lift: p.a_lift,
            a_rad: p.a_rad,
            sigma_r: p.sigma_r,
            z_near: p.z_near,
            z_far: p.z_far,
            eps_sym: p.eps_sym,
            leader_speed_gain: p.leader_speed_gain,
        }
    }
}

impl From<&DwFieldParams> for FieldParams {
    fn from(p: &DwFieldParams) -> Self {
        Self {
            a_down: p.a_down,
            a_lift: p.a_lift,
            a_rad: p.a_rad,
            sigma_r: p.sigma_r,
            z_near: p.z_near,
            z_far: p.z_far,
            eps_sym: p.eps_sym,
            leader_speed_gain: p.leader_speed_gain,
        }
    }
}

/// Library version, static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dw_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses a model artifact from a JSON string.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dw_model_from_json(json: *const c_char, out: *mut *mut DwModel) -> DwStatus {
    guard(|| {
        let out = write(out, "out")?;
        let text = c_str(json, "json")?;
        let inner = Model::from_json(text).map_err(from_core)?;
        *out = Box::into_raw(Box::new(DwModel { inner }));
        Ok(())
    })
}

/// Loads a model artifact from a file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dw_model_load(path: *const c_char, out: *mut *mut DwModel) -> DwStatus {
    guard(|| {
        let out = write(out, "out")?;
        let path = c_str(path, "path")?;
        let inner = Model::load(path.as_ref()).map_err(from_core)?;
        *out = Box::into_raw(Box::new(DwModel { inner }));
        Ok(())
    })
}

/// Releases a model; null is ignored.
///
/// # Safety
/// `model` must come from a `dw_model_*` constructor and not be used again.
#[no_mangle]
pub unsafe extern "C" fn dw_model_free(model: *mut DwModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Predicted force on the follower, inertial frame, m/s².
///
/// # Safety
/// Pointers must be valid; `r_ma` is null or points to 9 doubles; `out`
/// points to 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn dw_model_predict(
    model: *const DwModel,
    state: *const DwInteractionState,
    r_ma: *const f64,
    out: *mut f64,
) -> DwStatus {
    guard(|| {
        let model = read(model, "model")?;
        let state = read(state, "state")?;
        let r = rotation(r_ma)?;
        let out = write(out.cast::<[f64; 3]>(), "out")?;
        let x = InteractionState::from(state);
        if !x.is_finite() {
            return Err(fail(DwStatus::InvalidArgument, "state is not finite"));
        }
        let f = model.inner.predict(&x, &r);
        *out = [f.x, f.y, f.z];
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dw_model_parameter_count(model: *const DwModel, out: *mut usize) -> DwStatus {
    guard(|| {
        let model = read(model, "model")?;
        *write(out, "out")? = model.inner.parameter_count();
        Ok(())
    })
}

/// Invariant features of `state`: 6 values in full mode, 5 near hover.
/// `written` receives the count.
///
/// # Safety
/// `out` must hold `out_len` doubles; other pointers must be valid; `r_ma`
/// may be null.
#[no_mangle]
pub unsafe extern "C" fn dw_feature_map(
    state: *const DwInteractionState,
    r_ma: *const f64,
    mode: DwFeatureMode,
    out: *mut f64,
    out_len: usize,
    written: *mut usize,
) -> DwStatus {
    guard(|| {
        let state = read(state, "state")?;
        let r = rotation(r_ma)?;
        let written = write(written, "written")?;
        let mode = match mode {
            DwFeatureMode::Full => FeatureMode::Full,
            DwFeatureMode::NearHover => FeatureMode::NearHover,
        };
        if out_len < mode.len() {
            return Err(fail(DwStatus::InvalidArgument, format!("out_len {out_len} < {}", mode.len())));
        }
        if out.is_null() {
            return Err(fail(DwStatus::NullPointer, "out is null"));
        }
        let h = feature_map(&InteractionState::from(state), &r, mode);
        std::slice::from_raw_parts_mut(out, mode.len()).copy_from_slice(h.as_slice());
        *written = mode.len();
        Ok(())
    })
}

/// Fills `out` with the default field parameters.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dw_field_params_default(out: *mut DwFieldParams) -> DwStatus {
    guard(|| {
        *write(out, "out")? = FieldParams::default().into();
        Ok(())
    })
}

/// Ground-truth field force, inertial frame. `params` may be null for
/// defaults.
///
/// # Safety
/// `out` points to 3 doubles; other pointers valid or null as documented.
#[no_mangle]
pub unsafe extern "C" fn dw_field_force(
    state: *const DwInteractionState,
    r_ma: *const f64,
    params: *const DwFieldParams,
    out: *mut f64,
) -> DwStatus {
    guard(|| {
        let state = read(state, "state")?;
        let r = rotation(r_ma)?;
        let p = params.as_ref().map_or_else(FieldParams::default, FieldParams::from);
        p.validate().map_err(from_core)?;
        let out = write(out.cast::<[f64; 3]>(), "out")?;
        let f = p.force(&InteractionState::from(state), &r);
        *out = [f.x, f.y, f.z];
        Ok(())
    })
}

/// LQR gain `K` (4x7, row-major) for diagonal weights; null weights use
/// the defaults.
///
/// # Safety
/// `q_diag` is null or 7 doubles, `r_diag` null or 4 doubles, `out_k` 28
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn dw_lqr_gains(q_diag: *const f64, r_diag: *const f64, out_k: *mut f64) -> DwStatus {
    guard(|| {
        let mut w = CostWeights::default();
        if !q_diag.is_null() {
            w.q_diag.copy_from_slice(std::slice::from_raw_parts(q_diag, STATE_DIM));
        }
        if !r_diag.is_null() {
            w.r_diag.copy_from_slice(std::slice::from_raw_parts(r_diag, INPUT_DIM));
        }
        let out = write(out_k.cast::<[f64; INPUT_DIM * STATE_DIM]>(), "out_k")?;
        let gains = LqrGains::design(&w).map_err(from_core)?;
        for i in 0..INPUT_DIM {
            for j in 0..STATE_DIM {
                out[i * STATE_DIM + j] = gains.k[(i, j)];
            }
        }
        Ok(())
    })
}
