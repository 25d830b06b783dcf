//! C ABI over `resonator-core`.
//!
//! Every entry point returns an [`RnStatus`]; on failure a description is
//! available from [`rn_last_error`] on the same thread. Handles are opaque
//! and must be released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use resonator::config::validate_scenario;
use resonator::device::{memristor_current, memristor_rate, mosfet_ids, MosfetParams, Polarity, UnipolarMemristorParams};
use resonator::integrate::{integrate, IntegrateOptions, Trajectory};
use resonator::phase::{find_equilibria, hopf_locate, StabilityClass};
use resonator::presets::find_preset;
use resonator::protocol::InputProtocol;
use resonator::run::run_scenario;
use resonator::systems::{Inapik, InapikParams, NeuronSystem};
use resonator::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RnStatus {
    Ok = 0,
    /// Null pointer, bad length or malformed UTF-8.
    InvalidArgument = 1,
    InvalidParameter = 2,
    /// Configuration text failed validation.
    InvalidConfig = 3,
    NoBracket = 4,
    StepUnderflow = 5,
    Precondition = 6,
    Io = 7,
    /// Output buffer too small; the required size was still written.
    BufferTooSmall = 8,
    /// A Rust panic was caught at the boundary.
    Internal = 9,
}

/// Stability class codes used in [`RnEquilibrium`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RnStability {
    StableNode = 0,
    StableFocus = 1,
    UnstableNode = 2,
    UnstableFocus = 3,
    Saddle = 4,
    CenterMarginal = 5,
}

impl From<StabilityClass> for RnStability {
    fn from(c: StabilityClass) -> Self {
        match c {
            StabilityClass::StableNode => RnStability::StableNode,
            StabilityClass::StableFocus => RnStability::StableFocus,
            StabilityClass::UnstableNode => RnStability::UnstableNode,
            StabilityClass::UnstableFocus => RnStability::UnstableFocus,
            StabilityClass::Saddle => RnStability::Saddle,
            StabilityClass::CenterMarginal => RnStability::CenterMarginal,
        }
    }
}

pub const RN_MAX_DIM: usize = 3;

/// One equilibrium; `state` entries past `dim` are zero.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RnEquilibrium {
    pub dim: usize,
    pub state: [f64; RN_MAX_DIM],
    pub stability: RnStability,
    pub stable: bool,
    pub residual: f64,
}

/// Parameters of the sodium-potassium model, in mV, ms, mA, mF and S.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RnInapikParams {
    pub c_mem: f64,
    pub g_l: f64,
    pub g_na: f64,
    pub g_k: f64,
    pub e_l: f64,
    pub e_na: f64,
    pub e_k: f64,
    pub v_half_na: f64,
    pub v_half_k: f64,
    pub k_na: f64,
    pub k_k: f64,
    pub tau: f64,
}

/// Level-1 MOSFET; `p_channel` selects the P device.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RnMosfetParams {
    pub k_trans: f64,
    pub v_t0: f64,
    pub lambda: f64,
    pub p_channel: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RnMemristorParams {
    pub r_on: f64,
    pub r_off: f64,
    pub alpha: f64,
    pub beta_rate: f64,
    pub v_rst: f64,
    pub v_set: f64,
}

impl From<&RnMemristorParams> for UnipolarMemristorParams {
    fn from(p: &RnMemristorParams) -> Self {
        UnipolarMemristorParams {
            r_on: p.r_on,
            r_off: p.r_off,
            alpha: p.alpha,
            beta_rate: p.beta_rate,
            v_rst: p.v_rst,
            v_set: p.v_set,
        }
    }
}

/// Opaque neuron system.
pub struct RnSystem {
    inner: Box<dyn NeuronSystem>,
}

/// Opaque sampled trajectory.
pub struct RnTrajectory {
    inner: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn status_of(e: &Error) -> RnStatus {
    match e {
        Error::InvalidParameter { .. } | Error::ResistanceOutOfRange { .. } => RnStatus::InvalidParameter,
        Error::NoBracket { .. } => RnStatus::NoBracket,
        Error::StepUnderflow { .. } | Error::StepLimit { .. } => RnStatus::StepUnderflow,
        Error::TooFewSamples { .. } | Error::Precondition(_) | Error::EmptyGrid => RnStatus::Precondition,
        Error::Io(_) => RnStatus::Io,
    }
}

struct Fail(RnStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn bad(msg: &str) -> Fail {
    Fail(RnStatus::InvalidArgument, msg.to_owned())
}

/// Run `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            RnStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            RnStatus::Internal
        }
    }
}

unsafe fn as_str<'a>(p: *const c_char) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(bad("null string"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| bad("string is not UTF-8"))
}

unsafe fn slice<'a>(p: *const f64, len: usize) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(bad("null array"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| bad("null output pointer"))
}

unsafe fn as_system<'a>(p: *const RnSystem) -> Result<&'a dyn NeuronSystem, Fail> {
    p.as_ref().map(|s| s.inner.as_ref()).ok_or_else(|| bad("null system handle"))
}

/// Message for the most recent failure on this thread, or null. Valid
/// until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn rn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Caption parameters of the sodium-potassium model.
#[no_mangle]
pub extern "C" fn rn_inapik_default_params() -> RnInapikParams {
    let p = resonator::params::inapik_fig2();
    RnInapikParams {
        c_mem: p.c_mem,
        g_l: p.g_l,
        g_na: p.g_na,
        g_k: p.g_k,
        e_l: p.e_l,
        e_na: p.e_na,
        e_k: p.e_k,
        v_half_na: p.v_half_na,
        v_half_k: p.v_half_k,
        k_na: p.k_na,
        k_k: p.k_k,
        tau: p.tau,
    }
}

/// # Safety
/// `params` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rn_inapik_new(params: *const RnInapikParams, out_system: *mut *mut RnSystem) -> RnStatus {
    guard(|| {
        let p = params.as_ref().ok_or_else(|| bad("null params"))?;
        let out_system = out(out_system)?;
        let sys = Inapik::new(InapikParams {
            c_mem: p.c_mem,
            g_l: p.g_l,
            g_na: p.g_na,
            g_k: p.g_k,
            e_l: p.e_l,
            e_na: p.e_na,
            e_k: p.e_k,
            v_half_na: p.v_half_na,
            v_half_k: p.v_half_k,
            k_na: p.k_na,
            k_k: p.k_k,
            tau: p.tau,
        })?;
        *out_system = Box::into_raw(Box::new(RnSystem { inner: Box::new(sys) }));
        Ok(())
    })
}

/// Build the neuron system described by scenario configuration text.
///
/// # Safety
/// `config` must be a NUL-terminated string; `out_system` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rn_system_from_config(config: *const c_char, out_system: *mut *mut RnSystem) -> RnStatus {
    guard(|| {
        let text = as_str(config)?;
        let out_system = out(out_system)?;
        let parsed = validate_scenario(text).map_err(|errs| {
            let msg = errs.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ");
            Fail(RnStatus::InvalidConfig, msg)
        })?;
        let sys = parsed
            .scenario
            .system
            .build()?
            .ok_or_else(|| Fail(RnStatus::InvalidConfig, "configuration describes a device, not a neuron".into()))?;
        *out_system = Box::into_raw(Box::new(RnSystem { inner: sys }));
        Ok(())
    })
}

/// Build the neuron system of a named preset (e.g. `"fig6d"`).
///
/// # Safety
/// `name` must be a NUL-terminated string; `out_system` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rn_system_from_preset(name: *const c_char, out_system: *mut *mut RnSystem) -> RnStatus {
    guard(|| {
        let name = as_str(name)?;
        let out_system = out(out_system)?;
        let preset = find_preset(name).ok_or_else(|| bad(&format!("unknown preset `{name}`")))?;
        let sys = preset
            .scenario
            .system
            .build()?
            .ok_or_else(|| Fail(RnStatus::InvalidConfig, format!("preset `{name}` is a device preset")))?;
        *out_system = Box::into_raw(Box::new(RnSystem { inner: sys }));
        Ok(())
    })
}

/// # Safety
/// `system` must come from a constructor in this library, or be null.
#[no_mangle]
pub unsafe extern "C" fn rn_system_free(system: *mut RnSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

/// State dimension, or 0 for a null handle.
///
/// # Safety
/// `system` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn rn_system_dim(system: *const RnSystem) -> usize {
    system.as_ref().map_or(0, |s| s.inner.dim())
}

/// Time derivatives at `state` (length `dim`) under constant `current`.
///
/// # Safety
/// `state` and `out_deriv` must point to `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn rn_system_derivatives(
    system: *const RnSystem,
    state: *const f64,
    dim: usize,
    current: f64,
    out_deriv: *mut f64,
) -> RnStatus {
    guard(|| {
        let sys = as_system(system)?;
        if dim != sys.dim() || out_deriv.is_null() {
            return Err(bad("dimension mismatch or null output"));
        }
        let y = slice(state, dim)?;
        let d = std::slice::from_raw_parts_mut(out_deriv, dim);
        sys.derivatives(y, current, d)?;
        Ok(())
    })
}

/// Integrate under a constant current from `initial` (length `dim`).
///
/// # Safety
/// Pointers must be valid; `out_traj` receives a handle to free with
/// [`rn_trajectory_free`].
#[no_mangle]
pub unsafe extern "C" fn rn_simulate_constant(
    system: *const RnSystem,
    initial: *const f64,
    dim: usize,
    current: f64,
    t_end: f64,
    tolerance: f64,
    sample_interval: f64,
    out_traj: *mut *mut RnTrajectory,
) -> RnStatus {
    guard(|| {
        let sys = as_system(system)?;
        let y0 = slice(initial, dim)?;
        let out_traj = out(out_traj)?;
        let opts = IntegrateOptions::with_sampling(tolerance, sample_interval);
        let traj = integrate(sys, y0, &InputProtocol::constant(current), t_end, &opts)?;
        *out_traj = Box::into_raw(Box::new(RnTrajectory { inner: traj }));
        Ok(())
    })
}

/// # Safety
/// `traj` must come from this library, or be null.
#[no_mangle]
pub unsafe extern "C" fn rn_trajectory_free(traj: *mut RnTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of samples, or 0 for a null handle.
///
/// # Safety
/// `traj` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn rn_trajectory_len(traj: *const RnTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.inner.len())
}

/// Pointer to the `len` sample times; valid while the handle lives.
///
/// # Safety
/// `traj` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn rn_trajectory_times(traj: *const RnTrajectory) -> *const f64 {
    traj.as_ref().map_or(ptr::null(), |t| t.inner.times.as_ptr())
}

/// Copy state component `k` into `buffer` (capacity `cap`).
///
/// # Safety
/// `buffer` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn rn_trajectory_component(
    traj: *const RnTrajectory,
    k: usize,
    buffer: *mut f64,
    cap: usize,
) -> RnStatus {
    guard(|| {
        let t = &traj.as_ref().ok_or_else(|| bad("null trajectory"))?.inner;
        if t.states.first().is_none_or(|s| k >= s.len()) {
            return Err(bad("component index out of range"));
        }
        if cap < t.len() {
            return Err(Fail(RnStatus::BufferTooSmall, format!("need {} entries", t.len())));
        }
        if buffer.is_null() {
            return Err(bad("null buffer"));
        }
        let dst = std::slice::from_raw_parts_mut(buffer, t.len());
        for (d, s) in dst.iter_mut().zip(&t.states) {
            *d = s[k];
        }
        Ok(())
    })
}

/// Equilibria at constant `current` with voltage in `[v_min, v_max]`.
/// `out_count` receives the number found even when `cap` is too small.
///
/// # Safety
/// `buffer` must hold `cap` entries; `out_count` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rn_find_equilibria(
    system: *const RnSystem,
    current: f64,
    v_min: f64,
    v_max: f64,
    resolution: usize,
    buffer: *mut RnEquilibrium,
    cap: usize,
    out_count: *mut usize,
) -> RnStatus {
    guard(|| {
        let sys = as_system(system)?;
        let count = out(out_count)?;
        let eqs = find_equilibria(sys, current, (v_min, v_max), resolution)?;
        *count = eqs.len();
        if eqs.len() > cap {
            return Err(Fail(RnStatus::BufferTooSmall, format!("need {} entries", eqs.len())));
        }
        if eqs.is_empty() {
            return Ok(());
        }
        if buffer.is_null() {
            return Err(bad("null buffer"));
        }
        for (k, e) in eqs.iter().enumerate() {
            let mut state = [0.0; RN_MAX_DIM];
            state[..e.state.len()].copy_from_slice(&e.state);
            *buffer.add(k) = RnEquilibrium {
                dim: e.state.len(),
                state,
                stability: e.class.into(),
                stable: e.class.is_stable(),
                residual: e.residual,
            };
        }
        Ok(())
    })
}

/// Refine a Hopf point bracketed by `[i_low, i_high]`.
///
/// # Safety
/// `out_current` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rn_hopf_locate(
    system: *const RnSystem,
    i_low: f64,
    i_high: f64,
    tolerance: f64,
    out_current: *mut f64,
) -> RnStatus {
    guard(|| {
        let sys = as_system(system)?;
        let o = out(out_current)?;
        *o = hopf_locate(sys, i_low, i_high, tolerance)?;
        Ok(())
    })
}

/// Drain current of a level-1 MOSFET.
///
/// # Safety
/// `params` and `out_current` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rn_mosfet_ids(
    params: *const RnMosfetParams,
    v_gs: f64,
    v_ds: f64,
    out_current: *mut f64,
) -> RnStatus {
    guard(|| {
        let p = params.as_ref().ok_or_else(|| bad("null params"))?;
        let o = out(out_current)?;
        let polarity = if p.p_channel { Polarity::P } else { Polarity::N };
        let m = MosfetParams::new(polarity, p.k_trans, p.v_t0, p.lambda);
        m.validate()?;
        *o = mosfet_ids(&m, v_gs, v_ds);
        Ok(())
    })
}

/// Memristor current `v / r` and resistance rate at voltage `v`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rn_memristor_eval(
    params: *const RnMemristorParams,
    r: f64,
    v: f64,
    out_current: *mut f64,
    out_rate: *mut f64,
) -> RnStatus {
    guard(|| {
        let p: UnipolarMemristorParams = params.as_ref().ok_or_else(|| bad("null params"))?.into();
        p.validate()?;
        let i = out(out_current)?;
        let dr = out(out_rate)?;
        *i = memristor_current(&p, r, v)?;
        *dr = memristor_rate(&p, r, v)?;
        Ok(())
    })
}

/// Run a scenario given as configuration text, writing its files into
/// `out_dir`. `out_summary` receives the JSON summary; release it with
/// [`rn_string_free`].
///
/// # Safety
/// Strings must be NUL-terminated; `out_summary` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rn_run_scenario(
    config: *const c_char,
    out_dir: *const c_char,
    svg: bool,
    out_summary: *mut *mut c_char,
) -> RnStatus {
    guard(|| {
        let text = as_str(config)?;
        let dir = as_str(out_dir)?;
        let summary_out = out(out_summary)?;
        let parsed = validate_scenario(text).map_err(|errs| {
            let msg = errs.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ");
            Fail(RnStatus::InvalidConfig, msg)
        })?;
        let report = run_scenario(&parsed.scenario, Path::new(dir), svg)?;
        let s = CString::new(report.summary.to_string()).map_err(|_| bad("summary contains NUL"))?;
        *summary_out = s.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library, or be null.
#[no_mangle]
pub unsafe extern "C" fn rn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
