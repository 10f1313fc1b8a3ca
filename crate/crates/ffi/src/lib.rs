//! C ABI for `polcomp`.
//!
//! Every fallible function returns a [`PolcompStatus`] and writes results
//! through out-pointers. After a non-OK status, [`polcomp_last_error`] gives a
//! message for the calling thread. Handles are opaque and must be released
//! with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use polcomp::devices::{DeviceError, LcvrStack};
use polcomp::harness::scenario::Session;
use polcomp::harness::{run_scenario, HarnessError, ScenarioConfig};
use num_complex::Complex64;
use polcomp::optimizer::{shrink_radius, SearchConfig};
use polcomp::polcore::Unitary2;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolcompStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Simulation = 5,
    DecompositionFailed = 6,
    Panic = 7,
}

/// Retarder stack handle.
pub struct PolcompStack(LcvrStack);

/// Stepwise optimize-run handle.
pub struct PolcompSession(Session);

/// 2x2 complex matrix, row-major: element (r, c) is `re[2r + c] + i im[2r + c]`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PolcompUnitary {
    pub re: [f64; 4],
    pub im: [f64; 4],
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolcompSearchParams {
    pub points_per_iteration: u32,
    /// Volts.
    pub shrink_gain: f64,
    pub shrink_exponent: f64,
    pub qber_threshold: f64,
    pub r_min: f64,
    pub r_max: f64,
}

/// One completed search iteration.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PolcompIteration {
    pub iteration: u64,
    /// Simulated seconds since the start of the run.
    pub elapsed_s: f64,
    pub best_qber: f64,
    /// Noise-free QBER at the new center when it was measured.
    pub center_true_qber: f64,
    pub center: [f64; 4],
    pub range_v: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PolcompRunSummary {
    pub seed: u64,
    pub iterations: u64,
    pub initial_qber: f64,
    pub final_qber: f64,
    /// -1 when the run never reached the convergence level.
    pub iters_to_floor: i64,
    pub recovered_jumps: u64,
}

struct Failure(PolcompStatus, String);

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        let status = match e {
            HarnessError::Config { .. } => PolcompStatus::Config,
            HarnessError::Io { .. } => PolcompStatus::Io,
            HarnessError::Simulation(_) => PolcompStatus::Simulation,
        };
        Failure(status, e.to_string())
    }
}

impl From<DeviceError> for Failure {
    fn from(e: DeviceError) -> Self {
        let status = match e {
            DeviceError::DecompositionFailed { .. } => PolcompStatus::DecompositionFailed,
            DeviceError::Io { .. } => PolcompStatus::Io,
            DeviceError::CalibrationParse { .. } | DeviceError::InvalidCalibration(_) => PolcompStatus::Config,
            DeviceError::VoltageOutOfRange { .. } => PolcompStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> PolcompStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PolcompStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            PolcompStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(PolcompStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(PolcompStatus::InvalidArgument, msg.into())
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn read_voltages(p: *const f64) -> Result<[f64; 4], Failure> {
    if p.is_null() {
        return Err(null("voltages"));
    }
    Ok(std::array::from_fn(|i| *p.add(i)))
}

fn config_from(toml: Option<&str>) -> Result<ScenarioConfig, Failure> {
    let cfg = match toml {
        Some(text) => ScenarioConfig::from_toml_str(text)?,
        None => ScenarioConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn to_c(u: &Unitary2) -> PolcompUnitary {
    let mut out = PolcompUnitary::default();
    for r in 0..2 {
        for c in 0..2 {
            out.re[2 * r + c] = u.0[r][c].re;
            out.im[2 * r + c] = u.0[r][c].im;
        }
    }
    out
}

fn from_c(u: &PolcompUnitary) -> Unitary2 {
    let e = |i: usize| Complex64::new(u.re[i], u.im[i]);
    Unitary2([[e(0), e(1)], [e(2), e(3)]])
}

fn params_of(cfg: &SearchConfig) -> PolcompSearchParams {
    PolcompSearchParams {
        points_per_iteration: cfg.points_per_iteration as u32,
        shrink_gain: cfg.shrink_gain,
        shrink_exponent: cfg.shrink_exponent,
        qber_threshold: cfg.qber_threshold,
        r_min: cfg.r_min,
        r_max: cfg.r_max,
    }
}

/// Static description of a status code. Never null.
#[no_mangle]
pub extern "C" fn polcomp_status_message(status: PolcompStatus) -> *const c_char {
    let s: &'static CStr = match status {
        PolcompStatus::Ok => c"ok",
        PolcompStatus::NullPointer => c"null pointer argument",
        PolcompStatus::InvalidArgument => c"invalid argument",
        PolcompStatus::Config => c"invalid configuration",
        PolcompStatus::Io => c"i/o error",
        PolcompStatus::Simulation => c"simulation failed",
        PolcompStatus::DecompositionFailed => c"target unitary not reachable",
        PolcompStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}

/// Message for the last failed call on this thread, or null after a
/// successful call. Valid until the next call into this library on the same
/// thread.
#[no_mangle]
pub extern "C" fn polcomp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, e.g. `"0.1.0"`.
#[no_mangle]
pub extern "C" fn polcomp_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    VERSION.as_ptr()
}

/// Fills `out` with the default search parameters.
///
/// # Safety
/// `out` must be null or point to writable memory for one struct.
#[no_mangle]
pub unsafe extern "C" fn polcomp_search_params_default(out: *mut PolcompSearchParams) -> PolcompStatus {
    guard(|| {
        *out_ref(out, "out")? = params_of(&SearchConfig::default());
        Ok(())
    })
}

/// Search range for a best QBER `q_min`: `clamp(A max(q_min - threshold, 0)^B, r_min, r_max)`.
/// `params` may be null for the defaults.
///
/// # Safety
/// `params` must be null or valid; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn polcomp_shrink_radius(
    q_min: f64,
    params: *const PolcompSearchParams,
    out: *mut f64,
) -> PolcompStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let mut cfg = SearchConfig::default();
        if let Some(p) = params.as_ref() {
            cfg.points_per_iteration = p.points_per_iteration as usize;
            cfg.shrink_gain = p.shrink_gain;
            cfg.shrink_exponent = p.shrink_exponent;
            cfg.qber_threshold = p.qber_threshold;
            cfg.r_min = p.r_min;
            cfg.r_max = p.r_max;
        }
        cfg.validate().map_err(|e| Failure(PolcompStatus::Config, e.to_string()))?;
        if !q_min.is_finite() {
            return Err(invalid("q_min must be finite"));
        }
        *out = shrink_radius(q_min, &cfg);
        Ok(())
    })
}

/// Creates a stack with the default calibration on all four channels.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn polcomp_stack_new_default(out: *mut *mut PolcompStack) -> PolcompStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = Box::into_raw(Box::new(PolcompStack(LcvrStack::default())));
        Ok(())
    })
}

/// Creates the stack described by the `[lcvr]` section of a TOML scenario.
/// Relative calibration-file paths resolve against the working directory.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn polcomp_stack_from_toml(toml: *const c_char, out: *mut *mut PolcompStack) -> PolcompStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let cfg = config_from(Some(read_str(toml, "toml")?))?;
        *out = Box::into_raw(Box::new(PolcompStack(cfg.resolved_stack()?)));
        Ok(())
    })
}

/// Releases a stack. Null is ignored.
///
/// # Safety
/// `stack` must come from a `polcomp_stack_*` constructor and not be used again.
#[no_mangle]
pub unsafe extern "C" fn polcomp_stack_free(stack: *mut PolcompStack) {
    if !stack.is_null() {
        drop(Box::from_raw(stack));
    }
}

/// Retardance in radians of channel `channel` (0..=3) at `voltage`.
///
/// # Safety
/// `stack` must be a live handle or null; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn polcomp_stack_retardance(
    stack: *const PolcompStack,
    channel: u32,
    voltage: f64,
    out: *mut f64,
) -> PolcompStatus {
    guard(|| {
        let stack = stack.as_ref().ok_or_else(|| null("stack"))?;
        let out = out_ref(out, "out")?;
        let ch = stack
            .0
            .channels
            .get(channel as usize)
            .ok_or_else(|| invalid(format!("channel {channel} out of 0..=3")))?;
        *out = ch.retardance_of_voltage(voltage)?;
        Ok(())
    })
}

/// Jones matrix of the stack at four voltages (plate 1 first in the light path).
///
/// # Safety
/// `voltages` must point to 4 doubles; `stack` live or null; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn polcomp_stack_unitary(
    stack: *const PolcompStack,
    voltages: *const f64,
    out: *mut PolcompUnitary,
) -> PolcompStatus {
    guard(|| {
        let stack = stack.as_ref().ok_or_else(|| null("stack"))?;
        let v = read_voltages(voltages)?;
        let out = out_ref(out, "out")?;
        *out = to_c(&stack.0.stack_unitary(&v)?);
        Ok(())
    })
}

/// Voltages realizing `target` up to global phase. On success writes 4
/// doubles to `voltages_out` and the trace fidelity to `fidelity_out`; on
/// `DECOMPOSITION_FAILED` writes the closest setting found and its fidelity.
/// `fidelity_out` may be null.
///
/// # Safety
/// `voltages_out` must point to 4 writable doubles; other pointers valid or null.
#[no_mangle]
pub unsafe extern "C" fn polcomp_stack_decompose(
    stack: *const PolcompStack,
    target: *const PolcompUnitary,
    voltages_out: *mut f64,
    fidelity_out: *mut f64,
) -> PolcompStatus {
    guard(|| {
        let stack = stack.as_ref().ok_or_else(|| null("stack"))?;
        let target = from_c(target.as_ref().ok_or_else(|| null("target"))?);
        if voltages_out.is_null() {
            return Err(null("voltages_out"));
        }
        if target.unitarity_error() > 1e-9 {
            return Err(invalid("target is not unitary"));
        }
        let write = |v: &[f64; 4], f: f64| {
            for (i, x) in v.iter().enumerate() {
                *voltages_out.add(i) = *x;
            }
            if let Some(out) = fidelity_out.as_mut() {
                *out = f;
            }
        };
        match stack.0.decompose_to_voltages(&target) {
            Ok(v) => {
                let f = stack.0.stack_unitary(&v)?.trace_fidelity(&target);
                write(&v, f);
                Ok(())
            }
            Err(DeviceError::DecompositionFailed { best_fidelity, closest }) => {
                write(&closest, best_fidelity);
                Err(DeviceError::DecompositionFailed { best_fidelity, closest }.into())
            }
            Err(e) => Err(e.into()),
        }
    })
}

/// Starts a stepwise optimize run. `toml` may be null for the default
/// scenario; `seed` replaces the configured seed.
///
/// # Safety
/// `toml` null or NUL-terminated; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn polcomp_session_new(
    toml: *const c_char,
    seed: u64,
    out: *mut *mut PolcompSession,
) -> PolcompStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let text = if toml.is_null() { None } else { Some(read_str(toml, "toml")?) };
        let mut cfg = config_from(text)?;
        cfg.run.seed = seed;
        *out = Box::into_raw(Box::new(PolcompSession(Session::new(&cfg)?)));
        Ok(())
    })
}

/// Runs one search iteration and reports it through `out` (may be null).
///
/// # Safety
/// `session` must be a live handle or null; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn polcomp_session_step(session: *mut PolcompSession, out: *mut PolcompIteration) -> PolcompStatus {
    guard(|| {
        let session = session.as_mut().ok_or_else(|| null("session"))?;
        let it = session.0.step()?;
        if let Some(out) = out.as_mut() {
            *out = PolcompIteration {
                iteration: it.iteration,
                elapsed_s: it.elapsed,
                best_qber: it.best_estimate,
                center_true_qber: it.center_true_qber,
                center: it.center,
                range_v: it.range,
            };
        }
        Ok(())
    })
}

/// Noise-free QBER at the current search center, at the current fiber state.
///
/// # Safety
/// `session` live or null; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn polcomp_session_true_qber(session: *const PolcompSession, out: *mut f64) -> PolcompStatus {
    guard(|| {
        let session = session.as_ref().ok_or_else(|| null("session"))?;
        let out = out_ref(out, "out")?;
        *out = session.0.plant().true_qber_at(&session.0.state().center)?;
        Ok(())
    })
}

/// Releases a session. Null is ignored.
///
/// # Safety
/// `session` must come from `polcomp_session_new` and not be used again.
#[no_mangle]
pub unsafe extern "C" fn polcomp_session_free(session: *mut PolcompSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Runs the scenario in `toml` to completion. A non-null `out_prefix`
/// overrides `run.output_prefix`; CSV files are written only when a prefix is
/// set. `out` may be null.
///
/// # Safety
/// `toml` must be NUL-terminated; `out_prefix` null or NUL-terminated; `out`
/// null or writable.
#[no_mangle]
pub unsafe extern "C" fn polcomp_run_scenario(
    toml: *const c_char,
    out_prefix: *const c_char,
    out: *mut PolcompRunSummary,
) -> PolcompStatus {
    guard(|| {
        let mut cfg = config_from(Some(read_str(toml, "toml")?))?;
        if !out_prefix.is_null() {
            cfg.run.output_prefix = Some(read_str(out_prefix, "out_prefix")?.to_string());
        }
        let s = run_scenario(&cfg)?.summary;
        if let Some(out) = out.as_mut() {
            *out = PolcompRunSummary {
                seed: s.seed,
                iterations: s.iterations,
                initial_qber: s.initial_qber,
                final_qber: s.final_qber,
                iters_to_floor: s.iters_to_floor.map_or(-1, |n| n as i64),
                recovered_jumps: s.recovered_jumps,
            };
        }
        Ok(())
    })
}
