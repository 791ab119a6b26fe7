//! C ABI for `gilbert-hsd`.
//!
//! Every fallible function returns a [`GhsdStatus`]; on failure the message
//! is available from [`ghsd_last_error`] on the same thread. Handles are
//! opaque and must be released with their `_free` function. Strings
//! returned by the library are released with [`ghsd_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gilbert_hsd::analysis::{build_witness, fit_extrapolation_records, fit_power_records};
use gilbert_hsd::gilbert::{HaltCriteria, RunState, TraceRecord};
use gilbert_hsd::io::StateFile;
use gilbert_hsd::linalg::{hsd_sq, DensityMatrix};
use gilbert_hsd::states::{named_state, DeviateSource, SamplerConfig, SamplingMode};
use gilbert_hsd::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GhsdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Validation = 4,
    Capacity = 5,
    Degenerate = 6,
    Io = 7,
    Format = 8,
    Panic = 9,
}

/// A validated density matrix.
pub struct GhsdState {
    inner: DensityMatrix,
}

/// A Gilbert run together with every correction it has accepted.
pub struct GhsdRun {
    state: RunState,
    records: Vec<TraceRecord>,
}

/// Stopping rules. Zero counts and a NaN target mean "not set".
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GhsdHalt {
    pub max_successes: u64,
    pub max_trials: u64,
    pub target_d2: f64,
    pub stall_trials: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct GhsdTraceRecord {
    pub c_t: u64,
    pub c_s: u64,
    pub d2: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct GhsdWitnessReport {
    pub lambda: f64,
    pub value_rho0: f64,
    pub margin: f64,
    pub entangled: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct GhsdFitReport {
    pub a: f64,
    pub b: f64,
    pub r: f64,
    pub f: f64,
    pub r2: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> GhsdStatus {
    match e {
        Error::Dimension(_) => GhsdStatus::Dimension,
        Error::Validation(_) => GhsdStatus::Validation,
        Error::Parameter(_) => GhsdStatus::InvalidArgument,
        Error::Capacity { .. } => GhsdStatus::Capacity,
        Error::Degenerate(_) => GhsdStatus::Degenerate,
        Error::Io(_) => GhsdStatus::Io,
        Error::Format(_) => GhsdStatus::Format,
    }
}

struct Fail(GhsdStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(GhsdStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording any error or panic.
fn guard<F>(f: F) -> GhsdStatus
where
    F: FnOnce() -> Result<(), Fail>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            GhsdStatus::Ok
        }
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic".into());
            GhsdStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(GhsdStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn ghsd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn ghsd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a named reference state such as `bell` or `ghz:3`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ghsd_state_named(
    name: *const c_char,
    out: *mut *mut GhsdState,
) -> GhsdStatus {
    guard(|| {
        let name = str_arg(name, "name")?;
        let out = out_arg(out, "out")?;
        let inner = named_state(name)?;
        *out = Box::into_raw(Box::new(GhsdState { inner }));
        Ok(())
    })
}

/// Parses a state file document.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ghsd_state_from_json(
    json: *const c_char,
    out: *mut *mut GhsdState,
) -> GhsdStatus {
    guard(|| {
        let json = str_arg(json, "json")?;
        let out = out_arg(out, "out")?;
        let inner = StateFile::from_json(json)?.to_density()?;
        *out = Box::into_raw(Box::new(GhsdState { inner }));
        Ok(())
    })
}

/// Serializes a state in the state file format. Free the result with
/// `ghsd_string_free`.
///
/// # Safety
/// `state` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ghsd_state_to_json(
    state: *const GhsdState,
    out: *mut *mut c_char,
) -> GhsdStatus {
    guard(|| {
        let state = ref_arg(state, "state")?;
        let out = out_arg(out, "out")?;
        let json = StateFile::from_density(&state.inner).to_json()?;
        *out = CString::new(json)
            .map_err(|e| Fail(GhsdStatus::Format, e.to_string()))?
            .into_raw();
        Ok(())
    })
}

/// Matrix dimension of the state, or 0 for NULL.
///
/// # Safety
/// `state` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ghsd_state_size(state: *const GhsdState) -> usize {
    state.as_ref().map_or(0, |s| s.inner.size())
}

/// Number of parties, or 0 for NULL.
///
/// # Safety
/// `state` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ghsd_state_num_parties(state: *const GhsdState) -> usize {
    state.as_ref().map_or(0, |s| s.inner.dims().len())
}

/// Copies the subsystem dimensions into `dims`, which holds `len` entries.
///
/// # Safety
/// `state` must be a live handle and `dims` point to `len` writable entries.
#[no_mangle]
pub unsafe extern "C" fn ghsd_state_dims(
    state: *const GhsdState,
    dims: *mut usize,
    len: usize,
) -> GhsdStatus {
    guard(|| {
        let state = ref_arg(state, "state")?;
        let src = state.inner.dims();
        if dims.is_null() {
            return Err(null("dims"));
        }
        if len < src.len() {
            return Err(Fail(
                GhsdStatus::InvalidArgument,
                format!("buffer holds {len} entries, need {}", src.len()),
            ));
        }
        std::slice::from_raw_parts_mut(dims, src.len()).copy_from_slice(src);
        Ok(())
    })
}

/// # Safety
/// `state` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ghsd_state_free(state: *mut GhsdState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Squared Hilbert-Schmidt distance Tr(a - b)².
///
/// # Safety
/// `a`, `b` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ghsd_hsd_sq(
    a: *const GhsdState,
    b: *const GhsdState,
    out: *mut f64,
) -> GhsdStatus {
    guard(|| {
        let (a, b) = (ref_arg(a, "a")?, ref_arg(b, "b")?);
        let out = out_arg(out, "out")?;
        *out = hsd_sq(&a.inner, &b.inner)?;
        Ok(())
    })
}

/// Starts a run on `rho0`. `init` may be NULL for the maximally mixed state.
///
/// # Safety
/// `rho0` must be a live handle, `init` NULL or a live handle, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ghsd_run_new(
    rho0: *const GhsdState,
    init: *const GhsdState,
    seed: u64,
    real_only: bool,
    box_muller: bool,
    out: *mut *mut GhsdRun,
) -> GhsdStatus {
    guard(|| {
        let rho0 = ref_arg(rho0, "rho0")?;
        let out = out_arg(out, "out")?;
        let init = init.as_ref().map(|s| s.inner.clone());
        let cfg = SamplerConfig {
            mode: if real_only {
                SamplingMode::Real
            } else {
                SamplingMode::Complex
            },
            seed,
            source: if box_muller {
                DeviateSource::BoxMuller
            } else {
                DeviateSource::Gaussian
            },
        };
        let state = RunState::new(rho0.inner.clone(), init, None, cfg)?;
        *out = Box::into_raw(Box::new(GhsdRun {
            state,
            records: Vec::new(),
        }));
        Ok(())
    })
}

/// Continues the run until a halt rule fires. Counters are cumulative, so a
/// second call with the same limits returns immediately.
///
/// # Safety
/// `run` must be a live handle and `halt` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ghsd_run_execute(run: *mut GhsdRun, halt: *const GhsdHalt) -> GhsdStatus {
    guard(|| {
        let run = out_arg(run, "run")?;
        let h = ref_arg(halt, "halt")?;
        let some = |n: u64| (n > 0).then_some(n);
        let halt = HaltCriteria {
            max_successes: some(h.max_successes),
            max_trials: some(h.max_trials),
            target_d2: (!h.target_d2.is_nan()).then_some(h.target_d2),
            stall_trials: some(h.stall_trials),
        };
        let trace = run.state.run(&halt)?;
        run.records.extend_from_slice(trace.records());
        Ok(())
    })
}

/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ghsd_run_d2(run: *const GhsdRun, out: *mut f64) -> GhsdStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(run, "run")?.state.d2();
        Ok(())
    })
}

/// # Safety
/// `run` must be a live handle; `trials` and `successes` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ghsd_run_counters(
    run: *const GhsdRun,
    trials: *mut u64,
    successes: *mut u64,
) -> GhsdStatus {
    guard(|| {
        let run = ref_arg(run, "run")?;
        *out_arg(trials, "trials")? = run.state.trials();
        *out_arg(successes, "successes")? = run.state.successes();
        Ok(())
    })
}

/// Number of accepted corrections recorded, or 0 for NULL.
///
/// # Safety
/// `run` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ghsd_run_trace_len(run: *const GhsdRun) -> usize {
    run.as_ref().map_or(0, |r| r.records.len())
}

/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ghsd_run_trace_get(
    run: *const GhsdRun,
    index: usize,
    out: *mut GhsdTraceRecord,
) -> GhsdStatus {
    guard(|| {
        let run = ref_arg(run, "run")?;
        let out = out_arg(out, "out")?;
        let r = run.records.get(index).ok_or_else(|| {
            Fail(
                GhsdStatus::InvalidArgument,
                format!(
                    "index {index} out of range for {} records",
                    run.records.len()
                ),
            )
        })?;
        *out = GhsdTraceRecord {
            c_t: r.c_t,
            c_s: r.c_s,
            d2: r.d2,
        };
        Ok(())
    })
}

/// Copies the current separable iterate into a new state handle.
///
/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ghsd_run_rho1(
    run: *const GhsdRun,
    out: *mut *mut GhsdState,
) -> GhsdStatus {
    guard(|| {
        let run = ref_arg(run, "run")?;
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(GhsdState {
            inner: run.state.rho1(),
        }));
        Ok(())
    })
}

/// Fits the distance limit and the power law on the recorded trace.
///
/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ghsd_run_fit(
    run: *const GhsdRun,
    stride: u64,
    out: *mut GhsdFitReport,
) -> GhsdStatus {
    guard(|| {
        let run = ref_arg(run, "run")?;
        let out = out_arg(out, "out")?;
        let ext = fit_extrapolation_records(&run.records, stride)?;
        let power = fit_power_records(&run.records)?;
        *out = GhsdFitReport {
            a: ext.a,
            b: ext.b,
            r: ext.r,
            f: power.f,
            r2: power.r2,
        };
        Ok(())
    })
}

/// # Safety
/// `run` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ghsd_run_free(run: *mut GhsdRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Witness W = (ρ₀ - ρ₁) - λI with λ from `restarts` alternating ascents.
///
/// # Safety
/// `rho0`, `rho1` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ghsd_witness(
    rho0: *const GhsdState,
    rho1: *const GhsdState,
    restarts: usize,
    seed: u64,
    out: *mut GhsdWitnessReport,
) -> GhsdStatus {
    guard(|| {
        let (rho0, rho1) = (ref_arg(rho0, "rho0")?, ref_arg(rho1, "rho1")?);
        let out = out_arg(out, "out")?;
        let w = build_witness(&rho0.inner, &rho1.inner, restarts, seed)?;
        *out = GhsdWitnessReport {
            lambda: w.lambda,
            value_rho0: w.value_rho0,
            margin: w.margin(),
            entangled: w.entangled(),
        };
        Ok(())
    })
}
