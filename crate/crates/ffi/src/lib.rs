//! C ABI over the `hybf` library.
//!
//! Scenarios and beam matrices are opaque handles created and released by this
//! library. Every fallible call returns a [`HybfStatus`]; on failure a message
//! is available from [`hybf_last_error`] until the next call on the same
//! thread. Complex matrices cross the boundary as row-major interleaved
//! `(re, im)` doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hybf::channel::{generate_scenario, ChannelSet, Scenario, ScenarioParams};
use hybf::methods::{run_method, Method, MethodSettings};
use hybf::objective::{network_utility, BeamMatrix};
use hybf::projection::project_to_papc;
use hybf::sdr::RoundingConfig;
use hybf::{CMatrix, HybfError, C64};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HybfStatus {
    Ok = 0,
    InvalidInput = 1,
    SolverFailure = 2,
    NullPointer = 3,
    Panic = 4,
}

/// Opaque scenario handle.
pub struct HybfScenario {
    scenario: Scenario,
    channels: ChannelSet,
}

/// Opaque beam-matrix handle.
pub struct HybfBeams {
    beams: BeamMatrix,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(e: &HybfError) -> HybfStatus {
    if e.is_solver_failure() {
        HybfStatus::SolverFailure
    } else {
        HybfStatus::InvalidInput
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard<F>(f: F) -> HybfStatus
where
    F: FnOnce() -> Result<(), (HybfStatus, String)>,
{
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HybfStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            HybfStatus::Panic
        }
    }
}

fn lib_err(e: HybfError) -> (HybfStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (HybfStatus, String) {
    (HybfStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (HybfStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (HybfStatus::InvalidInput, format!("{what} is not UTF-8")))
}

fn wrap(scenario: Scenario) -> *mut HybfScenario {
    let channels = ChannelSet::from_scenario(&scenario);
    Box::into_raw(Box::new(HybfScenario { scenario, channels }))
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn hybf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Draws a random scenario with default macro-cell parameters.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn hybf_scenario_generate(
    num_hotspots: usize,
    num_sections: usize,
    seed: u64,
    out: *mut *mut HybfScenario,
) -> HybfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let sc = generate_scenario(&ScenarioParams {
            num_hotspots,
            num_sections,
            seed,
            ..Default::default()
        })
        .map_err(lib_err)?;
        *out = wrap(sc);
        Ok(())
    })
}

/// Parses a scenario from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hybf_scenario_from_json(json: *const c_char, out: *mut *mut HybfScenario) -> HybfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(json, "json")?;
        let sc = Scenario::from_json(text).map_err(lib_err)?;
        sc.validate().map_err(lib_err)?;
        *out = wrap(sc);
        Ok(())
    })
}

/// Serializes a scenario; release the string with [`hybf_string_free`].
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hybf_scenario_to_json(scenario: *const HybfScenario, out: *mut *mut c_char) -> HybfStatus {
    guard(|| {
        let sc = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let text = sc.scenario.to_json().map_err(lib_err)?;
        *out = CString::new(text)
            .map_err(|_| (HybfStatus::InvalidInput, "interior NUL".to_string()))?
            .into_raw();
        Ok(())
    })
}

/// Number of antenna elements M, or 0 for a null handle.
///
/// # Safety
/// `scenario` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hybf_scenario_num_elements(scenario: *const HybfScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.scenario.num_elements())
}

/// Number of hotspots K, or 0 for a null handle.
///
/// # Safety
/// `scenario` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hybf_scenario_num_hotspots(scenario: *const HybfScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.scenario.hotspots.len())
}

/// Number of sections L, or 0 for a null handle.
///
/// # Safety
/// `scenario` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hybf_scenario_num_sections(scenario: *const HybfScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.scenario.num_sections)
}

/// # Safety
/// `scenario` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hybf_scenario_free(scenario: *mut HybfScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn hybf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Runs the named method (e.g. `"GP"`, `"SDR-R"`, `"MB-GP"`). Single-beam
/// methods see all hotspots as one section. `UB` produces no beams and sets
/// `*out_beams` to null.
///
/// # Safety
/// `scenario` must be a live handle, `method` a NUL-terminated string, and
/// `out_beams` / `out_utility_bits` writable (either may be null to skip).
#[no_mangle]
pub unsafe extern "C" fn hybf_optimize(
    scenario: *const HybfScenario,
    method: *const c_char,
    n_trial: usize,
    seed: u64,
    out_beams: *mut *mut HybfBeams,
    out_utility_bits: *mut f64,
) -> HybfStatus {
    guard(|| {
        let sc = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        let method: Method = str_arg(method, "method")?.parse().map_err(lib_err)?;
        let merged;
        let channels = if method.is_single_beam() {
            merged = sc.channels.merged();
            &merged
        } else {
            &sc.channels
        };
        let settings = MethodSettings {
            n_trial,
            seed,
            rounding: RoundingConfig::new(n_trial, seed),
            ..Default::default()
        };
        let outcome = run_method(channels, method, &settings).map_err(lib_err)?;
        if !out_utility_bits.is_null() {
            *out_utility_bits = outcome.utility_bits;
        }
        if !out_beams.is_null() {
            *out_beams = outcome
                .beams
                .map_or(ptr::null_mut(), |beams| Box::into_raw(Box::new(HybfBeams { beams })));
        }
        Ok(())
    })
}

/// Builds a beam handle from row-major interleaved `(re, im)` data of length
/// `2·rows·cols`. The matrix must satisfy the per-antenna power constraint.
///
/// # Safety
/// `data` must point to `2·rows·cols` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hybf_beams_new(
    data: *const f64,
    rows: usize,
    cols: usize,
    out: *mut *mut HybfBeams,
) -> HybfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let m = read_matrix(data, rows, cols)?;
        let beams = BeamMatrix::new(m);
        if !beams.is_feasible() {
            return Err(lib_err(HybfError::Infeasible {
                excess: hybf::projection::feasibility_margin(&beams),
            }));
        }
        *out = Box::into_raw(Box::new(HybfBeams { beams }));
        Ok(())
    })
}

unsafe fn read_matrix(data: *const f64, rows: usize, cols: usize) -> Result<CMatrix, (HybfStatus, String)> {
    if data.is_null() {
        return Err(null("data"));
    }
    if rows == 0 || cols == 0 {
        return Err((HybfStatus::InvalidInput, "matrix dimensions must be positive".into()));
    }
    let raw = std::slice::from_raw_parts(data, 2 * rows * cols);
    if raw.iter().any(|x| !x.is_finite()) {
        return Err(lib_err(HybfError::NonFinite));
    }
    Ok(CMatrix::from_fn(rows, cols, |r, c| {
        let k = 2 * (r * cols + c);
        C64::new(raw[k], raw[k + 1])
    }))
}

unsafe fn write_matrix(m: &CMatrix, data: *mut f64) {
    let out = std::slice::from_raw_parts_mut(data, 2 * m.nrows() * m.ncols());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let k = 2 * (r * m.ncols() + c);
            out[k] = m[(r, c)].re;
            out[k + 1] = m[(r, c)].im;
        }
    }
}

/// # Safety
/// `beams` must be a live handle; `rows` and `cols` writable.
#[no_mangle]
pub unsafe extern "C" fn hybf_beams_dims(beams: *const HybfBeams, rows: *mut usize, cols: *mut usize) -> HybfStatus {
    guard(|| {
        let b = beams.as_ref().ok_or_else(|| null("beams"))?;
        if rows.is_null() || cols.is_null() {
            return Err(null("rows/cols"));
        }
        *rows = b.beams.num_elements();
        *cols = b.beams.num_beams();
        Ok(())
    })
}

/// Copies the matrix into `data` (row-major interleaved, `len` doubles).
///
/// # Safety
/// `beams` must be a live handle and `data` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hybf_beams_copy(beams: *const HybfBeams, data: *mut f64, len: usize) -> HybfStatus {
    guard(|| {
        let b = beams.as_ref().ok_or_else(|| null("beams"))?;
        if data.is_null() {
            return Err(null("data"));
        }
        let m = b.beams.as_matrix();
        let need = 2 * m.nrows() * m.ncols();
        if len < need {
            return Err((HybfStatus::InvalidInput, format!("buffer holds {len} doubles, need {need}")));
        }
        write_matrix(m, data);
        Ok(())
    })
}

/// # Safety
/// `beams` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hybf_beams_free(beams: *mut HybfBeams) {
    if !beams.is_null() {
        drop(Box::from_raw(beams));
    }
}

/// Network utility of `beams` on `scenario`, in bps/Hz. A single column is
/// evaluated against all hotspots as one section.
///
/// # Safety
/// Both handles must be live; `out_bits` writable.
#[no_mangle]
pub unsafe extern "C" fn hybf_utility(
    scenario: *const HybfScenario,
    beams: *const HybfBeams,
    out_bits: *mut f64,
) -> HybfStatus {
    guard(|| {
        let sc = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        let b = beams.as_ref().ok_or_else(|| null("beams"))?;
        if out_bits.is_null() {
            return Err(null("out_bits"));
        }
        let report = if b.beams.num_beams() == 1 && sc.channels.num_sections() > 1 {
            network_utility(&b.beams, &sc.channels.merged())
        } else {
            network_utility(&b.beams, &sc.channels)
        }
        .map_err(lib_err)?;
        *out_bits = report.utility_bits;
        Ok(())
    })
}

/// Projects a row-major interleaved matrix onto the per-antenna power set in
/// place.
///
/// # Safety
/// `data` must hold `2·rows·cols` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn hybf_project(data: *mut f64, rows: usize, cols: usize) -> HybfStatus {
    guard(|| {
        let m = read_matrix(data, rows, cols)?;
        let p = project_to_papc(&m).map_err(lib_err)?;
        write_matrix(p.as_matrix(), data);
        Ok(())
    })
}
