//! C ABI over the `freshcache` solver.
//!
//! Scenarios and results are opaque heap handles released with their `_free`
//! function. Every fallible call returns an [`FcStatus`]; on failure the
//! message is available from [`fc_last_error_message`] on the same thread.
//! Strings returned through `char **` outputs must be released with
//! [`fc_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use freshcache::rate_alloc::{allocate, AllocationEntry, AllocationInput};
use freshcache::scenario_io::{fixture, parse_scenario, write_result_table, TableStyle};
use freshcache::search::{solve_exhaustive, solve_sampled, SearchConfig, SolveResult};
use freshcache::{Error, Scenario};

/// Status codes. The non-zero error values match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FcStatus {
    Ok = 0,
    Invalid = 2,
    Infeasible = 3,
    Budget = 4,
    Io = 5,
    NullArgument = 10,
    InvalidUtf8 = 11,
    Panic = 12,
}

/// A validated problem instance.
pub struct FcScenario(Scenario);

/// The outcome of a placement search.
pub struct FcSolveResult(SolveResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> FcStatus {
    match e.exit_code() {
        3 => FcStatus::Infeasible,
        4 => FcStatus::Budget,
        5 => FcStatus::Io,
        _ => FcStatus::Invalid,
    }
}

fn guard(f: impl FnOnce() -> Result<(), FcStatus>) -> FcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FcStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic".into());
            FcStatus::Panic
        }
    }
}

fn fail(e: Error) -> FcStatus {
    let status = status_of(&e);
    set_error(e.to_string());
    status
}

fn null(what: &str) -> FcStatus {
    set_error(format!("{what} is null"));
    FcStatus::NullArgument
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, FcStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        FcStatus::InvalidUtf8
    })
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, FcStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, FcStatus> {
    p.as_mut().ok_or_else(|| null(what))
}

fn config(allow_empty_relay: bool, threads: u32) -> SearchConfig {
    SearchConfig {
        allow_empty_relay,
        threads: (threads > 0).then_some(threads as usize),
        ..SearchConfig::default()
    }
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses and validates a TOML scenario.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_scenario_from_str(toml: *const c_char, out: *mut *mut FcScenario) -> FcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let text = str_arg(toml, "toml")?;
        let scenario = parse_scenario(text).map_err(fail)?;
        *out = Box::into_raw(Box::new(FcScenario(scenario)));
        Ok(())
    })
}

/// Loads one of the bundled scenarios by name, e.g. `"table1"`.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_scenario_from_fixture(name: *const c_char, out: *mut *mut FcScenario) -> FcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let name = str_arg(name, "name")?;
        let scenario = fixture(name).map_err(fail)?;
        *out = Box::into_raw(Box::new(FcScenario(scenario)));
        Ok(())
    })
}

/// # Safety
/// `scenario` must come from this library and not be freed twice. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn fc_scenario_free(scenario: *mut FcScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Writes the file, user and relay counts. Any output pointer may be NULL.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fc_scenario_counts(
    scenario: *const FcScenario,
    files: *mut u32,
    users: *mut u32,
    relays: *mut u32,
) -> FcStatus {
    guard(|| {
        let s = &ref_arg(scenario, "scenario")?.0;
        if let Some(f) = files.as_mut() {
            *f = s.file_count() as u32;
        }
        if let Some(u) = users.as_mut() {
            *u = s.user_count() as u32;
        }
        if let Some(r) = relays.as_mut() {
            *r = s.relay_count() as u32;
        }
        Ok(())
    })
}

/// Exhaustive placement search. `threads == 0` uses all cores.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_solve_exhaustive(
    scenario: *const FcScenario,
    allow_empty_relay: bool,
    threads: u32,
    out: *mut *mut FcSolveResult,
) -> FcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let s = &ref_arg(scenario, "scenario")?.0;
        let result = solve_exhaustive(s, &config(allow_empty_relay, threads)).map_err(fail)?;
        *out = Box::into_raw(Box::new(FcSolveResult(result)));
        Ok(())
    })
}

/// Seeded local search evaluating at most `budget` placements.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_solve_sampled(
    scenario: *const FcScenario,
    budget: u64,
    seed: u64,
    allow_empty_relay: bool,
    threads: u32,
    out: *mut *mut FcSolveResult,
) -> FcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let s = &ref_arg(scenario, "scenario")?.0;
        let result = solve_sampled(s, budget, seed, &config(allow_empty_relay, threads)).map_err(fail)?;
        *out = Box::into_raw(Box::new(FcSolveResult(result)));
        Ok(())
    })
}

/// # Safety
/// `result` must come from this library and not be freed twice. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn fc_result_free(result: *mut FcSolveResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Objective summed over users.
///
/// # Safety
/// `result` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_result_objective_sum(result: *const FcSolveResult, out: *mut f64) -> FcStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(result, "result")?.0.objective.sum_form;
        Ok(())
    })
}

/// Objective averaged over users.
///
/// # Safety
/// `result` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_result_objective_mean(result: *const FcSolveResult, out: *mut f64) -> FcStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(result, "result")?.0.objective.mean_form;
        Ok(())
    })
}

/// # Safety
/// `result` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_result_evaluated_count(result: *const FcSolveResult, out: *mut u64) -> FcStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(result, "result")?.0.evaluated_count;
        Ok(())
    })
}

/// Relay caching `(user, file)` and the rate it spends on it.
/// `relay` and `rate` may each be NULL.
///
/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fc_result_holding(
    result: *const FcSolveResult,
    user: u32,
    file: u32,
    relay: *mut u32,
    rate: *mut f64,
) -> FcStatus {
    guard(|| {
        let r = &ref_arg(result, "result")?.0;
        let Some(k) = r.best_scheme.relay_of(user, file) else {
            return Err(fail(Error::Domain(format!("no holding (user {user}, file {file})"))));
        };
        if let Some(out) = relay.as_mut() {
            *out = k;
        }
        if let Some(out) = rate.as_mut() {
            *out = r
                .best_rates
                .get(k as usize - 1)
                .and_then(|a| a.rate(user, file))
                .unwrap_or(0.0);
        }
        Ok(())
    })
}

/// The result table as CSV. Release with [`fc_string_free`].
///
/// # Safety
/// `result` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_result_table_csv(result: *const FcSolveResult, out: *mut *mut c_char) -> FcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let text = write_result_table(&ref_arg(result, "result")?.0, TableStyle::Csv);
        *out = CString::new(text).map_err(|e| fail(Error::Domain(e.to_string())))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be freed twice. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn fc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Optimal split of `budget` across `n` holdings of one relay. Holding `i`
/// has user rate `user_rates[i]` and server rate `server_rates[i]`; its rate
/// is written to `rates_out[i]`.
///
/// # Safety
/// All three arrays must hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn fc_allocate(
    user_rates: *const f64,
    server_rates: *const f64,
    n: usize,
    budget: f64,
    rates_out: *mut f64,
) -> FcStatus {
    guard(|| {
        if user_rates.is_null() || server_rates.is_null() || rates_out.is_null() {
            return Err(null("rate array"));
        }
        let u = std::slice::from_raw_parts(user_rates, n);
        let s = std::slice::from_raw_parts(server_rates, n);
        let entries = (0..n).map(|i| AllocationEntry::new((1, i as u32 + 1), u[i], s[i])).collect();
        let alloc = allocate(&AllocationInput::new(entries, budget)).map_err(fail)?;
        let out = std::slice::from_raw_parts_mut(rates_out, n);
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = alloc.rate(1, i as u32 + 1).unwrap_or(0.0);
        }
        Ok(())
    })
}

/// Freshness of one holding given its user, server and relay rates.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_file_freshness(user_rate: f64, server_rate: f64, relay_rate: f64, out: *mut f64) -> FcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = freshcache::file_freshness(user_rate, server_rate, relay_rate).map_err(fail)?.value();
        Ok(())
    })
}
