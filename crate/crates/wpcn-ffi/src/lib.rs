//! C ABI for the wpcn solvers.
//!
//! The surface follows the familiar opaque-handle pattern: a
//! [`wpcn_problem`] bundles the system parameters with one channel draw, a
//! [`wpcn_solution`] owns one solver outcome, and every fallible call
//! returns a [`wpcn_status`] code with out-parameters for results. Handles
//! are created and released exclusively through this API; the header
//! `include/wpcn.h` is generated from these declarations at build time.
//!
//! Error handling: on any non-[`wpcn_status::WPCN_OK`] return the caller
//! may fetch a human-readable message via [`wpcn_last_error_message`]; the
//! pointer stays valid on the calling thread until its next failing call.
//! Panics never unwind across the boundary — they surface as
//! [`wpcn_status::WPCN_ERR_PANIC`].
//!
//! Thread safety: handles are immutable after creation and may be shared
//! across threads; the error message is thread-local.

#![allow(non_camel_case_types)]

use std::cell::RefCell;
use std::ffi::CString;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use libc::{c_char, size_t};

use wpcn::experiments::{solve_mode, Mode};
use wpcn::model::{ChannelState, SolverResult, SystemParams};

/// Status code returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum wpcn_status {
    /// Success.
    WPCN_OK = 0,
    /// A required pointer argument was null.
    WPCN_ERR_NULL_ARGUMENT = 1,
    /// Arguments failed validation (dimensions, ranges, unknown mode).
    WPCN_ERR_INVALID_ARGUMENT = 2,
    /// The solver reported an error or did not converge.
    WPCN_ERR_SOLVER_FAILED = 3,
    /// An output buffer was smaller than the required length.
    WPCN_ERR_BUFFER_TOO_SMALL = 4,
    /// An internal panic was caught at the boundary.
    WPCN_ERR_PANIC = 5,
}

/// Operating mode selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum wpcn_mode {
    /// Full duplex, perfect self-interference cancellation.
    WPCN_MODE_FD_PERFECT = 0,
    /// Full duplex with residual self-interference.
    WPCN_MODE_FD_SI = 1,
    /// Half duplex (charge-then-transmit).
    WPCN_MODE_HD = 2,
}

/// Opaque problem handle: system parameters plus one channel realization.
#[repr(C)]
pub struct wpcn_problem {
    _private: [u8; 0],
}

/// Opaque solution handle: one solver outcome.
#[repr(C)]
pub struct wpcn_solution {
    _private: [u8; 0],
}

struct ProblemInner {
    params: SystemParams,
    channels: ChannelState,
}

struct SolutionInner {
    result: SolverResult,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(status: wpcn_status, message: &str) -> wpcn_status {
    set_error(message);
    status
}

/// Message for the most recent failure on this thread, empty if none.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn wpcn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn wpcn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Shields the boundary from unwinding.
fn guarded(body: impl FnOnce() -> wpcn_status) -> wpcn_status {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(wpcn_status::WPCN_ERR_PANIC, "internal panic"),
    }
}

unsafe fn problem_ref<'a>(handle: *const wpcn_problem) -> Option<&'a ProblemInner> {
    (handle as *const ProblemInner).as_ref()
}

unsafe fn solution_ref<'a>(handle: *const wpcn_solution) -> Option<&'a SolutionInner> {
    (handle as *const SolutionInner).as_ref()
}

/// Creates a problem handle.
///
/// `theta`, `weights`, and `h` are arrays of length `num_users` holding the
/// per-user harvesting efficiencies, objective weights, and end-to-end
/// channel power gains. `p_peak` may be `INFINITY` for an unconstrained
/// peak; `si_gamma` is the residual self-interference coefficient (0 for
/// perfect cancellation). On success writes the handle to `*out`; release
/// it with [`wpcn_problem_free`].
///
/// # Safety
/// The array pointers must reference `num_users` readable doubles and `out`
/// a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn wpcn_problem_new(
    p_avg: f64,
    p_peak: f64,
    sigma2: f64,
    gap: f64,
    si_gamma: f64,
    theta: *const f64,
    weights: *const f64,
    h: *const f64,
    num_users: size_t,
    out: *mut *mut wpcn_problem,
) -> wpcn_status {
    guarded(|| {
        if out.is_null() {
            return fail(wpcn_status::WPCN_ERR_NULL_ARGUMENT, "out is null");
        }
        if theta.is_null() || weights.is_null() || h.is_null() {
            return fail(
                wpcn_status::WPCN_ERR_NULL_ARGUMENT,
                "theta, weights, and h must be non-null",
            );
        }
        if num_users == 0 {
            return fail(
                wpcn_status::WPCN_ERR_INVALID_ARGUMENT,
                "num_users must be at least 1",
            );
        }
        let theta = slice::from_raw_parts(theta, num_users).to_vec();
        let weights = slice::from_raw_parts(weights, num_users).to_vec();
        let h = slice::from_raw_parts(h, num_users).to_vec();
        let params = match SystemParams::new(p_avg, p_peak, sigma2, gap, theta, weights, si_gamma)
        {
            Ok(p) => p,
            Err(e) => return fail(wpcn_status::WPCN_ERR_INVALID_ARGUMENT, &e.to_string()),
        };
        let channels = match ChannelState::new(h, &params) {
            Ok(c) => c,
            Err(e) => return fail(wpcn_status::WPCN_ERR_INVALID_ARGUMENT, &e.to_string()),
        };
        let inner = Box::new(ProblemInner { params, channels });
        *out = Box::into_raw(inner) as *mut wpcn_problem;
        wpcn_status::WPCN_OK
    })
}

/// Releases a problem handle; null is a no-op.
///
/// # Safety
/// `handle` must be a live pointer from [`wpcn_problem_new`] (or null) and
/// must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn wpcn_problem_free(handle: *mut wpcn_problem) {
    if !handle.is_null() {
        drop(Box::from_raw(handle as *mut ProblemInner));
    }
}

/// Number of users in the problem, 0 for a null handle.
///
/// # Safety
/// `handle` must be null or a live problem handle.
#[no_mangle]
pub unsafe extern "C" fn wpcn_problem_num_users(handle: *const wpcn_problem) -> size_t {
    problem_ref(handle).map_or(0, |p| p.params.num_users())
}

/// Solves the problem in the given mode and writes a solution handle to
/// `*out`; release it with [`wpcn_solution_free`].
///
/// # Safety
/// `handle` must be a live problem handle and `out` a writable slot.
#[no_mangle]
pub unsafe extern "C" fn wpcn_solve(
    handle: *const wpcn_problem,
    mode: wpcn_mode,
    out: *mut *mut wpcn_solution,
) -> wpcn_status {
    guarded(|| {
        if out.is_null() {
            return fail(wpcn_status::WPCN_ERR_NULL_ARGUMENT, "out is null");
        }
        let problem = match problem_ref(handle) {
            Some(p) => p,
            None => return fail(wpcn_status::WPCN_ERR_NULL_ARGUMENT, "problem handle is null"),
        };
        let mode = match mode {
            wpcn_mode::WPCN_MODE_FD_PERFECT => Mode::FdPerfect,
            wpcn_mode::WPCN_MODE_FD_SI => Mode::FdSi,
            wpcn_mode::WPCN_MODE_HD => Mode::Hd,
        };
        let result = match solve_mode(mode, &problem.params, &problem.channels) {
            Ok(r) => r,
            Err(e) => return fail(wpcn_status::WPCN_ERR_SOLVER_FAILED, &e.to_string()),
        };
        if !result.converged {
            return fail(
                wpcn_status::WPCN_ERR_SOLVER_FAILED,
                "solver did not converge",
            );
        }
        *out = Box::into_raw(Box::new(SolutionInner { result })) as *mut wpcn_solution;
        wpcn_status::WPCN_OK
    })
}

/// Releases a solution handle; null is a no-op.
///
/// # Safety
/// `handle` must be a live pointer from [`wpcn_solve`] (or null) and must
/// not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn wpcn_solution_free(handle: *mut wpcn_solution) {
    if !handle.is_null() {
        drop(Box::from_raw(handle as *mut SolutionInner));
    }
}

/// Number of schedule slots (`K + 1`), 0 for a null handle.
///
/// # Safety
/// `handle` must be null or a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn wpcn_solution_num_slots(handle: *const wpcn_solution) -> size_t {
    solution_ref(handle).map_or(0, |s| s.result.allocation.num_slots())
}

/// Achieved weighted sum rate (bps/Hz), NaN for a null handle.
///
/// # Safety
/// `handle` must be null or a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn wpcn_solution_wsr(handle: *const wpcn_solution) -> f64 {
    solution_ref(handle).map_or(f64::NAN, |s| s.result.wsr)
}

/// 1 if the solver converged, 0 otherwise (solutions are only handed out
/// converged; this accessor exists for symmetry and null handles).
///
/// # Safety
/// `handle` must be null or a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn wpcn_solution_converged(handle: *const wpcn_solution) -> i32 {
    solution_ref(handle).map_or(0, |s| s.result.converged as i32)
}

/// Iteration count of the dominant solve loop.
///
/// # Safety
/// `handle` must be null or a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn wpcn_solution_iterations(handle: *const wpcn_solution) -> size_t {
    solution_ref(handle).map_or(0, |s| s.result.iterations)
}

/// Copies the per-slot schedule into caller buffers of length `len`, which
/// must equal [`wpcn_solution_num_slots`]. Slot 0 is the dedicated charging
/// slot; slot `i ≥ 1` belongs to user `i`. `tau` receives slot durations,
/// `power` broadcast powers, `energy` broadcast energies.
///
/// # Safety
/// `handle` must be a live solution handle and each buffer writable for
/// `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn wpcn_solution_schedule(
    handle: *const wpcn_solution,
    tau: *mut f64,
    power: *mut f64,
    energy: *mut f64,
    len: size_t,
) -> wpcn_status {
    guarded(|| {
        let solution = match solution_ref(handle) {
            Some(s) => s,
            None => {
                return fail(wpcn_status::WPCN_ERR_NULL_ARGUMENT, "solution handle is null")
            }
        };
        if tau.is_null() || power.is_null() || energy.is_null() {
            return fail(
                wpcn_status::WPCN_ERR_NULL_ARGUMENT,
                "tau, power, and energy must be non-null",
            );
        }
        let alloc = &solution.result.allocation;
        let slots = alloc.num_slots();
        if len < slots {
            return fail(
                wpcn_status::WPCN_ERR_BUFFER_TOO_SMALL,
                &format!("need {slots} slots, got {len}"),
            );
        }
        for s in 0..slots {
            *tau.add(s) = alloc.tau()[s];
            *power.add(s) = alloc.power(s);
            *energy.add(s) = alloc.energy(s);
        }
        wpcn_status::WPCN_OK
    })
}

/// Copies the per-user rates (bps/Hz) into a caller buffer of length `len`,
/// which must be at least the number of users.
///
/// # Safety
/// `handle` must be a live solution handle and `rates` writable for `len`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn wpcn_solution_rates(
    handle: *const wpcn_solution,
    rates: *mut f64,
    len: size_t,
) -> wpcn_status {
    guarded(|| {
        let solution = match solution_ref(handle) {
            Some(s) => s,
            None => {
                return fail(wpcn_status::WPCN_ERR_NULL_ARGUMENT, "solution handle is null")
            }
        };
        if rates.is_null() {
            return fail(wpcn_status::WPCN_ERR_NULL_ARGUMENT, "rates must be non-null");
        }
        let r = &solution.result.rates;
        if len < r.len() {
            return fail(
                wpcn_status::WPCN_ERR_BUFFER_TOO_SMALL,
                &format!("need {} rates, got {len}", r.len()),
            );
        }
        for (i, &v) in r.iter().enumerate() {
            *rates.add(i) = v;
        }
        wpcn_status::WPCN_OK
    })
}
