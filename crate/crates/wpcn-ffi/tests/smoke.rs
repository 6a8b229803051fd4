//! End-to-end exercise of the C ABI from Rust: handle lifecycle, schedule
//! extraction, and every error path a C caller can hit.

use std::ffi::CStr;
use std::path::Path;
use std::ptr;

use wpcn_ffi::*;

fn last_error() -> String {
    unsafe {
        CStr::from_ptr(wpcn_last_error_message())
            .to_string_lossy()
            .into_owned()
    }
}

/// Reference two-user setup with a known optimum.
fn make_problem() -> *mut wpcn_problem {
    let theta = [1.0, 1.0];
    let weights = [1.0, 1.0];
    let h = [0.03, 0.01];
    let mut handle: *mut wpcn_problem = ptr::null_mut();
    let status = unsafe {
        wpcn_problem_new(
            100.0,
            200.0,
            1.0,
            1.0,
            0.0,
            theta.as_ptr(),
            weights.as_ptr(),
            h.as_ptr(),
            2,
            &mut handle,
        )
    };
    assert_eq!(status, wpcn_status::WPCN_OK, "{}", last_error());
    assert!(!handle.is_null());
    handle
}

#[test]
fn solves_and_reads_back_the_schedule() {
    let problem = make_problem();
    unsafe {
        assert_eq!(wpcn_problem_num_users(problem), 2);
        let mut solution: *mut wpcn_solution = ptr::null_mut();
        let status = wpcn_solve(problem, wpcn_mode::WPCN_MODE_FD_PERFECT, &mut solution);
        assert_eq!(status, wpcn_status::WPCN_OK, "{}", last_error());

        let wsr = wpcn_solution_wsr(solution);
        assert!(
            (wsr - 1.8119218433132969).abs() < 1e-7,
            "known optimum for this instance, got {wsr}"
        );
        assert_eq!(wpcn_solution_converged(solution), 1);
        let slots = wpcn_solution_num_slots(solution);
        assert_eq!(slots, 3);

        let mut tau = [0.0; 3];
        let mut power = [0.0; 3];
        let mut energy = [0.0; 3];
        let status = wpcn_solution_schedule(
            solution,
            tau.as_mut_ptr(),
            power.as_mut_ptr(),
            energy.as_mut_ptr(),
            3,
        );
        assert_eq!(status, wpcn_status::WPCN_OK, "{}", last_error());
        assert!((tau.iter().sum::<f64>() - 1.0).abs() < 1e-6, "frame filled");
        assert!(
            (energy.iter().sum::<f64>() - 100.0).abs() < 1e-6,
            "budget spent"
        );

        let mut rates = [0.0; 2];
        let status = wpcn_solution_rates(solution, rates.as_mut_ptr(), 2);
        assert_eq!(status, wpcn_status::WPCN_OK, "{}", last_error());
        assert!((rates[0] + rates[1] - wsr).abs() < 1e-9, "equal weights");

        wpcn_solution_free(solution);
        wpcn_problem_free(problem);
    }
}

#[test]
fn all_three_modes_solve_through_the_boundary() {
    let problem = make_problem();
    unsafe {
        let mut best = f64::NEG_INFINITY;
        for mode in [
            wpcn_mode::WPCN_MODE_FD_PERFECT,
            wpcn_mode::WPCN_MODE_FD_SI,
            wpcn_mode::WPCN_MODE_HD,
        ] {
            let mut solution: *mut wpcn_solution = ptr::null_mut();
            let status = wpcn_solve(problem, mode, &mut solution);
            assert_eq!(status, wpcn_status::WPCN_OK, "{:?}: {}", mode, last_error());
            let wsr = wpcn_solution_wsr(solution);
            assert!(wsr.is_finite() && wsr > 0.0);
            best = best.max(wsr);
            wpcn_solution_free(solution);
        }
        assert!(best > 1.8, "full duplex should lead on this instance");
        wpcn_problem_free(problem);
    }
}

#[test]
fn error_paths_set_codes_and_messages() {
    unsafe {
        // Null out-pointer.
        let theta = [1.0];
        let status = wpcn_problem_new(
            1.0,
            2.0,
            1.0,
            1.0,
            0.0,
            theta.as_ptr(),
            theta.as_ptr(),
            theta.as_ptr(),
            1,
            ptr::null_mut(),
        );
        assert_eq!(status, wpcn_status::WPCN_ERR_NULL_ARGUMENT);

        // Null array.
        let mut handle: *mut wpcn_problem = ptr::null_mut();
        let status = wpcn_problem_new(
            1.0,
            2.0,
            1.0,
            1.0,
            0.0,
            ptr::null(),
            theta.as_ptr(),
            theta.as_ptr(),
            1,
            &mut handle,
        );
        assert_eq!(status, wpcn_status::WPCN_ERR_NULL_ARGUMENT);

        // Invalid parameter (negative budget) carries a message.
        let status = wpcn_problem_new(
            -5.0,
            2.0,
            1.0,
            1.0,
            0.0,
            theta.as_ptr(),
            theta.as_ptr(),
            theta.as_ptr(),
            1,
            &mut handle,
        );
        assert_eq!(status, wpcn_status::WPCN_ERR_INVALID_ARGUMENT);
        assert!(!last_error().is_empty());
        assert!(handle.is_null(), "failed creation must not hand out a handle");

        // Zero users.
        let status = wpcn_problem_new(
            1.0,
            2.0,
            1.0,
            1.0,
            0.0,
            theta.as_ptr(),
            theta.as_ptr(),
            theta.as_ptr(),
            0,
            &mut handle,
        );
        assert_eq!(status, wpcn_status::WPCN_ERR_INVALID_ARGUMENT);

        // Null problem handle into solve.
        let mut solution: *mut wpcn_solution = ptr::null_mut();
        let status = wpcn_solve(
            ptr::null(),
            wpcn_mode::WPCN_MODE_FD_PERFECT,
            &mut solution,
        );
        assert_eq!(status, wpcn_status::WPCN_ERR_NULL_ARGUMENT);

        // Undersized schedule buffer.
        let problem = make_problem();
        let status = wpcn_solve(problem, wpcn_mode::WPCN_MODE_HD, &mut solution);
        assert_eq!(status, wpcn_status::WPCN_OK, "{}", last_error());
        let mut small = [0.0; 1];
        let status = wpcn_solution_schedule(
            solution,
            small.as_mut_ptr(),
            small.as_mut_ptr(),
            small.as_mut_ptr(),
            1,
        );
        assert_eq!(status, wpcn_status::WPCN_ERR_BUFFER_TOO_SMALL);
        assert!(last_error().contains("3"), "message names the needed length");
        let status = wpcn_solution_rates(solution, small.as_mut_ptr(), 1);
        assert_eq!(status, wpcn_status::WPCN_ERR_BUFFER_TOO_SMALL);
        let mut rates = [0.0; 2];
        let status = wpcn_solution_rates(solution, rates.as_mut_ptr(), 2);
        assert_eq!(status, wpcn_status::WPCN_OK, "{}", last_error());

        // Free is null-safe.
        wpcn_solution_free(solution);
        wpcn_solution_free(ptr::null_mut());
        wpcn_problem_free(problem);
        wpcn_problem_free(ptr::null_mut());
    }
}

#[test]
fn infinite_peak_round_trips_through_the_abi() {
    let theta = [1.0];
    let weights = [1.0];
    let h = [0.3];
    let mut problem: *mut wpcn_problem = ptr::null_mut();
    unsafe {
        let status = wpcn_problem_new(
            10.0,
            f64::INFINITY,
            1.0,
            1.0,
            0.0,
            theta.as_ptr(),
            weights.as_ptr(),
            h.as_ptr(),
            1,
            &mut problem,
        );
        assert_eq!(status, wpcn_status::WPCN_OK, "{}", last_error());
        let mut solution: *mut wpcn_solution = ptr::null_mut();
        let status = wpcn_solve(problem, wpcn_mode::WPCN_MODE_HD, &mut solution);
        assert_eq!(status, wpcn_status::WPCN_OK, "{}", last_error());
        let wsr = wpcn_solution_wsr(solution);
        assert!((wsr - 2.0).abs() < 1e-6, "known unconstrained optimum, got {wsr}");
        wpcn_solution_free(solution);
        wpcn_problem_free(problem);
    }
}

#[test]
fn version_and_header_are_published() {
    let version = unsafe { CStr::from_ptr(wpcn_version()) }.to_str().unwrap();
    assert_eq!(version, env!("CARGO_PKG_VERSION"));
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/wpcn.h");
    assert!(header.exists(), "cbindgen header missing at {header:?}");
    let text = std::fs::read_to_string(header).unwrap();
    for symbol in [
        "wpcn_problem_new",
        "wpcn_solve",
        "wpcn_solution_schedule",
        "wpcn_last_error_message",
        "WPCN_MODE_FD_SI",
        "WPCN_ERR_BUFFER_TOO_SMALL",
    ] {
        assert!(text.contains(symbol), "header lacks {symbol}");
    }
}
