//! Half-duplex baseline: a dedicated downlink charging slot followed by TDMA
//! uplink slots.
//!
//! The H-AP broadcasts with power `P` only during slot 0; user `i` harvests
//! `θ_i·h_i·P·τ_0` and spends it in its own slot, giving
//! `R_i = τ_i·log2(1 + α_i·τ_0·P/τ_i)`. The design problem is
//!
//! ```text
//! maximize_{τ, P}  Σ ω_i·R_i(τ_0, τ_i, P)
//! subject to       Σ_{i=0}^{K} τ_i ≤ 1,   τ_0·P ≤ P_avg,   0 ≤ P ≤ P_peak.
//! ```
//!
//! The rates increase in `P` at fixed DL energy `τ_0·P` (a shorter, stronger
//! charge frees uplink time), so `P★ = P_peak` always. Two regimes remain:
//!
//! * **Uncapped**: drop the energy constraint and split the frame by the KKT
//!   system of [`solve_p6`] — `z_i = f⁻¹(ν·ln2/ω_i)` with the single
//!   multiplier `ν` bisected on `Σ ω_i·α_i/(1+z_i) = ν·ln2/P_peak`, giving
//!   `τ_0★ = 1/(1 + P_peak·Σα_j/z_j)` and `τ_i★ = τ_0★·P_peak·α_i/z_i`.
//!   Valid whenever the implied DL energy `τ_0★·P_peak` fits the budget.
//! * **Energy-capped**: otherwise `τ_0★ = P_avg/P_peak` binds, each user
//!   gets `τ_i★ = P_avg·α_i/z_i` with `z_i = f⁻¹(λ·ln2/ω_i)`, and `λ` is
//!   bisected on `Σ α_i/z_i = 1/P_avg − 1/P_peak`.
//!
//! The `P_peak = ∞` limit is the capped branch with `1/P_peak = 0`: the
//! charging slot degenerates to a zero-duration impulse carrying `P_avg`, and
//! the rates coincide with the full-duplex unconstrained-peak limit.

use std::cell::Cell;
use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{
    self, Allocation, ChannelState, DualValues, ModelError, SolverResult, SystemParams,
};
use crate::scalar::{self, ScalarError};

use std::f64::consts::LN_2;

/// Bisection iteration cap; generous for brackets grown by doubling.
const MAX_BISECT_ITER: usize = 300;

/// Errors from the half-duplex solvers.
#[derive(Debug, Error)]
pub enum HdError {
    /// Invalid model inputs or allocation assembly.
    #[error(transparent)]
    Model(#[from] ModelError),
    /// Root bracketing or bisection failed; the payload carries the bracket
    /// diagnostics.
    #[error(transparent)]
    Scalar(#[from] ScalarError),
    /// [`solve_p6`] requires every retained user to have positive weight;
    /// zero-weight users must be stripped by the caller (as [`solve`] does).
    #[error("user {user} has zero weight; strip it before calling solve_p6")]
    ZeroWeight { user: usize },
    /// [`solve_p6`]'s stationarity system needs a finite `P_peak`.
    #[error("P_peak is infinite; the uncapped time split is undefined")]
    InfinitePeak,
    /// The capped branch's bisection target `1/P_avg − 1/P_peak` vanished
    /// (`P_peak = P_avg`), which would force every `z_i → ∞`.
    #[error("degenerate peak budget: P_avg = {p_avg} equals P_peak = {p_peak}")]
    DegeneratePeak { p_avg: f64, p_peak: f64 },
}

fn check_dims(params: &SystemParams, channels: &ChannelState) -> Result<(), HdError> {
    if channels.alpha().len() != params.num_users() {
        return Err(HdError::Model(ModelError::DimensionMismatch {
            what: "channels",
            expected: params.num_users(),
            got: channels.alpha().len(),
        }));
    }
    Ok(())
}

/// Frame split ignoring the average-power constraint, at `P = P_peak`.
///
/// Bisects the unique root `ν★ > 0` of the strictly decreasing residual
/// `Σ ω_i·α_i/(1 + z_i(ν)) − ν·ln2/P_peak` (each `z_i = f⁻¹(ν·ln2/ω_i)`
/// grows with `ν`), then returns the `K + 1` durations
/// `τ_0★ = 1/(1 + P_peak·Σα_j/z_j)`, `τ_i★ = τ_0★·P_peak·α_i/z_i`, closed to
/// `Στ★ = 1` exactly, together with `ν★`. `tol` bounds the residual at the
/// returned `ν★`.
pub fn solve_p6(
    params: &SystemParams,
    channels: &ChannelState,
    tol: f64,
) -> Result<(Vec<f64>, f64), HdError> {
    if !params.has_finite_peak() {
        return Err(HdError::InfinitePeak);
    }
    check_dims(params, channels)?;
    let k = params.num_users();
    for (i, &w) in params.weights().iter().enumerate() {
        if w == 0.0 {
            return Err(HdError::ZeroWeight { user: i + 1 });
        }
    }
    let p_peak = params.p_peak();
    let residual = |nu: f64| -> f64 {
        let mut lhs = 0.0;
        for i in 0..k {
            let w = params.weights()[i];
            let z = scalar::f_inverse_capped(nu * LN_2 / w, 1e-13);
            if z.is_finite() {
                lhs += w * channels.alpha()[i] / (1.0 + z);
            }
            // z = ∞ (ν beyond f64 range during bracket growth): term → 0.
        }
        lhs - nu * LN_2 / p_peak
    };
    let bracket = scalar::grow_bracket_upward(residual, 1e-12, 1.0)?;
    let nu = scalar::bisect(residual, bracket, tol, MAX_BISECT_ITER)?;

    let mut tau = vec![0.0; k + 1];
    let mut s = 0.0;
    let mut ratio = vec![0.0; k];
    for i in 0..k {
        let z = scalar::f_inverse(nu * LN_2 / params.weights()[i], 1e-13)?;
        ratio[i] = p_peak * channels.alpha()[i] / z;
        s += ratio[i];
    }
    let tau0 = 1.0 / (1.0 + s);
    for i in 0..k {
        tau[i + 1] = ratio[i] * tau0;
    }
    tau[0] = 1.0 - tau[1..].iter().sum::<f64>();
    Ok((tau, nu))
}

/// Frame split with the DL energy pinned to the full budget: `τ_0` fixed at
/// `P_avg/P_peak` (0 in the `P_peak = ∞` limit), users at
/// `τ_i = P_avg·α_i/z_i(λ)` with `λ` bisected on
/// `Σ α_i/z_i = 1/P_avg − 1/P_peak`. Returns `(τ, λ★, |residual|)`; the user
/// durations are scaled to close `Στ = 1` exactly.
fn solve_capped(
    params: &SystemParams,
    channels: &ChannelState,
    tol: f64,
    evals: &Cell<usize>,
) -> Result<(Vec<f64>, f64, f64), HdError> {
    let k = params.num_users();
    let p_avg = params.p_avg();
    let inv_peak = if params.has_finite_peak() {
        1.0 / params.p_peak()
    } else {
        0.0
    };
    let rhs = 1.0 / p_avg - inv_peak;
    if !(rhs > 0.0) {
        return Err(HdError::DegeneratePeak {
            p_avg,
            p_peak: params.p_peak(),
        });
    }
    let residual = |lam: f64| -> f64 {
        evals.set(evals.get() + 1);
        let mut lhs = 0.0;
        for i in 0..k {
            let w = params.weights()[i];
            if w == 0.0 {
                continue;
            }
            let z = scalar::f_inverse_capped(lam * LN_2 / w, 1e-13);
            if z.is_finite() && z > 0.0 {
                lhs += channels.alpha()[i] / z;
            }
        }
        lhs - rhs
    };
    let bracket = scalar::grow_bracket_upward(residual, 1e-12, 1.0)?;
    let lam = scalar::bisect(residual, bracket, tol, MAX_BISECT_ITER)?;
    let final_residual = residual(lam).abs();

    let mut tau = vec![0.0; k + 1];
    tau[0] = p_avg * inv_peak;
    let mut users_total = 0.0;
    for i in 0..k {
        let w = params.weights()[i];
        if w == 0.0 {
            continue;
        }
        let z = scalar::f_inverse(lam * LN_2 / w, 1e-13)?;
        tau[i + 1] = p_avg * channels.alpha()[i] / z;
        users_total += tau[i + 1];
    }
    if !(users_total > 0.0) {
        return Err(HdError::Scalar(ScalarError::BracketFailure {
            lo: lam,
            hi: lam,
            f_lo: final_residual,
            f_hi: users_total,
        }));
    }
    let scale = (1.0 - tau[0]) / users_total;
    for t in &mut tau[1..] {
        *t *= scale;
    }
    Ok((tau, lam, final_residual))
}

/// Core result on the reduced (all-weights-positive) problem.
struct HdCore {
    tau: Vec<f64>,
    lambda: f64,
    capped: bool,
    bisect_residual: f64,
    iterations: usize,
}

fn solve_core(
    params: &SystemParams,
    channels: &ChannelState,
    tol: f64,
) -> Result<HdCore, HdError> {
    let evals = Cell::new(0usize);
    if !params.has_finite_peak() {
        let (tau, lam, res) = solve_capped(params, channels, tol, &evals)?;
        return Ok(HdCore {
            tau,
            lambda: lam,
            capped: true,
            bisect_residual: res,
            iterations: evals.get(),
        });
    }
    let (tau_p6, nu) = solve_p6(params, channels, tol)?;
    if tau_p6[0] <= params.p_avg() / params.p_peak() {
        // The uncapped split already fits the energy budget, so it solves the
        // full problem.
        return Ok(HdCore {
            tau: tau_p6,
            lambda: nu,
            capped: false,
            bisect_residual: 0.0,
            iterations: evals.get(),
        });
    }
    let (tau, lam, res) = solve_capped(params, channels, tol, &evals)?;
    Ok(HdCore {
        tau,
        lambda: lam,
        capped: true,
        bisect_residual: res,
        iterations: evals.get(),
    })
}

/// Solves the half-duplex weighted sum-rate problem.
///
/// Zero-weight users are stripped before the core solve and re-inserted with
/// `τ = 0` and zero rate. The broadcast power is `P★ = P_peak` on every
/// instance with a finite peak; the returned allocation stores that power
/// directly, so `allocation.power(0)` recovers `P_peak` exactly. With
/// `P_peak = ∞` the charging slot is a zero-duration impulse carrying
/// `P_avg` and rates follow the harvested-energy limit
/// `τ_i·log2(1 + α_i·P_avg/τ_i)`.
///
/// Residuals report the feasibility slacks plus `"bisect_residual"` (final
/// multiplier equation residual) and `"energy_capped"` (1 when the
/// average-power constraint pinned `τ_0`).
pub fn solve(
    params: &SystemParams,
    channels: &ChannelState,
    tol: f64,
) -> Result<SolverResult, HdError> {
    check_dims(params, channels)?;
    let k_full = params.num_users();
    let kept: Vec<usize> = (0..k_full)
        .filter(|&i| params.weights()[i] > 0.0)
        .collect();
    let (red_params, red_channels) = if kept.len() == k_full {
        (params.clone(), channels.clone())
    } else {
        let rp = SystemParams::new(
            params.p_avg(),
            params.p_peak(),
            params.sigma2(),
            params.gap(),
            kept.iter().map(|&i| params.theta()[i]).collect(),
            kept.iter().map(|&i| params.weights()[i]).collect(),
            params.si_gamma(),
        )?;
        let rc = ChannelState::new(kept.iter().map(|&i| channels.h()[i]).collect(), &rp)?;
        (rp, rc)
    };
    let core = solve_core(&red_params, &red_channels, tol)?;

    let mut tau = vec![0.0; k_full + 1];
    tau[0] = core.tau[0];
    for (j, &i) in kept.iter().enumerate() {
        tau[i + 1] = core.tau[j + 1];
    }
    // With a finite peak the broadcast power is pinned there, so the schedule
    // stores the power itself to keep that choice exactly representable. The
    // unconstrained peak concentrates the whole budget into an impulse at
    // τ_0 = 0, which only the energy form can carry.
    let allocation = if params.has_finite_peak() {
        let mut power = vec![0.0; k_full + 1];
        if tau[0] > 0.0 {
            power[0] = params.p_peak();
        }
        Allocation::from_powers(tau.clone(), power)?
    } else {
        let mut energy = vec![0.0; k_full + 1];
        energy[0] = params.p_avg();
        Allocation::from_energies(tau.clone(), energy)?
    };
    let report = model::validate_allocation(&allocation, params)?;

    let mut rates = Vec::with_capacity(k_full);
    for user in 1..=k_full {
        if params.has_finite_peak() {
            rates.push(model::rate_hd(user, &tau, params.p_peak(), params, channels)?);
        } else {
            rates.push(model::rate_fd_nosi_term(
                tau[user],
                0.0,
                channels.alpha_of(user),
                params.p_avg(),
            ));
        }
    }
    let wsr = model::weighted_sum_rate(&rates, params.weights())?;
    let mut residuals = BTreeMap::new();
    residuals.insert("sum_time", report.sum_time_slack);
    residuals.insert("sum_energy", report.sum_energy_slack);
    residuals.insert("peak_violation", report.peak_violation);
    residuals.insert("negativity", report.negativity);
    residuals.insert("bisect_residual", core.bisect_residual);
    residuals.insert("energy_capped", if core.capped { 1.0 } else { 0.0 });
    Ok(SolverResult {
        allocation,
        rates,
        wsr,
        duals: DualValues {
            lambda: core.lambda,
            mu: None,
        },
        iterations: core.iterations,
        converged: true,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
        assert!(
            (got - want).abs() <= tol,
            "{what}: got {got}, want {want} (tol {tol})"
        );
    }

    /// θ = Γ = σ² = 1 everywhere, so α_i = H_i.
    fn setup(h: &[f64], weights: &[f64], p_avg: f64, p_peak: f64) -> (SystemParams, ChannelState) {
        let params = SystemParams::new(
            p_avg,
            p_peak,
            1.0,
            1.0,
            vec![1.0; h.len()],
            weights.to_vec(),
            0.0,
        )
        .unwrap();
        let channels = ChannelState::new(h.to_vec(), &params).unwrap();
        (params, channels)
    }

    #[test]
    fn solve_p6_matches_frozen_single_user() {
        let (params, channels) = setup(&[0.02], &[1.0], 100.0, 200.0);
        let (tau, nu) = solve_p6(&params, &channels, 1e-12).unwrap();
        assert_close(tau[0], 0.498_157_344_144_492_36, 1e-9, "τ₀★");
        assert_close(tau[1], 0.501_842_655_855_507_6, 1e-9, "τ₁★");
        assert_close(tau.iter().sum::<f64>(), 1.0, 1e-15, "Στ = 1");
        // ν★ satisfies its defining balance exactly.
        let z = scalar::f_inverse(nu * LN_2, 1e-13).unwrap();
        assert_close(z, 3.970_625_759_544_232, 1e-8, "z★");
        assert_close(0.02 / (1.0 + z), nu * LN_2 / 200.0, 1e-12, "ν balance");
    }

    #[test]
    fn solve_p6_satisfies_stationarity() {
        let (params, channels) = setup(&[0.05, 0.02, 0.007], &[1.0, 1.3, 0.6], 100.0, 300.0);
        let (tau, nu) = solve_p6(&params, &channels, 1e-12).unwrap();
        assert_close(tau.iter().sum::<f64>(), 1.0, 1e-15, "Στ = 1");
        assert!(tau.iter().all(|&t| t > 0.0), "all slots active");
        // Per-user stationarity: f(z_i) = ν·ln2/ω_i.
        for i in 0..3 {
            let w = params.weights()[i];
            let z_i = 300.0 * channels.alpha()[i] * tau[0] / tau[i + 1];
            assert_close(
                scalar::f_value(z_i).unwrap(),
                nu * LN_2 / w,
                1e-9,
                "per-user stationarity",
            );
        }
        // Multiplier balance (the bisected condition).
        let lhs: f64 = (0..3)
            .map(|i| {
                let w = params.weights()[i];
                let z = scalar::f_inverse(nu * LN_2 / w, 1e-13).unwrap();
                w * channels.alpha()[i] / (1.0 + z)
            })
            .sum();
        assert_close(lhs, nu * LN_2 / 300.0, 1e-12, "ν balance");
    }

    #[test]
    fn solve_p6_invariant_to_weight_doubling() {
        let (params, channels) = setup(&[0.05, 0.02], &[1.0, 1.3], 100.0, 300.0);
        let (tau, nu) = solve_p6(&params, &channels, 1e-12).unwrap();
        let doubled = params.with_weights(vec![2.0, 2.6]).unwrap();
        let (tau2, nu2) = solve_p6(&doubled, &channels, 1e-12).unwrap();
        for s in 0..3 {
            assert_close(tau2[s], tau[s], 1e-9, "τ unchanged");
        }
        assert_close(nu2, 2.0 * nu, 2e-9 * nu, "ν doubles");
    }

    #[test]
    fn solve_p6_rejects_bad_inputs() {
        let (params, channels) = setup(&[0.05, 0.02], &[1.0, 0.0], 100.0, 300.0);
        assert!(matches!(
            solve_p6(&params, &channels, 1e-12),
            Err(HdError::ZeroWeight { user: 2 })
        ));
        let (inf_params, inf_channels) = setup(&[0.05], &[1.0], 100.0, f64::INFINITY);
        assert!(matches!(
            solve_p6(&inf_params, &inf_channels, 1e-12),
            Err(HdError::InfinitePeak)
        ));
    }

    #[test]
    fn solve_takes_uncapped_branch_when_budget_allows() {
        // τ₀★·P_peak ≈ 99.63 ≤ P_avg = 100: the uncapped split stands.
        let (params, channels) = setup(&[0.02], &[1.0], 100.0, 200.0);
        let res = solve(&params, &channels, 1e-12).unwrap();
        assert_eq!(res.residuals["energy_capped"], 0.0);
        assert_close(res.wsr, 1.160_976_593_84, 1e-8, "WSR");
        assert_close(res.allocation.power(0), 200.0, 1e-9, "P★ = P_peak");
        assert!(res.allocation.energy(0) <= 100.0 + 1e-9, "DL energy fits");

        // Certify against a dense 1-D scan of the same objective.
        let mut scan_best = 0.0f64;
        for j in 1..1_000_000 {
            let t1 = j as f64 / 1_000_000.0;
            let t0 = 1.0 - t1;
            if t0 * 200.0 > 100.0 {
                continue; // energy-infeasible at P = P_peak
            }
            scan_best = scan_best.max(t1 * (1.0 + 0.02 * 200.0 * t0 / t1).log2());
        }
        // The scan constrains itself to the feasible region; the optimum sits
        // inside it for this instance.
        assert!(res.wsr >= scan_best - 1e-9, "beats feasible scan");
        assert_close(res.wsr, scan_best, 1e-4, "matches scan");
    }

    #[test]
    fn solve_takes_capped_branch_when_budget_binds() {
        // τ₀★·P_peak ≈ 99.63 > P_avg = 80: the energy constraint pins τ₀.
        let (params, channels) = setup(&[0.02], &[1.0], 80.0, 200.0);
        let res = solve(&params, &channels, 1e-12).unwrap();
        assert_eq!(res.residuals["energy_capped"], 1.0);
        let tau = res.allocation.tau();
        assert_close(tau[0], 0.4, 1e-12, "τ₀ = P_avg/P_peak");
        // K = 1 closed form: z★ = α/(1/P_avg − 1/P_peak) = 8/3.
        let z = 0.02 / (1.0 / 80.0 - 1.0 / 200.0);
        assert_close(tau[1], 80.0 * 0.02 / z, 1e-9, "τ₁");
        assert_close(res.wsr, 0.6 * (1.0 + z).log2(), 1e-9, "WSR");
        assert_close(res.allocation.energy(0), 80.0, 1e-9, "full budget spent");
        assert_close(res.allocation.power(0), 200.0, 1e-9, "P★ = P_peak");
        // Multiplier equation residual, relative to its target.
        let rhs = 1.0 / 80.0 - 1.0 / 200.0;
        assert!(res.residuals["bisect_residual"] <= 1e-8 * rhs);
    }

    #[test]
    fn branches_agree_at_the_case_boundary() {
        // Choose P_avg so the uncapped τ₀★ sits exactly on P_avg/P_peak.
        let (probe, channels) = setup(&[0.02], &[1.0], 100.0, 200.0);
        let (tau_p6, _) = solve_p6(&probe, &channels, 1e-12).unwrap();
        let p_avg = tau_p6[0] * 200.0;
        let (params, channels) = setup(&[0.02], &[1.0], p_avg, 200.0);
        let (tau_a, _) = solve_p6(&params, &channels, 1e-12).unwrap();
        let evals = Cell::new(0usize);
        let (tau_b, _, _) = solve_capped(&params, &channels, 1e-12, &evals).unwrap();
        for s in 0..2 {
            assert_close(tau_a[s], tau_b[s], 1e-6, "branch agreement");
        }
    }

    #[test]
    fn solve_matches_two_user_grid() {
        let (params, channels) = setup(&[0.03, 0.01], &[1.0, 1.3], 100.0, 200.0);
        let res = solve(&params, &channels, 1e-12).unwrap();
        let mut scan_best = 0.0f64;
        let n = 400;
        for a in 1..n {
            let t0 = a as f64 / n as f64;
            let p = (100.0 / t0).min(200.0);
            for b in 1..(n - a) {
                let t1 = b as f64 / n as f64;
                let t2 = 1.0 - t0 - t1;
                if t2 <= 0.0 {
                    continue;
                }
                let r1 = t1 * (1.0 + 0.03 * t0 * p / t1).log2();
                let r2 = t2 * (1.0 + 0.01 * t0 * p / t2).log2();
                scan_best = scan_best.max(r1 + 1.3 * r2);
            }
        }
        assert!(res.wsr >= scan_best - 1e-9, "no grid point beats the solver");
        assert_close(res.wsr, scan_best, 1e-2, "grid approaches the solver");
    }

    #[test]
    fn branch_trigger_is_monotone_in_peak_power() {
        // The energy cap binds for generous peaks (the uncapped split then
        // wants more DL energy than the budget) and relaxes as P_peak falls
        // toward P_avg; the indicator must switch at most once, upward in
        // P_peak.
        let mut last = false;
        let mut switches = 0;
        for &p_peak in &[110.0, 130.0, 170.0, 250.0, 400.0, 800.0, 3200.0, 2e4] {
            let (params, channels) = setup(&[0.03, 0.01], &[1.0, 1.0], 100.0, p_peak);
            let res = solve(&params, &channels, 1e-12).unwrap();
            let capped = res.residuals["energy_capped"] == 1.0;
            if capped != last {
                assert!(capped && !last, "indicator fell as P_peak grew");
                switches += 1;
            }
            last = capped;
        }
        assert!(switches <= 1, "indicator switched more than once");
    }

    #[test]
    fn full_duplex_dominates_half_duplex() {
        for &(h, p_avg, p_peak) in &[
            (&[0.03, 0.01][..], 100.0, 200.0),
            (&[0.03, 0.01][..], 100.0, 1000.0),
        ] {
            let (params, channels) = setup(h, &vec![1.0; h.len()], p_avg, p_peak);
            let hd = solve(&params, &channels, 1e-12).unwrap();
            let fd = crate::fd_perfect::solve(&params, &channels, crate::fd_perfect::DUAL_TOL)
                .unwrap();
            assert!(
                fd.wsr >= hd.wsr - 1e-9,
                "FD {} below HD {} at P_peak = {p_peak}",
                fd.wsr,
                hd.wsr
            );
        }
        // The gap closes as the peak constraint vanishes.
        let (params, channels) = setup(&[0.03, 0.01], &[1.0, 1.0], 100.0, 1e11);
        let hd = solve(&params, &channels, 1e-12).unwrap();
        let fd = crate::fd_perfect::solve(&params, &channels, crate::fd_perfect::DUAL_TOL).unwrap();
        assert_close(fd.wsr, hd.wsr, 1e-4, "regions meet at unconstrained peak");
    }

    #[test]
    fn infinite_peak_becomes_an_impulse_charge() {
        let (params, channels) = setup(&[0.3, 0.1], &[1.0, 1.0], 10.0, f64::INFINITY);
        let res = solve(&params, &channels, 1e-12).unwrap();
        let tau = res.allocation.tau();
        assert_eq!(tau[0], 0.0, "charging slot collapses");
        assert_eq!(res.allocation.energy(0), 10.0, "impulse carries P_avg");
        // Equal weights: Σα_i/z = 1/P_avg gives z = 4, τ = (0.75, 0.25).
        assert_close(tau[1], 0.75, 1e-9, "τ₁");
        assert_close(tau[2], 0.25, 1e-9, "τ₂");
        assert_close(res.rates[0], 0.75 * 5f64.log2(), 1e-9, "r₁");
        assert_close(res.rates[1], 0.25 * 5f64.log2(), 1e-9, "r₂");
        // Coincides with the full-duplex unconstrained-peak limit.
        let fd = crate::fd_perfect::solve_infinite_peak(&params, &channels).unwrap();
        assert_close(res.wsr, fd.wsr, 1e-9, "HD = FD at P_peak = ∞");
    }

    #[test]
    fn solve_strips_zero_weight_users() {
        let (params2, channels2) = setup(&[0.03, 0.01], &[1.0, 0.0], 100.0, 200.0);
        let res2 = solve(&params2, &channels2, 1e-12).unwrap();
        let (params1, channels1) = setup(&[0.03], &[1.0], 100.0, 200.0);
        let res1 = solve(&params1, &channels1, 1e-12).unwrap();
        assert_close(res2.wsr, res1.wsr, 1e-9, "WSR equality");
        assert_eq!(res2.allocation.tau()[2], 0.0, "stripped user τ");
        assert_eq!(res2.rates[1], 0.0, "stripped user rate");
        assert_close(res2.allocation.tau()[0], res1.allocation.tau()[0], 1e-9, "τ₀");
        assert_close(res2.allocation.tau()[1], res1.allocation.tau()[1], 1e-9, "τ₁");
    }
}
