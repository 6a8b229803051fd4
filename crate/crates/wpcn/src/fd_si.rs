//! Full-duplex solver with residual self-interference at the H-AP.
//!
//! With a finite peak power the downlink keeps transmitting while users talk,
//! and a fraction `γ = φ·(ε + β)` of the AP's own broadcast leaks into its
//! receiver. Spreading the downlink budget uniformly, slot `i` carries power
//! `P_i`, the leak raises the noise floor to `γ·P_i + σ²`, and user `i`'s
//! rate becomes `R_i = τ_i·log2(1 + C_i·(P_avg − τ_i·P_i)/τ_i)` with
//! `C_i = θ_i·h_i/(Γ·(γ·P_i + σ²))`. The design problem is no longer jointly
//! convex in `(τ, P)`, so we alternate two steps from a feasible start:
//!
//! ```text
//! maximize_{τ, P}  Σ ω_i·R_i(τ_i, P_i)
//! subject to       Σ_{i=0}^{K} τ_i ≤ 1,   Σ_{i=0}^{K} τ_i·P_i = P_avg,
//!                  0 ≤ P_i ≤ P_peak.
//! ```
//!
//! * **Time step** ([`solve_time_subproblem`]): at fixed powers the problem
//!   is concave in `τ`. Dualize both coupling constraints with `(λ, μ)`
//!   (`λ ≥ 0`; `μ` free, it prices an equality); each slot's inner supremum
//!   is closed-form through the stationarity function
//!   `f̄(z, a) = ln(1+z) − (z+a)/(1+z)`, and a two-dimensional ellipsoid
//!   method minimizes the dual. Slot 0 carries no rate, so its duration is
//!   degenerate at the dual optimum whenever `λ + μ·P_0 = 0`; the primal
//!   recovery parks exactly the undrained average-power budget there.
//! * **Power step** ([`power_gradient`] + [`project_power`]): at fixed
//!   durations, take one projected gradient step with a backtracking line
//!   search, accepting only strict weighted sum-rate improvements. The
//!   projection clips to `[0, P_peak]` and restores the average-power
//!   equality by a monotone scalar shift along the duration weights.
//!
//! The alternation keeps the best iterate seen and stops as soon as an outer
//! round fails to improve the objective by more than `tol_wsr`, so the
//! returned value is monotone in the iteration budget. With `γ = 0` the rate
//! model coincides with the perfect-cancellation one and the loop reproduces
//! its optimum; with `P_peak = ∞` the downlink degenerates to an impulse
//! charge, users transmit at vanishing power, self-interference never binds,
//! and the perfect-cancellation allocation is returned unchanged.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;

use thiserror::Error;

use crate::ellipsoid::{ellipsoid_minimize, Cut, Domain, EllipsoidState};
use crate::fd_perfect::fbar_branch_root;
use crate::model::{
    self, Allocation, ChannelState, DualValues, ModelError, SolverResult, SystemParams,
};
use crate::scalar::{self, ScalarError};

/// Dual search tolerance for the inner time subproblem.
const DUAL_TOL: f64 = 1e-9;
/// Dual search iteration budget for the inner time subproblem.
const DUAL_MAX_ITER: usize = 600;
/// Doubling budget when bracketing the projection shift.
const MAX_BRACKET_GROWTH: usize = 300;
/// Bisection iteration cap for the projection shift.
const MAX_BISECT_ITER: usize = 500;

/// Errors from the residual-self-interference solver.
#[derive(Debug, Error)]
pub enum SiError {
    /// Invalid model inputs or allocation assembly.
    #[error(transparent)]
    Model(#[from] ModelError),
    /// Scalar root finding failed; the payload carries the diagnostics.
    #[error(transparent)]
    Scalar(#[from] ScalarError),
    /// A slot's dual term is unbounded at the queried multipliers, so its
    /// stationary duration does not exist there. For slot 0 and zero-weight
    /// users this means `λ + μ·P < 0`; for weighted users it means the rate's
    /// marginal value exceeds `λ + μ·P` at every duration.
    #[error("slot {user}'s dual term is unbounded at power {power:.6e}")]
    DualPointInfeasible { user: usize, power: f64 },
    /// The ellipsoid search or the primal recovery for the time subproblem
    /// failed; the message carries the diagnostics.
    #[error("time-subproblem dual search failed: {0}")]
    DualSearch(String),
    /// The warm start handed to [`solve`] is not feasible.
    #[error("initial allocation violates feasibility by {max_residual:.3e}")]
    BadInit { max_residual: f64 },
    /// The uplink slots cannot absorb the required average power even at
    /// `P_peak`, so no feasible projection exists.
    #[error("uplink slots absorb at most {capacity:.6e}, need {required:.6e}")]
    InfeasibleProjection { capacity: f64, required: f64 },
}

/// Knobs for the outer alternation in [`solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    /// Maximum number of outer time/power rounds.
    pub outer_max: usize,
    /// Stop when a round improves the weighted sum-rate by no more than this.
    pub tol_wsr: f64,
    /// Initial power step is `step_scale·P_peak / ‖q‖`.
    pub step_scale: f64,
    /// Backtracking halvings tried per power step.
    pub max_halvings: usize,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self {
            outer_max: 200,
            tol_wsr: 1e-8,
            step_scale: 0.1,
            max_halvings: 20,
        }
    }
}

/// Solution of one time subproblem at fixed slot powers.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSolution {
    /// Recovered slot durations (length `K + 1`).
    pub tau: Vec<f64>,
    /// Multiplier on `Σ τ_i ≤ 1`.
    pub lambda: f64,
    /// Multiplier on `Σ τ_i·P_i = P_avg` (free sign).
    pub mu: f64,
    /// Ellipsoid iterations spent.
    pub iterations: usize,
}

/// Per-user coefficients at a fixed slot power: the interference-degraded
/// channel `C = θ·h/(Γ·(γ·P + σ²))` and the curvature parameter `a = C·P`.
struct UserCtx {
    weight: f64,
    power: f64,
    c: f64,
    a: f64,
}

fn user_ctx(params: &SystemParams, channels: &ChannelState, i: usize, power: f64) -> UserCtx {
    let c = params.theta()[i - 1] * channels.h()[i - 1]
        / (params.gap() * (params.si_gamma() * power + params.sigma2()));
    UserCtx {
        weight: params.weights()[i - 1],
        power,
        c,
        a: c * power,
    }
}

/// `τ·log2(1 + C·(P_avg − τ·P)/τ)` with a zero slot contributing zero. Only
/// used at durations where the log argument is positive (see `user_supremum`).
fn rate_term(tau: f64, ctx: &UserCtx, p_avg: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    let arg = 1.0 + ctx.c * (p_avg - tau * ctx.power) / tau;
    debug_assert!(arg > 0.0, "rate evaluated beyond its domain");
    tau * arg.log2()
}

/// Stationary duration of one weighted user's dual term,
/// `τ̄ = C·P_avg/(z★ + a)` where `z★` solves `f̄(z, a) = (λ + μ·P)·ln2/ω` on
/// the increasing branch. `None` when no stationary point exists (the term
/// keeps growing with the duration); `Some(0)` when the root overflows, i.e.
/// the marginal cost is so high that the slot collapses.
fn stationary_duration(ctx: &UserCtx, lambda: f64, mu: f64, p_avg: f64) -> Option<f64> {
    let c_root = (lambda + mu * ctx.power) * LN_2 / ctx.weight;
    let z = if ctx.a > 0.0 {
        fbar_branch_root(c_root, ctx.a)?
    } else {
        // Zero power reduces f̄ to f, whose range is [0, ∞): a non-positive
        // marginal cost leaves the term growing for every duration.
        if c_root <= 0.0 {
            return None;
        }
        scalar::f_inverse_capped(c_root, scalar::DEFAULT_TOL)
    };
    Some(if z.is_finite() {
        ctx.c * p_avg / (z + ctx.a)
    } else {
        0.0
    })
}

fn validate_powers(p_prev: &[f64], params: &SystemParams) -> Result<(), SiError> {
    let want = params.num_users() + 1;
    if p_prev.len() != want {
        return Err(ModelError::DimensionMismatch {
            what: "slot powers",
            expected: want,
            got: p_prev.len(),
        }
        .into());
    }
    let tol = 1e-9 * params.p_avg().max(1.0);
    for &p in p_prev {
        if !(p.is_finite() && p >= 0.0 && p <= params.p_peak() + tol) {
            return Err(ModelError::InvalidParameter {
                name: "slot power",
                value: p,
                constraint: "finite and within [0, P_peak]",
            }
            .into());
        }
    }
    Ok(())
}

/// Stationary slot durations of the time subproblem's Lagrangian at one dual
/// point, holding the previous round's slot powers fixed.
///
/// Slot 0 carries no rate, so its term is linear with slope `−(λ + μ·P_0)`
/// and its stationary duration is `0` whenever the slope is non-positive.
/// User `i` gets `τ̄_i = C_i·P_avg/(z_i★ + C_i·P_i)` from the `f̄` root above;
/// the durations are *unconstrained* stationary points and may exceed the
/// frame length — [`solve_time_subproblem`] additionally caps them.
///
/// Errors with [`SiError::DualPointInfeasible`] when some slot's supremum is
/// unbounded (slot 0 or a zero-weight user with `λ + μ·P < 0`, or a weighted
/// user whose marginal rate never drops to `λ + μ·P`).
pub fn time_update(
    p_prev: &[f64],
    lambda: f64,
    mu: f64,
    params: &SystemParams,
    channels: &ChannelState,
) -> Result<Vec<f64>, SiError> {
    validate_powers(p_prev, params)?;
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(ModelError::InvalidParameter {
            name: "lambda",
            value: lambda,
            constraint: "finite and >= 0",
        }
        .into());
    }
    if !mu.is_finite() {
        return Err(ModelError::InvalidParameter {
            name: "mu",
            value: mu,
            constraint: "finite",
        }
        .into());
    }
    let k = params.num_users();
    let mut tau = vec![0.0; k + 1];
    if lambda + mu * p_prev[0] < 0.0 {
        return Err(SiError::DualPointInfeasible {
            user: 0,
            power: p_prev[0],
        });
    }
    for i in 1..=k {
        let ctx = user_ctx(params, channels, i, p_prev[i]);
        if ctx.weight == 0.0 {
            if lambda + mu * ctx.power < 0.0 {
                return Err(SiError::DualPointInfeasible {
                    user: i,
                    power: ctx.power,
                });
            }
            continue;
        }
        match stationary_duration(&ctx, lambda, mu, params.p_avg()) {
            Some(t) => tau[i] = t,
            None => {
                return Err(SiError::DualPointInfeasible {
                    user: i,
                    power: ctx.power,
                })
            }
        }
    }
    Ok(tau)
}

/// Value and maximizing durations of the frame-capped dual function
///
/// ```text
/// G(λ, μ) = Σ_i sup_{τ_i ∈ [0,1]} [ω_i·R_i(τ_i) − (λ + μ·P_i)·τ_i]
///           + sup_{τ_0 ∈ [0,1]} [−(λ + μ·P_0)·τ_0] + λ + μ·P_avg.
/// ```
///
/// Restricting each slot to the frame length keeps every supremum finite
/// without weakening the dual bound (any primal-feasible duration already
/// satisfies it), so the ellipsoid search needs no feasibility cuts.
fn dual_point(
    ctxs: &[UserCtx],
    p0: f64,
    p_avg: f64,
    lambda: f64,
    mu: f64,
) -> (Vec<f64>, f64) {
    let mut tau = vec![0.0; ctxs.len() + 1];
    let mut value = lambda + mu * p_avg;
    let slope0 = -(lambda + mu * p0);
    if slope0 > 0.0 {
        tau[0] = 1.0;
        value += slope0;
    }
    for (idx, ctx) in ctxs.iter().enumerate() {
        let c_lin = lambda + mu * ctx.power;
        if ctx.weight == 0.0 {
            if c_lin < 0.0 {
                tau[idx + 1] = 1.0;
                value += -c_lin;
            }
            continue;
        }
        // The term rises from 0 with unbounded slope and is concave, so the
        // sup over [0,1] sits at the capped stationary duration and is ≥ 0.
        let t = stationary_duration(ctx, lambda, mu, p_avg)
            .unwrap_or(f64::INFINITY)
            .min(1.0);
        tau[idx + 1] = t;
        value += ctx.weight * rate_term(t, ctx, p_avg) - c_lin * t;
    }
    (tau, value)
}

/// Exact argmax of the time subproblem at fixed slot powers `p_prev`:
///
/// ```text
/// maximize_τ  Σ ω_i·R_i(τ_i; P_i)   s.t.  Σ τ_i ≤ 1,  Σ τ_i·P_i = P_avg.
/// ```
///
/// Minimizes the dual with a two-dimensional ellipsoid method, recovers the
/// users' durations from their stationarity roots, parks the undrained
/// average-power budget in slot 0 (active exactly when its dual term is
/// balanced, `λ★ + μ★·P_0 ≈ 0`), and closes the power equality exactly by a
/// common scaling. Fails with [`SiError::DualSearch`] when the recovered
/// durations do not satisfy `Σ τ ≤ 1` and the power equality to `1e-6`.
pub fn solve_time_subproblem(
    p_prev: &[f64],
    params: &SystemParams,
    channels: &ChannelState,
    tol: f64,
) -> Result<TimeSolution, SiError> {
    validate_powers(p_prev, params)?;
    if !(tol.is_finite() && tol > 0.0) {
        return Err(ModelError::InvalidParameter {
            name: "tol",
            value: tol,
            constraint: "finite and > 0",
        }
        .into());
    }
    if p_prev.iter().all(|&p| p == 0.0) {
        return Err(ModelError::InvalidParameter {
            name: "slot powers",
            value: 0.0,
            constraint: "at least one strictly positive entry",
        }
        .into());
    }
    let k = params.num_users();
    let p_avg = params.p_avg();
    let p0 = p_prev[0];
    let ctxs: Vec<UserCtx> = (1..=k)
        .map(|i| user_ctx(params, channels, i, p_prev[i]))
        .collect();

    // Same initial ball as the perfect-cancellation solver: λ★ is bounded by
    // the steepest achievable weighted rate slope, |μ★| by ω·α (the
    // interference-degraded C_i never exceeds α_i).
    let alpha_max = channels.alpha().iter().fold(f64::MIN, |m, &a| m.max(a));
    let w_max = params.weights().iter().fold(f64::MIN, |m, &w| m.max(w));
    let lam_cap = w_max * (1.0 + alpha_max * p_avg * (k as f64 + 1.0)).log2();
    let mu_cap = w_max * alpha_max;
    let radius = 10.0 * 1.0f64.max(1.0 / p_avg).max(lam_cap).max(mu_cap);
    let initial = EllipsoidState::isotropic([1.0, 0.0], radius)
        .map_err(|e| SiError::DualSearch(e.to_string()))?;

    let sol = ellipsoid_minimize(
        |[lam, mu]| -> Result<Cut, SiError> {
            let (tau_sel, value) = dual_point(&ctxs, p0, p_avg, lam, mu);
            let sum_t: f64 = tau_sel.iter().sum();
            let sum_pt: f64 = tau_sel[0] * p0
                + ctxs
                    .iter()
                    .zip(&tau_sel[1..])
                    .map(|(c, &t)| c.power * t)
                    .sum::<f64>();
            Ok(Cut::Objective {
                value,
                grad: [1.0 - sum_t, p_avg - sum_pt],
            })
        },
        initial,
        Domain::lambda_only(),
        tol,
        DUAL_MAX_ITER,
    )
    .map_err(|e| SiError::DualSearch(e.to_string()))?;
    let [lambda, mu] = sol.point;

    // Primal recovery: users at their capped stationarity durations, slot 0
    // absorbing whatever the power equality still needs, then one common
    // scaling to close the equality exactly (durations scale the absorbed
    // power linearly).
    let mut tau = vec![0.0; k + 1];
    for (idx, ctx) in ctxs.iter().enumerate() {
        if ctx.weight == 0.0 {
            continue;
        }
        tau[idx + 1] = stationary_duration(ctx, lambda, mu, p_avg)
            .unwrap_or(f64::INFINITY)
            .min(1.0);
    }
    let used: f64 = ctxs
        .iter()
        .zip(&tau[1..])
        .map(|(c, &t)| c.power * t)
        .sum();
    let undrained = p_avg - used;
    if p0 > 0.0 && undrained > 0.0 {
        tau[0] = undrained / p0;
    }
    let powers: Vec<f64> = std::iter::once(p0)
        .chain(ctxs.iter().map(|c| c.power))
        .collect();
    let absorbed = tau[0] * p0 + used;
    if absorbed > 0.0 {
        let rho = p_avg / absorbed;
        for t in &mut tau {
            *t *= rho;
        }
    }
    // The dual point is only tol-accurate, so the recovered durations can
    // overrun the frame by a few parts in 1e6. When that happens the frame is
    // binding: land exactly on {Σ τ = 1, Σ τ·P = P_avg} with the minimum-norm
    // correction over the slots that participate (positive duration, or slot
    // 0 whenever it can absorb power).
    if tau.iter().sum::<f64>() > 1.0 {
        let active: Vec<usize> = (0..tau.len())
            .filter(|&i| tau[i] > 0.0 || (i == 0 && p0 > 0.0))
            .collect();
        let n_a = active.len() as f64;
        let sp: f64 = active.iter().map(|&i| powers[i]).sum();
        let spp: f64 = active.iter().map(|&i| powers[i] * powers[i]).sum();
        let det = n_a * spp - sp * sp;
        if det > 1e-12 * (n_a * spp).max(1.0) {
            let r1 = 1.0 - tau.iter().sum::<f64>();
            let r2 = p_avg
                - tau
                    .iter()
                    .zip(&powers)
                    .map(|(&t, &p)| t * p)
                    .sum::<f64>();
            let shift = (r1 * spp - sp * r2) / det;
            let tilt = (n_a * r2 - sp * r1) / det;
            for &i in &active {
                tau[i] = (tau[i] + shift + tilt * powers[i]).max(0.0);
            }
        }
    }
    let sum_t: f64 = tau.iter().sum();
    let absorbed: f64 = tau
        .iter()
        .zip(&powers)
        .map(|(&t, &p)| t * p)
        .sum::<f64>();
    let scale = p_avg.max(1.0);
    if !tau.iter().all(|t| t.is_finite() && *t >= 0.0)
        || sum_t > 1.0 + 1e-6
        || (absorbed - p_avg).abs() > 1e-6 * scale
    {
        return Err(SiError::DualSearch(format!(
            "recovered durations infeasible: sum {:.6e}, absorbed {:.6e} at lambda {:.6e}, mu {:.6e}",
            sum_t, absorbed, lambda, mu
        )));
    }
    Ok(TimeSolution {
        tau,
        lambda,
        mu,
        iterations: sol.iterations,
    })
}

/// Gradient of the weighted sum-rate with respect to the user slot powers at
/// fixed durations (length `K`, one entry per user).
///
/// With `S_i = C_i(P_i)·(P_avg − τ_i·P_i)/τ_i` and `d = γ·P_i + σ²`,
///
/// ```text
/// ∂(ω_i·R_i)/∂P_i = ω_i·(τ_i/ln2) · (dS_i/dP_i)/(1 + S_i),
/// dS_i/dP_i = −(θ_i·h_i/Γ)·(τ_i·σ² + γ·P_avg)/(τ_i·d²),
/// ```
///
/// so every component is non-positive: raising a user's slot power both burns
/// the shared budget faster and (through the leak) degrades its own channel.
/// Empty or zero-weight slots get a zero component, as do points outside the
/// rate's domain.
pub fn power_gradient(
    tau: &[f64],
    power: &[f64],
    params: &SystemParams,
    channels: &ChannelState,
) -> Result<Vec<f64>, SiError> {
    let k = params.num_users();
    for (name, v) in [("tau", tau), ("power", power)] {
        if v.len() != k + 1 {
            return Err(ModelError::DimensionMismatch {
                what: name,
                expected: k + 1,
                got: v.len(),
            }
            .into());
        }
        if let Some(&bad) = v.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(ModelError::InvalidParameter {
                name,
                value: bad,
                constraint: "finite and >= 0",
            }
            .into());
        }
    }
    let gamma = params.si_gamma();
    let p_avg = params.p_avg();
    let sigma2 = params.sigma2();
    let mut q = vec![0.0; k];
    for i in 1..=k {
        let (t, p, w) = (tau[i], power[i], params.weights()[i - 1]);
        if t <= 0.0 || w == 0.0 {
            continue;
        }
        let c = params.theta()[i - 1] * channels.h()[i - 1] / params.gap();
        let d = gamma * p + sigma2;
        let arg = 1.0 + (c / d) * (p_avg - t * p) / t;
        if arg <= 0.0 {
            continue;
        }
        let dsdp = -c * (t * sigma2 + gamma * p_avg) / (t * d * d);
        q[i - 1] = w * t * dsdp / (LN_2 * arg);
    }
    Ok(q)
}

/// Euclidean-style projection of candidate user powers onto the box
/// `[0, P_peak]` intersected with the budget `Σ τ_i·P_i = P_avg`.
///
/// `candidate` has one entry per user; `tau` is the full `K + 1` duration
/// vector. Empty slots (`τ_i = 0`) contribute nothing to the budget and keep
/// their box-clipped candidate. The projection is `P_i = clip(c_i + η·τ_i)`
/// with the shift `η` bisected on the monotone absorbed-power residual;
/// fails with [`SiError::InfeasibleProjection`] when even `P_i = P_peak`
/// everywhere cannot absorb the budget.
pub fn project_power(
    candidate: &[f64],
    tau: &[f64],
    params: &SystemParams,
) -> Result<Vec<f64>, SiError> {
    let k = params.num_users();
    if candidate.len() != k {
        return Err(ModelError::DimensionMismatch {
            what: "candidate powers",
            expected: k,
            got: candidate.len(),
        }
        .into());
    }
    if tau.len() != k + 1 {
        return Err(ModelError::DimensionMismatch {
            what: "slot durations",
            expected: k + 1,
            got: tau.len(),
        }
        .into());
    }
    if let Some(&bad) = candidate.iter().find(|x| !x.is_finite()) {
        return Err(ModelError::InvalidParameter {
            name: "candidate power",
            value: bad,
            constraint: "finite",
        }
        .into());
    }
    if let Some(&bad) = tau.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(ModelError::InvalidParameter {
            name: "tau",
            value: bad,
            constraint: "finite and >= 0",
        }
        .into());
    }
    project_onto_budget(
        candidate,
        &tau[1..],
        params.p_peak(),
        params.p_avg(),
        params.p_avg(),
    )
}

/// Core of [`project_power`] with an explicit budget target, so the outer
/// alternation can reserve part of `P_avg` for the charging slot.
fn project_onto_budget(
    candidate: &[f64],
    tau_users: &[f64],
    p_peak: f64,
    target: f64,
    scale: f64,
) -> Result<Vec<f64>, SiError> {
    let clip = |x: f64| x.clamp(0.0, p_peak);
    let active: Vec<usize> = (0..candidate.len())
        .filter(|&i| tau_users[i] > 0.0)
        .collect();
    let capacity: f64 = active.iter().map(|&i| tau_users[i] * p_peak).sum();
    let tol = 1e-9 * scale.max(1.0);
    if capacity < target - tol {
        return Err(SiError::InfeasibleProjection {
            capacity,
            required: target,
        });
    }
    let mut out: Vec<f64> = candidate.iter().map(|&c| clip(c)).collect();
    if active.is_empty() {
        return Ok(out);
    }
    if target <= tol {
        for &i in &active {
            out[i] = 0.0;
        }
        return Ok(out);
    }
    if capacity.is_finite() && capacity <= target + tol {
        for &i in &active {
            out[i] = p_peak;
        }
        return Ok(out);
    }
    let g = |eta: f64| -> f64 {
        active
            .iter()
            .map(|&i| tau_users[i] * clip(candidate[i] + eta * tau_users[i]))
            .sum::<f64>()
            - target
    };
    let mut lo = -1.0;
    let mut f_lo = g(lo);
    let mut grow = 0;
    while f_lo > 0.0 {
        lo *= 2.0;
        f_lo = g(lo);
        grow += 1;
        if grow > MAX_BRACKET_GROWTH {
            return Err(ScalarError::BracketFailure {
                lo,
                hi: 0.0,
                f_lo,
                f_hi: g(0.0),
            }
            .into());
        }
    }
    let mut hi = 1.0;
    let mut f_hi = g(hi);
    grow = 0;
    while f_hi < 0.0 {
        hi *= 2.0;
        f_hi = g(hi);
        grow += 1;
        if grow > MAX_BRACKET_GROWTH {
            return Err(ScalarError::BracketFailure {
                lo: 0.0,
                hi,
                f_lo: g(0.0),
                f_hi,
            }
            .into());
        }
    }
    let eta = if f_lo == 0.0 {
        lo
    } else if f_hi == 0.0 {
        hi
    } else {
        scalar::bisect(
            g,
            scalar::Bracket::new(lo, hi, f_lo, f_hi)?,
            1e-11 * scale.max(1.0),
            MAX_BISECT_ITER,
        )?
    };
    for &i in &active {
        out[i] = clip(candidate[i] + eta * tau_users[i]);
    }
    Ok(out)
}

/// Weighted sum-rate of an iterate through the public rate model (validated).
fn iterate_wsr(
    tau: &[f64],
    power: &[f64],
    params: &SystemParams,
    channels: &ChannelState,
) -> Result<(Vec<f64>, f64), SiError> {
    let k = params.num_users();
    let mut rates = vec![0.0; k];
    for i in 1..=k {
        rates[i - 1] = model::rate_fd_si(i, tau[i], power[i], params, channels)?;
    }
    let wsr = model::weighted_sum_rate(&rates, params.weights())?;
    Ok((rates, wsr))
}

struct BestIterate {
    tau: Vec<f64>,
    power: Vec<f64>,
    rates: Vec<f64>,
    wsr: f64,
}

/// Alternating maximization for the residual-self-interference problem,
/// warm-started from a feasible allocation (normally the
/// perfect-cancellation optimum).
///
/// Each round solves the exact time subproblem at the current powers, then
/// tries one projected-gradient power step with backtracking, accepting only
/// strict improvements; the budget kept by the charging slot is subtracted
/// from the users' projection target so the power equality survives every
/// move. Iteration stops at `outer_max` rounds or as soon as a round gains
/// no more than `tol_wsr`; the best iterate seen is returned, so the result
/// is never worse than the warm start under the same rate model.
///
/// With `P_peak = ∞` the warm start's impulse-charge allocation is already
/// stationary (users transmit at vanishing power and the leak never binds)
/// and is returned unchanged after re-evaluating its rates.
pub fn solve(
    params: &SystemParams,
    channels: &ChannelState,
    init: &SolverResult,
    cfg: &StepConfig,
) -> Result<SolverResult, SiError> {
    if cfg.outer_max == 0 {
        return Err(ModelError::InvalidParameter {
            name: "outer_max",
            value: 0.0,
            constraint: ">= 1",
        }
        .into());
    }
    for (name, v, ok) in [
        ("tol_wsr", cfg.tol_wsr, cfg.tol_wsr.is_finite() && cfg.tol_wsr >= 0.0),
        (
            "step_scale",
            cfg.step_scale,
            cfg.step_scale.is_finite() && cfg.step_scale > 0.0,
        ),
        (
            "max_halvings",
            cfg.max_halvings as f64,
            cfg.max_halvings >= 1,
        ),
    ] {
        if !ok {
            return Err(ModelError::InvalidParameter {
                name,
                value: v,
                constraint: "a positive, finite step setting",
            }
            .into());
        }
    }
    let k = params.num_users();
    if init.allocation.num_slots() != k + 1 {
        return Err(ModelError::DimensionMismatch {
            what: "initial allocation slots",
            expected: k + 1,
            got: init.allocation.num_slots(),
        }
        .into());
    }
    let report = model::validate_allocation(&init.allocation, params)?;
    let feas_tol = 1e-6 * params.p_avg().max(1.0);
    if !report.is_feasible(feas_tol) {
        return Err(SiError::BadInit {
            max_residual: report.max_residual(),
        });
    }

    let p_avg = params.p_avg();
    if !params.has_finite_peak() {
        let tau = init.allocation.tau().to_vec();
        let mut rates = vec![0.0; k];
        for i in 1..=k {
            rates[i - 1] = model::rate_fd_si(i, tau[i], 0.0, params, channels)?;
        }
        let wsr = model::weighted_sum_rate(&rates, params.weights())?;
        let mut residuals = BTreeMap::new();
        residuals.insert("sum_time", report.sum_time_slack);
        residuals.insert("sum_energy", report.sum_energy_slack);
        residuals.insert("peak_violation", report.peak_violation);
        residuals.insert("negativity", report.negativity);
        residuals.insert("power_equality", (init.allocation.total_energy() - p_avg).abs());
        residuals.insert("gain_over_init", 0.0);
        residuals.insert("inner_iterations", 0.0);
        return Ok(SolverResult {
            allocation: init.allocation.clone(),
            rates,
            wsr,
            duals: init.duals,
            iterations: 0,
            converged: true,
            residuals,
        });
    }

    let p_peak = params.p_peak();
    let tau0: Vec<f64> = init.allocation.tau().to_vec();
    let power0: Vec<f64> = (0..=k)
        .map(|i| init.allocation.power(i).min(p_peak))
        .collect();
    let (rates0, wsr0) = iterate_wsr(&tau0, &power0, params, channels)?;
    let mut best = BestIterate {
        tau: tau0,
        power: power0.clone(),
        rates: rates0,
        wsr: wsr0,
    };
    let mut power = power0;
    let mut duals_best = (init.duals.lambda, init.duals.mu.map(|m| -m).unwrap_or(0.0));
    let mut prev = best.wsr;
    let mut inner = 0usize;
    let mut outer_done = 0usize;
    let mut converged = false;

    for round in 1..=cfg.outer_max {
        outer_done = round;
        let ts = solve_time_subproblem(&power, params, channels, DUAL_TOL)?;
        inner += ts.iterations;
        if round == 1 {
            duals_best = (ts.lambda, ts.mu);
        }
        let tau_k = ts.tau;
        let (mut rates_k, mut wsr_k) = iterate_wsr(&tau_k, &power, params, channels)?;

        // Projected-gradient power step; the charging slot's share of the
        // budget is held fixed while this round's user powers move.
        let target = (p_avg - tau_k[0] * power[0]).max(0.0);
        let q = power_gradient(&tau_k, &power, params, channels)?;
        let qnorm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        if qnorm > 0.0 && target > 0.0 {
            let mut step = cfg.step_scale * p_peak / qnorm;
            'search: for _ in 0..cfg.max_halvings {
                let proposal: Vec<f64> =
                    (0..k).map(|j| power[j + 1] + step * q[j]).collect();
                match project_onto_budget(&proposal, &tau_k[1..], p_peak, target, p_avg) {
                    Ok(users) => {
                        let mut trial = Vec::with_capacity(k + 1);
                        trial.push(power[0]);
                        trial.extend(users);
                        let (r, w) = iterate_wsr(&tau_k, &trial, params, channels)?;
                        if w > wsr_k {
                            power = trial;
                            rates_k = r;
                            wsr_k = w;
                            break 'search;
                        }
                    }
                    Err(SiError::InfeasibleProjection { .. }) => break 'search,
                    Err(other) => return Err(other),
                }
                step *= 0.5;
            }
        }

        if wsr_k > best.wsr {
            best = BestIterate {
                tau: tau_k,
                power: power.clone(),
                rates: rates_k,
                wsr: wsr_k,
            };
            duals_best = (ts.lambda, ts.mu);
        }
        if wsr_k <= prev + cfg.tol_wsr {
            converged = true;
            break;
        }
        prev = wsr_k;
    }

    let energy: Vec<f64> = best
        .tau
        .iter()
        .zip(&best.power)
        .map(|(t, p)| t * p)
        .collect();
    let allocation = Allocation::from_energies(best.tau.clone(), energy)?;
    let report = model::validate_allocation(&allocation, params)?;
    let mut residuals = BTreeMap::new();
    residuals.insert("sum_time", report.sum_time_slack);
    residuals.insert("sum_energy", report.sum_energy_slack);
    residuals.insert("peak_violation", report.peak_violation);
    residuals.insert("negativity", report.negativity);
    residuals.insert(
        "power_equality",
        (allocation.total_energy() - p_avg).abs(),
    );
    residuals.insert("gain_over_init", best.wsr - wsr0);
    residuals.insert("inner_iterations", inner as f64);
    Ok(SolverResult {
        allocation,
        rates: best.rates,
        wsr: best.wsr,
        duals: DualValues {
            lambda: duals_best.0,
            mu: Some(duals_best.1),
        },
        iterations: outer_done,
        converged,
        residuals,
    })
}
