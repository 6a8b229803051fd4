//! Weighted sum-rate maximization for the full-duplex network under perfect
//! self-interference cancellation.
//!
//! With the SI term removed, user `i`'s rate over a frame is
//! `R_i = τ_i·log2(1 + α_i(P_avg − E_i)/τ_i)` once the broadcast budget
//! `ΣE_i = P_avg` is spent in full, and the design problem is
//!
//! ```text
//! maximize_{τ, E}  Σ ω_i·R_i(τ_i, E_i)
//! subject to       Σ_{i=0}^{K} τ_i ≤ 1,   Σ_{i=0}^{K} E_i ≤ P_avg,
//!                  0 ≤ E_i ≤ P_peak·τ_i.
//! ```
//!
//! The problem is concave; this module solves it through its Lagrange dual.
//! Relaxing the two coupling constraints with multipliers `λ` (time) and `μ`
//! (energy) decomposes the inner maximization over slots:
//!
//! * slot 0 contributes `(−λ + μP_peak)·τ_0` once `E_0 = P_peak·τ_0` is
//!   substituted (optimal whenever `μ > 0`), so `τ_0` saturates to 1 or 0
//!   depending on the sign of `−λ + μP_peak`;
//! * each user slot contributes `ψ_i(τ, E) = ω_i·R̂_i − λτ + μE` over the box
//!   `0 ≤ E ≤ P_peak·τ`, `0 ≤ τ ≤ 1`, where
//!   `R̂_i = τ·log2(1 + α_i(P_avg − E)/τ)`.
//!
//! `ψ_i` is jointly concave, and its exact maximizer is found in closed form
//! by comparing at most six candidate times (see [`inner_maximize`]): the two
//! endpoints, the stationary times of the `E = 0` and `E = P_peak·τ` faces
//! (roots of `f(z) = ln(1+z) − z/(1+z)` and of the face function
//! `f̄(z, a) = ln(1+z) − (z+a)/(1+z)`), and the two breakpoints where the
//! energy stationarity line `E = P_avg + (1/α − ω/(μ·ln 2))·τ` leaves the box.
//!
//! The dual function is minimized by the cutting-plane machinery in
//! [`crate::ellipsoid`], which needs only the subgradient
//! `(1 − Στ★, ΣE★ − P_avg)`. Because the inner maximizer is discontinuous at
//! the optimal multipliers (at least one slot sits on a flat segment of its
//! Lagrangian there), the primal solution is not read off a single inner
//! evaluation. Instead [`solve`] reconstructs it from the KKT structure,
//! enumerating the four stationarity patterns an optimum can have — slot 0
//! active or inactive, with or without a user whose energy is strictly inside
//! its box — solving each pattern's reduced equations by bisection, and
//! keeping the best feasible candidate. Weak duality turns the dual value
//! into a certificate: reconstruction stops as soon as a candidate's weighted
//! sum rate is within tolerance of the dual optimum, and the final gap is
//! reported in the result's residuals.
//!
//! The `P_peak = ∞` limit is served by [`solve_infinite_peak`]: the downlink
//! collapses to a zero-duration energy impulse (`τ_0 = 0`, `E_0 = P_avg`),
//! users spend no broadcast energy, and the single multiplier `λ` is found by
//! bisection on `Σ α_i·P_avg/z_i(λ) = 1`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::ellipsoid::{ellipsoid_minimize, Cut, Domain, EllipsoidError, EllipsoidState};
use crate::model::{
    self, Allocation, ChannelState, DualValues, ModelError, SolverResult, SystemParams,
};
use crate::scalar::{self, ScalarError};

use std::f64::consts::LN_2;

/// Default ellipsoid stopping tolerance on `√(gᵀAg)`.
pub const DUAL_TOL: f64 = 1e-9;
/// Ellipsoid iteration budget; enough to shrink the scaled initial ball below
/// [`DUAL_TOL`] for every parameter range the experiments touch.
pub const DUAL_MAX_ITER: usize = 600;
/// Lower bound kept on `μ` during the dual search. The energy constraint is
/// always tight at an optimum of the full-budget model, so `μ★ > 0` strictly
/// and the bound never binds at the solution.
pub const MU_MIN: f64 = 1e-12;

/// Fixed halving count for the reconstruction bisections; brackets shrink to
/// f64 resolution long before this many steps.
const BISECT_STEPS: usize = 200;
/// Structured reconstruction snap tolerance for slightly negative durations
/// or energies produced by root-finding noise.
const SNAP_TIGHT: f64 = 1e-9;
/// Looser snap tolerance for the complement-recovery candidate, whose slot-0
/// values inherit the dual search's final inexactness.
const SNAP_LOOSE: f64 = 1e-6;
/// Scaled tolerance on the per-slot peak constraint when screening candidates.
const PEAK_TOL: f64 = 1e-7;
/// Largest sum mismatch a candidate may carry before closure is refused.
const CLOSURE_TOL: f64 = 1e-6;

/// Errors from the perfect-cancellation solvers.
#[derive(Debug, Error)]
pub enum FdError {
    /// Invalid model inputs or allocation assembly.
    #[error(transparent)]
    Model(#[from] ModelError),
    /// Scalar root-finding failed outside the ranges handled analytically.
    #[error(transparent)]
    Scalar(#[from] ScalarError),
    /// The per-slot inner maximization requires `μ > 0`; with `μ ≤ 0` the
    /// slot-0 term `μE_0` makes the relaxation unbounded or degenerate.
    #[error("inner maximization requires μ > 0, got μ = {mu}")]
    NonPositiveMu { mu: f64 },
    /// The finite-peak dual machinery was invoked with `P_peak = ∞`.
    #[error("P_peak is infinite; use solve_infinite_peak for the unconstrained-peak limit")]
    InfinitePeak,
    /// The dual descent could not produce a usable multiplier pair.
    #[error("dual search failed: {0}")]
    DualSearch(String),
    /// No stationarity pattern yielded a feasible allocation. The complement
    /// slot-0 values recovered at the final multipliers are included for
    /// diagnosis.
    #[error(
        "primal reconstruction failed at (λ = {lambda}, μ = {mu}): \
         complement slot 0 gives τ₀ = {tau0}, E₀ = {e0}, no feasible candidate found"
    )]
    Recovery {
        lambda: f64,
        mu: f64,
        tau0: f64,
        e0: f64,
    },
}

/// Exact maximizer of the relaxed Lagrangian at one dual point: slot
/// durations and energies for slots `0..=K`, plus the attained dual value
/// `G(λ, μ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerIterate {
    /// Slot durations `τ_0..τ_K` (length `K + 1`).
    pub tau: Vec<f64>,
    /// Slot energies `E_0..E_K` (length `K + 1`).
    pub energy: Vec<f64>,
    /// Dual value `G(λ, μ)` attained by this maximizer.
    pub value: f64,
}

/// Face function `f̄(z, a) = ln(1+z) − (z+a)/(1+z)` on its full domain
/// `z > −1`. [`scalar::fbar_value`] restricts to `z ≥ 0`; the peak face of
/// the inner problem also needs the segment `z ∈ (−1, 0)`, reached when a
/// user's slot is long enough that its own-slot broadcast exceeds `P_avg`.
fn fbar_raw(z: f64, a: f64) -> f64 {
    z.ln_1p() - (z + a) / (1.0 + z)
}

/// Root of `f̄(z, a) = c` on the increasing branch `z ∈ (max(−1, −a), ∞)`.
///
/// `f̄(·, a)` is strictly increasing there (its derivative is
/// `(z+a)/(1+z)²`), so the root is unique when it exists:
///
/// * returns `None` when `a < 1` and `c ≤ ln(1 − a)`, the branch infimum —
///   the face value then increases for all admissible `z` and the maximum
///   sits at an endpoint already covered by the candidate list;
/// * returns `Some(+∞)` when `c` exceeds f64 range (`c ≳ 709`), meaning the
///   stationary time is indistinguishable from 0;
/// * otherwise brackets by doubling and bisects to f64 resolution.
pub(crate) fn fbar_branch_root(c: f64, a: f64) -> Option<f64> {
    debug_assert!(a > 0.0, "peak face needs a = α·P_peak > 0");
    let z_lo = (-1.0f64).max(-a);
    let lo = z_lo + 1e-13 * z_lo.abs().max(1.0);
    if !(fbar_raw(lo, a) < c) {
        return None;
    }
    let mut hi = 1.0;
    let mut doublings = 0;
    while fbar_raw(hi, a) < c {
        hi *= 2.0;
        doublings += 1;
        if doublings > 1100 || !hi.is_finite() {
            return Some(f64::INFINITY);
        }
    }
    let mut lo = lo;
    for _ in 0..BISECT_STEPS {
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            break;
        }
        if fbar_raw(mid, a) < c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// One user's exact best response to a dual point.
struct Response {
    value: f64,
    tau: f64,
    energy: f64,
}

/// Value of user `i`'s Lagrangian term at duration `tau`, with the energy
/// chosen optimally for that duration: `E★(τ) = clamp(E_stat(τ), 0, P_peak·τ)`
/// where `E_stat(τ) = P_avg + e_slope·τ` is the `∂/∂E` stationarity line.
/// Returns `(value, energy)`; a non-positive log argument yields `−∞`.
fn user_term_at(
    tau: f64,
    lambda: f64,
    mu: f64,
    alpha: f64,
    weight: f64,
    e_slope: f64,
    p_avg: f64,
    p_peak: f64,
) -> (f64, f64) {
    if !(tau > 0.0) {
        return (0.0, 0.0);
    }
    let e = (p_avg + e_slope * tau).clamp(0.0, p_peak * tau);
    let arg = 1.0 + alpha * (p_avg - e) / tau;
    if !(arg > 0.0) {
        return (f64::NEG_INFINITY, e);
    }
    (weight * tau * arg.log2() - lambda * tau + mu * e, e)
}

/// Exact maximizer of `ω·R̂ − λτ + μE` over one user's box
/// `{0 ≤ τ ≤ 1, 0 ≤ E ≤ P_peak·τ}`.
///
/// The objective is jointly concave, so its maximum lies at `τ ∈ {0, 1}`, at
/// a face stationary point, or at a breakpoint where the energy stationarity
/// line crosses a face; all of those times are available in closed form and
/// the best is selected by evaluation.
fn best_response(
    lambda: f64,
    mu: f64,
    alpha: f64,
    weight: f64,
    p_avg: f64,
    p_peak: f64,
) -> Response {
    if weight == 0.0 {
        // Rate term vanishes: the slot behaves exactly like slot 0.
        let gain = -lambda + mu * p_peak;
        let tau = if gain > 0.0 { 1.0 } else { 0.0 };
        return Response {
            value: gain.max(0.0),
            tau,
            energy: p_peak * tau,
        };
    }
    let b = weight / (mu * LN_2);
    let e_slope = 1.0 / alpha - b;
    let mut times = [f64::NAN; 6];
    let mut n = 0;
    times[n] = 1.0;
    n += 1;
    // E = 0 face: stationary where f(α·P_avg/τ) = λ·ln2/ω.
    let z_free = scalar::f_inverse_capped(lambda * LN_2 / weight, 1e-13);
    if z_free.is_finite() && z_free > 0.0 {
        times[n] = alpha * p_avg / z_free;
        n += 1;
    }
    // E = P_peak·τ face: stationary where f̄(z̃, α·P_peak) = (λ − μP_peak)·ln2/ω
    // with z̃ = α(P_avg − P_peak·τ)/τ.
    let a = alpha * p_peak;
    if let Some(z_face) = fbar_branch_root((lambda - mu * p_peak) * LN_2 / weight, a) {
        if z_face.is_finite() {
            times[n] = alpha * p_avg / (z_face + a);
            n += 1;
        }
        // z_face = +∞ means the stationary duration is 0, already a candidate.
    }
    // Breakpoints where the energy stationarity line exits the box.
    if e_slope < 0.0 {
        times[n] = -p_avg / e_slope;
        n += 1;
    }
    if e_slope < p_peak {
        times[n] = -p_avg / (e_slope - p_peak);
        n += 1;
    }
    // τ = 0 baseline: value 0.
    let (mut best_v, mut best_t, mut best_e) = (0.0, 0.0, 0.0);
    for &t in &times[..n] {
        if !(t > 0.0) || !t.is_finite() {
            continue;
        }
        let t = t.min(1.0);
        let (v, e) = user_term_at(t, lambda, mu, alpha, weight, e_slope, p_avg, p_peak);
        if v > best_v {
            best_v = v;
            best_t = t;
            best_e = e;
        }
    }
    Response {
        value: best_v,
        tau: best_t,
        energy: best_e,
    }
}

/// Exactly maximizes the relaxed Lagrangian
/// `Σ_i [ω_i·R̂_i − λτ_i + μE_i] + (−λτ_0 + μE_0) + λ − μP_avg`
/// over the per-slot boxes at the dual point `(λ, μ)`.
///
/// Requires finite `P_peak`, `μ > 0`, and finite `λ ≥ 0`. The returned value
/// is the dual function `G(λ, μ)`, an upper bound on the optimal weighted sum
/// rate for every such dual point.
pub fn inner_maximize(
    lambda: f64,
    mu: f64,
    params: &SystemParams,
    channels: &ChannelState,
) -> Result<InnerIterate, FdError> {
    if !params.has_finite_peak() {
        return Err(FdError::InfinitePeak);
    }
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(FdError::NonPositiveMu { mu });
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(FdError::DualSearch(format!(
            "inner maximization requires finite λ ≥ 0, got λ = {lambda}"
        )));
    }
    let k = params.num_users();
    if channels.alpha().len() != k {
        return Err(FdError::Model(ModelError::DimensionMismatch {
            what: "channels",
            expected: k,
            got: channels.alpha().len(),
        }));
    }
    let (p_avg, p_peak) = (params.p_avg(), params.p_peak());
    let mut tau = vec![0.0; k + 1];
    let mut energy = vec![0.0; k + 1];
    // Slot 0: linear term (−λ + μP_peak)·τ_0 after E_0 = P_peak·τ_0.
    let slot0_gain = -lambda + mu * p_peak;
    if slot0_gain > 0.0 {
        tau[0] = 1.0;
        energy[0] = p_peak;
    }
    let mut value = slot0_gain.max(0.0) + lambda - mu * p_avg;
    for i in 0..k {
        let r = best_response(
            lambda,
            mu,
            channels.alpha()[i],
            params.weights()[i],
            p_avg,
            p_peak,
        );
        tau[i + 1] = r.tau;
        energy[i + 1] = r.energy;
        value += r.value;
    }
    Ok(InnerIterate { tau, energy, value })
}

/// Subgradient of the dual function at the dual point that produced
/// `iterate`: `(1 − Στ★, ΣE★ − P_avg)`.
pub fn dual_subgradient(iterate: &InnerIterate, params: &SystemParams) -> [f64; 2] {
    let t: f64 = iterate.tau.iter().sum();
    let e: f64 = iterate.energy.iter().sum();
    [1.0 - t, e - params.p_avg()]
}

/// Fixed-step bisection between `lo` and `hi`; `f_lo` is the residual at
/// `lo`, which fixes the orientation. `NaN` mid-values are pushed toward
/// `hi`. Converges to f64 resolution (the loop exits early when the midpoint
/// stops separating the bracket).
fn bisect_fixed(f: &mut impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, f_lo: f64) -> f64 {
    let lo_negative = f_lo < 0.0;
    for _ in 0..BISECT_STEPS {
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            break;
        }
        let fm = f(mid);
        let mid_negative = if fm.is_nan() { lo_negative } else { fm < 0.0 };
        if mid_negative == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Scans `f` on `n` log-spaced points of `[lo, hi]` and bisects every sign
/// change between consecutive finite evaluations (at most 8 roots). `NaN`
/// breaks the pairing, so sign changes are never inferred across undefined
/// regions.
fn scan_roots(f: &mut impl FnMut(f64) -> f64, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mut roots = Vec::new();
    if !(hi > lo && lo > 0.0) || n < 2 {
        return roots;
    }
    let log_span = (hi / lo).ln();
    let mut prev: Option<(f64, f64)> = None;
    for j in 0..n {
        let x = lo * (log_span * j as f64 / (n - 1) as f64).exp();
        let fx = f(x);
        if fx.is_nan() {
            prev = None;
            continue;
        }
        if let Some((px, pf)) = prev {
            if (pf < 0.0) != (fx < 0.0) {
                roots.push(bisect_fixed(f, px, x, pf));
                if roots.len() >= 8 {
                    return roots;
                }
            }
        }
        prev = Some((x, fx));
    }
    roots
}

/// Multiplier pair forced by a user whose energy is strictly inside its box:
/// interior stationarity pins `μ = ω·α/((1 + z)·ln 2)` with
/// `z = f⁻¹(λ·ln2/ω)`. Returns `(μ, z)`, or `None` when `λ` is too small
/// (`z ≤ 0`) or too large (`z` overflows) for an interior pattern.
fn interior_energy_mu(lambda: f64, alpha: f64, weight: f64) -> Option<(f64, f64)> {
    if !(lambda > 0.0) || !(weight > 0.0) {
        return None;
    }
    let z = scalar::f_inverse_capped(lambda * LN_2 / weight, 1e-13);
    if !z.is_finite() || z <= 0.0 {
        return None;
    }
    Some((weight * alpha / ((1.0 + z) * LN_2), z))
}

/// Snaps root-finding noise off a candidate and closes both sum constraints
/// exactly: negative entries within `snap_tol` (scaled for energies) become
/// 0, then the residuals `1 − Στ` and `P_avg − ΣE` are absorbed into the
/// largest slot. At finite peak power two exact repairs follow: slot 0 gets
/// the tiny duration its energy requires (borrowed from the slot with the
/// most peak slack), and energy hairs on zero-duration slots are moved to a
/// slot with headroom. Returns `None` when the candidate is structurally
/// infeasible (entries below tolerance, sums off by more than
/// [`CLOSURE_TOL`], or a peak violation beyond [`PEAK_TOL`] scale).
fn finalize(
    mut tau: Vec<f64>,
    mut energy: Vec<f64>,
    snap_tol: f64,
    p_avg: f64,
    p_peak: f64,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let e_scale = p_avg.max(1.0);
    for t in &mut tau {
        if !t.is_finite() || *t < -snap_tol || *t > 1.0 + 1e-9 {
            return None;
        }
        if *t < 0.0 {
            *t = 0.0;
        }
    }
    for e in &mut energy {
        if !e.is_finite() || *e < -snap_tol * e_scale {
            return None;
        }
        if *e < 0.0 {
            *e = 0.0;
        }
    }
    let argmax = |v: &[f64]| -> usize {
        let mut best = 0;
        for (i, x) in v.iter().enumerate() {
            if *x > v[best] {
                best = i;
            }
        }
        best
    };
    let d_t = 1.0 - tau.iter().sum::<f64>();
    if d_t.abs() > CLOSURE_TOL {
        return None;
    }
    let j = argmax(&tau);
    tau[j] += d_t;
    if tau[j] < 0.0 {
        return None;
    }
    let d_e = p_avg - energy.iter().sum::<f64>();
    if d_e.abs() > CLOSURE_TOL * e_scale {
        return None;
    }
    let j = argmax(&energy);
    energy[j] += d_e;
    if energy[j] < 0.0 {
        return None;
    }
    if p_peak.is_finite() {
        // Slot 0's duration comes from the cancellation 1 − Στ_users while
        // its energy absorbs the budget residual, so at large P_peak the
        // product P_peak·τ_0 amplifies roundoff far beyond the energy
        // tolerances and a genuinely optimal pattern can present E_0 a hair
        // above P_peak·τ_0. When the missing duration is tiny, restore
        // E_0 ≤ P_peak·τ_0 exactly by borrowing it from the slot with the
        // most peak slack (the repaired point is re-scored honestly, so the
        // transfer cannot flatter a bad candidate).
        let overshoot = energy[0] - p_peak * tau[0];
        if overshoot > PEAK_TOL * e_scale {
            let need = energy[0] / p_peak - tau[0];
            if need > CLOSURE_TOL {
                return None;
            }
            let mut donor = 0usize;
            let mut slack = f64::NEG_INFINITY;
            for i in 1..tau.len() {
                let s = tau[i] - energy[i] / p_peak;
                if s > slack {
                    slack = s;
                    donor = i;
                }
            }
            if donor == 0 || slack < need {
                return None;
            }
            tau[donor] -= need;
            tau[0] += need;
        }
        // A zero-duration slot cannot carry energy at finite peak power.
        // Sub-tolerance hairs left by the budget cancellation are folded
        // back into the powered slots by a proportional rescale, which keeps
        // the budget closed while slots that spend nothing stay at exactly
        // zero; anything larger than the peak tolerance is a real violation.
        let mut hair = 0.0;
        for i in 0..tau.len() {
            if tau[i] == 0.0 && energy[i] > 0.0 {
                if energy[i] > PEAK_TOL * e_scale {
                    return None;
                }
                hair += energy[i];
                energy[i] = 0.0;
            }
        }
        if hair > 0.0 {
            let remaining = p_avg - hair;
            if remaining <= 0.0 {
                return None;
            }
            let scale = p_avg / remaining;
            for e in &mut energy {
                *e *= scale;
            }
        }
        for i in 0..tau.len() {
            if energy[i] > p_peak * tau[i] + PEAK_TOL * e_scale {
                return None;
            }
        }
    }
    Some((tau, energy))
}

/// A feasible primal candidate produced by reconstruction, with the weighted
/// sum rate it attains and the multiplier pair of the stationarity pattern
/// that generated it.
struct Candidate {
    tau: Vec<f64>,
    energy: Vec<f64>,
    wsr: f64,
    lambda: f64,
    mu: f64,
}

/// Enumerates the stationarity patterns a KKT point of the full-budget
/// problem can have and keeps the best feasible candidate. Patterns are
/// parameterized by whether slot 0 is active (then `λ = μP_peak`, the exact
/// multiplier tie that lets `τ_0 > 0`) and whether some user's energy is
/// strictly interior (then `μ` lies on that user's stationarity manifold).
struct Reconstructor<'a> {
    alphas: &'a [f64],
    weights: &'a [f64],
    p_avg: f64,
    p_peak: f64,
    /// Best dual value seen: an upper bound on the optimal weighted sum
    /// rate. Seeded with the ellipsoid's best iterate and sharpened by the
    /// dual value at every offered pattern's multiplier pair.
    g_best: f64,
    /// A candidate within this much of `g_best` is accepted as optimal.
    gap_tol: f64,
    best: Option<Candidate>,
}

impl Reconstructor<'_> {
    /// True once the incumbent's duality gap certifies optimality.
    fn certified(&self) -> bool {
        matches!(&self.best, Some(c) if self.g_best - c.wsr <= self.gap_tol)
    }

    /// Duality gap of the incumbent (`+∞` before any candidate is feasible).
    fn gap(&self) -> f64 {
        match &self.best {
            Some(c) => self.g_best - c.wsr,
            None => f64::INFINITY,
        }
    }

    /// Dual objective at `(λ, μ)`: the slot-0 gain plus the users' exact best
    /// responses. Any `λ ≥ 0, μ > 0` yields a valid upper bound on the
    /// optimal weighted sum rate by weak duality, so evaluating the dual at
    /// each pattern's multiplier pair sharpens the certificate beyond
    /// whatever the ellipsoid search happened to visit — at an exact KKT
    /// pattern the bound matches the candidate to roundoff.
    fn dual_value(&self, lambda: f64, mu: f64) -> f64 {
        let mut g = (-lambda + mu * self.p_peak).max(0.0) + lambda - mu * self.p_avg;
        for i in 0..self.alphas.len() {
            g += best_response(
                lambda,
                mu,
                self.alphas[i],
                self.weights[i],
                self.p_avg,
                self.p_peak,
            )
            .value;
        }
        g
    }

    /// Exact user best responses at `(λ, μ)`, skipping `skip` (0-based user
    /// index). Returns `(Στ, ΣE, τ_users, E_users)`; the skipped position is
    /// zeroed and excluded from the sums.
    fn sums(&self, lambda: f64, mu: f64, skip: Option<usize>) -> (f64, f64, Vec<f64>, Vec<f64>) {
        let k = self.alphas.len();
        let (mut t_sum, mut e_sum) = (0.0, 0.0);
        let mut tau = vec![0.0; k];
        let mut energy = vec![0.0; k];
        for i in 0..k {
            if skip == Some(i) {
                continue;
            }
            let r = best_response(
                lambda,
                mu,
                self.alphas[i],
                self.weights[i],
                self.p_avg,
                self.p_peak,
            );
            tau[i] = r.tau;
            energy[i] = r.energy;
            t_sum += r.tau;
            e_sum += r.energy;
        }
        (t_sum, e_sum, tau, energy)
    }

    /// Offers a user-level candidate (`τ_users`, `E_users` plus explicit slot
    /// 0) for selection; infeasible or worse candidates are discarded.
    fn consider(
        &mut self,
        tau0: f64,
        e0: f64,
        tau_users: Vec<f64>,
        e_users: Vec<f64>,
        snap_tol: f64,
        lambda: f64,
        mu: f64,
    ) {
        if lambda.is_finite() && lambda >= 0.0 && mu.is_finite() && mu > 0.0 {
            let g = self.dual_value(lambda, mu);
            if g.is_finite() && g < self.g_best {
                self.g_best = g;
            }
        }
        let mut tau = Vec::with_capacity(tau_users.len() + 1);
        tau.push(tau0);
        tau.extend_from_slice(&tau_users);
        let mut energy = Vec::with_capacity(e_users.len() + 1);
        energy.push(e0);
        energy.extend_from_slice(&e_users);
        let Some((tau, energy)) = finalize(tau, energy, snap_tol, self.p_avg, self.p_peak) else {
            return;
        };
        let mut wsr = 0.0;
        for i in 0..self.alphas.len() {
            wsr += self.weights[i]
                * model::rate_fd_nosi_term(tau[i + 1], energy[i + 1], self.alphas[i], self.p_avg);
        }
        if !wsr.is_finite() {
            return;
        }
        if self.best.as_ref().map_or(true, |b| wsr > b.wsr) {
            self.best = Some(Candidate {
                tau,
                energy,
                wsr,
                lambda,
                mu,
            });
        }
    }

    /// Pattern: slot 0 active and user `m`'s energy interior. The tie
    /// `λ = μP_peak` combined with `m`'s manifold `μ = manifold_m(λ)` pins
    /// `λ` as the unique root of the increasing function
    /// `λ/P_peak − manifold_m(λ)`; the remaining unknowns `(E_m, τ_0)` then
    /// solve a 2×2 linear system from the two sum constraints.
    fn slot0_active_with_interior(&mut self, m: usize) {
        let (alpha_m, w_m) = (self.alphas[m], self.weights[m]);
        let p_peak = self.p_peak;
        let mut r = |lam: f64| match interior_energy_mu(lam, alpha_m, w_m) {
            Some((mu_m, _)) => lam / p_peak - mu_m,
            None => lam / p_peak,
        };
        let lo = 1e-12;
        let f_lo = r(lo);
        if f_lo >= 0.0 {
            return;
        }
        let mut hi = 1.0;
        let mut doublings = 0;
        while r(hi) < 0.0 {
            hi *= 2.0;
            doublings += 1;
            if doublings > 1100 {
                return;
            }
        }
        let lam = bisect_fixed(&mut r, lo, hi, f_lo);
        let mu = lam / p_peak;
        let Some((_, z_m)) = interior_energy_mu(lam, alpha_m, w_m) else {
            return;
        };
        if !(mu > 0.0) {
            return;
        }
        let (t_o, e_o, mut tau_u, mut e_u) = self.sums(lam, mu, Some(m));
        // Στ = 1 with τ_m = (α_m/z_m)(P_avg − E_m), and ΣE = P_avg with
        // E_0 = P_peak·τ_0:
        //   −k₁·E_m + τ_0 = 1 − Στ_others − k₁·P_avg
        //    E_m + P_peak·τ_0 = P_avg − ΣE_others
        let k1 = alpha_m / z_m;
        let rhs1 = 1.0 - t_o - k1 * self.p_avg;
        let rhs2 = self.p_avg - e_o;
        let det = -k1 * p_peak - 1.0;
        let e_m = (p_peak * rhs1 - rhs2) / det;
        let tau_m = k1 * (self.p_avg - e_m);
        tau_u[m] = tau_m;
        e_u[m] = e_m;
        // Close both sums through slot 0 exactly.
        let tau0 = 1.0 - (t_o + tau_m);
        let e0 = self.p_avg - (e_o + e_m);
        self.consider(tau0, e0, tau_u, e_u, SNAP_TIGHT, lam, mu);
    }

    /// Pattern: slot 0 active, every user on a face. With `μ = λ/P_peak`,
    /// `λ` must zero the single residual
    /// `ΣE(λ) + P_peak·(1 − Στ(λ)) − P_avg` (slot 0 absorbs the leftover
    /// time at peak power); all sign changes over the scan window are tried.
    fn slot0_active_faces_only(&mut self, lam_lo: f64, lam_hi: f64) {
        let p_peak = self.p_peak;
        let roots = {
            let mut r = |lam: f64| {
                let mu = lam / p_peak;
                if !(mu > 0.0) {
                    return f64::NAN;
                }
                let (t, e, _, _) = self.sums(lam, mu, None);
                e + p_peak * (1.0 - t) - self.p_avg
            };
            scan_roots(&mut r, lam_lo, lam_hi, 96)
        };
        for lam in roots {
            let mu = lam / p_peak;
            let (t, e, tau_u, e_u) = self.sums(lam, mu, None);
            self.consider(1.0 - t, self.p_avg - e, tau_u, e_u, SNAP_TIGHT, lam, mu);
        }
    }

    /// Pattern: slot 0 inactive and user `m`'s energy interior. `μ` follows
    /// `m`'s manifold, `E_m` closes the energy budget, `τ_m` follows `m`'s
    /// stationarity, and `λ` must zero `Στ − 1`.
    fn slot0_inactive_with_interior(&mut self, m: usize, lam_lo: f64, lam_hi: f64) {
        let (alpha_m, w_m) = (self.alphas[m], self.weights[m]);
        let roots = {
            let mut r = |lam: f64| match interior_energy_mu(lam, alpha_m, w_m) {
                Some((mu, z_m)) if mu > 0.0 => {
                    let (t_o, e_o, _, _) = self.sums(lam, mu, Some(m));
                    // E_m = P_avg − ΣE_others, so P_avg − E_m = ΣE_others.
                    t_o + alpha_m * e_o / z_m - 1.0
                }
                // Below the manifold's domain the stationary τ_m diverges;
                // continue the residual with the matching sign.
                _ => 1e300,
            };
            scan_roots(&mut r, lam_lo, lam_hi, 96)
        };
        for lam in roots {
            let Some((mu, _)) = interior_energy_mu(lam, alpha_m, w_m) else {
                continue;
            };
            if !(mu > 0.0) {
                continue;
            }
            let (t_o, e_o, mut tau_u, mut e_u) = self.sums(lam, mu, Some(m));
            tau_u[m] = 1.0 - t_o;
            e_u[m] = self.p_avg - e_o;
            self.consider(0.0, 0.0, tau_u, e_u, SNAP_TIGHT, lam, mu);
        }
    }

    /// `λ` clearing the time constraint at fixed `μ`: the unique root of
    /// `Στ(λ, μ) = 1` (`Στ` is non-increasing in `λ`). Returns the lower
    /// scan endpoint when even `λ ≈ 0` leaves slack time.
    fn time_clearing_lambda(&self, mu: f64) -> Option<f64> {
        let mut g = |lam: f64| self.sums(lam, mu, None).0 - 1.0;
        let lo = 1e-12;
        let g_lo = g(lo);
        if g_lo < 0.0 {
            return Some(lo);
        }
        let mut hi = 1.0;
        let mut doublings = 0;
        while g(hi) >= 0.0 {
            hi *= 2.0;
            doublings += 1;
            if doublings > 1100 {
                return None;
            }
        }
        Some(bisect_fixed(&mut g, lo, hi, g_lo))
    }

    /// Pattern: slot 0 inactive, every user on a face. Nested search: for
    /// each `μ`, `λ★(μ)` clears the time constraint, and `μ` must zero the
    /// energy residual `ΣE(λ★(μ), μ) − P_avg`.
    fn slot0_inactive_faces_only(&mut self, mu_lo: f64, mu_hi: f64) {
        let roots = {
            let mut r = |mu: f64| match self.time_clearing_lambda(mu) {
                Some(lam) => self.sums(lam, mu, None).1 - self.p_avg,
                None => f64::NAN,
            };
            scan_roots(&mut r, mu_lo, mu_hi, 48)
        };
        for mu in roots {
            let Some(lam) = self.time_clearing_lambda(mu) else {
                continue;
            };
            let (_, _, tau_u, e_u) = self.sums(lam, mu, None);
            self.consider(0.0, 0.0, tau_u, e_u, SNAP_TIGHT, lam, mu);
        }
    }
}

/// Solves the weighted sum-rate problem for the current channel realization.
///
/// Dispatches to [`solve_infinite_peak`] when `P_peak = ∞`. Otherwise: users
/// with zero weight are removed up front (they get `τ = 0`, `E = 0`; keeping
/// them would only blur the dual geometry), the dual function is minimized by
/// the ellipsoid method over `{λ ≥ 0, μ ≥ MU_MIN}` from a ball scaled to the
/// weight and channel magnitudes, and the primal allocation is rebuilt from
/// the KKT stationarity patterns (see [`Reconstructor`]), certified against
/// the dual optimum by weak duality.
///
/// `tol` is the dual stopping tolerance ([`DUAL_TOL`] is the recommended
/// default). The result's `residuals` report the feasibility slacks, the
/// duality gap certificate (`"duality_gap"`), and the slot-0 complements
/// recovered at the final dual point (`"recovered_tau0"`, `"recovered_e0"`,
/// diagnostic). `converged` is true exactly when the duality-gap certificate
/// reached `1e-6` scale; the ellipsoid's own stopping flag is not trusted,
/// since it can fire while the best dual bound is still far from the
/// reconstructed primal value.
pub fn solve(
    params: &SystemParams,
    channels: &ChannelState,
    tol: f64,
) -> Result<SolverResult, FdError> {
    if !params.has_finite_peak() {
        return solve_infinite_peak(params, channels);
    }
    let k_full = params.num_users();
    if channels.alpha().len() != k_full {
        return Err(FdError::Model(ModelError::DimensionMismatch {
            what: "channels",
            expected: k_full,
            got: channels.alpha().len(),
        }));
    }
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
    let core = solve_finite(&red_params, &red_channels, tol)?;

    // Re-insert stripped users with τ = 0, E = 0.
    let mut tau = vec![0.0; k_full + 1];
    let mut energy = vec![0.0; k_full + 1];
    tau[0] = core.tau[0];
    energy[0] = core.energy[0];
    for (j, &i) in kept.iter().enumerate() {
        tau[i + 1] = core.tau[j + 1];
        energy[i + 1] = core.energy[j + 1];
    }
    let allocation = Allocation::from_energies(tau, energy)?;
    let report = model::validate_allocation(&allocation, params)?;
    let mut rates = Vec::with_capacity(k_full);
    for user in 1..=k_full {
        rates.push(model::rate_fd_nosi(user, &allocation, params, channels)?);
    }
    let wsr = model::weighted_sum_rate(&rates, params.weights())?;
    let mut residuals = BTreeMap::new();
    residuals.insert("sum_time", report.sum_time_slack);
    residuals.insert("sum_energy", report.sum_energy_slack);
    residuals.insert("peak_violation", report.peak_violation);
    residuals.insert("negativity", report.negativity);
    residuals.insert("duality_gap", core.g_best - wsr);
    residuals.insert("recovered_tau0", core.naive_tau0);
    residuals.insert("recovered_e0", core.naive_e0);
    Ok(SolverResult {
        allocation,
        rates,
        wsr,
        duals: DualValues {
            lambda: core.lambda,
            mu: Some(core.mu),
        },
        iterations: core.iterations,
        converged: core.converged,
        residuals,
    })
}

/// Reduced-problem solution passed back from the finite-peak core.
struct FiniteCore {
    tau: Vec<f64>,
    energy: Vec<f64>,
    lambda: f64,
    mu: f64,
    g_best: f64,
    iterations: usize,
    converged: bool,
    naive_tau0: f64,
    naive_e0: f64,
}

/// Finite-peak core on a reduced problem whose weights are all positive.
fn solve_finite(
    params: &SystemParams,
    channels: &ChannelState,
    tol: f64,
) -> Result<FiniteCore, FdError> {
    let k = params.num_users();
    let (p_avg, p_peak) = (params.p_avg(), params.p_peak());
    let alphas = channels.alpha().to_vec();
    let weights = params.weights().to_vec();

    // Initial ball large enough to contain the optimal multipliers for any
    // weight/channel scaling: λ★ grows linearly with the weights and is
    // bounded by the largest achievable weighted rate slope, μ★ by ω·α.
    let alpha_max = alphas.iter().fold(f64::MIN, |m, &a| m.max(a));
    let w_max = weights.iter().fold(f64::MIN, |m, &w| m.max(w));
    let lam_cap = w_max * (1.0 + alpha_max * p_avg * (k as f64 + 1.0)).log2();
    let mu_cap = w_max * alpha_max;
    let radius = 10.0 * 1.0f64.max(1.0 / p_avg).max(lam_cap).max(mu_cap);
    let initial = EllipsoidState::isotropic([1.0, 1.0 / p_avg], radius)
        .map_err(|e| FdError::DualSearch(e.to_string()))?;

    let sol = ellipsoid_minimize(
        |[lam, mu]| -> Result<Cut, FdError> {
            let it = inner_maximize(lam, mu, params, channels)?;
            let grad = dual_subgradient(&it, params);
            Ok(Cut::Objective {
                value: it.value,
                grad,
            })
        },
        initial,
        Domain::with_mu_min(MU_MIN),
        tol,
        DUAL_MAX_ITER,
    )
    .map_err(|err| match err {
        EllipsoidError::Oracle { source, .. } => source,
        other => FdError::DualSearch(other.to_string()),
    })?;
    let [lam_f, mu_f] = sol.point;
    let g_best = sol.value;

    let mut rec = Reconstructor {
        alphas: &alphas,
        weights: &weights,
        p_avg,
        p_peak,
        g_best,
        gap_tol: 1e-8f64.max(1e-8 * g_best.abs()),
        best: None,
    };

    // Complement recovery at the final dual point, for the diagnostic
    // residuals and as a last-resort candidate below: keep the users' exact
    // responses and give slot 0 whatever the sum constraints leave.
    let it = inner_maximize(lam_f, mu_f, params, channels)?;
    let t_users: f64 = it.tau[1..].iter().sum();
    let e_users: f64 = it.energy[1..].iter().sum();
    let naive_tau0 = 1.0 - t_users;
    let naive_e0 = p_avg - e_users;

    // Root-scan windows for the face-only patterns: anchored at the dual
    // point the ellipsoid returned, but always covering the a-priori
    // multiplier caps so a poorly localized dual search cannot hide a root
    // (the pattern residuals are monotone, so a log-coarse scan still
    // brackets every crossing).
    let lam_hint = lam_f.max(1e-9);
    let (lam_lo, lam_hi) = (1e-12, (lam_hint * 1e4).max(2.0 * lam_cap).max(1.0));
    let mu_hint = mu_f.max(MU_MIN);
    let (mu_lo, mu_hi) = (1e-12, (mu_hint * 1e4).max(2.0 * mu_cap).max(1.0));

    // Interior-energy patterns first, ordered by how close each user's
    // stationarity manifold passes to the dual point found above. Pattern
    // candidates are exact on their faces (peak-pinned energies are stored
    // as the product `P_peak·τ`, silent users as literal zeros), so they are
    // preferred over the roundoff-laden complement recovery.
    let mut order: Vec<usize> = (0..k).collect();
    let key = |m: usize| -> f64 {
        match interior_energy_mu(lam_hint, alphas[m], weights[m]) {
            Some((mu_m, _)) => (mu_m - mu_f).abs(),
            None => f64::INFINITY,
        }
    };
    order.sort_by(|&a, &b| key(a).partial_cmp(&key(b)).unwrap_or(std::cmp::Ordering::Equal));
    for m in order {
        if rec.certified() {
            break;
        }
        rec.slot0_active_with_interior(m);
        if rec.certified() {
            break;
        }
        rec.slot0_inactive_with_interior(m, lam_lo, lam_hi);
    }
    if !rec.certified() {
        rec.slot0_active_faces_only(lam_lo, lam_hi);
    }
    if !rec.certified() {
        rec.slot0_inactive_faces_only(mu_lo, mu_hi);
    }
    if !rec.certified() {
        rec.consider(
            naive_tau0,
            naive_e0,
            it.tau[1..].to_vec(),
            it.energy[1..].to_vec(),
            SNAP_LOOSE,
            lam_f,
            mu_f,
        );
    }

    let gap = rec.gap();
    let g_best = rec.g_best;
    let Some(best) = rec.best else {
        return Err(FdError::Recovery {
            lambda: lam_f,
            mu: mu_f,
            tau0: naive_tau0,
            e0: naive_e0,
        });
    };
    Ok(FiniteCore {
        tau: best.tau,
        energy: best.energy,
        lambda: best.lambda,
        mu: best.mu,
        g_best,
        iterations: sol.iterations,
        converged: gap <= 1e-6f64.max(1e-6 * g_best.abs()),
        naive_tau0,
        naive_e0,
    })
}

/// Solves the `P_peak = ∞` limit in closed form up to one scalar bisection.
///
/// The downlink degenerates to a zero-duration impulse carrying the whole
/// budget (`τ_0 = 0`, `E_0 = P_avg`), users harvest the full `α_i·P_avg` and
/// spend no broadcast energy, and the remaining problem is the water-filling
/// split of the frame: `τ_i = α_i·P_avg/z_i(λ)` with
/// `z_i = f⁻¹(λ·ln2/ω_i)`, where `λ` is bisected so `Στ_i = 1` (durations
/// are renormalized to close the constraint exactly). Requires
/// `P_peak = ∞`; `iterations` counts residual evaluations.
pub fn solve_infinite_peak(
    params: &SystemParams,
    channels: &ChannelState,
) -> Result<SolverResult, FdError> {
    if params.has_finite_peak() {
        return Err(FdError::DualSearch(format!(
            "solve_infinite_peak requires P_peak = ∞, got P_peak = {}",
            params.p_peak()
        )));
    }
    let k = params.num_users();
    if channels.alpha().len() != k {
        return Err(FdError::Model(ModelError::DimensionMismatch {
            what: "channels",
            expected: k,
            got: channels.alpha().len(),
        }));
    }
    let p_avg = params.p_avg();
    let mut evals = 0usize;
    let mut residual = |lam: f64| -> f64 {
        evals += 1;
        let mut t = 0.0;
        for i in 0..k {
            let w = params.weights()[i];
            if w == 0.0 {
                continue; // zero-weight users get no slot
            }
            let z = scalar::f_inverse_capped(lam * LN_2 / w, 1e-13);
            // z = ∞ (λ far beyond range) contributes no time.
            if z.is_finite() && z > 0.0 {
                t += channels.alpha()[i] * p_avg / z;
            }
        }
        t - 1.0
    };
    // Bracket the unique root of the decreasing residual.
    let mut lo = 1.0;
    let mut f_lo = residual(lo);
    let mut halvings = 0;
    while f_lo < 0.0 {
        lo *= 0.5;
        f_lo = residual(lo);
        halvings += 1;
        if halvings > 1200 {
            return Err(FdError::DualSearch(format!(
                "time residual stayed negative down to λ = {lo}"
            )));
        }
    }
    let mut hi = lo.max(1.0);
    let mut doublings = 0;
    while residual(hi) >= 0.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > 1100 {
            return Err(FdError::DualSearch(format!(
                "time residual stayed positive up to λ = {hi}"
            )));
        }
    }
    let lam = bisect_fixed(&mut residual, lo, hi, f_lo);
    let bisect_residual = residual(lam).abs();

    let mut tau = vec![0.0; k + 1];
    for i in 0..k {
        let w = params.weights()[i];
        if w == 0.0 {
            continue;
        }
        let z = scalar::f_inverse_capped(lam * LN_2 / w, 1e-13);
        if z.is_finite() && z > 0.0 {
            tau[i + 1] = channels.alpha()[i] * p_avg / z;
        }
    }
    let total: f64 = tau.iter().sum();
    if !(total > 0.0) {
        return Err(FdError::DualSearch(format!(
            "no user takes positive time at λ = {lam}"
        )));
    }
    for t in &mut tau {
        *t /= total;
    }
    let mut energy = vec![0.0; k + 1];
    energy[0] = p_avg;

    let allocation = Allocation::from_energies(tau, energy)?;
    let report = model::validate_allocation(&allocation, params)?;
    let mut rates = Vec::with_capacity(k);
    for user in 1..=k {
        rates.push(model::rate_fd_nosi(user, &allocation, params, channels)?);
    }
    let wsr = model::weighted_sum_rate(&rates, params.weights())?;
    let mut residuals = BTreeMap::new();
    residuals.insert("sum_time", report.sum_time_slack);
    residuals.insert("sum_energy", report.sum_energy_slack);
    residuals.insert("peak_violation", report.peak_violation);
    residuals.insert("negativity", report.negativity);
    residuals.insert("bisect_residual", bisect_residual);
    Ok(SolverResult {
        allocation,
        rates,
        wsr,
        duals: DualValues {
            lambda: lam,
            mu: None,
        },
        iterations: evals,
        converged: true,
        residuals,
    })
}
