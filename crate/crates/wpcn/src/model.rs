//! System model: parameters, channel state, allocations, and achievable rates.
//!
//! A single hybrid access point (H-AP) powers `K` users over the downlink and
//! receives their uplink data in a TDMA frame of unit length. Slot `0` carries
//! downlink energy only; slot `i ∈ {1, …, K}` carries user `i`'s uplink data.
//! In full-duplex (FD) operation the H-AP keeps broadcasting energy during the
//! uplink slots, at the price of self-interference (SI) at its own receiver;
//! in half-duplex (HD) operation it broadcasts only during slot `0`.
//!
//! With per-slot broadcast powers `P_j` (energies `E_j = τ_j·P_j`), downlink
//! channel gain times uplink channel gain `H_i`, energy-conversion efficiency
//! `θ_i`, SNR gap `Γ`, noise power `σ²`, and residual-SI coefficient `γ`, the
//! FD achievable rate of user `i` is
//!
//! ```text
//! R_i = τ_i · log2(1 + θ_i·H_i/(Γ·(γ·P_i + σ²)) · (1/τ_i) · Σ_{j≠i} τ_j·P_j)
//! ```
//!
//! Two specializations appear throughout the solvers: with perfect SI
//! cancellation (`γ = 0`) and all broadcast energy spent (`ΣE = P_avg`), the
//! rate becomes `τ_i·log2(1 + α_i·(P_avg − E_i)/τ_i)` with
//! `α_i = θ_i·H_i/(Γ·σ²)`; with residual SI it becomes
//! `τ_i·log2(1 + C_i·(P_avg − τ_i·P_i)/τ_i)` with
//! `C_i = θ_i·H_i/(Γ·(γ·P_i + σ²))`. The HD rate is
//! `τ_i·log2(1 + α_i·τ_0·P/τ_i)` for downlink power `P`.
//!
//! Conventions: slot vectors have `K + 1` entries indexed by slot, user `i`
//! occupies slot `i` (so user indices are 1-based), and a slot with `τ_i = 0`
//! contributes zero rate.

use std::collections::BTreeMap;

use thiserror::Error;

/// Absolute tolerance used by argument checks that compare energies against
/// the average-power budget.
const BUDGET_TOL: f64 = 1e-6;

/// Errors raised by model construction and rate evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    /// A vector argument had the wrong length.
    #[error("{what}: expected length {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    /// A scalar parameter violated its constraint.
    #[error("{name} = {value} violates {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    /// A user index was outside `1..=K`.
    #[error("user index {user} outside 1..={num_users}")]
    UserIndex { user: usize, num_users: usize },
    /// An allocation argument violated a precondition of the requested rate.
    #[error("{0}")]
    InvalidAllocation(String),
}

/// Static problem parameters shared by every solver.
///
/// `p_peak` may be `f64::INFINITY` to model an unconstrained peak power; all
/// other fields are finite. Power quantities use linear units (mW throughout
/// the bundled experiment configs) and rates are in bit/s/Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    num_users: usize,
    p_avg: f64,
    p_peak: f64,
    sigma2: f64,
    gap: f64,
    theta: Vec<f64>,
    weights: Vec<f64>,
    si_gamma: f64,
}

impl SystemParams {
    /// Builds a parameter set, validating every invariant.
    ///
    /// Requires `p_avg > 0`, `p_peak ≥ p_avg` (infinity allowed), `σ² > 0`,
    /// `Γ ≥ 1`, `θ_i ∈ (0, 1]`, `ω_i ≥ 0` with at least one `ω_i > 0`,
    /// `γ ≥ 0`, and `theta.len() == weights.len() ≥ 1`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        p_avg: f64,
        p_peak: f64,
        sigma2: f64,
        gap: f64,
        theta: Vec<f64>,
        weights: Vec<f64>,
        si_gamma: f64,
    ) -> Result<Self, ModelError> {
        let num_users = theta.len();
        if num_users == 0 {
            return Err(ModelError::InvalidParameter {
                name: "num_users",
                value: 0.0,
                constraint: "K >= 1",
            });
        }
        if weights.len() != num_users {
            return Err(ModelError::DimensionMismatch {
                what: "weights",
                expected: num_users,
                got: weights.len(),
            });
        }
        if !(p_avg.is_finite() && p_avg > 0.0) {
            return Err(ModelError::InvalidParameter {
                name: "p_avg",
                value: p_avg,
                constraint: "finite and > 0",
            });
        }
        if !(p_peak >= p_avg) {
            return Err(ModelError::InvalidParameter {
                name: "p_peak",
                value: p_peak,
                constraint: ">= p_avg",
            });
        }
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(ModelError::InvalidParameter {
                name: "sigma2",
                value: sigma2,
                constraint: "finite and > 0",
            });
        }
        if !(gap.is_finite() && gap >= 1.0) {
            return Err(ModelError::InvalidParameter {
                name: "gap",
                value: gap,
                constraint: "finite and >= 1",
            });
        }
        if !(si_gamma.is_finite() && si_gamma >= 0.0) {
            return Err(ModelError::InvalidParameter {
                name: "si_gamma",
                value: si_gamma,
                constraint: "finite and >= 0",
            });
        }
        for &t in &theta {
            if !(t.is_finite() && t > 0.0 && t <= 1.0) {
                return Err(ModelError::InvalidParameter {
                    name: "theta",
                    value: t,
                    constraint: "in (0, 1]",
                });
            }
        }
        let mut any_positive = false;
        for &w in &weights {
            if !(w.is_finite() && w >= 0.0) {
                return Err(ModelError::InvalidParameter {
                    name: "weights",
                    value: w,
                    constraint: "finite and >= 0",
                });
            }
            any_positive |= w > 0.0;
        }
        if !any_positive {
            return Err(ModelError::InvalidParameter {
                name: "weights",
                value: 0.0,
                constraint: "at least one weight > 0",
            });
        }
        Ok(Self {
            num_users,
            p_avg,
            p_peak,
            sigma2,
            gap,
            theta,
            weights,
            si_gamma,
        })
    }

    /// Number of users `K`.
    pub fn num_users(&self) -> usize {
        self.num_users
    }

    /// Average-power budget `P_avg` of the H-AP.
    pub fn p_avg(&self) -> f64 {
        self.p_avg
    }

    /// Peak broadcast power `P_peak` (may be `f64::INFINITY`).
    pub fn p_peak(&self) -> f64 {
        self.p_peak
    }

    /// True when `P_peak` is finite.
    pub fn has_finite_peak(&self) -> bool {
        self.p_peak.is_finite()
    }

    /// Receiver noise power `σ²`.
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// SNR gap `Γ ≥ 1` of the uplink modulation.
    pub fn gap(&self) -> f64 {
        self.gap
    }

    /// Per-user energy-harvesting efficiencies `θ_i`.
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Per-user rate weights `ω_i`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Residual self-interference coefficient `γ` (0 = perfect cancellation).
    pub fn si_gamma(&self) -> f64 {
        self.si_gamma
    }

    /// Returns a copy with different rate weights (used by rate-region sweeps).
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self, ModelError> {
        Self::new(
            self.p_avg,
            self.p_peak,
            self.sigma2,
            self.gap,
            self.theta.clone(),
            weights,
            self.si_gamma,
        )
    }

    /// Returns a copy with a different SI coefficient.
    pub fn with_si_gamma(&self, si_gamma: f64) -> Result<Self, ModelError> {
        Self::new(
            self.p_avg,
            self.p_peak,
            self.sigma2,
            self.gap,
            self.theta.clone(),
            self.weights.clone(),
            si_gamma,
        )
    }
}

/// Residual self-interference coefficient `γ = φ·(ε + β)`.
///
/// `φ` is the SI attenuation of the cancellation stage, and `ε`, `β` are the
/// amplitude-estimation and phase-noise leakage coefficients; all three are
/// linear (not dB) and must be non-negative and finite.
pub fn effective_si(phi: f64, eps: f64, beta: f64) -> Result<f64, ModelError> {
    for (name, v) in [("phi", phi), ("eps", eps), ("beta", beta)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(ModelError::InvalidParameter {
                name,
                value: v,
                constraint: "finite and >= 0",
            });
        }
    }
    Ok(phi * (eps + beta))
}

/// One realization of the downlink·uplink channel products `H_i > 0`, plus the
/// derived coefficients `α_i = θ_i·H_i/(Γ·σ²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    h: Vec<f64>,
    alpha: Vec<f64>,
}

impl ChannelState {
    /// Builds a channel state for `params`, requiring one strictly positive,
    /// finite gain product per user.
    pub fn new(h: Vec<f64>, params: &SystemParams) -> Result<Self, ModelError> {
        if h.len() != params.num_users() {
            return Err(ModelError::DimensionMismatch {
                what: "h",
                expected: params.num_users(),
                got: h.len(),
            });
        }
        for &g in &h {
            if !(g.is_finite() && g > 0.0) {
                return Err(ModelError::InvalidParameter {
                    name: "h",
                    value: g,
                    constraint: "finite and > 0",
                });
            }
        }
        let alpha = h
            .iter()
            .zip(params.theta())
            .map(|(&g, &t)| t * g / (params.gap() * params.sigma2()))
            .collect();
        Ok(Self { h, alpha })
    }

    /// Channel gain products `H_i`, indexed by user (0-based storage).
    pub fn h(&self) -> &[f64] {
        &self.h
    }

    /// Effective uplink coefficients `α_i = θ_i·H_i/(Γ·σ²)`.
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// `α_i` for 1-based user index `i`.
    pub fn alpha_of(&self, user: usize) -> f64 {
        self.alpha[user - 1]
    }
}

/// Which per-slot quantity an [`Allocation`] stores besides the durations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AllocationForm {
    /// Per-slot broadcast energies `E_i`.
    Energy,
    /// Per-slot broadcast powers `P_i`.
    Power,
}

/// A frame allocation: slot durations `τ_0..τ_K` plus per-slot broadcast
/// energies or powers, whichever representation the producing solver treats
/// as authoritative.
///
/// The conversion `P_i = E_i/τ_i` uses the convention `P_i = 0` when
/// `τ_i = 0` and `E_i = 0`; an energy-form slot with `τ_i = 0` but `E_i > 0`
/// (a zero-duration energy impulse, which arises in the unconstrained-peak
/// limit) converts to `P_i = +∞`.
///
/// Constructors only enforce structural validity (matching lengths, finite
/// non-negative entries); feasibility against a [`SystemParams`] is reported
/// by [`validate_allocation`] so that near-feasible grid points can be
/// examined rather than rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    tau: Vec<f64>,
    amount: Vec<f64>,
    form: AllocationForm,
}

impl Allocation {
    fn validate_parts(tau: &[f64], amount: &[f64], what: &'static str) -> Result<(), ModelError> {
        if tau.len() < 2 {
            return Err(ModelError::DimensionMismatch {
                what: "tau",
                expected: 2,
                got: tau.len(),
            });
        }
        if amount.len() != tau.len() {
            return Err(ModelError::DimensionMismatch {
                what,
                expected: tau.len(),
                got: amount.len(),
            });
        }
        for &t in tau {
            if !(t.is_finite() && t >= 0.0) {
                return Err(ModelError::InvalidParameter {
                    name: "tau",
                    value: t,
                    constraint: "finite and >= 0",
                });
            }
        }
        Ok(())
    }

    /// Builds an energy-form allocation (`K + 1` slots).
    pub fn from_energies(tau: Vec<f64>, energy: Vec<f64>) -> Result<Self, ModelError> {
        Self::validate_parts(&tau, &energy, "energy")?;
        for &e in &energy {
            if !(e.is_finite() && e >= 0.0) {
                return Err(ModelError::InvalidParameter {
                    name: "energy",
                    value: e,
                    constraint: "finite and >= 0",
                });
            }
        }
        Ok(Self {
            tau,
            amount: energy,
            form: AllocationForm::Energy,
        })
    }

    /// Builds a power-form allocation (`K + 1` slots).
    pub fn from_powers(tau: Vec<f64>, power: Vec<f64>) -> Result<Self, ModelError> {
        Self::validate_parts(&tau, &power, "power")?;
        for &p in &power {
            if !(p.is_finite() && p >= 0.0) {
                return Err(ModelError::InvalidParameter {
                    name: "power",
                    value: p,
                    constraint: "finite and >= 0",
                });
            }
        }
        Ok(Self {
            tau,
            amount: power,
            form: AllocationForm::Power,
        })
    }

    /// Which representation is authoritative.
    pub fn form(&self) -> AllocationForm {
        self.form
    }

    /// Number of slots (`K + 1`).
    pub fn num_slots(&self) -> usize {
        self.tau.len()
    }

    /// Slot durations.
    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    /// Broadcast energy of slot `i`.
    pub fn energy(&self, slot: usize) -> f64 {
        match self.form {
            AllocationForm::Energy => self.amount[slot],
            AllocationForm::Power => self.amount[slot] * self.tau[slot],
        }
    }

    /// Broadcast power of slot `i` (see the type docs for the `τ_i = 0`
    /// convention).
    pub fn power(&self, slot: usize) -> f64 {
        match self.form {
            AllocationForm::Power => self.amount[slot],
            AllocationForm::Energy => {
                let (t, e) = (self.tau[slot], self.amount[slot]);
                if e == 0.0 {
                    0.0
                } else if t == 0.0 {
                    f64::INFINITY
                } else {
                    e / t
                }
            }
        }
    }

    /// All per-slot energies.
    pub fn energies(&self) -> Vec<f64> {
        (0..self.num_slots()).map(|i| self.energy(i)).collect()
    }

    /// All per-slot powers.
    pub fn powers(&self) -> Vec<f64> {
        (0..self.num_slots()).map(|i| self.power(i)).collect()
    }

    /// Total broadcast energy `ΣE_i`.
    pub fn total_energy(&self) -> f64 {
        (0..self.num_slots()).map(|i| self.energy(i)).sum()
    }
}

/// Constraint residuals of an allocation against a parameter set, as reported
/// by [`validate_allocation`]. All entries are `≥ 0`; an exactly feasible
/// allocation reports zeros.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityReport {
    /// `max(0, Στ − 1)`.
    pub sum_time_slack: f64,
    /// `max(0, ΣE − p_avg)`.
    pub sum_energy_slack: f64,
    /// `max_i max(0, E_i − p_peak·τ_i)` (zero when `p_peak = ∞`).
    pub peak_violation: f64,
    /// Largest negative entry magnitude across `τ` and `E` (zero for
    /// structurally valid allocations).
    pub negativity: f64,
}

impl FeasibilityReport {
    /// True when every residual is at most `tol`.
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.sum_time_slack <= tol
            && self.sum_energy_slack <= tol
            && self.peak_violation <= tol
            && self.negativity <= tol
    }

    /// Largest residual.
    pub fn max_residual(&self) -> f64 {
        self.sum_time_slack
            .max(self.sum_energy_slack)
            .max(self.peak_violation)
            .max(self.negativity)
    }
}

/// Computes the constraint residuals of `alloc` under `params`.
///
/// Infeasible allocations are not rejected; every violation is reported as a
/// non-negative residual so callers (oracles in particular) can inspect
/// near-feasible points.
pub fn validate_allocation(
    alloc: &Allocation,
    params: &SystemParams,
) -> Result<FeasibilityReport, ModelError> {
    if alloc.num_slots() != params.num_users() + 1 {
        return Err(ModelError::DimensionMismatch {
            what: "allocation slots",
            expected: params.num_users() + 1,
            got: alloc.num_slots(),
        });
    }
    let sum_tau: f64 = alloc.tau().iter().sum();
    let sum_energy = alloc.total_energy();
    let mut peak_violation: f64 = 0.0;
    let mut negativity: f64 = 0.0;
    for i in 0..alloc.num_slots() {
        let (t, e) = (alloc.tau[i], alloc.energy(i));
        negativity = negativity.max(-t.min(0.0)).max(-e.min(0.0));
        if params.has_finite_peak() {
            peak_violation = peak_violation.max(e - params.p_peak() * t);
        }
    }
    Ok(FeasibilityReport {
        sum_time_slack: (sum_tau - 1.0).max(0.0),
        sum_energy_slack: (sum_energy - params.p_avg()).max(0.0),
        peak_violation: peak_violation.max(0.0),
        negativity,
    })
}

fn check_user(user: usize, params: &SystemParams) -> Result<(), ModelError> {
    if user == 0 || user > params.num_users() {
        return Err(ModelError::UserIndex {
            user,
            num_users: params.num_users(),
        });
    }
    Ok(())
}

/// Full-duplex achievable rate of user `i` under residual SI.
///
/// `R_i = τ_i·log2(1 + θ_i·H_i/(Γ·(γ·P_i + σ²)) · (1/τ_i)·Σ_{j≠i} τ_j·P_j)`,
/// with `R_i = 0` when `τ_i = 0`. The harvested term `Σ_{j≠i} τ_j·P_j` is
/// evaluated from slot energies, so energy-form allocations with a
/// zero-duration impulse slot are handled exactly.
pub fn rate_fd(
    user: usize,
    alloc: &Allocation,
    params: &SystemParams,
    channels: &ChannelState,
) -> Result<f64, ModelError> {
    check_user(user, params)?;
    if alloc.num_slots() != params.num_users() + 1 {
        return Err(ModelError::DimensionMismatch {
            what: "allocation slots",
            expected: params.num_users() + 1,
            got: alloc.num_slots(),
        });
    }
    let tau_i = alloc.tau()[user];
    if tau_i == 0.0 {
        return Ok(0.0);
    }
    let p_i = alloc.power(user);
    if !p_i.is_finite() {
        return Err(ModelError::InvalidAllocation(format!(
            "slot {user} has positive energy in zero duration; own power undefined"
        )));
    }
    let harvested: f64 = (0..alloc.num_slots())
        .filter(|&j| j != user)
        .map(|j| alloc.energy(j))
        .sum();
    let h = channels.h()[user - 1];
    let theta = params.theta()[user - 1];
    let denom = params.gap() * (params.si_gamma() * p_i + params.sigma2());
    let snr = theta * h / denom * harvested / tau_i;
    Ok(tau_i * (1.0 + snr).log2())
}

/// Per-user summand of the perfect-SI-cancellation rate, without the budget
/// preconditions of [`rate_fd_nosi`]. Used by the dual solvers, whose inner
/// maximizers legitimately evaluate points with `ΣE ≠ p_avg` (and even
/// `E_i > p_avg`, where the log argument drops below one).
pub(crate) fn rate_fd_nosi_term(tau_i: f64, e_i: f64, alpha_i: f64, p_avg: f64) -> f64 {
    if tau_i == 0.0 {
        return 0.0;
    }
    tau_i * (1.0 + alpha_i * (p_avg - e_i) / tau_i).log2()
}

/// Full-duplex rate of user `i` with perfect SI cancellation and the whole
/// budget spent (`ΣE = p_avg`): `R_i = τ_i·log2(1 + α_i·(p_avg − E_i)/τ_i)`.
///
/// Requires an allocation whose energies sum to `p_avg` (within an absolute
/// `1e-6·max(1, p_avg)` tolerance) with `E_i ≤ p_avg` plus tolerance;
/// `R_i = 0` when `τ_i = 0`.
pub fn rate_fd_nosi(
    user: usize,
    alloc: &Allocation,
    params: &SystemParams,
    channels: &ChannelState,
) -> Result<f64, ModelError> {
    check_user(user, params)?;
    if alloc.num_slots() != params.num_users() + 1 {
        return Err(ModelError::DimensionMismatch {
            what: "allocation slots",
            expected: params.num_users() + 1,
            got: alloc.num_slots(),
        });
    }
    let tol = BUDGET_TOL * params.p_avg().max(1.0);
    let total = alloc.total_energy();
    if (total - params.p_avg()).abs() > tol {
        return Err(ModelError::InvalidAllocation(format!(
            "total energy {total} differs from p_avg {} by more than {tol}",
            params.p_avg()
        )));
    }
    let e_i = alloc.energy(user);
    if e_i > params.p_avg() + tol {
        return Err(ModelError::InvalidAllocation(format!(
            "slot {user} energy {e_i} exceeds p_avg {}",
            params.p_avg()
        )));
    }
    Ok(rate_fd_nosi_term(
        alloc.tau()[user],
        e_i.min(params.p_avg()),
        channels.alpha_of(user),
        params.p_avg(),
    ))
}

/// Full-duplex rate of user `i` under residual SI with uniform-power slots:
/// `R_i = τ_i·log2(1 + C_i·(p_avg − τ_i·P_i)/τ_i)` where
/// `C_i = θ_i·H_i/(Γ·(γ·P_i + σ²))`.
///
/// Requires `τ_i ≥ 0`, `P_i ≥ 0`, and `τ_i·P_i ≤ p_avg` plus tolerance (the
/// own-slot energy cannot exceed the whole budget); `R_i = 0` when `τ_i = 0`.
pub fn rate_fd_si(
    user: usize,
    tau_i: f64,
    p_i: f64,
    params: &SystemParams,
    channels: &ChannelState,
) -> Result<f64, ModelError> {
    check_user(user, params)?;
    for (name, v) in [("tau_i", tau_i), ("p_i", p_i)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(ModelError::InvalidParameter {
                name,
                value: v,
                constraint: "finite and >= 0",
            });
        }
    }
    let tol = BUDGET_TOL * params.p_avg().max(1.0);
    if tau_i * p_i > params.p_avg() + tol {
        return Err(ModelError::InvalidAllocation(format!(
            "own-slot energy {} exceeds p_avg {}",
            tau_i * p_i,
            params.p_avg()
        )));
    }
    if tau_i == 0.0 {
        return Ok(0.0);
    }
    let c = params.theta()[user - 1] * channels.h()[user - 1]
        / (params.gap() * (params.si_gamma() * p_i + params.sigma2()));
    let residual = (params.p_avg() - tau_i * p_i).max(0.0);
    Ok(tau_i * (1.0 + c * residual / tau_i).log2())
}

/// Half-duplex rate of user `i`: `R_i = τ_i·log2(1 + α_i·τ_0·p/τ_i)` where
/// `p` is the downlink broadcast power used during slot `0`.
///
/// `tau` is the full `K + 1` slot-duration vector; `R_i = 0` when `τ_i = 0`.
pub fn rate_hd(
    user: usize,
    tau: &[f64],
    p: f64,
    params: &SystemParams,
    channels: &ChannelState,
) -> Result<f64, ModelError> {
    check_user(user, params)?;
    if tau.len() != params.num_users() + 1 {
        return Err(ModelError::DimensionMismatch {
            what: "tau",
            expected: params.num_users() + 1,
            got: tau.len(),
        });
    }
    if !(p.is_finite() && p >= 0.0) {
        return Err(ModelError::InvalidParameter {
            name: "p",
            value: p,
            constraint: "finite and >= 0",
        });
    }
    let tau_i = tau[user];
    if tau_i == 0.0 {
        return Ok(0.0);
    }
    let snr = channels.alpha_of(user) * tau[0] * p / tau_i;
    Ok(tau_i * (1.0 + snr).log2())
}

/// Weighted sum `Σ ω_i·r_i` over users.
pub fn weighted_sum_rate(rates: &[f64], weights: &[f64]) -> Result<f64, ModelError> {
    if rates.len() != weights.len() {
        return Err(ModelError::DimensionMismatch {
            what: "rates",
            expected: weights.len(),
            got: rates.len(),
        });
    }
    Ok(rates.iter().zip(weights).map(|(r, w)| r * w).sum())
}

/// Dual variables reported by a solver: `λ` for the sum-time constraint and,
/// where the algorithm maintains one, `μ` for the energy/average-power
/// constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualValues {
    pub lambda: f64,
    pub mu: Option<f64>,
}

/// Outcome of one solver run: the allocation, per-user rates, the weighted
/// sum-rate objective, final dual variables, iteration count, a convergence
/// flag, and named diagnostic residuals.
#[derive(Debug, Clone)]
pub struct SolverResult {
    pub allocation: Allocation,
    pub rates: Vec<f64>,
    pub wsr: f64,
    pub duals: DualValues,
    pub iterations: usize,
    pub converged: bool,
    pub residuals: BTreeMap<&'static str, f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params_k2() -> SystemParams {
        SystemParams::new(
            100.0,
            200.0,
            1.0,
            1.0,
            vec![1.0, 1.0],
            vec![1.0, 1.0],
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn params_reject_bad_inputs() {
        assert!(SystemParams::new(0.0, 1.0, 1.0, 1.0, vec![1.0], vec![1.0], 0.0).is_err());
        assert!(SystemParams::new(2.0, 1.0, 1.0, 1.0, vec![1.0], vec![1.0], 0.0).is_err());
        assert!(SystemParams::new(1.0, 2.0, 0.0, 1.0, vec![1.0], vec![1.0], 0.0).is_err());
        assert!(SystemParams::new(1.0, 2.0, 1.0, 0.5, vec![1.0], vec![1.0], 0.0).is_err());
        assert!(SystemParams::new(1.0, 2.0, 1.0, 1.0, vec![1.5], vec![1.0], 0.0).is_err());
        assert!(SystemParams::new(1.0, 2.0, 1.0, 1.0, vec![1.0], vec![0.0], 0.0).is_err());
        assert!(SystemParams::new(1.0, 2.0, 1.0, 1.0, vec![1.0], vec![1.0, 1.0], 0.0).is_err());
        assert!(SystemParams::new(1.0, f64::INFINITY, 1.0, 1.0, vec![1.0], vec![1.0], 0.0).is_ok());
    }

    #[test]
    fn effective_si_matches_product_form() {
        // φ = ε = β = 1e-6 (−60 dB each) → γ = 1e-6·2e-6 = 2e-12.
        let g = effective_si(1e-6, 1e-6, 1e-6).unwrap();
        assert!((g - 2e-12).abs() < 1e-24);
        assert!(effective_si(-1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn alpha_includes_theta_gap_and_noise() {
        let params =
            SystemParams::new(1.0, 2.0, 0.5, 2.0, vec![0.5, 1.0], vec![1.0, 1.0], 0.0).unwrap();
        let ch = ChannelState::new(vec![3.0, 4.0], &params).unwrap();
        // α_i = θ_i·H_i/(Γ·σ²) = θ_i·H_i.
        assert!((ch.alpha()[0] - 1.5).abs() < 1e-15);
        assert!((ch.alpha()[1] - 4.0).abs() < 1e-15);
    }

    #[test]
    fn allocation_conversions_follow_zero_slot_convention() {
        let a = Allocation::from_energies(vec![0.0, 0.5, 0.5], vec![0.0, 10.0, 0.0]).unwrap();
        assert_eq!(a.power(0), 0.0);
        assert!((a.power(1) - 20.0).abs() < 1e-15);
        assert_eq!(a.power(2), 0.0);

        // Zero-duration impulse slot: energy kept, power reported as +∞.
        let b = Allocation::from_energies(vec![0.0, 1.0], vec![7.0, 0.0]).unwrap();
        assert!(b.power(0).is_infinite());
        assert!((b.total_energy() - 7.0).abs() < 1e-15);

        let c = Allocation::from_powers(vec![0.25, 0.75], vec![8.0, 4.0]).unwrap();
        assert!((c.energy(0) - 2.0).abs() < 1e-15);
        assert!((c.energy(1) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn validate_reports_residuals_without_failing() {
        let params = params_k2();
        // Στ = 1.1 → slack 0.1; E_1 = 250 > p_peak·τ_1 = 100 → peak violation 150.
        let alloc =
            Allocation::from_energies(vec![0.1, 0.5, 0.5], vec![0.0, 250.0, 0.0]).unwrap();
        let rep = validate_allocation(&alloc, &params).unwrap();
        assert!((rep.sum_time_slack - 0.1).abs() < 1e-12);
        assert!((rep.sum_energy_slack - 150.0).abs() < 1e-12);
        assert!((rep.peak_violation - 150.0).abs() < 1e-12);
        assert_eq!(rep.negativity, 0.0);
        assert!(!rep.is_feasible(1e-9));

        let feasible =
            Allocation::from_energies(vec![0.0, 0.5, 0.5], vec![0.0, 50.0, 50.0]).unwrap();
        assert!(validate_allocation(&feasible, &params)
            .unwrap()
            .is_feasible(0.0));
    }

    #[test]
    fn validate_ignores_peak_when_infinite() {
        let params =
            SystemParams::new(1.0, f64::INFINITY, 1.0, 1.0, vec![1.0], vec![1.0], 0.0).unwrap();
        let alloc = Allocation::from_energies(vec![0.0, 1.0], vec![1.0, 0.0]).unwrap();
        let rep = validate_allocation(&alloc, &params).unwrap();
        assert_eq!(rep.peak_violation, 0.0);
        assert_eq!(rep.sum_energy_slack, 0.0);
    }

    #[test]
    fn rate_fd_matches_hand_computation() {
        // K = 2, τ = (0, 0.5, 0.5), P = (0, 10, 10), θH = 1, Γ = 1, σ² = 1.
        let params = params_k2();
        let ch = ChannelState::new(vec![1.0, 1.0], &params).unwrap();
        let alloc = Allocation::from_powers(vec![0.0, 0.5, 0.5], vec![0.0, 10.0, 10.0]).unwrap();
        // γ = 0: SINR = (1/0.5)·(0.5·10) = 10 → R = 0.5·log2(11).
        let r = rate_fd(1, &alloc, &params, &ch).unwrap();
        assert!((r - 0.5 * 11f64.log2()).abs() < 1e-12);
        // γ = 0.1: θH/(Γ·(γ·10 + 1)) = 1/2 → R = 0.5·log2(1 + 5/0.5·0.5).
        let params_si = params.with_si_gamma(0.1).unwrap();
        let r = rate_fd(1, &alloc, &params_si, &ch).unwrap();
        assert!((r - 0.5 * 6f64.log2()).abs() < 1e-12);
        // τ_i = 0 → 0.
        let alloc0 = Allocation::from_powers(vec![0.5, 0.0, 0.5], vec![10.0, 0.0, 10.0]).unwrap();
        assert_eq!(rate_fd(1, &alloc0, &params, &ch).unwrap(), 0.0);
    }

    #[test]
    fn rate_fd_nosi_matches_hand_computation() {
        // α_1 = 0.5: use θ = 0.5, H = 1, Γ = 1, σ² = 1; p_avg = 10.
        let params =
            SystemParams::new(10.0, 20.0, 1.0, 1.0, vec![0.5, 0.5], vec![1.0, 1.0], 0.0).unwrap();
        let ch = ChannelState::new(vec![1.0, 1.0], &params).unwrap();
        // τ_1 = 0.5, E_1 = 2, rest of the budget elsewhere → 0.5·log2(1 + 0.5·8/0.5).
        let alloc = Allocation::from_energies(vec![0.0, 0.5, 0.5], vec![0.0, 2.0, 8.0]).unwrap();
        let r = rate_fd_nosi(1, &alloc, &params, &ch).unwrap();
        assert!((r - 0.5 * 9f64.log2()).abs() < 1e-12);

        // Budget not exhausted → argument error.
        let bad = Allocation::from_energies(vec![0.0, 0.5, 0.5], vec![0.0, 2.0, 0.0]).unwrap();
        assert!(rate_fd_nosi(1, &bad, &params, &ch).is_err());
    }

    #[test]
    fn rate_fd_si_matches_hand_computation() {
        // θH = 1, Γ = 1, σ² = 1, γ = 0.01, τ = 0.5, P = 10, p_avg = 100:
        // C = 1/1.1, R = 0.5·log2(1 + (95/0.5)/1.1).
        let params =
            SystemParams::new(100.0, 200.0, 1.0, 1.0, vec![1.0], vec![1.0], 0.01).unwrap();
        let ch = ChannelState::new(vec![1.0], &params).unwrap();
        let r = rate_fd_si(1, 0.5, 10.0, &params, &ch).unwrap();
        let expect = 0.5 * (1.0f64 + (100.0 - 5.0) / 0.5 / 1.1).log2();
        assert!((r - expect).abs() < 1e-12);
        assert_eq!(rate_fd_si(1, 0.0, 10.0, &params, &ch).unwrap(), 0.0);
        // Own-slot energy above the whole budget is rejected.
        assert!(rate_fd_si(1, 0.9, 200.0, &params, &ch).is_err());
    }

    #[test]
    fn rate_hd_matches_hand_computation() {
        // α = 2: θ = 1, H = 2, Γ = 1, σ² = 1; τ_0 = 0.2, τ_1 = 0.4, p = 50.
        let params =
            SystemParams::new(10.0, 50.0, 1.0, 1.0, vec![1.0], vec![1.0], 0.0).unwrap();
        let ch = ChannelState::new(vec![2.0], &params).unwrap();
        let r = rate_hd(1, &[0.2, 0.4], 50.0, &params, &ch).unwrap();
        assert!((r - 0.4 * 51f64.log2()).abs() < 1e-12);
        assert_eq!(rate_hd(1, &[0.2, 0.0], 50.0, &params, &ch).unwrap(), 0.0);
    }

    #[test]
    fn weighted_sum_rate_checks_lengths() {
        assert!((weighted_sum_rate(&[1.0, 2.0], &[2.0, 1.0]).unwrap() - 4.0).abs() < 1e-15);
        assert!(weighted_sum_rate(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn user_index_bounds_are_enforced() {
        let params = params_k2();
        let ch = ChannelState::new(vec![1.0, 1.0], &params).unwrap();
        let alloc = Allocation::from_powers(vec![0.0, 0.5, 0.5], vec![0.0, 10.0, 10.0]).unwrap();
        assert!(rate_fd(0, &alloc, &params, &ch).is_err());
        assert!(rate_fd(3, &alloc, &params, &ch).is_err());
    }
}
