//! Brute-force grid maximizers used as independent ground truth in tests.
//!
//! Deliberately simple and slow: exhaustively scan a uniform grid over the
//! feasible box, then make one 10×-resolution zoom around the incumbent cell.
//! Every evaluated point is feasible, so a grid value is always a **lower
//! bound** on the true optimum — a certified solver may beat it, never trail
//! it by more than floating-point noise, and approaches it as the grid-gap
//! bound (WSR Lipschitz constant × spacing) shrinks.
//!
//! Ties between equal-valued cells resolve to the lexicographically smallest
//! grid index, so results are deterministic even under data-parallel scans.

use rayon::prelude::*;
use thiserror::Error;

use crate::model::{self, ChannelState, ModelError, SystemParams};

/// Number of fine steps per coarse cell in the refinement zoom.
const ZOOM: i64 = 10;

/// Feasibility slack for grid cells whose derived quantities carry round-off.
const GRID_EPS_SCALE: f64 = 1e-9;

/// Best grid cell found, in allocation form: `tau` and per-slot downlink
/// energies, both of length `K + 1`.
#[derive(Debug, Clone)]
pub struct GridPoint {
    pub tau: Vec<f64>,
    pub energy: Vec<f64>,
}

/// Errors from the grid oracles.
#[derive(Debug, Error)]
pub enum OracleError {
    /// Invalid model inputs.
    #[error(transparent)]
    Model(#[from] ModelError),
    /// The op's exhaustive scan is only tractable for a specific user count.
    #[error("{op} supports {expected} users, got {got}")]
    UnsupportedUserCount {
        op: &'static str,
        expected: &'static str,
        got: usize,
    },
    /// Below the minimum resolution the grid-gap bound is meaningless.
    #[error("grid resolution n = {n} is below the minimum of 10")]
    ResolutionTooCoarse { n: usize },
}

fn check_dims(params: &SystemParams, channels: &ChannelState) -> Result<(), OracleError> {
    if channels.alpha().len() != params.num_users() {
        return Err(OracleError::Model(ModelError::DimensionMismatch {
            what: "channels",
            expected: params.num_users(),
            got: channels.alpha().len(),
        }));
    }
    Ok(())
}

/// Two-user full-duplex grid in normalized coordinates: slot times
/// `(t_1, t_2)` on the simplex and energies as fractions `(u_1, u_2)` of each
/// user's cap `min(p_peak·τ_i, p_avg)`; slot 0 takes the remaining time and
/// the remaining budget.
struct FdGrid {
    p_avg: f64,
    p_peak: f64,
    alpha: [f64; 2],
    weights: [f64; 2],
    eps: f64,
}

impl FdGrid {
    fn user_cap(&self, tau_i: f64) -> f64 {
        if self.p_peak.is_finite() {
            (self.p_peak * tau_i).min(self.p_avg)
        } else {
            self.p_avg
        }
    }

    /// Weighted sum rate of the cell, or `None` when the implied slot-0
    /// energy falls outside `[0, p_peak·τ_0]`.
    fn wsr(&self, t: [f64; 2], u: [f64; 2]) -> Option<f64> {
        let tau0 = (1.0 - t[0] - t[1]).max(0.0);
        let e1 = u[0] * self.user_cap(t[0]);
        let e2 = u[1] * self.user_cap(t[1]);
        let e0 = self.p_avg - e1 - e2;
        if e0 < -self.eps {
            return None;
        }
        if self.p_peak.is_finite() && e0 > self.p_peak * tau0 + self.eps {
            return None;
        }
        let r1 = model::rate_fd_nosi_term(t[0], e1, self.alpha[0], self.p_avg);
        let r2 = model::rate_fd_nosi_term(t[1], e2, self.alpha[1], self.p_avg);
        Some(self.weights[0] * r1 + self.weights[1] * r2)
    }

    fn point(&self, t: [f64; 2], u: [f64; 2]) -> GridPoint {
        let tau0 = (1.0 - t[0] - t[1]).max(0.0);
        let e1 = u[0] * self.user_cap(t[0]);
        let e2 = u[1] * self.user_cap(t[1]);
        let e0 = (self.p_avg - e1 - e2).max(0.0);
        GridPoint {
            tau: vec![tau0, t[0], t[1]],
            energy: vec![e0, e1, e2],
        }
    }
}

/// Exhaustive grid maximization of the perfect-SI-cancellation weighted sum
/// rate for `K = 2`.
///
/// Scans `(τ_1, τ_2)` on the `n`-step simplex grid and, per time cell, the
/// energies `(E_1, E_2)` on `n`-step grids over `[0, min(p_peak·τ_i, p_avg)]`;
/// the charging slot takes `τ_0 = 1 − τ_1 − τ_2` and `E_0 = p_avg − E_1 − E_2`,
/// and cells with `E_0 ∉ [0, p_peak·τ_0]` are discarded. One 10× zoom around
/// the incumbent refines the result. Returns the best weighted sum rate and
/// the cell achieving it.
pub fn grid_fd_nosi(
    params: &SystemParams,
    channels: &ChannelState,
    n: usize,
) -> Result<(f64, GridPoint), OracleError> {
    if params.num_users() != 2 {
        return Err(OracleError::UnsupportedUserCount {
            op: "grid_fd_nosi",
            expected: "exactly 2",
            got: params.num_users(),
        });
    }
    if n < 10 {
        return Err(OracleError::ResolutionTooCoarse { n });
    }
    check_dims(params, channels)?;
    let grid = FdGrid {
        p_avg: params.p_avg(),
        p_peak: params.p_peak(),
        alpha: [channels.alpha()[0], channels.alpha()[1]],
        weights: [params.weights()[0], params.weights()[1]],
        eps: GRID_EPS_SCALE * params.p_avg().max(1.0),
    };
    let m = n as i64;
    let coords = |idx: [i64; 4], den: i64| -> ([f64; 2], [f64; 2]) {
        let f = |j: i64| j as f64 / den as f64;
        ([f(idx[0]), f(idx[1])], [f(idx[2]), f(idx[3])])
    };

    // Base pass, parallel over the leading time index. Each block scans in
    // lexicographic order and replaces only on strict improvement, so the
    // per-block winner is the block's lexicographically smallest maximizer;
    // the reduction keeps that property globally.
    let base = (0..=m)
        .into_par_iter()
        .map(|i1| {
            let mut local: Option<(f64, [i64; 4])> = None;
            for i2 in 0..=(m - i1) {
                for k1 in 0..=m {
                    for k2 in 0..=m {
                        let idx = [i1, i2, k1, k2];
                        let (t, u) = coords(idx, m);
                        if let Some(w) = grid.wsr(t, u) {
                            if local.map_or(true, |(bw, _)| w > bw) {
                                local = Some((w, idx));
                            }
                        }
                    }
                }
            }
            local
        })
        .reduce(
            || None,
            |a, b| match (a, b) {
                (None, x) | (x, None) => x,
                (Some((wa, ia)), Some((wb, ib))) => {
                    if wa > wb || (wa == wb && ia <= ib) {
                        Some((wa, ia))
                    } else {
                        Some((wb, ib))
                    }
                }
            },
        );
    let (mut best_w, base_idx) = base.ok_or_else(|| {
        OracleError::Model(ModelError::InvalidAllocation(
            "no feasible grid cell".into(),
        ))
    })?;

    // Refinement: scan the ±1-coarse-cell box around the incumbent at 10×
    // resolution, replacing on strict improvement only.
    let fine = ZOOM * m;
    let mut best_idx = base_idx.map(|j| j * ZOOM);
    for d1 in -ZOOM..=ZOOM {
        let j1 = base_idx[0] * ZOOM + d1;
        if j1 < 0 || j1 > fine {
            continue;
        }
        for d2 in -ZOOM..=ZOOM {
            let j2 = base_idx[1] * ZOOM + d2;
            if j2 < 0 || j1 + j2 > fine {
                continue;
            }
            for d3 in -ZOOM..=ZOOM {
                let j3 = base_idx[2] * ZOOM + d3;
                if j3 < 0 || j3 > fine {
                    continue;
                }
                for d4 in -ZOOM..=ZOOM {
                    let j4 = base_idx[3] * ZOOM + d4;
                    if j4 < 0 || j4 > fine {
                        continue;
                    }
                    let idx = [j1, j2, j3, j4];
                    let (t, u) = coords(idx, fine);
                    if let Some(w) = grid.wsr(t, u) {
                        if w > best_w {
                            best_w = w;
                            best_idx = idx;
                        }
                    }
                }
            }
        }
    }
    let (t, u) = coords(best_idx, fine);
    Ok((best_w, grid.point(t, u)))
}

/// Half-duplex grid objective: broadcast at `P = min(p_avg/τ_0, p_peak)`
/// during slot 0, rates `ω_i·τ_i·log2(1 + α_i·τ_0·P/τ_i)`.
struct HdGrid<'a> {
    p_avg: f64,
    p_peak: f64,
    alpha: &'a [f64],
    weights: &'a [f64],
}

impl HdGrid<'_> {
    /// `tau` holds the `k` free durations `(τ_0, τ_1, …, τ_{K−1})`; the last
    /// user takes the remainder.
    fn wsr(&self, tau: &[f64]) -> f64 {
        let t0 = tau[0];
        if t0 == 0.0 {
            return 0.0;
        }
        let dl_energy = if self.p_peak.is_finite() {
            self.p_avg.min(self.p_peak * t0)
        } else {
            self.p_avg
        };
        let mut used = t0;
        let mut wsr = 0.0;
        for i in 0..self.alpha.len() {
            let t_i = if i + 1 < tau.len() {
                tau[i + 1]
            } else {
                (1.0 - used).max(0.0)
            };
            used += t_i;
            if t_i > 0.0 {
                let snr = self.alpha[i] * dl_energy / t_i;
                wsr += self.weights[i] * t_i * (1.0 + snr).log2();
            }
        }
        wsr
    }

    fn point(&self, tau: &[f64]) -> GridPoint {
        let k = self.alpha.len();
        let mut full = vec![0.0; k + 1];
        full[..tau.len()].copy_from_slice(tau);
        full[k] = (1.0 - tau.iter().sum::<f64>()).max(0.0);
        let mut energy = vec![0.0; k + 1];
        energy[0] = if full[0] == 0.0 {
            0.0
        } else if self.p_peak.is_finite() {
            self.p_avg.min(self.p_peak * full[0])
        } else {
            self.p_avg
        };
        GridPoint { tau: full, energy }
    }
}

/// Exhaustive grid maximization of the half-duplex weighted sum rate for
/// `K ≤ 3`.
///
/// Scans `(τ_0, τ_1[, τ_2])` on the `n`-step simplex grid with the remaining
/// time given to the last user and the broadcast power pinned to
/// `P = min(p_avg/τ_0, p_peak)`; one 10× zoom around the incumbent refines
/// the result.
pub fn grid_hd(
    params: &SystemParams,
    channels: &ChannelState,
    n: usize,
) -> Result<(f64, GridPoint), OracleError> {
    let k = params.num_users();
    if k == 0 || k > 3 {
        return Err(OracleError::UnsupportedUserCount {
            op: "grid_hd",
            expected: "1 to 3",
            got: k,
        });
    }
    if n < 10 {
        return Err(OracleError::ResolutionTooCoarse { n });
    }
    check_dims(params, channels)?;
    let grid = HdGrid {
        p_avg: params.p_avg(),
        p_peak: params.p_peak(),
        alpha: channels.alpha(),
        weights: params.weights(),
    };
    let m = n as i64;
    // k free coordinates: τ_0 and the first k−1 user slots.
    let free = k;
    let mut best: Option<(f64, Vec<i64>)> = None;
    let mut idx = vec![0i64; free];
    let mut tau = vec![0.0; free];
    scan_simplex(m, &mut idx, 0, &mut |idx| {
        for (t, &j) in tau.iter_mut().zip(idx.iter()) {
            *t = j as f64 / m as f64;
        }
        let w = grid.wsr(&tau);
        if best.as_ref().map_or(true, |(bw, _)| w > *bw) {
            best = Some((w, idx.to_vec()));
        }
    });
    let (mut best_w, base_idx) = best.expect("simplex grid is never empty");

    let fine = ZOOM * m;
    let mut best_idx: Vec<i64> = base_idx.iter().map(|&j| j * ZOOM).collect();
    let mut offs = vec![0i64; free];
    let mut fine_idx = vec![0i64; free];
    let mut tau_f = vec![0.0; free];
    scan_box(&mut offs, 0, &mut |offs| {
        let mut sum = 0i64;
        for i in 0..free {
            fine_idx[i] = base_idx[i] * ZOOM + offs[i];
            if fine_idx[i] < 0 {
                return;
            }
            sum += fine_idx[i];
        }
        if sum > fine {
            return;
        }
        for (t, &j) in tau_f.iter_mut().zip(fine_idx.iter()) {
            *t = j as f64 / fine as f64;
        }
        let w = grid.wsr(&tau_f);
        if w > best_w {
            best_w = w;
            best_idx = fine_idx.clone();
        }
    });
    let tau_best: Vec<f64> = best_idx.iter().map(|&j| j as f64 / fine as f64).collect();
    Ok((best_w, grid.point(&tau_best)))
}

/// Visits every index vector with non-negative entries summing to ≤ `m`, in
/// lexicographic order.
fn scan_simplex(m: i64, idx: &mut Vec<i64>, depth: usize, visit: &mut impl FnMut(&[i64])) {
    if depth == idx.len() {
        visit(idx);
        return;
    }
    let used: i64 = idx[..depth].iter().sum();
    for j in 0..=(m - used) {
        idx[depth] = j;
        scan_simplex(m, idx, depth + 1, visit);
    }
}

/// Visits every offset vector in `[−ZOOM, ZOOM]^d`, in lexicographic order.
fn scan_box(offs: &mut Vec<i64>, depth: usize, visit: &mut impl FnMut(&[i64])) {
    if depth == offs.len() {
        visit(offs);
        return;
    }
    for d in -ZOOM..=ZOOM {
        offs[depth] = d;
        scan_box(offs, depth + 1, visit);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Allocation;

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
    fn grid_fd_nosi_rejects_bad_inputs() {
        let (p1, c1) = setup(&[0.5], &[1.0], 10.0, 20.0);
        assert!(matches!(
            grid_fd_nosi(&p1, &c1, 50),
            Err(OracleError::UnsupportedUserCount { got: 1, .. })
        ));
        let (p2, c2) = setup(&[0.5, 0.2], &[1.0, 1.0], 10.0, 20.0);
        assert!(matches!(
            grid_fd_nosi(&p2, &c2, 9),
            Err(OracleError::ResolutionTooCoarse { n: 9 })
        ));
    }

    #[test]
    fn grid_fd_nosi_is_monotone_in_resolution() {
        // The n = 10 grid (base and zoom) is a subset of the n = 100 base
        // grid, so refinement can only help.
        let (params, channels) = setup(&[0.03, 0.01], &[1.0, 1.3], 100.0, 200.0);
        let (v10, _) = grid_fd_nosi(&params, &channels, 10).unwrap();
        let (v100, _) = grid_fd_nosi(&params, &channels, 100).unwrap();
        assert!(
            v10 <= v100 + 1e-12,
            "n = 10 value {v10} exceeds n = 100 value {v100}"
        );
    }

    #[test]
    fn grid_fd_nosi_point_reproduces_value_through_model() {
        let (params, channels) = setup(&[0.03, 0.01], &[1.0, 1.3], 100.0, 200.0);
        let (value, point) = grid_fd_nosi(&params, &channels, 20).unwrap();
        let alloc = Allocation::from_energies(point.tau.clone(), point.energy.clone()).unwrap();
        let report = crate::model::validate_allocation(&alloc, &params).unwrap();
        assert!(report.is_feasible(1e-9), "grid point infeasible: {report:?}");
        let rates = [
            model::rate_fd_nosi(1, &alloc, &params, &channels).unwrap(),
            model::rate_fd_nosi(2, &alloc, &params, &channels).unwrap(),
        ];
        let wsr = model::weighted_sum_rate(&rates, params.weights()).unwrap();
        assert_close(wsr, value, 1e-12, "public rate path agrees");
    }

    #[test]
    fn zero_weight_user_reduces_to_single_user_search() {
        // With ω₂ = 0 the search degenerates to the 1-user problem, whose
        // certified optimum is WSR ≈ 2.31356 (α = 1, P_avg = 10, P_peak = 20).
        let (params, channels) = setup(&[1.0, 0.5], &[1.0, 0.0], 10.0, 20.0);
        let (value, _) = grid_fd_nosi(&params, &channels, 60).unwrap();
        let want = 2.313_561_850_947_390_3;
        assert!(value <= want + 1e-9, "grid value {value} exceeds optimum");
        assert_close(value, want, 2e-3, "grid approaches 1-user optimum");
    }

    #[test]
    fn grid_fd_nosi_is_a_lower_bound_on_the_solver() {
        let (params, channels) = setup(&[0.03, 0.01], &[1.0, 1.0], 100.0, 200.0);
        let (value, _) = grid_fd_nosi(&params, &channels, 40).unwrap();
        let sol = crate::fd_perfect::solve(&params, &channels, crate::fd_perfect::DUAL_TOL)
            .unwrap();
        // Margin matches the solver's weak-duality certificate, not fp noise.
        assert!(value <= sol.wsr + 1e-8, "grid {value} beat solver {}", sol.wsr);
        assert_close(value, sol.wsr, 5e-3, "grid approaches solver");
    }

    #[test]
    fn grid_hd_rejects_bad_inputs() {
        let (p4, c4) = setup(&[0.5, 0.4, 0.3, 0.2], &[1.0; 4], 10.0, 20.0);
        assert!(matches!(
            grid_hd(&p4, &c4, 50),
            Err(OracleError::UnsupportedUserCount { got: 4, .. })
        ));
        let (p1, c1) = setup(&[0.5], &[1.0], 10.0, 20.0);
        assert!(matches!(
            grid_hd(&p1, &c1, 9),
            Err(OracleError::ResolutionTooCoarse { n: 9 })
        ));
    }

    #[test]
    fn grid_hd_matches_certified_single_user_optimum() {
        let (params, channels) = setup(&[0.02], &[1.0], 100.0, 200.0);
        let (value, point) = grid_hd(&params, &channels, 100).unwrap();
        let sol = crate::hd::solve(&params, &channels, 1e-12).unwrap();
        assert!(value <= sol.wsr + 1e-9, "grid {value} beat solver {}", sol.wsr);
        assert_close(value, sol.wsr, 1e-3, "grid approaches solver");
        assert!(point.tau[0] > 0.0, "charging slot active at the optimum");
        assert_close(
            point.energy[0],
            point.tau[0] * 200.0,
            1e-9,
            "uncapped instance broadcasts at P_peak",
        );
    }

    #[test]
    fn grid_hd_two_user_value_tracks_solver() {
        let (params, channels) = setup(&[0.03, 0.01], &[1.0, 1.3], 100.0, 200.0);
        let (value, point) = grid_hd(&params, &channels, 60).unwrap();
        let sol = crate::hd::solve(&params, &channels, 1e-12).unwrap();
        assert!(value <= sol.wsr + 1e-9, "grid {value} beat solver {}", sol.wsr);
        assert_close(value, sol.wsr, 2e-3, "grid approaches solver");
        // Point evaluates identically through the public rate path.
        let p = (100.0 / point.tau[0]).min(200.0);
        let rates = [
            model::rate_hd(1, &point.tau, p, &params, &channels).unwrap(),
            model::rate_hd(2, &point.tau, p, &params, &channels).unwrap(),
        ];
        let wsr = model::weighted_sum_rate(&rates, params.weights()).unwrap();
        assert_close(wsr, value, 1e-12, "public rate path agrees");
    }

    #[test]
    fn grid_hd_three_users_and_infinite_peak() {
        let (params, channels) = setup(&[0.05, 0.02, 0.007], &[1.0, 1.3, 0.6], 100.0, 300.0);
        let (value, _) = grid_hd(&params, &channels, 40).unwrap();
        let sol = crate::hd::solve(&params, &channels, 1e-12).unwrap();
        assert!(value <= sol.wsr + 1e-9);
        assert_close(value, sol.wsr, 5e-3, "K = 3 grid approaches solver");

        // P_peak = ∞: the grid cannot realize the zero-duration impulse but
        // approaches its value from below as τ₀ → 0.
        let (pi, ci) = setup(&[0.3], &[1.0], 10.0, f64::INFINITY);
        let (vi, pt) = grid_hd(&pi, &ci, 100).unwrap();
        let si = crate::hd::solve(&pi, &ci, 1e-12).unwrap();
        assert!(vi <= si.wsr + 1e-9);
        assert_close(vi, si.wsr, 1e-2, "approaches the impulse limit");
        assert!(pt.tau[0] > 0.0 && pt.tau[0] <= 2e-3, "τ₀ shrinks to the floor");
    }
}
