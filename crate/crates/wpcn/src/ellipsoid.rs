//! Two-dimensional central-cut ellipsoid method for the dual searches.
//!
//! The dual problems minimized here have two variables `(λ, μ)` — the
//! multipliers of the sum-time and energy/average-power constraints — and
//! are convex but non-smooth, so they are solved by the ellipsoid method:
//! keep an ellipsoid `{x : (x − c)ᵀ A⁻¹ (x − c) ≤ 1}` known to contain the
//! minimizer, query a subgradient `g` at the center, and shrink to the
//! minimum-volume ellipsoid containing the half `{x : gᵀ(x − c) ≤ 0}`:
//!
//! ```text
//! ĝ = g/√(gᵀAg),   c ← c − Aĝ/(n+1),   A ← n²/(n²−1)·(A − 2/(n+1)·Aĝ(Aĝ)ᵀ)
//! ```
//!
//! with `n = 2`. Every step multiplies `det A` by exactly
//! `(n²/(n²−1))ⁿ·(n−1)/(n+1) = 16/27`, which the tests assert. The quantity
//! `√(gᵀAg)` bounds the objective gap between the center and the contained
//! minimizer, so it doubles as the stopping criterion.
//!
//! Centers outside the dual domain (`λ < λ_min`, or `μ < μ_min` when the
//! caller restricts `μ`) are discarded with a cut along the constraint
//! normal, without querying the oracle; the oracle itself may also report a
//! feasibility cut for points where the inner maximization is undefined.

use thiserror::Error;

/// Default stop tolerance on `√(gᵀAg)`.
pub const DEFAULT_TOL: f64 = 1e-7;

/// Default iteration cap.
pub const DEFAULT_MAX_ITER: usize = 300;

/// Exact per-step determinant shrink factor of the 2-D central cut.
pub const DET_SHRINK_2D: f64 = 16.0 / 27.0;

/// Errors of the ellipsoid state itself (construction and updates).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    /// The shape matrix stopped being positive definite.
    #[error(
        "shape matrix lost positive definiteness at iteration {iteration} \
         (det = {det}, trace = {trace})"
    )]
    Degenerate {
        iteration: usize,
        det: f64,
        trace: f64,
    },
    /// A cut vector was zero or non-finite in the ellipsoid metric.
    #[error("invalid cut vector ({g0}, {g1}) at iteration {iteration}")]
    BadCut { iteration: usize, g0: f64, g1: f64 },
    /// Invalid construction input.
    #[error("{0}")]
    Invalid(String),
}

/// Errors raised by [`ellipsoid_minimize`].
#[derive(Debug, Error)]
pub enum EllipsoidError<E: std::error::Error + 'static> {
    /// The dual oracle failed; the offending center is recorded.
    #[error("dual oracle failed at (λ = {lambda}, μ = {mu})")]
    Oracle {
        lambda: f64,
        mu: f64,
        #[source]
        source: E,
    },
    /// The ellipsoid geometry broke down numerically.
    #[error(transparent)]
    State(#[from] StateError),
    /// Every center within the iteration budget violated the domain.
    #[error("no feasible center evaluated in {iterations} iterations")]
    NoFeasibleCenter { iterations: usize },
}

/// Ellipsoid `{x : (x − center)ᵀ shape⁻¹ (x − center) ≤ 1}` plus an
/// iteration counter.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidState {
    center: [f64; 2],
    shape: [[f64; 2]; 2],
    iteration: usize,
}

impl EllipsoidState {
    /// Builds a state from an explicit symmetric positive-definite shape.
    pub fn new(center: [f64; 2], shape: [[f64; 2]; 2]) -> Result<Self, StateError> {
        let s = Self {
            center,
            shape,
            iteration: 0,
        };
        s.check_definite(0)?;
        if (shape[0][1] - shape[1][0]).abs() > 1e-12 * (1.0 + shape[0][1].abs()) {
            return Err(StateError::Invalid(format!(
                "shape not symmetric: {} vs {}",
                shape[0][1], shape[1][0]
            )));
        }
        Ok(s)
    }

    /// Ball of the given radius: shape = radius²·I.
    pub fn isotropic(center: [f64; 2], radius: f64) -> Result<Self, StateError> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(StateError::Invalid(format!(
                "radius {radius} must be finite and > 0"
            )));
        }
        Self::new(center, [[radius * radius, 0.0], [0.0, radius * radius]])
    }

    /// Current center `(λ, μ)`.
    pub fn center(&self) -> [f64; 2] {
        self.center
    }

    /// Current shape matrix.
    pub fn shape(&self) -> [[f64; 2]; 2] {
        self.shape
    }

    /// Completed cut count.
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Determinant of the shape matrix.
    pub fn det(&self) -> f64 {
        self.shape[0][0] * self.shape[1][1] - self.shape[0][1] * self.shape[1][0]
    }

    fn check_definite(&self, iteration: usize) -> Result<(), StateError> {
        let det = self.det();
        let trace = self.shape[0][0] + self.shape[1][1];
        if !(det > 0.0 && self.shape[0][0] > 0.0 && det.is_finite() && trace.is_finite()) {
            return Err(StateError::Degenerate {
                iteration,
                det,
                trace,
            });
        }
        Ok(())
    }

    /// `√(gᵀAg)`: the ellipsoid's extent along `g`, and the suboptimality
    /// bound used for stopping.
    pub fn metric(&self, g: [f64; 2]) -> Result<f64, StateError> {
        let ag = self.mat_vec(g);
        let gag = g[0] * ag[0] + g[1] * ag[1];
        if !(gag.is_finite() && gag > 0.0) {
            return Err(StateError::BadCut {
                iteration: self.iteration,
                g0: g[0],
                g1: g[1],
            });
        }
        Ok(gag.sqrt())
    }

    fn mat_vec(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.shape[0][0] * v[0] + self.shape[0][1] * v[1],
            self.shape[1][0] * v[0] + self.shape[1][1] * v[1],
        ]
    }

    /// Applies one central cut along `g`, keeping `{x : gᵀ(x − c) ≤ 0}`.
    /// Returns `√(gᵀAg)` as measured before the update.
    pub fn central_cut(&mut self, g: [f64; 2]) -> Result<f64, StateError> {
        let norm = self.metric(g)?;
        let ghat = [g[0] / norm, g[1] / norm];
        let aghat = self.mat_vec(ghat);

        // n = 2: c ← c − Aĝ/3, A ← (4/3)·(A − (2/3)·Aĝ(Aĝ)ᵀ).
        self.center[0] -= aghat[0] / 3.0;
        self.center[1] -= aghat[1] / 3.0;
        for r in 0..2 {
            for c in 0..2 {
                self.shape[r][c] = 4.0 / 3.0 * (self.shape[r][c] - 2.0 / 3.0 * aghat[r] * aghat[c]);
            }
        }
        // Symmetrize to cancel rounding drift before the definiteness check.
        let off = 0.5 * (self.shape[0][1] + self.shape[1][0]);
        self.shape[0][1] = off;
        self.shape[1][0] = off;
        self.iteration += 1;
        self.check_definite(self.iteration)?;
        Ok(norm)
    }
}

/// Dual-domain description: `λ ≥ lambda_min` always, plus an optional lower
/// bound on `μ` (used when the inner problem is unbounded for `μ ≤ 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub lambda_min: f64,
    pub mu_min: Option<f64>,
}

impl Domain {
    /// `λ ≥ 0`, `μ` free.
    pub fn lambda_only() -> Self {
        Self {
            lambda_min: 0.0,
            mu_min: None,
        }
    }

    /// `λ ≥ 0` and `μ ≥ mu_min`.
    pub fn with_mu_min(mu_min: f64) -> Self {
        Self {
            lambda_min: 0.0,
            mu_min: Some(mu_min),
        }
    }

    fn violation(&self, point: [f64; 2]) -> Option<[f64; 2]> {
        if point[0] < self.lambda_min {
            return Some([-1.0, 0.0]);
        }
        if let Some(mm) = self.mu_min {
            if point[1] < mm {
                return Some([0.0, -1.0]);
            }
        }
        None
    }
}

/// What the dual oracle reports at a feasible center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cut {
    /// Dual value and a subgradient of the dual function at the center.
    Objective { value: f64, grad: [f64; 2] },
    /// The center lies outside the region where the inner maximizer exists;
    /// `grad` is the normal of a violated linear condition.
    Feasibility { grad: [f64; 2] },
}

/// Why an iteration cut the ellipsoid. Recorded in the trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutKind {
    Objective,
    DomainLambda,
    DomainMu,
    OracleFeasibility,
}

/// One trace entry: the center queried, the kind of cut applied, and
/// `√(gᵀAg)` for objective cuts (`None` otherwise).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStep {
    pub center: [f64; 2],
    pub kind: CutKind,
    pub metric: Option<f64>,
}

/// Outcome of a minimization run.
#[derive(Debug, Clone)]
pub struct EllipsoidSolution {
    /// Feasible center with the smallest oracle value seen.
    pub point: [f64; 2],
    /// Oracle value at `point`.
    pub value: f64,
    /// Number of cuts applied.
    pub iterations: usize,
    /// Whether `√(gᵀAg) ≤ tol` was reached.
    pub converged: bool,
    /// Per-iteration history.
    pub trace: Vec<TraceStep>,
}

/// Minimizes a convex function over `domain` by central-cut ellipsoid steps.
///
/// `oracle` is queried only at domain-feasible centers and returns either an
/// objective value + subgradient or a feasibility cut. The best (lowest
/// value) feasible center is returned; hitting `max_iter` without meeting
/// `tol` is reported via `converged = false`, not an error.
pub fn ellipsoid_minimize<E: std::error::Error>(
    mut oracle: impl FnMut([f64; 2]) -> Result<Cut, E>,
    initial: EllipsoidState,
    domain: Domain,
    tol: f64,
    max_iter: usize,
) -> Result<EllipsoidSolution, EllipsoidError<E>> {
    let mut state = initial;
    let mut best: Option<([f64; 2], f64)> = None;
    let mut trace = Vec::with_capacity(max_iter.min(1024));
    let mut converged = false;

    for _ in 0..max_iter {
        let center = state.center();
        if let Some(normal) = domain.violation(center) {
            let kind = if normal[0] != 0.0 {
                CutKind::DomainLambda
            } else {
                CutKind::DomainMu
            };
            trace.push(TraceStep {
                center,
                kind,
                metric: None,
            });
            state.central_cut(normal)?;
            continue;
        }
        match oracle(center).map_err(|source| EllipsoidError::Oracle {
            lambda: center[0],
            mu: center[1],
            source,
        })? {
            Cut::Feasibility { grad } => {
                trace.push(TraceStep {
                    center,
                    kind: CutKind::OracleFeasibility,
                    metric: None,
                });
                state.central_cut(grad)?;
            }
            Cut::Objective { value, grad } => {
                if best.map_or(true, |(_, v)| value < v) {
                    best = Some((center, value));
                }
                if grad == [0.0, 0.0] {
                    // Exact optimality certificate.
                    trace.push(TraceStep {
                        center,
                        kind: CutKind::Objective,
                        metric: Some(0.0),
                    });
                    converged = true;
                    break;
                }
                let metric = state.metric(grad)?;
                trace.push(TraceStep {
                    center,
                    kind: CutKind::Objective,
                    metric: Some(metric),
                });
                if metric <= tol {
                    converged = true;
                    break;
                }
                state.central_cut(grad)?;
            }
        }
    }

    let iterations = state.iteration();
    match best {
        Some((point, value)) => Ok(EllipsoidSolution {
            point,
            value,
            iterations,
            converged,
            trace,
        }),
        None => Err(EllipsoidError::NoFeasibleCenter { iterations }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    use std::convert::Infallible;

    #[test]
    fn determinant_shrinks_by_exactly_16_27_per_cut() {
        let mut state =
            EllipsoidState::isotropic([3.0, -2.0], 7.0).unwrap();
        let mut det = state.det();
        // A deterministic pseudo-random sequence of cut directions.
        let mut x = 0.3f64;
        for _ in 0..50 {
            x = (x * 97.31).sin();
            let g = [x, 1.0 - 0.5 * x];
            state.central_cut(g).unwrap();
            let next = state.det();
            assert!(
                (next / det - DET_SHRINK_2D).abs() < 1e-12,
                "det ratio {} vs {}",
                next / det,
                DET_SHRINK_2D
            );
            det = next;
        }
    }

    #[test]
    fn minimizes_convex_quadratic() {
        // (x − (1, 2))ᵀ(x − (1, 2)), domain λ ≥ 0.
        let oracle = |p: [f64; 2]| -> Result<Cut, Infallible> {
            let d = [p[0] - 1.0, p[1] - 2.0];
            Ok(Cut::Objective {
                value: d[0] * d[0] + d[1] * d[1],
                grad: [2.0 * d[0], 2.0 * d[1]],
            })
        };
        let initial = EllipsoidState::isotropic([5.0, 5.0], 20.0).unwrap();
        let sol =
            ellipsoid_minimize(oracle, initial, Domain::lambda_only(), 1e-9, 500).unwrap();
        assert!(sol.converged);
        assert!(
            (sol.point[0] - 1.0).abs() < 1e-4 && (sol.point[1] - 2.0).abs() < 1e-4,
            "point {:?}",
            sol.point
        );
        assert!(sol.value < 1e-6);
    }

    #[test]
    fn zero_subgradient_converges_immediately() {
        let oracle = |_p: [f64; 2]| -> Result<Cut, Infallible> {
            Ok(Cut::Objective {
                value: 4.2,
                grad: [0.0, 0.0],
            })
        };
        let initial = EllipsoidState::isotropic([1.0, 1.0], 10.0).unwrap();
        let sol =
            ellipsoid_minimize(oracle, initial, Domain::lambda_only(), 1e-7, 300).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.iterations, 0);
        assert_eq!(sol.point, [1.0, 1.0]);
        assert_eq!(sol.value, 4.2);
    }

    #[test]
    fn domain_cuts_keep_oracle_inside() {
        // Center starts far below the μ bound; the oracle must never see
        // μ < μ_min or λ < 0.
        let mu_min = 1e-12;
        let oracle = |p: [f64; 2]| -> Result<Cut, Infallible> {
            assert!(p[0] >= 0.0 && p[1] >= mu_min, "oracle saw {p:?}");
            let d = [p[0] - 0.5, p[1] - 0.25];
            Ok(Cut::Objective {
                value: d[0] * d[0] + d[1] * d[1],
                grad: [2.0 * d[0], 2.0 * d[1]],
            })
        };
        let initial = EllipsoidState::isotropic([-8.0, -8.0], 40.0).unwrap();
        let sol =
            ellipsoid_minimize(oracle, initial, Domain::with_mu_min(mu_min), 1e-8, 500)
                .unwrap();
        assert!(sol.converged);
        assert!((sol.point[0] - 0.5).abs() < 1e-3 && (sol.point[1] - 0.25).abs() < 1e-3);
        assert!(sol
            .trace
            .iter()
            .any(|s| matches!(s.kind, CutKind::DomainLambda | CutKind::DomainMu)));
    }

    #[test]
    fn oracle_feasibility_cuts_are_honored() {
        // Feasible region: λ + μ ≥ 1 (oracle-enforced); minimize distance to
        // (0, 0), so the constrained optimum is λ = μ = 0.5.
        let oracle = |p: [f64; 2]| -> Result<Cut, Infallible> {
            if p[0] + p[1] < 1.0 {
                return Ok(Cut::Feasibility { grad: [-1.0, -1.0] });
            }
            Ok(Cut::Objective {
                value: p[0] * p[0] + p[1] * p[1],
                grad: [2.0 * p[0], 2.0 * p[1]],
            })
        };
        let initial = EllipsoidState::isotropic([3.0, -1.0], 15.0).unwrap();
        let sol =
            ellipsoid_minimize(oracle, initial, Domain::lambda_only(), 1e-9, 600).unwrap();
        assert!((sol.value - 0.5).abs() < 1e-3, "value {}", sol.value);
    }

    #[test]
    fn never_feasible_center_is_an_error() {
        let oracle = |_p: [f64; 2]| -> Result<Cut, Infallible> {
            Ok(Cut::Feasibility { grad: [1.0, 0.0] })
        };
        let initial = EllipsoidState::isotropic([1.0, 1.0], 5.0).unwrap();
        let out = ellipsoid_minimize(oracle, initial, Domain::lambda_only(), 1e-7, 40);
        assert!(matches!(out, Err(EllipsoidError::NoFeasibleCenter { .. })));
    }

    #[test]
    fn bad_shape_is_rejected() {
        assert!(EllipsoidState::new([0.0, 0.0], [[1.0, 0.0], [0.0, -1.0]]).is_err());
        assert!(EllipsoidState::new([0.0, 0.0], [[1.0, 0.5], [0.4, 1.0]]).is_err());
        assert!(EllipsoidState::isotropic([0.0, 0.0], 0.0).is_err());
    }
}
