//! Scalar root finding for the monotone functions behind the time updates.
//!
//! Two strictly increasing functions recur in the closed-form slot-duration
//! updates, both defined for `z ≥ 0`:
//!
//! ```text
//! f(z)    = ln(1 + z) − z/(1 + z)                      f(0) = 0
//! f̄(z, a) = ln(1 + z) − z/(1 + z) − a/(1 + z)          f̄(0) = −a,  a ≥ 0
//! ```
//!
//! `f` maps `[0, ∞)` onto `[0, ∞)` with `f′(z) = z/(1+z)²`; `f̄` maps onto
//! `[−a, ∞)` with `f̄′(z) = (z + a)/(1+z)²`. Their inverses are computed by
//! bracket doubling followed by bisection, with a guarded Newton polish that
//! never leaves the final bracket (any overshoot falls back to the bisection
//! midpoint). A generic sign-change [`bisect`] is also provided for the 1-D
//! dual searches elsewhere in the crate.

use thiserror::Error;

/// Default absolute tolerance on function values for the inverse solvers.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Relative interval-width floor at which bisection stops refining: beyond
/// this the midpoint no longer changes in f64.
const WIDTH_REL_TOL: f64 = 1e-15;

/// Errors raised by the scalar solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScalarError {
    /// An argument violated its domain constraint.
    #[error("{name} = {value} violates {constraint}")]
    InvalidArgument {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    /// The requested target lies below the function's range; for `f̄` this
    /// means `c < −a = f̄(0)`.
    #[error("target {target} below attainable infimum {infimum}; no root exists")]
    NoRoot { target: f64, infimum: f64 },
    /// No sign change on the supplied or grown bracket.
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    BracketFailure {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },
    /// The iteration cap was reached before meeting the tolerance.
    #[error("iteration limit {limit} reached; last interval [{lo}, {hi}], residual {residual}")]
    IterationLimit {
        limit: usize,
        lo: f64,
        hi: f64,
        residual: f64,
    },
}

/// A sign-changing interval `[lo, hi]` with cached endpoint values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    lo: f64,
    hi: f64,
    f_lo: f64,
    f_hi: f64,
}

impl Bracket {
    /// Validates `lo < hi` (both finite) and `f_lo·f_hi ≤ 0`.
    pub fn new(lo: f64, hi: f64, f_lo: f64, f_hi: f64) -> Result<Self, ScalarError> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(ScalarError::InvalidArgument {
                name: "bracket",
                value: hi - lo,
                constraint: "finite endpoints with lo < hi",
            });
        }
        if f_lo * f_hi > 0.0 || !f_lo.is_finite() || !f_hi.is_finite() {
            return Err(ScalarError::BracketFailure { lo, hi, f_lo, f_hi });
        }
        Ok(Self { lo, hi, f_lo, f_hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }
}

/// Grows `hi` by doubling until `f` changes sign relative to `f(lo)`, then
/// returns the bracket. Used by the dual bisection searches, whose roots have
/// no a-priori upper bound.
pub(crate) fn grow_bracket_upward(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi_start: f64,
) -> Result<Bracket, ScalarError> {
    let f_lo = f(lo);
    if f_lo == 0.0 {
        // Degenerate but valid: the caller's bisection will return lo.
        return Bracket::new(lo, lo + hi_start.max(1e-300), f_lo, f(lo + hi_start.max(1e-300)));
    }
    let mut hi = hi_start.max(lo * 2.0).max(1e-300);
    let mut f_hi = f(hi);
    let mut doublings = 0usize;
    while f_lo * f_hi > 0.0 {
        doublings += 1;
        if doublings > 1100 || !hi.is_finite() {
            return Err(ScalarError::BracketFailure { lo, hi, f_lo, f_hi });
        }
        hi *= 2.0;
        f_hi = f(hi);
    }
    Bracket::new(lo, hi, f_lo, f_hi)
}

/// `f(z) = ln(1 + z) − z/(1 + z)` for `z ≥ 0`.
pub fn f_value(z: f64) -> Result<f64, ScalarError> {
    if !(z.is_finite() && z >= 0.0) {
        return Err(ScalarError::InvalidArgument {
            name: "z",
            value: z,
            constraint: "finite and >= 0",
        });
    }
    Ok(z.ln_1p() - z / (1.0 + z))
}

/// `f̄(z, a) = ln(1 + z) − (z + a)/(1 + z)` for `z ≥ 0`, `a ≥ 0`.
pub fn fbar_value(z: f64, a: f64) -> Result<f64, ScalarError> {
    if !(z.is_finite() && z >= 0.0) {
        return Err(ScalarError::InvalidArgument {
            name: "z",
            value: z,
            constraint: "finite and >= 0",
        });
    }
    if !(a.is_finite() && a >= 0.0) {
        return Err(ScalarError::InvalidArgument {
            name: "a",
            value: a,
            constraint: "finite and >= 0",
        });
    }
    Ok(z.ln_1p() - (z + a) / (1.0 + z))
}

/// Shared inverse driver: solves `g(z) = c` for strictly increasing `g` with
/// derivative `dg`, starting from the doubling bracket `[0, 1]`.
fn invert_increasing(
    g: impl Fn(f64) -> f64,
    dg: impl Fn(f64) -> f64,
    c: f64,
    tol: f64,
) -> Result<f64, ScalarError> {
    // Doubling phase. After it, the root lies in [lo, hi] with lo = hi/2 (or
    // lo = 0 when the initial hi already overshoots), so bisection starts
    // from an interval commensurate with the root.
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let mut g_hi = g(hi);
    let mut doublings = 0usize;
    while g_hi < c {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 1100 || !hi.is_finite() {
            return Err(ScalarError::BracketFailure {
                lo,
                hi,
                f_lo: g(lo) - c,
                f_hi: g_hi - c,
            });
        }
        g_hi = g(hi);
    }

    // Bisection to a width at which Newton is safe and the value residual is
    // already far below `tol` in well-scaled regions.
    let mut iterations = 0usize;
    let mut mid = 0.5 * (lo + hi);
    while hi - lo > WIDTH_REL_TOL * mid.max(1.0) {
        iterations += 1;
        if iterations > 2000 {
            return Err(ScalarError::IterationLimit {
                limit: 2000,
                lo,
                hi,
                residual: g(mid) - c,
            });
        }
        mid = 0.5 * (lo + hi);
        if g(mid) < c {
            lo = mid;
        } else {
            hi = mid;
        }
        mid = 0.5 * (lo + hi);
    }

    // Guarded Newton polish: a couple of steps squeeze out the last bits, but
    // any step leaving [lo, hi] falls back to the midpoint.
    let mut z = mid;
    for _ in 0..3 {
        let r = g(z) - c;
        if r.abs() <= tol {
            break;
        }
        let d = dg(z);
        if d > 0.0 {
            let step = z - r / d;
            z = if step.is_finite() && step >= lo && step <= hi {
                step
            } else {
                0.5 * (lo + hi)
            };
        }
    }
    let residual = g(z) - c;
    if residual.abs() <= tol || hi - lo <= WIDTH_REL_TOL * z.max(1.0) {
        Ok(z)
    } else {
        Err(ScalarError::IterationLimit {
            limit: 2000,
            lo,
            hi,
            residual,
        })
    }
}

/// Solves `f(z) = c` for `c ≥ 0`.
///
/// Returns `z = 0` exactly for `c = 0`; rejects `c < 0`. Targets beyond
/// `f(f64::MAX) ≈ 709` have no representable root and report a bracket
/// failure.
pub fn f_inverse(c: f64, tol: f64) -> Result<f64, ScalarError> {
    if !(c.is_finite() && c >= 0.0) {
        return Err(ScalarError::InvalidArgument {
            name: "c",
            value: c,
            constraint: "finite and >= 0",
        });
    }
    if c == 0.0 {
        return Ok(0.0);
    }
    invert_increasing(
        |z| z.ln_1p() - z / (1.0 + z),
        |z| z / ((1.0 + z) * (1.0 + z)),
        c,
        tol,
    )
}

/// Solves `f̄(z, a) = c` for `a ≥ 0`.
///
/// The range of `f̄(·, a)` is `[−a, ∞)`; targets below `−a` report
/// [`ScalarError::NoRoot`] (the dual solvers translate that into a cut).
/// With `a = 0` this reduces exactly to [`f_inverse`].
pub fn fbar_inverse(c: f64, a: f64, tol: f64) -> Result<f64, ScalarError> {
    if !(a.is_finite() && a >= 0.0) {
        return Err(ScalarError::InvalidArgument {
            name: "a",
            value: a,
            constraint: "finite and >= 0",
        });
    }
    if !c.is_finite() {
        return Err(ScalarError::InvalidArgument {
            name: "c",
            value: c,
            constraint: "finite",
        });
    }
    if c < -a {
        return Err(ScalarError::NoRoot {
            target: c,
            infimum: -a,
        });
    }
    if c == -a {
        return Ok(0.0);
    }
    invert_increasing(
        |z| z.ln_1p() - (z + a) / (1.0 + z),
        |z| (z + a) / ((1.0 + z) * (1.0 + z)),
        c,
        tol,
    )
}

/// [`f_inverse`] with saturation: targets beyond f64 range (`c ≳ 709`, root
/// `≳ f64::MAX`) return `+∞` instead of an error.
///
/// The dual searches evaluate `f_inverse(λ·ln2/ω_i)` at exploratory points
/// where the ratio can be enormous (tiny weights, large multipliers); the
/// correct limit there is `z → ∞`, which downstream formulas map to a zero
/// slot duration.
pub(crate) fn f_inverse_capped(c: f64, tol: f64) -> f64 {
    match f_inverse(c, tol) {
        Ok(z) => z,
        Err(_) => f64::INFINITY,
    }
}

/// Bisection on a sign-changing bracket.
///
/// Stops when `|f(mid)| ≤ tol` or the interval width drops to `tol`;
/// exceeding `max_iter` reports the last interval and residual.
pub fn bisect(
    f: impl Fn(f64) -> f64,
    bracket: Bracket,
    tol: f64,
    max_iter: usize,
) -> Result<f64, ScalarError> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(ScalarError::InvalidArgument {
            name: "tol",
            value: tol,
            constraint: "finite and > 0",
        });
    }
    if bracket.f_lo == 0.0 {
        return Ok(bracket.lo);
    }
    if bracket.f_hi == 0.0 {
        return Ok(bracket.hi);
    }
    let (mut lo, mut hi) = (bracket.lo, bracket.hi);
    let sign_lo = bracket.f_lo.signum();
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..max_iter {
        mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm.abs() <= tol || hi - lo <= tol {
            return Ok(mid);
        }
        if fm.signum() == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(ScalarError::IterationLimit {
        limit: max_iter,
        lo,
        hi,
        residual: f(mid),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent plain-bisection oracle used to freeze expected inverses:
    /// no Newton, no shared driver, 400 fixed halvings.
    fn oracle_invert(g: impl Fn(f64) -> f64, c: f64) -> f64 {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while g(hi) < c {
            hi *= 2.0;
        }
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < c {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn f_oracle(z: f64) -> f64 {
        (1.0 + z).ln() - z / (1.0 + z)
    }

    #[test]
    fn f_value_basics() {
        assert_eq!(f_value(0.0).unwrap(), 0.0);
        assert!(f_value(-1e-9).is_err());
        // Strictly increasing on a sample grid.
        let mut prev = 0.0;
        for i in 1..=1000 {
            let z = i as f64 * 0.1;
            let v = f_value(z).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn f_inverse_matches_frozen_oracle_values() {
        // Frozen from the independent oracle above (residual 0 at 1e-12):
        //   f(z) = 1   → z = 5.305395279271691
        //   f(z) = ln2 → z = 3.3110704070010044
        let z1 = f_inverse(1.0, DEFAULT_TOL).unwrap();
        assert!((z1 - 5.305395279271691).abs() < 1e-9, "z1 = {z1}");
        let z2 = f_inverse(std::f64::consts::LN_2, DEFAULT_TOL).unwrap();
        assert!((z2 - 3.3110704070010044).abs() < 1e-9, "z2 = {z2}");
        // And agreement with the oracle on fresh targets.
        for &c in &[1e-6, 0.01, 0.5, 2.0, 10.0, 100.0] {
            let z = f_inverse(c, DEFAULT_TOL).unwrap();
            let z_oracle = oracle_invert(f_oracle, c);
            assert!(
                (z - z_oracle).abs() <= 1e-9 * z_oracle.max(1.0),
                "c = {c}: {z} vs {z_oracle}"
            );
        }
    }

    #[test]
    fn f_inverse_edge_cases() {
        assert_eq!(f_inverse(0.0, DEFAULT_TOL).unwrap(), 0.0);
        assert!(f_inverse(-1.0, DEFAULT_TOL).is_err());
        // Unrepresentable target: f(f64::MAX) ≈ 709.
        assert!(matches!(
            f_inverse(1000.0, DEFAULT_TOL),
            Err(ScalarError::BracketFailure { .. })
        ));
    }

    #[test]
    fn f_round_trip_is_tight_over_the_whole_range() {
        // f_inverse ∘ f = identity within 1e-8 relative on z ∈ [1e-6, 1e6].
        let mut z = 1e-6f64;
        while z <= 1e6 {
            let c = f_value(z).unwrap();
            let back = f_inverse(c, DEFAULT_TOL).unwrap();
            assert!(
                (back - z).abs() <= 1e-8 * z.max(1e-12),
                "z = {z}, back = {back}"
            );
            z *= 1.37;
        }
    }

    #[test]
    fn fbar_inverse_matches_frozen_oracle_value() {
        // Frozen from the independent oracle: f̄(z, a=2) = 1 → z = 7.3313727538980675.
        let z = fbar_inverse(1.0, 2.0, DEFAULT_TOL).unwrap();
        assert!((z - 7.3313727538980675).abs() < 1e-9, "z = {z}");
        // Analytic anchor: f̄(z, a=1) = 0 ⇒ ln(1+z) = 1 ⇒ z = e − 1.
        let z = fbar_inverse(0.0, 1.0, DEFAULT_TOL).unwrap();
        assert!((z - (std::f64::consts::E - 1.0)).abs() < 1e-10, "z = {z}");
    }

    #[test]
    fn fbar_inverse_reduces_to_f_inverse_at_a_zero() {
        for &c in &[0.0, 0.3, 1.0, 4.2] {
            let a = fbar_inverse(c, 0.0, DEFAULT_TOL).unwrap();
            let b = f_inverse(c, DEFAULT_TOL).unwrap();
            assert!((a - b).abs() <= 1e-10 * b.max(1.0));
        }
    }

    #[test]
    fn fbar_inverse_no_root_below_infimum() {
        assert!(matches!(
            fbar_inverse(-1.5, 1.0, DEFAULT_TOL),
            Err(ScalarError::NoRoot { .. })
        ));
        assert_eq!(fbar_inverse(-1.0, 1.0, DEFAULT_TOL).unwrap(), 0.0);
    }

    #[test]
    fn fbar_inverse_monotone_in_target() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5ca1ab1e);
        for _ in 0..200 {
            let a: f64 = rng.gen_range(0.0..5.0);
            let c1: f64 = rng.gen_range(-a..10.0);
            let c2: f64 = rng.gen_range(c1..10.0 + 1e-9);
            let z1 = fbar_inverse(c1, a, DEFAULT_TOL).unwrap();
            let z2 = fbar_inverse(c2, a, DEFAULT_TOL).unwrap();
            assert!(z2 >= z1 - 1e-9, "a={a} c1={c1} c2={c2}: {z1} vs {z2}");
        }
    }

    #[test]
    fn fbar_round_trip() {
        let mut z = 1e-6f64;
        while z <= 1e6 {
            for &a in &[0.0, 0.5, 3.0] {
                let c = fbar_value(z, a).unwrap();
                let back = fbar_inverse(c, a, DEFAULT_TOL).unwrap();
                assert!(
                    (back - z).abs() <= 1e-8 * z.max(1e-12),
                    "z = {z}, a = {a}, back = {back}"
                );
            }
            z *= 2.11;
        }
    }

    #[test]
    fn bisect_finds_roots_and_reports_failures() {
        // Same target as f_inverse(1): root of f(z) − 1 on [0, 1e6].
        let g = |z: f64| f_oracle(z) - 1.0;
        let bracket = Bracket::new(0.0, 1e6, g(0.0), g(1e6)).unwrap();
        let z = bisect(g, bracket, 1e-12, 200).unwrap();
        assert!((z - 5.305395279271691).abs() < 1e-6);

        // No sign change → bracket construction fails with endpoints.
        assert!(matches!(
            Bracket::new(1.0, 2.0, 0.5, 0.7),
            Err(ScalarError::BracketFailure { .. })
        ));

        // Iteration limit carries the last interval.
        let bracket = Bracket::new(0.0, 1e6, g(0.0), g(1e6)).unwrap();
        assert!(matches!(
            bisect(g, bracket, 1e-30, 3),
            Err(ScalarError::IterationLimit { limit: 3, .. })
        ));
    }

    #[test]
    fn grow_bracket_doubles_until_sign_change() {
        let g = |x: f64| x - 37.0;
        let b = grow_bracket_upward(g, 0.0, 1.0).unwrap();
        assert!(b.lo() == 0.0 && b.hi() >= 37.0);
        let root = bisect(g, b, 1e-10, 200).unwrap();
        assert!((root - 37.0).abs() < 1e-9);
    }
}
