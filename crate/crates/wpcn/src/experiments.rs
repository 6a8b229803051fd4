//! Seeded channel generation, rate-region sweeps, and paired Monte-Carlo
//! sum-rate curves.
//!
//! The stochastic setup places each user uniformly at `D_i ∈ [d_min, d_max]`
//! metres from the access point and draws independent unit-mean exponential
//! fades for the downlink and uplink, so the link power gains are
//!
//! ```text
//! |h_{D,i}|² = A_ref·ρ_{D,i}·D_i^(−α_D),   |h_{U,i}|² = A_ref·ρ_{U,i}·D_i^(−α_U),
//! H_i = |h_{D,i}|²·|h_{U,i}|²,             σ² = N₀·bandwidth.
//! ```
//!
//! Every random quantity is derived from `(seed, realization, user, tag)`
//! alone — each draw opens its own counter-keyed stream — so results are
//! reproducible regardless of iteration order or thread count.
//!
//! [`rate_region`] sweeps the weight vector `ω = (w, 1−w)` over a uniform
//! grid to trace a two-user boundary; [`monte_carlo`] averages sum rates
//! (equal weights) over seeded realizations, *pairing* the channel draws
//! across every operating mode and budget point so that mode orderings and
//! budget monotonicity emerge at desk-scale realization counts. Budgets are
//! swept in dBm (`x dBm = 10^(x/10) mW`); the configured `P_peak/P_avg`
//! ratio is preserved along the sweep, matching how peak limits are quoted
//! (e.g. "P_peak = 2·P_avg") rather than holding an absolute cap.

use std::collections::BTreeMap;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use thiserror::Error;

use crate::fd_perfect::{self, FdError};
use crate::fd_si::{self, SiError, StepConfig};
use crate::hd::{self, HdError};
use crate::model::{ChannelState, ModelError, SolverResult, SystemParams};

/// Convergence tolerance handed to the convex solvers.
const SOLVE_TOL: f64 = 1e-9;
/// Minimum fraction of successful realizations required to emit a table row.
const MIN_SUCCESS_FRACTION: f64 = 0.95;

/// `x dBm → mW` (equally `x dB →` linear power ratio).
pub fn dbm_to_mw(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}

/// `x mW → dBm`.
pub fn mw_to_dbm(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Errors from channel generation and experiment sweeps.
#[derive(Debug, Error)]
pub enum ExperimentError {
    /// Invalid scenario parameters or model assembly.
    #[error(transparent)]
    Model(#[from] ModelError),
    /// A solver failed; the context names the sweep point.
    #[error("solver failed at {context}: {message}")]
    Solve { context: String, message: String },
    /// Operation defined only for a specific user count.
    #[error("{op} needs K = {expected}, got {got}")]
    UnsupportedUserCount {
        op: &'static str,
        expected: usize,
        got: usize,
    },
}

/// Operating mode of the access point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Mode {
    /// Full duplex, perfect self-interference cancellation.
    FdPerfect,
    /// Full duplex with residual self-interference.
    FdSi,
    /// Half duplex (charge-then-transmit).
    Hd,
}

impl Mode {
    /// Stable lowercase name used in CSV output and CLI flags.
    pub fn name(self) -> &'static str {
        match self {
            Mode::FdPerfect => "fd-perfect",
            Mode::FdSi => "fd-si",
            Mode::Hd => "hd",
        }
    }

    /// Parse a CLI/CSV mode name.
    pub fn parse(s: &str) -> Option<Mode> {
        match s.trim() {
            "fd-perfect" => Some(Mode::FdPerfect),
            "fd-si" => Some(Mode::FdSi),
            "hd" => Some(Mode::Hd),
            _ => None,
        }
    }
}

/// A stochastic simulation scenario: geometry, fading, radio constants, and
/// the experiment budget.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Number of users `K`.
    pub num_users: usize,
    /// Distance bounds (m) for the uniform user placement.
    pub d_min: f64,
    /// Upper distance bound (m).
    pub d_max: f64,
    /// Downlink pathloss exponent.
    pub alpha_d: f64,
    /// Uplink pathloss exponent.
    pub alpha_u: f64,
    /// Reference attenuation at 1 m (linear, e.g. `1e-3` for 30 dB).
    pub atten_ref: f64,
    /// Bandwidth (Hz).
    pub bandwidth: f64,
    /// Noise power spectral density (linear mW per Hz).
    pub noise_psd: f64,
    /// Energy-harvesting efficiency `θ` shared by all users.
    pub theta: f64,
    /// SINR gap `Γ` (linear).
    pub gap: f64,
    /// Self-interference cancellation shortfall `φ` (linear).
    pub phi: f64,
    /// Passband leakage `ε` (linear).
    pub eps: f64,
    /// Processing leakage `β` (linear).
    pub beta: f64,
    /// Average transmit power budget (mW).
    pub p_avg: f64,
    /// Peak transmit power (mW; may be `f64::INFINITY`).
    pub p_peak: f64,
    /// Base RNG seed.
    pub seed: u64,
    /// Monte-Carlo realization count.
    pub realizations: usize,
}

impl ScenarioConfig {
    /// Checks the scenario invariants.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let positive = [
            ("d_min", self.d_min),
            ("d_max", self.d_max),
            ("atten_ref", self.atten_ref),
            ("bandwidth", self.bandwidth),
            ("noise_psd", self.noise_psd),
            ("theta", self.theta),
            ("gap", self.gap),
            ("p_avg", self.p_avg),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ModelError::InvalidParameter {
                    name,
                    value: v,
                    constraint: "finite and > 0",
                }
                .into());
            }
        }
        let nonneg = [
            ("alpha_d", self.alpha_d),
            ("alpha_u", self.alpha_u),
            ("phi", self.phi),
            ("eps", self.eps),
            ("beta", self.beta),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ModelError::InvalidParameter {
                    name,
                    value: v,
                    constraint: "finite and >= 0",
                }
                .into());
            }
        }
        if self.d_min > self.d_max {
            return Err(ModelError::InvalidParameter {
                name: "d_min",
                value: self.d_min,
                constraint: "<= d_max",
            }
            .into());
        }
        if self.num_users == 0 {
            return Err(ModelError::InvalidParameter {
                name: "num_users",
                value: 0.0,
                constraint: ">= 1",
            }
            .into());
        }
        if self.realizations == 0 {
            return Err(ModelError::InvalidParameter {
                name: "realizations",
                value: 0.0,
                constraint: ">= 1",
            }
            .into());
        }
        if !(self.p_peak >= self.p_avg) {
            return Err(ModelError::InvalidParameter {
                name: "p_peak",
                value: self.p_peak,
                constraint: ">= p_avg",
            }
            .into());
        }
        Ok(())
    }

    /// Receiver noise power `σ² = N₀·bandwidth` (mW).
    pub fn sigma2(&self) -> f64 {
        self.noise_psd * self.bandwidth
    }

    /// Residual self-interference coefficient `γ = φ·(ε + β)`.
    pub fn si_gamma(&self) -> f64 {
        self.phi * (self.eps + self.beta)
    }

    /// System parameters at the configured budget with the given weights.
    pub fn params(&self, weights: Vec<f64>) -> Result<SystemParams, ExperimentError> {
        self.params_with_budget(self.p_avg, weights)
    }

    /// System parameters at a swept budget; the peak scales with the budget
    /// so the configured `P_peak/P_avg` ratio is preserved.
    pub fn params_with_budget(
        &self,
        p_avg: f64,
        weights: Vec<f64>,
    ) -> Result<SystemParams, ExperimentError> {
        self.validate()?;
        let p_peak = if self.p_peak.is_finite() {
            self.p_peak / self.p_avg * p_avg
        } else {
            f64::INFINITY
        };
        Ok(SystemParams::new(
            p_avg,
            p_peak,
            self.sigma2(),
            self.gap,
            vec![self.theta; self.num_users],
            weights,
            self.si_gamma(),
        )?)
    }
}

/// One link's power gain `A_ref·ρ·D^(−α)`.
fn link_gain(atten_ref: f64, rho: f64, d: f64, alpha: f64) -> f64 {
    atten_ref * rho * d.powf(-alpha)
}

/// A fresh RNG stream keyed by `(seed, realization, user, tag)`, independent
/// of any other stream. The key is whitened through splitmix64 so that
/// adjacent counters land on unrelated cipher seeds.
fn keyed_stream(seed: u64, realization: u64, user: u64, tag: u64) -> ChaCha8Rng {
    let mut state = seed;
    let mut out = [0u8; 32];
    for (word, chunk) in [realization, user, tag, 0x5750_434Eu64]
        .iter()
        .zip(out.chunks_mut(8))
    {
        state = state.wrapping_add(0x9E3779B97F4A7C15).wrapping_add(*word);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^= z >> 31;
        chunk.copy_from_slice(&z.to_le_bytes());
    }
    ChaCha8Rng::from_seed(out)
}

/// One user's geometry and fades for one realization:
/// `(D, ρ_D, ρ_U)`, each from its own keyed stream.
fn draw_user_links(config: &ScenarioConfig, realization: usize, user: usize) -> (f64, f64, f64) {
    let (r, u) = (realization as u64, user as u64);
    let d = Uniform::new_inclusive(config.d_min, config.d_max)
        .sample(&mut keyed_stream(config.seed, r, u, 0));
    let rho_d: f64 = Exp1.sample(&mut keyed_stream(config.seed, r, u, 1));
    let rho_u: f64 = Exp1.sample(&mut keyed_stream(config.seed, r, u, 2));
    (d, rho_d, rho_u)
}

/// Draws one realization's end-to-end channel state.
///
/// Deterministic in `(config.seed, realization)`: the same pair always
/// produces the same gains, independent of call order or threading.
pub fn draw_channels(
    config: &ScenarioConfig,
    realization: usize,
) -> Result<ChannelState, ExperimentError> {
    config.validate()?;
    let h: Vec<f64> = (0..config.num_users)
        .map(|i| {
            let (d, rho_d, rho_u) = draw_user_links(config, realization, i);
            link_gain(config.atten_ref, rho_d, d, config.alpha_d)
                * link_gain(config.atten_ref, rho_u, d, config.alpha_u)
        })
        .collect();
    let params = config.params(vec![1.0; config.num_users])?;
    Ok(ChannelState::new(h, &params)?)
}

/// Dispatches one solve in the requested operating mode. Full-duplex with
/// residual self-interference warm-starts from the perfect-cancellation
/// optimum, as the alternating scheme requires.
pub fn solve_mode(
    mode: Mode,
    params: &SystemParams,
    channels: &ChannelState,
) -> Result<SolverResult, ExperimentError> {
    let fd = |p: &SystemParams, c: &ChannelState| -> Result<SolverResult, FdError> {
        if p.has_finite_peak() {
            fd_perfect::solve(p, c, SOLVE_TOL)
        } else {
            fd_perfect::solve_infinite_peak(p, c)
        }
    };
    let ctx = |m: Mode| format!("mode {}", m.name());
    match mode {
        Mode::FdPerfect => fd(params, channels).map_err(|e| ExperimentError::Solve {
            context: ctx(mode),
            message: e.to_string(),
        }),
        Mode::FdSi => {
            let init = fd(params, channels).map_err(|e| ExperimentError::Solve {
                context: format!("{} warm start", ctx(mode)),
                message: e.to_string(),
            })?;
            fd_si::solve(params, channels, &init, &StepConfig::default()).map_err(
                |e: SiError| ExperimentError::Solve {
                    context: ctx(mode),
                    message: e.to_string(),
                },
            )
        }
        Mode::Hd => {
            hd::solve(params, channels, SOLVE_TOL).map_err(|e: HdError| ExperimentError::Solve {
                context: ctx(mode),
                message: e.to_string(),
            })
        }
    }
}

/// One point of a two-user rate-region sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRegionPoint {
    /// Weight of user 1 (`ω = (w_1, 1 − w_1)`).
    pub w1: f64,
    /// Achieved per-user rates at that weighting (bps/Hz).
    pub rates: (f64, f64),
}

/// Sweeps `ω = (w, 1−w)` over `m ≥ 2` evenly spaced weights in `[0, 1]` and
/// solves the two-user instance per weight, in ascending `w` order.
pub fn rate_region(
    params: &SystemParams,
    channels: &ChannelState,
    mode: Mode,
    m: usize,
) -> Result<Vec<RateRegionPoint>, ExperimentError> {
    if params.num_users() != 2 {
        return Err(ExperimentError::UnsupportedUserCount {
            op: "rate_region",
            expected: 2,
            got: params.num_users(),
        });
    }
    if m < 2 {
        return Err(ModelError::InvalidParameter {
            name: "weight grid",
            value: m as f64,
            constraint: ">= 2 points",
        }
        .into());
    }
    (0..m)
        .map(|j| {
            let w = j as f64 / (m - 1) as f64;
            let weighted = params.with_weights(vec![w, 1.0 - w])?;
            let sol = solve_mode(mode, &weighted, channels).map_err(|e| match e {
                ExperimentError::Solve { context, message } => ExperimentError::Solve {
                    context: format!("{context}, w1 = {w}"),
                    message,
                },
                other => other,
            })?;
            Ok(RateRegionPoint {
                w1: w,
                rates: (sol.rates[0], sol.rates[1]),
            })
        })
        .collect()
}

/// Drops points dominated in both coordinates, leaving a Pareto frontier
/// (ties kept once, first occurrence wins).
pub fn pareto_filter(points: &[RateRegionPoint]) -> Vec<RateRegionPoint> {
    let mut kept: Vec<RateRegionPoint> = Vec::new();
    for p in points {
        let dominated = points.iter().any(|q| {
            q.rates.0 >= p.rates.0
                && q.rates.1 >= p.rates.1
                && (q.rates.0 > p.rates.0 || q.rates.1 > p.rates.1)
        });
        let duplicate = kept.iter().any(|q| q.rates == p.rates);
        if !dominated && !duplicate {
            kept.push(p.clone());
        }
    }
    kept
}

/// One Monte-Carlo table row: the sample mean and standard error of the sum
/// rate over the successful realizations at one `(budget, mode)` point.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloRow {
    /// Swept average-power budget (dBm).
    pub p_avg_dbm: f64,
    /// Operating mode.
    pub mode: Mode,
    /// Sample mean sum rate (bps/Hz).
    pub mean_sumrate: f64,
    /// Standard error of the mean (0 for a single realization).
    pub stderr: f64,
    /// Number of successful realizations behind the row.
    pub realizations: usize,
}

/// A `(budget, mode)` point dropped for exceeding the failure budget.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedPoint {
    /// Swept average-power budget (dBm).
    pub p_avg_dbm: f64,
    /// Operating mode.
    pub mode: Mode,
    /// Failed realization count.
    pub failures: usize,
}

/// Monte-Carlo sweep output: rows in `(budget, mode)` order plus any points
/// that failed too often to report.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloTable {
    /// Emitted rows, sorted by budget then mode.
    pub rows: Vec<MonteCarloRow>,
    /// Points with more than 5% failed realizations.
    pub skipped: Vec<SkippedPoint>,
}

/// Paired Monte-Carlo averaging of equal-weight sum rates.
///
/// Each realization draws its channels once and reuses the draw across every
/// mode and swept budget, so compared curves share their randomness.
/// Realizations run in parallel; the table is assembled in deterministic
/// index order. A `(budget, mode)` row is emitted only when at least 95% of
/// the realizations solved successfully; failures land in `skipped`.
pub fn monte_carlo(
    config: &ScenarioConfig,
    modes: &[Mode],
    sweep_dbm: &[f64],
) -> Result<MonteCarloTable, ExperimentError> {
    config.validate()?;
    if modes.is_empty() || sweep_dbm.is_empty() {
        return Err(ModelError::InvalidParameter {
            name: "sweep",
            value: 0.0,
            constraint: "at least one mode and one budget point",
        }
        .into());
    }
    let n = config.realizations;
    let points: Vec<(f64, Mode)> = sweep_dbm
        .iter()
        .flat_map(|&dbm| modes.iter().map(move |&m| (dbm, m)))
        .collect();

    // realization-major matrix of per-point outcomes
    let outcomes: Vec<Vec<Option<f64>>> = (0..n)
        .into_par_iter()
        .map(|r| -> Result<Vec<Option<f64>>, ExperimentError> {
            let channels = draw_channels(config, r)?;
            let weights = vec![1.0; config.num_users];
            points
                .iter()
                .map(|&(dbm, mode)| {
                    let params = config.params_with_budget(dbm_to_mw(dbm), weights.clone())?;
                    Ok(solve_mode(mode, &params, &channels).ok().map(|s| s.wsr))
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (pi, &(dbm, mode)) in points.iter().enumerate() {
        let values: Vec<f64> = outcomes.iter().filter_map(|row| row[pi]).collect();
        let ok = values.len();
        if (ok as f64) < MIN_SUCCESS_FRACTION * n as f64 {
            skipped.push(SkippedPoint {
                p_avg_dbm: dbm,
                mode,
                failures: n - ok,
            });
            continue;
        }
        let mean = values.iter().sum::<f64>() / ok as f64;
        let stderr = if ok > 1 {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / (ok as f64 * (ok as f64 - 1.0));
            var.sqrt()
        } else {
            0.0
        };
        rows.push(MonteCarloRow {
            p_avg_dbm: dbm,
            mode,
            mean_sumrate: mean,
            stderr,
            realizations: ok,
        });
    }
    Ok(MonteCarloTable { rows, skipped })
}

/// Convenience: the rows grouped as `(p_avg_dbm, mode) → mean` for tests.
pub fn row_index(table: &MonteCarloTable) -> BTreeMap<(u64, Mode), (f64, f64)> {
    table
        .rows
        .iter()
        .map(|r| ((r.p_avg_dbm.to_bits(), r.mode), (r.mean_sumrate, r.stderr)))
        .collect()
}
