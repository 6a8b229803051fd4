//! Flat `key = value` run-configuration files.
//!
//! The grammar is deliberately primitive so files stay diff-friendly and
//! parseable from any language:
//!
//! ```text
//! # comment — everything after '#' is ignored
//! num_users   = 10
//! p_avg_dbm   = 20          # unit-suffixed keys convert at parse time
//! p_peak      = inf
//! h           = 0.249, 0.025
//! modes       = fd-perfect, hd
//! ```
//!
//! Every logical field has a linear key named after the corresponding
//! struct field ([`ScenarioConfig`]/system parameters) and, where a
//! logarithmic unit is customary, a dB-suffixed alias (`p_avg_dbm`,
//! `gamma_gap_db`, `phi_db`, …) converted with `x dB(m) ↦ 10^(x/10)`.
//! Setting the same logical field through two spellings — or twice — is an
//! error, as is any unknown key; silence never reinterprets a typo.
//!
//! A parsed [`RunConfig`] assembles into either a stochastic
//! [`ScenarioConfig`] (no inline channels) or a fixed instance of
//! system parameters plus channel state (`h = …` present).

use std::collections::BTreeMap;

use thiserror::Error;

use crate::experiments::{dbm_to_mw, Mode, ScenarioConfig};
use crate::model::{ChannelState, ModelError, SystemParams};

/// Errors from parsing or assembling a run configuration.
#[derive(Debug, Error)]
pub enum ConfigError {
    /// A line is neither blank, a comment, nor `key = value`.
    #[error("line {line_no}: expected `key = value`, got `{line}`")]
    Syntax { line_no: usize, line: String },
    /// The key names no known field.
    #[error("line {line_no}: unknown key `{key}`")]
    UnknownKey { line_no: usize, key: String },
    /// The same spelling appeared twice.
    #[error("duplicate key `{key}`")]
    DuplicateKey { key: String },
    /// Two spellings of one logical field were both given.
    #[error("keys `{first}` and `{second}` set the same field")]
    ConflictingKeys { first: String, second: String },
    /// The value failed to parse or is out of range.
    #[error("key `{key}`: bad value `{value}` ({reason})")]
    InvalidValue {
        key: String,
        value: String,
        reason: &'static str,
    },
    /// A field required by the requested assembly is absent.
    #[error("missing key `{key}`")]
    MissingKey { key: &'static str },
    /// Downstream model validation failed.
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// All recognized fields of a configuration file, each optional until an
/// assembly method demands it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    /// Number of users `K`.
    pub num_users: Option<usize>,
    /// Uniform placement bounds (m).
    pub d_min: Option<f64>,
    /// Upper placement bound (m).
    pub d_max: Option<f64>,
    /// Downlink pathloss exponent.
    pub alpha_d: Option<f64>,
    /// Uplink pathloss exponent.
    pub alpha_u: Option<f64>,
    /// Reference attenuation at 1 m (linear).
    pub atten_ref: Option<f64>,
    /// Bandwidth (Hz).
    pub bandwidth: Option<f64>,
    /// Noise spectral density (mW/Hz).
    pub noise_psd: Option<f64>,
    /// Receiver noise power (mW), for dimensionless instances.
    pub sigma2: Option<f64>,
    /// Harvesting efficiency `θ`.
    pub theta: Option<f64>,
    /// SINR gap `Γ` (linear).
    pub gap: Option<f64>,
    /// Cancellation shortfall `φ` (linear).
    pub phi: Option<f64>,
    /// Passband leakage `ε` (linear).
    pub eps: Option<f64>,
    /// Processing leakage `β` (linear).
    pub beta: Option<f64>,
    /// Average power budget (mW).
    pub p_avg: Option<f64>,
    /// Peak power (mW; `inf` accepted).
    pub p_peak: Option<f64>,
    /// Base RNG seed.
    pub seed: Option<u64>,
    /// Monte-Carlo realization count.
    pub realizations: Option<usize>,
    /// Inline end-to-end channel gains (fixed-instance mode).
    pub h: Option<Vec<f64>>,
    /// Per-user objective weights.
    pub weights: Option<Vec<f64>>,
    /// Budget sweep for Monte-Carlo runs (dBm).
    pub sweep_dbm: Option<Vec<f64>>,
    /// Operating modes to run.
    pub modes: Option<Vec<Mode>>,
    /// Number of weight points in a rate-region sweep.
    pub weight_grid: Option<usize>,
}

/// `x dB → 10^(x/10)` (identical arithmetic for dBm with mW reference).
fn from_db(x: f64) -> f64 {
    dbm_to_mw(x)
}

fn parse_f64(key: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = value.parse().map_err(|_| ConfigError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: "not a number",
    })?;
    if v.is_nan() {
        return Err(ConfigError::InvalidValue {
            key: key.to_string(),
            value: value.to_string(),
            reason: "NaN is not a value",
        });
    }
    Ok(v)
}

fn parse_usize(key: &str, value: &str) -> Result<usize, ConfigError> {
    value.parse().map_err(|_| ConfigError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: "not a nonnegative integer",
    })
}

fn parse_u64(key: &str, value: &str) -> Result<u64, ConfigError> {
    value.parse().map_err(|_| ConfigError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: "not a nonnegative integer",
    })
}

fn parse_f64_list(key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    let items: Vec<f64> = value
        .split(',')
        .map(|s| parse_f64(key, s.trim()))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(ConfigError::InvalidValue {
            key: key.to_string(),
            value: value.to_string(),
            reason: "empty list",
        });
    }
    Ok(items)
}

fn parse_modes(key: &str, value: &str) -> Result<Vec<Mode>, ConfigError> {
    value
        .split(',')
        .map(|s| {
            Mode::parse(s).ok_or_else(|| ConfigError::InvalidValue {
                key: key.to_string(),
                value: s.trim().to_string(),
                reason: "expected fd-perfect, fd-si, or hd",
            })
        })
        .collect()
}

/// Parses configuration text. Order of lines is irrelevant; every key may
/// appear at most once across all of its spellings.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    // logical field name -> spelling that set it
    let mut seen: BTreeMap<&'static str, String> = BTreeMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line_no,
            line: line.to_string(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax {
                line_no,
                line: line.to_string(),
            });
        }

        // (logical field, linear value) for scalar numeric keys
        let mut scalar: Option<(&'static str, f64)> = None;
        match key {
            "num_users" => {
                note(&mut seen, "num_users", key)?;
                cfg.num_users = Some(parse_usize(key, value)?);
            }
            "seed" => {
                note(&mut seen, "seed", key)?;
                cfg.seed = Some(parse_u64(key, value)?);
            }
            "realizations" => {
                note(&mut seen, "realizations", key)?;
                cfg.realizations = Some(parse_usize(key, value)?);
            }
            "weight_grid" => {
                note(&mut seen, "weight_grid", key)?;
                cfg.weight_grid = Some(parse_usize(key, value)?);
            }
            "h" => {
                note(&mut seen, "h", key)?;
                cfg.h = Some(parse_f64_list(key, value)?);
            }
            "weights" => {
                note(&mut seen, "weights", key)?;
                cfg.weights = Some(parse_f64_list(key, value)?);
            }
            "sweep_dbm" => {
                note(&mut seen, "sweep_dbm", key)?;
                cfg.sweep_dbm = Some(parse_f64_list(key, value)?);
            }
            "modes" => {
                note(&mut seen, "modes", key)?;
                cfg.modes = Some(parse_modes(key, value)?);
            }
            "d_min" => scalar = Some(("d_min", parse_f64(key, value)?)),
            "d_max" => scalar = Some(("d_max", parse_f64(key, value)?)),
            "alpha_d" => scalar = Some(("alpha_d", parse_f64(key, value)?)),
            "alpha_u" => scalar = Some(("alpha_u", parse_f64(key, value)?)),
            "bandwidth" => scalar = Some(("bandwidth", parse_f64(key, value)?)),
            "theta" => scalar = Some(("theta", parse_f64(key, value)?)),
            "atten_ref" => scalar = Some(("atten_ref", parse_f64(key, value)?)),
            "atten_ref_db" => scalar = Some(("atten_ref", from_db(parse_f64(key, value)?))),
            "noise_psd" => scalar = Some(("noise_psd", parse_f64(key, value)?)),
            "noise_psd_dbm" => scalar = Some(("noise_psd", from_db(parse_f64(key, value)?))),
            "sigma2" => scalar = Some(("sigma2", parse_f64(key, value)?)),
            "sigma2_dbm" => scalar = Some(("sigma2", from_db(parse_f64(key, value)?))),
            "gap" => scalar = Some(("gap", parse_f64(key, value)?)),
            "gap_db" | "gamma_gap_db" => scalar = Some(("gap", from_db(parse_f64(key, value)?))),
            "phi" => scalar = Some(("phi", parse_f64(key, value)?)),
            "phi_db" => scalar = Some(("phi", from_db(parse_f64(key, value)?))),
            "eps" => scalar = Some(("eps", parse_f64(key, value)?)),
            "eps_db" => scalar = Some(("eps", from_db(parse_f64(key, value)?))),
            "beta" => scalar = Some(("beta", parse_f64(key, value)?)),
            "beta_db" => scalar = Some(("beta", from_db(parse_f64(key, value)?))),
            "p_avg" => scalar = Some(("p_avg", parse_f64(key, value)?)),
            "p_avg_dbm" => scalar = Some(("p_avg", from_db(parse_f64(key, value)?))),
            "p_peak" => scalar = Some(("p_peak", parse_f64(key, value)?)),
            "p_peak_dbm" => scalar = Some(("p_peak", from_db(parse_f64(key, value)?))),
            _ => {
                return Err(ConfigError::UnknownKey {
                    line_no,
                    key: key.to_string(),
                })
            }
        }

        if let Some((field, linear)) = scalar {
            note(&mut seen, field, key)?;
            let slot = match field {
                "d_min" => &mut cfg.d_min,
                "d_max" => &mut cfg.d_max,
                "alpha_d" => &mut cfg.alpha_d,
                "alpha_u" => &mut cfg.alpha_u,
                "atten_ref" => &mut cfg.atten_ref,
                "bandwidth" => &mut cfg.bandwidth,
                "noise_psd" => &mut cfg.noise_psd,
                "sigma2" => &mut cfg.sigma2,
                "theta" => &mut cfg.theta,
                "gap" => &mut cfg.gap,
                "phi" => &mut cfg.phi,
                "eps" => &mut cfg.eps,
                "beta" => &mut cfg.beta,
                "p_avg" => &mut cfg.p_avg,
                "p_peak" => &mut cfg.p_peak,
                _ => unreachable!("scalar fields are enumerated above"),
            };
            *slot = Some(linear);
        }
    }
    Ok(cfg)
}

/// Records which spelling set a logical field, rejecting repeats.
fn note(
    seen: &mut BTreeMap<&'static str, String>,
    field: &'static str,
    key: &str,
) -> Result<(), ConfigError> {
    if let Some(first) = seen.get(field) {
        if first == key {
            return Err(ConfigError::DuplicateKey {
                key: key.to_string(),
            });
        }
        return Err(ConfigError::ConflictingKeys {
            first: first.clone(),
            second: key.to_string(),
        });
    }
    seen.insert(field, key.to_string());
    Ok(())
}

fn require<T: Copy>(value: Option<T>, key: &'static str) -> Result<T, ConfigError> {
    value.ok_or(ConfigError::MissingKey { key })
}

impl RunConfig {
    /// Residual self-interference coefficient `γ = φ·(ε + β)`; leakage
    /// fields left unset contribute zero.
    pub fn si_gamma(&self) -> f64 {
        self.phi.unwrap_or(0.0) * (self.eps.unwrap_or(0.0) + self.beta.unwrap_or(0.0))
    }

    /// True when the file pins channels inline rather than drawing them.
    pub fn has_inline_channels(&self) -> bool {
        self.h.is_some()
    }

    /// Assembles the stochastic scenario. Requires the geometry, radio, and
    /// budget fields; `seed` defaults to 0 and `realizations` to 1, the
    /// leakage terms to 0.
    pub fn scenario(&self) -> Result<ScenarioConfig, ConfigError> {
        let cfg = ScenarioConfig {
            num_users: require(self.num_users, "num_users")?,
            d_min: require(self.d_min, "d_min")?,
            d_max: require(self.d_max, "d_max")?,
            alpha_d: require(self.alpha_d, "alpha_d")?,
            alpha_u: require(self.alpha_u, "alpha_u")?,
            atten_ref: require(self.atten_ref, "atten_ref")?,
            bandwidth: require(self.bandwidth, "bandwidth")?,
            noise_psd: require(self.noise_psd, "noise_psd")?,
            theta: require(self.theta, "theta")?,
            gap: require(self.gap, "gap")?,
            phi: self.phi.unwrap_or(0.0),
            eps: self.eps.unwrap_or(0.0),
            beta: self.beta.unwrap_or(0.0),
            p_avg: require(self.p_avg, "p_avg")?,
            p_peak: require(self.p_peak, "p_peak")?,
            seed: self.seed.unwrap_or(0),
            realizations: self.realizations.unwrap_or(1),
        };
        if let Err(crate::experiments::ExperimentError::Model(e)) = cfg.validate() {
            return Err(e.into());
        }
        Ok(cfg)
    }

    /// Assembles a fixed instance from inline channels. Requires `h`,
    /// `p_avg`, `p_peak`, `gap`, `theta`, and a noise power (`sigma2`
    /// directly or `noise_psd`·`bandwidth`); weights default to equal.
    pub fn instance(&self) -> Result<(SystemParams, ChannelState), ConfigError> {
        let h = self
            .h
            .clone()
            .ok_or(ConfigError::MissingKey { key: "h" })?;
        let k = h.len();
        if let Some(n) = self.num_users {
            if n != k {
                return Err(ConfigError::InvalidValue {
                    key: "num_users".to_string(),
                    value: n.to_string(),
                    reason: "disagrees with the length of `h`",
                });
            }
        }
        let sigma2 = match (self.sigma2, self.noise_psd, self.bandwidth) {
            (Some(s), _, _) => s,
            (None, Some(psd), Some(bw)) => psd * bw,
            _ => return Err(ConfigError::MissingKey { key: "sigma2" }),
        };
        let weights = self.weights.clone().unwrap_or_else(|| vec![1.0; k]);
        let params = SystemParams::new(
            require(self.p_avg, "p_avg")?,
            require(self.p_peak, "p_peak")?,
            sigma2,
            require(self.gap, "gap")?,
            vec![require(self.theta, "theta")?; k],
            weights,
            self.si_gamma(),
        )?;
        let channels = ChannelState::new(h, &params)?;
        Ok((params, channels))
    }
}
