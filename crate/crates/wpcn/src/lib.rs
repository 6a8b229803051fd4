//! Weighted sum-rate maximization for wireless-powered communication
//! networks with a full-duplex or half-duplex hybrid access point.
//!
//! A hybrid access point (H-AP) broadcasts energy to `K` battery-less users
//! on the downlink; the users spend the harvested energy transmitting data
//! back over TDMA uplink slots. This crate computes weighted-sum-rate-optimal
//! frame allocations (slot durations plus per-slot broadcast energy/power)
//! for three operating regimes, and ships the experiment pipeline used to
//! study them:
//!
//! - [`model`] — parameter/channel/allocation types and achievable rates;
//! - [`scalar`] — monotone scalar equations and bisection root finding;
//! - [`ellipsoid`] — 2-D central-cut ellipsoid method for the dual searches;
//! - [`fd_perfect`] — full-duplex H-AP with perfect self-interference
//!   cancellation (convex; Lagrangian dual with closed-form inner maximizer);
//! - [`fd_si`] — full-duplex H-AP with residual self-interference
//!   (alternating time update and projected-gradient power update);
//! - [`hd`] — half-duplex H-AP (closed-form slot durations after a 1-D dual
//!   bisection; peak-power broadcast is always optimal);
//! - [`oracle`] — brute-force grid-search references for small instances;
//! - [`experiments`] — seeded channel draws, rate-region sweeps, paired
//!   Monte-Carlo averaging;
//! - [`cli`] — the `wpcn` command-line front end;
//! - [`config`] — flat `key = value` scenario files for the CLI.

pub mod cli;
pub mod config;
pub mod ellipsoid;
pub mod experiments;
pub mod fd_perfect;
pub mod fd_si;
pub mod hd;
pub mod model;
pub mod oracle;
pub mod scalar;
