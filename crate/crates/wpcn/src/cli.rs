//! Command-line front end: loads flat `key = value` configuration files,
//! dispatches the solvers and experiment sweeps, and writes CSV.
//!
//! Subcommands:
//!
//! * `solve` — one instance in one mode; emits the per-slot schedule
//!   (`slot,tau,power,energy`) plus a trailing `# wsr=…` comment.
//! * `rate-region` — two-user weight sweep; emits `w1,r1_bps_hz,r2_bps_hz`.
//! * `monte-carlo` — paired seeded averaging over channel realizations;
//!   emits `p_avg_dbm,mode,mean_sumrate_bps_hz,stderr,realizations`.
//! * `verify` — cross-checks the solvers against exhaustive grid references
//!   and reports one pass/fail row per applicable check.
//!
//! Exit codes: `0` success, `1` usage error (unknown flag, malformed or
//! missing config, write failure), `2` solver non-convergence or failed
//! verification. All numeric output uses 9 significant digits with a dot
//! decimal separator and line-feed endings, so re-running a command with
//! identical inputs reproduces byte-identical files. The `WPCN_THREADS`
//! environment variable caps internal parallelism (`0` or unset leaves the
//! hardware default).

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Once;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::config::{parse_config, ConfigError, RunConfig};
use crate::experiments::{
    draw_channels, monte_carlo, mw_to_dbm, rate_region, solve_mode, ExperimentError, Mode,
};
use crate::model::{validate_allocation, ChannelState, ModelError, SystemParams};
use crate::oracle::{self, OracleError};

/// Successful run.
pub const EXIT_OK: i32 = 0;
/// Usage problem: bad flags, malformed config, I/O failure.
pub const EXIT_USAGE: i32 = 1;
/// A solver failed to converge, or verification found a mismatch.
pub const EXIT_SOLVER: i32 = 2;

/// Grid resolution used by `verify` (plus the oracle's built-in 10× zoom).
const VERIFY_GRID_N: usize = 100;
/// `verify` tolerance against the grid references.
const VERIFY_GRID_TOL: f64 = 1e-2;
/// `verify` tolerance for the zero-leakage reduction and feasibility.
const VERIFY_EXACT_TOL: f64 = 1e-6;

#[derive(Parser, Debug)]
#[command(
    name = "wpcn",
    version,
    about = "Wireless-powered network scheduling: solvers, rate regions, Monte-Carlo sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one instance and print the per-slot schedule.
    Solve(SolveArgs),
    /// Trace a two-user rate region over an even weight grid.
    RateRegion(RegionArgs),
    /// Average sum rates over seeded channel realizations.
    MonteCarlo(TableArgs),
    /// Cross-check the solvers against exhaustive grid references.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Operating mode: fd-perfect, fd-si, or hd.
    #[arg(long, value_parser = mode_arg)]
    mode: Mode,
    /// Flat key = value configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Realization index when channels are drawn rather than given inline.
    #[arg(long, default_value_t = 0)]
    realization: usize,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RegionArgs {
    /// Operating mode: fd-perfect, fd-si, or hd.
    #[arg(long, value_parser = mode_arg)]
    mode: Mode,
    /// Flat key = value configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Realization index when channels are drawn rather than given inline.
    #[arg(long, default_value_t = 0)]
    realization: usize,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TableArgs {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Realization index when channels are drawn rather than given inline.
    #[arg(long, default_value_t = 0)]
    realization: usize,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn mode_arg(s: &str) -> Result<Mode, String> {
    Mode::parse(s).ok_or_else(|| format!("expected fd-perfect, fd-si, or hd, got `{s}`"))
}

/// Failures after argument parsing, split by exit code.
#[derive(Debug)]
enum CliError {
    /// Exit 1: configuration or I/O problems.
    User(String),
    /// Exit 2: a solver failed to converge.
    Solver(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::User(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::User(e.to_string())
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        CliError::User(e.to_string())
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Solve { .. } => CliError::Solver(e.to_string()),
            other => CliError::User(other.to_string()),
        }
    }
}

/// One number, 9 significant digits, locale-independent.
fn num(x: f64) -> String {
    format!("{x:.8e}")
}

static THREAD_CAP: Once = Once::new();

/// Applies the `WPCN_THREADS` cap once per process; `0`, unset, or
/// unparseable values leave the hardware default.
fn init_threads() {
    THREAD_CAP.call_once(|| {
        if let Some(n) = std::env::var("WPCN_THREADS")
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
        {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    });
}

/// Entry point: parses `argv`, runs the subcommand, returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    init_threads();

    // Buffer the CSV so a failed run never leaves a partial file behind.
    let mut buf = Vec::new();
    match execute(&cli.command, &mut buf) {
        Ok(code) => {
            let flushed = match out_path(&cli.command) {
                Some(path) => fs::write(path, &buf)
                    .map_err(|e| format!("cannot write {}: {e}", path.display())),
                None => io::stdout()
                    .write_all(&buf)
                    .and_then(|()| io::stdout().flush())
                    .map_err(|e| format!("cannot write to stdout: {e}")),
            };
            match flushed {
                Ok(()) => code,
                Err(msg) => {
                    eprintln!("error: {msg}");
                    EXIT_USAGE
                }
            }
        }
        Err(CliError::User(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Solver(msg)) => {
            eprintln!("error: {msg}");
            EXIT_SOLVER
        }
    }
}

fn out_path(command: &Command) -> Option<&PathBuf> {
    match command {
        Command::Solve(a) => a.out.as_ref(),
        Command::RateRegion(a) => a.out.as_ref(),
        Command::MonteCarlo(a) => a.out.as_ref(),
        Command::Verify(a) => a.out.as_ref(),
    }
}

/// Runs one subcommand, writing CSV to `out`. Returns the suggested exit
/// code: verification mismatches still produce a full report before the
/// nonzero code.
fn execute(command: &Command, out: &mut dyn Write) -> Result<i32, CliError> {
    match command {
        Command::Solve(a) => cmd_solve(a, out),
        Command::RateRegion(a) => cmd_rate_region(a, out),
        Command::MonteCarlo(a) => cmd_monte_carlo(a, out),
        Command::Verify(a) => cmd_verify(a, out),
    }
}

fn line(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    writeln!(out, "{text}").map_err(|e| CliError::User(format!("write failure: {e}")))
}

fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::User(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| CliError::User(format!("config {}: {e}", path.display())))
}

/// Builds the instance a command operates on: inline channels when the file
/// pins `h`, otherwise the drawn realization of the configured scenario.
fn instance_for(
    cfg: &RunConfig,
    realization: usize,
) -> Result<(SystemParams, ChannelState), CliError> {
    if cfg.has_inline_channels() {
        return Ok(cfg.instance()?);
    }
    let scenario = cfg.scenario()?;
    let channels = draw_channels(&scenario, realization)?;
    let weights = cfg
        .weights
        .clone()
        .unwrap_or_else(|| vec![1.0; scenario.num_users]);
    let params = scenario.params(weights)?;
    Ok((params, channels))
}

fn cmd_solve(a: &SolveArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let cfg = load_config(&a.config)?;
    let (params, channels) = instance_for(&cfg, a.realization)?;
    let sol = solve_mode(a.mode, &params, &channels)?;
    if !sol.converged {
        return Err(CliError::Solver(format!(
            "{} solver did not converge within {} iterations",
            a.mode.name(),
            sol.iterations
        )));
    }
    line(out, "slot,tau,power,energy")?;
    let alloc = &sol.allocation;
    for slot in 0..alloc.num_slots() {
        line(
            out,
            &format!(
                "{slot},{},{},{}",
                num(alloc.tau()[slot]),
                num(alloc.power(slot)),
                num(alloc.energy(slot))
            ),
        )?;
    }
    line(out, &format!("# wsr={}", num(sol.wsr)))?;
    Ok(EXIT_OK)
}

fn cmd_rate_region(a: &RegionArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let cfg = load_config(&a.config)?;
    let (params, channels) = instance_for(&cfg, a.realization)?;
    let m = cfg.weight_grid.unwrap_or(21);
    let points = rate_region(&params, &channels, a.mode, m)?;
    line(out, "w1,r1_bps_hz,r2_bps_hz")?;
    for p in &points {
        line(
            out,
            &format!("{},{},{}", num(p.w1), num(p.rates.0), num(p.rates.1)),
        )?;
    }
    Ok(EXIT_OK)
}

fn cmd_monte_carlo(a: &TableArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let cfg = load_config(&a.config)?;
    if cfg.has_inline_channels() {
        return Err(CliError::User(
            "monte-carlo draws channels from the scenario; remove `h`".to_string(),
        ));
    }
    let scenario = cfg.scenario()?;
    let modes = cfg
        .modes
        .clone()
        .unwrap_or_else(|| vec![Mode::FdPerfect, Mode::FdSi, Mode::Hd]);
    let sweep = cfg
        .sweep_dbm
        .clone()
        .unwrap_or_else(|| vec![mw_to_dbm(scenario.p_avg)]);
    let table = monte_carlo(&scenario, &modes, &sweep)?;
    for s in &table.skipped {
        eprintln!(
            "warning: skipped p_avg = {} dBm, mode {}: {} of {} realizations failed",
            s.p_avg_dbm,
            s.mode.name(),
            s.failures,
            scenario.realizations
        );
    }
    if table.rows.is_empty() {
        return Err(CliError::Solver(
            "every sweep point exceeded the realization-failure budget".to_string(),
        ));
    }
    line(out, "p_avg_dbm,mode,mean_sumrate_bps_hz,stderr,realizations")?;
    for r in &table.rows {
        line(
            out,
            &format!(
                "{},{},{},{},{}",
                num(r.p_avg_dbm),
                r.mode.name(),
                num(r.mean_sumrate),
                num(r.stderr),
                r.realizations
            ),
        )?;
    }
    Ok(EXIT_OK)
}

fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let cfg = load_config(&a.config)?;
    let (params, channels) = instance_for(&cfg, a.realization)?;
    let k = params.num_users();
    let mut failures = 0usize;
    line(out, "check,result,reference,abs_err,tol,status")?;
    let mut report = |out: &mut dyn Write,
                      check: &str,
                      got: f64,
                      want: f64,
                      tol: f64|
     -> Result<(), CliError> {
        let err = (got - want).abs();
        let ok = err <= tol;
        if !ok {
            failures += 1;
        }
        line(
            out,
            &format!(
                "{check},{},{},{},{},{}",
                num(got),
                num(want),
                num(err),
                num(tol),
                if ok { "pass" } else { "fail" }
            ),
        )
    };

    // Grid cross-checks where the exhaustive references apply.
    if k == 2 {
        let sol = solve_mode(Mode::FdPerfect, &params, &channels)?;
        let (grid_wsr, _) = oracle::grid_fd_nosi(&params, &channels, VERIFY_GRID_N)?;
        report(out, "fd-perfect-vs-grid", sol.wsr, grid_wsr, VERIFY_GRID_TOL)?;
    }
    if (1..=3).contains(&k) {
        let sol = solve_mode(Mode::Hd, &params, &channels)?;
        let (grid_wsr, _) = oracle::grid_hd(&params, &channels, VERIFY_GRID_N)?;
        report(out, "hd-vs-grid", sol.wsr, grid_wsr, VERIFY_GRID_TOL)?;
    }

    // Leak-free full duplex must reproduce the perfect-cancellation optimum.
    let clean = params.with_si_gamma(0.0)?;
    let fd = solve_mode(Mode::FdPerfect, &clean, &channels)?;
    let si = solve_mode(Mode::FdSi, &clean, &channels)?;
    report(out, "fd-si-zero-leak-reduction", si.wsr, fd.wsr, VERIFY_EXACT_TOL)?;

    // Every mode's schedule must satisfy the resource constraints.
    for mode in [Mode::FdPerfect, Mode::FdSi, Mode::Hd] {
        let sol = solve_mode(mode, &params, &channels)?;
        let residual = validate_allocation(&sol.allocation, &params)?.max_residual();
        report(
            out,
            &format!("{}-feasible", mode.name()),
            residual,
            0.0,
            VERIFY_EXACT_TOL,
        )?;
    }

    if failures > 0 {
        eprintln!("error: {failures} verification check(s) failed");
        Ok(EXIT_SOLVER)
    } else {
        Ok(EXIT_OK)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write_cfg(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
        let path = dir.path().join(name);
        fs::write(&path, text).unwrap();
        path
    }

    fn run_capture(command: &Command) -> (i32, String) {
        let mut buf = Vec::new();
        let code = execute(command, &mut buf).unwrap();
        (code, String::from_utf8(buf).unwrap())
    }

    const TWO_USER_INSTANCE: &str = "h = 0.03, 0.01\n\
                                     sigma2 = 1\n\
                                     gap = 1\n\
                                     theta = 1\n\
                                     p_avg = 100\n\
                                     p_peak = 200\n";

    #[test]
    fn solve_emits_schedule_and_wsr_comment() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_cfg(&dir, "inst.cfg", TWO_USER_INSTANCE);
        let cmd = Command::Solve(SolveArgs {
            mode: Mode::FdPerfect,
            config: cfg,
            realization: 0,
            out: None,
        });
        let (code, text) = run_capture(&cmd);
        assert_eq!(code, EXIT_OK);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "slot,tau,power,energy");
        assert_eq!(lines.len(), 5, "header + 3 slots + wsr comment");
        assert!(lines[4].starts_with("# wsr="));
        let wsr: f64 = lines[4].trim_start_matches("# wsr=").parse().unwrap();
        assert!(
            (wsr - 1.8119218433132969).abs() < 1e-7,
            "known optimum for this instance, got {wsr}"
        );
        assert!(text.ends_with('\n'), "line-feed terminated");
    }

    #[test]
    fn hd_solve_pins_the_broadcast_power_to_the_peak() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_cfg(&dir, "inst.cfg", TWO_USER_INSTANCE);
        let cmd = Command::Solve(SolveArgs {
            mode: Mode::Hd,
            config: cfg,
            realization: 0,
            out: None,
        });
        let (code, text) = run_capture(&cmd);
        assert_eq!(code, EXIT_OK);
        let slot0: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        let power: f64 = slot0[2].parse().unwrap();
        assert!((power - 200.0).abs() < 1e-6, "charging power {power}");
    }

    #[test]
    fn rate_region_respects_the_weight_grid_key() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_cfg(
            &dir,
            "region.cfg",
            &format!("{TWO_USER_INSTANCE}weight_grid = 5\n"),
        );
        let cmd = Command::RateRegion(RegionArgs {
            mode: Mode::Hd,
            config: cfg,
            realization: 0,
            out: None,
        });
        let (code, text) = run_capture(&cmd);
        assert_eq!(code, EXIT_OK);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "w1,r1_bps_hz,r2_bps_hz");
        assert_eq!(lines.len(), 6, "header + 5 weights");
        assert!(
            lines[1].starts_with("0.00000000e0,"),
            "sweep starts at w1 = 0, got {}",
            lines[1]
        );
    }

    const SCENARIO: &str = "num_users = 2\n\
                            d_min = 5\n\
                            d_max = 10\n\
                            alpha_d = 2\n\
                            alpha_u = 2\n\
                            atten_ref_db = -30\n\
                            bandwidth = 1e6\n\
                            noise_psd_dbm = -160\n\
                            theta = 0.5\n\
                            gamma_gap_db = 9.8\n\
                            p_avg_dbm = 20\n\
                            p_peak_dbm = 23.0102999566398\n\
                            seed = 5\n\
                            realizations = 6\n\
                            modes = fd-perfect, hd\n\
                            sweep_dbm = 16, 20\n";

    #[test]
    fn monte_carlo_tables_are_byte_identical_across_runs() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_cfg(&dir, "mc.cfg", SCENARIO);
        let cmd = Command::MonteCarlo(TableArgs {
            config: cfg,
            out: None,
        });
        let (code, first) = run_capture(&cmd);
        assert_eq!(code, EXIT_OK);
        let (_, second) = run_capture(&cmd);
        assert_eq!(first, second, "identical config must reproduce bytes");
        let lines: Vec<&str> = first.lines().collect();
        assert_eq!(lines[0], "p_avg_dbm,mode,mean_sumrate_bps_hz,stderr,realizations");
        assert_eq!(lines.len(), 5, "header + 2 budgets × 2 modes");
        assert!(lines[1].contains(",fd-perfect,"));
        assert!(lines[2].contains(",hd,"));
    }

    #[test]
    fn verify_passes_on_a_reference_instance() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_cfg(&dir, "inst.cfg", TWO_USER_INSTANCE);
        let cmd = Command::Verify(VerifyArgs {
            config: cfg,
            realization: 0,
            out: None,
        });
        let (code, text) = run_capture(&cmd);
        assert_eq!(code, EXIT_OK, "all checks should pass:\n{text}");
        assert!(text.lines().count() >= 6, "header + at least 5 checks");
        assert!(!text.contains(",fail"), "no failed rows:\n{text}");
        assert!(text.contains("fd-perfect-vs-grid"));
        assert!(text.contains("hd-vs-grid"));
        assert!(text.contains("fd-si-zero-leak-reduction"));
    }

    #[test]
    fn exit_codes_follow_the_contract() {
        // Unknown flag → usage.
        assert_eq!(run(["wpcn", "solve", "--bogus"]), EXIT_USAGE);
        // Help is not an error.
        assert_eq!(run(["wpcn", "--help"]), EXIT_OK);
        // Missing config file → usage, message carries the filename.
        assert_eq!(
            run([
                "wpcn",
                "solve",
                "--mode",
                "fd-perfect",
                "--config",
                "/nonexistent/nothing.cfg"
            ]),
            EXIT_USAGE
        );
        // Bad mode value → usage.
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_cfg(&dir, "inst.cfg", TWO_USER_INSTANCE);
        let cfg_s = cfg.to_str().unwrap();
        assert_eq!(
            run(["wpcn", "solve", "--mode", "simplex", "--config", cfg_s]),
            EXIT_USAGE
        );
        // A full run through the public entry point, writing a file.
        let out = dir.path().join("sched.csv");
        let out_s = out.to_str().unwrap();
        assert_eq!(
            run([
                "wpcn", "solve", "--mode", "hd", "--config", cfg_s, "--out", out_s
            ]),
            EXIT_OK
        );
        let body = fs::read_to_string(&out).unwrap();
        assert!(body.starts_with("slot,tau,power,energy\n"));
        // Re-running overwrites with identical bytes.
        assert_eq!(
            run([
                "wpcn", "solve", "--mode", "hd", "--config", cfg_s, "--out", out_s
            ]),
            EXIT_OK
        );
        assert_eq!(fs::read_to_string(&out).unwrap(), body);
        // Unwritable output path → usage error.
        assert_eq!(
            run([
                "wpcn",
                "solve",
                "--mode",
                "hd",
                "--config",
                cfg_s,
                "--out",
                "/nonexistent/dir/out.csv"
            ]),
            EXIT_USAGE
        );
    }

    #[test]
    fn drawn_channels_feed_the_solve_command() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_cfg(&dir, "scen.cfg", SCENARIO);
        let cmd = |r: usize| {
            Command::Solve(SolveArgs {
                mode: Mode::FdPerfect,
                config: write_cfg(&dir, "scen.cfg", SCENARIO),
                realization: r,
                out: None,
            })
        };
        let _ = cfg;
        let (code, a) = run_capture(&cmd(0));
        assert_eq!(code, EXIT_OK);
        let (_, b) = run_capture(&cmd(0));
        assert_eq!(a, b, "same realization, same bytes");
        let (_, c) = run_capture(&cmd(1));
        assert_ne!(a, c, "different realizations differ");
    }
}
