//! Command-line runner: `check`, `run`, `oracle-compare`, `init`.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | kernel or operator hypotheses fail |
//! | 2 | configuration error |
//! | 3 | numerical instability |
//! | 4 | envelope fit impossible (nonpositive energy or bound) |
//! | 5 | improved case-1 bound unavailable |
//! | 6 | I/O error |
//! | 7 | a verification check failed |

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::bounds::{
    case2_condition, example_bounds, fit_bound, lemma1_verify, loglog_slope, prior_work_bounds,
    thm_case1_improved, write_verification_csv, BoundError, BoundFamily, Case2Variant, DecayBound,
    FitWindow, Lemma1Problem, TailWeight, VerificationRow,
};
use crate::config::{scaffold, ConfigError, Experiment, ExperimentConfig};
use crate::energy::{energy_trace, EnergyError, EnergyTrace};
use crate::history::{m0_case1, m0_case2};
use crate::kernels::{check_hypotheses, default_check_grid, HypothesisReport, Kernel};
use crate::simulator::{exponential_oracle, simulate, ModalTrajectory, SimConfig, SimError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_HYPOTHESES: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INSTABILITY: i32 = 3;
pub const EXIT_FIT_DOMAIN: i32 = 4;
pub const EXIT_IMPROVED_UNAVAILABLE: i32 = 5;
pub const EXIT_IO: i32 = 6;
pub const EXIT_VERIFICATION: i32 = 7;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("hypotheses not satisfied")]
    Hypotheses,
    #[error(transparent)]
    Simulation(SimError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Bound(#[from] BoundError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("verification failed: {0}")]
    Verification(String),
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Instability { .. } => CliError::Simulation(e),
            other => CliError::Config(ConfigError::Invalid(other.to_string())),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Hypotheses => EXIT_HYPOTHESES,
            CliError::Simulation(_) => EXIT_INSTABILITY,
            CliError::Energy(_) => EXIT_CONFIG,
            CliError::Bound(BoundError::FitDomain(_)) => EXIT_FIT_DOMAIN,
            CliError::Bound(BoundError::ImprovedUnavailable { .. }) => EXIT_IMPROVED_UNAVAILABLE,
            CliError::Bound(_) => EXIT_CONFIG,
            CliError::Io { .. } => EXIT_IO,
            CliError::Verification(_) => EXIT_VERIFICATION,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "memdecay", version, about = "Simulate viscoelastic memory equations and check decay envelopes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the kernel and operator hypotheses.
    Check(CommonArgs),
    /// Simulate, compute energies and fit the requested bounds.
    Run(CommonArgs),
    /// Compare against the augmented-ODE solution (exponential kernel, one mode).
    OracleCompare(CommonArgs),
    /// Write a commented configuration file.
    Init {
        /// Where to write; stdout when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "paper-example-q3")]
        preset: String,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub preset: Option<String>,
    /// Output directory (overrides the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for mode-parallel stepping.
    #[arg(long)]
    pub modes_parallel: Option<usize>,
}

impl CommonArgs {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::Invalid("give either --config or --preset, not both".into()).into())
            }
            (Some(path), None) => ExperimentConfig::from_path(path)?,
            (None, Some(name)) => ExperimentConfig::preset(name)?,
            (None, None) => return Err(ConfigError::Invalid("one of --config or --preset is required".into()).into()),
        };
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        Ok(cfg)
    }

    fn build(&self, cfg: &ExperimentConfig) -> Result<Experiment, CliError> {
        let mut exp = cfg.build()?;
        if let Some(n) = self.modes_parallel {
            if n == 0 {
                return Err(ConfigError::Invalid("--modes-parallel must be at least 1".into()).into());
            }
            exp.sim.threads = Some(n);
        }
        Ok(exp)
    }
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            print!("{summary}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Check(args) => {
            let cfg = args.load()?;
            let exp = args.build(&cfg)?;
            let report = hypothesis_report(&exp)?;
            let text = describe_hypotheses(&exp, &report);
            if report.all_pass() {
                Ok(text)
            } else {
                eprint!("{text}");
                Err(CliError::Hypotheses)
            }
        }
        Command::Run(args) => {
            let cfg = args.load()?;
            let exp = args.build(&cfg)?;
            cmd_run(&cfg, &exp)
        }
        Command::OracleCompare(args) => {
            let cfg = args.load()?;
            let exp = args.build(&cfg)?;
            cmd_oracle_compare(&cfg, &exp)
        }
        Command::Init { config, preset } => {
            let cfg = ExperimentConfig::preset(preset)?;
            let text = scaffold(&cfg)?;
            match config {
                Some(path) => {
                    write_file(path, text.as_bytes())?;
                    Ok(format!("wrote {}\n", path.display()))
                }
                None => Ok(text),
            }
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(io_err(path))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

pub fn hypothesis_report(exp: &Experiment) -> Result<HypothesisReport, CliError> {
    let (a0, _) = exp.pair.coercivity_constants();
    check_hypotheses(&exp.kernel, &exp.xi, a0, &default_check_grid())
        .map_err(|e| ConfigError::Invalid(e.to_string()).into())
}

fn describe_hypotheses(exp: &Experiment, r: &HypothesisReport) -> String {
    let (a0, a1) = exp.pair.coercivity_constants();
    let cc = exp.pair.case_constants();
    let mut s = String::new();
    let _ = writeln!(s, "kernel: {}", exp.kernel.family_name());
    let _ = writeln!(s, "modes: {}", exp.pair.modes());
    let _ = writeln!(s, "a0 = {a0:.16e}");
    let _ = writeln!(s, "a1 = {a1:.16e}");
    let _ = writeln!(s, "a2 (case B-dominated) = {:.16e}", cc.a2_case1);
    let _ = writeln!(s, "a2 (case AB-dominated) = {:.16e}", cc.a2_case2);
    if !cc.case1_stable_under_refinement {
        let _ = writeln!(s, "note: a2 for the first case grows with the number of modes");
    }
    let _ = writeln!(s, "g0 = {:.16e}", r.total_mass);
    let _ = writeln!(
        s,
        "mass condition 0 < g0 < 1/a0: {} (margin {:.16e})",
        pass_word(r.mass_pass),
        r.mass_margin
    );
    let _ = writeln!(s, "xi p = {:.16e}", exp.xi.p());
    let _ = writeln!(
        s,
        "kernel inequality g' <= -xi g^p: {} (min margin {:.16e}, {} failing points, xi nonincreasing: {})",
        pass_word(r.inequality_pass),
        r.inequality_margin,
        r.failures.len(),
        r.xi_nonincreasing
    );
    s
}

fn pass_word(b: bool) -> &'static str {
    if b {
        "pass"
    } else {
        "FAIL"
    }
}

/// Results of `run` before they are written out.
pub struct RunOutcome {
    pub trajectory: ModalTrajectory,
    pub trace: EnergyTrace,
    pub rows: Vec<VerificationRow>,
    pub report: String,
}

pub fn cmd_run(cfg: &ExperimentConfig, exp: &Experiment) -> Result<String, CliError> {
    let outcome = run_experiment(cfg, exp)?;
    let dir = &cfg.output.dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join("trajectory.csv");
    let mut w = create(&path)?;
    outcome
        .trajectory
        .write_csv(&mut w, cfg.output.trajectory_stride)
        .and_then(|_| w.flush())
        .map_err(io_err(&path))?;
    let path = dir.join("energy.csv");
    let mut w = create(&path)?;
    outcome.trace.write_csv(&mut w).and_then(|_| w.flush()).map_err(io_err(&path))?;
    let path = dir.join("verification.csv");
    let mut w = create(&path)?;
    write_verification_csv(&outcome.rows, &mut w)
        .and_then(|_| w.flush())
        .map_err(io_err(&path))?;
    write_file(&dir.join("report.txt"), outcome.report.as_bytes())?;
    let failed: Vec<&str> = outcome.rows.iter().filter(|r| !r.pass).map(|r| r.family.as_str()).collect();
    if failed.is_empty() {
        Ok(outcome.report)
    } else {
        eprint!("{}", outcome.report);
        Err(CliError::Verification(failed.join(", ")))
    }
}

/// Simulation, energies and bound fits for one experiment.
pub fn run_experiment(cfg: &ExperimentConfig, exp: &Experiment) -> Result<RunOutcome, CliError> {
    let hyp = hypothesis_report(exp)?;
    if !hyp.all_pass() {
        eprint!("{}", describe_hypotheses(exp, &hyp));
        return Err(CliError::Hypotheses);
    }
    let trajectory = simulate(&exp.sim)?;
    let trace = energy_trace(
        &trajectory,
        &exp.pair,
        &exp.kernel,
        cfg.simulation.energy_stride,
        exp.constants,
    )?;
    let mut report = describe_hypotheses(exp, &hyp);
    let e0 = trace.energy[0];
    let e2_0 = trace.energy2[0];
    let _ = writeln!(report, "m0 (B^1/2 u0) = {:.16e}", m0_case1(&exp.history, &exp.pair).unwrap_or(f64::NAN));
    let _ = writeln!(
        report,
        "m0 (A^1/2 B^1/2 u0) = {:.16e}",
        m0_case2(&exp.history, &exp.pair).unwrap_or(f64::NAN)
    );
    let _ = writeln!(report, "E(0) = {e0:.16e}");
    let _ = writeln!(report, "E2(0) = {e2_0:.16e}");
    let _ = writeln!(report, "E(T) = {:.16e}", trace.energy.last().unwrap());
    let max_rise = trace
        .energy
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let _ = writeln!(report, "largest energy increase between samples = {max_rise:.16e}");
    let floor_ok = trace
        .energy
        .iter()
        .zip(&trace.coercivity_floor)
        .all(|(e, f)| *f <= e * (1.0 + 1e-10) + 1e-300);
    let _ = writeln!(report, "coercivity floor respected: {}", pass_word(floor_ok));
    if e0 > 0.0 {
        let ratios = trace.i3.iter().zip(&trace.energy).filter(|(_, e)| **e > 0.0).map(|(i, e)| i / e);
        let (lo, hi) = ratios.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r), hi.max(r)));
        let _ = writeln!(
            report,
            "I3/E in [{lo:.16e}, {hi:.16e}] (M = {}, alpha0 = {})",
            exp.constants.m, exp.constants.alpha0
        );
    }

    let rows = if e0 == 0.0 {
        let _ = writeln!(report, "zero initial energy: every envelope holds trivially");
        exp.families
            .iter()
            .map(|f| VerificationRow {
                family: f.tag().to_string(),
                exponent: f64::NAN,
                c_star: 0.0,
                c_star_drift: 0.0,
                slope: f64::NAN,
                slope_residual: f64::NAN,
                pass: true,
            })
            .collect()
    } else {
        verify_bounds(cfg, exp, &trace, &mut report)?
    };
    if !rows.is_empty() {
        let _ = writeln!(report, "\nfamily | exponent | C* | C* drift | slope | residual | result");
        for r in &rows {
            let _ = writeln!(
                report,
                "{} | {:.16e} | {:.16e} | {:.16e} | {:.16e} | {:.16e} | {}",
                r.family,
                r.exponent,
                r.c_star,
                r.c_star_drift,
                r.slope,
                r.slope_residual,
                pass_word(r.pass)
            );
        }
    }
    Ok(RunOutcome {
        trajectory,
        trace,
        rows,
        report,
    })
}

fn polynomial_q(kernel: &Kernel) -> Option<f64> {
    match kernel {
        Kernel::Polynomial { exponent, .. } => Some(*exponent),
        _ => None,
    }
}

fn verify_bounds(
    cfg: &ExperimentConfig,
    exp: &Experiment,
    trace: &EnergyTrace,
    report: &mut String,
) -> Result<Vec<VerificationRow>, CliError> {
    let b = &cfg.bounds;
    let horizon = cfg.simulation.horizon;
    let mut window = FitWindow::new(b.fit_start, horizon);
    if let Some([lo, hi]) = b.slope_window {
        window = window.with_slope(lo, hi);
    }
    let xi = exp.xi.profile().clone();
    let p = exp.xi.p();
    let h = || TailWeight::from_kernel(&exp.kernel, &xi);
    let e0 = trace.energy[0];
    let e2_0 = trace.energy2[0];
    let mut rows = Vec::new();
    for &family in &exp.families {
        let row = match family {
            BoundFamily::Lemma1 => {
                let problem = Lemma1Problem::new(2.0 * p - 2.0, xi.clone(), h()?, 1.0, 1.0, e0, 1e6);
                let r = lemma1_verify(&problem)?;
                let (slope, residual) =
                    loglog_slope(&r.times, &r.solution, 1e4, 1e6).unwrap_or((f64::NAN, f64::NAN));
                let (bound_slope, _) = loglog_slope(&r.times, &r.bound, 1e4, 1e6)?;
                let _ = writeln!(
                    report,
                    "lemma1: alpha = {:.16e}, c1 = c2 = 1, F0 = E(0), horizon 1e6, phi inequality {}",
                    2.0 * p - 2.0,
                    pass_word(r.phi_pass)
                );
                VerificationRow {
                    family: family.tag().into(),
                    exponent: bound_slope,
                    c_star: r.envelope.c_star,
                    c_star_drift: r.envelope.drift_two_doublings,
                    slope,
                    slope_residual: residual,
                    pass: r.phi_pass && r.envelope.drift_two_doublings <= b.drift_tolerance,
                }
            }
            BoundFamily::ThmCase1First
            | BoundFamily::ThmCase1Improved
            | BoundFamily::ThmCase2First
            | BoundFamily::ThmCase2Improved => {
                let bound = match family {
                    BoundFamily::ThmCase1First => DecayBound::thm_case1_first(p, xi.clone(), h()?)?,
                    BoundFamily::ThmCase1Improved => thm_case1_improved(p, xi.clone(), h()?)?,
                    BoundFamily::ThmCase2First => {
                        DecayBound::thm_case2(p, xi.clone(), h()?, e0, e2_0, Case2Variant::First)?
                    }
                    _ => {
                        let cond = case2_condition(p, xi.clone(), h()?, e0, e2_0)?;
                        let _ = writeln!(
                            report,
                            "case-2 integrability of the first quotient: {} (reported only)",
                            if cond.converged { "holds" } else { "not observed" }
                        );
                        DecayBound::thm_case2(p, xi.clone(), h()?, e0, e2_0, Case2Variant::Improved)?
                    }
                };
                fitted_row(trace, &bound, window, b.slope_tolerance, b.drift_tolerance, None)?
            }
            BoundFamily::ExampleCase1 | BoundFamily::ExampleCase2 => {
                let q = polynomial_q(&exp.kernel).ok_or_else(|| {
                    ConfigError::Invalid(format!("{family} needs a polynomial kernel"))
                })?;
                let (c1, c2) = example_bounds(q)?;
                let bound = if family == BoundFamily::ExampleCase1 { c1 } else { c2 };
                if family == BoundFamily::ExampleCase1 {
                    let _ = writeln!(
                        report,
                        "polynomial example: envelope exponent (q^2 - q - 1)/q = {:.16e}; the comparison remark \
                         for this example writes (q^2 - q - 1)/2 = {:.16e}, which does not follow from the envelope",
                        (q * q - q - 1.0) / q,
                        (q * q - q - 1.0) / 2.0
                    );
                }
                let e = bound.exponent();
                fitted_row(trace, &bound, window, b.slope_tolerance, b.drift_tolerance, e)?
            }
            BoundFamily::PriorCase1 | BoundFamily::PriorCase2 => {
                let q = polynomial_q(&exp.kernel).ok_or_else(|| {
                    ConfigError::Invalid(format!("{family} needs a polynomial kernel"))
                })?;
                let prior = prior_work_bounds(q)?;
                let bound = if family == BoundFamily::PriorCase1 { prior.case1 } else { prior.case2 };
                let exponent = bound.exponent().unwrap();
                let mut row = fitted_row(trace, &bound, window, b.slope_tolerance, b.drift_tolerance, Some(exponent))?;
                row.pass = row.slope <= exponent - b.prior_margin;
                row
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

/// Envelope fit of `bound`; passes when the measured slope is within
/// `slope_tol` of the bound's own slope (or `exponent`) and C* is stable
/// over the last horizon doubling.
fn fitted_row(
    trace: &EnergyTrace,
    bound: &DecayBound,
    window: FitWindow,
    slope_tol: f64,
    drift_tol: f64,
    exponent: Option<f64>,
) -> Result<VerificationRow, CliError> {
    let fit = fit_bound(&trace.times, &trace.energy, bound, window)?;
    let exponent = match exponent {
        Some(e) => e,
        None => {
            let (lo, hi) = fit.window.slope_range();
            let t: Vec<f64> = trace.times.iter().copied().filter(|&t| t >= lo.max(bound.t_min()) && t <= hi).collect();
            let v = bound.evaluate_on_grid(&t)?;
            loglog_slope(&t, &v, lo, hi)?.0
        }
    };
    Ok(VerificationRow {
        family: bound.family.tag().into(),
        exponent,
        c_star: fit.c_star(),
        c_star_drift: fit.envelope.drift_last_doubling,
        slope: fit.slope,
        slope_residual: fit.slope_residual,
        pass: fit.slope <= exponent + slope_tol && fit.envelope.drift_last_doubling <= drift_tol,
    })
}

/// One row of the oracle convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub dt: f64,
    pub max_abs_err: f64,
    pub max_rel_err: f64,
    /// Error at the previous (coarser) step divided by this one.
    pub ratio: Option<f64>,
}

/// Max error of the quadrature solver against the oracle, relative to `max |u_oracle|`.
pub fn oracle_errors(sim: &SimConfig) -> Result<(ModalTrajectory, ModalTrajectory, f64, f64), CliError> {
    let solver = simulate(sim)?;
    let oracle = exponential_oracle(sim)?;
    let scale = oracle.displacement[0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let abs = solver.displacement[0]
        .iter()
        .zip(&oracle.displacement[0])
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let rel = if scale > 0.0 { abs / scale } else { abs };
    Ok((solver, oracle, abs, rel))
}

pub fn convergence_table(sim: &SimConfig) -> Result<Vec<ConvergenceRow>, CliError> {
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for k in 0..3 {
        let mut s = sim.clone();
        s.dt = sim.dt / 2f64.powi(k);
        let (_, _, abs, rel) = oracle_errors(&s)?;
        let ratio = rows.last().map(|r| r.max_abs_err / abs);
        rows.push(ConvergenceRow {
            dt: s.dt,
            max_abs_err: abs,
            max_rel_err: rel,
            ratio,
        });
    }
    Ok(rows)
}

pub fn cmd_oracle_compare(cfg: &ExperimentConfig, exp: &Experiment) -> Result<String, CliError> {
    if exp.pair.modes() != 1 {
        return Err(ConfigError::Invalid("oracle-compare needs a single mode".into()).into());
    }
    if !matches!(exp.kernel, Kernel::Exponential { .. }) {
        return Err(ConfigError::Invalid("oracle-compare needs an exponential kernel".into()).into());
    }
    let (solver, oracle, abs, rel) = oracle_errors(&exp.sim)?;
    let dir = &cfg.output.dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let scale = oracle.displacement[0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let path = dir.join("oracle_comparison.csv");
    let mut w = create(&path)?;
    let stride = cfg.output.trajectory_stride.max(1);
    (|| -> std::io::Result<()> {
        writeln!(w, "t,u_solver,u_oracle,abs_err,rel_err")?;
        for n in (0..=solver.steps).step_by(stride) {
            let (u, o) = (solver.displacement[0][n], oracle.displacement[0][n]);
            let e = (u - o).abs();
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                solver.time(n),
                u,
                o,
                e,
                if scale > 0.0 { e / scale } else { e }
            )?;
        }
        w.flush()
    })()
    .map_err(io_err(&path))?;

    let table = convergence_table(&exp.sim)?;
    let path = dir.join("convergence.csv");
    let mut w = create(&path)?;
    (|| -> std::io::Result<()> {
        writeln!(w, "dt,max_abs_err,max_rel_err,ratio")?;
        for r in &table {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{}",
                r.dt,
                r.max_abs_err,
                r.max_rel_err,
                r.ratio.map(|x| format!("{x:.16e}")).unwrap_or_default()
            )?;
        }
        w.flush()
    })()
    .map_err(io_err(&path))?;

    let mut report = String::new();
    let _ = writeln!(report, "max abs displacement error = {abs:.16e}");
    let _ = writeln!(report, "max relative displacement error = {rel:.16e}");
    let _ = writeln!(report, "dt | max abs err | max rel err | ratio");
    for r in &table {
        let _ = writeln!(
            report,
            "{:.16e} | {:.16e} | {:.16e} | {}",
            r.dt,
            r.max_abs_err,
            r.max_rel_err,
            r.ratio.map(|x| format!("{x:.16e}")).unwrap_or_else(|| "-".into())
        );
    }
    let ratios_ok = table.iter().filter_map(|r| r.ratio).all(|x| (3.3..=4.7).contains(&x));
    let _ = writeln!(report, "second-order ratios in [3.3, 4.7]: {}", pass_word(ratios_ok));
    write_file(&dir.join("oracle_report.txt"), report.as_bytes())?;
    if ratios_ok {
        Ok(report)
    } else {
        eprint!("{report}");
        Err(CliError::Verification("convergence ratios".into()))
    }
}
