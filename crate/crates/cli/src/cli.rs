//! Command-line front end.
//!
//! Exit codes: 0 certified or command succeeded, 1 property violated,
//! 2 inconclusive, 3 usage, parse or validation error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lpvcert_core::delay::{
    delay_dependent_test, delay_independent_test, DelayDelta, DelayMode, DelayOptions, DelaySystem,
};
use lpvcert_core::model::{BoxDomain, DeltaAssignment, Interval, LpvSystem, ParameterPoint};
use lpvcert_core::pbh::{check_property_at, sweep_domain, CertifyOptions, CheckOptions, Property, SweepOptions};
use lpvcert_core::robust::{
    construct_violation, preservation_radius, stacked_norm, verify_sampled, RadiusOptions, RadiusResult,
    SampleCheck, ViolationWitness,
};
use lpvcert_core::{ComplexMatrix, Error as CoreError, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::exec::Parallel;
use crate::format::{load_delta, load_domain, load_system, LoadError, Loaded, Model};
use crate::report::{Outcome, Report};

pub const EXIT_USAGE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "lpvcert", version, about = "Structural-property certification for parameter-varying systems")]
pub struct Cli {
    /// Seed for randomized checks.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Write the report here instead of standard output.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Record wall-clock time in the report.
    #[arg(long, global = true)]
    pub timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Load and validate a system file.
    Validate(ValidateArgs),
    /// PBH sweep of a property over the parameter domain.
    Analyze(AnalyzeArgs),
    /// Preservation radius with a sampled soundness check.
    Radius(RadiusArgs),
    /// Construct a structured perturbation that destroys the property.
    Attack(AttackArgs),
    /// Delay-independent or delay-dependent test.
    DelayAnalyze(DelayArgs),
    /// Re-emit a report file.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PropertyArg {
    Controllability,
    Observability,
    OutputControllability,
    Stabilizability,
    Detectability,
    Minimality,
}

impl From<PropertyArg> for Property {
    fn from(p: PropertyArg) -> Self {
        match p {
            PropertyArg::Controllability => Property::Controllability,
            PropertyArg::Observability => Property::Observability,
            PropertyArg::OutputControllability => Property::OutputControllability,
            PropertyArg::Stabilizability => Property::Stabilizability,
            PropertyArg::Detectability => Property::Detectability,
            PropertyArg::Minimality => Property::Minimality,
        }
    }
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    pub system: PathBuf,
}

#[derive(Args, Debug)]
pub struct Common {
    /// System file.
    pub system: PathBuf,
    #[arg(long, value_enum, default_value_t = PropertyArg::Controllability)]
    pub property: PropertyArg,
    /// Domain file; overrides the domain in the system file.
    #[arg(long)]
    pub domain: Option<PathBuf>,
    /// Samples per real domain axis.
    #[arg(long, default_value_t = 9)]
    pub grid: usize,
    /// Relative rank tolerance.
    #[arg(long, default_value_t = lpvcert_core::DEFAULT_TOL)]
    pub tol: f64,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Uncertainty values; zero when absent.
    #[arg(long)]
    pub delta_file: Option<PathBuf>,
    /// Point budget of the sweep and cell budget of the cover.
    #[arg(long, default_value_t = 100_000)]
    pub budget: usize,
    #[arg(long, default_value_t = 3)]
    pub refine_depth: usize,
    /// Follow a clean sweep with finite-cover certification.
    #[arg(long)]
    pub certify: bool,
    /// Determinant floor for --certify.
    #[arg(long, default_value_t = 1e-8)]
    pub floor: f64,
}

#[derive(Args, Debug)]
pub struct RadiusArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 201)]
    pub omega_points: usize,
    /// Random admissible perturbations re-checked against the radius.
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
}

#[derive(Args, Debug)]
pub struct AttackArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 201)]
    pub omega_points: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Independent,
    Dependent,
}

#[derive(Args, Debug)]
pub struct DelayArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value_t = ModeArg::Independent)]
    pub mode: ModeArg,
    /// State delays for dependent mode, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub delays: Vec<f64>,
    /// Input delays for dependent mode, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub input_delays: Vec<f64>,
    /// `lo,hi` range of Re s searched by the cover.
    #[arg(long, value_parser = parse_interval, allow_hyphen_values = true, requires = "omega_box")]
    pub sigma_box: Option<Interval>,
    /// `lo,hi` range of Im s searched by the cover.
    #[arg(long, value_parser = parse_interval, allow_hyphen_values = true, requires = "sigma_box")]
    pub omega_box: Option<Interval>,
    #[arg(long, default_value_t = 1e-8)]
    pub floor: f64,
    /// Cover cells.
    #[arg(long, default_value_t = 100_000)]
    pub budget: usize,
    /// Matching slack for lifted witnesses.
    #[arg(long, default_value_t = 1e-3)]
    pub screen_tol: f64,
    /// Uncertainty values of the undelayed part; zero when absent.
    #[arg(long)]
    pub delta_file: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Text,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Report file written by another subcommand.
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,
}

fn parse_interval(s: &str) -> Result<Interval, String> {
    let (lo, hi) = s.split_once(',').ok_or("expected lo,hi")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("{e}"))?;
    Interval::new(lo, hi).map_err(|e| e.to_string())
}

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// Parses `args` (program name first) and runs the command. Reports go to
/// `out` unless `--output` is given; diagnostics go to `err`.
pub fn run_command<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32, Failure> {
    let start = Instant::now();
    let exec = Parallel::new(cli.jobs).map_err(|e| Failure::Usage(e.to_string()))?;
    let mut report = match &cli.command {
        Command::Validate(a) => validate(a)?,
        Command::Analyze(a) => analyze(a, &exec)?,
        Command::Radius(a) => radius(a, cli.seed, &exec)?,
        Command::Attack(a) => attack(a, &exec)?,
        Command::DelayAnalyze(a) => delay_analyze(a, &exec)?,
        Command::Report(a) => return reemit(a, cli.output.as_deref(), out),
    };
    if matches!(cli.command, Command::Radius(_)) {
        report.set("seed", cli.seed);
    }
    if cli.timing {
        report.elapsed_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    emit(&report.to_json(), cli.output.as_deref(), out)?;
    Ok(report.exit_code)
}

fn emit(text: &str, path: Option<&Path>, out: &mut dyn Write) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn reemit(a: &ReportArgs, path: Option<&Path>, out: &mut dyn Write) -> Result<i32, Failure> {
    let text = std::fs::read_to_string(&a.input)?;
    let report = Report::from_json(&text).map_err(|e| {
        LoadError::Parse {
            path: a.input.display().to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    })?;
    let rendered = match a.format {
        FormatArg::Json => report.to_json(),
        FormatArg::Text => report.to_text(),
    };
    emit(&rendered, path, out)?;
    Ok(0)
}

fn system_name(p: &Path) -> Option<String> {
    Some(p.display().to_string())
}

fn load(c: &Common) -> Result<Loaded, Failure> {
    let mut loaded = load_system(&c.system)?;
    if let Some(d) = &c.domain {
        loaded.domain = load_domain(d, &loaded.model)?;
    }
    Ok(loaded)
}

fn plain(loaded: &Loaded, command: &str) -> Result<(LpvSystem, BoxDomain), Failure> {
    match &loaded.model {
        Model::Plain(s) => Ok((s.clone(), loaded.domain.base.clone())),
        Model::Delayed(_) => Err(Failure::Usage(format!(
            "system has a delay section; `{command}` handles delay-free systems, use `delay-analyze`"
        ))),
    }
}

fn common_settings(r: &mut Report, c: &Common) {
    r.set("property", Property::from(c.property).name());
    r.set("grid", c.grid);
    r.set("tol", c.tol);
    if let Some(d) = &c.domain {
        r.set("domain_file", d.display().to_string());
    }
}

fn validate(a: &ValidateArgs) -> Result<Report, Failure> {
    let loaded = load_system(&a.system)?;
    let mut r = Report::new("validate", system_name(&a.system));
    let base = loaded.model.base();
    let diagnostics = match &loaded.model {
        Model::Plain(s) => s.validate(),
        Model::Delayed(d) => d.validate(),
    };
    let (q_ad, q_bd, internal, external) = match &loaded.model {
        Model::Plain(_) => (0, 0, Vec::new(), Vec::new()),
        Model::Delayed(d) => (d.q_ad(), d.q_bd(), d.internal_bounds(), d.external_bounds()),
    };
    r.finish(
        Outcome::Ok,
        &json!({
            "n": base.n,
            "m": base.m,
            "p": base.p,
            "q": base.q(),
            "q_ad": q_ad,
            "q_bd": q_bd,
            "internal_delay_bounds": internal,
            "external_delay_bounds": external,
            "real": base.is_real(),
            "bounded_domain": loaded.domain.is_bounded(),
            "diagnostics": diagnostics,
        }),
    );
    Ok(r)
}

fn analyze(a: &AnalyzeArgs, exec: &Parallel) -> Result<Report, Failure> {
    let loaded = load(&a.common)?;
    let (sys, domain) = plain(&loaded, "analyze")?;
    let delta = a.delta_file.as_ref().map(|p| load_delta(p, &sys)).transpose()?;
    let mut r = Report::new("analyze", system_name(&a.common.system));
    common_settings(&mut r, &a.common);
    r.set("budget", a.budget);
    r.set("refine_depth", a.refine_depth);
    r.set("certify", a.certify);
    if a.certify {
        r.set("floor", a.floor);
    }
    if let Some(p) = &a.delta_file {
        r.set("delta_file", p.display().to_string());
    }
    let opts = SweepOptions {
        tol: a.common.tol,
        grid: a.common.grid,
        budget: a.budget,
        refine_depth: a.refine_depth,
        delta,
        s_grid: Vec::new(),
        certify: a.certify.then_some(CertifyOptions {
            floor: a.floor,
            budget: a.budget,
            s_box: None,
        }),
    };
    let rep = sweep_domain(&sys, a.common.property.into(), &domain, &opts, exec)?;
    r.finish(Outcome::from_verdict(rep.verdict), &rep);
    Ok(r)
}

fn radius_options(c: &Common, omega_points: usize) -> RadiusOptions {
    RadiusOptions {
        tol: c.tol,
        grid: c.grid,
        omega_points,
    }
}

#[derive(Serialize)]
struct RadiusOutput {
    radius: RadiusResult,
    samples: SampleCheck,
    /// Largest stacked norm among the sampled perturbations.
    max_sample_norm: f64,
}

fn radius(a: &RadiusArgs, seed: u64, exec: &Parallel) -> Result<Report, Failure> {
    let loaded = load(&a.common)?;
    let (sys, domain) = plain(&loaded, "radius")?;
    let property: Property = a.common.property.into();
    let mut r = Report::new("radius", system_name(&a.common.system));
    common_settings(&mut r, &a.common);
    r.set("omega_points", a.omega_points);
    r.set("samples", a.samples);
    let res = match preservation_radius(&sys, &domain, property, &radius_options(&a.common, a.omega_points), exec) {
        Ok(res) => res,
        Err(CoreError::NominalPropertyFails) => {
            r.notes.push(CoreError::NominalPropertyFails.to_string());
            r.finish(Outcome::Violated, &json!({ "nominal_holds": false }));
            return Ok(r);
        }
        Err(e) => return Err(e.into()),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut deltas = Vec::with_capacity(a.samples);
    let mut max_norm: f64 = 0.0;
    for _ in 0..a.samples {
        let d = random_delta(&sys, &mut rng);
        let nu = stacked_norm(&sys, property, &d)?;
        if nu > 0.0 && res.block_bound > 0.0 {
            let scaled = d.scale(0.99 * res.block_bound * rng.gen_range(0.0..=1.0) / nu);
            max_norm = max_norm.max(stacked_norm(&sys, property, &scaled)?);
            deltas.push(scaled);
        }
    }
    let points = sample_points(&domain, &mut rng, 16);
    let check = CheckOptions {
        tol: a.common.tol,
        s_grid: Vec::new(),
    };
    let samples = verify_sampled(&sys, &res, &deltas, &points, &check, exec)?;
    let outcome = if !samples.failures.is_empty() {
        Outcome::Violated
    } else if res.block_bound > 0.0 {
        Outcome::Certified
    } else {
        Outcome::Inconclusive
    };
    r.finish(
        outcome,
        &RadiusOutput {
            radius: res,
            samples,
            max_sample_norm: max_norm,
        },
    );
    Ok(r)
}

fn random_matrix(rows: usize, cols: usize, real: bool, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let data = (0..rows * cols)
        .map(|_| {
            let re = rng.gen_range(-1.0..=1.0);
            let im = if real { 0.0 } else { rng.gen_range(-1.0..=1.0) };
            C64::new(re, im)
        })
        .collect();
    ComplexMatrix::from_vec(rows, cols, data).expect("shape matches data")
}

/// Uniform entries in `[−1, 1]` (complex unless the system is real).
fn random_delta(sys: &LpvSystem, rng: &mut ChaCha8Rng) -> DeltaAssignment {
    let mut d = sys.zero_delta();
    let real = sys.is_real();
    for ch in 0..4 {
        for row in d.deltas[ch].iter_mut() {
            for m in row.iter_mut() {
                *m = random_matrix(m.rows(), m.cols(), real, rng);
            }
        }
    }
    d
}

/// Domain center plus `k` uniform samples.
fn sample_points(domain: &BoxDomain, rng: &mut ChaCha8Rng, k: usize) -> Vec<ParameterPoint> {
    let axes = domain.axes();
    let mut pts = vec![domain.center()];
    if axes.is_empty() {
        return pts;
    }
    for _ in 0..k {
        let v: Vec<f64> = axes
            .iter()
            .map(|ax| rng.gen_range(ax.interval.lo..=ax.interval.hi))
            .collect();
        pts.push(domain.point_at(&axes, &v));
    }
    pts
}

#[derive(Serialize)]
struct AttackOutput {
    witness: ViolationWitness,
    /// The property re-checked with the witness perturbation applied.
    reverified: bool,
    /// `σ̲ / threshold` of the re-check.
    recheck_ratio: Option<f64>,
}

fn attack(a: &AttackArgs, exec: &Parallel) -> Result<Report, Failure> {
    let loaded = load(&a.common)?;
    let (sys, domain) = plain(&loaded, "attack")?;
    let property: Property = a.common.property.into();
    let mut r = Report::new("attack", system_name(&a.common.system));
    common_settings(&mut r, &a.common);
    r.set("omega_points", a.omega_points);
    match construct_violation(&sys, &domain, property, &radius_options(&a.common, a.omega_points), exec) {
        Ok(w) => {
            let check = CheckOptions {
                tol: a.common.tol,
                s_grid: Vec::new(),
            };
            let v = check_property_at(&sys, property, &w.point, &w.delta, &check)?;
            let ratio = v.tightest().map(|t| t.ratio());
            r.finish(
                Outcome::Ok,
                &AttackOutput {
                    witness: w,
                    reverified: !v.holds,
                    recheck_ratio: ratio,
                },
            );
        }
        Err(e @ CoreError::NominalAlreadyViolated) => {
            r.notes.push(e.to_string());
            r.finish(Outcome::Violated, &json!({ "nominal_holds": false }));
        }
        Err(e @ CoreError::NotExpressible) => {
            r.notes.push(e.to_string());
            r.finish(Outcome::Inconclusive, &json!({ "expressible": false }));
        }
        Err(e) => return Err(e.into()),
    }
    Ok(r)
}

fn delay_analyze(a: &DelayArgs, exec: &Parallel) -> Result<Report, Failure> {
    let loaded = load(&a.common)?;
    let dsys = match &loaded.model {
        Model::Plain(s) => DelaySystem::undelayed(s.clone()),
        Model::Delayed(d) => d.clone(),
    };
    let property: Property = a.common.property.into();
    let mut r = Report::new("delay-analyze", system_name(&a.common.system));
    common_settings(&mut r, &a.common);
    let mode = match a.mode {
        ModeArg::Independent => DelayMode::Independent,
        ModeArg::Dependent => DelayMode::Dependent,
    };
    r.set("mode", mode);
    r.set("floor", a.floor);
    r.set("budget", a.budget);
    r.set("screen_tol", a.screen_tol);
    if let (Some(s), Some(w)) = (a.sigma_box, a.omega_box) {
        r.set("sigma_box", [s.lo, s.hi]);
        r.set("omega_box", [w.lo, w.hi]);
    }
    let delta = match &a.delta_file {
        Some(p) => {
            r.set("delta_file", p.display().to_string());
            Some(DelayDelta::from_base(&dsys, load_delta(p, &dsys.base)?))
        }
        None => None,
    };
    let opts = DelayOptions {
        tol: a.common.tol,
        floor: a.floor,
        budget: a.budget,
        screen_tol: a.screen_tol,
        search_box: a.sigma_box.zip(a.omega_box),
        delta,
        grid: a.common.grid,
        ..DelayOptions::default()
    };
    let rep = match mode {
        DelayMode::Independent => {
            if !a.delays.is_empty() || !a.input_delays.is_empty() {
                return Err(Failure::Usage(String::from(
                    "--delays and --input-delays apply to --mode dependent",
                )));
            }
            delay_independent_test(&dsys, &loaded.domain, property, &opts, exec)?
        }
        DelayMode::Dependent => {
            r.set("delays", &a.delays);
            r.set("input_delays", &a.input_delays);
            delay_dependent_test(&dsys, &loaded.domain, &a.delays, &a.input_delays, property, &opts, exec)?
        }
    };
    r.finish(Outcome::from_verdict(rep.verdict), &rep);
    Ok(r)
}
