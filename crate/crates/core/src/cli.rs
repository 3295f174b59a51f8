//! Command-line surface of the `choquard` binary.
//!
//! Every subcommand takes the problem exponents either as `--N --m --p --q --alpha --beta`
//! (decimals or exact fractions such as `20/9`) or as a `--preset`, optionally overridden
//! per field. A JSON run configuration can supply the same settings through `--config`.
//!
//! Exit codes: [`EXIT_OK`], [`EXIT_FAIL`], [`EXIT_USAGE`], [`EXIT_NUMERICAL`].

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::ansatz::{weighted_m_laplace_closed_form, weighted_m_laplace_fd_grid, PowerLogProfile};
use crate::error::{Error, Result};
use crate::exponents::{
    candidate_gamma_range, classify_existence, classify_profile, construct_candidate, derive_exponents, Existence,
    ProblemParams, RawParams,
};
use crate::grid::{log_spaced, RadialGrid, DEFAULT_NODES, DEFAULT_R_MIN};
use crate::odesolver::{fit_asymptotic_slope, monotone_limit, FitReference, RadialEquation};
use crate::riesz::{riesz_convolve_profile, verify_envelope, EnvelopeCase, QuadratureConfig, ENVELOPE_FACTOR};
use crate::verify::{run_verification, Preset, VerificationReport, VerifyConfig, SCHEMA_VERSION};

pub const EXIT_OK: i32 = 0;
/// Some check reported FAIL.
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
/// A numerical method did not reach its tolerance.
pub const EXIT_NUMERICAL: i32 = 3;

/// Directory for relative `--out` paths when set.
pub const OUTPUT_DIR_ENV: &str = "CHOQUARD_OUTPUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "choquard",
    version,
    about = "Regime classification and numerical certification for singular solutions of weighted m-Laplace inequalities with a Riesz-convolution right-hand side"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Existence verdict with the margin of every condition.
    Classify(BaseArgs),
    /// Derived exponents, profile classification and admissible decay range.
    Derive(BaseArgs),
    /// Samples the explicit candidate (or a chosen power-log profile).
    Construct(ProfileArgs),
    /// Closed-form weighted m-Laplacian of the profile, with the finite-difference discrepancy.
    Laplace(ProfileArgs),
    /// Riesz potential of a power of the profile.
    Convolve(ConvolveArgs),
    /// Two-sided envelope check of a weighted convolution integral.
    Envelope(EnvelopeArgs),
    /// Monotone limit of the radial comparison family and its asymptotic slope.
    Ode(OdeArgs),
    /// Runs every applicable check and emits a verification report.
    Verify(VerifyArgs),
    /// Re-reads a JSON verification report and prints its summary.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CommandName {
    Classify,
    Derive,
    Construct,
    Laplace,
    Convolve,
    Envelope,
    Ode,
    Verify,
    Report,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Json,
    Csv,
    Text,
}

impl OutputFormat {
    fn from_extension(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "json" => Some(Self::Json),
            "csv" => Some(Self::Csv),
            "txt" => Some(Self::Text),
            _ => None,
        }
    }
}

/// A parameter value given as a number or as a string (`"20/9"`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Text(String),
}

impl Scalar {
    fn text(&self) -> String {
        match self {
            Scalar::Number(x) => x.to_string(),
            Scalar::Text(s) => s.clone(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(rename = "N")]
    pub n: Option<Scalar>,
    pub m: Option<Scalar>,
    pub p: Option<Scalar>,
    pub q: Option<Scalar>,
    pub alpha: Option<Scalar>,
    pub beta: Option<Scalar>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub r_min: Option<f64>,
    /// Node count of sampled profiles.
    pub nodes: Option<usize>,
    /// Node density of the verification and ODE grids.
    pub nodes_per_decade: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    /// Relative tolerance of the radial Riesz quadrature.
    pub quadrature: Option<f64>,
    /// Subinterval budget of each adaptive quadrature.
    pub quadrature_max_intervals: Option<usize>,
    /// Relative tolerance of the ODE integrator.
    pub ode: Option<f64>,
    /// Relative slope tolerance of the asymptotic fit.
    pub fit: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    pub format: Option<OutputFormat>,
}

/// Run configuration read by `--config`. Every field is optional and command-line flags win.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// When present it must name the subcommand being run.
    pub command: Option<CommandName>,
    pub preset: Option<Preset>,
    #[serde(default)]
    pub params: ParamsConfig,
    pub gamma: Option<f64>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Full verification thresholds, as echoed in a report's `config` block.
    pub verify: Option<VerifyConfig>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("run configuration: {e}")))
    }
}

#[derive(Args, Debug, Clone, Default)]
struct ParamArgs {
    /// Built-in parameter set; individual flags override its fields.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Dimension N (integer >= 3).
    #[arg(long = "N", value_name = "N")]
    n: Option<String>,
    /// Exponent m > 1 of the m-Laplacian.
    #[arg(long)]
    m: Option<String>,
    /// Power p inside the convolution.
    #[arg(long)]
    p: Option<String>,
    /// Power q of the local factor.
    #[arg(long)]
    q: Option<String>,
    /// Weight exponent alpha.
    #[arg(long)]
    alpha: Option<String>,
    /// Riesz order beta in (0, N).
    #[arg(long)]
    beta: Option<String>,
}

#[derive(Args, Debug, Clone, Default)]
struct OutputArgs {
    /// JSON run configuration; unknown keys are rejected.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output file. Relative paths resolve against $CHOQUARD_OUTPUT_DIR when set. [default: stdout]
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Output format. [default: from the --out extension, else csv for sampled data and text otherwise]
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
}

#[derive(Args, Debug, Clone, Default)]
struct BaseArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Clone, Default)]
struct GridArgs {
    /// Smallest radius of the grid. [default: 1e-4]
    #[arg(long)]
    r_min: Option<f64>,
    /// Number of log-spaced nodes on [r_min, 1]. [default: 2048]
    #[arg(long)]
    nodes: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
struct ProfileArgs {
    #[command(flatten)]
    base: BaseArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Decay exponent of a power-log profile; the explicit candidate is used when absent.
    #[arg(long)]
    gamma: Option<f64>,
    /// Logarithmic exponent of the profile. [default: 0, or the candidate's]
    #[arg(long)]
    tau: Option<f64>,
    /// Amplitude of the profile. [default: 1]
    #[arg(long)]
    kappa: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
struct ConvolveArgs {
    #[command(flatten)]
    profile: ProfileArgs,
    /// Power of the profile under the convolution. [default: p]
    #[arg(long)]
    power: Option<f64>,
    /// Relative tolerance of the radial quadrature. [default: 1e-7]
    #[arg(long)]
    quad_rel: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
struct EnvelopeArgs {
    /// Dimension.
    #[arg(long = "N", value_name = "N")]
    n: Option<u32>,
    /// Kernel exponent a in (0, N).
    #[arg(long)]
    a: Option<f64>,
    /// Density exponent b in (0, N).
    #[arg(long)]
    b: Option<f64>,
    /// Logarithmic exponent theta >= 0. [default: 0]
    #[arg(long)]
    theta: Option<f64>,
    /// Bound on max/min of the ratio to the envelope. [default: 100]
    #[arg(long)]
    factor: Option<f64>,
    /// Smallest sample radius; samples run to 1/2. [default: 1e-4]
    #[arg(long)]
    r_min: Option<f64>,
    /// Number of sample radii. [default: 25]
    #[arg(long)]
    nodes: Option<usize>,
    /// Relative tolerance of the radial quadrature. [default: 1e-7]
    #[arg(long)]
    quad_rel: Option<f64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OdeData {
    Fundamental,
    Strong,
}

#[derive(Args, Debug, Clone, Default)]
struct OdeArgs {
    #[command(flatten)]
    base: BaseArgs,
    /// Weight exponent theta of the reaction term. [default: (sigma p - beta)^+]
    #[arg(long)]
    theta: Option<f64>,
    /// Reaction coefficient C. [default: 1e-2]
    #[arg(long)]
    c: Option<f64>,
    /// Inner boundary data. [default: fundamental]
    #[arg(long, value_enum, conflicts_with = "anchor")]
    data: Option<OdeData>,
    /// Anchor t in [0, 1]: data (1-t) Phi + 10 t S.
    #[arg(long)]
    anchor: Option<f64>,
    /// Smallest inner radius of the family. [default: 1e-4]
    #[arg(long)]
    r_min: Option<f64>,
    /// Output nodes per decade. [default: 40]
    #[arg(long)]
    nodes_per_decade: Option<usize>,
    /// Relative tolerance of the integrator. [default: 1e-11]
    #[arg(long)]
    ode_rtol: Option<f64>,
    /// Relative slope tolerance of the classification. [default: 0.05]
    #[arg(long)]
    fit_tol: Option<f64>,
    /// Lower end of the fit window. [default: 2e-2]
    #[arg(long)]
    window_lo: Option<f64>,
    /// Upper end of the fit window. [default: 2e-1]
    #[arg(long)]
    window_hi: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
struct VerifyArgs {
    #[command(flatten)]
    base: BaseArgs,
    /// Decay exponent of the pointwise check. [default: the preset's, else the middle of the admissible range]
    #[arg(long)]
    gamma: Option<f64>,
    /// Smallest radius of the check grid. [default: 1e-4]
    #[arg(long)]
    r_min: Option<f64>,
    /// Nodes per decade of the check grid. [default: 8]
    #[arg(long)]
    nodes_per_decade: Option<usize>,
    /// Relative tolerance of the radial quadrature. [default: 1e-7]
    #[arg(long)]
    quad_rel: Option<f64>,
    /// Relative tolerance of the ODE integrator. [default: 1e-11]
    #[arg(long)]
    ode_rtol: Option<f64>,
    /// Relative slope tolerance of the dichotomy fit. [default: 0.05]
    #[arg(long)]
    fit_tol: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct ReportArgs {
    /// Report written by `verify`.
    input: PathBuf,
    #[command(flatten)]
    output: OutputArgs,
}

/// Usage problems detected after argument parsing.
fn usage(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}

/// Finished command: rendered output plus the verdict that decides the exit code.
struct Outcome {
    body: String,
    /// Printed on stdout in addition to `body` when `body` goes to a file.
    summary: Option<String>,
    code: i32,
}

impl Outcome {
    fn ok(body: String) -> Self {
        Self { body, summary: None, code: EXIT_OK }
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// Like [`run`], with explicit output and diagnostic streams.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_USAGE
            }
        }
    }
}

fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let (name, output) = match &command {
        Command::Classify(a) | Command::Derive(a) => (
            if matches!(command, Command::Classify(_)) { CommandName::Classify } else { CommandName::Derive },
            a.output.clone(),
        ),
        Command::Construct(a) => (CommandName::Construct, a.base.output.clone()),
        Command::Laplace(a) => (CommandName::Laplace, a.base.output.clone()),
        Command::Convolve(a) => (CommandName::Convolve, a.profile.base.output.clone()),
        Command::Envelope(a) => (CommandName::Envelope, a.output.clone()),
        Command::Ode(a) => (CommandName::Ode, a.base.output.clone()),
        Command::Verify(a) => (CommandName::Verify, a.base.output.clone()),
        Command::Report(a) => (CommandName::Report, a.output.clone()),
    };
    let file = match &output.config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(c) = file.command {
        if c != name {
            return Err(usage(format!("configuration is for `{c:?}`, not `{name:?}`").to_lowercase()));
        }
    }
    let path = output.out.clone().or_else(|| file.output.path.clone());
    let format = output
        .format
        .or(file.output.format)
        .or_else(|| path.as_deref().and_then(OutputFormat::from_extension))
        .unwrap_or(match name {
            CommandName::Construct | CommandName::Laplace | CommandName::Convolve | CommandName::Ode => {
                OutputFormat::Csv
            }
            _ => OutputFormat::Text,
        });
    let outcome = match command {
        Command::Classify(a) => classify(&a.params, &file, format)?,
        Command::Derive(a) => derive(&a.params, &file, format)?,
        Command::Construct(a) => construct(&a, &file, format)?,
        Command::Laplace(a) => laplace(&a, &file, format)?,
        Command::Convolve(a) => convolve(&a, &file, format)?,
        Command::Envelope(a) => envelope(&a, &file, format)?,
        Command::Ode(a) => ode(&a, &file, format)?,
        Command::Verify(a) => verify(&a, &file, format)?,
        Command::Report(a) => report(&a, format)?,
    };
    match path {
        Some(p) => {
            let p = resolve_output(&p);
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(&p, &outcome.body).map_err(|e| Error::Io(format!("cannot write {}: {e}", p.display())))?;
            if let Some(s) = &outcome.summary {
                out.write_all(s.as_bytes())?;
            }
            let _ = writeln!(err, "wrote {}", p.display());
        }
        None => out.write_all(outcome.body.as_bytes())?,
    }
    Ok(outcome.code)
}

fn resolve_output(path: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if path.is_relative() && !dir.is_empty() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

/// Parameters from flags over preset over the configuration file. Returns the preset
/// only when no field was overridden.
fn resolve_params(args: &ParamArgs, file: &RunConfig) -> Result<(ProblemParams, Option<Preset>)> {
    let preset = args.preset.or(file.preset);
    let base = preset.map(|p| p.params().to_raw());
    type Field<'a> = (&'a str, &'a Option<String>, &'a Option<Scalar>, Option<&'a String>);
    let fields: [Field; 6] = [
        ("N", &args.n, &file.params.n, base.as_ref().map(|b| &b.n)),
        ("m", &args.m, &file.params.m, base.as_ref().map(|b| &b.m)),
        ("p", &args.p, &file.params.p, base.as_ref().map(|b| &b.p)),
        ("q", &args.q, &file.params.q, base.as_ref().map(|b| &b.q)),
        ("alpha", &args.alpha, &file.params.alpha, base.as_ref().map(|b| &b.alpha)),
        ("beta", &args.beta, &file.params.beta, base.as_ref().map(|b| &b.beta)),
    ];
    let mut values = Vec::with_capacity(6);
    let mut missing = Vec::new();
    let mut overridden = false;
    for (name, flag, conf, from_preset) in fields {
        let v = match (flag, conf, from_preset) {
            (Some(v), _, p) => {
                overridden |= p.is_some_and(|p| p != v);
                Some(v.clone())
            }
            (None, Some(v), p) => {
                let v = v.text();
                overridden |= p.is_some_and(|p| *p != v);
                Some(v)
            }
            (None, None, Some(v)) => Some(v.clone()),
            (None, None, None) => None,
        };
        match v {
            Some(v) => values.push(v),
            None => missing.push(format!("--{name}")),
        }
    }
    if !missing.is_empty() {
        return Err(usage(format!("missing parameters {} (or use --preset)", missing.join(", "))));
    }
    let raw = RawParams {
        n: values[0].clone(),
        m: values[1].clone(),
        p: values[2].clone(),
        q: values[3].clone(),
        alpha: values[4].clone(),
        beta: values[5].clone(),
    };
    let params = ProblemParams::from_raw(&raw)?;
    Ok((params, if overridden { None } else { preset }))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn no_csv(command: &str) -> Error {
    usage(format!("csv output is not available for `{command}`; use json or text"))
}

fn classify(args: &ParamArgs, file: &RunConfig, format: OutputFormat) -> Result<Outcome> {
    let (params, _) = resolve_params(args, file)?;
    let verdict = classify_existence(&params);
    let body = match format {
        OutputFormat::Json => to_json(&json!({
            "schema": SCHEMA_VERSION,
            "command": "classify",
            "params": params.to_raw(),
            "verdict": verdict,
        }))?,
        OutputFormat::Csv => return Err(no_csv("classify")),
        OutputFormat::Text => {
            let word = match verdict.exists {
                Existence::Yes => "YES",
                Existence::No => "NO",
                Existence::Undetermined => "UNDETERMINED",
            };
            let mut s = format!("{word}  {params}  ({:?})\n", verdict.geometry);
            if !verdict.failed_conditions.is_empty() {
                let failed: Vec<&str> = verdict.failed_conditions.iter().map(|c| c.label()).collect();
                let _ = writeln!(s, "failed: {}", failed.join("; "));
            }
            for c in &verdict.margins {
                let _ = writeln!(
                    s,
                    "  {:<5} {:<34} value {:<10} bound {:<10} margin {}",
                    if c.holds { "ok" } else { "FAIL" },
                    c.condition.label(),
                    fmt_num(c.value),
                    fmt_num(c.bound),
                    fmt_num(c.margin)
                );
            }
            if let Some(r) = &verdict.reason {
                let _ = writeln!(s, "note: {r}");
            }
            s
        }
    };
    Ok(Outcome::ok(body))
}

fn fmt_num(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn derive(args: &ParamArgs, file: &RunConfig, format: OutputFormat) -> Result<Outcome> {
    let (params, _) = resolve_params(args, file)?;
    let d = derive_exponents(&params);
    let profile = classify_profile(&params);
    let range = candidate_gamma_range(&params);
    let body = match format {
        OutputFormat::Json => to_json(&json!({
            "schema": SCHEMA_VERSION,
            "command": "derive",
            "params": params.to_raw(),
            "exponents": d,
            "profile": profile.as_ref().ok(),
            "profile_error": profile.as_ref().err().map(|e| e.to_string()),
            "gamma_range": range.as_ref().ok(),
            "gamma_range_error": range.as_ref().err().map(|e| e.to_string()),
        }))?,
        OutputFormat::Csv => return Err(no_csv("derive")),
        OutputFormat::Text => {
            let mut s = format!("{params}\n");
            let _ = writeln!(s, "  sigma        {}", fmt_num(d.sigma));
            let _ = writeln!(s, "  tau          {}", fmt_num(d.tau));
            if let Some(nu) = d.nu {
                let _ = writeln!(s, "  nu           {}", fmt_num(nu));
            }
            if d.phi_is_log {
                let _ = writeln!(s, "  Phi          log(5/r)");
            } else {
                let _ = writeln!(s, "  Phi          r^-{}", fmt_num(d.phi_exponent));
            }
            let _ = writeln!(s, "  theta+       {}", fmt_num(d.theta_plus));
            if let Some(e) = d.strong_exponent {
                let _ = writeln!(s, "  strong       r^-{}", fmt_num(e));
            }
            let _ = writeln!(s, "  regime       {:?}, {:?}", d.regime, d.geometry);
            match &profile {
                Ok(p) => {
                    let _ = writeln!(s, "  profile      {:?}", p.kind);
                }
                Err(e) => {
                    let _ = writeln!(s, "  profile      n/a ({e})");
                }
            }
            match &range {
                Ok(r) => {
                    let _ = writeln!(s, "  gamma range  ({}, {})", fmt_num(r.lower_f64()), fmt_num(r.upper_f64()));
                }
                Err(e) => {
                    let _ = writeln!(s, "  gamma range  n/a ({e})");
                }
            }
            s
        }
    };
    Ok(Outcome::ok(body))
}

fn resolve_profile(args: &ProfileArgs, params: &ProblemParams, file: &RunConfig) -> Result<PowerLogProfile> {
    let kappa = args.kappa.unwrap_or(1.0);
    match args.gamma.or(file.gamma) {
        Some(g) => PowerLogProfile::new(kappa, g, args.tau.unwrap_or(0.0)),
        None => {
            let c = construct_candidate(params)?;
            PowerLogProfile::new(kappa, c.gamma, args.tau.unwrap_or(c.tau))
        }
    }
}

fn profile_radii(args: &GridArgs, file: &RunConfig) -> Result<Vec<f64>> {
    let r_min = args.r_min.or(file.grid.r_min).unwrap_or(DEFAULT_R_MIN);
    let nodes = args.nodes.or(file.grid.nodes).unwrap_or(DEFAULT_NODES);
    log_spaced(r_min, 1.0, nodes)
}

fn grid_summary(label: &str, g: &RadialGrid) -> String {
    let mut s = format!("{label}: {} nodes on [{:e}, {}]\n", g.len(), g.r_min(), g.r_max());
    if let Some(slope) = g.inner_log_slope() {
        let _ = writeln!(s, "  inner log-log slope {}", fmt_num(slope));
    }
    let _ = writeln!(s, "  value at r_min {:e}, at r_max {:e}", g.values()[0], g.values()[g.len() - 1]);
    s
}

fn construct(args: &ProfileArgs, file: &RunConfig, format: OutputFormat) -> Result<Outcome> {
    let (params, _) = resolve_params(&args.base.params, file)?;
    let u = resolve_profile(args, &params, file)?;
    let grid = RadialGrid::sample_on(profile_radii(&args.grid, file)?, |r| u.value_unchecked(r))?;
    let body = match format {
        OutputFormat::Csv => grid.to_csv_string(),
        OutputFormat::Json => to_json(&json!({
            "schema": SCHEMA_VERSION,
            "command": "construct",
            "params": params.to_raw(),
            "profile": u,
            "grid": grid,
        }))?,
        OutputFormat::Text => {
            let mut s = format!("profile kappa={} gamma={} tau={}\n", u.kappa, fmt_num(u.gamma), fmt_num(u.tau));
            s.push_str(&grid_summary("samples", &grid));
            s
        }
    };
    Ok(Outcome::ok(body))
}

fn laplace(args: &ProfileArgs, file: &RunConfig, format: OutputFormat) -> Result<Outcome> {
    let (params, _) = resolve_params(&args.base.params, file)?;
    let u = resolve_profile(args, &params, file)?;
    let samples = RadialGrid::sample_on(profile_radii(&args.grid, file)?, |r| u.value_unchecked(r))?;
    let fd = weighted_m_laplace_fd_grid(&samples, &params)?;
    let closed = RadialGrid::try_sample_on(fd.radii().to_vec(), |r| weighted_m_laplace_closed_form(&u, &params, r))?;
    let discrepancy: Vec<f64> = closed.values().iter().zip(fd.values()).map(|(a, b)| (a - b).abs()).collect();
    let body = match format {
        OutputFormat::Csv => {
            let mut s = String::from("r,value,error_estimate\n");
            for ((r, v), e) in closed.iter().zip(&discrepancy) {
                let _ = writeln!(s, "{r:.17e},{v:.17e},{e:.17e}");
            }
            s
        }
        OutputFormat::Json => to_json(&json!({
            "schema": SCHEMA_VERSION,
            "command": "laplace",
            "params": params.to_raw(),
            "profile": u,
            "closed_form": closed,
            "finite_difference": fd,
        }))?,
        OutputFormat::Text => {
            let rel = closed
                .values()
                .iter()
                .zip(&discrepancy)
                .filter(|(v, _)| **v != 0.0)
                .map(|(v, e)| e / v.abs())
                .fold(0.0, f64::max);
            let mut s = grid_summary("closed form", &closed);
            let _ = writeln!(s, "  max relative finite-difference discrepancy {rel:e}");
            s
        }
    };
    Ok(Outcome::ok(body))
}

fn quadrature_config(quad_rel: Option<f64>, file: &RunConfig) -> Result<QuadratureConfig> {
    let mut q = QuadratureConfig::default();
    if let Some(rel) = quad_rel.or(file.tolerances.quadrature) {
        if !(rel > 0.0 && rel < 1.0) {
            return Err(usage(format!("quadrature tolerance must lie in (0, 1), got {rel}")));
        }
        q.outer_rel = rel;
        q.inner_rel = q.inner_rel.min(rel / 100.0);
    }
    if let Some(k) = file.tolerances.quadrature_max_intervals {
        if k == 0 {
            return Err(usage("quadrature_max_intervals must be positive"));
        }
        q.max_intervals = k;
    }
    Ok(q)
}

fn convolve(args: &ConvolveArgs, file: &RunConfig, format: OutputFormat) -> Result<Outcome> {
    let pa = &args.profile;
    let (params, _) = resolve_params(&pa.base.params, file)?;
    let u = resolve_profile(pa, &params, file)?;
    let power = args.power.unwrap_or(params.p());
    let radii = profile_radii(&pa.grid, file)?;
    let conv = riesz_convolve_profile(&u, &params, power, &radii, &quadrature_config(args.quad_rel, file)?)?;
    let body = match format {
        OutputFormat::Csv => conv.to_csv_string(),
        OutputFormat::Json => to_json(&json!({
            "schema": SCHEMA_VERSION,
            "command": "convolve",
            "params": params.to_raw(),
            "profile": u,
            "power": power,
            "result": conv,
        }))?,
        OutputFormat::Text => {
            let worst = conv
                .grid
                .values()
                .iter()
                .zip(&conv.quadrature_error_estimate)
                .map(|(v, e)| e / v.abs())
                .fold(0.0, f64::max);
            let mut s = grid_summary(&format!("I_beta * u^{}", fmt_num(power)), &conv.grid);
            let _ = writeln!(s, "  max relative error estimate {worst:e}");
            s
        }
    };
    Ok(Outcome::ok(body))
}

fn envelope(args: &EnvelopeArgs, file: &RunConfig, format: OutputFormat) -> Result<Outcome> {
    let n = match (args.n, &file.params.n) {
        (Some(n), _) => n,
        (None, Some(v)) => v.text().parse().map_err(|_| usage(format!("N must be an integer, got {}", v.text())))?,
        (None, None) => return Err(usage("missing --N")),
    };
    let (a, b) = match (args.a, args.b) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(usage("envelope needs --a and --b")),
    };
    let case = EnvelopeCase::new(n, a, b, args.theta.unwrap_or(0.0))?;
    let r_min = args.r_min.or(file.grid.r_min).unwrap_or(DEFAULT_R_MIN);
    let radii = log_spaced(r_min, 0.5, args.nodes.or(file.grid.nodes).unwrap_or(25))?;
    let factor = args.factor.unwrap_or(ENVELOPE_FACTOR);
    let rep = verify_envelope(&case, &radii, factor, &quadrature_config(args.quad_rel, file)?)?;
    let body = match format {
        OutputFormat::Csv => {
            let mut s = String::from("r,value,error_estimate\n");
            for x in &rep.samples {
                let _ = writeln!(s, "{:.17e},{:.17e},{:.17e}", x.r, x.integral, x.error_estimate);
            }
            s
        }
        OutputFormat::Json => to_json(&json!({ "schema": SCHEMA_VERSION, "command": "envelope", "report": rep }))?,
        OutputFormat::Text => {
            let mut s = format!(
                "{} envelope N={n} a={a} b={b} theta={}: ratio in [{:e}, {:e}], spread {} (bound {factor})\n",
                if rep.pass { "PASS" } else { "FAIL" },
                case.theta,
                rep.min_ratio,
                rep.max_ratio,
                fmt_num(rep.max_ratio / rep.min_ratio)
            );
            let _ = writeln!(s, "  regime {:?}", case.regime);
            if rep.theta_one {
                s.push_str("  warning: theta = 1 at criticality; compared against the constant envelope\n");
            }
            s
        }
    };
    Ok(Outcome { body, summary: None, code: if rep.pass { EXIT_OK } else { EXIT_FAIL } })
}

fn ode(args: &OdeArgs, file: &RunConfig, format: OutputFormat) -> Result<Outcome> {
    let (params, _) = resolve_params(&args.base.params, file)?;
    let mut dcfg = file.verify.clone().unwrap_or_default().dichotomy;
    if let Some(c) = args.c {
        dcfg.c = c;
    }
    if let Some(r) = args.r_min.or(file.grid.r_min) {
        dcfg.family.r_min = r;
    }
    if let Some(k) = args.nodes_per_decade.or(file.grid.nodes_per_decade) {
        dcfg.family.nodes_per_decade = k;
    }
    if let Some(t) = args.ode_rtol.or(file.tolerances.ode) {
        dcfg.family.shooting.integrator.rtol = t;
    }
    if let Some(t) = args.fit_tol.or(file.tolerances.fit) {
        dcfg.slope_tol = t;
    }
    let window = (args.window_lo.unwrap_or(dcfg.window.0), args.window_hi.unwrap_or(dcfg.window.1));
    let theta = args.theta.unwrap_or_else(|| derive_exponents(&params).theta_plus);
    let eq = RadialEquation::new(&params, theta, dcfg.c, params.q())?;
    let (t, weight) = match (args.data, args.anchor) {
        (_, Some(t)) if (0.0..=1.0).contains(&t) => (t, t * dcfg.strong_multiplier),
        (_, Some(t)) => return Err(usage(format!("anchor must lie in [0, 1], got {t}"))),
        (Some(OdeData::Strong), None) => (1.0, 1.0),
        _ => (0.0, 0.0),
    };
    let strong = if weight > 0.0 {
        let (lambda, s) = eq
            .power_solution()
            .ok_or_else(|| usage("strong data needs an explicit power solution for these exponents"))?;
        Some((lambda, s))
    } else {
        None
    };
    let g = |r: f64| {
        let s = strong.map_or(0.0, |(lambda, s)| weight * lambda * r.powf(-s));
        (1.0 - t) * eq.fundamental(r) + s
    };
    let lim = monotone_limit(&eq, g, g(1.0), &dcfg.family)?;
    let fit = fit_asymptotic_slope(&lim.solution.grid, window, &FitReference::for_equation(&eq, dcfg.slope_tol))?;
    let body = match format {
        OutputFormat::Csv => lim.solution.to_csv_string(),
        OutputFormat::Json => to_json(&json!({
            "schema": SCHEMA_VERSION,
            "command": "ode",
            "params": params.to_raw(),
            "equation": eq,
            "anchor": t,
            "direction": lim.direction,
            "inner_radii": lim.inner_radii,
            "residuals": lim.residuals,
            "solution": lim.solution,
            "fit": fit,
        }))?,
        OutputFormat::Text => {
            let mut s = format!("comparison family theta={} C={} data t={t}\n", fmt_num(theta), dcfg.c);
            let _ = writeln!(s, "  family {:?}, {} iterates", lim.direction, lim.inner_radii.len());
            let _ = writeln!(
                s,
                "  slope {} on [{}, {}]: {:?} (fundamental -{}, strong -{})",
                fmt_num(fit.slope),
                window.0,
                window.1,
                fit.classification,
                fmt_num(fit.fundamental_exponent_ref),
                fmt_num(fit.strong_exponent_ref)
            );
            s
        }
    };
    Ok(Outcome::ok(body))
}

fn verify(args: &VerifyArgs, file: &RunConfig, format: OutputFormat) -> Result<Outcome> {
    let (params, preset) = resolve_params(&args.base.params, file)?;
    let mut cfg = file.verify.clone().unwrap_or_default();
    if let Some(r) = args.r_min.or(file.grid.r_min) {
        cfg.grid.r_min = r;
    }
    if let Some(k) = args.nodes_per_decade.or(file.grid.nodes_per_decade) {
        cfg.grid.nodes_per_decade = k;
    }
    if args.quad_rel.is_some()
        || file.tolerances.quadrature.is_some()
        || file.tolerances.quadrature_max_intervals.is_some()
    {
        cfg.quadrature = quadrature_config(args.quad_rel, file)?;
    }
    if let Some(t) = args.ode_rtol.or(file.tolerances.ode) {
        cfg.dichotomy.family.shooting.integrator.rtol = t;
    }
    if let Some(t) = args.fit_tol.or(file.tolerances.fit) {
        cfg.dichotomy.slope_tol = t;
    }
    let gamma = args.gamma.or(file.gamma).or_else(|| preset.and_then(Preset::gamma));
    let report = run_verification(&params, gamma, preset, &cfg)?;
    let summary = report.text_summary();
    let body = match format {
        OutputFormat::Json => report.to_json()? + "\n",
        OutputFormat::Text => summary.clone(),
        OutputFormat::Csv => return Err(no_csv("verify")),
    };
    Ok(Outcome { body, summary: Some(summary), code: report_code(&report) })
}

fn report_code(report: &VerificationReport) -> i32 {
    if report.numerical_failure() {
        EXIT_NUMERICAL
    } else if report.passed() {
        EXIT_OK
    } else {
        EXIT_FAIL
    }
}

fn report(args: &ReportArgs, format: OutputFormat) -> Result<Outcome> {
    let text = std::fs::read_to_string(&args.input)
        .map_err(|e| Error::Io(format!("cannot read {}: {e}", args.input.display())))?;
    let report = VerificationReport::from_json(&text)?;
    let body = match format {
        OutputFormat::Json => report.to_json()? + "\n",
        OutputFormat::Text => report.text_summary(),
        OutputFormat::Csv => return Err(no_csv("report")),
    };
    Ok(Outcome { body, summary: None, code: report_code(&report) })
}
