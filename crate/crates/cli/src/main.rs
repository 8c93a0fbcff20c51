//! `caplp`: command-line front end for the capillary L_p-Minkowski solver.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use capillary::functionals::report;
use capillary::iteration::{refined_equation_residual, NORMALIZE_TOL};
use capillary::minkowski::solve_detailed;
use capillary::verify::{self, VerifyOptions};
use capillary::{
    cap_body, iterate, make_domain, normalize, parse_phi, BodyRecord, CapError, CapillaryBody, DomainRef, IterateOptions,
    Mode, SolveOptions, Tolerances,
};

#[derive(Parser)]
#[command(name = "caplp", version, about = "Even capillary L_p-Minkowski problem on spherical caps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Iterate the curvature image operator to a normalized solution.
    Solve(SolveArgs),
    /// Solve the capillary Minkowski problem for a prescribed curvature function.
    Minkowski(MinkowskiArgs),
    /// Report A_p, B_p, Omega_p and V for a body.
    Functionals(FunctionalsArgs),
    /// Run the invariant suite and print a pass/fail table.
    Verify(VerifyArgs),
    /// Write the embedded hypersurface as CSV.
    Embed(EmbedArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Arc,
    Axisymmetric,
    Full2d,
}

#[derive(Args)]
struct DomainArgs {
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Contact angle in radians, in (0, π/2).
    #[arg(long)]
    theta: Option<f64>,
    /// Polar grid levels; defaults to 257 for n = 2 and 129 for n = 3.
    #[arg(long)]
    grid: Option<usize>,
    /// Defaults to arc for n = 2 and axisymmetric for n = 3.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

impl DomainArgs {
    fn domain(&self) -> Result<DomainRef, Failure> {
        let mode = match self.mode {
            Some(ModeArg::Arc) => Mode::Arc,
            Some(ModeArg::Axisymmetric) => Mode::Axisymmetric,
            Some(ModeArg::Full2d) => Mode::Full2d,
            None if self.n == 2 => Mode::Arc,
            None => Mode::Axisymmetric,
        };
        let grid = self.grid.unwrap_or(if self.n == 2 { 257 } else { 129 });
        let theta = self.theta.ok_or_else(|| Failure::Usage("--theta is required".into()))?;
        Ok(make_domain(self.n, theta, grid, mode)?)
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    domain: DomainArgs,
    #[arg(long, allow_hyphen_values = true)]
    p: f64,
    /// Density: const:<a> | znpoly:<c0,c1,...> | cos2k:<a0,k,a> | table:<path>.
    #[arg(long)]
    phi: String,
    /// Newton tolerance of each Minkowski solve.
    #[arg(long)]
    tol: Option<f64>,
    /// Stop once |V_{i+1}/V_i − 1| is at most this.
    #[arg(long)]
    stop_tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Recorded in the result; the iteration itself is deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Result JSON; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Body record JSON of the normalized solution.
    #[arg(long)]
    body_out: Option<PathBuf>,
    #[arg(long)]
    embed_out: Option<PathBuf>,
}

#[derive(Args)]
struct MinkowskiArgs {
    #[command(flatten)]
    domain: DomainArgs,
    /// Curvature function, in the density grammar.
    #[arg(long)]
    phi: String,
    #[arg(long)]
    tol: Option<f64>,
    /// Body record JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    embed_out: Option<PathBuf>,
}

#[derive(Args)]
struct FunctionalsArgs {
    /// Body record JSON; the unit cap on the given domain when omitted.
    #[arg(long)]
    body: Option<PathBuf>,
    #[command(flatten)]
    domain: DomainArgs,
    #[arg(long, allow_hyphen_values = true)]
    p: f64,
    #[arg(long)]
    phi: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Resolution 129 and fewer random bodies.
    #[arg(long)]
    quick: bool,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Check rows as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EmbedArgs {
    /// Body record JSON; a cap on the given domain when omitted.
    #[arg(long)]
    body: Option<PathBuf>,
    #[command(flatten)]
    domain: DomainArgs,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Cap(CapError),
    Io(String),
    Usage(String),
    NotConverged(String),
    Invariants(String),
}

impl From<CapError> for Failure {
    fn from(e: CapError) -> Self {
        Failure::Cap(e)
    }
}

impl Failure {
    fn to_json(&self) -> Value {
        let (kind, message) = match self {
            Failure::Cap(e) => (cap_kind(e), e.to_string()),
            Failure::Io(m) => ("io", m.clone()),
            Failure::Usage(m) => ("usage", m.clone()),
            Failure::NotConverged(m) => ("not_converged", m.clone()),
            Failure::Invariants(m) => ("invariant_failed", m.clone()),
        };
        json!({ "error": kind, "message": message })
    }
}

fn cap_kind(e: &CapError) -> &'static str {
    match e {
        CapError::Parameter(_) => "parameter",
        CapError::DomainMismatch => "domain_mismatch",
        CapError::IndexOutOfRange { .. } => "index_out_of_range",
        CapError::Positivity { .. } => "positivity",
        CapError::Robin { .. } => "robin",
        CapError::Convexity { .. } => "convexity",
        CapError::Evenness(_) => "evenness",
        CapError::NonFinite(_) => "non_finite",
        CapError::NewtonDivergence { .. } => "newton_divergence",
        CapError::DampingExhausted { .. } => "damping_exhausted",
        CapError::Singular { .. } => "singular",
        CapError::Unsupported(_) => "unsupported",
        CapError::Grammar { .. } => "grammar",
        CapError::Io(_) => "io",
        CapError::NotFixedPoint { .. } => "not_fixed_point",
        CapError::CurvatureBlowup { .. } => "curvature_blowup",
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}

fn load_body(path: &Path) -> Result<CapillaryBody, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    Ok(BodyRecord::from_json(&text)?.to_body(Tolerances::default())?)
}

fn body_or_cap(body: Option<&Path>, domain: &DomainArgs, radius: f64) -> Result<CapillaryBody, Failure> {
    match body {
        Some(p) => load_body(p),
        None => Ok(cap_body(&domain.domain()?, radius)?),
    }
}

fn embed_csv(body: &CapillaryBody) -> String {
    let n = body.domain().n();
    let header: Vec<String> = (1..=n).map(|k| format!("x{k}")).collect();
    let mut out = header.join(",");
    out.push('\n');
    for x in body.embed() {
        let row: Vec<String> = x.iter().map(|v| format!("{v:.17e}")).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

fn solve_options(tol: Option<f64>) -> SolveOptions {
    let mut o = SolveOptions::default();
    if let Some(t) = tol {
        o.newton_tol = t;
    }
    o
}

fn run_solve(a: &SolveArgs) -> Result<(), Failure> {
    let d = a.domain.domain()?;
    let phi = parse_phi(&a.phi, &d)?;
    let mut opts = IterateOptions { solve: solve_options(a.tol), ..IterateOptions::default() };
    if let Some(t) = a.stop_tol {
        opts.stop_ratio = t;
    }
    if let Some(m) = a.max_iter {
        opts.max_iter = m;
    }
    let outcome = iterate(&phi, a.p, &opts)?;
    if let Some(path) = &a.trace {
        write_text(path, &outcome.trace.to_csv())?;
    }
    if !outcome.converged {
        return Err(Failure::NotConverged(format!(
            "stopped after {} iterations ({:?})",
            outcome.iterations, outcome.stop
        )));
    }
    let norm = normalize(&outcome.body, &phi, a.p, NORMALIZE_TOL)?;
    let refined = if d.mode() == Mode::Full2d {
        None
    } else {
        Some(refined_equation_residual(&norm.body, a.p, |fine| parse_phi(&a.phi, fine))?)
    };
    let body = &norm.body;
    let result = json!({
        "n": d.n(),
        "theta": d.theta(),
        "p": a.p,
        "phi_spec": a.phi,
        "grid": d.n_beta(),
        "converged": outcome.converged,
        "iterations": outcome.iterations,
        "V": body.volume(),
        "residual_final": norm.residual,
        "refined_residual": refined,
        "normalize_lambda": norm.lambda,
        "beta": d.betas(),
        "support": body.support().values(),
        "f": body.curvature_function().values(),
        "cap_measure": d.cap_measure(),
        "seed": a.seed,
    });
    if let Some(path) = &a.body_out {
        write_text(path, &BodyRecord::from_body(body).to_json())?;
    }
    if let Some(path) = &a.embed_out {
        write_text(path, &embed_csv(body))?;
    }
    emit(a.out.as_deref(), &pretty(&result))
}

fn run_minkowski(a: &MinkowskiArgs) -> Result<(), Failure> {
    let d = a.domain.domain()?;
    let f = parse_phi(&a.phi, &d)?;
    let rep = solve_detailed(&d, f.field(), &solve_options(a.tol))?;
    let body = &rep.body;
    if let Some(path) = &a.out {
        write_text(path, &BodyRecord::from_body(body).to_json())?;
    }
    if let Some(path) = &a.embed_out {
        write_text(path, &embed_csv(body))?;
    }
    let result = json!({
        "n": d.n(),
        "theta": d.theta(),
        "f_spec": a.phi,
        "grid": d.n_beta(),
        "newton_steps": rep.newton_steps,
        "residual": rep.residual,
        "max_sigma1": rep.max_sigma1,
        "V": body.volume(),
        "robin_residual": body.robin_residual(),
        "beta": d.betas(),
        "support": body.support().values(),
        "cap_measure": d.cap_measure(),
    });
    print!("{}", pretty(&result));
    Ok(())
}

fn run_functionals(a: &FunctionalsArgs) -> Result<(), Failure> {
    let body = body_or_cap(a.body.as_deref(), &a.domain, 1.0)?;
    let phi = parse_phi(&a.phi, body.domain())?;
    let rep = report(&body, phi.field(), a.p)?;
    let mut v = serde_json::to_value(&rep).expect("report serializes");
    v["cap_measure"] = json!(body.domain().cap_measure());
    emit(a.out.as_deref(), &pretty(&v))
}

fn run_verify(a: &VerifyArgs) -> Result<(), Failure> {
    let mut opts = if a.quick { VerifyOptions::quick() } else { VerifyOptions::full() };
    if let Some(g) = a.grid {
        opts.resolution = g;
    }
    if let Some(s) = a.seed {
        opts.seed = s;
    }
    let rows = verify::run(&opts);
    print!("{}", verify::table(&rows));
    if let Some(path) = &a.out {
        let v = serde_json::to_value(&rows).expect("rows serialize");
        write_text(path, &pretty(&v))?;
    }
    let failed = rows.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(Failure::Invariants(format!("{failed} of {} checks failed", rows.len())));
    }
    Ok(())
}

fn run_embed(a: &EmbedArgs) -> Result<(), Failure> {
    let body = body_or_cap(a.body.as_deref(), &a.domain, a.radius)?;
    emit(a.out.as_deref(), &embed_csv(&body))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(a) => run_solve(a),
        Command::Minkowski(a) => run_minkowski(a),
        Command::Functionals(a) => run_functionals(a),
        Command::Verify(a) => run_verify(a),
        Command::Embed(a) => run_embed(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
