//! Command-line front end.
//!
//! Every report is a JSON object `{manifest, result, diagnostics}`; point
//! sets and traces can be written as CSV instead. Exit codes: 0 success,
//! 1 mathematical negative (no convergence, infeasible, no crossing; the
//! report is still written), 2 usage or input error.
//!
//! All randomness comes from one ChaCha8 stream seeded by `--seed`. Draw
//! order: `maxwell find --jitter` draws three uniforms per start point in
//! start order; `maxwell census` draws, per trial, three coordinates and
//! then a magnitude and a sign for each charge.

pub mod io;

use std::f64::consts::E;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ChargeConfiguration;
use crate::equilibrium::{self, SolveSettings};
use crate::faraday::{self, DiscreteMeasure};
use crate::fields;
use crate::kernel::InteractionLaw;
use crate::maxwell::{self, CriticalKind, FindSettings, Plane, SearchBox, TraceSettings};
use crate::moments::{self, quadrature::DensityGrid};
use crate::onsager;
use io::{CliError, Diagnostics, Input, InputDoc, KernelDoc, KernelType, Report, RunManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "chargekit", version, about = "Point-charge electrostatics toolkit")]
pub struct Cli {
    /// Input JSON document.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Report destination (default stdout).
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Seed of the run's random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Overrides the command's main tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Record wall-clock time in the manifest (reports are then no longer
    /// byte-reproducible).
    #[arg(long, global = true)]
    pub timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Potentials, fields and energies.
    #[command(subcommand)]
    Field(FieldCmd),
    /// Onsager inequality.
    #[command(subcommand)]
    Onsager(OnsagerCmd),
    /// Equilibrium residuals, solver and constructions.
    #[command(subcommand)]
    Equilibrium(EquilibriumCmd),
    /// Planar moment identities.
    #[command(subcommand)]
    Moments(MomentsCmd),
    /// Critical points of the Coulomb potential in R^3.
    #[command(subcommand)]
    Maxwell(MaxwellCmd),
    /// Nonnegative moment matching on the unit ball.
    #[command(subcommand)]
    Faraday(FaradayCmd),
}

#[derive(Debug, Subcommand)]
pub enum FieldCmd {
    /// Potential, field and Hessian at points.
    Eval {
        /// Evaluation point, comma separated; repeatable.
        #[arg(long = "at", required = true, allow_hyphen_values = true, value_parser = parse_list)]
        at: Vec<Vec<f64>>,
    },
    /// Pairwise energy.
    Energy {
        /// `log`, `newtonian` or `riesz:K` (default: the input kernel).
        #[arg(long)]
        law: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum OnsagerCmd {
    /// Both sides of the Onsager bound and the smeared-sphere energy.
    Check {
        /// Require unit charges.
        #[arg(long)]
        unit: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum EquilibriumCmd {
    /// Force on every charge.
    Residual {
        #[arg(long)]
        law: Option<String>,
    },
    /// Damped Newton search for an equilibrium.
    Solve {
        #[arg(long)]
        law: Option<String>,
        /// Indices of charges held fixed.
        #[arg(long, value_delimiter = ',')]
        frozen: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        max_iter: usize,
    },
    /// Regular (n-1)-gon with a balancing centre charge.
    ConstructGon {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        q: f64,
    },
    /// Discretized constrained equilibrium on support components.
    Constrained,
}

#[derive(Debug, Subcommand)]
pub enum MomentsCmd {
    /// Residual of the charge-only identity.
    Abanov,
    /// Moment identities of a planar equilibrium.
    Relations {
        #[arg(long, default_value_t = moments::DEFAULT_K_MAX)]
        k_max: usize,
    },
    /// Laurent coefficients of the squared complex field.
    Gsq {
        #[arg(long, default_value_t = 8)]
        k_max: usize,
    },
    /// `sum q_i q_j r Phi'(r)` for a radial law.
    Phi {
        #[arg(long)]
        law: Option<String>,
    },
    /// Energy change under dilation.
    Scaling {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        lambdas: Vec<f64>,
    },
    /// Moment identities of a planar density.
    Continuous {
        #[arg(long, default_value_t = moments::DEFAULT_K_MAX)]
        k_max: usize,
        /// Disk radius when the input has no grid.
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        /// Constant density on the disk.
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        density: f64,
        #[arg(long, default_value_t = 32)]
        n_radial: usize,
        #[arg(long, default_value_t = 64)]
        n_angular: usize,
        /// Exterior point `re,im` for the G~ decomposition.
        #[arg(long, allow_hyphen_values = true, value_parser = parse_list)]
        z: Option<::std::vec::Vec<f64>>,
    },
}

#[derive(Debug, Subcommand)]
pub enum MaxwellCmd {
    /// Multi-start critical point search.
    Find {
        /// Search cube `a,b` on every axis (default: twice the diameter).
        #[arg(long = "box", allow_hyphen_values = true, value_parser = parse_list)]
        search_box: Option<::std::vec::Vec<f64>>,
        #[arg(long, default_value_t = 8000)]
        starts: usize,
        /// Random displacement of start points, relative to the box size.
        #[arg(long, default_value_t = 0.0)]
        jitter: f64,
    },
    /// Follow a degenerate critical curve.
    Trace {
        #[arg(long, allow_hyphen_values = true, value_parser = parse_list)]
        from: ::std::vec::Vec<f64>,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long, default_value_t = 2000)]
        max_points: usize,
    },
    /// Crossing angles of a traced curve with a plane.
    Transversality {
        #[arg(long, allow_hyphen_values = true, value_parser = parse_list)]
        from: ::std::vec::Vec<f64>,
        /// `nx,ny,nz,offset`.
        #[arg(long, allow_hyphen_values = true, value_parser = parse_list)]
        plane: ::std::vec::Vec<f64>,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long, default_value_t = 2000)]
        max_points: usize,
    },
    /// Critical point counts of random configurations.
    Census {
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 3)]
        charges: usize,
        #[arg(long, default_value_t = 1000)]
        starts: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum FaradayCmd {
    /// Solid-harmonic moments of the measure.
    Moments {
        #[arg(long, default_value_t = faraday::DEFAULT_DEGREE)]
        degree: usize,
    },
    /// Search for a nonnegative measure with the same exterior potential.
    Solve {
        #[arg(long, default_value_t = faraday::DEFAULT_DEGREE)]
        degree: usize,
    },
    /// Exterior potential mismatch on |x| = 2.
    Verify {
        #[arg(long, default_value_t = faraday::EXTERIOR_SAMPLES)]
        samples: usize,
    },
}

/// Subcommand path and the library operation it exposes. Each operation
/// is reachable from exactly one subcommand.
pub const DISPATCH_TABLE: &[(&str, &str)] = &[
    ("field eval", "fields::sample_batch"),
    ("field energy", "fields::pairwise_energy"),
    ("onsager check", "onsager::onsager_check"),
    ("equilibrium residual", "equilibrium::residual"),
    ("equilibrium solve", "equilibrium::newton_iterate"),
    ("equilibrium construct-gon", "equilibrium::construct_gon"),
    ("equilibrium constrained", "equilibrium::constrained_weights"),
    ("moments abanov", "moments::abanov_residual"),
    ("moments relations", "moments::eq_relations_report"),
    ("moments gsq", "moments::g_squared_coefficient_check"),
    ("moments phi", "moments::general_phi_identity"),
    ("moments scaling", "moments::scaling_identity_check"),
    ("moments continuous", "moments::continuous_moment_report"),
    ("maxwell find", "maxwell::find_critical_points"),
    ("maxwell trace", "maxwell::trace_curve"),
    ("maxwell transversality", "maxwell::transversality_angle"),
    ("maxwell census", "maxwell::random_census"),
    ("faraday moments", "faraday::exterior_moments"),
    ("faraday solve", "faraday::solve_positive_equivalent"),
    ("faraday verify", "faraday::verify_exterior_match"),
];

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| format!("'{t}': {e}"))
        })
        .collect()
}

fn parse_law(spec: &str, dimension: usize) -> Result<InteractionLaw, CliError> {
    match spec {
        "log" => Ok(InteractionLaw::log()),
        "newtonian" => Ok(InteractionLaw::newtonian(dimension)),
        s => match s.strip_prefix("riesz:").map(str::parse::<f64>) {
            Some(Ok(k)) => Ok(InteractionLaw::riesz(k)?),
            _ => Err(CliError::Usage(format!("unknown law '{s}' (log, newtonian, riesz:K)"))),
        },
    }
}

fn point3(v: &[f64], what: &str) -> Result<[f64; 3], CliError> {
    <[f64; 3]>::try_from(v).map_err(|_| CliError::Usage(format!("{what} needs three coordinates")))
}

/// What a handler produced.
enum Output {
    Json(Value),
    /// JSON result and optional CSV rendering.
    Points(Value, Vec<u8>),
}

struct Outcome {
    output: Output,
    negative: bool,
    messages: Vec<String>,
}

impl Outcome {
    fn ok<T: Serialize>(v: &T) -> Self {
        Self {
            output: Output::Json(to_value(v)),
            negative: false,
            messages: Vec::new(),
        }
    }

    fn negative(mut self, flag: bool, message: impl Into<String>) -> Self {
        if flag {
            self.negative = true;
            self.messages.push(message.into());
        }
        self
    }

    fn note(mut self, message: impl Into<String>) -> Self {
        self.messages.push(message.into());
        self
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

struct Ctx {
    input: Option<Input>,
    tol: Option<f64>,
    rng: ChaCha8Rng,
}

impl Ctx {
    fn doc(&self) -> Result<&InputDoc, CliError> {
        self.input
            .as_ref()
            .map(|i| &i.doc)
            .ok_or_else(|| CliError::Usage("this command needs --input".into()))
    }

    fn config(&self) -> Result<ChargeConfiguration, CliError> {
        self.doc()?.configuration()
    }

    fn law(&self, spec: &Option<String>, cfg: &ChargeConfiguration) -> Result<InteractionLaw, CliError> {
        match spec {
            Some(s) => parse_law(s, cfg.dimension()),
            None => Ok(self.doc()?.kernel()?.law()),
        }
    }
}

/// Parses `args` (program name first), runs the command and writes the
/// report to `--output` or `stdout`. Returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = stdout.write_all(text.as_bytes());
            } else {
                let _ = stderr.write_all(text.as_bytes());
            }
            return code;
        }
    };
    let command = canonical_command(&args);
    match execute(&cli, &command) {
        Ok((code, bytes)) => match &cli.output {
            Some(path) => match std::fs::write(path, &bytes) {
                Ok(()) => code,
                Err(e) => {
                    let _ = writeln!(stderr, "{}: {e}", path.display());
                    2
                }
            },
            None => {
                let _ = stdout.write_all(&bytes);
                code
            }
        },
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            2
        }
    }
}

/// Arguments after the program name with `--input`/`--output` and their
/// values removed, so reports do not depend on file locations.
fn canonical_command(args: &[std::ffi::OsString]) -> String {
    let mut out = Vec::new();
    let mut skip = false;
    for a in args.iter().skip(1) {
        let a = a.to_string_lossy();
        if skip {
            skip = false;
            continue;
        }
        if a == "--input" || a == "--output" {
            skip = true;
            continue;
        }
        if a.starts_with("--input=") || a.starts_with("--output=") {
            continue;
        }
        out.push(a.into_owned());
    }
    out.join(" ")
}

fn execute(cli: &Cli, command: &str) -> Result<(i32, Vec<u8>), CliError> {
    let start = Instant::now();
    let input = cli.input.as_deref().map(io::read_input).transpose()?;
    let config_digest = io::digest(input.as_ref().map(|i| i.bytes.as_slice()).unwrap_or(&[]));
    let mut ctx = Ctx {
        input,
        tol: cli.tol,
        rng: ChaCha8Rng::seed_from_u64(cli.seed),
    };
    if let Some(t) = cli.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::Usage(format!("--tol must be positive, got {t}")));
        }
    }

    let (code, result, diagnostics, csv) = match dispatch(&cli.command, &mut ctx) {
        Ok(out) => {
            let (result, csv) = match out.output {
                Output::Json(v) => (v, None),
                Output::Points(v, csv) => (v, Some(csv)),
            };
            let code = i32::from(out.negative);
            let diag = Diagnostics {
                status: if out.negative { "negative" } else { "ok" },
                error: None,
                messages: out.messages,
            };
            (code, result, diag, csv)
        }
        Err(CliError::Validation { kind, message }) if is_negative_kind(kind) => {
            let diag = Diagnostics {
                status: "negative",
                error: Some(kind),
                messages: vec![message],
            };
            (1, Value::Null, diag, None)
        }
        Err(e) => return Err(e),
    };

    if cli.format == Format::Csv {
        return match csv {
            Some(bytes) => Ok((code, bytes)),
            None => Err(CliError::Usage("CSV output is available for maxwell find and maxwell trace only".into())),
        };
    }
    let wall_time_ms = if cli.timing {
        start.elapsed().as_millis() as u64
    } else {
        0
    };
    let report = Report {
        manifest: RunManifest {
            command: command.to_string(),
            config_digest,
            seed: cli.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_ms,
        },
        result,
        diagnostics,
    };
    Ok((code, io::to_json_bytes(&report)))
}

fn is_negative_kind(kind: &str) -> bool {
    matches!(
        kind,
        "NoConvergence" | "SingularJacobian" | "DegenerateSystem" | "CorrectorDiverged" | "NoCrossing"
    )
}

fn dispatch(cmd: &Command, ctx: &mut Ctx) -> Result<Outcome, CliError> {
    match cmd {
        Command::Field(c) => field(c, ctx),
        Command::Onsager(c) => onsager_cmd(c, ctx),
        Command::Equilibrium(c) => equilibrium_cmd(c, ctx),
        Command::Moments(c) => moments_cmd(c, ctx),
        Command::Maxwell(c) => maxwell_cmd(c, ctx),
        Command::Faraday(c) => faraday_cmd(c, ctx),
    }
}

fn field(cmd: &FieldCmd, ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let cfg = ctx.config()?;
    match cmd {
        FieldCmd::Eval { at } => {
            let kernel = ctx.doc()?.kernel()?;
            let samples = fields::sample_batch(&cfg, &kernel, at);
            let rows: Vec<Value> = at
                .iter()
                .zip(samples)
                .map(|(p, s)| match s {
                    Ok(s) => json!({ "point": p, "sample": to_value(&s) }),
                    Err(e) => json!({ "point": p, "error": e.kind(), "message": e.to_string() }),
                })
                .collect();
            Ok(Outcome::ok(&json!({ "kernel": kernel, "samples": rows })))
        }
        FieldCmd::Energy { law } => {
            let l = ctx.law(law, &cfg)?;
            let raw = fields::pairwise_energy(&cfg, &l);
            let prefactor = if law.is_none() {
                ctx.doc()?.kernel()?.prefactor()
            } else {
                1.0
            };
            Ok(Outcome::ok(&json!({
                "law": l.label(),
                "prefactor": prefactor,
                "energy": prefactor * raw,
            }))
            .note("energy sums over ordered pairs (twice the sum over j < k)"))
        }
    }
}

fn onsager_cmd(cmd: &OnsagerCmd, ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let OnsagerCmd::Check { unit } = cmd;
    let cfg = ctx.config()?;
    let report = if *unit {
        onsager::onsager_unit_charge_check(&cfg)?
    } else {
        onsager::onsager_check(&cfg)?
    };
    let radii: Vec<f64> = report.deltas.iter().map(|d| d / 2.0).collect();
    let smeared = fields::smeared_energy_decomposition(&cfg, &radii)?;
    let margin = report.margin;
    Ok(Outcome::ok(&json!({ "onsager": report, "smeared": smeared }))
        .negative(margin <= 0.0, "Onsager margin is not positive; this indicates a bug"))
}

fn equilibrium_cmd(cmd: &EquilibriumCmd, ctx: &mut Ctx) -> Result<Outcome, CliError> {
    match cmd {
        EquilibriumCmd::Residual { law } => {
            let cfg = ctx.config()?;
            let l = ctx.law(law, &cfg)?;
            Ok(Outcome::ok(&equilibrium::residual(&cfg, &l)))
        }
        EquilibriumCmd::Solve { law, frozen, max_iter } => {
            let cfg = ctx.config()?;
            let l = ctx.law(law, &cfg)?;
            let settings = SolveSettings {
                tol: ctx.tol.unwrap_or(SolveSettings::default().tol),
                max_iter: *max_iter,
                ..Default::default()
            };
            let report = equilibrium::newton_iterate(&cfg, &l, frozen, &settings)?;
            let converged = report.converged;
            let msg = report.message.clone();
            Ok(Outcome::ok(&report)
                .negative(!converged, format!("NoConvergence: {msg}"))
                .note("hessian_inertia is advisory; equilibria are generally saddles"))
        }
        EquilibriumCmd::ConstructGon { n, q } => {
            let cfg = equilibrium::construct_gon(*n, *q)?;
            let doc = InputDoc::from_configuration(
                &cfg,
                Some(KernelDoc {
                    kind: KernelType::Log,
                    normalized: false,
                }),
            );
            Ok(Outcome::ok(&doc))
        }
        EquilibriumCmd::Constrained => {
            let doc = ctx.doc()?;
            let part = doc.partition()?;
            let kernel = doc.kernel()?;
            let w = equilibrium::constrained_weights(&part, &kernel)?;
            let feasible = w.feasible;
            Ok(Outcome::ok(&w).negative(!feasible, "discretized system is infeasible"))
        }
    }
}

fn moments_cmd(cmd: &MomentsCmd, ctx: &mut Ctx) -> Result<Outcome, CliError> {
    match cmd {
        MomentsCmd::Abanov => {
            let cfg = ctx.config()?;
            let r = moments::abanov_residual(&cfg.charge_values());
            Ok(Outcome::ok(&json!({ "residual": r })))
        }
        MomentsCmd::Relations { k_max } => {
            let r = moments::eq_relations_report(&ctx.config()?, *k_max)?;
            let max = r.max_residual();
            Ok(Outcome::ok(&json!({ "report": r, "max_residual": max })))
        }
        MomentsCmd::Gsq { k_max } => Ok(Outcome::ok(&moments::g_squared_coefficient_check(&ctx.config()?, *k_max)?)),
        MomentsCmd::Phi { law } => {
            let cfg = ctx.config()?;
            let l = ctx.law(law, &cfg)?;
            let value = moments::general_phi_identity(&cfg, &l);
            let energy = fields::pairwise_energy(&cfg, &l);
            Ok(Outcome::ok(&json!({ "law": l.label(), "identity": value, "pairwise_energy": energy })))
        }
        MomentsCmd::Scaling { lambdas } => {
            let l = if lambdas.is_empty() {
                vec![1.0 / E, 1.0, E]
            } else {
                lambdas.clone()
            };
            Ok(Outcome::ok(&moments::scaling_identity_check(&ctx.config()?, &l)?))
        }
        MomentsCmd::Continuous {
            k_max,
            radius,
            density,
            n_radial,
            n_angular,
            z,
        } => {
            let from_input = match &ctx.input {
                Some(i) => i.doc.grid()?,
                None => None,
            };
            let grid = match from_input {
                Some(g) => g,
                None => {
                    let c = *density;
                    DensityGrid::disk([0.0, 0.0], *radius, *n_radial, *n_angular, move |_, _| c)?
                }
            };
            let report = moments::continuous_moment_report(&grid, *k_max)?;
            let gtilde = match z {
                Some(v) if v.len() == 2 => Some(moments::gtilde_decomposition_check(&grid, Complex64::new(v[0], v[1]))?),
                Some(_) => return Err(CliError::Usage("--z needs re,im".into())),
                None => None,
            };
            Ok(Outcome::ok(&json!({ "report": report, "gtilde": gtilde })))
        }
    }
}

fn point_rows(points: &[maxwell::CriticalPoint]) -> Vec<u8> {
    let rows: Vec<_> = points
        .iter()
        .map(|p| (p.location, p.residual, p.hessian_eigenvalues, p.kind.as_str()))
        .collect();
    io::csv_bytes(&rows)
}

fn maxwell_cmd(cmd: &MaxwellCmd, ctx: &mut Ctx) -> Result<Outcome, CliError> {
    match cmd {
        MaxwellCmd::Find {
            search_box,
            starts,
            jitter,
        } => {
            let cfg = ctx.config()?;
            let bx = match search_box {
                Some(v) if v.len() == 2 => SearchBox::cube(v[0], v[1])?,
                Some(v) if v.len() == 6 => SearchBox::new([v[0], v[1], v[2]], [v[3], v[4], v[5]])?,
                Some(_) => return Err(CliError::Usage("--box needs a,b or x0,y0,z0,x1,y1,z1".into())),
                None => SearchBox::around(&cfg),
            };
            let settings = FindSettings {
                starts: *starts,
                tol: ctx.tol.unwrap_or(FindSettings::default().tol),
                ..Default::default()
            };
            let mut pts = maxwell::default_starts(&cfg, &bx, settings.starts);
            if *jitter > 0.0 {
                for p in &mut pts {
                    for k in 0..3 {
                        let span = bx.hi[k] - bx.lo[k];
                        let u: f64 = ctx.rng.random();
                        p[k] += jitter * span * (u - 0.5);
                    }
                }
            }
            let set = maxwell::find_critical_points_from(&cfg, &bx, &pts, &settings)?;
            let csv = point_rows(&set.points);
            let degenerate = set.count_of(CriticalKind::Degenerate);
            let n = cfg.len();
            let out = Outcome {
                output: Output::Points(to_value(&set), csv),
                negative: false,
                messages: vec![format!(
                    "{} critical points found at this resolution ({} degenerate); (n-1)^2 = {}",
                    set.count(),
                    degenerate,
                    (n.max(1) - 1).pow(2)
                )],
            };
            Ok(out)
        }
        MaxwellCmd::Trace { from, step, max_points } => {
            let cfg = ctx.config()?;
            let trace = run_trace(&cfg, from, *step, *max_points, ctx.tol)?;
            let field = maxwell::Field3::new(&cfg)?;
            let rows: Vec<_> = trace
                .points
                .iter()
                .map(|p| {
                    let x = nalgebra::Vector3::from(*p);
                    let (eigs, _) = maxwell::sorted_eigen(&field.hessian(&x));
                    (*p, field.gradient(&x).norm(), eigs, CriticalKind::classify(&eigs).as_str())
                })
                .collect();
            let csv = io::csv_bytes(&rows);
            Ok(Outcome {
                output: Output::Points(to_value(&trace), csv),
                negative: false,
                messages: vec!["line and circle fit residuals are advisory".into()],
            })
        }
        MaxwellCmd::Transversality {
            from,
            plane,
            step,
            max_points,
        } => {
            let cfg = ctx.config()?;
            if plane.len() != 4 {
                return Err(CliError::Usage("--plane needs nx,ny,nz,offset".into()));
            }
            let trace = run_trace(&cfg, from, *step, *max_points, ctx.tol)?;
            let pl = Plane {
                normal: [plane[0], plane[1], plane[2]],
                offset: plane[3],
            };
            let crossings = maxwell::transversality_angle(&trace, &pl)?;
            Ok(Outcome::ok(&json!({ "closed": trace.closed, "points": trace.points.len(), "crossings": crossings })))
        }
        MaxwellCmd::Census {
            trials,
            charges,
            starts,
        } => {
            let settings = FindSettings {
                starts: *starts,
                tol: ctx.tol.unwrap_or(FindSettings::default().tol),
                ..Default::default()
            };
            let entries = maxwell::random_census(&mut ctx.rng, *trials, *charges, &settings)?;
            let over = entries.iter().filter(|e| e.found > e.conjectured_bound).count();
            Ok(Outcome::ok(&entries).note(format!(
                "{over} of {} configurations exceed (n-1)^2 at this resolution; counts are not certified",
                entries.len()
            )))
        }
    }
}

fn run_trace(
    cfg: &ChargeConfiguration,
    from: &[f64],
    step: Option<f64>,
    max_points: usize,
    tol: Option<f64>,
) -> Result<maxwell::CurveTrace, CliError> {
    let seed = point3(from, "--from")?;
    let settings = TraceSettings {
        step,
        tol: tol.unwrap_or(TraceSettings::default().tol),
        max_points,
    };
    Ok(maxwell::trace_curve(cfg, &seed, &settings)?)
}

fn faraday_cmd(cmd: &FaradayCmd, ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let given = match &ctx.input {
        Some(i) => i.doc.measure()?,
        None => None,
    };
    let note = "finitely supported discretization; results hold at this resolution only";
    let default_note = "no input measure: using the reference two-shell measure (+2 at r = 0.5, -1 at r = 0.8)";
    let mu = given.clone().unwrap_or_else(faraday::reference_two_shell);
    let out = match cmd {
        FaradayCmd::Moments { degree } => {
            if *degree > faraday::MAX_DEGREE {
                return Err(CliError::Usage(format!("--degree is capped at {}", faraday::MAX_DEGREE)));
            }
            Outcome::ok(&json!({ "degree_max": degree, "moments": faraday::exterior_moments(&mu, *degree) }))
        }
        FaradayCmd::Solve { degree } => {
            let tol = ctx.tol.unwrap_or(1e-8);
            let cert = match &given {
                Some(m) => faraday::solve_positive_equivalent(m, *degree, tol)?,
                None => faraday::solve_with_refinement(
                    |k| faraday::two_shell((0.5, 2.0), (0.8, -1.0), 16 * k, 32 * k),
                    *degree,
                    tol,
                )?,
            };
            let feasible = cert.feasible;
            Outcome::ok(&cert).negative(
                !feasible,
                "no nonnegative measure found: counterexample candidate at this resolution, not a disproof",
            )
        }
        FaradayCmd::Verify { samples } => Outcome::ok(&json!({
            "samples": samples,
            "radius": faraday::TEST_RADIUS,
            "max_mismatch": faraday::verify_exterior_match(&mu, *samples),
        })),
    };
    let out = out.note(note);
    Ok(if given.is_none() { out.note(default_note) } else { out })
}

/// Measure document for the reference two-shell measure, handy as a
/// starting point for experiments.
pub fn measure_document(mu: &DiscreteMeasure) -> InputDoc {
    InputDoc {
        nodes: Some(mu.nodes().to_vec()),
        masses: Some(mu.masses().to_vec()),
        ..Default::default()
    }
}
