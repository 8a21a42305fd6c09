//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage, I/O or parse error, 2 domain failure
//! (a violated hypothesis or a missing object).

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::bifurcation::{classify_corner, classify_fold};
use crate::config::{load_system, parse_system, ConfigError};
use crate::expr::Expression;
use crate::fixtures;
use crate::integrator::{integrate, EventSpec, IntegratorConfig, Mode};
use crate::io::{write_events_csv, write_shadow_csv, write_sweep_csv, write_trajectory_csv};
use crate::orbits::{shadow_compare, sweep_amplitude, OrbitError, SweepOptions};
use crate::system::{validate, SystemDefinition};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DOMAIN: i32 = 2;
pub const THREADS_ENV: &str = "PWSC_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "pwsc",
    version,
    about = "Piecewise-smooth Liénard systems: validation, bifurcation classification, simulation and canard sweeps"
)]
struct Cli {
    /// Where to write the run manifest (defaults to `<first output>.manifest.json`, or stderr)
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the standing hypotheses on a system file
    Validate {
        path: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Classify the bifurcation at the corner, or at the fold with --fold
    Classify {
        path: PathBuf,
        #[arg(long)]
        fold: bool,
        #[arg(long)]
        json: Option<PathBuf>,
        /// Parameter window scanned by --fold
        #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], allow_negative_numbers = true, default_values_t = [-10.0, 10.0])]
        lambda_window: Vec<f64>,
    },
    /// Integrate one trajectory
    Simulate(SimulateArgs),
    /// Attracting-cycle amplitude over a parameter range
    Sweep(SweepArgs),
    /// Compare an excursion into x < 0 with the shadow system
    ShadowCheck(ShadowArgs),
    /// List the bundled systems
    Fixtures {
        /// Also write the bundled files into this directory
        #[arg(long)]
        write: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct SimulateArgs {
    path: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    x0: f64,
    #[arg(long, allow_negative_numbers = true)]
    y0: f64,
    #[arg(long)]
    t_max: f64,
    /// Integrate in reverse time
    #[arg(long)]
    backward: bool,
    #[arg(long, default_value_t = 1e-9)]
    rtol: f64,
    #[arg(long, default_value_t = 1e-12)]
    atol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    events: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    path: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    lambda_min: f64,
    #[arg(long, allow_negative_numbers = true)]
    lambda_max: f64,
    /// Number of grid intervals
    #[arg(long, default_value_t = 50)]
    steps: usize,
    #[arg(long)]
    refine: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ShadowArgs {
    path: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    yc: f64,
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    /// Left piece of the comparison system instead of f_plus
    #[arg(long, allow_hyphen_values = true)]
    replacement: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Domain(_) => EXIT_DOMAIN,
            _ => EXIT_USAGE,
        }
    }
}

impl From<OrbitError> for CliError {
    fn from(e: OrbitError) -> Self {
        CliError::Domain(e.to_string())
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub input: Option<PathBuf>,
    pub parameters: Value,
    pub version: &'static str,
    pub started_unix: f64,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<PathBuf>,
    pub exit_code: i32,
}

struct Context<'a> {
    stdout: &'a mut dyn Write,
    outputs: Vec<PathBuf>,
    parameters: Value,
    input: Option<PathBuf>,
}

impl Context<'_> {
    fn create(&mut self, path: &Path) -> Result<BufWriter<File>, CliError> {
        let file = File::create(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.outputs.push(path.to_path_buf());
        Ok(BufWriter::new(file))
    }

    fn write_file(
        &mut self,
        path: &Path,
        body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
    ) -> Result<(), CliError> {
        let mut w = self.create(path)?;
        body(&mut w)
            .and_then(|_| w.flush())
            .map_err(|source| CliError::Io {
                path: path.to_path_buf(),
                source,
            })
    }

    fn print(
        &mut self,
        body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
    ) -> Result<(), CliError> {
        body(self.stdout).map_err(|source| CliError::Io {
            path: PathBuf::from("<stdout>"),
            source,
        })
    }

    fn emit_json(&mut self, value: &impl Serialize, file: Option<&Path>) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).expect("reports serialize");
        if let Some(path) = file {
            self.write_file(path, |w| writeln!(w, "{text}"))?;
        }
        self.print(|w| writeln!(w, "{text}"))
    }
}

/// Reads a system file; names of bundled fixtures resolve to the bundled copy
/// when no such file exists.
fn load(path: &Path) -> Result<SystemDefinition, CliError> {
    if !path.exists() {
        let bundled = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(fixtures::by_name);
        if let Some(f) = bundled {
            return Ok(parse_system(f.source)?);
        }
    }
    Ok(load_system(path)?)
}

fn require_valid(ctx: &mut Context, sys: &SystemDefinition) -> Result<(), CliError> {
    let report = validate(sys, sys.x_window());
    if report.passed {
        return Ok(());
    }
    ctx.emit_json(&report, None)?;
    Err(CliError::Domain(format!(
        "hypotheses violated: {}",
        report
            .failed_checks()
            .map(|c| c.name)
            .collect::<Vec<_>>()
            .join(", ")
    )))
}

fn finite(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("--{name} must be finite, got {v}")))
    }
}

fn cmd_validate(ctx: &mut Context, path: &Path, json: Option<&Path>) -> Result<i32, CliError> {
    let sys = load(path)?;
    let report = validate(&sys, sys.x_window());
    ctx.emit_json(&report, json)?;
    Ok(if report.passed { EXIT_OK } else { EXIT_DOMAIN })
}

fn cmd_classify(
    ctx: &mut Context,
    path: &Path,
    fold: bool,
    json: Option<&Path>,
    window: &[f64],
) -> Result<i32, CliError> {
    let sys = load(path)?;
    require_valid(ctx, &sys)?;
    let report = if fold {
        let (lo, hi) = (window[0], window[1]);
        if !(lo < hi) {
            return Err(CliError::Usage(format!("empty lambda window [{lo}, {hi}]")));
        }
        classify_fold(&sys, (lo, hi))
    } else {
        classify_corner(&sys)
    }
    .map_err(|e| CliError::Domain(e.to_string()))?;
    ctx.emit_json(&report, json)?;
    Ok(EXIT_OK)
}

fn cmd_simulate(ctx: &mut Context, a: &SimulateArgs) -> Result<i32, CliError> {
    let x0 = finite("x0", a.x0)?;
    let y0 = finite("y0", a.y0)?;
    let t_max = finite("t-max", a.t_max)?;
    if t_max < 0.0 {
        return Err(CliError::Usage(format!(
            "--t-max must be non-negative, got {t_max}"
        )));
    }
    let mut sys = load(&a.path)?;
    if let Some(l) = a.lambda {
        sys = sys.with_lambda(finite("lambda", l)?);
    }
    let cfg = IntegratorConfig::with_tolerances(a.rtol, a.atol);
    let (lo, hi) = sys.x_window();
    let events = [
        EventSpec::new("escape", move |_, x, _| x - lo).terminal(),
        EventSpec::new("escape", move |_, x, _| x - hi).terminal(),
    ];
    let mode = if a.backward {
        Mode::Backward
    } else {
        Mode::Forward
    };
    let traj = integrate(&sys, (x0, y0), (0.0, t_max), &cfg, &events, mode)
        .map_err(|e| CliError::Domain(e.to_string()))?;
    match &a.out {
        Some(path) => {
            ctx.write_file(path, |w| write_trajectory_csv(w, &traj))?;
            let last = traj.last();
            let summary = json!({
                "points": traj.points.len(),
                "events": traj.events.len(),
                "termination": traj.termination,
                "final": last,
            });
            ctx.emit_json(&summary, None)?;
        }
        None => ctx.print(|w| write_trajectory_csv(w, &traj))?,
    }
    if let Some(path) = &a.events {
        ctx.write_file(path, |w| write_events_csv(w, &traj))?;
    }
    Ok(EXIT_OK)
}

fn cmd_sweep(ctx: &mut Context, a: &SweepArgs) -> Result<i32, CliError> {
    let (lo, hi) = (
        finite("lambda-min", a.lambda_min)?,
        finite("lambda-max", a.lambda_max)?,
    );
    if !(lo < hi) {
        return Err(CliError::Usage(format!("empty lambda range [{lo}, {hi}]")));
    }
    if a.steps == 0 {
        return Err(CliError::Usage("--steps must be positive".into()));
    }
    let sys = load(&a.path)?;
    require_valid(ctx, &sys)?;
    let mut options = SweepOptions::new((lo, hi), a.steps);
    options.refine = a.refine;
    let result = sweep_amplitude(&sys, &options)?;
    let summary = json!({
        "lambda_range": [lo, hi],
        "steps": a.steps,
        "refined": result.refined,
        "cycles_found": result.points.iter().filter(|p| p.found).count(),
        "plateau_amplitude": result.plateau_amplitude,
        "onset": result.onset,
        "first_amplitude": result.first_amplitude,
        "super_explosion": result.super_explosion,
        "window": result.window,
        "window_width": result.window_width,
    });
    if let Some(path) = &a.summary {
        let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
        ctx.write_file(path, |w| writeln!(w, "{text}"))?;
    }
    match &a.out {
        Some(path) => {
            ctx.write_file(path, |w| write_sweep_csv(w, &result.points))?;
            ctx.emit_json(&summary, None)?;
        }
        None => ctx.print(|w| write_sweep_csv(w, &result.points))?,
    }
    Ok(EXIT_OK)
}

fn cmd_shadow(ctx: &mut Context, a: &ShadowArgs) -> Result<i32, CliError> {
    let yc = finite("yc", a.yc)?;
    if yc <= 0.0 {
        return Err(CliError::Usage(format!("--yc must be positive, got {yc}")));
    }
    let sys = load(&a.path)?;
    let lambda = match a.lambda {
        Some(l) => finite("lambda", l)?,
        None => sys.lambda(),
    };
    let replacement = match &a.replacement {
        Some(src) => Some(
            Expression::parse(src).map_err(|e| CliError::Usage(format!("--replacement: {e}")))?,
        ),
        None => None,
    };
    let cmp = shadow_compare(&sys, yc, lambda, replacement.as_ref())?;
    if let Some(path) = &a.out {
        ctx.write_file(path, |w| write_shadow_csv(w, &cmp))?;
    }
    let passes = cmp.passes();
    let summary = json!({
        "y_c": cmp.y_c,
        "lambda": cmp.lambda,
        "max_violation": cmp.max_violation,
        "tolerance": 1e-8 * (1.0 + yc * yc),
        "passes": passes,
        "max_equal_time_difference": cmp.max_equal_time_difference,
        "reentry_true": cmp.reentry_true,
        "reentry_shadow": cmp.reentry_shadow,
        "samples": cmp.samples.len(),
    });
    ctx.emit_json(&summary, None)?;
    Ok(if passes { EXIT_OK } else { EXIT_DOMAIN })
}

fn cmd_fixtures(ctx: &mut Context, write: Option<&Path>) -> Result<i32, CliError> {
    let list = fixtures::all();
    if let Some(dir) = write {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        for f in &list {
            ctx.write_file(&dir.join(f.file_name), |w| w.write_all(f.source.as_bytes()))?;
        }
    }
    ctx.print(|w| {
        for f in &list {
            writeln!(w, "{:<8} {}", f.name, f.summary)?;
        }
        Ok(())
    })?;
    Ok(EXIT_OK)
}

fn configure_threads() {
    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok());
    if let Some(n) = threads.filter(|&n| n > 0) {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

fn describe(command: &Command) -> (&'static str, Option<PathBuf>, Value) {
    match command {
        Command::Validate { path, .. } => ("validate", Some(path.clone()), json!({})),
        Command::Classify {
            path,
            fold,
            lambda_window,
            ..
        } => (
            "classify",
            Some(path.clone()),
            json!({ "fold": fold, "lambda_window": lambda_window }),
        ),
        Command::Simulate(a) => (
            "simulate",
            Some(a.path.clone()),
            json!({ "lambda": a.lambda, "x0": a.x0, "y0": a.y0, "t_max": a.t_max,
                    "backward": a.backward, "rtol": a.rtol, "atol": a.atol }),
        ),
        Command::Sweep(a) => (
            "sweep",
            Some(a.path.clone()),
            json!({ "lambda_min": a.lambda_min, "lambda_max": a.lambda_max,
                    "steps": a.steps, "refine": a.refine }),
        ),
        Command::ShadowCheck(a) => (
            "shadow-check",
            Some(a.path.clone()),
            json!({ "yc": a.yc, "lambda": a.lambda, "replacement": a.replacement }),
        ),
        Command::Fixtures { .. } => ("fixtures", None, json!({})),
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit
/// code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let help = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let text = e.render().to_string();
            if help {
                let _ = write!(stdout, "{text}");
                return EXIT_OK;
            }
            let _ = write!(stderr, "{text}");
            return EXIT_USAGE;
        }
    };
    configure_threads();

    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64());
    let clock = Instant::now();
    let (name, input, parameters) = describe(&cli.command);
    let mut ctx = Context {
        stdout,
        outputs: Vec::new(),
        parameters,
        input,
    };
    let result = match &cli.command {
        Command::Validate { path, json } => cmd_validate(&mut ctx, path, json.as_deref()),
        Command::Classify {
            path,
            fold,
            json,
            lambda_window,
        } => cmd_classify(&mut ctx, path, *fold, json.as_deref(), lambda_window),
        Command::Simulate(a) => cmd_simulate(&mut ctx, a),
        Command::Sweep(a) => cmd_sweep(&mut ctx, a),
        Command::ShadowCheck(a) => cmd_shadow(&mut ctx, a),
        Command::Fixtures { write } => cmd_fixtures(&mut ctx, write.as_deref()),
    };
    let code = match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    };

    let manifest = RunManifest {
        command: name.to_string(),
        input: ctx.input.take(),
        parameters: ctx.parameters.take(),
        version: env!("CARGO_PKG_VERSION"),
        started_unix: started,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
        outputs: ctx.outputs.clone(),
        exit_code: code,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    let target = cli.manifest.clone().or_else(|| {
        ctx.outputs
            .first()
            .map(|p| PathBuf::from(format!("{}.manifest.json", p.display())))
    });
    match target {
        Some(path) => {
            if let Err(e) = std::fs::write(&path, format!("{text}\n")) {
                let _ = writeln!(stderr, "error: {}: {e}", path.display());
                return if code == EXIT_OK { EXIT_USAGE } else { code };
            }
        }
        None => {
            let _ = writeln!(
                stderr,
                "{}",
                serde_json::to_string(&manifest).expect("manifest serializes")
            );
        }
    }
    code
}
