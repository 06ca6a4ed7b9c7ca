use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use plate_core::diagnostics::{assemble_report, ReportInputs};
use plate_core::grid::{make_shape, Shape};
use plate_core::io::{
    read_config, read_result, write_field_csv, write_outputs, write_pgm, OutputPaths, RunConfig,
    RunRecord,
};
use plate_core::optimizer::{certify_result, minimize_penalized, Verdict};
use plate_core::spectral::{min_eigenpair, pde_residual};
use plate_core::theory::{thresholds_with_constant, unit_ball_volume};
use plate_core::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_NONCONVERGENCE: u8 = 2;
const EXIT_CERTIFICATE_FAIL: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "plate",
    version,
    about = "Buckling-load shape optimization on Cartesian grids"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the closed-form constants and volume thresholds as JSON.
    Constants {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        omega0: f64,
        /// Penalty parameter used for alpha0; defaults to 0.9 eps1.
        #[arg(long)]
        eps: Option<f64>,
        /// Replace the computed symmetrization constant.
        #[arg(long = "c-n")]
        c_n: Option<f64>,
    },
    /// Solve the eigenproblem on a generated shape.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        shape: Option<ShapeKind>,
        /// Comma-separated center; defaults to the container center.
        #[arg(long, value_delimiter = ',')]
        center: Option<Vec<f64>>,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        semiaxes: Option<Vec<f64>>,
        #[arg(long = "half-widths", value_delimiter = ',')]
        half_widths: Option<Vec<f64>>,
        #[arg(long)]
        inner: Option<f64>,
        #[arg(long)]
        outer: Option<f64>,
        /// Output directory; defaults to the config's.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the optimizer, certificate and diagnostics, and write all outputs.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Recompute diagnostics for a stored result JSON.
    Diagnose {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ShapeKind {
    Ball,
    Ellipse,
    Rectangle,
    Annulus,
}

enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_USAGE);
    }
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::NonConvergence { .. } => ExitCode::from(EXIT_NONCONVERGENCE),
                _ => ExitCode::from(EXIT_USAGE),
            }
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("PLATE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("PLATE_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn print_json(v: &serde_json::Value) {
    use std::io::Write;
    // a closed pipe downstream is not an error worth reporting
    let _ = writeln!(
        std::io::stdout().lock(),
        "{}",
        serde_json::to_string_pretty(v).expect("JSON values serialize")
    );
}

fn run(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Constants {
            dim,
            omega0,
            eps,
            c_n,
        } => constants(dim, omega0, eps, c_n),
        Command::Solve {
            config,
            shape,
            center,
            radius,
            semiaxes,
            half_widths,
            inner,
            outer,
            output,
        } => {
            let cfg = read_config(&config)?;
            let shape = build_shape(
                &cfg,
                shape,
                center,
                radius,
                semiaxes,
                half_widths,
                inner,
                outer,
            )?;
            solve(&cfg, &shape, output)
        }
        Command::Optimize { config, output } => {
            let mut cfg = read_config(&config)?;
            if let Some(dir) = output {
                cfg.output_dir = std::env::current_dir()
                    .map(|d| d.join(dir))
                    .unwrap_or_default();
            }
            optimize(&cfg)
        }
        Command::Diagnose { input } => diagnose(&input),
    }
}

fn constants(dim: usize, omega0: f64, eps: Option<f64>, c_n: Option<f64>) -> Result<u8, Failure> {
    let base = thresholds_with_constant(dim, omega0, 1.0, c_n)?;
    let eps = eps.unwrap_or(0.9 * base.eps1);
    let th = thresholds_with_constant(dim, omega0, eps, c_n)?;
    print_json(&json!({
        "dim": dim,
        "omega0": omega0,
        "eps": eps,
        "omega_n": th.omega_n,
        "lambda_ball_unit": th.lambda_ball_unit,
        "ball_buckling_load": th.ball_load(),
        "c_n": th.c_n,
        "eps1": th.eps1,
        "eps0": th.eps0,
        "alpha0": th.alpha0,
    }));
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn build_shape(
    cfg: &RunConfig,
    kind: Option<ShapeKind>,
    center: Option<Vec<f64>>,
    radius: Option<f64>,
    semiaxes: Option<Vec<f64>>,
    half_widths: Option<Vec<f64>>,
    inner: Option<f64>,
    outer: Option<f64>,
) -> Result<Shape<f64>, Failure> {
    let grid_center = cfg.container.to_container().bounding_side() / 2.0;
    let center = center.unwrap_or_else(|| vec![grid_center; cfg.dim]);
    let need = |what: &str| Failure::Usage(format!("--{what} is required for this shape"));
    let default_radius =
        || (cfg.omega0 / unit_ball_volume::<f64>(cfg.dim)).powf(1.0 / cfg.dim as f64);
    Ok(match kind {
        None => match &cfg.shape {
            Some(s) => s.clone(),
            None => Shape::Ball {
                center,
                radius: radius.unwrap_or_else(default_radius),
            },
        },
        Some(ShapeKind::Ball) => Shape::Ball {
            center,
            radius: radius.unwrap_or_else(default_radius),
        },
        Some(ShapeKind::Ellipse) => Shape::Ellipse {
            center,
            semiaxes: semiaxes.ok_or_else(|| need("semiaxes"))?,
        },
        Some(ShapeKind::Rectangle) => Shape::Rectangle {
            center,
            half_widths: half_widths.ok_or_else(|| need("half-widths"))?,
        },
        Some(ShapeKind::Annulus) => Shape::Annulus {
            center,
            inner: inner.ok_or_else(|| need("inner"))?,
            outer: outer.ok_or_else(|| need("outer"))?,
        },
    })
}

fn solve(cfg: &RunConfig, shape: &Shape<f64>, output: Option<PathBuf>) -> Result<u8, Failure> {
    let grid = cfg.build_grid()?;
    let support = make_shape(&grid, shape)?;
    let eig = min_eigenpair(&support, cfg.objective, &cfg.eigen_options())?;
    let paths = match output {
        Some(dir) => OutputPaths::new(dir),
        None => cfg.output_paths(),
    };
    write_field_csv(&paths.field_csv(), &eig.field)?;
    let indicator: Vec<f64> = support
        .active()
        .iter()
        .map(|&a| f64::from(u8::from(a)))
        .collect();
    let support_scale = write_pgm(&paths.support_image(), &grid, &indicator)?;
    let abs_u: Vec<f64> = eig.field.values().iter().map(|u| u.abs()).collect();
    let field_scale = write_pgm(&paths.field_image(), &grid, &abs_u)?;
    print_json(&json!({
        "shape": shape,
        "objective": cfg.objective,
        "lambda": eig.lambda,
        "residual": eig.residual,
        "iterations": eig.iterations,
        "volume": support.volume(),
        "nodes": support.len(),
        "pde_residual": pde_residual(&eig, &support),
        "images": { "support": support_scale, "abs_u": field_scale },
        "output_dir": paths.dir,
    }));
    Ok(0)
}

fn optimize(cfg: &RunConfig) -> Result<u8, Failure> {
    let prep = cfg.prepare()?;
    let result = minimize_penalized(&prep.optimize)?;
    let certificate = certify_result(&result, &prep.thresholds, &prep.params)?;
    let report = cfg.diagnostics.enabled.then(|| {
        let mut inputs = ReportInputs::new(&result.support, Some(&result.eig), prep.thresholds.c_n);
        inputs.eigen = prep.optimize.eigen;
        inputs.objective = cfg.objective;
        inputs.scale_factor = cfg.diagnostics.scale_factor;
        inputs.scale_tol = cfg.diagnostics.scale_tol;
        inputs.gamma_tol = cfg.diagnostics.gamma_tol;
        inputs.profile_radius = cfg.diagnostics.profile_radius;
        inputs.density_alpha = cfg.diagnostics.density_alpha;
        inputs.monotonicity_pairs = cfg.diagnostics.monotonicity_pairs;
        inputs.seed = cfg.seed;
        inputs.certificate = Some(certificate.clone());
        assemble_report(&inputs)
    });
    let paths = cfg.output_paths();
    let record = RunRecord {
        config: cfg,
        thresholds: &prep.thresholds,
        result: &result,
        certificate: &certificate,
        report: report.as_ref(),
    };
    write_outputs(&record, &paths)?;
    print_json(&json!({
        "i_eps": result.i_eps,
        "lambda": result.eig.lambda,
        "volume": result.volume,
        "omega0": cfg.omega0,
        "converged": result.converged,
        "stop_reason": result.stop_reason,
        "clipping_flag": result.clipping_flag,
        "certificate": { "statement": certificate.statement, "verdict": certificate.verdict },
        "result": paths.result(),
    }));
    Ok(if !result.converged {
        EXIT_NONCONVERGENCE
    } else if certificate.verdict == Verdict::Fail {
        EXIT_CERTIFICATE_FAIL
    } else {
        0
    })
}

fn diagnose(input: &std::path::Path) -> Result<u8, Failure> {
    let stored = read_result(input)?;
    let cfg = &stored.config;
    let support = stored.support()?;
    let eig = min_eigenpair(&support, cfg.objective, &cfg.eigen_options())?;
    let eps = cfg.resolved_eps()?;
    let th = thresholds_with_constant(cfg.dim, cfg.omega0, eps, cfg.c_n)?;
    let mut inputs = ReportInputs::new(&support, Some(&eig), th.c_n);
    inputs.eigen = cfg.eigen_options();
    inputs.scale_factor = cfg.diagnostics.scale_factor;
    inputs.scale_tol = cfg.diagnostics.scale_tol;
    inputs.gamma_tol = cfg.diagnostics.gamma_tol;
    inputs.profile_radius = cfg.diagnostics.profile_radius;
    inputs.density_alpha = cfg.diagnostics.density_alpha;
    inputs.monotonicity_pairs = cfg.diagnostics.monotonicity_pairs;
    inputs.seed = cfg.seed;
    let report = assemble_report(&inputs);
    print_json(&json!({
        "input": input,
        "stored": { "lambda": stored.lambda, "volume": stored.volume, "i_eps": stored.i_eps },
        "recomputed": { "lambda": eig.lambda, "volume": support.volume(), "residual": eig.residual },
        "thresholds": th,
        "diagnostics": report,
    }));
    Ok(0)
}
