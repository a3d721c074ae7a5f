//! `shapecurv`: curvature, geodesics and validation from the command line.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "shapecurv", version, about = "Sectional curvature and geodesics of kernel metrics")]
pub struct Cli {
    /// Seed for randomized suites and trials.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads (falls back to GEO_THREADS, then 1).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Override a named tolerance, e.g. `--tol-override oneill_hopf=1e-7`.
    #[arg(long = "tol-override", global = true, value_parser = parse_override)]
    pub tol_override: Vec<(String, f64)>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Kernel evaluation.
    #[command(subcommand)]
    Kernel(KernelCmd),
    /// Sectional curvature numerators.
    #[command(subcommand)]
    Curvature(CurvatureCmd),
    /// Geodesic integration.
    #[command(subcommand)]
    Geodesic(GeodesicCmd),
    /// Find the initial momentum joining two landmark configurations.
    Match(MatchArgs),
    /// Submersion curvature checks.
    #[command(subcommand)]
    Oneill(OneillCmd),
    /// Catalog shape generators.
    #[command(subcommand)]
    Shape(ShapeCmd),
    /// Run the cross-oracle validation suite and print a pass/fail table.
    Validate(ValidateArgs),
}

#[derive(Debug, Subcommand)]
pub enum KernelCmd {
    /// Value, gradient and Hessian at one displacement.
    Eval {
        #[arg(long)]
        spec: PathBuf,
        /// Comma-separated displacement.
        #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
        r: List,
    },
}

#[derive(Debug, Subcommand)]
pub enum CurvatureCmd {
    /// A cometric chart: all formula paths plus the Christoffel oracle.
    Chart {
        /// Cometric JSON file or `catalog:<name>` (sphere[:d], hyperbolic, euclidean:<d>).
        #[arg(long)]
        cometric: String,
        #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
        point: List,
        #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
        alpha: List,
        #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
        beta: List,
    },
    /// Landmark file: alpha = p, beta from the file or p rotated a quarter turn.
    Landmark {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        kernel: Option<PathBuf>,
    },
    /// Shape file: alpha = momenta, beta from the file.
    Shape {
        #[arg(long)]
        shape: PathBuf,
        #[arg(long)]
        kernel: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Rk4,
    ImplicitMidpoint,
}

#[derive(Debug, Subcommand)]
pub enum GeodesicCmd {
    /// Integrate from a landmark or shape file and write a CSV trajectory.
    Shoot {
        #[arg(long, conflicts_with = "shape", required_unless_present = "shape")]
        state: Option<PathBuf>,
        #[arg(long)]
        shape: Option<PathBuf>,
        #[arg(long)]
        kernel: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long = "T", default_value_t = 1.0)]
        t_end: f64,
        #[arg(long, value_enum, default_value_t = MethodArg::Rk4)]
        method: MethodArg,
        #[arg(long, default_value_t = 1)]
        monitor_every: usize,
    },
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long)]
    pub kernel: Option<PathBuf>,
    #[arg(long = "T", default_value_t = 1.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub dt: f64,
    #[arg(long, default_value_t = 25)]
    pub max_iter: usize,
    /// Weight of the optional energy penalty.
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CaseArg {
    Product,
    Hopf,
    Flat,
}

#[derive(Debug, Subcommand)]
pub enum OneillCmd {
    /// Residuals at random points with random base coforms.
    Check {
        #[arg(long, value_enum)]
        case: CaseArg,
        #[arg(long, default_value_t = 10)]
        trials: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum ShapeCmd {
    /// Make a catalog shape file.
    #[command(subcommand)]
    Make(ShapeMake),
}

#[derive(Debug, Subcommand)]
pub enum ShapeMake {
    /// Circle with unit radial momentum and `beta = cos 2θ` radial.
    Circle {
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long, default_value_t = 64)]
        samples: usize,
    },
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Fewer random trials and coarser quadrature.
    #[arg(long)]
    pub quick: bool,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone)]
pub struct List(pub Vec<f64>);

fn parse_list(s: &str) -> Result<List, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("`{t}` is not a number")))
        .collect::<Result<Vec<_>, _>>()
        .map(List)
}

fn parse_override(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let v: f64 = value
        .parse()
        .map_err(|_| format!("`{value}` is not a number"))?;
    if !(v > 0.0) {
        return Err(format!("tolerance for `{name}` must be positive"));
    }
    Ok((name.to_string(), v))
}

/// Usage errors exit with 2, computation errors with 1.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Compute(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Compute(e)
    }
}

impl From<shapecurv::Error> for Failure {
    fn from(e: shapecurv::Error) -> Self {
        Failure::Compute(e.into())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
