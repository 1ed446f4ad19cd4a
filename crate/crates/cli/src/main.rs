#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use stokes_cli::report::{jump_rows, lateral_rows, write_sweep_csv};
use stokes_cli::{load_scenario, run_validation, sweep, Scenario, SweepAxis};
use stokes_core::kernels::{EcalleKernel, EcalleKernelSpec};

#[derive(Parser)]
#[command(
    name = "stokes",
    version,
    about = "Lateral sums and Stokes jumps for ∂t^p u = ∂z^q u"
)]
struct Cli {
    /// Scenario file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; stdout if absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the scenario tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lateral sums at one direction for every t of the scenario.
    Sum {
        /// Direction θ in radians; defaults to just above the Stokes direction.
        #[arg(long, allow_hyphen_values = true)]
        theta: Option<f64>,
    },
    /// Closed-form jumps.
    Jump,
    /// Numeric jump against the closed form; exit status 0 iff every row passes.
    Validate,
    /// Evaluate C_α (or a derivative) on a square grid, as CSV.
    Kernel {
        #[arg(long)]
        alpha: f64,
        /// Half-width of the grid.
        #[arg(long, default_value_t = 5.0)]
        extent: f64,
        /// Points per axis.
        #[arg(long, default_value_t = 11)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        derivative: usize,
    },
    /// Vary one parameter over a grid, as CSV.
    Sweep {
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated grid values; may be empty.
        #[arg(long, allow_hyphen_values = true, value_parser = parse_grid, default_value = "")]
        grid: Grid,
    },
}

#[derive(Clone)]
struct Grid(Vec<f64>);

fn parse_grid(text: &str) -> Result<Grid, String> {
    text.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse::<f64>().map_err(|e| format!("`{v}`: {e}")))
        .collect::<Result<Vec<_>, _>>()
        .map(Grid)
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    TModulus,
    ZReal,
    EpsDir,
}

impl From<Axis> for SweepAxis {
    fn from(a: Axis) -> Self {
        match a {
            Axis::TModulus => SweepAxis::TModulus,
            Axis::ZReal => SweepAxis::ZReal,
            Axis::EpsDir => SweepAxis::EpsDir,
        }
    }
}

fn scenario(cli: &Cli) -> Result<Scenario, String> {
    let path = cli
        .config
        .as_ref()
        .ok_or("--config is required for this command")?;
    let mut s = load_scenario(path).map_err(|e| e.to_string())?;
    if let Some(tol) = cli.tol {
        if !(tol > 0.0) {
            return Err(format!("--tol must be positive, got {tol}"));
        }
        s.tolerance = tol;
    }
    Ok(s)
}

fn output(cli: &Cli) -> io::Result<Box<dyn Write>> {
    Ok(match &cli.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: serde::Serialize>(cli: &Cli, value: &T) -> Result<(), String> {
    let mut w = output(cli).map_err(|e| e.to_string())?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| e.to_string())?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(|e| e.to_string())
}

fn kernel_grid(
    cli: &Cli,
    alpha: f64,
    extent: f64,
    points: usize,
    derivative: usize,
) -> Result<bool, String> {
    let spec = EcalleKernelSpec::new(alpha).map_err(|e| e.to_string())?;
    let kernel = EcalleKernel::new(spec).map_err(|e| e.to_string())?;
    let axis: Vec<f64> = match points {
        0 => vec![],
        1 => vec![0.0],
        n => (0..n)
            .map(|i| -extent + 2.0 * extent * i as f64 / (n - 1) as f64)
            .collect(),
    };
    let mut w = csv::Writer::from_writer(output(cli).map_err(|e| e.to_string())?);
    let io_err = |e: csv::Error| e.to_string();
    w.write_record(["re_tau", "im_tau", "re_value", "im_value", "error"])
        .map_err(io_err)?;
    let mut ok = true;
    for &im in &axis {
        for &re in &axis {
            let tau = Complex64::new(re, im);
            let (v, e) = match kernel.derivative(derivative, tau) {
                Ok(k) => (k.value, k.error),
                Err(err) => {
                    eprintln!("τ = {tau}: {err}");
                    ok = false;
                    (Complex64::new(f64::NAN, f64::NAN), f64::NAN)
                }
            };
            w.write_record([
                re.to_string(),
                im.to_string(),
                v.re.to_string(),
                v.im.to_string(),
                e.to_string(),
            ])
            .map_err(io_err)?;
        }
    }
    w.flush().map_err(|e| e.to_string())?;
    Ok(ok)
}

fn run(cli: &Cli) -> Result<bool, String> {
    match &cli.command {
        Command::Sum { theta } => {
            let rows = lateral_rows(&scenario(cli)?, *theta);
            write_json(cli, &rows)?;
            Ok(rows.iter().all(|r| r.error.is_none()))
        }
        Command::Jump => {
            let rows = jump_rows(&scenario(cli)?);
            write_json(cli, &rows)?;
            Ok(rows.iter().all(|r| r.error.is_none()))
        }
        Command::Validate => {
            let report = run_validation(&scenario(cli)?);
            write_json(cli, &report)?;
            Ok(report.all_pass)
        }
        Command::Kernel {
            alpha,
            extent,
            points,
            derivative,
        } => kernel_grid(cli, *alpha, *extent, *points, *derivative),
        Command::Sweep { axis, grid } => {
            let rows = sweep(&scenario(cli)?, (*axis).into(), &grid.0);
            for r in &rows {
                if let Some(e) = &r.error {
                    eprintln!("{}: {e}", r.axis);
                }
            }
            let w = output(cli).map_err(|e| e.to_string())?;
            write_sweep_csv(&rows, w).map_err(|e| e.to_string())?;
            Ok(rows.iter().all(|r| r.pass))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
