//! `bautin-dde`: batch driver for the Bautin analysis pipeline.
//!
//! Exit codes: 0 when the analysis completed (whatever the verdict),
//! 2 for configuration errors, 3 for numerical failures.

use bautin_core::normalform::PipelineOptions;
use bautin_core::report::{run, run_grid, run_simulate, AnalyzeRequest, GridSpec, Mode, SimOptions, DEFAULT_MAX_ITER};
use bautin_core::spectrum::ScanWindow;
use bautin_core::{parse_system, Error, ParamPoint};
use clap::{Parser, ValueEnum};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Spectrum,
    Analyze,
    BautinSearch,
    Simulate,
    Verify,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Spectrum => Mode::Spectrum,
            ModeArg::Analyze => Mode::Analyze,
            ModeArg::BautinSearch => Mode::BautinSearch,
            ModeArg::Simulate => Mode::Simulate,
            ModeArg::Verify => Mode::Verify,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "bautin-dde", version, about = "Bautin bifurcation analysis for delay differential systems")]
struct Cli {
    mode: ModeArg,

    /// System configuration (JSON).
    #[arg(long)]
    system: PathBuf,

    /// Parameter point `A1,A2` (the starting guess for bautin-search).
    #[arg(long, allow_hyphen_values = true)]
    alpha: String,

    /// Parameter grid `a1min:a1max:n1,a2min:a2max:n2` (spectrum and analyze);
    /// streams one JSON record per point.
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,

    /// H1 margin δ (default 0.01/r).
    #[arg(long = "h1-delta")]
    h1_delta: Option<f64>,

    /// Half-width of the root scan in Re λ (default 5/r).
    #[arg(long = "scan-re")]
    scan_re: Option<f64>,

    /// Upper bound of the root scan in Im λ (default 20π/r).
    #[arg(long = "scan-im")]
    scan_im: Option<f64>,

    /// Central-difference step for the H2 Jacobian (default 1e-4(1+|α0|)).
    #[arg(long = "fd-step")]
    fd_step: Option<f64>,

    /// Simulation horizon.
    #[arg(long = "sim-T")]
    sim_t: Option<f64>,

    /// Simulation step (at most r/10).
    #[arg(long = "sim-h")]
    sim_h: Option<f64>,

    /// Initial eigenplane amplitude for simulate (default 0.1).
    #[arg(long = "sim-amp")]
    sim_amp: Option<f64>,

    /// Iteration cap for the Bautin point search.
    #[arg(long = "max-iter", default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,

    /// Output file (default stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Numerical(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => Failure::Config(m),
            e @ Error::StepTooLarge { .. } => Failure::Config(e.to_string()),
            e => Failure::Numerical(e),
        }
    }
}

fn parse_alpha(text: &str) -> Result<ParamPoint, Failure> {
    let parts: Vec<&str> = text.split(',').collect();
    let bad = || Failure::Config(format!("--alpha {text:?}: expected two comma-separated numbers"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let a1: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let a2: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let p = ParamPoint::new(a1, a2);
    if !p.is_finite() {
        return Err(bad());
    }
    Ok(p)
}

fn positive(name: &str, v: Option<f64>) -> Result<(), Failure> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => {
            Err(Failure::Config(format!("--{name} must be a positive number, got {x}")))
        }
        _ => Ok(()),
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Config(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&cli.system)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", cli.system.display())))?;
    let system = parse_system(&text)?;
    let alpha = parse_alpha(&cli.alpha)?;
    for (name, v) in [
        ("h1-delta", cli.h1_delta),
        ("scan-re", cli.scan_re),
        ("scan-im", cli.scan_im),
        ("fd-step", cli.fd_step),
        ("sim-T", cli.sim_t),
        ("sim-h", cli.sim_h),
        ("sim-amp", cli.sim_amp),
    ] {
        positive(name, v)?;
    }
    let r = system.delay();
    let window = (cli.scan_re.is_some() || cli.scan_im.is_some()).then(|| {
        let d = ScanWindow::default_for(r);
        ScanWindow {
            sigma_max: cli.scan_re.unwrap_or(d.sigma_max),
            omega_max: cli.scan_im.unwrap_or(d.omega_max),
        }
    });
    let mode: Mode = cli.mode.into();
    let grid = cli.grid.as_deref().map(GridSpec::parse).transpose()?;
    if grid.is_some() && !matches!(mode, Mode::Spectrum | Mode::Analyze) {
        return Err(Failure::Config("--grid is only supported by spectrum and analyze".into()));
    }
    let req = AnalyzeRequest {
        mode,
        system,
        system_file: Some(cli.system.display().to_string()),
        alpha,
        grid,
        pipeline: PipelineOptions { window, h1_delta: cli.h1_delta },
        fd_step: cli.fd_step,
        sim: SimOptions { t: cli.sim_t, h: cli.sim_h, amplitude: cli.sim_amp },
        max_iter: cli.max_iter,
    };

    let io_err = |e: io::Error| Failure::Config(format!("write failed: {e}"));
    if let Some(g) = &req.grid {
        let out = output(&cli.out)?;
        return run_grid(&req, g, out).map_err(io_err);
    }
    if mode == Mode::Simulate {
        let (traj, proj) = run_simulate(&req)?;
        let mut out = output(&cli.out)?;
        traj.write_csv(&mut out, &proj, 1).map_err(io_err)?;
        return out.flush().map_err(io_err);
    }
    let report = run(&req)?;
    let mut out = output(&cli.out)?;
    writeln!(out, "{}", report.to_json()).map_err(io_err)?;
    out.flush().map_err(io_err)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical failure in stage {}: {e}", e.stage());
            ExitCode::from(3)
        }
    }
}
