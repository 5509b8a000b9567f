use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rydberg_mt::config::{load_config, RunConfig};
use rydberg_mt::experiment::{read_trace_csv, run_experiment, write_outputs, Preset};
use rydberg_mt::signals::{fit_slope, sensitivity, Protocol, DEFAULT_FIT_DEGREE};
use rydberg_mt::SimError;

const EXIT_USAGE: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_SOLVER: u8 = 4;
const EXIT_IO: u8 = 5;

/// Rydberg EIT receiver simulator: conventional and modulation-transfer
/// detection through an optically thick vapour cell.
#[derive(Parser)]
#[command(name = "rydberg-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named experiment and write CSV, JSON and optionally SVG.
    Simulate {
        /// fig3-conventional, fig3-rma, fig4, fig5 or custom
        preset: String,
        /// TOML run configuration (defaults when omitted)
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: bool,
        /// Worker threads (all cores when omitted)
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Find the density giving the target resonant coupling-off transmission.
    CalibrateDensity {
        #[arg(long, default_value_t = 0.37)]
        target: f64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Polynomial slope |d value / dx| of each curve in a trace CSV.
    Slope {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_FIT_DEGREE)]
        degree: usize,
    },
    /// Shot-noise-limited sensitivity from a slope, probe power and detector gain.
    Sensitivity {
        /// Signal slope (per V/m)
        #[arg(long)]
        slope: f64,
        /// Transmitted probe power (W)
        #[arg(long)]
        power: f64,
        /// Detector sensitivity (V/W)
        #[arg(long)]
        eta: f64,
    },
}

fn exit_code(e: &SimError) -> u8 {
    if e.is_config() {
        EXIT_CONFIG
    } else if e.is_io() {
        EXIT_IO
    } else if matches!(e.root(), SimError::InvalidInput(_)) {
        EXIT_USAGE
    } else {
        EXIT_SOLVER
    }
}

fn config(path: Option<&PathBuf>) -> Result<RunConfig, SimError> {
    match path {
        Some(p) => load_config(p).map_err(|e| match e {
            SimError::Io(io) => SimError::Io(std::io::Error::new(io.kind(), format!("{}: {io}", p.display()))),
            other => other,
        }),
        None => Ok(RunConfig::default()),
    }
}

fn with_threads<T>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, SimError>
where
    T: Send,
{
    match threads {
        None => Ok(f()),
        Some(0) => Err(SimError::InvalidInput("--threads must be >= 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| SimError::InvalidInput(e.to_string())),
    }
}

fn run(cli: Cli) -> Result<(), SimError> {
    match cli.command {
        Command::Simulate { preset, config: path, out, svg, threads } => {
            let preset: Preset = preset.parse()?;
            let cfg = config(path.as_ref())?;
            let exp = with_threads(threads, || run_experiment(preset, &cfg))??;
            for p in write_outputs(&exp, &out, svg)? {
                println!("{}", p.display());
            }
            eprintln!("done in {:.1} s", exp.metadata.wall_time_s);
        }
        Command::CalibrateDensity { target, config: path, threads } => {
            let mut cfg = config(path.as_ref())?;
            cfg.cell.number_density = None;
            cfg.cell.vapor_density = None;
            cfg.cell.target_transmission = target;
            cfg.validate()?;
            let (rx, _) = with_threads(threads, || cfg.receiver())??;
            let n = rx.cell.number_density;
            let t = with_threads(threads, || rx.transmission(Protocol::Conventional, false))??;
            println!("number_density = {n:e}");
            println!("vapor_density = {:e}", n / rx.atom.abundance);
            println!("transmission = {t}");
        }
        Command::Slope { input, degree } => {
            let text = std::fs::read_to_string(&input)
                .map_err(|e| SimError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", input.display()))))?;
            println!("x,slope,curve");
            for (key, x, y) in read_trace_csv(&text)? {
                let fit = fit_slope(&x, &y, degree)?;
                for (xi, s) in fit.x.iter().zip(&fit.slope) {
                    println!("{xi},{s},{key}");
                }
                eprintln!("curve {key}: rms residual {:e}", fit.residual);
            }
        }
        Command::Sensitivity { slope, power, eta } => {
            let s = sensitivity(slope, power, eta)?;
            println!("{s:e} V m^-1 Hz^-1/2");
            println!("{:e} uV cm^-1 Hz^-1/2", s * 1e4);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
