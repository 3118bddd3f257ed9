use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pbgnet::train::Method;
use pbgnet_cli::config::{
    ExperimentConfig, DEFAULT_DELTA, GRID_LAYERS, GRID_LEARNING_RATES, GRID_WEIGHT_DECAYS,
    GRID_WIDTHS,
};
use pbgnet_cli::{
    cmd_certify, cmd_grid, cmd_surface, cmd_train, cmd_verify, CertifyOptions, CliError, CliResult,
    GridSpec, SurfaceGrid,
};

#[derive(Parser)]
#[command(
    name = "pbgnet",
    version,
    about = "Train and certify aggregated binary activated networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration and write checkpoint, history and run record.
    Train(TrainArgs),
    /// Sweep a hyperparameter grid and select one model per method.
    Grid(GridArgs),
    /// Recompute the bound certificate of a checkpoint.
    Certify(CertifyArgs),
    /// Evaluate a two-input network on a grid and print CSV.
    Surface(SurfaceArgs),
    /// Re-derive the numbers of a run or grid directory from disk.
    Verify(VerifyArgs),
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::from_name(s).map_err(|e| e.to_string())
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value = "data")]
    data_dir: PathBuf,
    #[arg(long, default_value = "runs")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    task: String,
    #[arg(long, value_parser = parse_method)]
    method: Method,
    #[arg(long, default_value_t = 1)]
    layers: usize,
    #[arg(long, default_value_t = 10)]
    width: usize,
    #[arg(long, conflicts_with = "exact")]
    sample_size: Option<usize>,
    /// Exact hidden-layer sums (the default without --sample-size).
    #[arg(long)]
    exact: bool,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 0.0)]
    weight_decay: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    task: String,
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    method: Vec<Method>,
    #[arg(long, value_delimiter = ',')]
    layers: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    width: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    sample_size: Vec<usize>,
    /// Adds exact evaluation as a grid value.
    #[arg(long)]
    exact: bool,
    #[arg(long, value_delimiter = ',')]
    lr: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    weight_decay: Vec<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value = "data")]
    data_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SurfaceArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// x1_min,x1_max,x2_min,x2_max
    #[arg(long, value_delimiter = ',', num_args = 4, default_values_t = [-2.0, 2.0, -2.0, 2.0])]
    extent: Vec<f64>,
    #[arg(long, default_value_t = 101)]
    resolution: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    dir: PathBuf,
    #[arg(long, default_value = "data")]
    data_dir: PathBuf,
}

fn or_default<T: Clone>(v: Vec<T>, default: &[T]) -> Vec<T> {
    if v.is_empty() {
        default.to_vec()
    } else {
        v
    }
}

fn emit(out: Option<PathBuf>, body: &str) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, body)?,
        None => println!("{body}"),
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train(a) => {
            let config = ExperimentConfig {
                task: a.task,
                method: a.method,
                layers: a.layers,
                width: a.width,
                sample_size: a.sample_size,
                lr: a.lr,
                weight_decay: a.weight_decay,
                delta: a.common.delta,
                multiplicity: pbgnet::pacbayes::DEFAULT_MULTIPLICITY,
                seed: a.common.seed,
                epochs: a.common.epochs,
                batch_size: a.common.batch_size,
            };
            let record = cmd_train(&config, &a.common.data_dir, &a.common.out_dir)?;
            println!("{}", serde_json::to_string_pretty(&record)?);
        }
        Command::Grid(a) => {
            let full = GridSpec::full(&a.task);
            let mut sample_sizes: Vec<Option<usize>> =
                a.sample_size.iter().map(|&t| Some(t)).collect();
            if a.exact {
                sample_sizes.push(None);
            }
            let spec = GridSpec {
                methods: or_default(a.method, &full.methods),
                layers: or_default(a.layers, &GRID_LAYERS),
                widths: or_default(a.width, &GRID_WIDTHS),
                sample_sizes: or_default(sample_sizes, &full.sample_sizes),
                learning_rates: or_default(a.lr, &GRID_LEARNING_RATES),
                weight_decays: or_default(a.weight_decay, &GRID_WEIGHT_DECAYS),
                delta: a.common.delta,
                seed: a.common.seed,
                epochs: a.common.epochs,
                batch_size: a.common.batch_size,
                task: a.task,
            };
            let report = cmd_grid(&spec, &a.common.data_dir, &a.common.out_dir)?;
            for f in &report.failed {
                let c = &report.cells[*f];
                eprintln!(
                    "cell {f} failed: {}",
                    c.error.as_deref().unwrap_or("unknown")
                );
            }
            println!("{}", serde_json::to_string_pretty(&report.selections)?);
        }
        Command::Certify(a) => {
            let opts = CertifyOptions {
                seed: a.seed,
                delta: a.delta,
                multiplicity: None,
            };
            let report = cmd_certify(&a.checkpoint, &a.data_dir, &opts)?;
            emit(a.out, &serde_json::to_string_pretty(&report)?)?;
        }
        Command::Surface(a) => {
            let grid = SurfaceGrid {
                x1: (a.extent[0], a.extent[1]),
                x2: (a.extent[2], a.extent[3]),
                resolution: a.resolution,
            };
            let csv = cmd_surface(&a.checkpoint, &grid)?;
            match a.out {
                Some(p) => std::fs::write(p, csv)?,
                None => print!("{csv}"),
            }
        }
        Command::Verify(a) => {
            let report = cmd_verify(&a.dir, &a.data_dir)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if !report.mismatches.is_empty() {
                return Err(CliError::Mismatch(report.mismatches.len()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
