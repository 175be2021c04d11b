use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use oamem::config::ExperimentConfig;
use oamem::experiment::{self, Outputs};
use oamem::{Error, ErrorClass};

/// Heralded single-photon OAM memory simulator and analyzer.
#[derive(Debug, Parser)]
#[command(name = "oamem", version)]
struct Cli {
    /// Experiment config (`section.key = value` lines).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Replace the configured seed list with this single seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate trigger/signal time tags and write them as CSV.
    Simulate {
        /// Simulated seconds (overrides `simulate.duration_s`).
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Histogram, g2 and alpha from a time-tag CSV file.
    Analyze {
        input: PathBuf,
    },
    /// Retrieved g2 peak against storage time, with the decay fit.
    Correlation {
        /// Simulated seconds per storage time (overrides `correlation.duration_s`).
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Donut image storage and the input/retrieved profile metrics.
    Image,
    /// Process tomography of the polarization storage channel.
    Tomography {
        /// Shots per analyzer setting (overrides `tomography.shots`).
        #[arg(long)]
        shots: Option<u64>,
        /// Reconstruct from measured counts instead of simulating.
        #[arg(long, value_name = "JSON")]
        input: Option<PathBuf>,
    },
    /// Four-spot patterns and the HWP fringe scan.
    Interference,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Data(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Data(_) => 3,
            Failure::Io(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Data(m) | Failure::Io(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e.class() {
            ErrorClass::Config => Failure::Config(e.to_string()),
            ErrorClass::Data => Failure::Data(e.to_string()),
            ErrorClass::Io => Failure::Io(e.to_string()),
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            ExperimentConfig::parse(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn read_input(path: &PathBuf) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let mut cfg = load_config(cli)?;
    let outputs: Outputs = match &cli.command {
        Command::Simulate { duration } => {
            if let Some(d) = duration {
                cfg.simulate.duration_s = *d;
            }
            experiment::run_simulate(&cfg)?
        }
        Command::Analyze { input } => experiment::run_analyze(&cfg, &read_input(input)?)?,
        Command::Correlation { duration } => {
            if let Some(d) = duration {
                cfg.correlation.duration_s = *d;
            }
            cfg.validate()?;
            experiment::run_correlation(&cfg)?
        }
        Command::Image => experiment::run_image_memory(&cfg)?,
        Command::Tomography { shots, input } => match input {
            Some(path) => experiment::run_tomography_from_data(&read_input(path)?)?,
            None => {
                if let Some(s) = shots {
                    cfg.tomography.shots = *s;
                }
                cfg.validate()?;
                experiment::run_tomography(&cfg)?
            }
        },
        Command::Interference => experiment::run_interference(&cfg)?,
    };
    for w in &outputs.warnings {
        eprintln!("warning: {w}");
    }
    let written = outputs.write_to(&cfg.output_dir).map_err(|e| Failure::Io(format!("{}: {e}", cfg.output_dir.display())))?;
    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
