use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use misanthrope::experiment::{self, Artifacts, RunConfig};
use misanthrope::Error;

#[derive(Parser, Debug)]
#[command(
    name = "misanthrope",
    version,
    about = "Simulate misanthrope particle systems and check them against Burgers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads (defaults to all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Override the base seed of the config
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the structural conditions of the model
    ValidateModel { config: Option<PathBuf> },
    /// Flux and its derivatives on a density grid
    Flux { config: Option<PathBuf> },
    /// Run replicas and record density profiles
    Simulate { config: Option<PathBuf> },
    /// Solve Burgers' equation at the measurement times
    Burgers { config: Option<PathBuf> },
    /// Simulation against Burgers: statistics, profiles and summary
    Compare { config: Option<PathBuf> },
    /// Spectral gaps of canonical block sectors
    Gap { config: Option<PathBuf> },
    /// Canonical against grand-canonical block expectations
    Ensembles { config: Option<PathBuf> },
    /// Exponential block-moment probe
    Kurschak { config: Option<PathBuf> },
    /// Compare over the Cartesian product of listed N and beta
    Sweep { config: PathBuf },
}

impl Command {
    fn config_path(&self) -> Option<&PathBuf> {
        match self {
            Command::ValidateModel { config }
            | Command::Flux { config }
            | Command::Simulate { config }
            | Command::Burgers { config }
            | Command::Compare { config }
            | Command::Gap { config }
            | Command::Ensembles { config }
            | Command::Kurschak { config } => config.as_ref(),
            Command::Sweep { config } => Some(config),
        }
    }
}

fn run(cli: &Cli) -> Result<Artifacts, Error> {
    let mut config = match cli.command.config_path() {
        Some(path) => experiment::load_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = Some(seed);
    }
    Ok(match cli.command {
        Command::ValidateModel { .. } => experiment::validate_model(&config)?.1,
        Command::Flux { .. } => experiment::flux(&config)?.1,
        Command::Simulate { .. } => experiment::simulate(&config)?,
        Command::Burgers { .. } => experiment::burgers(&config)?,
        Command::Compare { .. } => experiment::compare(&config)?,
        Command::Gap { .. } => experiment::gap(&config)?.1,
        Command::Ensembles { .. } => experiment::ensembles(&config)?.1,
        Command::Kurschak { .. } => experiment::kurschak(&config)?.1,
        Command::Sweep { .. } => experiment::sweep(&config)?.1,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = run(&cli).and_then(|artifacts| {
        artifacts.write(&cli.out)?;
        Ok(artifacts)
    });
    match result {
        Ok(artifacts) => {
            if !artifacts.report.is_empty() {
                println!("{}", artifacts.report);
            }
            if artifacts.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
