use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use flexhose_cli::commands::{self, Invocation};
use flexhose_cli::config::Overrides;
use flexhose_cli::CliError;

/// Simulation, planning and LQR synthesis for a hose carried by quadrotors.
#[derive(Parser)]
#[command(name = "flexhose", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario and write log.csv.
    Simulate(Opts),
    /// Sample the reference trajectory and write plan.csv.
    Plan(Opts),
    /// Dump the linear models along the reference to linearization.csv.
    Linearize(Opts),
    /// Solve the Riccati equation and write the gain schedule.
    LqrSynth(Opts),
    /// Time the simulation for several link counts and write benchmark.csv.
    Benchmark(Opts),
}

#[derive(Args)]
struct Opts {
    /// TOML config, or a manifest.json from an earlier run.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Integration step (s).
    #[arg(long)]
    dt: Option<f64>,
    /// Simulated or sampled time (s).
    #[arg(long)]
    duration: Option<f64>,
    /// Gain schedule to read (simulate) or write (lqr-synth).
    #[arg(long)]
    gain_file: Option<PathBuf>,
    /// Log records per second.
    #[arg(long)]
    log_rate: Option<f64>,
}

impl Opts {
    fn invocation(&self) -> Result<Invocation, CliError> {
        let o = Overrides {
            out_dir: self.out_dir.clone(),
            seed: self.seed,
            dt: self.dt,
            duration: self.duration,
            gain_file: self.gain_file.clone(),
            log_rate: self.log_rate,
        };
        Invocation::load(&self.config, &o)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(o) => o.invocation().and_then(|i| commands::simulate(&i)),
        Command::Plan(o) => o.invocation().and_then(|i| commands::plan(&i)),
        Command::Linearize(o) => o.invocation().and_then(|i| commands::linearize_cmd(&i)),
        Command::LqrSynth(o) => o.invocation().and_then(|i| commands::lqr_synth(&i)),
        Command::Benchmark(o) => o.invocation().and_then(|i| commands::benchmark(&i)),
    };
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
