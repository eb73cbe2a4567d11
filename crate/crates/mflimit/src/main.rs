use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mflimit::commands::{cmd_meanfield, cmd_mnist_hist, cmd_train, cmd_verify};
use mflimit::error::{EXIT_OK, EXIT_VERIFY};
use mflimit::{CliError, Context, ExperimentConfig};

#[derive(Parser)]
#[command(name = "mflimit", version, about = "SGD on wide two-layer networks against its mean-field limit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the replica ensembles over the N grid
    Train(Common),
    /// Solve the mean-field limit and its weak residual
    Meanfield(Common),
    /// Check the train and meanfield artifacts against the convergence criteria
    Verify(Common),
    /// Output-weight histograms on an MNIST digit pair
    MnistHist(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (key = value lines); defaults when omitted
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the config's `seed`
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Parent directory of the run directories
    #[arg(long, value_name = "DIR", default_value = "mflimit-runs")]
    out: PathBuf,
    /// No progress on stderr
    #[arg(long)]
    quiet: bool,
}

impl Common {
    fn context(&self) -> Result<Context, CliError> {
        let mut config = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            config = config.with_seed(s);
        }
        Ok(Context { config, out: self.out.clone(), quiet: self.quiet })
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Train(c) => {
            cmd_train(&c.context()?)?;
        }
        Command::Meanfield(c) => {
            cmd_meanfield(&c.context()?)?;
        }
        Command::Verify(c) => {
            let report = cmd_verify(&c.context()?)?;
            print!("{}", report.text());
            if !report.passed() {
                return Ok(EXIT_VERIFY);
            }
        }
        Command::MnistHist(c) => {
            let report = cmd_mnist_hist(&c.context()?)?;
            for (i, d) in report.distances.iter().enumerate() {
                println!("W1(N={}, N={}) = {d:.6}", report.n_grid[i], report.n_grid[i + 1]);
            }
            println!("{}", report.verdict.line());
        }
    }
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("mflimit: {e}");
            if let CliError::Core(mflimit_core::Error::NonConvergence { distances, .. }) = &e {
                eprintln!("picard distances: {distances:?}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
