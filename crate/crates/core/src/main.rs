use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use aion::cli;
use aion::harness::Fixture;

#[derive(Parser)]
#[command(name = "aion", version, about = "Fit sums of separable oscillatory atoms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model described by a config file.
    Fit { config: PathBuf },
    /// Run ID, SD and NCG on the reference problem and write all outputs.
    Demo {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Randomized derivative and structure checks.
    Verify {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Negative control: corrupts the analytic gradient.
        #[arg(long, hide = true)]
        corrupt_gradient: bool,
    },
    /// Fit, then write the configured loss-landscape slices.
    Landscape { config: PathBuf },
}

fn main() -> ExitCode {
    let args = Cli::parse();
    let (mut out, mut err) = (std::io::stdout(), std::io::stderr());
    let code = match args.command {
        Command::Fit { config } => cli::cmd_fit(&config, &mut out, &mut err),
        Command::Demo { out: dir } => cli::cmd_demo(&dir, &mut out, &mut err),
        Command::Verify {
            seed,
            trials,
            corrupt_gradient,
        } => {
            let fixture = if corrupt_gradient {
                Fixture::FlipGradientSign
            } else {
                Fixture::None
            };
            cli::cmd_verify(seed, trials, fixture, &mut out, &mut err)
        }
        Command::Landscape { config } => cli::cmd_landscape(&config, &mut out, &mut err),
    };
    ExitCode::from(code as u8)
}
