use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nearfield_cli::{cmd_run, phase_check, CliError, CriterionChoice, RunOptions};

/// Near-field channel laboratory for large virtual linear arrays.
#[derive(Parser)]
#[command(name = "nearfield", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize, analyze and partition a preset or scenario file.
    Run {
        /// Preset name (los_lab, olos_baffle) or scenario file path.
        scenario: String,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Noise generator seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of frequency points of the sweep.
        #[arg(long)]
        freq_points: Option<usize>,
        /// Correlation matrix distance threshold.
        #[arg(long, default_value_t = 0.2)]
        cmd_threshold: f64,
        /// Correlation window size in elements.
        #[arg(long, default_value_t = 4)]
        window: usize,
        #[arg(long, value_enum, default_value_t = Criterion::Both)]
        criterion: Criterion,
        /// Noise floor in dBm; noise is off unless set here or in the scenario.
        #[arg(long, allow_negative_numbers = true)]
        noise_floor: Option<f64>,
    },
    /// Compare measured LOS phase with the spherical and planar closed forms.
    PhaseCheck {
        /// Preset name or scenario file path.
        scenario: String,
        /// Distance multiplier, at least 1.
        #[arg(long, default_value_t = 1.0)]
        k: f64,
        /// Scale the Rayleigh distance instead of the scenario distance.
        #[arg(long)]
        rayleigh: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Criterion {
    Cmd,
    Slope,
    Both,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
            freq_points,
            cmd_threshold,
            window,
            criterion,
            noise_floor,
        } => {
            let opts = RunOptions {
                out,
                seed,
                freq_points,
                cmd_threshold,
                window,
                criterion: match criterion {
                    Criterion::Cmd => CriterionChoice::Cmd,
                    Criterion::Slope => CriterionChoice::Slope,
                    Criterion::Both => CriterionChoice::Both,
                },
                noise_floor,
            };
            let report = cmd_run(&scenario, &opts)?;
            for c in &report.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            println!("wrote {} files to {}", report.files.len(), opts.out.display());
        }
        Command::PhaseCheck {
            scenario,
            k,
            rayleigh,
        } => {
            print!("{}", phase_check(&scenario, k, rayleigh)?.render());
        }
    }
    Ok(())
}
