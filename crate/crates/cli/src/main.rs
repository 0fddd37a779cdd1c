//! `repsindy`: simulate replicator dynamics, identify the equations with
//! SINDy, score the result, run parameter sweeps and draw simplex plots.
//!
//! Exit codes: 0 success, 1 invalid input or configuration, 2 I/O failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "repsindy", version, about = "Replicator dynamics + sparse identification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// TOML experiment configuration.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the configuration seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Built-in game id (`rps`, `battle_of_sexes`); overrides the config game.
    #[arg(long)]
    pub game: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate trajectories into `<out_dir>/trajectory_NNN.csv` plus a manifest.
    Simulate {
        #[command(flatten)]
        common: Common,
        out_dir: PathBuf,
    },
    /// Fit a sparse model to one or more trajectory CSV files.
    Identify {
        #[command(flatten)]
        common: Common,
        model_out: PathBuf,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Compare a model against the true replicator system.
    Evaluate {
        #[command(flatten)]
        common: Common,
        model: PathBuf,
        report_out: PathBuf,
    },
    /// Run the `[sweep]` grid and write one CSV row per cell.
    Sweep {
        #[command(flatten)]
        common: Common,
        table_out: PathBuf,
    },
    /// Draw a 3-strategy trajectory on the simplex triangle as SVG.
    Plot {
        #[command(flatten)]
        common: Common,
        input: PathBuf,
        output: PathBuf,
    },
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
    let result = match cli.command {
        Command::Simulate { common, out_dir } => commands::simulate(&common, &out_dir),
        Command::Identify { common, model_out, inputs } => commands::identify(&common, &model_out, &inputs),
        Command::Evaluate { common, model, report_out } => commands::evaluate(&common, &model, &report_out),
        Command::Sweep { common, table_out } => commands::sweep(&common, &table_out),
        Command::Plot { common, input, output } => commands::plot(&common, &input, &output),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
