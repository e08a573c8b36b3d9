use std::path::PathBuf;
use std::process::ExitCode;

use adcluster::Mode;
use adcluster_cli::{cmd_eval, cmd_run, cmd_sweep_lambda, cmd_synth, CliError, Overrides};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "adcluster", version, about = "Clustering-based domain adaptation on synthetic multi-camera data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Seed for data, initialization and sampling; overrides the file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Pre-train on the source domain, adapt to the target and evaluate.
    Run {
        #[command(flatten)]
        common: Common,
        /// baseline, asa or full; overrides `mode`.
        #[arg(long)]
        mode: Option<Mode>,
    },
    /// Full-mode runs over several diversity weights.
    SweepLambda {
        #[command(flatten)]
        common: Common,
        /// Comma-separated positive values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Evaluate a checkpointed encoder on the configured target split.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Write the synthetic datasets and target split as CSV.
    Synth {
        #[command(flatten)]
        common: Common,
    },
}

fn overrides(common: &Common, mode: Option<Mode>) -> Overrides {
    Overrides { mode, seed: common.seed, out: common.out.clone() }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { common, mode } => {
            let s = cmd_run(&common.config, &overrides(&common, mode))?;
            println!(
                "direct transfer: mAP {:.4} rank-1 {:.4}\nadapted ({} iterations): mAP {:.4} rank-1 {:.4}\nwrote {}",
                s.direct.metrics.map,
                s.direct.metrics.cmc1,
                s.iterations,
                s.adapted.metrics.map,
                s.adapted.metrics.cmc1,
                s.output_dir.display()
            );
        }
        Command::SweepLambda { common, values } => {
            for (lambda, e) in cmd_sweep_lambda(&common.config, &values, &overrides(&common, None))? {
                println!("lambda {lambda}: mAP {:.4} rank-1 {:.4}", e.metrics.map, e.metrics.cmc1);
            }
        }
        Command::Eval { common, checkpoint } => {
            let e = cmd_eval(&common.config, &checkpoint, &overrides(&common, None))?;
            println!(
                "mAP {:.4} rank-1 {:.4} rank-5 {:.4} rank-10 {:.4} J {:.4}",
                e.metrics.map, e.metrics.cmc1, e.metrics.cmc5, e.metrics.cmc10, e.j
            );
        }
        Command::Synth { common } => {
            let out = cmd_synth(&common.config, &overrides(&common, None))?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(1);
        }
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("adcluster: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
