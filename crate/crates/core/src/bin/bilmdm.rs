use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bilmdm::pipeline::{emit_phantom, rescore, run_pipeline, PipelineConfig};
use bilmdm::Error;

#[derive(Parser)]
#[command(name = "bilmdm", version, about = "Bi-linear manifold dynamic MRI reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write artifacts plus report.json.
    Run {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Write the ground-truth phantom only.
    Phantom {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Score an existing reconstruction against the configured phantom.
    Metrics {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long)]
        recon: PathBuf,
    },
}

fn execute(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Run { config } => {
            let cfg = PipelineConfig::load(&config)?;
            let run = run_pipeline(&cfg)?;
            let r = &run.report;
            println!(
                "nrmse {:.4} (zero-filled {:.4}), acceleration {:.2}, {:.1} s -> {}",
                r.bilmdm.nrmse,
                r.zero_filled.nrmse,
                r.acceleration_achieved,
                r.wall_clock_s,
                cfg.output_dir.join("report.json").display()
            );
        }
        Command::Phantom { config } => {
            let cfg = PipelineConfig::load(&config)?;
            emit_phantom(&cfg)?;
            println!("{}", cfg.output_dir.join("truth.blmd").display());
        }
        Command::Metrics { config, recon } => {
            let cfg = PipelineConfig::load(&config)?;
            let rep = rescore(&cfg, &recon)?;
            println!("{}", serde_json::to_string_pretty(&rep).map_err(Error::from)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let stage = e.stage().unwrap_or("config");
            eprintln!("error [{stage}]: {e}");
            if e.is_config() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
