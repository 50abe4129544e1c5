use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use scsim::{render_catalog, run, write_cumulant_csv, ExperimentConfig, RunOptions, CATALOG};

#[derive(Parser)]
#[command(name = "scsim", version, about = "Superprocess and immigration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the checks of a config and write report.json, summary.csv and replicates.csv.
    Run {
        config: PathBuf,
        #[arg(long, env = "SCSIM_OUT", default_value = "scsim-out")]
        out: PathBuf,
        #[arg(long, env = "SCSIM_SEED")]
        seed: Option<u64>,
        /// Run checks and replicates on all cores.
        #[arg(long)]
        parallel: bool,
    },
    /// Print the check catalog.
    ListChecks {
        #[arg(long)]
        json: bool,
    },
    /// Print the cumulant flow of the first target as CSV.
    SolveCumulant { config: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match real_main() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> anyhow::Result<u8> {
    match Cli::parse().command {
        Command::Run { config, out, seed, parallel } => {
            let model = ExperimentConfig::load(&config)?.build()?;
            let report = run(&model, RunOptions { seed, parallel });
            report.write_to(&out).with_context(|| format!("writing report to {}", out.display()))?;
            for row in &report.rows {
                let detail = row
                    .metrics
                    .iter()
                    .map(|m| match m.z {
                        Some(z) => format!("{}: {:.6} vs {:.6} (z = {z:.2})", m.name, m.estimate, m.analytic.unwrap_or(f64::NAN)),
                        None => format!("{}: {:.6e}", m.name, m.estimate),
                    })
                    .collect::<Vec<_>>()
                    .join("; ");
                let status = format!("{:?}", row.status).to_uppercase();
                println!("{status:<6}{:<22}{}{}", row.check.as_str(), detail, row.message.as_deref().unwrap_or(""));
            }
            Ok(report.exit_code() as u8)
        }
        Command::ListChecks { json } => {
            if json {
                println!("{}", serde_json::to_string_pretty(&CATALOG)?);
            } else {
                print!("{}", render_catalog());
            }
            Ok(0)
        }
        Command::SolveCumulant { config } => {
            let model = ExperimentConfig::load(&config)?.build()?;
            write_cumulant_csv(&model, std::io::stdout().lock())?;
            Ok(0)
        }
    }
}
