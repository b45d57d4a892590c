use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use grb_sim::analysis::planarization_report;
use grb_sim::config::{load_config, load_topology};
use grb_sim::geometry::{Planarization, TopologySnapshot};
use grb_sim::goldens::{emit_pathological_topologies, RANGE};
use grb_sim::presets::run_matrix;
use grb_sim::protocol::ProtocolKind;
use grb_sim::scenario::{run_scenario_traced, write_csv, CsvRow};

#[derive(Parser)]
#[command(name = "grbsim", version, about = "Geographic routing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file and print (or write) its CSV row.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the protocol named in the file.
        #[arg(long)]
        protocol: Option<ProtocolKind>,
    },
    /// Run a preset matrix over several seeds.
    Matrix {
        #[arg(long)]
        preset: String,
        /// Comma-separated list, e.g. `1,2,3`.
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the pathological reference topologies.
    Goldens {
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Planarize a topology file and report its defects.
    Planarize {
        #[arg(long)]
        topology: PathBuf,
        #[arg(long, default_value = "gg")]
        method: Planarization,
        /// Print the full diagnostics rather than a one-line summary.
        #[arg(long)]
        report: bool,
    },
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            protocol,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(p) = protocol {
                cfg.protocol = p;
            }
            let result = run_scenario_traced(&cfg, cfg.trace_output.is_some())?;
            if let (Some(path), Some(trace)) = (&cfg.trace_output, &result.trace) {
                std::fs::write(path, trace).with_context(|| format!("writing {}", path.display()))?;
            }
            let row = CsvRow::from_run(&cfg, &result.metrics);
            write_csv(output(out.as_deref().or(cfg.output.as_deref()))?, &[row])?;
        }
        Command::Matrix { preset, seeds, out } => {
            let result = run_matrix(&preset, &seeds)?;
            write_csv(output(out.as_deref())?, &result.all_rows())?;
        }
        Command::Goldens { out_dir } => {
            for path in emit_pathological_topologies(&out_dir)? {
                println!("{}", path.display());
            }
        }
        Command::Planarize {
            topology,
            method,
            report,
        } => {
            let t = load_topology(&topology)?;
            if t.nodes.is_empty() {
                bail!("{} lists no nodes", topology.display());
            }
            let snap = TopologySnapshot::new(t.nodes, t.range.unwrap_or(RANGE), t.blocked)?;
            let r = planarization_report(&snap, method)?;
            if report {
                print!("{r}");
            } else {
                println!(
                    "unidirectional={} disconnected={} crossings={}",
                    r.unidirectional.len(),
                    r.is_disconnected(),
                    r.crossings.len()
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
