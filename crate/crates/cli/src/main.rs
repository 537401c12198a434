use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};
use islanddr_core::harness::{self, PartitionPolicy, ReportFormat};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "islanddr", version, about = "Islanded-microgrid frequency regulation with demand response")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario end to end and write its reports.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Integration step in seconds.
        #[arg(long)]
        dt: Option<f64>,
        /// Simulation horizon in seconds.
        #[arg(long = "t-end")]
        t_end: Option<f64>,
        /// Switch to an equal-width partition with this many sections.
        #[arg(long = "m-sections")]
        m_sections: Option<usize>,
        /// csv (all stage files plus summary) or summary (summary.json only).
        #[arg(long, default_value = "csv")]
        format: ReportFormat,
        /// Sensor-noise seed for the detection stage.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { scenario, out, dt, t_end, m_sections, format, seed } => {
            let mut sc = harness::load_scenario(&scenario).map_err(|e| anyhow!("stage load: {e}"))?;
            if let Some(dt) = dt {
                sc.file.simulation.dt = dt;
            }
            if let Some(t_end) = t_end {
                sc.file.simulation.t_end = t_end;
            }
            if let Some(m) = m_sections {
                sc.file.reserve.partition = PartitionPolicy::EqualWidth;
                sc.file.reserve.m_sections = Some(m);
                sc.file.reserve.boundaries = None;
            }
            if let Some(seed) = seed {
                if let Some(d) = sc.file.detection.as_mut() {
                    d.circuit.noise_seed = seed;
                }
            }
            sc.revalidate().map_err(|e| anyhow!("stage load: {e}"))?;
            for w in &sc.bid_warnings {
                eprintln!("warning: bids line {}: {}", w.line, w.message);
            }

            let report = match harness::run_pipeline(&sc) {
                Ok(r) => r,
                Err(e) => {
                    // Leave the partial report behind for diagnosis.
                    let _ = harness::emit_reports(&e.partial, &out, &[ReportFormat::Summary]);
                    return Err(anyhow!("{e}"));
                }
            };
            let written = harness::emit_reports(&report, &out, &[format])
                .map_err(|e| anyhow!("stage report: {e}"))
                .with_context(|| format!("writing reports to {}", out.display()))?;
            if let Some(reason) = &report.halted {
                eprintln!("halted: {reason}");
            }
            for p in written {
                println!("{}", p.display());
            }
            Ok(())
        }
    }
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
