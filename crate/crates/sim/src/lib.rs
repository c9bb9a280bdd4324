//! Experiment harness around `fso-core`: command-line and TOML
//! configuration, replicated sweeps, CSV/JSON reports and NDJSON traces.

pub mod config;
pub mod error;
pub mod report;
pub mod sweep;
pub mod traceio;

use std::fs::{self, File};
use std::io::{BufWriter, Write};

use fso_core::{MetricsReport, Simulation};

pub use config::{Cli, Command, RunSpec, SweepSpec};
pub use error::SimError;
pub use report::{emit_csv, Column};
pub use sweep::{run_sweep, AggregateRow, Summary, SweepOutcome};

/// Runs one cell, writing the requested outputs. `--out` picks JSON for a
/// `.json` extension and table CSV otherwise.
pub fn run_single(spec: &RunSpec) -> Result<MetricsReport, SimError> {
    let mut sim = Simulation::new(spec.config.clone())?;
    if spec.trace.is_some() {
        sim = sim.with_trace();
    }
    let report = sim.finish();
    if let Some(path) = &spec.trace {
        traceio::write_ndjson(&sim.take_trace().unwrap_or_default(), path)?;
    }
    if let Some(path) = &spec.out {
        if path.extension().is_some_and(|e| e == "json") {
            let file = File::create(path).map_err(|e| SimError::io(path, e))?;
            let mut w = BufWriter::new(file);
            serde_json::to_writer_pretty(&mut w, &report::Record::new(&report))?;
            w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| SimError::io(path, e))?;
        } else {
            emit_csv(std::slice::from_ref(&report), path)?;
        }
    }
    Ok(report)
}

/// Entry point shared by the binary and tests.
pub fn execute(cli: Cli) -> Result<(), SimError> {
    match cli.command {
        Command::Run(args) => {
            let spec = config::run_spec(&args)?;
            let report = run_single(&spec)?;
            print!("{}", report::render_table(&report));
        }
        Command::Sweep(args) => {
            let spec = config::sweep_spec(&args)?;
            let outcome = run_sweep(&spec)?;
            let dir = spec.out.clone().unwrap_or_else(|| format!("sweep-{}", spec.base.scenario.tag()).into());
            fs::create_dir_all(&dir).map_err(|e| SimError::io(&dir, e))?;
            for path in outcome.write(&spec, &dir)? {
                println!("wrote {}", path.display());
            }
            println!("{:>4} {:>10} {:>10} {:>10} {:>10}", "X", "FP rate", "Sens.", "SC(MA)^", "WT^");
            for row in &outcome.rows {
                let cell = |c: Column| c.display(row.mean(c));
                println!(
                    "{:>4} {:>10} {:>10} {:>10} {:>10}",
                    row.x,
                    cell(Column::FpRate),
                    cell(Column::Sensitivity),
                    cell(Column::NormalizedScMa),
                    cell(Column::NormalizedWt)
                );
            }
        }
    }
    Ok(())
}
