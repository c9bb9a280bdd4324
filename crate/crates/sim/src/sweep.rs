//! Replicated X-sweeps: cell scheduling, per-x aggregation and file output.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use fso_core::{seed, MetricsReport, ScenarioConfig, Simulation};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::SweepSpec;
use crate::error::SimError;
use crate::report::{emit_csv, Column, Record};
use crate::traceio::write_ndjson;

/// Mean, sample standard deviation and range of one metric over the
/// replications where it is defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub n: u32,
    pub mean: f64,
    /// `None` for a single sample.
    pub sd: Option<f64>,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    /// Summarises `values` in the given order; `None` when empty.
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mut sum = 0.0;
        for v in values {
            sum += v;
        }
        let mean = sum / n as f64;
        let sd = (n > 1).then(|| {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (n - 1) as f64).sqrt()
        });
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // summation rounding can nudge the mean of equal values past min/max
        let mean = mean.clamp(min, max);
        Some(Summary { n: n as u32, mean, sd, min, max })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub x: u32,
    pub runs: u32,
    /// Same order as [`Column::ALL`].
    pub metrics: Vec<Option<Summary>>,
}

impl AggregateRow {
    pub fn metric(&self, column: Column) -> Option<Summary> {
        let i = Column::ALL.iter().position(|c| *c == column).expect("column listed in ALL");
        self.metrics[i]
    }

    pub fn mean(&self, column: Column) -> Option<f64> {
        self.metric(column).map(|s| s.mean)
    }

    fn of(x: u32, reports: &[MetricsReport]) -> Self {
        let metrics = Column::ALL
            .iter()
            .map(|c| {
                let values: Vec<f64> = reports.iter().filter_map(|r| c.value(r)).collect();
                Summary::of(&values)
            })
            .collect();
        AggregateRow { x, runs: reports.len() as u32, metrics }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub rows: Vec<AggregateRow>,
    /// Ordered by (x index, replication).
    pub reports: Vec<MetricsReport>,
}

/// Configuration of cell `(x_index, replication)`.
pub fn cell_config(spec: &SweepSpec, x_index: usize, replication: u32) -> ScenarioConfig {
    ScenarioConfig {
        n_ic: spec.x_values[x_index],
        seed: seed::derive(spec.base_seed, spec.base.scenario, x_index as u32, replication),
        ..spec.base.clone()
    }
}

/// Runs every cell (in parallel) and aggregates per x value. When
/// `spec.trace` is set, each cell's event trace is written into that
/// directory as `<scenario>_x<X>_r<R>.ndjson`.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutcome, SimError> {
    if spec.x_values.is_empty() || spec.replications == 0 {
        return Err(SimError::usage("sweep needs at least one x value and one replication"));
    }
    // validate once up front so workers only fail on IO
    fso_core::Simulation::new(cell_config(spec, 0, 0))?;
    if let Some(dir) = &spec.trace {
        fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
    }
    let cells: Vec<(usize, u32)> =
        (0..spec.x_values.len()).flat_map(|i| (0..spec.replications).map(move |r| (i, r))).collect();
    let reports = cells.par_iter().map(|&(i, r)| run_cell(spec, i, r)).collect::<Result<Vec<_>, _>>()?;
    let rows = reports
        .chunks(spec.replications as usize)
        .zip(&spec.x_values)
        .map(|(chunk, &x)| AggregateRow::of(x, chunk))
        .collect();
    Ok(SweepOutcome { rows, reports })
}

fn run_cell(spec: &SweepSpec, x_index: usize, replication: u32) -> Result<MetricsReport, SimError> {
    let config = cell_config(spec, x_index, replication);
    let Some(dir) = &spec.trace else {
        return Ok(fso_core::run_simulation(config)?);
    };
    let name = format!("{}_x{}_r{}.ndjson", config.scenario.tag(), config.n_ic, replication);
    let mut sim = Simulation::new(config)?.with_trace();
    let report = sim.finish();
    write_ndjson(&sim.take_trace().unwrap_or_default(), &dir.join(name))?;
    Ok(report)
}

impl SweepOutcome {
    /// Writes `raw.csv`, `aggregate.csv` and `reports.json` into `dir`.
    pub fn write(&self, spec: &SweepSpec, dir: &Path) -> Result<Vec<PathBuf>, SimError> {
        fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
        let raw = dir.join("raw.csv");
        emit_csv(&self.reports, &raw)?;
        let agg = dir.join("aggregate.csv");
        write_aggregate_csv(&self.rows, &agg)?;
        let json = dir.join("reports.json");
        self.write_json(spec, &json)?;
        Ok(vec![raw, agg, json])
    }

    fn write_json(&self, spec: &SweepSpec, path: &Path) -> Result<(), SimError> {
        #[derive(Serialize)]
        struct Doc<'a> {
            spec: &'a SweepSpec,
            aggregate: Vec<AggregateJson>,
            runs: Vec<Record<'a>>,
        }
        #[derive(Serialize)]
        struct AggregateJson {
            x: u32,
            runs: u32,
            metrics: serde_json::Map<String, serde_json::Value>,
        }
        let aggregate = self
            .rows
            .iter()
            .map(|row| {
                let mut metrics = serde_json::Map::new();
                for (c, s) in Column::ALL.iter().zip(&row.metrics) {
                    metrics.insert(c.key().to_string(), serde_json::to_value(s).expect("plain numbers"));
                }
                AggregateJson { x: row.x, runs: row.runs, metrics }
            })
            .collect();
        let doc = Doc { spec, aggregate, runs: self.reports.iter().map(Record::new).collect() };
        let file = File::create(path).map_err(|e| SimError::io(path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, &doc)?;
        w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| SimError::io(path, e))
    }
}

/// Header of the aggregate CSV: `X`, `runs`, then mean/sd/min/max for
/// every table column.
pub fn aggregate_header() -> Vec<String> {
    let mut h = vec!["X".to_string(), "runs".to_string()];
    for c in Column::ALL {
        for stat in ["mean", "sd", "min", "max"] {
            h.push(format!("{} {stat}", c.header()));
        }
    }
    h
}

/// Full-precision aggregate table; undefined statistics are left empty.
pub fn write_aggregate_csv(rows: &[AggregateRow], path: &Path) -> Result<(), SimError> {
    if rows.is_empty() {
        return Err(SimError::EmptyOutput);
    }
    let file = File::create(path).map_err(|e| SimError::io(path, e))?;
    let io = |e: csv::Error| SimError::io(path, e.into());
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file);
    w.write_record(aggregate_header()).map_err(io)?;
    let num = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for row in rows {
        let mut rec = vec![row.x.to_string(), row.runs.to_string()];
        for s in &row.metrics {
            rec.push(num(s.map(|s| s.mean)));
            rec.push(num(s.and_then(|s| s.sd)));
            rec.push(num(s.map(|s| s.min)));
            rec.push(num(s.map(|s| s.max)));
        }
        w.write_record(rec).map_err(io)?;
    }
    w.flush().map_err(|e| SimError::io(path, e))
}
