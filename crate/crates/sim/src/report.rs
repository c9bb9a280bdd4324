//! Table-shaped CSV rows and structured records for [`MetricsReport`].

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use fso_core::MetricsReport;
use serde::Serialize;

use crate::error::SimError;

/// How a column is printed in the table CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    Integer,
    /// Round to `n` places, as `format!` does.
    Round(usize),
    /// Truncate toward zero to `n` places.
    Truncate(usize),
}

/// Result table columns, in output order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    Fp,
    Fn,
    Tp,
    Tn,
    AvgFpPerTick,
    AvgFnPerTick,
    FpRate,
    FnRate,
    Sensitivity,
    Specificity,
    SumScMa,
    SumScIc,
    SumWt,
    TreatedCases,
    VIc,
    VMa,
    IMa,
    NormalizedScMa,
    NormalizedWt,
}

impl Column {
    pub const ALL: [Column; 19] = [
        Column::Fp,
        Column::Fn,
        Column::Tp,
        Column::Tn,
        Column::AvgFpPerTick,
        Column::AvgFnPerTick,
        Column::FpRate,
        Column::FnRate,
        Column::Sensitivity,
        Column::Specificity,
        Column::SumScMa,
        Column::SumScIc,
        Column::SumWt,
        Column::TreatedCases,
        Column::VIc,
        Column::VMa,
        Column::IMa,
        Column::NormalizedScMa,
        Column::NormalizedWt,
    ];

    pub fn header(self) -> &'static str {
        match self {
            Column::Fp => "FP",
            Column::Fn => "FN",
            Column::Tp => "TP",
            Column::Tn => "TN",
            Column::AvgFpPerTick => "Avg. FP/tick",
            Column::AvgFnPerTick => "Avg. FN/tick",
            Column::FpRate => "FP rate",
            Column::FnRate => "FN rate",
            Column::Sensitivity => "Sensitivity",
            Column::Specificity => "Specificity",
            Column::SumScMa => "ΣSC(MA)",
            Column::SumScIc => "ΣSC(IC)",
            Column::SumWt => "ΣWT",
            Column::TreatedCases => "♯",
            Column::VIc => "V(IC)",
            Column::VMa => "V(MA)",
            Column::IMa => "I(MA)",
            Column::NormalizedScMa => "\\hat{ΣSC}(MA)",
            Column::NormalizedWt => "\\hat{ΣWT}",
        }
    }

    /// snake_case name used in structured output.
    pub fn key(self) -> &'static str {
        match self {
            Column::Fp => "fp",
            Column::Fn => "fn",
            Column::Tp => "tp",
            Column::Tn => "tn",
            Column::AvgFpPerTick => "avg_fp_per_tick",
            Column::AvgFnPerTick => "avg_fn_per_tick",
            Column::FpRate => "fp_rate",
            Column::FnRate => "fn_rate",
            Column::Sensitivity => "sensitivity",
            Column::Specificity => "specificity",
            Column::SumScMa => "sum_sc_ma",
            Column::SumScIc => "sum_sc_ic",
            Column::SumWt => "sum_wt",
            Column::TreatedCases => "treated_cases",
            Column::VIc => "v_ic",
            Column::VMa => "v_ma",
            Column::IMa => "i_ma",
            Column::NormalizedScMa => "normalized_sc_ma",
            Column::NormalizedWt => "normalized_wt",
        }
    }

    pub fn precision(self) -> Precision {
        match self {
            Column::AvgFpPerTick | Column::AvgFnPerTick => Precision::Round(4),
            Column::FpRate => Precision::Truncate(4),
            Column::FnRate => Precision::Round(5),
            Column::Sensitivity | Column::Specificity => Precision::Truncate(2),
            Column::NormalizedScMa | Column::NormalizedWt => Precision::Round(3),
            _ => Precision::Integer,
        }
    }

    /// Full-precision value; `None` when the figure is undefined.
    pub fn value(self, r: &MetricsReport) -> Option<f64> {
        let (c, l, d) = (&r.counters, &r.ledger, &r.derived);
        let int = |v: u64| Some(v as f64);
        match self {
            Column::Fp => int(c.fp),
            Column::Fn => int(c.fn_),
            Column::Tp => int(c.tp),
            Column::Tn => int(c.tn),
            Column::AvgFpPerTick => d.avg_fp_per_tick,
            Column::AvgFnPerTick => d.avg_fn_per_tick,
            Column::FpRate => d.fp_rate,
            Column::FnRate => d.fn_rate,
            Column::Sensitivity => d.sensitivity,
            Column::Specificity => d.specificity,
            Column::SumScMa => int(l.social_cost.mobility),
            Column::SumScIc => int(l.social_cost.informal),
            Column::SumWt => int(l.sum_wt),
            Column::TreatedCases => int(l.treated_cases),
            Column::VIc => int(l.v_ic),
            Column::VMa => int(l.v_ma),
            Column::IMa => int(l.i_ma),
            Column::NormalizedScMa => d.normalized_sc_ma,
            Column::NormalizedWt => d.normalized_wt,
        }
    }

    /// Table rendering of `value`; empty when undefined.
    pub fn display(self, value: Option<f64>) -> String {
        value.map(|v| format_number(v, self.precision())).unwrap_or_default()
    }
}

/// Fixed-point rendering with trailing zeros dropped, no grouping, `.` as
/// decimal point.
pub fn format_number(v: f64, precision: Precision) -> String {
    let s = match precision {
        Precision::Integer => return format!("{}", v.round() as i64),
        Precision::Round(places) => format!("{v:.places$}"),
        Precision::Truncate(places) => {
            let k = 10f64.powi(places as i32);
            // ratios like 0.0299 * 1e4 land a hair below the integer
            let t = (v * k + 1e-9 * v.abs().max(1.0)).trunc() / k;
            format!("{t:.places$}")
        }
    };
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn header() -> Vec<&'static str> {
    Column::ALL.iter().map(|c| c.header()).collect()
}

pub fn table_row(r: &MetricsReport) -> Vec<String> {
    Column::ALL.iter().map(|c| c.display(c.value(r))).collect()
}

/// Writes a header and one table row per report. Refuses an empty list
/// without touching the filesystem.
pub fn emit_csv(reports: &[MetricsReport], path: &Path) -> Result<(), SimError> {
    if reports.is_empty() {
        return Err(SimError::EmptyOutput);
    }
    let file = File::create(path).map_err(|e| SimError::io(path, e))?;
    write_csv(reports, file).map_err(|e| SimError::io(path, e))
}

pub fn write_csv<W: Write>(reports: &[MetricsReport], out: W) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(header())?;
    for r in reports {
        w.write_record(table_row(r))?;
    }
    w.flush()
}

/// Flat key-value view of one report at full precision.
#[derive(Debug, Clone, Serialize)]
pub struct Record<'a> {
    pub scenario: &'a str,
    pub n_ic: u32,
    pub seed: u64,
    pub ticks: u64,
    #[serde(flatten)]
    pub report: &'a MetricsReport,
}

impl<'a> Record<'a> {
    pub fn new(report: &'a MetricsReport) -> Self {
        Record {
            scenario: report.config.scenario.tag(),
            n_ic: report.config.n_ic,
            seed: report.config.seed,
            ticks: report.config.ticks,
            report,
        }
    }
}

/// Human-readable two-column table for terminal output.
pub fn render_table(r: &MetricsReport) -> String {
    let mut out = format!("{}({})  seed {}\n", r.config.scenario, r.config.n_ic, r.config.seed);
    for c in Column::ALL {
        out.push_str(&format!("{:<16}{:>12}\n", c.header(), c.display(c.value(r))));
    }
    out
}
