//! Confusion counters, the social-cost and waiting-time ledger, and the
//! derived figures reported per run.
//!
//! The rates follow the empirical table formulas rather than textbook ones:
//! FP rate is the phantom share of treated cases `fp / (fp + tp)` and FN rate
//! is `fn / (fn + tn)`. These are not the complements of specificity and
//! sensitivity; the complement forms are reported separately as
//! `fp_rate_complement_of_specificity` and `fn_rate_complement_of_sensitivity`.

use core::fmt;

use serde::{Deserialize, Serialize};

use crate::case::CaseCost;
use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricError {
    /// The figure's denominator is zero.
    Undefined(&'static str),
}

impl fmt::Display for MetricError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricError::Undefined(what) => write!(f, "{what} is undefined: zero denominator"),
        }
    }
}

fn ratio(num: u64, den: u64, what: &'static str) -> Result<f64, MetricError> {
    if den == 0 {
        Err(MetricError::Undefined(what))
    } else {
        Ok(num as f64 / den as f64)
    }
}

/// `100 * tp / (tp + fn)`.
pub fn sensitivity(tp: u64, fn_: u64) -> Result<f64, MetricError> {
    ratio(tp, tp + fn_, "sensitivity").map(|r| 100.0 * r)
}

/// `100 * tn / (tn + fp)`.
pub fn specificity(tn: u64, fp: u64) -> Result<f64, MetricError> {
    ratio(tn, tn + fp, "specificity").map(|r| 100.0 * r)
}

/// Share of treated cases that were phantoms.
pub fn fp_rate(fp: u64, tp: u64) -> Result<f64, MetricError> {
    ratio(fp, fp + tp, "FP rate")
}

pub fn fn_rate(fn_: u64, tn: u64) -> Result<f64, MetricError> {
    ratio(fn_, fn_ + tn, "FN rate")
}

pub fn normalized_sc(sum_sc: u64, cases: u64) -> Result<f64, MetricError> {
    ratio(sum_sc, cases, "normalized social cost")
}

pub fn normalized_wt(sum_wt: u64, cases: u64) -> Result<f64, MetricError> {
    ratio(sum_wt, cases, "normalized waiting time")
}

pub fn avg_per_tick(count: u64, ticks: u64) -> Result<f64, MetricError> {
    ratio(count, ticks, "per-tick average")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounters {
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tp: u64,
    pub tn: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CostLedger {
    pub social_cost: CaseCost,
    pub sum_wt: u64,
    pub treated_cases: u64,
    pub v_ic: u64,
    pub v_ma: u64,
    pub i_ma: u64,
}

/// Figures computed from counters and ledger. `None` marks a zero
/// denominator.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Derived {
    pub avg_fp_per_tick: Option<f64>,
    pub avg_fn_per_tick: Option<f64>,
    pub fp_rate: Option<f64>,
    pub fn_rate: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub normalized_sc_ma: Option<f64>,
    pub normalized_sc_pc: Option<f64>,
    pub normalized_sc_ic: Option<f64>,
    pub normalized_wt: Option<f64>,
    pub fp_rate_complement_of_specificity: Option<f64>,
    pub fn_rate_complement_of_sensitivity: Option<f64>,
}

impl Derived {
    pub fn compute(c: &ConfusionCounters, l: &CostLedger, ticks: u64) -> Self {
        let cases = l.treated_cases;
        Derived {
            avg_fp_per_tick: avg_per_tick(c.fp, ticks).ok(),
            avg_fn_per_tick: avg_per_tick(c.fn_, ticks).ok(),
            fp_rate: fp_rate(c.fp, c.tp).ok(),
            fn_rate: fn_rate(c.fn_, c.tn).ok(),
            sensitivity: sensitivity(c.tp, c.fn_).ok(),
            specificity: specificity(c.tn, c.fp).ok(),
            normalized_sc_ma: normalized_sc(l.social_cost.mobility, cases).ok(),
            normalized_sc_pc: normalized_sc(l.social_cost.professional, cases).ok(),
            normalized_sc_ic: normalized_sc(l.social_cost.informal, cases).ok(),
            normalized_wt: normalized_wt(l.sum_wt, cases).ok(),
            fp_rate_complement_of_specificity: ratio(c.fp, c.fp + c.tn, "FP rate").ok(),
            fn_rate_complement_of_sensitivity: ratio(c.fn_, c.fn_ + c.tp, "FN rate").ok(),
        }
    }
}

/// One run's results: a row of the S1/S2 result tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config: ScenarioConfig,
    pub counters: ConfusionCounters,
    pub ledger: CostLedger,
    pub derived: Derived,
}

impl MetricsReport {
    pub fn new(config: ScenarioConfig, counters: ConfusionCounters, ledger: CostLedger) -> Self {
        let derived = Derived::compute(&counters, &ledger, config.ticks);
        MetricsReport { config, counters, ledger, derived }
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    /// Recomputes `derived` from the raw counters; a no-op on a consistent
    /// report.
    pub fn refinalize(&mut self) {
        self.derived = Derived::compute(&self.counters, &self.ledger, self.config.ticks);
    }
}
