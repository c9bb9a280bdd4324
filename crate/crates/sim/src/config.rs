//! Command line and config-file parsing into [`RunSpec`] / [`SweepSpec`].
//!
//! Precedence is defaults < config file (`--config`, TOML) < flags.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fso_core::{Probability, Scenario, ScenarioConfig};
use serde::{Deserialize, Serialize};

use crate::error::SimError;

#[derive(Debug, Parser)]
#[command(name = "fso-sim", version, about = "Fall detection and response simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a single cell and print its table.
    Run(CommonArgs),
    /// Sweep the informal-carer count with replications.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioArg {
    S1,
    S2,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::S1 => Scenario::S1,
            ScenarioArg::S2 => Scenario::S2,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Scenario, as an alternative to `--scenario`.
    #[arg(value_enum)]
    pub scenario_pos: Option<ScenarioArg>,
    #[arg(long, value_enum)]
    pub scenario: Option<ScenarioArg>,
    /// Informal carers: `N` or `A..B:STEP` (inclusive).
    #[arg(long)]
    pub ics: Option<IcRange>,
    #[arg(long)]
    pub ticks: Option<u64>,
    /// Run seed for `run`, base seed for `sweep`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub p_fall: Option<f64>,
    #[arg(long)]
    pub p_fn: Option<f64>,
    #[arg(long)]
    pub p_fp: Option<f64>,
    #[arg(long)]
    pub n_ea: Option<u32>,
    #[arg(long)]
    pub n_pc: Option<u32>,
    #[arg(long)]
    pub n_ma: Option<u32>,
    /// Grid size `WxH`; both odd.
    #[arg(long)]
    pub grid: Option<GridSize>,
    #[arg(long, action = clap::ArgAction::Set)]
    pub count_return_travel: Option<bool>,
    #[arg(long)]
    pub placement_seed: Option<u64>,
    /// NDJSON event trace: a file for `run`, a directory for `sweep`.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Output: a `.csv` or `.json` file for `run`, a directory for `sweep`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML file with the same keys as the flags (snake_case).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub replications: Option<u32>,
}

/// Informal-carer counts to run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IcRange(pub Vec<u32>);

impl Default for IcRange {
    fn default() -> Self {
        IcRange((0..=40).step_by(5).collect())
    }
}

impl FromStr for IcRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let num = |t: &str| t.trim().parse::<u32>().map_err(|_| format!("bad IC count `{t}`"));
        let Some((a, rest)) = s.split_once("..") else {
            return Ok(IcRange(vec![num(s)?]));
        };
        let (b, step) = match rest.split_once(':') {
            Some((b, step)) => (num(b)?, num(step)?),
            None => (num(rest)?, 1),
        };
        let a = num(a)?;
        if step == 0 {
            return Err("IC step must be positive".into());
        }
        if a > b {
            return Err(format!("empty IC range {a}..{b}"));
        }
        Ok(IcRange((a..=b).step_by(step as usize).collect()))
    }
}

impl<'de> Deserialize<'de> for IcRange {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            One(u32),
            List(Vec<u32>),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::One(n) => Ok(IcRange(vec![n])),
            Raw::List(v) if !v.is_empty() => Ok(IcRange(v)),
            Raw::List(_) => Err(serde::de::Error::custom("empty IC list")),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSize {
    pub width: u32,
    pub height: u32,
}

impl FromStr for GridSize {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("grid `{s}` is not WxH"))?;
        let dim = |t: &str| -> Result<u32, String> {
            let v: u32 = t.trim().parse().map_err(|_| format!("bad grid dimension `{t}`"))?;
            if v.is_multiple_of(2) {
                return Err(format!("grid dimension {v} must be odd (the grid is centred on the origin)"));
            }
            Ok(v)
        };
        Ok(GridSize { width: dim(w)?, height: dim(h)? })
    }
}

impl<'de> Deserialize<'de> for GridSize {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Config-file schema; every key optional, unknown keys rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub scenario: Option<ScenarioArg>,
    pub ics: Option<IcRange>,
    pub ticks: Option<u64>,
    pub seed: Option<u64>,
    pub replications: Option<u32>,
    pub p_fall: Option<f64>,
    pub p_fn: Option<f64>,
    pub p_fp: Option<f64>,
    pub n_ea: Option<u32>,
    pub n_pc: Option<u32>,
    pub n_ma: Option<u32>,
    pub grid: Option<GridSize>,
    pub count_return_travel: Option<bool>,
    pub placement_seed: Option<u64>,
    pub trace: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = fs::read_to_string(path).map_err(|e| SimError::usage(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| SimError::usage(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_REPLICATIONS: u32 = 10;

/// One `run` invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub config: ScenarioConfig,
    pub out: Option<PathBuf>,
    pub trace: Option<PathBuf>,
}

/// One `sweep` invocation. `base` carries every setting except `n_ic` and
/// `seed`, which vary per cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub base: ScenarioConfig,
    pub x_values: Vec<u32>,
    pub replications: u32,
    pub base_seed: u64,
    pub out: Option<PathBuf>,
    pub trace: Option<PathBuf>,
}

impl SweepSpec {
    /// Defaults for `scenario` with no overrides.
    pub fn new(scenario: Scenario) -> Self {
        SweepSpec {
            base: ScenarioConfig { scenario, ..ScenarioConfig::default() },
            x_values: IcRange::default().0,
            replications: DEFAULT_REPLICATIONS,
            base_seed: DEFAULT_SEED,
            out: None,
            trace: None,
        }
    }
}

/// Flags merged over the file over the defaults.
#[derive(Debug, Default)]
struct Merged {
    scenario: Option<ScenarioArg>,
    ics: Option<IcRange>,
    seed: Option<u64>,
    replications: Option<u32>,
    out: Option<PathBuf>,
    trace: Option<PathBuf>,
    config: ScenarioConfig,
}

fn merge(args: &CommonArgs, replications: Option<u32>) -> Result<Merged, SimError> {
    let file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    if let (Some(a), Some(b)) = (args.scenario_pos, args.scenario) {
        if a != b {
            return Err(SimError::usage("conflicting scenario arguments"));
        }
    }
    let mut c = ScenarioConfig::default();
    let prob = |name: &str, v: f64| {
        Probability::new(v).map_err(|_| SimError::usage(format!("--{name} {v} is outside [0, 1]")))
    };
    if let Some(v) = args.ticks.or(file.ticks) {
        c.ticks = v;
    }
    if let Some(v) = args.p_fall.or(file.p_fall) {
        c.p_fall = prob("p-fall", v)?;
    }
    if let Some(v) = args.p_fn.or(file.p_fn) {
        c.sensor.p_false_negative = prob("p-fn", v)?;
    }
    if let Some(v) = args.p_fp.or(file.p_fp) {
        c.sensor.p_false_positive = prob("p-fp", v)?;
    }
    if let Some(v) = args.n_ea.or(file.n_ea) {
        c.world.n_ea = v;
    }
    if let Some(v) = args.n_pc.or(file.n_pc) {
        c.world.n_pc = v;
    }
    if let Some(v) = args.n_ma.or(file.n_ma) {
        c.world.n_ma = v;
    }
    if let Some(g) = args.grid.or(file.grid) {
        c.world.half_width = (g.width / 2) as i32;
        c.world.half_height = (g.height / 2) as i32;
    }
    if let Some(v) = args.count_return_travel.or(file.count_return_travel) {
        c.count_return_travel = v;
    }
    if let Some(v) = args.placement_seed.or(file.placement_seed) {
        c.world.placement_seed = v;
    }
    Ok(Merged {
        scenario: args.scenario_pos.or(args.scenario).or(file.scenario),
        ics: args.ics.clone().or(file.ics),
        seed: args.seed.or(file.seed),
        replications: replications.or(file.replications),
        out: args.out.clone().or(file.out),
        trace: args.trace.clone().or(file.trace),
        config: c,
    })
}

pub fn run_spec(args: &CommonArgs) -> Result<RunSpec, SimError> {
    let m = merge(args, None)?;
    let mut config = m.config;
    config.scenario = m.scenario.map_or(Scenario::S1, Scenario::from);
    config.n_ic = match m.ics {
        None => 0,
        Some(IcRange(v)) if v.len() == 1 => v[0],
        Some(_) => return Err(SimError::usage("`run` takes a single IC count; use `sweep` for ranges")),
    };
    config.seed = m.seed.unwrap_or(DEFAULT_SEED);
    Ok(RunSpec { config, out: m.out, trace: m.trace })
}

pub fn sweep_spec(args: &SweepArgs) -> Result<SweepSpec, SimError> {
    let m = merge(&args.common, args.replications)?;
    let mut base = m.config;
    base.scenario = m.scenario.map_or(Scenario::S1, Scenario::from);
    let replications = m.replications.unwrap_or(DEFAULT_REPLICATIONS);
    if replications == 0 {
        return Err(SimError::usage("--replications must be at least 1"));
    }
    Ok(SweepSpec {
        base,
        x_values: m.ics.unwrap_or_default().0,
        replications,
        base_seed: m.seed.unwrap_or(DEFAULT_SEED),
        out: m.out,
        trace: m.trace,
    })
}
