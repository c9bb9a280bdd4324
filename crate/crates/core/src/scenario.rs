//! Scenario drivers and the per-run simulation loop.
//!
//! Every tick, each elderly agent without a pending alarm tosses for a true
//! fall and then for its device outcomes (see [`Detectors`]); exactly one of
//! true negative, false negative or raised alarm results. Raised alarms are
//! handed to the FSO engine at the elder's household circle. After the
//! detector pass the engine advances its protocols by one tick.
//!
//! S1 guards each elder with one device, S2 with two.

use alloc::vec::Vec;
use core::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::case::{CaseId, GroundTruth};
use crate::fso::{Engine, FsoEvent, FsoEventKind, ProtocolState, Violation};
use crate::metrics::{ConfusionCounters, CostLedger, MetricsReport};
use crate::sensor::{toss, Detectors, Probability, Reading, SensorModel};
use crate::trace::{TraceEvent, TraceRecord};
use crate::world::{place_agents, AgentId, Deployment, World, WorldConfig, WorldError};
use crate::Tick;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    S1,
    S2,
}

impl Scenario {
    pub fn detectors(self) -> Detectors {
        match self {
            Scenario::S1 => Detectors::Single,
            Scenario::S2 => Detectors::Dual,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Scenario::S1 => "s1",
            Scenario::S2 => "s2",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::S1 => "S1",
            Scenario::S2 => "S2",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    /// Number of informal carers `X`.
    pub n_ic: u32,
    pub ticks: u64,
    pub p_fall: Probability,
    pub sensor: SensorModel,
    pub world: WorldConfig,
    pub seed: u64,
    /// Whether PC/MA social cost includes the trip back to the hospital.
    pub count_return_travel: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scenario: Scenario::S1,
            n_ic: 0,
            ticks: 10_000,
            p_fall: Probability::one_in(600),
            sensor: SensorModel::default(),
            world: WorldConfig::default(),
            seed: 0,
            count_return_travel: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigError {
    World(WorldError),
    ZeroTicks,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::World(e) => write!(f, "world: {e}"),
            ConfigError::ZeroTicks => f.write_str("ticks must be at least 1"),
        }
    }
}

impl From<WorldError> for ConfigError {
    fn from(e: WorldError) -> Self {
        ConfigError::World(e)
    }
}

/// One simulation run in progress.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: ScenarioConfig,
    detectors: Detectors,
    world: World,
    engine: Engine,
    rng: ChaCha8Rng,
    next_tick: Tick,
    counters: ConfusionCounters,
    finished: bool,
}

impl Simulation {
    pub fn new(config: ScenarioConfig) -> Result<Self, ConfigError> {
        if config.ticks == 0 {
            return Err(ConfigError::ZeroTicks);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let detectors = config.scenario.detectors();
        let deployment = Deployment { n_ic: config.n_ic, detectors, sensor: config.sensor };
        let world = place_agents(&config.world, &deployment, &mut rng)?;
        let engine = Engine::new(&world, config.count_return_travel);
        Ok(Simulation {
            config,
            detectors,
            world,
            engine,
            rng,
            next_tick: 0,
            counters: ConfusionCounters::default(),
            finished: false,
        })
    }

    /// Records every event from now on.
    pub fn with_trace(mut self) -> Self {
        self.engine.enable_trace();
        self
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn counters(&self) -> ConfusionCounters {
        self.counters
    }

    pub fn next_tick(&self) -> Tick {
        self.next_tick
    }

    pub fn is_done(&self) -> bool {
        self.next_tick >= self.config.ticks
    }

    /// Runs one tick: the detector pass then the protocol pass. Returns the
    /// FSO events raised by arrivals, or `None` once all ticks have run.
    pub fn step(&mut self) -> Option<Vec<FsoEvent>> {
        if self.is_done() {
            return None;
        }
        let tick = self.next_tick;
        self.detector_tick(tick);
        let events = self.engine.tick_protocols(&mut self.world, &mut self.rng, tick);
        self.next_tick += 1;
        Some(events)
    }

    /// One S1 or S2 detector pass over every elder without a pending alarm.
    pub fn detector_tick(&mut self, tick: Tick) {
        let mut quiet = (0u32, 0u32);
        for h in 0..self.world.roster.households.len() {
            let household = &self.world.roster.households[h];
            let elder = household.elder;
            if self.world.agent(elder).pending_alarm.is_some() {
                continue;
            }
            let fell = toss(self.config.p_fall, &mut self.rng);
            match self.detectors.observe(fell, &self.config.sensor, &mut self.rng) {
                Reading::TrueNegative => {
                    self.counters.tn += 1;
                    quiet.0 += 1;
                }
                Reading::FalseNegative => {
                    self.counters.fn_ += 1;
                    quiet.1 += 1;
                }
                Reading::Alarm { truth, slot } => {
                    let device = household.devices[slot as usize];
                    match truth {
                        GroundTruth::TrueFall => self.counters.tp += 1,
                        GroundTruth::Phantom => self.counters.fp += 1,
                    }
                    self.alarm_event(elder, device, truth, tick);
                }
            }
        }
        if quiet != (0, 0) {
            self.engine.emit(tick, None, TraceEvent::Quiet { true_negatives: quiet.0, false_negatives: quiet.1 }, &[]);
        }
    }

    /// Opens a case and notifies the elder's household coordinator. The
    /// case's social cost accrues into its record as the protocols run.
    pub fn alarm_event(&mut self, elder: AgentId, device: AgentId, truth: GroundTruth, tick: Tick) -> CaseId {
        let case = self.engine.open_case(&mut self.world, elder, truth, tick);
        self.engine.emit(tick, Some(case), TraceEvent::AlarmRaised { truth }, &[elder, device]);
        let circle = self.engine.household_circle(elder).expect("elder has a household circle");
        let event = FsoEvent { kind: FsoEventKind::FallDetected, source: device, case, tick };
        self.engine.notify(circle, event, &mut self.world, tick).expect("device belongs to its household");
        case
    }

    pub fn audit(&self) -> Result<(), Violation> {
        self.engine.audit(&self.world)?;
        let treated = self.engine.cases().len() as u64;
        if self.counters.fp + self.counters.tp != treated {
            return Err(Violation("fp + tp differs from treated cases", treated as u32));
        }
        if self.finished {
            for c in self.engine.cases() {
                if c.terminal.is_none() {
                    return Err(Violation("case without terminal state", c.id.0));
                }
                let p1 = self.engine.p1_of(c.id).map(|p| self.engine.instance(p).state);
                if !matches!(p1, Some(ProtocolState::Completed | ProtocolState::Canceled)) {
                    return Err(Violation("p1 neither completed nor canceled", c.id.0));
                }
            }
        }
        Ok(())
    }

    /// Runs the remaining ticks.
    pub fn run_to_end(&mut self) {
        while self.step().is_some() {}
    }

    /// Closes the run at its final tick and builds the report.
    pub fn finish(&mut self) -> MetricsReport {
        self.run_to_end();
        let final_tick = self.config.ticks - 1;
        if !self.finished {
            self.engine.finalize(&mut self.world, final_tick);
            self.finished = true;
        }
        MetricsReport::new(self.config.clone(), self.counters, self.ledger(final_tick))
    }

    pub fn take_trace(&mut self) -> Option<Vec<TraceRecord>> {
        self.engine.take_trace()
    }

    fn ledger(&self, final_tick: Tick) -> CostLedger {
        let cases = self.engine.cases();
        let tallies = self.engine.tallies();
        CostLedger {
            social_cost: self.engine.total_cost(),
            sum_wt: cases.iter().map(|c| c.waiting_time(final_tick)).sum(),
            treated_cases: cases.len() as u64,
            v_ic: tallies.v_ic,
            v_ma: tallies.v_ma,
            i_ma: tallies.i_ma,
        }
    }
}

/// Runs one configuration start to finish. Deterministic in the config.
pub fn run_simulation(config: ScenarioConfig) -> Result<MetricsReport, ConfigError> {
    Ok(Simulation::new(config)?.finish())
}
