#![allow(dead_code)]

use fso_core::case::GroundTruth;
use fso_core::fso::{Engine, FsoEvent, FsoEventKind, InstanceId};
use fso_core::sensor::{Detectors, SensorModel};
use fso_core::world::{place_agents, Deployment, World, WorldConfig};
use fso_core::{AgentId, CaseId, Position, Tick};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Hand-placed world on a 21x21 grid: houses, one hospital and ICs where
/// the test wants them.
pub struct Layout {
    pub houses: Vec<Position>,
    pub hospital: Position,
    pub ics: Vec<Position>,
    pub n_pc: u32,
    pub n_ma: u32,
}

impl Layout {
    pub fn new(houses: &[(i32, i32)], hospital: (i32, i32), ics: &[(i32, i32)]) -> Self {
        let p = |&(x, y): &(i32, i32)| Position::new(x, y);
        Layout {
            houses: houses.iter().map(p).collect(),
            hospital: p(&hospital),
            ics: ics.iter().map(p).collect(),
            n_pc: 6,
            n_ma: 5,
        }
    }

    pub fn crews(mut self, n_pc: u32, n_ma: u32) -> Self {
        self.n_pc = n_pc;
        self.n_ma = n_ma;
        self
    }

    pub fn build(&self) -> World {
        let config = WorldConfig {
            half_width: 10,
            half_height: 10,
            n_ea: self.houses.len() as u32,
            n_pc: self.n_pc,
            n_ma: self.n_ma,
            speed: 1,
            placement_seed: 1,
        };
        let deployment =
            Deployment { n_ic: self.ics.len() as u32, detectors: Detectors::Single, sensor: SensorModel::default() };
        let mut world = place_agents(&config, &deployment, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        world.hospital = self.hospital;
        let r = &world.roster;
        let staff: Vec<AgentId> = [r.l2_coordinator.unwrap(), r.l3_coordinator.unwrap()]
            .into_iter()
            .chain(r.professional_carers.iter().copied())
            .chain(r.mobility_agents.iter().copied())
            .collect();
        for id in staff {
            let a = world.agent_mut(id);
            a.position = self.hospital;
            a.base = Some(self.hospital);
        }
        for (h, &house) in self.houses.iter().enumerate() {
            let hh = world.roster.households[h].clone();
            world.roster.households[h].house = house;
            for id in std::iter::once(hh.elder).chain(hh.devices).chain([hh.coordinator]) {
                let a = world.agent_mut(id);
                a.position = house;
                a.base = Some(house);
            }
        }
        let ics = world.roster.informal_carers.clone();
        for (id, &pos) in ics.iter().zip(&self.ics) {
            world.agent_mut(*id).position = pos;
        }
        world
    }
}

pub fn elder(world: &World, household: usize) -> AgentId {
    world.roster.households[household].elder
}

/// Opens a case for `household` and delivers its DA's fall notification.
pub fn raise(
    engine: &mut Engine,
    world: &mut World,
    household: usize,
    truth: GroundTruth,
    tick: Tick,
) -> (CaseId, Vec<InstanceId>) {
    let h = world.roster.households[household].clone();
    let case = engine.open_case(world, h.elder, truth, tick);
    let circle = engine.household_circle(h.elder).unwrap();
    let event = FsoEvent { kind: FsoEventKind::FallDetected, source: h.devices[0], case, tick };
    let readied = engine.notify(circle, event, world, tick).unwrap();
    (case, readied)
}

/// Runs the protocol pass for ticks `from..=to`, auditing after each.
pub fn advance(engine: &mut Engine, world: &mut World, rng: &mut ChaCha8Rng, from: Tick, to: Tick) -> Vec<FsoEvent> {
    let mut events = Vec::new();
    for t in from..=to {
        events.extend(engine.tick_protocols(world, rng, t));
        engine.audit(world).unwrap_or_else(|v| panic!("tick {t}: {v}"));
    }
    events
}

pub fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(99)
}
