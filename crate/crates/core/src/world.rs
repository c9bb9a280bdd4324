//! The bounded 2-D grid, the agents living on it and their kinematics.
//!
//! Distances are Chebyshev (king moves): an agent moving at speed `s` covers
//! up to `s` king moves per tick. The grid does not wrap.

use alloc::vec::Vec;
use core::fmt;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::case::CaseId;
use crate::fso::InstanceId;
use crate::sensor::{Detectors, SensorModel};
use crate::Tick;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Position {
    pub x: i32,
    pub y: i32,
}

impl Position {
    pub const fn new(x: i32, y: i32) -> Self {
        Position { x, y }
    }

    pub fn chebyshev(self, other: Position) -> u32 {
        let dx = self.x.abs_diff(other.x);
        let dy = self.y.abs_diff(other.y);
        dx.max(dy)
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Cells with `-half_width <= x <= half_width` and `-half_height <= y <= half_height`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub half_width: i32,
    pub half_height: i32,
}

impl Grid {
    pub fn contains(&self, p: Position) -> bool {
        p.x.abs() <= self.half_width && p.y.abs() <= self.half_height
    }

    pub fn width(&self) -> u32 {
        2 * self.half_width as u32 + 1
    }

    pub fn height(&self) -> u32 {
        2 * self.half_height as u32 + 1
    }

    pub fn cell_count(&self) -> usize {
        self.width() as usize * self.height() as usize
    }

    /// Row-major cell for `index < cell_count()`.
    pub fn cell(&self, index: usize) -> Position {
        let w = self.width() as usize;
        Position::new((index % w) as i32 - self.half_width, (index / w) as i32 - self.half_height)
    }

    /// In-bounds 8-neighbourhood of `p`, in a fixed order.
    pub fn neighbours(&self, p: Position) -> ([Position; 8], usize) {
        let mut out = [p; 8];
        let mut n = 0;
        for dy in -1..=1 {
            for dx in -1..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let q = Position::new(p.x + dx, p.y + dy);
                if self.contains(q) {
                    out[n] = q;
                    n += 1;
                }
            }
        }
        (out, n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u32);

impl AgentId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgentKind {
    ElderlyAgent,
    DeviceAgent,
    InformalCarer,
    ProfessionalCarer,
    MobilityAgent,
    CommunityAgent,
}

impl AgentKind {
    pub fn is_mobile(self) -> bool {
        matches!(self, AgentKind::InformalCarer | AgentKind::ProfessionalCarer | AgentKind::MobilityAgent)
    }

    pub fn abbrev(self) -> &'static str {
        match self {
            AgentKind::ElderlyAgent => "EA",
            AgentKind::DeviceAgent => "DA",
            AgentKind::InformalCarer => "IC",
            AgentKind::ProfessionalCarer => "PC",
            AgentKind::MobilityAgent => "MA",
            AgentKind::CommunityAgent => "CA",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgentStatus {
    Idle,
    RandomWalking,
    EnrolledTraveling { target: Position, protocol: InstanceId },
    AtScene(InstanceId),
    ReturningToBase,
}

/// The case an enrolled or returning agent is currently spending ticks on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Engagement {
    pub case: CaseId,
    pub since: Tick,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: AgentId,
    pub kind: AgentKind,
    pub position: Position,
    /// House for EA/DA/L1-CA, hospital for PC/MA and the upper coordinators.
    pub base: Option<Position>,
    pub status: AgentStatus,
    pub sensor: Option<SensorModel>,
    pub pending_alarm: Option<CaseId>,
    pub engagement: Option<Engagement>,
}

impl AgentState {
    fn new(id: AgentId, kind: AgentKind, position: Position, base: Option<Position>, status: AgentStatus) -> Self {
        AgentState { id, kind, position, base, status, sensor: None, pending_alarm: None, engagement: None }
    }

    pub fn bound_protocol(&self) -> Option<InstanceId> {
        match self.status {
            AgentStatus::EnrolledTraveling { protocol, .. } | AgentStatus::AtScene(protocol) => Some(protocol),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub half_width: i32,
    pub half_height: i32,
    pub n_ea: u32,
    pub n_pc: u32,
    pub n_ma: u32,
    /// Cells per tick.
    pub speed: u32,
    /// Governs house and hospital cells only.
    pub placement_seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig { half_width: 16, half_height: 16, n_ea: 30, n_pc: 6, n_ma: 5, speed: 1, placement_seed: 2015 }
    }
}

impl WorldConfig {
    pub fn grid(&self) -> Grid {
        Grid { half_width: self.half_width, half_height: self.half_height }
    }
}

/// Parts of the roster that depend on the scenario rather than the world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deployment {
    pub n_ic: u32,
    pub detectors: Detectors,
    pub sensor: SensorModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorldError {
    InvalidGrid {
        half_width: i32,
        half_height: i32,
    },
    ZeroSpeed,
    GridTooSmall {
        needed: usize,
        available: usize,
    },
    /// `step_toward` on an agent that cannot move, or is not travelling.
    NotTravelling(AgentId),
}

impl fmt::Display for WorldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WorldError::InvalidGrid { half_width, half_height } => {
                write!(f, "invalid grid half extents {half_width}x{half_height}")
            }
            WorldError::ZeroSpeed => f.write_str("speed must be at least 1 cell per tick"),
            WorldError::GridTooSmall { needed, available } => {
                write!(f, "grid has {available} cells but {needed} distinct houses and hospital are needed")
            }
            WorldError::NotTravelling(id) => write!(f, "agent {id} is not a travelling mobile agent"),
        }
    }
}

/// One elderly agent's household: the members of its level-1 circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Household {
    pub elder: AgentId,
    pub devices: Vec<AgentId>,
    pub coordinator: AgentId,
    pub house: Position,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Roster {
    pub households: Vec<Household>,
    pub l2_coordinator: Option<AgentId>,
    pub l3_coordinator: Option<AgentId>,
    pub professional_carers: Vec<AgentId>,
    pub mobility_agents: Vec<AgentId>,
    pub informal_carers: Vec<AgentId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub grid: Grid,
    pub speed: u32,
    pub hospital: Position,
    pub agents: Vec<AgentState>,
    pub roster: Roster,
}

impl World {
    pub fn agent(&self, id: AgentId) -> &AgentState {
        &self.agents[id.index()]
    }

    pub fn agent_mut(&mut self, id: AgentId) -> &mut AgentState {
        &mut self.agents[id.index()]
    }

    pub fn travel_time(&self, a: Position, b: Position) -> u32 {
        travel_time(a, b, self.speed)
    }
}

/// Ticks to cover the Chebyshev distance between `a` and `b`, rounded up.
pub fn travel_time(a: Position, b: Position, speed: u32) -> u32 {
    debug_assert!(speed >= 1);
    a.chebyshev(b).div_ceil(speed)
}

/// Builds the initial roster.
///
/// House and hospital cells are drawn from `config.placement_seed` alone, so
/// every run of an experiment shares one layout. Informal carers start at
/// uniform cells drawn from `rng`.
///
/// Agent ids are dense and assigned in this order: for every household the
/// elder, its devices and its level-1 coordinator; then the level-2 and
/// level-3 coordinators; then PCs, MAs and ICs.
pub fn place_agents<R: Rng + ?Sized>(
    config: &WorldConfig,
    deployment: &Deployment,
    rng: &mut R,
) -> Result<World, WorldError> {
    if config.half_width < 0 || config.half_height < 0 {
        return Err(WorldError::InvalidGrid { half_width: config.half_width, half_height: config.half_height });
    }
    if config.speed == 0 {
        return Err(WorldError::ZeroSpeed);
    }
    let grid = config.grid();
    let needed = config.n_ea as usize + 1;
    let available = grid.cell_count();
    if needed > available {
        return Err(WorldError::GridTooSmall { needed, available });
    }

    let mut placement = ChaCha8Rng::seed_from_u64(config.placement_seed);
    let cells = index::sample(&mut placement, available, needed);
    let mut cells = cells.iter().map(|i| grid.cell(i));
    let houses: Vec<Position> = cells.by_ref().take(config.n_ea as usize).collect();
    let hospital = cells.next().expect("hospital cell sampled");

    let mut agents = Vec::new();
    let mut roster = Roster::default();
    let push = |agents: &mut Vec<AgentState>, kind, pos, base, status| {
        let id = AgentId(agents.len() as u32);
        agents.push(AgentState::new(id, kind, pos, base, status));
        id
    };

    for &house in &houses {
        let elder = push(&mut agents, AgentKind::ElderlyAgent, house, Some(house), AgentStatus::Idle);
        let devices = (0..deployment.detectors.count())
            .map(|_| {
                let id = push(&mut agents, AgentKind::DeviceAgent, house, Some(house), AgentStatus::Idle);
                agents[id.index()].sensor = Some(deployment.sensor);
                id
            })
            .collect();
        let coordinator = push(&mut agents, AgentKind::CommunityAgent, house, Some(house), AgentStatus::Idle);
        roster.households.push(Household { elder, devices, coordinator, house });
    }
    roster.l2_coordinator =
        Some(push(&mut agents, AgentKind::CommunityAgent, hospital, Some(hospital), AgentStatus::Idle));
    roster.l3_coordinator =
        Some(push(&mut agents, AgentKind::CommunityAgent, hospital, Some(hospital), AgentStatus::Idle));
    for _ in 0..config.n_pc {
        let id = push(&mut agents, AgentKind::ProfessionalCarer, hospital, Some(hospital), AgentStatus::Idle);
        roster.professional_carers.push(id);
    }
    for _ in 0..config.n_ma {
        let id = push(&mut agents, AgentKind::MobilityAgent, hospital, Some(hospital), AgentStatus::Idle);
        roster.mobility_agents.push(id);
    }
    for _ in 0..deployment.n_ic {
        let pos = Position::new(
            rng.random_range(-grid.half_width..=grid.half_width),
            rng.random_range(-grid.half_height..=grid.half_height),
        );
        let id = push(&mut agents, AgentKind::InformalCarer, pos, None, AgentStatus::RandomWalking);
        roster.informal_carers.push(id);
    }

    Ok(World { grid, speed: config.speed, hospital, agents, roster })
}

/// Moves a travelling agent up to `speed` king moves toward `target`.
///
/// On reaching the target an enrolled agent becomes `AtScene` and a
/// returning agent becomes `Idle`. An agent already on the target only
/// changes status. Returns whether the target was reached.
pub fn step_toward(agent: &mut AgentState, target: Position, speed: u32) -> Result<bool, WorldError> {
    if !agent.kind.is_mobile()
        || !matches!(agent.status, AgentStatus::EnrolledTraveling { .. } | AgentStatus::ReturningToBase)
    {
        return Err(WorldError::NotTravelling(agent.id));
    }
    for _ in 0..speed {
        if agent.position == target {
            break;
        }
        agent.position.x += (target.x - agent.position.x).signum();
        agent.position.y += (target.y - agent.position.y).signum();
    }
    if agent.position != target {
        return Ok(false);
    }
    agent.status = match agent.status {
        AgentStatus::EnrolledTraveling { protocol, .. } => AgentStatus::AtScene(protocol),
        _ => AgentStatus::Idle,
    };
    Ok(true)
}

/// Moves a random-walking agent to a uniformly chosen in-bounds neighbour.
pub fn random_walk_step<R: Rng + ?Sized>(agent: &mut AgentState, grid: &Grid, rng: &mut R) {
    debug_assert_eq!(agent.status, AgentStatus::RandomWalking);
    let (cells, n) = grid.neighbours(agent.position);
    if n > 0 {
        agent.position = cells[rng.random_range(0..n)];
    }
}
