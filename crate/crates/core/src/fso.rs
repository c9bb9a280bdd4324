//! The FSO canon: circles, coordinators, readied protocols, role-flow
//! enrollment, role exceptions and cancellation.
//!
//! Three concentric circles are built from the roster:
//!
//! ```text
//! L3  coordinator L3-CA   members: L2-CA, PCs, MAs
//!  └ L2  coordinator L2-CA   members: every L1-CA, ICs
//!     └ L1  coordinator L1-CA   members: one EA and its DA(s)   (one per household)
//! ```
//!
//! A "fall detected" notification at L1 readies p1 (PC + MA dispatch) and,
//! when informal carers exist, p2 (verification by an IC). A readied
//! protocol tries to fill its roles in the circle it sits in. A role nobody
//! in the circle can ever play raises a role exception that climbs to the
//! parent circle within the same tick. A role whose players are all busy
//! keeps the instance readied in place; it is retried every tick in FIFO
//! order. An IC that exposes a phantom fires the FP event at L2, readying p3,
//! whose L3-CA role forces an exception up to L3; there the exception readies
//! p4, which cancels the case's p1.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::case::{CaseCost, CaseId, CaseRecord, GroundTruth, Responder, TerminalKind};
use crate::trace::{TraceEvent, TraceRecord, Tracer};
use crate::world::{random_walk_step, step_toward, AgentId, AgentKind, AgentStatus, Engagement, World};
use crate::Tick;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InstanceId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CircleId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    L1 = 1,
    L2 = 2,
    L3 = 3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub id: CircleId,
    pub level: Level,
    pub coordinator: AgentId,
    /// Child circles appear through their coordinator.
    pub members: Vec<AgentId>,
    pub parent: Option<CircleId>,
}

impl Circle {
    /// Coordinator first, then members in id order.
    fn participants(&self) -> impl Iterator<Item = AgentId> + '_ {
        core::iter::once(self.coordinator).chain(self.members.iter().copied())
    }

    pub fn contains(&self, id: AgentId) -> bool {
        self.coordinator == id || self.members.contains(&id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    NeedPC,
    NeedMA,
    NeedIC,
    NeedL3CA,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProtocolKind {
    /// Care dispatch: a PC leaves the hospital with an MA.
    P1,
    /// Verification by an informal carer.
    P2,
    /// Forwards a confirmed false positive to L3.
    P3,
    /// Role-free cancellation of p1.
    P4,
}

impl ProtocolKind {
    pub fn required_roles(self) -> &'static [Role] {
        match self {
            ProtocolKind::P1 => &[Role::NeedPC, Role::NeedMA],
            ProtocolKind::P2 => &[Role::NeedIC],
            ProtocolKind::P3 => &[Role::NeedL3CA],
            ProtocolKind::P4 => &[],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProtocolState {
    Readied,
    Escalating(Level),
    Running,
    Completed,
    Canceled,
}

impl ProtocolState {
    pub fn is_terminal(self) -> bool {
        matches!(self, ProtocolState::Completed | ProtocolState::Canceled)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolInstance {
    pub id: InstanceId,
    pub kind: ProtocolKind,
    pub case: CaseId,
    pub origin: CircleId,
    /// Circle currently trying to fill the roles.
    pub circle: CircleId,
    pub state: ProtocolState,
    /// Agents in `required_roles` order; the transient overlay network.
    pub enrolled: Vec<AgentId>,
    pub readied_at: Tick,
    /// Level at which the instance started running.
    pub running_level: Option<Level>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FsoEventKind {
    FallDetected,
    FalsePositiveConfirmed,
    RoleException { missing: Vec<Role>, instance: InstanceId },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsoEvent {
    pub kind: FsoEventKind,
    pub source: AgentId,
    pub case: CaseId,
    pub tick: Tick,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Enrollment {
    Enrolled(Vec<AgentId>),
    RoleException(Vec<Role>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FsoError {
    UnknownCase(CaseId),
    /// The event's source does not belong to the notified circle.
    NotAMember {
        circle: CircleId,
        agent: AgentId,
    },
    /// The event kind is not handled at the notified circle's level.
    Misrouted {
        circle: CircleId,
    },
    /// Escalation from a circle without parent.
    NoParent(CircleId),
}

impl fmt::Display for FsoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FsoError::UnknownCase(c) => write!(f, "unknown {c}"),
            FsoError::NotAMember { circle, agent } => {
                write!(f, "agent {agent} is not a member of circle {}", circle.0)
            }
            FsoError::Misrouted { circle } => write!(f, "event not handled at circle {}", circle.0),
            FsoError::NoParent(c) => write!(f, "circle {} has no parent", c.0),
        }
    }
}

/// Invariant breach found by [`Engine::audit`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation(pub &'static str, pub u32);

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (id {})", self.0, self.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Tallies {
    pub v_ic: u64,
    pub v_ma: u64,
    pub i_ma: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct CaseProtocols {
    p1: Option<InstanceId>,
    p2: Option<InstanceId>,
}

/// Deterministic FSO state machine for one run.
#[derive(Debug, Clone)]
pub struct Engine {
    circles: Vec<Circle>,
    /// Household circle of each elder.
    household: BTreeMap<AgentId, CircleId>,
    l2: CircleId,
    l3: CircleId,
    l3_coordinator: AgentId,
    verification: bool,
    count_return_travel: bool,
    instances: Vec<ProtocolInstance>,
    /// Readied instances waiting for busy agents, oldest first.
    waiting: Vec<InstanceId>,
    cases: Vec<CaseRecord>,
    by_case: Vec<CaseProtocols>,
    tallies: Tallies,
    pub(crate) tracer: Tracer,
}

impl Engine {
    /// Builds the three-level FSO over `world`. p2 is readied only when the
    /// world has informal carers.
    pub fn new(world: &World, count_return_travel: bool) -> Self {
        let roster = &world.roster;
        let l2_ca = roster.l2_coordinator.expect("roster has an L2 coordinator");
        let l3_ca = roster.l3_coordinator.expect("roster has an L3 coordinator");
        let l3 = CircleId(0);
        let l2 = CircleId(1);
        let mut circles = vec![
            Circle {
                id: l3,
                level: Level::L3,
                coordinator: l3_ca,
                members: core::iter::once(l2_ca)
                    .chain(roster.professional_carers.iter().copied())
                    .chain(roster.mobility_agents.iter().copied())
                    .collect(),
                parent: None,
            },
            Circle {
                id: l2,
                level: Level::L2,
                coordinator: l2_ca,
                members: roster
                    .households
                    .iter()
                    .map(|h| h.coordinator)
                    .chain(roster.informal_carers.iter().copied())
                    .collect(),
                parent: Some(l3),
            },
        ];
        let mut household = BTreeMap::new();
        for h in &roster.households {
            let id = CircleId(circles.len() as u32);
            let mut members = vec![h.elder];
            members.extend(h.devices.iter().copied());
            circles.push(Circle { id, level: Level::L1, coordinator: h.coordinator, members, parent: Some(l2) });
            household.insert(h.elder, id);
        }
        Engine {
            circles,
            household,
            l2,
            l3,
            l3_coordinator: l3_ca,
            verification: !roster.informal_carers.is_empty(),
            count_return_travel,
            instances: Vec::new(),
            waiting: Vec::new(),
            cases: Vec::new(),
            by_case: Vec::new(),
            tallies: Tallies::default(),
            tracer: Tracer::default(),
        }
    }

    pub fn circles(&self) -> &[Circle] {
        &self.circles
    }

    pub fn circle(&self, id: CircleId) -> &Circle {
        &self.circles[id.0 as usize]
    }

    pub fn household_circle(&self, elder: AgentId) -> Option<CircleId> {
        self.household.get(&elder).copied()
    }

    pub fn l2(&self) -> CircleId {
        self.l2
    }

    pub fn l3(&self) -> CircleId {
        self.l3
    }

    pub fn instances(&self) -> &[ProtocolInstance] {
        &self.instances
    }

    pub fn instance(&self, id: InstanceId) -> &ProtocolInstance {
        &self.instances[id.0 as usize]
    }

    pub fn cases(&self) -> &[CaseRecord] {
        &self.cases
    }

    pub fn case(&self, id: CaseId) -> Option<&CaseRecord> {
        self.cases.get(id.index())
    }

    pub fn tallies(&self) -> Tallies {
        self.tallies
    }

    pub fn waiting(&self) -> &[InstanceId] {
        &self.waiting
    }

    pub fn p1_of(&self, case: CaseId) -> Option<InstanceId> {
        self.by_case.get(case.index()).and_then(|c| c.p1)
    }

    pub fn p2_of(&self, case: CaseId) -> Option<InstanceId> {
        self.by_case.get(case.index()).and_then(|c| c.p2)
    }

    pub fn enable_trace(&mut self) {
        self.tracer = Tracer::enabled();
    }

    pub fn take_trace(&mut self) -> Option<Vec<TraceRecord>> {
        self.tracer.take()
    }

    pub(crate) fn emit(&mut self, tick: Tick, case: Option<CaseId>, event: TraceEvent, agents: &[AgentId]) {
        self.tracer.emit(tick, case, event, agents);
    }

    /// Opens a case for `elder` and marks the elder as having a pending alarm.
    pub fn open_case(&mut self, world: &mut World, elder: AgentId, truth: GroundTruth, tick: Tick) -> CaseId {
        let id = CaseId(self.cases.len() as u32);
        self.cases.push(CaseRecord::new(id, elder, truth, tick));
        self.by_case.push(CaseProtocols::default());
        world.agent_mut(elder).pending_alarm = Some(id);
        id
    }

    fn target_of(&self, world: &World, case: CaseId) -> crate::world::Position {
        world.agent(self.cases[case.index()].elder).position
    }

    /// Delivers `event` to the coordinator of `circle` and readies whatever
    /// protocols the event calls for. Each readied instance is immediately
    /// offered for enrollment (and escalated as needed).
    pub fn notify(
        &mut self,
        circle: CircleId,
        event: FsoEvent,
        world: &mut World,
        tick: Tick,
    ) -> Result<Vec<InstanceId>, FsoError> {
        if event.case.index() >= self.cases.len() {
            return Err(FsoError::UnknownCase(event.case));
        }
        let level = self.circle(circle).level;
        let mut readied = Vec::new();
        match &event.kind {
            FsoEventKind::FallDetected => {
                if level != Level::L1 {
                    return Err(FsoError::Misrouted { circle });
                }
                if !self.circle(circle).contains(event.source) {
                    return Err(FsoError::NotAMember { circle, agent: event.source });
                }
                let p1 = self.ready(ProtocolKind::P1, event.case, circle, tick);
                self.by_case[event.case.index()].p1 = Some(p1);
                readied.push(p1);
                if self.verification {
                    let p2 = self.ready(ProtocolKind::P2, event.case, circle, tick);
                    self.by_case[event.case.index()].p2 = Some(p2);
                    readied.push(p2);
                }
            }
            FsoEventKind::FalsePositiveConfirmed => {
                if level != Level::L2 {
                    return Err(FsoError::Misrouted { circle });
                }
                if !self.circle(circle).contains(event.source) {
                    return Err(FsoError::NotAMember { circle, agent: event.source });
                }
                readied.push(self.ready(ProtocolKind::P3, event.case, circle, tick));
            }
            FsoEventKind::RoleException { instance, .. } => {
                let instance = *instance;
                let carried = self.instance(instance);
                if carried.state.is_terminal() {
                    return Ok(readied);
                }
                if carried.kind == ProtocolKind::P3 && level == Level::L3 {
                    // The forwarded FP event reached its consignee.
                    readied.push(self.ready(ProtocolKind::P4, event.case, circle, tick));
                }
                self.instances[instance.0 as usize].state = ProtocolState::Escalating(level);
                self.instances[instance.0 as usize].circle = circle;
                self.launch(instance, world, tick);
            }
        }
        for &id in &readied {
            self.launch(id, world, tick);
        }
        Ok(readied)
    }

    fn ready(&mut self, kind: ProtocolKind, case: CaseId, circle: CircleId, tick: Tick) -> InstanceId {
        let id = InstanceId(self.instances.len() as u32);
        self.instances.push(ProtocolInstance {
            id,
            kind,
            case,
            origin: circle,
            circle,
            state: ProtocolState::Readied,
            enrolled: Vec::new(),
            readied_at: tick,
            running_level: None,
        });
        let level = self.circle(circle).level;
        self.emit(tick, Some(case), TraceEvent::Readied { protocol: kind, instance: id, level }, &[]);
        id
    }

    fn qualifies(&self, role: Role, world: &World, agent: AgentId) -> bool {
        match role {
            Role::NeedPC => world.agent(agent).kind == AgentKind::ProfessionalCarer,
            Role::NeedMA => world.agent(agent).kind == AgentKind::MobilityAgent,
            Role::NeedIC => world.agent(agent).kind == AgentKind::InformalCarer,
            Role::NeedL3CA => agent == self.l3_coordinator,
        }
    }

    fn available(world: &World, agent: AgentId) -> bool {
        let a = world.agent(agent);
        match a.kind {
            AgentKind::InformalCarer => a.status == AgentStatus::RandomWalking,
            _ => a.status == AgentStatus::Idle && a.base.is_none_or(|b| b == a.position),
        }
    }

    /// Role-flow enrollment of `instance` in `circle`.
    ///
    /// For every required role picks the available qualified participant
    /// nearest (by travel time) to the case's elder, lowest id on ties. Binds
    /// nothing unless every role fills.
    pub fn try_enroll(&self, instance: InstanceId, circle: CircleId, world: &World) -> Enrollment {
        let inst = self.instance(instance);
        let target = self.target_of(world, inst.case);
        let circle = self.circle(circle);
        let mut chosen: Vec<AgentId> = Vec::new();
        let mut missing = Vec::new();
        for &role in inst.kind.required_roles() {
            let best = circle
                .participants()
                .filter(|&a| self.qualifies(role, world, a) && Self::available(world, a) && !chosen.contains(&a))
                .min_by_key(|&a| (world.travel_time(world.agent(a).position, target), a));
            match best {
                Some(a) => chosen.push(a),
                None => missing.push(role),
            }
        }
        if missing.is_empty() {
            Enrollment::Enrolled(chosen)
        } else {
            Enrollment::RoleException(missing)
        }
    }

    /// Whether nobody in `circle` could ever play `role`.
    fn role_absent(&self, role: Role, circle: CircleId, world: &World) -> bool {
        !self.circle(circle).participants().any(|a| self.qualifies(role, world, a))
    }

    /// Tries to start `instance` in its current circle, escalating role
    /// exceptions upward or parking the instance in the retry queue.
    fn launch(&mut self, instance: InstanceId, world: &mut World, tick: Tick) {
        let circle = self.instance(instance).circle;
        match self.try_enroll(instance, circle, world) {
            Enrollment::Enrolled(agents) => {
                self.waiting.retain(|&w| w != instance);
                self.start(instance, agents, world, tick);
            }
            Enrollment::RoleException(missing) => {
                let inst = self.instance(instance);
                let (kind, case) = (inst.kind, inst.case);
                let level = self.circle(circle).level;
                self.emit(
                    tick,
                    Some(case),
                    TraceEvent::RoleException { protocol: kind, instance, level, missing: missing.clone() },
                    &[],
                );
                let absent = missing.iter().any(|&r| self.role_absent(r, circle, world));
                match (absent, self.circle(circle).parent) {
                    (true, Some(_)) => {
                        self.escalate(instance, missing, circle, world, tick).expect("parent exists");
                    }
                    _ => {
                        self.instances[instance.0 as usize].state = ProtocolState::Readied;
                        if !self.waiting.contains(&instance) {
                            self.waiting.push(instance);
                        }
                    }
                }
            }
        }
    }

    /// Forwards a role exception from `from` to its parent circle, where the
    /// carried instance is retried within the same tick. Returns the parent.
    pub fn escalate(
        &mut self,
        instance: InstanceId,
        missing: Vec<Role>,
        from: CircleId,
        world: &mut World,
        tick: Tick,
    ) -> Result<CircleId, FsoError> {
        let parent = self.circle(from).parent.ok_or(FsoError::NoParent(from))?;
        let case = self.instance(instance).case;
        let (from_level, to_level) = (self.circle(from).level, self.circle(parent).level);
        let source = self.circle(from).coordinator;
        self.emit(tick, Some(case), TraceEvent::Escalated { instance, from: from_level, to: to_level }, &[source]);
        let event = FsoEvent { kind: FsoEventKind::RoleException { missing, instance }, source, case, tick };
        self.notify(parent, event, world, tick)?;
        Ok(parent)
    }

    fn start(&mut self, instance: InstanceId, agents: Vec<AgentId>, world: &mut World, tick: Tick) {
        let (kind, case, circle) = {
            let inst = &self.instances[instance.0 as usize];
            (inst.kind, inst.case, inst.circle)
        };
        let level = self.circle(circle).level;
        {
            let inst = &mut self.instances[instance.0 as usize];
            inst.state = ProtocolState::Running;
            inst.running_level = Some(level);
            inst.enrolled = agents.clone();
        }
        self.emit(tick, Some(case), TraceEvent::Enrolled { protocol: kind, instance, level }, &agents);
        match kind {
            ProtocolKind::P1 | ProtocolKind::P2 => {
                let target = self.target_of(world, case);
                for &a in &agents {
                    let agent = world.agent_mut(a);
                    agent.engagement = Some(Engagement { case, since: tick });
                    agent.status = if agent.position == target {
                        AgentStatus::AtScene(instance)
                    } else {
                        AgentStatus::EnrolledTraveling { target, protocol: instance }
                    };
                }
            }
            ProtocolKind::P3 => {
                // Forwarding done once the L3-CA is enrolled.
                self.finish(instance, ProtocolState::Completed, tick);
            }
            ProtocolKind::P4 => {
                if let Some(p1) = self.p1_of(case) {
                    self.cancel_protocol(p1, world, tick);
                }
                self.finish(instance, ProtocolState::Completed, tick);
                self.close_case(world, case, TerminalKind::CanceledByP4, tick);
            }
        }
    }

    fn finish(&mut self, instance: InstanceId, state: ProtocolState, tick: Tick) {
        let inst = &mut self.instances[instance.0 as usize];
        inst.state = state;
        let agents = core::mem::take(&mut inst.enrolled);
        let (kind, case) = (inst.kind, inst.case);
        let event = match state {
            ProtocolState::Canceled => TraceEvent::Canceled { protocol: kind, instance },
            _ => TraceEvent::Completed { protocol: kind, instance },
        };
        self.waiting.retain(|&w| w != instance);
        self.emit(tick, Some(case), event, &agents);
    }

    fn book(&mut self, world: &mut World, agent: AgentId, tick: Tick) {
        let a = world.agent_mut(agent);
        let Some(eng) = a.engagement.take() else { return };
        let ticks = tick - eng.since;
        let kind = a.kind;
        let cost = &mut self.cases[eng.case.index()].cost;
        match kind {
            AgentKind::MobilityAgent => cost.mobility += ticks,
            AgentKind::ProfessionalCarer => cost.professional += ticks,
            AgentKind::InformalCarer => cost.informal += ticks,
            _ => return,
        }
        self.emit(tick, Some(eng.case), TraceEvent::CostBooked { kind, ticks }, &[agent]);
    }

    /// Sends a PC/MA home; books its cost now unless return travel counts.
    fn release_to_base(&mut self, world: &mut World, agent: AgentId, tick: Tick) {
        let a = world.agent_mut(agent);
        if a.base == Some(a.position) {
            a.status = AgentStatus::Idle;
            self.book(world, agent, tick);
            return;
        }
        a.status = AgentStatus::ReturningToBase;
        if !self.count_return_travel {
            self.book(world, agent, tick);
        }
    }

    fn release_to_walk(&mut self, world: &mut World, agent: AgentId, tick: Tick) {
        world.agent_mut(agent).status = AgentStatus::RandomWalking;
        self.book(world, agent, tick);
    }

    /// Aborts a non-terminal instance and frees its agents: PCs and MAs head
    /// back to base, ICs resume their random walk. No-op on terminal
    /// instances.
    pub fn cancel_protocol(&mut self, instance: InstanceId, world: &mut World, tick: Tick) {
        if self.instance(instance).state.is_terminal() {
            return;
        }
        let agents = self.instance(instance).enrolled.clone();
        self.finish(instance, ProtocolState::Canceled, tick);
        for a in agents {
            match world.agent(a).kind {
                AgentKind::InformalCarer => self.release_to_walk(world, a, tick),
                AgentKind::ProfessionalCarer | AgentKind::MobilityAgent => self.release_to_base(world, a, tick),
                _ => world.agent_mut(a).status = AgentStatus::Idle,
            }
        }
    }

    fn respond(&mut self, case: CaseId, by: Responder, tick: Tick, agents: &[AgentId]) {
        let rec = &mut self.cases[case.index()];
        if rec.responded.is_none() {
            rec.responded = Some((tick, by));
            self.emit(tick, Some(case), TraceEvent::Responded { by }, agents);
        }
    }

    fn close_case(&mut self, world: &mut World, case: CaseId, kind: TerminalKind, tick: Tick) {
        let rec = &mut self.cases[case.index()];
        if rec.terminal.is_some() {
            return;
        }
        rec.terminal = Some((tick, kind));
        let elder = rec.elder;
        world.agent_mut(elder).pending_alarm = None;
        self.emit(tick, Some(case), TraceEvent::CaseClosed { kind }, &[elder]);
    }

    /// Advances one tick: moves every mobile agent, handles on-site arrivals
    /// and retries waiting instances in FIFO order. Returns the FSO events
    /// raised by arrivals.
    pub fn tick_protocols<R: Rng + ?Sized>(&mut self, world: &mut World, rng: &mut R, tick: Tick) -> Vec<FsoEvent> {
        let grid = world.grid;
        let speed = world.speed;
        let mut homecomings = Vec::new();
        for agent in world.agents.iter_mut() {
            match agent.status {
                AgentStatus::RandomWalking => random_walk_step(agent, &grid, rng),
                AgentStatus::ReturningToBase => {
                    let base = agent.base.expect("returning agent has a base");
                    if step_toward(agent, base, speed).expect("mobile agent") {
                        homecomings.push(agent.id);
                    }
                }
                AgentStatus::EnrolledTraveling { target, .. } => {
                    // agents enrolled during this tick leave on the next one
                    if agent.engagement.is_some_and(|e| e.since < tick) {
                        step_toward(agent, target, speed).expect("mobile agent");
                    }
                }
                AgentStatus::Idle | AgentStatus::AtScene(_) => {}
            }
        }
        for a in homecomings {
            self.book(world, a, tick);
        }

        let mut events = self.handle_arrivals(world, tick);
        let queued = self.waiting.clone();
        for id in queued {
            if self.instance(id).state == ProtocolState::Readied {
                self.launch(id, world, tick);
            }
        }
        events.extend(self.handle_arrivals(world, tick));
        events
    }

    fn handle_arrivals(&mut self, world: &mut World, tick: Tick) -> Vec<FsoEvent> {
        let mut arrived: Vec<(u8, InstanceId)> = world
            .agents
            .iter()
            .filter_map(|a| match a.status {
                AgentStatus::AtScene(p) => Some(p),
                _ => None,
            })
            .map(|p| {
                // same-tick ties: the IC verifies before the ambulance arrives
                let order = if self.instance(p).kind == ProtocolKind::P2 { 0 } else { 1 };
                (order, p)
            })
            .collect();
        arrived.sort_unstable();
        arrived.dedup();

        let mut events = Vec::new();
        for (_, id) in arrived {
            let inst = self.instance(id);
            if inst.state != ProtocolState::Running {
                continue;
            }
            let all_there =
                inst.enrolled.iter().all(|&a| matches!(world.agent(a).status, AgentStatus::AtScene(p) if p == id));
            if !all_there {
                continue;
            }
            match inst.kind {
                ProtocolKind::P2 => events.extend(self.verify_by_carer(id, world, tick)),
                ProtocolKind::P1 => self.serve(id, world, tick),
                _ => {}
            }
        }
        events
    }

    /// An informal carer reached the elder: V(IC).
    fn verify_by_carer(&mut self, id: InstanceId, world: &mut World, tick: Tick) -> Option<FsoEvent> {
        let inst = self.instance(id);
        let case = inst.case;
        let carer = inst.enrolled[0];
        let truth = self.cases[case.index()].truth;
        self.tallies.v_ic += 1;
        self.emit(tick, Some(case), TraceEvent::Verified { by: Responder::InformalCarer, truth }, &[carer]);
        self.respond(case, Responder::InformalCarer, tick, &[carer]);
        self.finish(id, ProtocolState::Completed, tick);
        self.release_to_walk(world, carer, tick);
        match truth {
            // confirmation only: p1 carries on unchanged
            GroundTruth::TrueFall => None,
            GroundTruth::Phantom => {
                self.emit(tick, Some(case), TraceEvent::FalsePositiveConfirmed, &[carer]);
                let event = FsoEvent { kind: FsoEventKind::FalsePositiveConfirmed, source: carer, case, tick };
                self.notify(self.l2, event.clone(), world, tick).expect("IC belongs to L2");
                Some(event)
            }
        }
    }

    /// PC and MA reached the elder: intervention on a true fall, V(MA) on a
    /// phantom. Completes p1 and cancels a still-pending p2.
    fn serve(&mut self, id: InstanceId, world: &mut World, tick: Tick) {
        let inst = self.instance(id);
        let case = inst.case;
        let crew = inst.enrolled.clone();
        let truth = self.cases[case.index()].truth;
        match truth {
            GroundTruth::TrueFall => {
                self.tallies.i_ma += 1;
                self.emit(tick, Some(case), TraceEvent::Intervention, &crew);
            }
            GroundTruth::Phantom => {
                self.tallies.v_ma += 1;
                self.emit(tick, Some(case), TraceEvent::Verified { by: Responder::Ambulance, truth }, &crew);
            }
        }
        self.respond(case, Responder::Ambulance, tick, &crew);
        self.finish(id, ProtocolState::Completed, tick);
        if let Some(p2) = self.p2_of(case) {
            self.cancel_protocol(p2, world, tick);
        }
        for a in crew {
            self.release_to_base(world, a, tick);
        }
        self.close_case(world, case, TerminalKind::Served, tick);
    }

    /// Ends the run at `final_tick`: open cases are closed, live instances
    /// canceled and every outstanding engagement booked.
    pub fn finalize(&mut self, world: &mut World, final_tick: Tick) {
        for i in 0..self.instances.len() {
            self.cancel_protocol(InstanceId(i as u32), world, final_tick);
        }
        for i in 0..self.cases.len() {
            self.close_case(world, CaseId(i as u32), TerminalKind::ClosedAtRunEnd, final_tick);
        }
        for i in 0..world.agents.len() {
            self.book(world, AgentId(i as u32), final_tick);
        }
    }

    pub fn total_cost(&self) -> CaseCost {
        self.cases.iter().fold(CaseCost::default(), |acc, c| CaseCost {
            mobility: acc.mobility + c.cost.mobility,
            professional: acc.professional + c.cost.professional,
            informal: acc.informal + c.cost.informal,
        })
    }

    /// Checks the structural invariants of the engine against `world`.
    pub fn audit(&self, world: &World) -> Result<(), Violation> {
        let mut bound: BTreeMap<AgentId, InstanceId> = BTreeMap::new();
        let mut live_p1: BTreeMap<CaseId, u32> = BTreeMap::new();
        let mut live_p2: BTreeMap<CaseId, u32> = BTreeMap::new();
        for inst in &self.instances {
            if inst.state.is_terminal() {
                if !inst.enrolled.is_empty() {
                    return Err(Violation("terminal instance still holds agents", inst.id.0));
                }
                continue;
            }
            match inst.kind {
                ProtocolKind::P1 => *live_p1.entry(inst.case).or_default() += 1,
                ProtocolKind::P2 => *live_p2.entry(inst.case).or_default() += 1,
                _ => {}
            }
            if inst.state == ProtocolState::Running {
                let roles = inst.kind.required_roles();
                if roles.len() != inst.enrolled.len() {
                    return Err(Violation("running instance with unfilled roles", inst.id.0));
                }
                for (&role, &a) in roles.iter().zip(&inst.enrolled) {
                    if !self.qualifies(role, world, a) {
                        return Err(Violation("enrolled agent does not qualify for its role", a.0));
                    }
                    if bound.insert(a, inst.id).is_some() {
                        return Err(Violation("agent enrolled in two live instances", a.0));
                    }
                }
                let expected = match inst.kind {
                    ProtocolKind::P1 => Some(Level::L3),
                    ProtocolKind::P2 => Some(Level::L2),
                    _ => None,
                };
                if expected.is_some() && inst.running_level != expected {
                    return Err(Violation("protocol running at the wrong level", inst.id.0));
                }
            } else if !inst.enrolled.is_empty() {
                return Err(Violation("readied instance holds agents", inst.id.0));
            }
        }
        if live_p1.values().chain(live_p2.values()).any(|&n| n > 1) {
            return Err(Violation("more than one live p1/p2 for a case", 0));
        }
        for a in &world.agents {
            if !world.grid.contains(a.position) {
                return Err(Violation("agent out of bounds", a.id.0));
            }
            if matches!(a.kind, AgentKind::ElderlyAgent | AgentKind::DeviceAgent) && a.base != Some(a.position) {
                return Err(Violation("EA or DA left its house", a.id.0));
            }
            match a.bound_protocol() {
                Some(p) if bound.get(&a.id) != Some(&p) => {
                    return Err(Violation("agent bound to a non-live instance", a.id.0));
                }
                None if bound.contains_key(&a.id) => {
                    return Err(Violation("enrolled agent not travelling or on scene", a.id.0));
                }
                _ => {}
            }
            if a.kind == AgentKind::ElderlyAgent {
                let open = self.cases.iter().find(|c| c.elder == a.id && c.is_open()).map(|c| c.id);
                if open != a.pending_alarm {
                    return Err(Violation("pending alarm does not match open case", a.id.0));
                }
            }
        }
        Ok(())
    }
}
