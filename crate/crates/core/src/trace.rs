//! Structured per-event trace.
//!
//! When tracing is on, the simulation appends one [`TraceRecord`] per event.
//! The run's counters and ledger are a pure fold over the trace, see
//! [`replay`].

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::case::{CaseCost, CaseId, GroundTruth, Responder, TerminalKind};
use crate::fso::{InstanceId, Level, ProtocolKind, Role};
use crate::metrics::{ConfusionCounters, CostLedger};
use crate::world::{AgentId, AgentKind};
use crate::Tick;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    /// Detector outcomes of one tick that did not raise an alarm.
    Quiet {
        true_negatives: u32,
        false_negatives: u32,
    },
    AlarmRaised {
        truth: GroundTruth,
    },
    Readied {
        protocol: ProtocolKind,
        instance: InstanceId,
        level: Level,
    },
    RoleException {
        protocol: ProtocolKind,
        instance: InstanceId,
        level: Level,
        missing: Vec<Role>,
    },
    Escalated {
        instance: InstanceId,
        from: Level,
        to: Level,
    },
    Enrolled {
        protocol: ProtocolKind,
        instance: InstanceId,
        level: Level,
    },
    Verified {
        by: Responder,
        truth: GroundTruth,
    },
    Intervention,
    FalsePositiveConfirmed,
    Responded {
        by: Responder,
    },
    Completed {
        protocol: ProtocolKind,
        instance: InstanceId,
    },
    Canceled {
        protocol: ProtocolKind,
        instance: InstanceId,
    },
    CostBooked {
        kind: AgentKind,
        ticks: u64,
    },
    CaseClosed {
        kind: TerminalKind,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub tick: Tick,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub case: Option<CaseId>,
    #[serde(flatten)]
    pub event: TraceEvent,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub agents: Vec<AgentId>,
}

/// Optional in-memory trace sink.
#[derive(Debug, Clone, Default)]
pub struct Tracer(Option<Vec<TraceRecord>>);

impl Tracer {
    pub fn enabled() -> Self {
        Tracer(Some(Vec::new()))
    }

    pub fn is_enabled(&self) -> bool {
        self.0.is_some()
    }

    #[inline]
    pub fn emit(&mut self, tick: Tick, case: Option<CaseId>, event: TraceEvent, agents: &[AgentId]) {
        if let Some(records) = &mut self.0 {
            records.push(TraceRecord { tick, case, event, agents: agents.to_vec() });
        }
    }

    pub fn take(&mut self) -> Option<Vec<TraceRecord>> {
        self.0.take()
    }
}

/// Rebuilds confusion counters and the cost ledger from a trace alone.
pub fn replay(records: &[TraceRecord]) -> (ConfusionCounters, CostLedger) {
    let mut counters = ConfusionCounters::default();
    let mut ledger = CostLedger::default();
    let mut raised: BTreeMap<CaseId, Tick> = BTreeMap::new();
    let mut responded: BTreeMap<CaseId, Tick> = BTreeMap::new();
    let mut sc = CaseCost::default();

    for r in records {
        match &r.event {
            TraceEvent::Quiet { true_negatives, false_negatives } => {
                counters.tn += u64::from(*true_negatives);
                counters.fn_ += u64::from(*false_negatives);
            }
            TraceEvent::AlarmRaised { truth } => {
                match truth {
                    GroundTruth::TrueFall => counters.tp += 1,
                    GroundTruth::Phantom => counters.fp += 1,
                }
                ledger.treated_cases += 1;
                if let Some(case) = r.case {
                    raised.insert(case, r.tick);
                }
            }
            TraceEvent::Responded { .. } => {
                if let Some(case) = r.case {
                    responded.entry(case).or_insert(r.tick);
                }
            }
            TraceEvent::CaseClosed { .. } => {
                if let Some(case) = r.case {
                    let end = responded.get(&case).copied().unwrap_or(r.tick);
                    ledger.sum_wt += end - raised[&case];
                }
            }
            TraceEvent::Verified { by: Responder::InformalCarer, .. } => ledger.v_ic += 1,
            TraceEvent::Verified { by: Responder::Ambulance, .. } => ledger.v_ma += 1,
            TraceEvent::Intervention => ledger.i_ma += 1,
            TraceEvent::CostBooked { kind, ticks } => match kind {
                AgentKind::MobilityAgent => sc.mobility += ticks,
                AgentKind::ProfessionalCarer => sc.professional += ticks,
                AgentKind::InformalCarer => sc.informal += ticks,
                _ => {}
            },
            _ => {}
        }
    }
    ledger.social_cost = sc;
    (counters, ledger)
}
