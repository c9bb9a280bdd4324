//! Alarm case records.

use core::fmt;

use serde::{Deserialize, Serialize};

use crate::world::AgentId;
use crate::Tick;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CaseId(pub u32);

impl CaseId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "case {}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroundTruth {
    TrueFall,
    Phantom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminalKind {
    /// PC and MA reached the elder (intervention or on-site verification).
    Served,
    /// An informal carer exposed a phantom and p4 canceled the dispatch.
    CanceledByP4,
    /// Still open when the run ended.
    ClosedAtRunEnd,
}

/// Who performed the first on-site check of a case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Responder {
    InformalCarer,
    Ambulance,
}

/// Ticks spent on one case, per responding agent kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CaseCost {
    pub mobility: u64,
    pub professional: u64,
    pub informal: u64,
}

impl CaseCost {
    pub fn total(&self) -> u64 {
        self.mobility + self.professional + self.informal
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub id: CaseId,
    pub elder: AgentId,
    pub truth: GroundTruth,
    pub raised: Tick,
    /// First on-site check: IC verification or PC/MA arrival.
    pub responded: Option<(Tick, Responder)>,
    pub terminal: Option<(Tick, TerminalKind)>,
    pub cost: CaseCost,
}

impl CaseRecord {
    pub fn new(id: CaseId, elder: AgentId, truth: GroundTruth, raised: Tick) -> Self {
        CaseRecord { id, elder, truth, raised, responded: None, terminal: None, cost: CaseCost::default() }
    }

    pub fn is_open(&self) -> bool {
        self.terminal.is_none()
    }

    /// Ticks from the alarm until the elder was first reached (by an informal
    /// carer or the ambulance), the case was canceled, or `final_tick`.
    pub fn waiting_time(&self, final_tick: Tick) -> u64 {
        let end = match (self.responded, self.terminal) {
            (Some((t, _)), _) => t,
            (None, Some((t, _))) => t,
            (None, None) => final_tick,
        };
        end - self.raised
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn waiting_time_cases() {
        let mut c = CaseRecord::new(CaseId(0), AgentId(0), GroundTruth::TrueFall, 10);
        assert_eq!(c.waiting_time(10), 0);
        assert_eq!(c.waiting_time(25), 15);
        c.responded = Some((14, Responder::InformalCarer));
        c.terminal = Some((30, TerminalKind::Served));
        assert_eq!(c.waiting_time(100), 4);
        c.responded = None;
        assert_eq!(c.waiting_time(100), 20);
    }
}
