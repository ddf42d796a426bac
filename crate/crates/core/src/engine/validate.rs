//! Conformance checking of formation traces against the step dependency
//! graph and the per-scenario presence rules.

use std::fmt;

use serde::Serialize;

use super::trace::{FormationTrace, Outcome, StepId};
use crate::nsmf::DeploymentScenario;

/// Dependency edges between formation steps. Step 6 is optional.
pub const STEP_EDGES: [(u8, u8); 18] = [
    (0, 1),
    (1, 2),
    (1, 3),
    (2, 4),
    (3, 5),
    (4, 5),
    (3, 6),
    (4, 6),
    (5, 7),
    (6, 7),
    (7, 8),
    (8, 9),
    (9, 10),
    (10, 11),
    (11, 12),
    (12, 13),
    (13, 14),
    (14, 15),
];

/// Steps every served trace must contain.
pub const SERVED_STEPS: [u8; 15] = [0, 1, 2, 3, 4, 5, 7, 8, 9, 10, 11, 12, 13, 14, 15];

/// Transitive closure of [`STEP_EDGES`].
#[derive(Clone, Debug)]
pub struct StepDependencyGraph {
    reach: [[bool; 16]; 16],
}

impl Default for StepDependencyGraph {
    fn default() -> Self {
        Self::new()
    }
}

impl StepDependencyGraph {
    pub fn new() -> Self {
        let mut reach = [[false; 16]; 16];
        for (a, b) in STEP_EDGES {
            reach[a as usize][b as usize] = true;
        }
        for k in 0..16 {
            for i in 0..16 {
                for j in 0..16 {
                    if reach[i][k] && reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
        Self { reach }
    }

    /// True when every `before` event must precede every `after` event.
    pub fn must_precede(&self, before: StepId, after: StepId) -> bool {
        self.reach[before.get() as usize][after.get() as usize]
    }

    pub fn is_acyclic(&self) -> bool {
        (0..16).all(|i| !self.reach[i][i])
    }

    /// A topological order of all sixteen steps.
    pub fn topological_order(&self) -> Vec<StepId> {
        let mut order: Vec<StepId> = StepId::all().collect();
        order.sort_by_key(|s| (0..16).filter(|&p| self.reach[p][s.get() as usize]).count());
        order
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ViolationKind {
    /// Sequence numbers count events from zero without gaps.
    SeqGap {
        expected: u64,
        found: u64,
    },
    TickDecreased,
    /// Ticks must stay put within a step and advance by one on each step change.
    TickAdvance {
        expected: u64,
        found: u64,
    },
    RequestMismatch,
    DependencyBroken {
        before: StepId,
        after: StepId,
    },
    MissingStep {
        step: StepId,
    },
    ForbiddenStep {
        step: StepId,
    },
    StepAfterRejection {
        step: StepId,
    },
    ApprovalMissing,
    VerdictMismatch,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub event_index: Option<usize>,
    #[serde(flatten)]
    pub kind: ViolationKind,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::SeqGap { expected, found } => write!(f, "seq_no {found}, expected {expected}"),
            ViolationKind::TickDecreased => f.write_str("tick decreases"),
            ViolationKind::TickAdvance { expected, found } => write!(f, "tick {found}, expected {expected}"),
            ViolationKind::RequestMismatch => f.write_str("event belongs to another request"),
            ViolationKind::DependencyBroken { before, after } => {
                write!(f, "step {before} appears after step {after} but must precede it")
            }
            ViolationKind::MissingStep { step } => write!(f, "step {step} missing"),
            ViolationKind::ForbiddenStep { step } => write!(f, "step {step} forbidden here"),
            ViolationKind::StepAfterRejection { step } => write!(f, "step {step} after a rejection"),
            ViolationKind::ApprovalMissing => f.write_str("provisioning without a prior approval"),
            ViolationKind::VerdictMismatch => f.write_str("approval verdict contradicts the outcome"),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.event_index {
            Some(i) => write!(f, "event {i}: {}", self.kind),
            None => write!(f, "{}", self.kind),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ConformanceReport {
    pub violations: Vec<Violation>,
}

impl ConformanceReport {
    pub fn is_conformant(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has_dependency_violation(&self) -> bool {
        self.violations.iter().any(|v| matches!(v.kind, ViolationKind::DependencyBroken { .. }))
    }
}

/// Whether a scenario's successful formation draws MNO NSSIs (`None` when
/// it depends on the request, as for Dep B).
fn step6_rule(scenario: DeploymentScenario) -> Option<bool> {
    match scenario {
        DeploymentScenario::ClosedDepA
        | DeploymentScenario::MnoOpen
        | DeploymentScenario::PublicOpen
        | DeploymentScenario::MixedOptionB => Some(false),
        DeploymentScenario::MixedOptionA => Some(true),
        DeploymentScenario::ClosedDepB => None,
    }
}

pub fn validate_trace(trace: &FormationTrace, scenario: DeploymentScenario) -> ConformanceReport {
    let graph = StepDependencyGraph::new();
    let mut violations = Vec::new();
    let mut flag = |event_index: Option<usize>, kind| violations.push(Violation { event_index, kind });
    let events = &trace.events;

    for (i, e) in events.iter().enumerate() {
        if e.request_id != trace.request_id {
            flag(Some(i), ViolationKind::RequestMismatch);
        }
        if e.seq_no != i as u64 {
            flag(Some(i), ViolationKind::SeqGap { expected: i as u64, found: e.seq_no });
        }
        if i == 0 {
            continue;
        }
        let prev = &events[i - 1];
        if e.tick < prev.tick {
            flag(Some(i), ViolationKind::TickDecreased);
        } else {
            let expected = if e.step == prev.step { prev.tick } else { prev.tick + 1 };
            if e.tick != expected {
                flag(Some(i), ViolationKind::TickAdvance { expected, found: e.tick });
            }
        }
    }

    // Any later event whose step must come before an earlier one.
    for i in 0..events.len() {
        for j in i + 1..events.len() {
            if graph.must_precede(events[j].step, events[i].step) {
                flag(Some(j), ViolationKind::DependencyBroken { before: events[j].step, after: events[i].step });
            }
        }
    }

    let first_index = |s: u8| events.iter().position(|e| e.step.get() == s);
    let approval = first_index(4);
    let approved = approval.map(|i| events[i].payload.get("verdict") == Some("approved"));

    match &trace.outcome {
        Outcome::Served => {
            for s in SERVED_STEPS {
                if first_index(s).is_none() {
                    flag(None, ViolationKind::MissingStep { step: StepId::new(s).unwrap() });
                }
            }
            if step6_rule(scenario) == Some(true) && first_index(6).is_none() {
                flag(None, ViolationKind::MissingStep { step: StepId::new(6).unwrap() });
            }
        }
        Outcome::Rejected(_) => {
            for (i, e) in events.iter().enumerate() {
                if e.step.get() >= 5 {
                    flag(Some(i), ViolationKind::StepAfterRejection { step: e.step });
                }
            }
            match approved {
                None => flag(None, ViolationKind::ApprovalMissing),
                Some(true) => flag(approval, ViolationKind::VerdictMismatch),
                Some(false) => {}
            }
        }
        Outcome::Failed(_) => {}
    }

    // Provisioning only ever follows an approval.
    if let Some(first_provisioning) = events.iter().position(|e| e.step.get() >= 5) {
        match (approval, approved) {
            (Some(a), Some(true)) if a < first_provisioning => {}
            (Some(a), Some(false)) => flag(Some(a), ViolationKind::VerdictMismatch),
            _ => flag(Some(first_provisioning), ViolationKind::ApprovalMissing),
        }
    }

    let step6 = first_index(6);
    match step6_rule(scenario) {
        Some(false) => {
            for (i, e) in events.iter().enumerate() {
                if e.step.get() == 6 {
                    flag(Some(i), ViolationKind::ForbiddenStep { step: e.step });
                }
            }
        }
        _ => {
            // The composed NSI reports how many MNO constituents it has.
            let mno_constituents = events
                .iter()
                .find(|e| e.step.get() == 10)
                .and_then(|e| e.payload.get("mno_constituents"))
                .and_then(|v| v.parse::<u32>().ok());
            match (mno_constituents, step6) {
                (Some(0), Some(i)) => flag(Some(i), ViolationKind::ForbiddenStep { step: events[i].step }),
                (Some(n), None) if n > 0 => flag(None, ViolationKind::MissingStep { step: StepId::new(6).unwrap() }),
                _ => {}
            }
        }
    }

    ConformanceReport { violations }
}
