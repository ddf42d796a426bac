//! Slice lifecycle state machine shared by NSIs and NSSIs.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LifecycleState {
    Instantiated,
    Configured,
    Activated,
    Supervised,
    Modified,
    Deactivated,
    Terminated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LifecycleEvent {
    Configure,
    Activate,
    /// Enter (or re-enter, as a reporting cycle) the supervised run-time state.
    Supervise,
    Modify,
    Deactivate,
    Terminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("event {event:?} is not allowed in state {from:?}")]
pub struct InvalidTransition {
    pub from: LifecycleState,
    pub event: LifecycleEvent,
}

impl LifecycleState {
    pub const ALL: [LifecycleState; 7] = [
        LifecycleState::Instantiated,
        LifecycleState::Configured,
        LifecycleState::Activated,
        LifecycleState::Supervised,
        LifecycleState::Modified,
        LifecycleState::Deactivated,
        LifecycleState::Terminated,
    ];

    pub fn apply(self, event: LifecycleEvent) -> Result<LifecycleState, InvalidTransition> {
        use LifecycleEvent as E;
        use LifecycleState as S;
        let next = match (self, event) {
            (S::Instantiated, E::Configure) => S::Configured,
            (S::Configured, E::Activate) => S::Activated,
            (S::Activated, E::Supervise) => S::Supervised,
            (S::Supervised, E::Supervise) => S::Supervised,
            (S::Supervised, E::Modify) => S::Modified,
            (S::Modified, E::Supervise) => S::Supervised,
            (S::Supervised, E::Deactivate) | (S::Activated, E::Deactivate) => S::Deactivated,
            (S::Deactivated, E::Terminate) => S::Terminated,
            (from, event) => return Err(InvalidTransition { from, event }),
        };
        Ok(next)
    }

    /// The legal transition graph, independent of event labels.
    pub fn is_edge(from: LifecycleState, to: LifecycleState) -> bool {
        use LifecycleState as S;
        matches!(
            (from, to),
            (S::Instantiated, S::Configured)
                | (S::Configured, S::Activated)
                | (S::Activated, S::Supervised)
                | (S::Activated, S::Deactivated)
                | (S::Supervised, S::Supervised)
                | (S::Supervised, S::Modified)
                | (S::Supervised, S::Deactivated)
                | (S::Modified, S::Supervised)
                | (S::Deactivated, S::Terminated)
        )
    }

    /// True for states in which the slice carries traffic.
    pub fn is_live(self) -> bool {
        matches!(self, LifecycleState::Activated | LifecycleState::Supervised | LifecycleState::Modified)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LifecycleState::Instantiated => "instantiated",
            LifecycleState::Configured => "configured",
            LifecycleState::Activated => "activated",
            LifecycleState::Supervised => "supervised",
            LifecycleState::Modified => "modified",
            LifecycleState::Deactivated => "deactivated",
            LifecycleState::Terminated => "terminated",
        }
    }
}

impl fmt::Display for LifecycleState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl LifecycleEvent {
    pub const ALL: [LifecycleEvent; 6] = [
        LifecycleEvent::Configure,
        LifecycleEvent::Activate,
        LifecycleEvent::Supervise,
        LifecycleEvent::Modify,
        LifecycleEvent::Deactivate,
        LifecycleEvent::Terminate,
    ];
}

/// Checks that `history` starts at `Instantiated` and only follows legal edges.
pub fn is_legal_path(history: &[LifecycleState]) -> bool {
    history.first().is_some_and(|s| *s == LifecycleState::Instantiated)
        && history.windows(2).all(|w| LifecycleState::is_edge(w[0], w[1]))
}
