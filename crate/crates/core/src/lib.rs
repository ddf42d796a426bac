//! Deterministic simulator of the network-slicing management plane of a
//! local 5G micro-operator.
//!
//! A micro-operator owns NF pools at one or more locations and may borrow
//! NSSIs from, or lend access to, mobile network operators (MNOs). Tenant
//! slice requests run through the sixteen-step formation sequence in
//! [`engine`], which produces a [`FormationTrace`] per request.

pub mod csmf;
pub mod engine;
pub mod ids;
pub mod inventory;
pub mod lifecycle;
pub mod mno;
pub mod nsmf;
pub mod nssmf;
pub mod provider;
pub mod random;
pub mod runner;
pub mod scenario;

pub use engine::{
    validate_trace, Engine, EngineState, FormationRecord, FormationTrace, Outcome, StepDependencyGraph, StepId,
};
pub use nsmf::{DeploymentScenario, NsiConfigType};
pub use runner::{emit_report, replay_run, run_scenario, RunOutput, RunReport};
pub use scenario::{bundled, load_scenario, parse_scenario, Scenario, ScenarioError, ScenarioSpec, BUNDLED};
