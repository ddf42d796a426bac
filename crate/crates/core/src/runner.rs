//! Runs scenarios end to end and writes their reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::engine::{
    validate_trace, EngineState, FormationTrace, InvariantViolation, Outcome, ReplayDivergence, Violation,
};
use crate::nsmf::{DeploymentScenario, NsiConfigType};
use crate::scenario::{ExpectedOutcome, Scenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_EXPECTATION_MISMATCH: i32 = 1;
pub const EXIT_PARSE_ERROR: i32 = 2;
pub const EXIT_INVARIANT_VIOLATION: i32 = 3;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RequestReport {
    pub request: String,
    pub classification: Option<DeploymentScenario>,
    pub config_type: Option<NsiConfigType>,
    pub outcome: Outcome,
    pub ticks_to_outcome: u64,
    pub nfs_consumed: u32,
    pub nf_units_consumed: u32,
    pub shared_attachments: u32,
    pub nsis: Vec<String>,
    pub service: Option<String>,
    pub service_nsi_count: usize,
    pub conformance_violations: Vec<Violation>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PoolPeak {
    pub peak_allocated_units: u32,
    pub total_units: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InvariantSummary {
    pub checks: u64,
    pub violations: Vec<InvariantViolation>,
    /// Every pool equals its initial snapshot after terminating all NSIs.
    pub pools_restored_after_teardown: bool,
}

impl InvariantSummary {
    pub fn all_pass(&self) -> bool {
        self.violations.is_empty() && self.pools_restored_after_teardown
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExpectationMismatch {
    pub request: String,
    pub field: &'static str,
    pub expected: String,
    pub actual: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Aggregate {
    pub pool_peaks: BTreeMap<String, PoolPeak>,
    pub shared_nssi_reuse: u64,
    pub invariants: InvariantSummary,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub requests: Vec<RequestReport>,
    pub aggregate: Aggregate,
    pub expectation_mismatches: Vec<ExpectationMismatch>,
}

impl RunReport {
    pub fn traces_conformant(&self) -> bool {
        self.requests.iter().all(|r| r.conformance_violations.is_empty())
    }

    /// Invariant failures (including non-conformant traces) outrank
    /// expectation mismatches.
    pub fn exit_code(&self) -> i32 {
        if !self.aggregate.invariants.all_pass() || !self.traces_conformant() {
            EXIT_INVARIANT_VIOLATION
        } else if !self.expectation_mismatches.is_empty() {
            EXIT_EXPECTATION_MISMATCH
        } else {
            EXIT_OK
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario {}", self.scenario);
        let _ = writeln!(
            out,
            "{:<20} {:<32} {:<16} {:<6} {:>5} {:>4} {:>5}",
            "request", "outcome", "scenario", "config", "ticks", "nfs", "units"
        );
        for r in &self.requests {
            let _ = writeln!(
                out,
                "{:<20} {:<32} {:<16} {:<6} {:>5} {:>4} {:>5}",
                r.request,
                r.outcome.to_string(),
                r.classification.map_or("-", DeploymentScenario::as_str),
                r.config_type.map_or("-", NsiConfigType::as_str),
                r.ticks_to_outcome,
                r.nfs_consumed,
                r.nf_units_consumed
            );
        }
        for (pool, peak) in &self.aggregate.pool_peaks {
            let _ = writeln!(out, "pool {pool}: peak {}/{} units", peak.peak_allocated_units, peak.total_units);
        }
        let inv = &self.aggregate.invariants;
        let _ = writeln!(out, "shared NSSI reuse: {}", self.aggregate.shared_nssi_reuse);
        let _ = writeln!(out, "invariant checks: {} run, {} violations", inv.checks, inv.violations.len());
        for v in &inv.violations {
            let _ = writeln!(out, "  {v}");
        }
        let _ = writeln!(
            out,
            "pools restored after teardown: {}",
            if inv.pools_restored_after_teardown { "yes" } else { "no" }
        );
        for r in self.requests.iter().filter(|r| !r.conformance_violations.is_empty()) {
            let _ = writeln!(out, "non-conformant trace {}: {} violations", r.request, r.conformance_violations.len());
        }
        if self.expectation_mismatches.is_empty() {
            let _ = writeln!(out, "expectations: all met");
        } else {
            for m in &self.expectation_mismatches {
                let _ = writeln!(
                    out,
                    "expectation mismatch {}: {} expected {} got {}",
                    m.request, m.field, m.expected, m.actual
                );
            }
        }
        out
    }
}

/// Everything a run produces.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: RunReport,
    pub traces: Vec<FormationTrace>,
    /// World state after the last request, before teardown.
    pub final_state: EngineState,
    /// World state after terminating every NSI.
    pub torn_down_state: EngineState,
}

fn outcome_kind(o: &Outcome) -> (ExpectedOutcome, Option<&str>) {
    match o {
        Outcome::Served => (ExpectedOutcome::Served, None),
        Outcome::Rejected(r) => (ExpectedOutcome::Rejected, Some(r)),
        Outcome::Failed(r) => (ExpectedOutcome::Failed, Some(r)),
    }
}

fn kind_str(k: ExpectedOutcome) -> &'static str {
    match k {
        ExpectedOutcome::Served => "served",
        ExpectedOutcome::Rejected => "rejected",
        ExpectedOutcome::Failed => "failed",
    }
}

pub fn run_scenario(scenario: &Scenario) -> RunOutput {
    let mut engine = scenario.build_engine(true);
    let mut traces = Vec::with_capacity(scenario.requests.len());
    let mut requests = Vec::with_capacity(scenario.requests.len());
    let mut mismatches = Vec::new();

    for req in &scenario.requests {
        let record = engine.run_request(req);
        let s = &record.summary;
        let conformance = validate_trace(&record.trace, s.classification.unwrap_or(DeploymentScenario::ClosedDepA));
        let request = s.request_id.to_string();

        if let Some(e) = scenario.expectation(&s.request_id) {
            let mut mismatch = |field, expected: String, actual: String| {
                if expected != actual {
                    mismatches.push(ExpectationMismatch { request: request.clone(), field, expected, actual });
                }
            };
            let (kind, reason) = outcome_kind(&s.outcome);
            mismatch("outcome", kind_str(e.outcome).to_owned(), kind_str(kind).to_owned());
            if let Some(want) = &e.reason {
                mismatch("reason", want.clone(), reason.unwrap_or("-").to_owned());
            }
            if let Some(want) = e.scenario {
                mismatch("scenario", want.to_string(), s.classification.map_or("-".to_owned(), |c| c.to_string()));
            }
            if let Some(want) = e.config_type {
                mismatch("config_type", want.to_string(), s.config_type.map_or("-".to_owned(), |c| c.to_string()));
            }
        }

        requests.push(RequestReport {
            request,
            classification: s.classification,
            config_type: s.config_type,
            outcome: s.outcome.clone(),
            ticks_to_outcome: s.ticks_to_outcome,
            nfs_consumed: s.nfs_consumed,
            nf_units_consumed: s.nf_units_consumed,
            shared_attachments: s.shared_attachments,
            nsis: s.nsi_ids.iter().map(ToString::to_string).collect(),
            service: s.service.as_ref().map(ToString::to_string),
            service_nsi_count: s.service_nsi_count,
            conformance_violations: conformance.violations,
        });
        traces.push(record.trace);
    }

    let final_state = engine.state();
    let mut teardown = engine.clone();
    let teardown_ok = teardown.teardown_all().is_ok();
    let pools_restored = teardown_ok && teardown.pool_snapshots() == *teardown.initial_pool_snapshots();
    let totals = engine.pool_snapshots();
    let pool_peaks = engine
        .peak_allocated_units()
        .iter()
        .map(|(k, peak)| {
            let total_units = totals.get(k).map_or(0, |s| s.total_units());
            (k.clone(), PoolPeak { peak_allocated_units: *peak, total_units })
        })
        .collect();

    let report = RunReport {
        scenario: scenario.spec.name.clone(),
        requests,
        aggregate: Aggregate {
            pool_peaks,
            shared_nssi_reuse: engine.shared_reuse_count(),
            invariants: InvariantSummary {
                checks: teardown.invariant_checks(),
                violations: teardown.invariant_violations().to_vec(),
                pools_restored_after_teardown: pools_restored,
            },
        },
        expectation_mismatches: mismatches,
    };
    RunOutput { report, traces, final_state, torn_down_state: teardown.state() }
}

/// File name of a trace inside `traces/`; path separators become `_`.
pub fn trace_file_name(trace: &FormationTrace) -> String {
    format!("{}.trace", trace.request_id.as_str().replace(['/', ':'], "_"))
}

/// Writes `traces/<request>.trace`, `report.json` and `summary.txt`.
pub fn emit_report(report: &RunReport, traces: &[FormationTrace], out_dir: &Path) -> std::io::Result<()> {
    let trace_dir = out_dir.join("traces");
    std::fs::create_dir_all(&trace_dir)?;
    for t in traces {
        std::fs::write(trace_dir.join(trace_file_name(t)), t.to_text())?;
    }
    std::fs::write(out_dir.join("report.json"), report.to_json())?;
    std::fs::write(out_dir.join("summary.txt"), report.summary_text())
}

/// Re-executes the scenario against recorded traces and returns the final
/// state, or the first divergence.
pub fn replay_run(scenario: &Scenario, recorded: &[FormationTrace]) -> Result<EngineState, ReplayDivergence> {
    let mut engine = scenario.build_engine(false);
    if recorded.len() != scenario.requests.len() {
        return Err(ReplayDivergence {
            request_id: recorded.first().map(|t| t.request_id.clone()).unwrap_or_else(|| "-".into()),
            event_index: None,
            detail: format!("{} traces recorded for {} requests", recorded.len(), scenario.requests.len()),
        });
    }
    for (req, trace) in scenario.requests.iter().zip(recorded) {
        engine.replay(req, trace)?;
    }
    Ok(engine.state())
}
