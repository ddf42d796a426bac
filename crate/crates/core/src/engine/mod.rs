//! Discrete-event execution of the slice formation sequence.
//!
//! Each request runs steps 0 to 15 in dependency order on a logical clock.
//! Every step costs one tick, except step 0 which is recorded at the
//! current tick. Requests run one after another, never interleaved.

pub mod invariants;
pub mod trace;
pub mod validate;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::csmf::{assemble_service, CommunicationService, Csmf, SliceRequest, DEFAULT_STRICT_LATENCY_MS};
use crate::ids::{NfId, NsiId, NssiId, RequestId, ServiceId};
use crate::inventory::{DomainRef, NfPool, PoolSnapshot};
use crate::lifecycle::{LifecycleEvent, LifecycleState};
use crate::mno::MnoDomain;
use crate::nsmf::{
    classify_scenario, ConstituentMode, CustomerGroup, DeploymentScenario, Domains, LatencyClass, Nsi, NsiConfigType,
    Nsmf, NsmfError, SharingAgreement, TerminationReport,
};
use crate::nssmf::{Nssi, Nssmf};
use crate::provider::{
    approve_request, confirm_subscriber_policy, ApprovalDecision, PolicyConfirmation, Provider, RejectReason,
    ServiceAgreement, Verdict,
};

pub use invariants::InvariantViolation;
pub use trace::{Actor, FormationTrace, Outcome, Payload, StepId, TraceError, TraceEvent};
pub use validate::{validate_trace, ConformanceReport, StepDependencyGraph, Violation, ViolationKind};

use trace::step;

#[derive(Clone, Debug)]
pub struct EngineConfig {
    pub strict_latency_ms: f64,
    /// Run the full invariant suite after every emitted event.
    pub check_invariants: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self { strict_latency_ms: DEFAULT_STRICT_LATENCY_MS, check_invariants: true }
    }
}

pub struct EngineSetup {
    pub micro_operator: String,
    pub uo_pools: Vec<NfPool>,
    pub mnos: Vec<MnoDomain>,
    pub agreements: Vec<ServiceAgreement>,
    pub config: EngineConfig,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RequestSummary {
    pub request_id: RequestId,
    pub classification: Option<DeploymentScenario>,
    pub config_type: Option<NsiConfigType>,
    pub outcome: Outcome,
    pub ticks_to_outcome: u64,
    pub nf_units_consumed: u32,
    pub nfs_consumed: u32,
    pub shared_attachments: u32,
    pub nsi_ids: Vec<NsiId>,
    pub service: Option<ServiceId>,
    pub service_nsi_count: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FormationRecord {
    pub trace: FormationTrace,
    pub summary: RequestSummary,
}

/// Everything that must match between a run and its replay.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EngineState {
    pub clock: u64,
    pub pools: BTreeMap<String, PoolSnapshot>,
    pub allocations: BTreeMap<String, BTreeMap<NfId, NssiId>>,
    pub nssis: Vec<Nssi>,
    pub nsis: Vec<Nsi>,
    pub services: Vec<CommunicationService>,
    pub decisions: Vec<ApprovalDecision>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Nsmf(#[from] NsmfError),
    #[error(transparent)]
    Mno(#[from] crate::mno::MnoError),
    #[error("unknown NSI {0}")]
    UnknownNsi(NsiId),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("replay of {request_id} diverged at event {event_index:?}: {detail}")]
pub struct ReplayDivergence {
    pub request_id: RequestId,
    pub event_index: Option<usize>,
    pub detail: String,
}

struct TraceBuilder {
    request_id: RequestId,
    start_tick: u64,
    events: Vec<TraceEvent>,
}

impl TraceBuilder {
    fn next_tick(&self, step: StepId) -> u64 {
        match self.events.last() {
            None => self.start_tick,
            Some(last) if last.step == step => last.tick,
            Some(last) => last.tick + 1,
        }
    }
}

fn pool_key(domain: &DomainRef, pool: &NfPool) -> String {
    format!("{}/{}", domain.name, pool.location().id)
}

fn nssmf_actor(domain: &DomainRef) -> Actor {
    if domain.is_mno() {
        Actor::MnoNssmf
    } else {
        Actor::UoNssmf
    }
}

fn sharing_label(s: SharingAgreement) -> &'static str {
    match s {
        SharingAgreement::None => "none",
        SharingAgreement::WithinLocation => "within_location",
        SharingAgreement::CrossLocation => "cross_location",
    }
}

fn group_label(group: &CustomerGroup) -> String {
    match group {
        CustomerGroup::Closed => "closed".to_owned(),
        CustomerGroup::OpenMnoSubscribers(m) => format!("open_mno:{m}"),
        CustomerGroup::OpenPublic => "open_public".to_owned(),
    }
}

/// The whole simulated management plane.
#[derive(Clone, Debug)]
pub struct Engine {
    config: EngineConfig,
    uo: Nssmf,
    mnos: BTreeMap<String, MnoDomain>,
    nsmf: Nsmf,
    csmf: Csmf,
    provider: Provider,
    clock: u64,
    injected_rejections: BTreeSet<RequestId>,
    initial_pools: BTreeMap<String, PoolSnapshot>,
    peak_allocated: BTreeMap<String, u32>,
    invariant_checks: u64,
    invariant_violations: Vec<InvariantViolation>,
    shared_reuse: u64,
}

impl Engine {
    pub fn new(setup: EngineSetup) -> Self {
        let uo_domain = DomainRef::micro_operator(setup.micro_operator);
        let mut engine = Engine {
            csmf: Csmf::new(setup.config.strict_latency_ms),
            config: setup.config,
            uo: Nssmf::new(uo_domain.clone(), setup.uo_pools),
            mnos: setup.mnos.into_iter().map(|m| (m.name().to_owned(), m)).collect(),
            nsmf: Nsmf::new(uo_domain),
            provider: Provider::new(setup.agreements),
            clock: 0,
            injected_rejections: BTreeSet::new(),
            initial_pools: BTreeMap::new(),
            peak_allocated: BTreeMap::new(),
            invariant_checks: 0,
            invariant_violations: Vec::new(),
            shared_reuse: 0,
        };
        engine.initial_pools = engine.pool_snapshots();
        engine.peak_allocated = engine.initial_pools.iter().map(|(k, s)| (k.clone(), s.allocated_units())).collect();
        engine
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn uo_nssmf(&self) -> &Nssmf {
        &self.uo
    }

    pub fn mnos(&self) -> &BTreeMap<String, MnoDomain> {
        &self.mnos
    }

    pub fn mno_mut(&mut self, name: &str) -> Option<&mut MnoDomain> {
        self.mnos.get_mut(name)
    }

    pub fn nsmf(&self) -> &Nsmf {
        &self.nsmf
    }

    pub fn csmf(&self) -> &Csmf {
        &self.csmf
    }

    pub fn provider(&self) -> &Provider {
        &self.provider
    }

    /// Every subnet-management function: the micro-operator's first.
    pub fn nssmfs(&self) -> impl Iterator<Item = &Nssmf> {
        std::iter::once(&self.uo).chain(self.mnos.values().map(|m| m.nssmf()))
    }

    /// Every NSI in the run, micro-operator and MNO owned.
    pub fn all_nsis(&self) -> impl Iterator<Item = &Nsi> {
        self.nsmf.nsis().values().chain(self.mnos.values().flat_map(|m| m.nsis().values()))
    }

    pub fn find_nsi(&self, id: &NsiId) -> Option<&Nsi> {
        self.all_nsis().find(|n| n.id == *id)
    }

    pub fn find_nssi(&self, id: &NssiId) -> Option<&Nssi> {
        self.nssmfs().find_map(|m| m.nssi(id))
    }

    pub fn pool_snapshots(&self) -> BTreeMap<String, PoolSnapshot> {
        self.nssmfs().flat_map(|m| m.pools().values().map(move |p| (pool_key(m.domain(), p), p.snapshot()))).collect()
    }

    pub fn initial_pool_snapshots(&self) -> &BTreeMap<String, PoolSnapshot> {
        &self.initial_pools
    }

    pub fn peak_allocated_units(&self) -> &BTreeMap<String, u32> {
        &self.peak_allocated
    }

    pub fn shared_reuse_count(&self) -> u64 {
        self.shared_reuse
    }

    pub fn invariant_checks(&self) -> u64 {
        self.invariant_checks
    }

    pub fn invariant_violations(&self) -> &[InvariantViolation] {
        &self.invariant_violations
    }

    /// Forces the provider to reject `request` regardless of its agreement.
    pub fn inject_rejection(&mut self, request: RequestId) {
        self.injected_rejections.insert(request);
    }

    pub fn state(&self) -> EngineState {
        EngineState {
            clock: self.clock,
            pools: self.pool_snapshots(),
            allocations: self
                .nssmfs()
                .flat_map(|m| m.pools().values().map(move |p| (pool_key(m.domain(), p), p.allocations().clone())))
                .collect(),
            nssis: self.nssmfs().flat_map(|m| m.nssis().values().cloned()).collect(),
            nsis: self.all_nsis().cloned().collect(),
            services: self.csmf.services().values().cloned().collect(),
            decisions: self.provider.decisions().values().cloned().collect(),
        }
    }

    fn emit(&mut self, t: &mut TraceBuilder, step: StepId, actor: Actor, payload: Payload) {
        let tick = t.next_tick(step);
        t.events.push(TraceEvent {
            seq_no: t.events.len() as u64,
            tick,
            step,
            request_id: t.request_id.clone(),
            actor,
            payload,
        });
        self.after_event(Some((&t.request_id, t.events.len() as u64 - 1)));
    }

    fn after_event(&mut self, at: Option<(&RequestId, u64)>) {
        for (key, snap) in self.pool_snapshots() {
            let peak = self.peak_allocated.entry(key).or_default();
            *peak = (*peak).max(snap.allocated_units());
        }
        if self.config.check_invariants {
            self.invariant_checks += 1;
            let found = invariants::check_world(self);
            self.invariant_violations.extend(found.into_iter().map(|mut v| {
                if let Some((req, seq)) = at {
                    v.context = format!("{req}#{seq}");
                }
                v
            }));
        }
    }

    pub fn run_formation_sequence(&mut self, req: &SliceRequest) -> FormationTrace {
        self.run_request(req).trace
    }

    /// Drives one request through the formation sequence.
    pub fn run_request(&mut self, req: &SliceRequest) -> FormationRecord {
        let mut t =
            TraceBuilder { request_id: req.tenant_slice_id.clone(), start_tick: self.clock, events: Vec::new() };
        let mut summary = RequestSummary {
            request_id: req.tenant_slice_id.clone(),
            classification: None,
            config_type: None,
            outcome: Outcome::Served,
            ticks_to_outcome: 0,
            nf_units_consumed: 0,
            nfs_consumed: 0,
            shared_attachments: 0,
            nsi_ids: Vec::new(),
            service: None,
            service_nsi_count: 0,
        };
        let outcome = self.formation_steps(req, &mut t, &mut summary);
        let trace = FormationTrace { request_id: t.request_id, events: t.events, outcome };
        if let Some(last) = trace.events.last() {
            self.clock = last.tick;
        }
        summary.outcome = trace.outcome.clone();
        summary.ticks_to_outcome = trace.duration_ticks();
        FormationRecord { trace, summary }
    }

    fn formation_steps(&mut self, req: &SliceRequest, t: &mut TraceBuilder, summary: &mut RequestSummary) -> Outcome {
        self.emit(t, step(0), Actor::Ue, Payload::new().with("ues", "waiting"));
        self.emit(
            t,
            step(1),
            Actor::Tenant,
            Payload::new()
                .with("tenant", &req.tenant_id)
                .with("home", &req.home_location)
                .with("group", group_label(&req.customer_group))
                .with("sharing", sharing_label(req.sharing_agreement)),
        );
        self.emit(
            t,
            step(2),
            Actor::CommServiceProvider,
            Payload::new().with("tenant", &req.tenant_id).with("to", "network-provider"),
        );

        // Step 3: the CSMF converts the request and hands it to the NSMF.
        let reqs = self.csmf.translate(req);
        let plan = classify_scenario(req).and_then(|s| self.nsmf.plan(req, &reqs, s, &self.mnos));
        let mut p3 = Payload::new()
            .with("latency_class", if reqs.latency_class == LatencyClass::Strict { "strict" } else { "relaxed" })
            .with_list("locations", &reqs.locations);
        match &plan {
            Ok(plan) => {
                summary.classification = Some(plan.scenario);
                summary.config_type = Some(plan.config_type);
                p3 = p3.with("scenario", plan.scenario).with("config_type", plan.config_type);
            }
            Err(e) => p3 = p3.with("scenario", "unclassifiable").with("error", error_code(e)),
        }
        self.emit(t, step(3), Actor::Csmf, p3);

        // Step 4: the provider approves jointly for NSMF and NSSMF.
        let now = t.next_tick(step(4));
        let mut policy = Payload::new();
        let decision = match &plan {
            Err(_) => self.forced_decision(req, RejectReason::Unclassifiable, now),
            Ok(_) if self.injected_rejections.contains(&req.tenant_slice_id) => {
                self.forced_decision(req, RejectReason::Injected, now)
            }
            Ok(plan) => {
                let mut d = approve_request(req, plan.scenario, self.provider.agreement(&req.tenant_id), now);
                if d.is_approved() && plan.scenario == DeploymentScenario::MnoOpen {
                    let mno = plan.mno.as_ref().and_then(|m| self.mnos.get(m)).expect("planned MNO exists");
                    let (label, verdict) = match confirm_subscriber_policy(mno, &req.subscriber_group) {
                        Ok(PolicyConfirmation::Confirmed) => ("confirmed", Verdict::Approved),
                        Ok(PolicyConfirmation::Denied) => ("denied", Verdict::Rejected(RejectReason::MnoPolicyDenied)),
                        Err(_) => ("unreachable", Verdict::Rejected(RejectReason::MnoUnreachable)),
                    };
                    policy = policy
                        .with("mno", mno.name())
                        .with("subscriber_group", &req.subscriber_group)
                        .with("mno_policy", label);
                    d.verdict = verdict;
                }
                d
            }
        };
        let _ = self.provider.record(decision.clone());
        let p4 = match decision.verdict {
            Verdict::Approved => Payload::new().with("verdict", "approved"),
            Verdict::Rejected(r) => Payload::new().with("verdict", "rejected").with("reason", r),
        };
        let p4 = policy.entries().iter().fold(p4.with("tenant", &req.tenant_id), |p, (k, v)| p.with(k, v));
        self.emit(t, step(4), Actor::NetworkProvider, p4);
        let plan = match (plan, decision.verdict) {
            (Ok(plan), Verdict::Approved) => plan,
            (_, Verdict::Rejected(r)) => return Outcome::Rejected(r.as_str().to_owned()),
            (Err(_), Verdict::Approved) => unreachable!("unclassifiable requests are always rejected"),
        };

        // Steps 5 and 6: requirements fan out to the owning NSSMFs.
        for planned in plan.subnets.iter().filter(|p| !p.domain.is_mno()) {
            let r = &planned.requirement;
            let p = Payload::new()
                .with("subnet", r.subnet)
                .with("location", &r.location)
                .with("units", r.units_needed)
                .with("shareable", r.shareable);
            self.emit(t, step(5), Actor::UoNssmf, p);
        }
        for planned in plan.subnets.iter().filter(|p| p.domain.is_mno()) {
            let r = &planned.requirement;
            let p = Payload::new()
                .with("mno", &planned.domain.name)
                .with("subnet", r.subnet)
                .with("location", &r.location)
                .with("units", r.units_needed);
            self.emit(t, step(6), Actor::MnoNssmf, p);
        }

        // Step 7: orchestration.
        let result = {
            let mut domains = Domains { uo: &mut self.uo, mnos: &mut self.mnos };
            self.nsmf.orchestrate_nsi(&mut domains, req, &plan, &decision)
        };
        let orch = match result {
            Ok(o) => o,
            Err(NsmfError::Provisioning { subnet, domain, cause, rolled_back }) => {
                let reason = cause.reason_code();
                let p = Payload::new()
                    .with("subnet", subnet)
                    .with("domain", &domain)
                    .with("result", "failed")
                    .with("reason", reason)
                    .with("rolled_back", rolled_back);
                self.emit(t, step(7), nssmf_actor(&domain), p);
                return Outcome::Failed(reason.to_owned());
            }
            Err(e) => {
                let reason = error_code(&e);
                self.emit(t, step(7), Actor::Nsmf, Payload::new().with("result", "failed").with("reason", reason));
                return Outcome::Failed(reason.to_owned());
            }
        };
        for a in &orch.actions {
            let p = Payload::new()
                .with("subnet", a.subnet)
                .with("nssi", &a.nssi)
                .with("mode", a.mode.as_str())
                .with("units", plan_units(&plan, a.subnet));
            self.emit(t, step(7), nssmf_actor(&a.domain), p);
        }
        for a in &orch.actions {
            if a.mode == ConstituentMode::Attached {
                self.shared_reuse += 1;
                summary.shared_attachments += 1;
            }
            summary.nf_units_consumed += a.units_allocated;
            summary.nfs_consumed += a.nf_ids.len() as u32;
            let p = Payload::new().with("nssi", &a.nssi).with_list("nfs", &a.nf_ids).with("units", a.units_allocated);
            self.emit(t, step(8), Actor::Nf, p);
        }
        for a in &orch.actions {
            let ref_count = self.find_nssi(&a.nssi).map_or(0, |n| n.ref_count());
            let p = Payload::new()
                .with("nssi", &a.nssi)
                .with("mode", a.mode.as_str())
                .with("shared", a.shared)
                .with("ref_count", ref_count);
            self.emit(t, step(9), nssmf_actor(&a.domain), p);
        }

        let nsi_id = orch.nsi_id.clone();
        summary.nsi_ids.push(nsi_id.clone());
        let p10 = Payload::new()
            .with("nsi", &nsi_id)
            .with("config_type", plan.config_type)
            .with_list("constituents", orch.actions.iter().map(|a| &a.nssi))
            .with("mno_constituents", orch.constituents.mno_count())
            .with("state", LifecycleState::Configured);
        self.emit(t, step(10), Actor::Nsmf, p10);
        self.emit(
            t,
            step(11),
            Actor::Nsmf,
            Payload::new().with("nsi", &nsi_id).with("tenant", &req.tenant_id).with("state", LifecycleState::Activated),
        );
        self.emit(t, step(12), Actor::Nsmf, Payload::new().with("nsi", &nsi_id).with("to", "csmf"));

        let mut nsis = vec![nsi_id.clone()];
        if plan.scenario == DeploymentScenario::MixedOptionB {
            let name = plan.mno.clone().expect("mixed option B plans name an MNO");
            let reqs = self.csmf.translate(req);
            let mno = self.mnos.get_mut(&name).expect("planned MNO exists");
            match mno.provide_nsi(&req.tenant_slice_id, &req.tenant_id, &reqs, &req.profile_key) {
                Ok(mno_nsi) => {
                    let nssmf = mno.nssmf();
                    for nssi in mno_nsi.constituents.iter().filter_map(|id| nssmf.nssi(id)) {
                        let pool = nssmf.pool(&nssi.location).expect("MNO pool exists");
                        summary.nfs_consumed += nssi.nf_ids.len() as u32;
                        summary.nf_units_consumed += nssi
                            .nf_ids
                            .iter()
                            .filter_map(|id| pool.resource(id))
                            .map(|nf| nf.capacity_units)
                            .sum::<u32>();
                    }
                    let p = Payload::new()
                        .with("nsi", &mno_nsi.id)
                        .with("mno", &name)
                        .with("config_type", mno_nsi.config_type)
                        .with_list("constituents", &mno_nsi.constituents)
                        .with("state", mno_nsi.state)
                        .with("to", "csmf");
                    summary.nsi_ids.push(mno_nsi.id.clone());
                    nsis.push(mno_nsi.id);
                    self.emit(t, step(12), Actor::MnoNsmf, p);
                }
                Err(e) => {
                    let reason = e.reason_code();
                    let _ = self.deactivate_and_terminate(&nsi_id);
                    let p = Payload::new()
                        .with("mno", &name)
                        .with("result", "failed")
                        .with("reason", reason)
                        .with("rolled_back_nsi", &nsi_id);
                    self.emit(t, step(12), Actor::MnoNsmf, p);
                    return Outcome::Failed(reason.to_owned());
                }
            }
        }

        // Step 13: the CSMF wraps the NSI(s) as a communication service.
        let service = {
            let refs: Vec<&Nsi> = nsis.iter().filter_map(|id| self.find_nsi(id)).collect();
            assemble_service(&refs, &req.tenant_id, &req.tenant_slice_id)
        };
        let service = match service {
            Ok(s) => self.csmf.register(s),
            Err(_) => {
                self.emit(
                    t,
                    step(13),
                    Actor::Csmf,
                    Payload::new().with("result", "failed").with("reason", "service_assembly"),
                );
                return Outcome::Failed("service_assembly".to_owned());
            }
        };
        summary.service = Some(service.clone());
        summary.service_nsi_count = nsis.len();
        self.emit(t, step(13), Actor::Csmf, Payload::new().with("service", &service).with_list("nsis", &nsis));

        let delivery = self.csmf.notify_tenant(&service).expect("service just registered");
        self.emit(
            t,
            step(14),
            Actor::CommServiceProvider,
            Payload::new()
                .with("service", &service)
                .with("tenant", &delivery.tenant_id)
                .with("first_delivery", delivery.first_delivery),
        );
        let attach = if self.csmf.ue_attach_permitted(&service) { "established" } else { "refused" };
        self.emit(t, step(15), Actor::Ue, Payload::new().with("service", &service).with("attach", attach));
        Outcome::Served
    }

    fn forced_decision(&self, req: &SliceRequest, reason: RejectReason, now: u64) -> ApprovalDecision {
        ApprovalDecision {
            request_id: req.tenant_slice_id.clone(),
            verdict: Verdict::Rejected(reason),
            decided_at_tick: now,
        }
    }

    /// Applies a lifecycle event to any NSI, micro-operator or MNO owned.
    /// `Terminate` also releases the NSI's constituents.
    pub fn apply_lifecycle(&mut self, id: &NsiId, event: LifecycleEvent) -> Result<LifecycleState, EngineError> {
        if event == LifecycleEvent::Terminate {
            self.terminate(id)?;
            self.after_event(None);
            return Ok(LifecycleState::Terminated);
        }
        let result = if self.nsmf.nsi(id).is_some() {
            self.nsmf.advance_lifecycle(id, event)?
        } else if let Some(mno) = self.mnos.values_mut().find(|m| m.nsis().contains_key(id)) {
            mno.advance_lifecycle(id, event)?
        } else {
            return Err(EngineError::UnknownNsi(id.clone()));
        };
        if !result.is_live() {
            self.csmf.on_nsi_terminated(id);
        }
        self.after_event(None);
        Ok(result)
    }

    /// Deactivates a live NSI (leaving supervision if needed) and terminates it.
    pub fn deactivate_and_terminate(&mut self, id: &NsiId) -> Result<TerminationReport, EngineError> {
        let state = self.find_nsi(id).ok_or_else(|| EngineError::UnknownNsi(id.clone()))?.state;
        if state == LifecycleState::Modified {
            self.apply_lifecycle(id, LifecycleEvent::Supervise)?;
        }
        if state != LifecycleState::Deactivated {
            self.apply_lifecycle(id, LifecycleEvent::Deactivate)?;
        }
        let report = self.terminate(id)?;
        self.after_event(None);
        Ok(report)
    }

    fn terminate(&mut self, id: &NsiId) -> Result<TerminationReport, EngineError> {
        let report = if self.nsmf.nsi(id).is_some() {
            let mut domains = Domains { uo: &mut self.uo, mnos: &mut self.mnos };
            self.nsmf.terminate_nsi(&mut domains, id)?
        } else if let Some(mno) = self.mnos.values_mut().find(|m| m.nsis().contains_key(id)) {
            mno.terminate_nsi(id)?
        } else {
            return Err(EngineError::UnknownNsi(id.clone()));
        };
        self.csmf.on_nsi_terminated(id);
        Ok(report)
    }

    /// Terminates every NSI that is not terminated yet, oldest first.
    pub fn teardown_all(&mut self) -> Result<Vec<TerminationReport>, EngineError> {
        let pending: Vec<NsiId> =
            self.all_nsis().filter(|n| n.state != LifecycleState::Terminated).map(|n| n.id.clone()).collect();
        pending.iter().map(|id| self.deactivate_and_terminate(id)).collect()
    }

    /// Re-runs `req` and checks the result against a recorded trace.
    pub fn replay(
        &mut self,
        req: &SliceRequest,
        recorded: &FormationTrace,
    ) -> Result<FormationRecord, ReplayDivergence> {
        let record = self.run_request(req);
        let diverge = |event_index, detail: String| ReplayDivergence {
            request_id: req.tenant_slice_id.clone(),
            event_index,
            detail,
        };
        for (i, (a, b)) in record.trace.events.iter().zip(&recorded.events).enumerate() {
            if a != b {
                return Err(diverge(
                    Some(i),
                    format!("expected step {} by {}, got step {} by {}", b.step, b.actor, a.step, a.actor),
                ));
            }
        }
        if record.trace.events.len() != recorded.events.len() {
            let i = record.trace.events.len().min(recorded.events.len());
            return Err(diverge(
                Some(i),
                format!("{} events recorded, {} replayed", recorded.events.len(), record.trace.events.len()),
            ));
        }
        if record.trace.outcome != recorded.outcome {
            return Err(diverge(
                None,
                format!("outcome {} recorded, {} replayed", recorded.outcome, record.trace.outcome),
            ));
        }
        Ok(record)
    }
}

fn plan_units(plan: &crate::nsmf::FormationPlan, subnet: crate::inventory::SubnetKind) -> u32 {
    plan.subnets.iter().find(|p| p.requirement.subnet == subnet).map_or(0, |p| p.requirement.units_needed)
}

fn error_code(e: &NsmfError) -> &'static str {
    match e {
        NsmfError::RequestDiscarded => "discarded",
        NsmfError::Unclassifiable(_) => "unclassifiable",
        NsmfError::UnknownMno(_) => "unknown_mno",
        NsmfError::UnknownNsi(_) => "unknown_nsi",
        NsmfError::InvalidTransition(_) => "invalid_transition",
        NsmfError::Provisioning { cause, .. } => cause.reason_code(),
        NsmfError::Release { .. } => "release_failed",
    }
}
