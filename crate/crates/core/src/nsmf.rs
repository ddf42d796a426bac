//! End-to-end NSI management: scenario classification, configuration type,
//! NSSI requisition across domains, composition and lifecycle.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::csmf::SliceRequest;
use crate::ids::{LocationId, NfId, NsiId, NssiId, RequestId, TenantId};
use crate::inventory::{DomainRef, SubnetKind};
use crate::lifecycle::{InvalidTransition, LifecycleEvent, LifecycleState};
use crate::mno::{MnoDomain, MnoError};
use crate::nssmf::{aggregate_multi_domain, ConstituentSet, Nssmf, NssmfError, ReleaseOutcome, SubnetRequirement};
use crate::provider::{ApprovalDecision, Verdict};

/// The six micro-operator deployment scenarios.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeploymentScenario {
    ClosedDepA,
    ClosedDepB,
    MnoOpen,
    PublicOpen,
    MixedOptionA,
    MixedOptionB,
}

impl DeploymentScenario {
    pub const ALL: [DeploymentScenario; 6] = [
        DeploymentScenario::ClosedDepA,
        DeploymentScenario::ClosedDepB,
        DeploymentScenario::MnoOpen,
        DeploymentScenario::PublicOpen,
        DeploymentScenario::MixedOptionA,
        DeploymentScenario::MixedOptionB,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DeploymentScenario::ClosedDepA => "closed_dep_a",
            DeploymentScenario::ClosedDepB => "closed_dep_b",
            DeploymentScenario::MnoOpen => "mno_open",
            DeploymentScenario::PublicOpen => "public_open",
            DeploymentScenario::MixedOptionA => "mixed_option_a",
            DeploymentScenario::MixedOptionB => "mixed_option_b",
        }
    }
}

impl fmt::Display for DeploymentScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DeploymentScenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|d| d.as_str() == s).ok_or_else(|| format!("unknown deployment scenario {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NsiConfigType {
    /// No shared constituents.
    Type1,
    /// Shared NSSIs allowed.
    Type2,
    /// Includes NSSIs from an external domain.
    Type3,
}

impl NsiConfigType {
    pub fn as_str(self) -> &'static str {
        match self {
            NsiConfigType::Type1 => "type1",
            NsiConfigType::Type2 => "type2",
            NsiConfigType::Type3 => "type3",
        }
    }
}

impl fmt::Display for NsiConfigType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatencyClass {
    Strict,
    Relaxed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SharingAgreement {
    None,
    WithinLocation,
    CrossLocation,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CustomerGroup {
    Closed,
    OpenMnoSubscribers(String),
    OpenPublic,
}

/// How a closed multi-location slice is bridged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepBBridge {
    /// Through the MNO network; the DN subnet comes from the MNO.
    #[default]
    Mno,
    /// Through a second micro-operator site; the DN subnet comes from there.
    MultiSite,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NetworkSliceRequirements {
    pub latency_class: LatencyClass,
    pub throughput_units: u32,
    pub sharing: SharingAgreement,
    pub mobility: bool,
    pub locations: BTreeSet<LocationId>,
    pub home_location: LocationId,
    pub duration_ticks: u64,
    pub external_access: bool,
    pub customer_group: CustomerGroup,
    pub bridge: DepBBridge,
}

impl NetworkSliceRequirements {
    /// Whether micro-operator constituents may be shared with other tenants.
    pub fn sharing_allowed(&self) -> bool {
        self.sharing != SharingAgreement::None && self.latency_class == LatencyClass::Relaxed
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Nsi {
    pub id: NsiId,
    pub request_id: RequestId,
    pub tenant_id: TenantId,
    pub scenario: DeploymentScenario,
    pub config_type: NsiConfigType,
    pub constituents: Vec<NssiId>,
    pub state: LifecycleState,
    /// Every state the NSI has been in, oldest first.
    pub history: Vec<LifecycleState>,
    pub owner_domain: DomainRef,
    pub home_location: LocationId,
    /// MNO name for MNO-open slices, `public` for public-open ones.
    pub serving_agreement: Option<String>,
}

impl Nsi {
    pub fn advance(&mut self, event: LifecycleEvent) -> Result<LifecycleState, InvalidTransition> {
        let next = self.state.apply(event)?;
        self.state = next;
        self.history.push(next);
        Ok(next)
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn activated(
        id: NsiId,
        request_id: RequestId,
        tenant_id: TenantId,
        scenario: DeploymentScenario,
        config_type: NsiConfigType,
        constituents: Vec<NssiId>,
        owner_domain: DomainRef,
        home_location: LocationId,
    ) -> Self {
        let mut nsi = Nsi {
            id,
            request_id,
            tenant_id,
            scenario,
            config_type,
            constituents,
            state: LifecycleState::Instantiated,
            history: vec![LifecycleState::Instantiated],
            owner_domain,
            home_location,
            serving_agreement: None,
        };
        nsi.advance(LifecycleEvent::Configure).expect("instantiated -> configured");
        nsi.advance(LifecycleEvent::Activate).expect("configured -> activated");
        nsi
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NsmfError {
    #[error("request discarded: no approval")]
    RequestDiscarded,
    #[error("unclassifiable request: {0}")]
    Unclassifiable(&'static str),
    #[error("unknown MNO {0:?}")]
    UnknownMno(String),
    #[error("unknown NSI {0}")]
    UnknownNsi(NsiId),
    #[error(transparent)]
    InvalidTransition(#[from] InvalidTransition),
    #[error("{subnet} NSSI from {domain} failed: {cause}")]
    Provisioning { subnet: SubnetKind, domain: DomainRef, cause: ProvisionFailure, rolled_back: usize },
    #[error("release of {nssi} failed: {cause}")]
    Release { nssi: NssiId, cause: NssmfError },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProvisionFailure {
    #[error(transparent)]
    Nssmf(#[from] NssmfError),
    #[error(transparent)]
    Mno(#[from] MnoError),
}

impl ProvisionFailure {
    pub fn reason_code(&self) -> &'static str {
        match self {
            ProvisionFailure::Nssmf(e) if e.is_insufficient() => "insufficient_resources",
            ProvisionFailure::Nssmf(_) => "nssmf_error",
            ProvisionFailure::Mno(e) => e.reason_code(),
        }
    }
}

/// Maps a request onto one deployment scenario.
///
/// `mno_needs_uo_access` always means Mixed Option B. Wide-area MNO need is
/// Mixed Option A on a mixed network and a Dep B external bridge on a closed
/// one. Otherwise the customer group and location count decide.
pub fn classify_scenario(req: &SliceRequest) -> Result<DeploymentScenario, NsmfError> {
    use DeploymentScenario as D;
    if req.needs_mno_wide_area && req.mno_needs_uo_access {
        return Err(NsmfError::Unclassifiable("both mixed directions requested"));
    }
    if req.mno_needs_uo_access {
        return Ok(D::MixedOptionB);
    }
    if req.needs_mno_wide_area && req.mixed_network {
        return Ok(D::MixedOptionA);
    }
    let multi_location = req.share_with_locations.iter().any(|l| *l != req.home_location);
    match &req.customer_group {
        CustomerGroup::Closed => {
            if req.bridge == DepBBridge::MultiSite {
                if req.needs_mno_wide_area {
                    return Err(NsmfError::Unclassifiable("multi-site bridge with MNO wide-area need"));
                }
                if !multi_location {
                    return Err(NsmfError::Unclassifiable("multi-site bridge with a single location"));
                }
            }
            if multi_location || req.needs_mno_wide_area {
                Ok(D::ClosedDepB)
            } else {
                Ok(D::ClosedDepA)
            }
        }
        _ if req.needs_mno_wide_area => {
            Err(NsmfError::Unclassifiable("open network request needs MNO wide-area access"))
        }
        CustomerGroup::OpenMnoSubscribers(_) => Ok(D::MnoOpen),
        CustomerGroup::OpenPublic => Ok(D::PublicOpen),
    }
}

/// External composition is decided first, then sharing policy.
pub fn determine_config_type(reqs: &NetworkSliceRequirements, scenario: DeploymentScenario) -> NsiConfigType {
    let external = match scenario {
        DeploymentScenario::MixedOptionA => true,
        DeploymentScenario::ClosedDepB => reqs.bridge == DepBBridge::Mno,
        _ => false,
    };
    if external {
        NsiConfigType::Type3
    } else if reqs.sharing_allowed() {
        NsiConfigType::Type2
    } else {
        NsiConfigType::Type1
    }
}

/// Mutable access to every domain's subnet management.
pub struct Domains<'a> {
    pub uo: &'a mut Nssmf,
    pub mnos: &'a mut BTreeMap<String, MnoDomain>,
}

impl Domains<'_> {
    fn nssmf_for(&mut self, domain: &DomainRef) -> Option<&mut Nssmf> {
        if domain == self.uo.domain() {
            Some(self.uo)
        } else {
            self.mnos.get_mut(&domain.name).map(|m| m.nssmf_mut())
        }
    }

    fn owner_of(&self, nssi: &NssiId) -> Option<DomainRef> {
        if self.uo.nssi(nssi).is_some() {
            return Some(self.uo.domain().clone());
        }
        self.mnos.values().find(|m| m.nssmf().nssi(nssi).is_some()).map(|m| m.domain().clone())
    }
}

/// Picks the MNO a request deals with.
pub fn resolve_mno<'m>(req: &SliceRequest, mnos: impl IntoIterator<Item = &'m String>) -> Result<String, NsmfError> {
    let names: Vec<&String> = mnos.into_iter().collect();
    let wanted = match &req.customer_group {
        CustomerGroup::OpenMnoSubscribers(name) if req.mno.is_none() => Some(name.clone()),
        _ => req.mno.clone(),
    };
    match wanted {
        Some(name) if names.iter().any(|n| **n == name) => Ok(name),
        Some(name) => Err(NsmfError::UnknownMno(name)),
        None if names.len() == 1 => Ok(names[0].clone()),
        None => Err(NsmfError::UnknownMno(String::from("<unspecified>"))),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PlannedSubnet {
    pub domain: DomainRef,
    pub requirement: SubnetRequirement,
}

/// Which subnet requirements go to which domain, before anything is touched.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FormationPlan {
    pub scenario: DeploymentScenario,
    pub config_type: NsiConfigType,
    pub subnets: Vec<PlannedSubnet>,
    pub mno: Option<String>,
}

impl FormationPlan {
    pub fn draws_mno_nssis(&self) -> bool {
        self.subnets.iter().any(|s| s.domain.is_mno())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstituentMode {
    Fresh,
    Attached,
}

impl ConstituentMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ConstituentMode::Fresh => "fresh",
            ConstituentMode::Attached => "attached",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConstituentAction {
    pub nssi: NssiId,
    pub domain: DomainRef,
    pub subnet: SubnetKind,
    pub location: LocationId,
    pub mode: ConstituentMode,
    /// NFs allocated by this action; empty when attaching to a shared NSSI.
    pub nf_ids: Vec<NfId>,
    pub units_allocated: u32,
    pub shared: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Orchestration {
    pub nsi_id: NsiId,
    pub actions: Vec<ConstituentAction>,
    pub constituents: ConstituentSet,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TerminationReport {
    pub nsi: Option<NsiId>,
    pub terminated_nssis: Vec<NssiId>,
    pub decremented_nssis: Vec<NssiId>,
    pub freed_nf_ids: Vec<NfId>,
}

/// The micro-operator's NSMF.
#[derive(Clone, Debug)]
pub struct Nsmf {
    domain: DomainRef,
    nsis: BTreeMap<NsiId, Nsi>,
    next_id: u64,
}

impl Nsmf {
    pub fn new(domain: DomainRef) -> Self {
        Self { domain, nsis: BTreeMap::new(), next_id: 1 }
    }

    pub fn nsis(&self) -> &BTreeMap<NsiId, Nsi> {
        &self.nsis
    }

    pub fn nsi(&self, id: &NsiId) -> Option<&Nsi> {
        self.nsis.get(id)
    }

    /// Decides where each of the AN, CN and DN requirements is served from.
    pub fn plan(
        &self,
        req: &SliceRequest,
        reqs: &NetworkSliceRequirements,
        scenario: DeploymentScenario,
        mnos: &BTreeMap<String, MnoDomain>,
    ) -> Result<FormationPlan, NsmfError> {
        let config_type = determine_config_type(reqs, scenario);
        let uo_share = reqs.sharing_allowed();
        let uo_req = |subnet, location: &LocationId| PlannedSubnet {
            domain: self.domain.clone(),
            requirement: SubnetRequirement {
                subnet,
                units_needed: reqs.throughput_units,
                location: location.clone(),
                shareable: uo_share,
                profile_key: req.profile_key.clone(),
            },
        };
        let home = &reqs.home_location;

        let needs_mno = matches!(scenario, DeploymentScenario::MixedOptionA)
            || (scenario == DeploymentScenario::ClosedDepB && reqs.bridge == DepBBridge::Mno);
        let mno = match scenario {
            DeploymentScenario::MnoOpen | DeploymentScenario::MixedOptionB => Some(resolve_mno(req, mnos.keys())?),
            _ if needs_mno => Some(resolve_mno(req, mnos.keys())?),
            _ => None,
        };

        let mut subnets = vec![uo_req(SubnetKind::An, home), uo_req(SubnetKind::Cn, home)];
        if needs_mno {
            let name = mno.as_ref().expect("resolved above");
            let domain = &mnos[name];
            subnets.push(PlannedSubnet {
                domain: domain.domain().clone(),
                requirement: SubnetRequirement {
                    subnet: SubnetKind::Dn,
                    units_needed: reqs.throughput_units,
                    location: domain.location().clone(),
                    shareable: false,
                    profile_key: req.profile_key.clone(),
                },
            });
        } else if scenario == DeploymentScenario::ClosedDepB {
            let remote = reqs
                .locations
                .iter()
                .find(|l| *l != home)
                .ok_or(NsmfError::Unclassifiable("multi-site bridge with a single location"))?;
            subnets.push(uo_req(SubnetKind::Dn, remote));
        } else {
            subnets.push(uo_req(SubnetKind::Dn, home));
        }
        Ok(FormationPlan { scenario, config_type, subnets, mno })
    }

    /// Requisitions every planned NSSI and composes an activated NSI.
    ///
    /// A rejected approval discards the request without touching any state.
    /// If any subnet cannot be served, everything already provisioned or
    /// attached for this NSI is rolled back before returning.
    pub fn orchestrate_nsi(
        &mut self,
        domains: &mut Domains<'_>,
        req: &SliceRequest,
        plan: &FormationPlan,
        approval: &ApprovalDecision,
    ) -> Result<Orchestration, NsmfError> {
        if !matches!(approval.verdict, Verdict::Approved) {
            return Err(NsmfError::RequestDiscarded);
        }
        let nsi_id = NsiId::new(format!("nsi-{}", self.next_id));
        let mut actions: Vec<ConstituentAction> = Vec::new();

        for planned in &plan.subnets {
            let r = &planned.requirement;
            let outcome = if planned.domain.is_mno() {
                match domains.mnos.get_mut(&planned.domain.name) {
                    Some(mno) => mno
                        .provide_nssi(r, &nsi_id)
                        .map(|id| (id, ConstituentMode::Fresh))
                        .map_err(ProvisionFailure::from),
                    None => Err(MnoError::Unknown(planned.domain.name.clone()).into()),
                }
            } else {
                let shared = if r.shareable { domains.uo.find_shareable(r).map(|n| n.id.clone()) } else { None };
                match shared {
                    Some(existing) => domains
                        .uo
                        .attach_shared(&existing, &nsi_id, r)
                        .map(|_| (existing, ConstituentMode::Attached))
                        .map_err(ProvisionFailure::from),
                    None => domains
                        .uo
                        .provision_nssi(r, &nsi_id)
                        .map(|id| (id, ConstituentMode::Fresh))
                        .map_err(ProvisionFailure::from),
                }
            };
            match outcome {
                Ok((nssi, mode)) => {
                    let nssmf = domains.nssmf_for(&planned.domain).expect("domain exists");
                    let record = nssmf.nssi(&nssi).expect("just provisioned");
                    let (nf_ids, units) = if mode == ConstituentMode::Fresh {
                        let pool = nssmf.pool(&record.location).expect("pool exists");
                        let units =
                            record.nf_ids.iter().filter_map(|id| pool.resource(id)).map(|nf| nf.capacity_units).sum();
                        (record.nf_ids.clone(), units)
                    } else {
                        (Vec::new(), 0)
                    };
                    actions.push(ConstituentAction {
                        nssi,
                        domain: planned.domain.clone(),
                        subnet: r.subnet,
                        location: r.location.clone(),
                        mode,
                        nf_ids,
                        units_allocated: units,
                        shared: record.shared,
                    });
                }
                Err(cause) => {
                    let rolled_back = actions.len();
                    rollback(domains, &nsi_id, &actions);
                    return Err(NsmfError::Provisioning {
                        subnet: r.subnet,
                        domain: planned.domain.clone(),
                        cause,
                        rolled_back,
                    });
                }
            }
        }

        self.next_id += 1;
        let records: Vec<_> = actions
            .iter()
            .map(|a| {
                let nssmf = domains.nssmf_for(&a.domain).expect("domain exists");
                nssmf.nssi(&a.nssi).expect("provisioned").clone()
            })
            .collect();
        let constituents = aggregate_multi_domain(&records.iter().collect::<Vec<_>>()).expect("three subnets");
        let mut nsi = Nsi::activated(
            nsi_id.clone(),
            req.tenant_slice_id.clone(),
            req.tenant_id.clone(),
            plan.scenario,
            plan.config_type,
            actions.iter().map(|a| a.nssi.clone()).collect(),
            self.domain.clone(),
            req.home_location.clone(),
        );
        nsi.serving_agreement = match &req.customer_group {
            CustomerGroup::OpenMnoSubscribers(mno) => Some(mno.clone()),
            CustomerGroup::OpenPublic => Some("public".to_owned()),
            CustomerGroup::Closed => None,
        };
        self.nsis.insert(nsi_id.clone(), nsi);
        Ok(Orchestration { nsi_id, actions, constituents })
    }

    pub fn advance_lifecycle(&mut self, id: &NsiId, event: LifecycleEvent) -> Result<LifecycleState, NsmfError> {
        let nsi = self.nsis.get_mut(id).ok_or_else(|| NsmfError::UnknownNsi(id.clone()))?;
        Ok(nsi.advance(event)?)
    }

    /// Terminates a deactivated NSI and releases all its constituents.
    pub fn terminate_nsi(&mut self, domains: &mut Domains<'_>, id: &NsiId) -> Result<TerminationReport, NsmfError> {
        let nsi = self.nsis.get_mut(id).ok_or_else(|| NsmfError::UnknownNsi(id.clone()))?;
        if nsi.state != LifecycleState::Deactivated {
            return Err(InvalidTransition { from: nsi.state, event: LifecycleEvent::Terminate }.into());
        }
        let mut report = TerminationReport { nsi: Some(id.clone()), ..Default::default() };
        let constituents = nsi.constituents.clone();
        for nssi in &constituents {
            let owner = domains.owner_of(nssi).ok_or_else(|| NsmfError::Release {
                nssi: nssi.clone(),
                cause: NssmfError::UnknownNssi(nssi.clone()),
            })?;
            let nssmf = domains.nssmf_for(&owner).expect("owner exists");
            let nf_ids = nssmf.nssi(nssi).map(|n| n.nf_ids.clone()).unwrap_or_default();
            match nssmf.release_nssi(nssi, id) {
                Ok(ReleaseOutcome::Terminated) => {
                    report.terminated_nssis.push(nssi.clone());
                    report.freed_nf_ids.extend(nf_ids);
                }
                Ok(ReleaseOutcome::Decremented) => report.decremented_nssis.push(nssi.clone()),
                Err(cause) => return Err(NsmfError::Release { nssi: nssi.clone(), cause }),
            }
        }
        nsi.advance(LifecycleEvent::Terminate)?;
        Ok(report)
    }
}

fn rollback(domains: &mut Domains<'_>, holder: &NsiId, actions: &[ConstituentAction]) {
    for action in actions.iter().rev() {
        let Some(nssmf) = domains.nssmf_for(&action.domain) else { continue };
        match action.mode {
            ConstituentMode::Fresh => nssmf.discard(&action.nssi),
            ConstituentMode::Attached => {
                let _ = nssmf.release_nssi(&action.nssi, holder);
            }
        }
    }
}
