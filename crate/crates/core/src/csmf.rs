//! Communication-service management: request intake and translation, and
//! handing activated NSIs back to tenants as communication services.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{is_valid_identifier, LocationId, NsiId, RequestId, ServiceId, TenantId};
use crate::nsmf::{CustomerGroup, DepBBridge, LatencyClass, NetworkSliceRequirements, Nsi, SharingAgreement};

pub const DEFAULT_STRICT_LATENCY_MS: f64 = 10.0;
pub const DEFAULT_PROFILE_KEY: &str = "default";

/// A tenant's slice request as it appears in a scenario file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSliceRequest {
    pub tenant_slice_id: Option<String>,
    pub tenant_id: Option<String>,
    pub latency_ms: Option<f64>,
    pub throughput_units: Option<u32>,
    pub duration_ticks: Option<u64>,
    #[serde(default)]
    pub mobility: bool,
    pub customer_group: Option<CustomerGroup>,
    pub sharing_agreement: Option<SharingAgreement>,
    #[serde(default)]
    pub share_with_locations: Vec<String>,
    pub home_location: Option<String>,
    #[serde(default)]
    pub needs_mno_wide_area: bool,
    #[serde(default)]
    pub mno_needs_uo_access: bool,
    /// Served by a mixed (closed + open) micro-operator network.
    #[serde(default)]
    pub mixed_network: bool,
    #[serde(default)]
    pub bridge: DepBBridge,
    /// MNO to deal with, when more than one is configured.
    pub mno: Option<String>,
    pub profile_key: Option<String>,
    /// Group whose policy the MNO confirms for MNO-open slices; defaults to the tenant id.
    pub subscriber_group: Option<String>,
}

/// A validated slice request. `tenant_slice_id` is also the request id.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SliceRequest {
    pub tenant_slice_id: RequestId,
    pub tenant_id: TenantId,
    pub latency_ms: f64,
    pub throughput_units: u32,
    pub duration_ticks: u64,
    pub mobility: bool,
    pub customer_group: CustomerGroup,
    pub sharing_agreement: SharingAgreement,
    pub share_with_locations: BTreeSet<LocationId>,
    pub home_location: LocationId,
    pub needs_mno_wide_area: bool,
    pub mno_needs_uo_access: bool,
    pub mixed_network: bool,
    pub bridge: DepBBridge,
    pub mno: Option<String>,
    pub profile_key: String,
    pub subscriber_group: String,
}

impl SliceRequest {
    pub fn requests_sharing(&self) -> bool {
        self.sharing_agreement != SharingAgreement::None
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FieldIssue {
    pub field: &'static str,
    pub problem: String,
}

impl fmt::Display for FieldIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.problem)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CsmfError {
    #[error("malformed request: {}", join_issues(.0))]
    MalformedRequest(Vec<FieldIssue>),
    #[error("NSI {nsi} belongs to tenant {owner}, not {expected}")]
    TenantMismatch { nsi: NsiId, owner: TenantId, expected: TenantId },
    #[error("NSI {0} is not activated")]
    InactiveNsi(NsiId),
    #[error("a service needs one NSI, or two from distinct domains")]
    BadComposition,
    #[error("unknown service {0}")]
    UnknownService(ServiceId),
}

fn join_issues(issues: &[FieldIssue]) -> String {
    issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Validates a raw record, reporting every problem found.
pub fn ingest_request(raw: &RawSliceRequest) -> Result<SliceRequest, CsmfError> {
    let mut issues = Vec::new();
    let mut missing = |field: &'static str| {
        issues.push(FieldIssue { field, problem: "missing".to_owned() });
    };
    let tenant_slice_id = raw.tenant_slice_id.clone();
    let tenant_id = raw.tenant_id.clone();
    let home = raw.home_location.clone();
    if tenant_slice_id.is_none() {
        missing("tenant_slice_id");
    }
    if tenant_id.is_none() {
        missing("tenant_id");
    }
    if raw.latency_ms.is_none() {
        missing("latency_ms");
    }
    if raw.throughput_units.is_none() {
        missing("throughput_units");
    }
    if raw.duration_ticks.is_none() {
        missing("duration_ticks");
    }
    if raw.customer_group.is_none() {
        missing("customer_group");
    }
    if raw.sharing_agreement.is_none() {
        missing("sharing_agreement");
    }
    if home.is_none() {
        missing("home_location");
    }

    let mut bad = |field: &'static str, problem: String| issues.push(FieldIssue { field, problem });
    for (field, value) in [
        ("tenant_slice_id", tenant_slice_id.as_deref()),
        ("tenant_id", tenant_id.as_deref()),
        ("home_location", home.as_deref()),
        ("profile_key", raw.profile_key.as_deref()),
        ("subscriber_group", raw.subscriber_group.as_deref()),
        ("mno", raw.mno.as_deref()),
    ] {
        if let Some(v) = value {
            if !is_valid_identifier(v) {
                bad(field, format!("{v:?} is not a valid identifier"));
            }
        }
    }
    if let Some(CustomerGroup::OpenMnoSubscribers(name)) = &raw.customer_group {
        if !is_valid_identifier(name) {
            bad("customer_group", format!("{name:?} is not a valid MNO name"));
        }
    }
    for loc in &raw.share_with_locations {
        if !is_valid_identifier(loc) {
            bad("share_with_locations", format!("{loc:?} is not a valid identifier"));
        }
    }
    if let Some(l) = raw.latency_ms {
        if !(l.is_finite() && l > 0.0) {
            bad("latency_ms", format!("must be a positive number, got {l}"));
        }
    }
    if raw.throughput_units == Some(0) {
        bad("throughput_units", "must be at least 1".to_owned());
    }
    if raw.duration_ticks == Some(0) {
        bad("duration_ticks", "must be at least 1".to_owned());
    }
    let others = || raw.share_with_locations.iter().filter(|l| Some(*l) != home.as_ref()).count();
    match raw.sharing_agreement {
        Some(SharingAgreement::CrossLocation) if raw.share_with_locations.is_empty() => {
            bad("share_with_locations", "cross-location sharing needs at least one location".to_owned())
        }
        Some(SharingAgreement::WithinLocation) if others() > 0 => {
            bad("share_with_locations", "within-location sharing cannot name other locations".to_owned())
        }
        _ => {}
    }

    if !issues.is_empty() {
        return Err(CsmfError::MalformedRequest(issues));
    }
    let tenant_id = TenantId::new(tenant_id.unwrap());
    Ok(SliceRequest {
        tenant_slice_id: RequestId::new(tenant_slice_id.unwrap()),
        subscriber_group: raw.subscriber_group.clone().unwrap_or_else(|| tenant_id.to_string()),
        tenant_id,
        latency_ms: raw.latency_ms.unwrap(),
        throughput_units: raw.throughput_units.unwrap(),
        duration_ticks: raw.duration_ticks.unwrap(),
        mobility: raw.mobility,
        customer_group: raw.customer_group.clone().unwrap(),
        sharing_agreement: raw.sharing_agreement.unwrap(),
        share_with_locations: raw.share_with_locations.iter().map(|s| LocationId::new(s.as_str())).collect(),
        home_location: LocationId::new(home.unwrap()),
        needs_mno_wide_area: raw.needs_mno_wide_area,
        mno_needs_uo_access: raw.mno_needs_uo_access,
        mixed_network: raw.mixed_network,
        bridge: raw.bridge,
        mno: raw.mno.clone(),
        profile_key: raw.profile_key.clone().unwrap_or_else(|| DEFAULT_PROFILE_KEY.to_owned()),
    })
}

/// Communication requirements to network-slice requirements. Pure.
pub fn translate_request(req: &SliceRequest, strict_latency_ms: f64) -> NetworkSliceRequirements {
    let mut locations = req.share_with_locations.clone();
    locations.insert(req.home_location.clone());
    NetworkSliceRequirements {
        latency_class: if req.latency_ms <= strict_latency_ms { LatencyClass::Strict } else { LatencyClass::Relaxed },
        throughput_units: req.throughput_units,
        sharing: req.sharing_agreement,
        mobility: req.mobility,
        locations,
        home_location: req.home_location.clone(),
        duration_ticks: req.duration_ticks,
        external_access: req.needs_mno_wide_area,
        customer_group: req.customer_group.clone(),
        bridge: req.bridge,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ServiceStatus {
    Active,
    Terminated,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CommunicationService {
    pub id: ServiceId,
    pub tenant_id: TenantId,
    pub request_id: RequestId,
    pub nsi_ids: Vec<NsiId>,
    pub status: ServiceStatus,
}

/// Wraps one activated NSI (or a micro-operator + MNO pair) as a service.
pub fn assemble_service(
    nsis: &[&Nsi],
    tenant_id: &TenantId,
    request_id: &RequestId,
) -> Result<CommunicationService, CsmfError> {
    for nsi in nsis {
        if nsi.tenant_id != *tenant_id {
            return Err(CsmfError::TenantMismatch {
                nsi: nsi.id.clone(),
                owner: nsi.tenant_id.clone(),
                expected: tenant_id.clone(),
            });
        }
        if !nsi.state.is_live() {
            return Err(CsmfError::InactiveNsi(nsi.id.clone()));
        }
    }
    match nsis {
        [_] => {}
        [a, b] if a.owner_domain != b.owner_domain => {}
        _ => return Err(CsmfError::BadComposition),
    }
    Ok(CommunicationService {
        id: ServiceId::new(format!("svc-{request_id}")),
        tenant_id: tenant_id.clone(),
        request_id: request_id.clone(),
        nsi_ids: nsis.iter().map(|n| n.id.clone()).collect(),
        status: ServiceStatus::Active,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Delivery {
    pub service: ServiceId,
    pub tenant_id: TenantId,
    /// False when the tenant had already been marked served.
    pub first_delivery: bool,
}

/// Registry of communication services and served tenants.
#[derive(Clone, Debug)]
pub struct Csmf {
    strict_latency_ms: f64,
    services: BTreeMap<ServiceId, CommunicationService>,
    served: BTreeSet<ServiceId>,
}

impl Default for Csmf {
    fn default() -> Self {
        Self::new(DEFAULT_STRICT_LATENCY_MS)
    }
}

impl Csmf {
    pub fn new(strict_latency_ms: f64) -> Self {
        Self { strict_latency_ms, services: BTreeMap::new(), served: BTreeSet::new() }
    }

    pub fn strict_latency_ms(&self) -> f64 {
        self.strict_latency_ms
    }

    pub fn translate(&self, req: &SliceRequest) -> NetworkSliceRequirements {
        translate_request(req, self.strict_latency_ms)
    }

    pub fn services(&self) -> &BTreeMap<ServiceId, CommunicationService> {
        &self.services
    }

    pub fn service(&self, id: &ServiceId) -> Option<&CommunicationService> {
        self.services.get(id)
    }

    pub fn register(&mut self, service: CommunicationService) -> ServiceId {
        let id = service.id.clone();
        self.services.insert(id.clone(), service);
        id
    }

    /// Marks the tenant served. Idempotent; every call yields a delivery.
    pub fn notify_tenant(&mut self, id: &ServiceId) -> Result<Delivery, CsmfError> {
        let svc = self.services.get(id).ok_or_else(|| CsmfError::UnknownService(id.clone()))?;
        if svc.status != ServiceStatus::Active {
            return Err(CsmfError::UnknownService(id.clone()));
        }
        let first_delivery = self.served.insert(id.clone());
        Ok(Delivery { service: id.clone(), tenant_id: svc.tenant_id.clone(), first_delivery })
    }

    pub fn is_served(&self, id: &ServiceId) -> bool {
        self.served.contains(id)
    }

    /// UE attach is allowed only on a served, active service.
    pub fn ue_attach_permitted(&self, id: &ServiceId) -> bool {
        self.is_served(id) && self.services.get(id).is_some_and(|s| s.status == ServiceStatus::Active)
    }

    /// Termination notification from the NSMF for one of the service's NSIs.
    pub fn on_nsi_terminated(&mut self, nsi: &NsiId) -> Vec<ServiceId> {
        let mut flipped = Vec::new();
        for svc in self.services.values_mut() {
            if svc.status == ServiceStatus::Active && svc.nsi_ids.contains(nsi) {
                svc.status = ServiceStatus::Terminated;
                flipped.push(svc.id.clone());
            }
        }
        flipped
    }

    pub fn active_count(&self) -> usize {
        self.services.values().filter(|s| s.status == ServiceStatus::Active).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inventory::DomainRef;
    use crate::lifecycle::LifecycleEvent;
    use crate::nsmf::{DeploymentScenario, NsiConfigType};

    pub(crate) fn closed_raw() -> RawSliceRequest {
        RawSliceRequest {
            tenant_slice_id: Some("t1-s1".into()),
            tenant_id: Some("t1".into()),
            latency_ms: Some(5.0),
            throughput_units: Some(1),
            duration_ticks: Some(100),
            customer_group: Some(CustomerGroup::Closed),
            sharing_agreement: Some(SharingAgreement::None),
            home_location: Some("L1".into()),
            ..Default::default()
        }
    }

    fn nsi(id: &str, tenant: &str, domain: DomainRef) -> Nsi {
        Nsi::activated(
            id.into(),
            "r".into(),
            tenant.into(),
            DeploymentScenario::ClosedDepA,
            NsiConfigType::Type1,
            vec!["x".into()],
            domain,
            "L1".into(),
        )
    }

    #[test]
    fn complete_record_is_accepted() {
        let req = ingest_request(&closed_raw()).unwrap();
        assert_eq!(req.tenant_slice_id, RequestId::new("t1-s1"));
        assert_eq!(req.profile_key, DEFAULT_PROFILE_KEY);
        assert_eq!(req.subscriber_group, "t1");
    }

    #[test]
    fn missing_slice_id_is_malformed() {
        let mut raw = closed_raw();
        raw.tenant_slice_id = None;
        match ingest_request(&raw) {
            Err(CsmfError::MalformedRequest(issues)) => {
                assert_eq!(issues.len(), 1);
                assert_eq!(issues[0].field, "tenant_slice_id");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cross_location_without_locations_is_malformed() {
        let mut raw = closed_raw();
        raw.sharing_agreement = Some(SharingAgreement::CrossLocation);
        assert!(
            matches!(ingest_request(&raw), Err(CsmfError::MalformedRequest(i)) if i[0].field == "share_with_locations")
        );
    }

    #[test]
    fn all_problems_are_reported_together() {
        let raw = RawSliceRequest { latency_ms: Some(-1.0), throughput_units: Some(0), ..Default::default() };
        let Err(CsmfError::MalformedRequest(issues)) = ingest_request(&raw) else { panic!() };
        let fields: Vec<_> = issues.iter().map(|i| i.field).collect();
        assert!(fields.contains(&"tenant_slice_id"));
        assert!(fields.contains(&"latency_ms"));
        assert!(fields.contains(&"throughput_units"));
        assert!(fields.contains(&"home_location"));
    }

    #[test]
    fn translation_examples() {
        let mut req = ingest_request(&closed_raw()).unwrap();
        assert_eq!(translate_request(&req, 10.0).latency_class, LatencyClass::Strict);
        req.latency_ms = 10.0;
        assert_eq!(translate_request(&req, 10.0).latency_class, LatencyClass::Strict);
        req.latency_ms = 50.0;
        assert_eq!(translate_request(&req, 10.0).latency_class, LatencyClass::Relaxed);
        req.share_with_locations.insert("L2".into());
        let r = translate_request(&req, 10.0);
        assert_eq!(r.locations, ["L1".into(), "L2".into()].into());
        assert_eq!(r, translate_request(&req, 10.0));
    }

    #[test]
    fn single_nsi_service() {
        let n = nsi("nsi-1", "t1", DomainRef::micro_operator("uo"));
        let svc = assemble_service(&[&n], &"t1".into(), &"r".into()).unwrap();
        assert_eq!(svc.nsi_ids.len(), 1);
        assert_eq!(svc.status, ServiceStatus::Active);
    }

    #[test]
    fn two_domain_service() {
        let a = nsi("nsi-1", "t1", DomainRef::micro_operator("uo"));
        let b = nsi("mno1/nsi-1", "t1", DomainRef::mno("mno1"));
        let svc = assemble_service(&[&a, &b], &"t1".into(), &"r".into()).unwrap();
        assert_eq!(svc.nsi_ids.len(), 2);
        let c = nsi("nsi-2", "t1", DomainRef::micro_operator("uo"));
        assert_eq!(assemble_service(&[&a, &c], &"t1".into(), &"r".into()), Err(CsmfError::BadComposition));
        assert_eq!(assemble_service(&[], &"t1".into(), &"r".into()), Err(CsmfError::BadComposition));
    }

    #[test]
    fn foreign_or_inactive_nsi_is_refused() {
        let n = nsi("nsi-1", "t2", DomainRef::micro_operator("uo"));
        assert!(matches!(assemble_service(&[&n], &"t1".into(), &"r".into()), Err(CsmfError::TenantMismatch { .. })));
        let mut n = nsi("nsi-1", "t1", DomainRef::micro_operator("uo"));
        n.advance(LifecycleEvent::Deactivate).unwrap();
        assert_eq!(assemble_service(&[&n], &"t1".into(), &"r".into()), Err(CsmfError::InactiveNsi("nsi-1".into())));
    }

    #[test]
    fn notification_is_idempotent_and_termination_blocks_attach() {
        let mut csmf = Csmf::default();
        let n = nsi("nsi-1", "t1", DomainRef::micro_operator("uo"));
        let id = csmf.register(assemble_service(&[&n], &"t1".into(), &"r".into()).unwrap());
        assert!(!csmf.ue_attach_permitted(&id));
        assert!(csmf.notify_tenant(&id).unwrap().first_delivery);
        assert!(!csmf.notify_tenant(&id).unwrap().first_delivery);
        assert!(csmf.ue_attach_permitted(&id));
        assert_eq!(csmf.on_nsi_terminated(&"nsi-1".into()), vec![id.clone()]);
        assert!(!csmf.ue_attach_permitted(&id));
        assert!(csmf.notify_tenant(&id).is_err());
        assert_eq!(csmf.active_count(), 0);
    }
}
