//! Scenario files: strict JSON schema, loading and cross-reference checks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::csmf::{ingest_request, CsmfError, RawSliceRequest, SliceRequest, DEFAULT_STRICT_LATENCY_MS};
use crate::engine::{Engine, EngineConfig, EngineSetup};
use crate::ids::{is_valid_identifier, RequestId};
use crate::inventory::{DomainRef, InventoryError, LocationRef, NetworkFunction, NfPool};
use crate::mno::{MnoDomain, PolicyVerdict};
use crate::nsmf::{CustomerGroup, DeploymentScenario, NsiConfigType};
use crate::provider::ServiceAgreement;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub micro_operator: MicroOperatorSpec,
    #[serde(default)]
    pub mnos: Vec<MnoSpec>,
    pub tenants: Vec<TenantSpec>,
    #[serde(default)]
    pub agreements: Vec<ServiceAgreement>,
    pub requests: Vec<RawSliceRequest>,
    #[serde(default)]
    pub expectations: Vec<Expectation>,
    /// Requests whose approval is forced to a rejection.
    #[serde(default)]
    pub inject_rejections: Vec<String>,
    #[serde(default = "default_threshold")]
    pub latency_threshold_ms: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_STRICT_LATENCY_MS
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicroOperatorSpec {
    pub name: String,
    pub locations: Vec<LocationSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocationSpec {
    pub id: String,
    pub pool: Vec<NetworkFunction>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MnoSpec {
    pub name: String,
    pub location: String,
    pub pool: Vec<NetworkFunction>,
    /// Subscriber group to verdict; unlisted groups are denied.
    #[serde(default)]
    pub policy: BTreeMap<String, PolicyVerdict>,
    #[serde(default = "yes")]
    pub reachable: bool,
    #[serde(default = "yes")]
    pub grant_nssi: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TenantSpec {
    pub id: String,
    #[serde(default)]
    pub vertical: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedOutcome {
    Served,
    Rejected,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub request: String,
    pub outcome: ExpectedOutcome,
    #[serde(default)]
    pub reason: Option<String>,
    #[serde(default)]
    pub scenario: Option<DeploymentScenario>,
    #[serde(default)]
    pub config_type: Option<NsiConfigType>,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("request #{index}: {source}")]
    Request { index: usize, source: CsmfError },
    #[error("location {location}: {source}")]
    Inventory { location: String, source: InventoryError },
    #[error("{from} references undefined {kind} {id:?}")]
    DanglingReference { from: String, kind: &'static str, id: String },
}

impl ScenarioError {
    fn schema(msg: impl fmt::Display) -> Self {
        ScenarioError::Schema(msg.to_string())
    }
}

/// A parsed and cross-checked scenario, ready to run.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub requests: Vec<SliceRequest>,
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let spec: ScenarioSpec = serde_json::from_str(text).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => ScenarioError::Schema(e.to_string()),
        _ => ScenarioError::Parse(e.to_string()),
    })?;
    Scenario::from_spec(spec)
}

impl Scenario {
    pub fn from_spec(spec: ScenarioSpec) -> Result<Self, ScenarioError> {
        let dangling =
            |from: String, kind, id: &str| ScenarioError::DanglingReference { from, kind, id: id.to_owned() };
        let check_id = |what: &str, id: &str| {
            if is_valid_identifier(id) {
                Ok(())
            } else {
                Err(ScenarioError::schema(format!("{what} {id:?} is not a valid identifier")))
            }
        };
        let unique = |what: &str, ids: &mut BTreeSet<String>, id: &str| {
            if ids.insert(id.to_owned()) {
                Ok(())
            } else {
                Err(ScenarioError::schema(format!("duplicate {what} {id:?}")))
            }
        };

        if !(spec.latency_threshold_ms.is_finite() && spec.latency_threshold_ms > 0.0) {
            return Err(ScenarioError::schema("latency_threshold_ms must be positive"));
        }
        check_id("micro-operator", &spec.micro_operator.name)?;
        let mut locations = BTreeSet::new();
        for loc in &spec.micro_operator.locations {
            check_id("location", &loc.id)?;
            unique("location", &mut locations, &loc.id)?;
        }
        if locations.is_empty() {
            return Err(ScenarioError::schema("the micro-operator needs at least one location"));
        }
        let mut mnos = BTreeSet::new();
        for m in &spec.mnos {
            check_id("MNO", &m.name)?;
            check_id("MNO location", &m.location)?;
            if m.name == spec.micro_operator.name {
                return Err(ScenarioError::schema(format!("MNO {:?} clashes with the micro-operator name", m.name)));
            }
            unique("MNO", &mut mnos, &m.name)?;
        }
        let pools = spec.micro_operator.locations.iter().map(|l| &l.pool).chain(spec.mnos.iter().map(|m| &m.pool));
        for pool in pools {
            for nf in pool {
                check_id("NF", nf.id.as_str())?;
            }
        }
        let mut tenants = BTreeSet::new();
        for t in &spec.tenants {
            check_id("tenant", &t.id)?;
            unique("tenant", &mut tenants, &t.id)?;
        }
        let mut agreed = BTreeSet::new();
        for a in &spec.agreements {
            let id = a.tenant_id.as_str();
            if !tenants.contains(id) {
                return Err(dangling("agreement".to_owned(), "tenant", id));
            }
            unique("agreement for tenant", &mut agreed, id)?;
            if a.valid_from_tick > a.valid_until_tick {
                return Err(ScenarioError::schema(format!("agreement for {id} ends before it starts")));
            }
        }

        let mut requests = Vec::with_capacity(spec.requests.len());
        let mut request_ids = BTreeSet::new();
        for (index, raw) in spec.requests.iter().enumerate() {
            let req = ingest_request(raw).map_err(|source| ScenarioError::Request { index, source })?;
            let from = format!("request {}", req.tenant_slice_id);
            unique("request", &mut request_ids, req.tenant_slice_id.as_str())?;
            if !tenants.contains(req.tenant_id.as_str()) {
                return Err(dangling(from, "tenant", req.tenant_id.as_str()));
            }
            for loc in std::iter::once(&req.home_location).chain(&req.share_with_locations) {
                if !locations.contains(loc.as_str()) {
                    return Err(dangling(from, "location", loc.as_str()));
                }
            }
            let named_mno = match (&req.mno, &req.customer_group) {
                (Some(m), _) | (None, CustomerGroup::OpenMnoSubscribers(m)) => Some(m),
                _ => None,
            };
            if let Some(m) = named_mno {
                if !mnos.contains(m.as_str()) {
                    return Err(dangling(from, "MNO", m));
                }
            }
            requests.push(req);
        }
        for e in &spec.expectations {
            if !request_ids.contains(&e.request) {
                return Err(dangling("expectation".to_owned(), "request", &e.request));
            }
        }
        for r in &spec.inject_rejections {
            if !request_ids.contains(r) {
                return Err(dangling("inject_rejections".to_owned(), "request", r));
            }
        }
        let scenario = Scenario { spec, requests };
        scenario.pools()?;
        Ok(scenario)
    }

    pub fn tenant_count(&self) -> usize {
        self.spec.tenants.len()
    }

    fn pools(&self) -> Result<(Vec<NfPool>, Vec<MnoDomain>), ScenarioError> {
        fn inventory(location: &str) -> impl FnOnce(InventoryError) -> ScenarioError + '_ {
            move |source| ScenarioError::Inventory { location: location.to_owned(), source }
        }
        let uo = DomainRef::micro_operator(self.spec.micro_operator.name.clone());
        let uo_pools = self
            .spec
            .micro_operator
            .locations
            .iter()
            .map(|l| {
                let at = LocationRef { id: l.id.as_str().into(), domain: uo.clone() };
                NfPool::new(at, l.pool.iter().cloned()).map_err(inventory(&l.id))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mnos = self
            .spec
            .mnos
            .iter()
            .map(|m| {
                let domain = DomainRef::mno(m.name.clone());
                let at = LocationRef { id: m.location.as_str().into(), domain: domain.clone() };
                let pool = NfPool::new(at, m.pool.iter().cloned()).map_err(inventory(&m.location))?;
                Ok(MnoDomain::new(domain, pool, m.policy.clone(), m.reachable, m.grant_nssi))
            })
            .collect::<Result<Vec<_>, ScenarioError>>()?;
        Ok((uo_pools, mnos))
    }

    /// A fresh engine for this scenario.
    pub fn build_engine(&self, check_invariants: bool) -> Engine {
        let (uo_pools, mnos) = self.pools().expect("pools were validated on load");
        let mut engine = Engine::new(EngineSetup {
            micro_operator: self.spec.micro_operator.name.clone(),
            uo_pools,
            mnos,
            agreements: self.spec.agreements.clone(),
            config: EngineConfig { strict_latency_ms: self.spec.latency_threshold_ms, check_invariants },
        });
        for r in &self.spec.inject_rejections {
            engine.inject_rejection(RequestId::new(r.as_str()));
        }
        engine
    }

    pub fn expectation(&self, request: &RequestId) -> Option<&Expectation> {
        self.spec.expectations.iter().find(|e| e.request == request.as_str())
    }
}

/// Scenario files shipped with the crate, one per deployment scenario.
pub const BUNDLED: [(&str, &str); 6] = [
    ("closed_dep_a", include_str!("../fixtures/closed_dep_a.json")),
    ("closed_dep_b", include_str!("../fixtures/closed_dep_b.json")),
    ("mno_open", include_str!("../fixtures/mno_open.json")),
    ("public_open", include_str!("../fixtures/public_open.json")),
    ("mixed_option_a", include_str!("../fixtures/mixed_option_a.json")),
    ("mixed_option_b", include_str!("../fixtures/mixed_option_b.json")),
];

pub fn bundled(name: &str) -> Option<Scenario> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(n, text)| parse_scenario(text).unwrap_or_else(|e| panic!("bundled scenario {n} is invalid: {e}")))
}
