//! Stub of an external MNO domain with scriptable failure modes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{LocationId, NsiId, NssiId, RequestId, TenantId};
use crate::inventory::{DomainRef, NfPool, SubnetKind};
use crate::lifecycle::{InvalidTransition, LifecycleEvent, LifecycleState};
use crate::nsmf::{DeploymentScenario, NetworkSliceRequirements, Nsi, NsiConfigType, TerminationReport};
use crate::nssmf::{Nssmf, NssmfError, ReleaseOutcome, SubnetRequirement};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyVerdict {
    Allow,
    Deny,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MnoError {
    #[error("MNO {0} is unreachable")]
    Unreachable(String),
    #[error("MNO {0} refused to grant an NSSI")]
    GrantRefused(String),
    #[error("unknown MNO {0}")]
    Unknown(String),
    #[error(transparent)]
    Nssmf(#[from] NssmfError),
    #[error(transparent)]
    InvalidTransition(#[from] InvalidTransition),
    #[error("unknown MNO NSI {0}")]
    UnknownNsi(NsiId),
}

impl MnoError {
    pub fn reason_code(&self) -> &'static str {
        match self {
            MnoError::Unreachable(_) => "mno_unreachable",
            MnoError::GrantRefused(_) => "grant_refused",
            MnoError::Unknown(_) => "unknown_mno",
            MnoError::Nssmf(e) if e.is_insufficient() => "insufficient_resources",
            MnoError::Nssmf(_) => "nssmf_error",
            MnoError::InvalidTransition(_) => "invalid_transition",
            MnoError::UnknownNsi(_) => "unknown_nsi",
        }
    }
}

#[derive(Clone, Debug)]
pub struct MnoDomain {
    nssmf: Nssmf,
    location: LocationId,
    policy_table: BTreeMap<String, PolicyVerdict>,
    reachable: bool,
    grant_nssi: bool,
    nsis: BTreeMap<NsiId, Nsi>,
    next_nsi: u64,
}

impl MnoDomain {
    /// `pool` must sit at a location owned by `domain`.
    pub fn new(
        domain: DomainRef,
        pool: NfPool,
        policy_table: BTreeMap<String, PolicyVerdict>,
        reachable: bool,
        grant_nssi: bool,
    ) -> Self {
        assert!(domain.is_mno(), "MNO stub needs an MNO domain");
        let location = pool.location().id.clone();
        Self {
            nssmf: Nssmf::new(domain, [pool]),
            location,
            policy_table,
            reachable,
            grant_nssi,
            nsis: BTreeMap::new(),
            next_nsi: 1,
        }
    }

    pub fn domain(&self) -> &DomainRef {
        self.nssmf.domain()
    }

    pub fn name(&self) -> &str {
        &self.nssmf.domain().name
    }

    pub fn location(&self) -> &LocationId {
        &self.location
    }

    pub fn nssmf(&self) -> &Nssmf {
        &self.nssmf
    }

    pub(crate) fn nssmf_mut(&mut self) -> &mut Nssmf {
        &mut self.nssmf
    }

    pub fn nsis(&self) -> &BTreeMap<NsiId, Nsi> {
        &self.nsis
    }

    pub fn is_reachable(&self) -> bool {
        self.reachable
    }

    pub fn set_reachable(&mut self, reachable: bool) {
        self.reachable = reachable;
    }

    pub fn set_grant_nssi(&mut self, grant: bool) {
        self.grant_nssi = grant;
    }

    fn ensure_reachable(&self) -> Result<(), MnoError> {
        if self.reachable {
            Ok(())
        } else {
            Err(MnoError::Unreachable(self.name().to_owned()))
        }
    }

    /// Provisions an MNO-owned NSSI for a micro-operator NSI.
    pub fn provide_nssi(&mut self, req: &SubnetRequirement, holder: &NsiId) -> Result<NssiId, MnoError> {
        self.ensure_reachable()?;
        if !self.grant_nssi {
            return Err(MnoError::GrantRefused(self.name().to_owned()));
        }
        let mut local = req.clone();
        local.location = self.location.clone();
        Ok(self.nssmf.provision_nssi(&local, holder)?)
    }

    /// Builds a complete MNO NSI (AN, CN and DN from the MNO pool).
    pub fn provide_nsi(
        &mut self,
        request_id: &RequestId,
        tenant_id: &TenantId,
        reqs: &NetworkSliceRequirements,
        profile_key: &str,
    ) -> Result<Nsi, MnoError> {
        self.ensure_reachable()?;
        let id = NsiId::new(format!("{}/nsi-{}", self.name(), self.next_nsi));
        let mut constituents = Vec::new();
        for subnet in SubnetKind::ALL {
            let req = SubnetRequirement {
                subnet,
                units_needed: reqs.throughput_units,
                location: self.location.clone(),
                shareable: false,
                profile_key: profile_key.to_owned(),
            };
            match self.nssmf.provision_nssi(&req, &id) {
                Ok(nssi) => constituents.push(nssi),
                Err(e) => {
                    for nssi in &constituents {
                        self.nssmf.discard(nssi);
                    }
                    return Err(e.into());
                }
            }
        }
        self.next_nsi += 1;
        let nsi = Nsi::activated(
            id.clone(),
            request_id.clone(),
            tenant_id.clone(),
            DeploymentScenario::MixedOptionB,
            NsiConfigType::Type1,
            constituents,
            self.domain().clone(),
            self.location.clone(),
        );
        self.nsis.insert(id, nsi.clone());
        Ok(nsi)
    }

    /// Closed-world policy lookup: a missing group is denied.
    pub fn confirm_policy(&self, subscriber_group: &str) -> Result<PolicyVerdict, MnoError> {
        self.ensure_reachable()?;
        Ok(self.policy_table.get(subscriber_group).copied().unwrap_or(PolicyVerdict::Deny))
    }

    pub fn advance_lifecycle(&mut self, id: &NsiId, event: LifecycleEvent) -> Result<LifecycleState, MnoError> {
        let nsi = self.nsis.get_mut(id).ok_or_else(|| MnoError::UnknownNsi(id.clone()))?;
        Ok(nsi.advance(event)?)
    }

    pub fn terminate_nsi(&mut self, id: &NsiId) -> Result<TerminationReport, MnoError> {
        let nsi = self.nsis.get_mut(id).ok_or_else(|| MnoError::UnknownNsi(id.clone()))?;
        if nsi.state != LifecycleState::Deactivated {
            return Err(InvalidTransition { from: nsi.state, event: LifecycleEvent::Terminate }.into());
        }
        let mut report = TerminationReport { nsi: Some(id.clone()), ..Default::default() };
        for nssi in nsi.constituents.clone() {
            let nf_ids = self.nssmf.nssi(&nssi).map(|n| n.nf_ids.clone()).unwrap_or_default();
            match self.nssmf.release_nssi(&nssi, id)? {
                ReleaseOutcome::Terminated => {
                    report.terminated_nssis.push(nssi);
                    report.freed_nf_ids.extend(nf_ids);
                }
                ReleaseOutcome::Decremented => report.decremented_nssis.push(nssi),
            }
        }
        nsi.advance(LifecycleEvent::Terminate)?;
        Ok(report)
    }
}
