//! The network provider's approval gate.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::csmf::SliceRequest;
use crate::ids::{RequestId, TenantId};
use crate::mno::{MnoDomain, MnoError, PolicyVerdict};
use crate::nsmf::DeploymentScenario;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceAgreement {
    pub tenant_id: TenantId,
    pub valid_from_tick: u64,
    pub valid_until_tick: u64,
    pub allowed_scenarios: BTreeSet<DeploymentScenario>,
    pub sharing_permitted: bool,
    pub charging_ok: bool,
    pub subscription_ok: bool,
}

impl ServiceAgreement {
    pub fn covers(&self, tick: u64) -> bool {
        (self.valid_from_tick..=self.valid_until_tick).contains(&tick)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    NoAgreement,
    NotYetValid,
    Expired,
    ScenarioNotAllowed,
    ChargingRefused,
    SubscriptionInvalid,
    SharingForbidden,
    MnoPolicyDenied,
    MnoUnreachable,
    Unclassifiable,
    /// Rejection forced from outside the policy, e.g. by a test harness.
    Injected,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::NoAgreement => "no_agreement",
            RejectReason::NotYetValid => "not_yet_valid",
            RejectReason::Expired => "expired",
            RejectReason::ScenarioNotAllowed => "scenario_not_allowed",
            RejectReason::ChargingRefused => "charging_refused",
            RejectReason::SubscriptionInvalid => "subscription_invalid",
            RejectReason::SharingForbidden => "sharing_forbidden",
            RejectReason::MnoPolicyDenied => "mno_policy_denied",
            RejectReason::MnoUnreachable => "mno_unreachable",
            RejectReason::Unclassifiable => "unclassifiable",
            RejectReason::Injected => "injected",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Approved,
    Rejected(RejectReason),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ApprovalDecision {
    pub request_id: RequestId,
    pub verdict: Verdict,
    pub decided_at_tick: u64,
}

impl ApprovalDecision {
    pub fn is_approved(&self) -> bool {
        self.verdict == Verdict::Approved
    }
}

/// Checks validity, scenario, charging, subscription and sharing, in that
/// order, and reports the first failure.
pub fn approve_request(
    req: &SliceRequest,
    scenario: DeploymentScenario,
    agreement: Option<&ServiceAgreement>,
    now_tick: u64,
) -> ApprovalDecision {
    let decide =
        |verdict| ApprovalDecision { request_id: req.tenant_slice_id.clone(), verdict, decided_at_tick: now_tick };
    let Some(a) = agreement else {
        return decide(Verdict::Rejected(RejectReason::NoAgreement));
    };
    let failure = if now_tick < a.valid_from_tick {
        Some(RejectReason::NotYetValid)
    } else if now_tick > a.valid_until_tick {
        Some(RejectReason::Expired)
    } else if !a.allowed_scenarios.contains(&scenario) {
        Some(RejectReason::ScenarioNotAllowed)
    } else if !a.charging_ok {
        Some(RejectReason::ChargingRefused)
    } else if !a.subscription_ok {
        Some(RejectReason::SubscriptionInvalid)
    } else if req.requests_sharing() && !a.sharing_permitted {
        Some(RejectReason::SharingForbidden)
    } else {
        None
    };
    decide(failure.map_or(Verdict::Approved, Verdict::Rejected))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyConfirmation {
    Confirmed,
    Denied,
}

/// Asks the MNO whether it accepts the subscriber group.
pub fn confirm_subscriber_policy(mno: &MnoDomain, subscriber_group: &str) -> Result<PolicyConfirmation, MnoError> {
    Ok(match mno.confirm_policy(subscriber_group)? {
        PolicyVerdict::Allow => PolicyConfirmation::Confirmed,
        PolicyVerdict::Deny => PolicyConfirmation::Denied,
    })
}

/// Agreement registry plus the decision log for one run.
#[derive(Clone, Debug, Default)]
pub struct Provider {
    agreements: BTreeMap<TenantId, ServiceAgreement>,
    decisions: BTreeMap<RequestId, ApprovalDecision>,
}

impl Provider {
    pub fn new(agreements: impl IntoIterator<Item = ServiceAgreement>) -> Self {
        Self {
            agreements: agreements.into_iter().map(|a| (a.tenant_id.clone(), a)).collect(),
            decisions: BTreeMap::new(),
        }
    }

    pub fn agreement(&self, tenant: &TenantId) -> Option<&ServiceAgreement> {
        self.agreements.get(tenant)
    }

    pub fn decisions(&self) -> &BTreeMap<RequestId, ApprovalDecision> {
        &self.decisions
    }

    /// Records the one decision for a request; a second one is refused.
    pub fn record(&mut self, decision: ApprovalDecision) -> Result<(), ApprovalDecision> {
        if let Some(existing) = self.decisions.get(&decision.request_id) {
            return Err(existing.clone());
        }
        self.decisions.insert(decision.request_id.clone(), decision);
        Ok(())
    }
}
