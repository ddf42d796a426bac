//! World-state invariants, checked after every event when enabled.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::Engine;
use crate::csmf::ServiceStatus;
use crate::lifecycle::{is_legal_path, LifecycleState};
use crate::nsmf::{DeploymentScenario, NsiConfigType};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InvariantViolation {
    pub invariant: &'static str,
    pub detail: String,
    /// `request#seq` of the event after which the check failed, if any.
    pub context: String,
}

impl fmt::Display for InvariantViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.context.is_empty() {
            write!(f, "{}: {}", self.invariant, self.detail)
        } else {
            write!(f, "{} at {}: {}", self.invariant, self.context, self.detail)
        }
    }
}

pub const POOL_BALANCE: &str = "pool_balance";
pub const ALLOCATION_CONSISTENCY: &str = "allocation_consistency";
pub const REF_COUNT: &str = "ref_count";
pub const NF_DISJOINT: &str = "nf_disjoint";
pub const TYPE1_ISOLATION: &str = "type1_isolation";
pub const TYPE3_WITNESS: &str = "type3_witness";
pub const DEP_A_LOCAL: &str = "dep_a_local";
pub const LIFECYCLE_PATH: &str = "lifecycle_path";
pub const SERVICE_BINDING: &str = "service_binding";

/// Runs every invariant over the current world and reports all failures.
pub fn check_world(engine: &Engine) -> Vec<InvariantViolation> {
    let mut out = Vec::new();
    let mut fail =
        |invariant, detail: String| out.push(InvariantViolation { invariant, detail, context: String::new() });

    for (key, snap) in engine.pool_snapshots() {
        if !snap.balanced() {
            fail(POOL_BALANCE, format!("pool {key} does not balance"));
        }
    }

    for nssmf in engine.nssmfs() {
        for pool in nssmf.pools().values() {
            for (nf, holder) in pool.allocations() {
                match nssmf.nssi(holder) {
                    Some(n) if n.state == LifecycleState::Activated && n.nf_ids.contains(nf) => {}
                    _ => fail(ALLOCATION_CONSISTENCY, format!("{nf} allocated to {holder}, which does not hold it")),
                }
            }
        }
        let mut seen = BTreeSet::new();
        for nssi in nssmf.nssis().values() {
            let pool = nssmf.pool(&nssi.location);
            if nssi.state == LifecycleState::Activated {
                for nf in &nssi.nf_ids {
                    if pool.and_then(|p| p.holder_of(nf)) != Some(&nssi.id) {
                        fail(ALLOCATION_CONSISTENCY, format!("{} lists {nf} but the pool disagrees", nssi.id));
                    }
                    if !seen.insert(nf.clone()) {
                        fail(NF_DISJOINT, format!("{nf} appears in more than one live NSSI"));
                    }
                }
                if nssi.holders.is_empty() {
                    fail(REF_COUNT, format!("{} is active with no holders", nssi.id));
                }
                if !nssi.shared && nssi.holders.len() > 1 {
                    fail(REF_COUNT, format!("{} is exclusive but has {} holders", nssi.id, nssi.holders.len()));
                }
            } else if !nssi.holders.is_empty() {
                fail(REF_COUNT, format!("{} is {} but still held", nssi.id, nssi.state));
            }
            for holder in &nssi.holders {
                match engine.find_nsi(holder) {
                    Some(nsi) if nsi.constituents.contains(&nssi.id) && nsi.state != LifecycleState::Terminated => {}
                    _ => fail(REF_COUNT, format!("{} is held by {holder}, which does not reference it", nssi.id)),
                }
            }
        }
    }

    for nsi in engine.all_nsis() {
        if !is_legal_path(&nsi.history) || nsi.history.last() != Some(&nsi.state) {
            fail(LIFECYCLE_PATH, format!("{} has an illegal history", nsi.id));
        }
        if nsi.state == LifecycleState::Terminated {
            continue;
        }
        let members: Vec<_> = nsi.constituents.iter().map(|id| (id, engine.find_nssi(id))).collect();
        for (id, nssi) in &members {
            match nssi {
                Some(n) if n.holders.contains(&nsi.id) && n.state == LifecycleState::Activated => {}
                _ => fail(REF_COUNT, format!("{} references {id}, which does not hold it", nsi.id)),
            }
        }
        let mno_members = members.iter().filter(|(_, n)| n.is_some_and(|n| n.owner_domain.is_mno())).count();
        let external = members.iter().any(|(_, n)| n.is_some_and(|n| n.owner_domain != nsi.owner_domain));
        if nsi.config_type == NsiConfigType::Type1 {
            for (id, n) in &members {
                if n.is_some_and(|n| n.shared || n.holders.len() != 1) {
                    fail(TYPE1_ISOLATION, format!("type1 {} shares {id}", nsi.id));
                }
            }
        }
        if (nsi.config_type == NsiConfigType::Type3) != external {
            fail(TYPE3_WITNESS, format!("{} is {} but external constituents = {external}", nsi.id, nsi.config_type));
        }
        if nsi.scenario == DeploymentScenario::ClosedDepA && mno_members > 0 {
            fail(DEP_A_LOCAL, format!("{} draws {mno_members} MNO NSSIs", nsi.id));
        }
    }

    for svc in engine.csmf().services().values() {
        if svc.status != ServiceStatus::Active {
            continue;
        }
        for id in &svc.nsi_ids {
            match engine.find_nsi(id) {
                Some(nsi) if nsi.state.is_live() && nsi.tenant_id == svc.tenant_id => {}
                _ => {
                    fail(SERVICE_BINDING, format!("{} is bound to {id}, which is not a live NSI of its tenant", svc.id))
                }
            }
        }
    }
    out
}
