//! NSSI provisioning, sharing and release on top of NF pools.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::ids::{LocationId, NfId, NsiId, NssiId};
use crate::inventory::{DomainRef, InventoryError, NfPool, PoolSnapshot, SubnetKind};
use crate::lifecycle::LifecycleState;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SubnetRequirement {
    pub subnet: SubnetKind,
    pub units_needed: u32,
    pub location: LocationId,
    pub shareable: bool,
    /// Equivalence class for sharing compatibility.
    pub profile_key: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Nssi {
    pub id: NssiId,
    pub subnet: SubnetKind,
    pub owner_domain: DomainRef,
    pub location: LocationId,
    pub nf_ids: Vec<NfId>,
    pub shared: bool,
    /// NSIs currently referencing this NSSI; its length is the ref count.
    pub holders: BTreeSet<NsiId>,
    pub profile_key: String,
    pub state: LifecycleState,
}

impl Nssi {
    pub fn ref_count(&self) -> usize {
        self.holders.len()
    }

    pub fn is_active(&self) -> bool {
        self.state == LifecycleState::Activated
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ReleaseOutcome {
    Decremented,
    Terminated,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NssmfError {
    #[error(transparent)]
    Inventory(#[from] InventoryError),
    #[error("no pool at location {0}")]
    UnknownLocation(LocationId),
    #[error("unknown NSSI {0}")]
    UnknownNssi(NssiId),
    #[error("NSSI {0} is not shareable")]
    NotShareable(NssiId),
    #[error("NSSI {nssi} is incompatible with the request: {detail}")]
    IncompatibleProfile { nssi: NssiId, detail: &'static str },
    #[error("NSI {holder} does not reference NSSI {nssi}")]
    UnknownHolder { nssi: NssiId, holder: NsiId },
    #[error("NSI {holder} already references NSSI {nssi}")]
    AlreadyHolding { nssi: NssiId, holder: NsiId },
}

impl NssmfError {
    pub fn is_insufficient(&self) -> bool {
        matches!(self, NssmfError::Inventory(InventoryError::InsufficientResources { .. }))
    }
}

/// Subnet-management function for one domain. Owns that domain's pools.
#[derive(Clone, Debug)]
pub struct Nssmf {
    domain: DomainRef,
    pools: BTreeMap<LocationId, NfPool>,
    nssis: BTreeMap<NssiId, Nssi>,
    next_id: u64,
}

impl Nssmf {
    pub fn new(domain: DomainRef, pools: impl IntoIterator<Item = NfPool>) -> Self {
        let pools = pools.into_iter().map(|p| (p.location().id.clone(), p)).collect();
        Self { domain, pools, nssis: BTreeMap::new(), next_id: 1 }
    }

    pub fn domain(&self) -> &DomainRef {
        &self.domain
    }

    pub fn pools(&self) -> &BTreeMap<LocationId, NfPool> {
        &self.pools
    }

    pub fn pool(&self, location: &LocationId) -> Option<&NfPool> {
        self.pools.get(location)
    }

    pub fn nssis(&self) -> &BTreeMap<NssiId, Nssi> {
        &self.nssis
    }

    pub fn nssi(&self, id: &NssiId) -> Option<&Nssi> {
        self.nssis.get(id)
    }

    pub fn snapshots(&self) -> BTreeMap<LocationId, PoolSnapshot> {
        self.pools.iter().map(|(k, p)| (k.clone(), p.snapshot())).collect()
    }

    /// Provisions a fresh NSSI for `holder` from the pool at `req.location`.
    pub fn provision_nssi(&mut self, req: &SubnetRequirement, holder: &NsiId) -> Result<NssiId, NssmfError> {
        let pool =
            self.pools.get_mut(&req.location).ok_or_else(|| NssmfError::UnknownLocation(req.location.clone()))?;
        let id = NssiId::new(format!("{}/nssi-{}", self.domain.name, self.next_id));
        let nf_ids = pool.allocate_nfs(req.subnet, req.units_needed, &id)?;
        self.next_id += 1;
        self.nssis.insert(
            id.clone(),
            Nssi {
                id: id.clone(),
                subnet: req.subnet,
                owner_domain: self.domain.clone(),
                location: req.location.clone(),
                nf_ids,
                shared: req.shareable,
                holders: BTreeSet::from([holder.clone()]),
                profile_key: req.profile_key.clone(),
                state: LifecycleState::Activated,
            },
        );
        Ok(id)
    }

    /// Lowest-id active shared NSSI that `req` could attach to, if any.
    pub fn find_shareable(&self, req: &SubnetRequirement) -> Option<&Nssi> {
        self.nssis.values().find(|n| check_compatible(n, req).is_ok())
    }

    /// Adds `holder` as another referent of a shared NSSI. Never touches a pool.
    pub fn attach_shared(&mut self, nssi: &NssiId, holder: &NsiId, req: &SubnetRequirement) -> Result<(), NssmfError> {
        let existing = self.nssis.get_mut(nssi).ok_or_else(|| NssmfError::UnknownNssi(nssi.clone()))?;
        check_compatible(existing, req)?;
        if !existing.holders.insert(holder.clone()) {
            return Err(NssmfError::AlreadyHolding { nssi: nssi.clone(), holder: holder.clone() });
        }
        Ok(())
    }

    /// Drops `holder`'s reference. The last reference terminates the NSSI and
    /// returns its NFs to the pool.
    pub fn release_nssi(&mut self, nssi: &NssiId, holder: &NsiId) -> Result<ReleaseOutcome, NssmfError> {
        let record = self.nssis.get_mut(nssi).ok_or_else(|| NssmfError::UnknownNssi(nssi.clone()))?;
        if !record.holders.remove(holder) {
            return Err(NssmfError::UnknownHolder { nssi: nssi.clone(), holder: holder.clone() });
        }
        if !record.holders.is_empty() {
            return Ok(ReleaseOutcome::Decremented);
        }
        record.state = LifecycleState::Terminated;
        if let Some(pool) = self.pools.get_mut(&record.location) {
            pool.release_nfs(nssi);
        }
        Ok(ReleaseOutcome::Terminated)
    }

    /// Rolls back a provisioning that never became part of an NSI: frees the
    /// NFs and forgets the record.
    pub(crate) fn discard(&mut self, nssi: &NssiId) {
        if let Some(record) = self.nssis.remove(nssi) {
            if let Some(pool) = self.pools.get_mut(&record.location) {
                pool.release_nfs(nssi);
            }
        }
    }
}

fn check_compatible(existing: &Nssi, req: &SubnetRequirement) -> Result<(), NssmfError> {
    let incompatible = |detail| Err(NssmfError::IncompatibleProfile { nssi: existing.id.clone(), detail });
    if !existing.shared {
        return Err(NssmfError::NotShareable(existing.id.clone()));
    }
    if !req.shareable {
        return incompatible("request forbids sharing");
    }
    if existing.state != LifecycleState::Activated {
        return incompatible("NSSI is not active");
    }
    if existing.subnet != req.subnet {
        return incompatible("subnet differs");
    }
    if existing.location != req.location {
        return incompatible("location differs");
    }
    if existing.profile_key != req.profile_key {
        return incompatible("profile differs");
    }
    Ok(())
}

/// Constituents grouped by owning domain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConstituentSet {
    pub by_domain: BTreeMap<DomainRef, Vec<NssiId>>,
    /// True when the constituents come from more than one domain.
    pub spans_external: bool,
}

impl ConstituentSet {
    pub fn mno_count(&self) -> usize {
        self.by_domain.iter().filter(|(d, _)| d.is_mno()).map(|(_, v)| v.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("cannot aggregate an empty constituent list")]
pub struct EmptyConstituents;

pub fn aggregate_multi_domain(nssis: &[&Nssi]) -> Result<ConstituentSet, EmptyConstituents> {
    if nssis.is_empty() {
        return Err(EmptyConstituents);
    }
    let mut by_domain: BTreeMap<DomainRef, Vec<NssiId>> = BTreeMap::new();
    for n in nssis {
        by_domain.entry(n.owner_domain.clone()).or_default().push(n.id.clone());
    }
    let spans_external = by_domain.len() > 1;
    Ok(ConstituentSet { by_domain, spans_external })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inventory::{LocationRef, NetworkFunction, NfKind};

    fn uo() -> DomainRef {
        DomainRef::micro_operator("uo")
    }

    fn nssmf_with(per_subnet: u32) -> Nssmf {
        let loc = LocationRef { id: "L1".into(), domain: uo() };
        let mut nfs = Vec::new();
        for s in SubnetKind::ALL {
            for i in 1..=per_subnet {
                nfs.push(NetworkFunction {
                    id: format!("{s}{i}").into(),
                    kind: NfKind::Vnf,
                    subnet: s,
                    capacity_units: 1,
                });
            }
        }
        Nssmf::new(uo(), [NfPool::new(loc, nfs).unwrap()])
    }

    fn req(subnet: SubnetKind, units: u32, shareable: bool) -> SubnetRequirement {
        SubnetRequirement { subnet, units_needed: units, location: "L1".into(), shareable, profile_key: "p".into() }
    }

    #[test]
    fn provision_exclusive() {
        let mut m = nssmf_with(5);
        let id = m.provision_nssi(&req(SubnetKind::An, 2, false), &"nsi-1".into()).unwrap();
        let n = m.nssi(&id).unwrap();
        assert_eq!(n.nf_ids.len(), 2);
        assert!(!n.shared);
        assert_eq!(n.ref_count(), 1);
        assert_eq!(n.owner_domain, uo());
        assert_eq!(n.state, LifecycleState::Activated);
    }

    #[test]
    fn provision_on_empty_pool_fails() {
        let mut m = nssmf_with(0);
        let err = m.provision_nssi(&req(SubnetKind::Cn, 1, false), &"nsi-1".into()).unwrap_err();
        assert!(err.is_insufficient());
        assert!(m.nssis().is_empty());
    }

    #[test]
    fn three_subnets_are_disjoint() {
        let mut m = nssmf_with(3);
        let ids: Vec<_> =
            SubnetKind::ALL.iter().map(|s| m.provision_nssi(&req(*s, 2, false), &"nsi-1".into()).unwrap()).collect();
        for (i, a) in ids.iter().enumerate() {
            for b in &ids[i + 1..] {
                let na = &m.nssi(a).unwrap().nf_ids;
                let nb = &m.nssi(b).unwrap().nf_ids;
                assert!(na.iter().all(|x| !nb.contains(x)));
            }
        }
    }

    #[test]
    fn attach_shared_increments_without_touching_pool() {
        let mut m = nssmf_with(3);
        let id = m.provision_nssi(&req(SubnetKind::An, 1, true), &"nsi-1".into()).unwrap();
        let before = m.snapshots();
        m.attach_shared(&id, &"nsi-2".into(), &req(SubnetKind::An, 1, true)).unwrap();
        assert_eq!(m.nssi(&id).unwrap().ref_count(), 2);
        assert_eq!(m.snapshots(), before);
    }

    #[test]
    fn attach_to_exclusive_is_not_shareable() {
        let mut m = nssmf_with(3);
        let id = m.provision_nssi(&req(SubnetKind::An, 1, false), &"nsi-1".into()).unwrap();
        assert_eq!(
            m.attach_shared(&id, &"nsi-2".into(), &req(SubnetKind::An, 1, true)),
            Err(NssmfError::NotShareable(id))
        );
    }

    #[test]
    fn attach_with_other_profile_is_incompatible() {
        let mut m = nssmf_with(3);
        let id = m.provision_nssi(&req(SubnetKind::An, 1, true), &"nsi-1".into()).unwrap();
        let mut other = req(SubnetKind::An, 1, true);
        other.profile_key = "q".into();
        assert!(matches!(m.attach_shared(&id, &"nsi-2".into(), &other), Err(NssmfError::IncompatibleProfile { .. })));
        assert!(matches!(
            m.attach_shared(&id, &"nsi-2".into(), &req(SubnetKind::Cn, 1, true)),
            Err(NssmfError::IncompatibleProfile { .. })
        ));
    }

    #[test]
    fn sharing_consumes_fewer_units_than_exclusive() {
        let mut shared = nssmf_with(4);
        let r = req(SubnetKind::An, 2, true);
        let first = shared.provision_nssi(&r, &"nsi-1".into()).unwrap();
        let found = shared.find_shareable(&r).unwrap().id.clone();
        assert_eq!(found, first);
        shared.attach_shared(&found, &"nsi-2".into(), &r).unwrap();

        let mut exclusive = nssmf_with(4);
        let r = req(SubnetKind::An, 2, false);
        exclusive.provision_nssi(&r, &"nsi-1".into()).unwrap();
        assert!(exclusive.find_shareable(&r).is_none());
        exclusive.provision_nssi(&r, &"nsi-2".into()).unwrap();

        let used = |m: &Nssmf| m.snapshots().values().map(|s| s.allocated_units()).sum::<u32>();
        assert!(used(&shared) < used(&exclusive));
        assert_eq!(used(&shared), 2);
        assert_eq!(used(&exclusive), 4);
    }

    #[test]
    fn release_decrements_then_terminates() {
        let mut m = nssmf_with(3);
        let fresh = m.snapshots();
        let r = req(SubnetKind::An, 1, true);
        let id = m.provision_nssi(&r, &"nsi-1".into()).unwrap();
        m.attach_shared(&id, &"nsi-2".into(), &r).unwrap();
        let held = m.snapshots();
        assert_eq!(m.release_nssi(&id, &"nsi-1".into()), Ok(ReleaseOutcome::Decremented));
        assert_eq!(m.nssi(&id).unwrap().ref_count(), 1);
        assert_eq!(m.snapshots(), held);
        assert_eq!(m.release_nssi(&id, &"nsi-2".into()), Ok(ReleaseOutcome::Terminated));
        assert_eq!(m.nssi(&id).unwrap().state, LifecycleState::Terminated);
        assert_eq!(m.snapshots(), fresh);
    }

    #[test]
    fn release_by_stranger_is_unknown_holder() {
        let mut m = nssmf_with(3);
        let id = m.provision_nssi(&req(SubnetKind::An, 1, false), &"nsi-1".into()).unwrap();
        assert!(matches!(m.release_nssi(&id, &"nsi-9".into()), Err(NssmfError::UnknownHolder { .. })));
    }

    #[test]
    fn released_nfs_are_reused_by_next_provisioning() {
        let mut m = nssmf_with(4);
        let r = req(SubnetKind::Dn, 2, false);
        let a = m.provision_nssi(&r, &"nsi-1".into()).unwrap();
        let first = m.nssi(&a).unwrap().nf_ids.clone();
        m.release_nssi(&a, &"nsi-1".into()).unwrap();
        let b = m.provision_nssi(&r, &"nsi-2".into()).unwrap();
        assert_ne!(a, b);
        assert_eq!(m.nssi(&b).unwrap().nf_ids, first);
    }

    #[test]
    fn terminated_nssi_cannot_be_shared() {
        let mut m = nssmf_with(3);
        let r = req(SubnetKind::An, 1, true);
        let id = m.provision_nssi(&r, &"nsi-1".into()).unwrap();
        m.release_nssi(&id, &"nsi-1".into()).unwrap();
        assert!(m.find_shareable(&r).is_none());
    }

    fn fake(id: &str, domain: DomainRef) -> Nssi {
        Nssi {
            id: id.into(),
            subnet: SubnetKind::An,
            owner_domain: domain,
            location: "L1".into(),
            nf_ids: vec![],
            shared: false,
            holders: BTreeSet::new(),
            profile_key: String::new(),
            state: LifecycleState::Activated,
        }
    }

    #[test]
    fn aggregation_flags_external_domains() {
        let (a, c, d) = (fake("a", uo()), fake("c", uo()), fake("d", uo()));
        let single = aggregate_multi_domain(&[&a, &c, &d]).unwrap();
        assert!(!single.spans_external);
        assert_eq!(single.mno_count(), 0);

        let m = fake("m", DomainRef::mno("mno1"));
        let multi = aggregate_multi_domain(&[&a, &c, &m]).unwrap();
        assert!(multi.spans_external);
        assert_eq!(multi.mno_count(), 1);
        assert_eq!(multi.by_domain.len(), 2);

        assert_eq!(aggregate_multi_domain(&[]), Err(EmptyConstituents));
    }
}
