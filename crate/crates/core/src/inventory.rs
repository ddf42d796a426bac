//! Capacity-accounted VNF/PNF registry per domain and location.
//!
//! A pool only knows which NF is held by which NSSI. Sharing between
//! slices happens one level up, through reference-counted shared NSSIs.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{LocationId, NfId, NssiId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    MicroOperator,
    Mno,
}

/// An administrative domain: the single micro-operator or one external MNO.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DomainRef {
    pub kind: DomainKind,
    pub name: String,
}

impl DomainRef {
    pub fn micro_operator(name: impl Into<String>) -> Self {
        Self { kind: DomainKind::MicroOperator, name: name.into() }
    }

    pub fn mno(name: impl Into<String>) -> Self {
        Self { kind: DomainKind::Mno, name: name.into() }
    }

    pub fn is_mno(&self) -> bool {
        self.kind == DomainKind::Mno
    }
}

impl fmt::Display for DomainRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LocationRef {
    pub id: LocationId,
    pub domain: DomainRef,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NfKind {
    Vnf,
    Pnf,
}

/// Access, core or data network subnet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubnetKind {
    An,
    Cn,
    Dn,
}

impl SubnetKind {
    pub const ALL: [SubnetKind; 3] = [SubnetKind::An, SubnetKind::Cn, SubnetKind::Dn];

    pub fn as_str(self) -> &'static str {
        match self {
            SubnetKind::An => "an",
            SubnetKind::Cn => "cn",
            SubnetKind::Dn => "dn",
        }
    }
}

impl fmt::Display for SubnetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFunction {
    pub id: NfId,
    pub kind: NfKind,
    pub subnet: SubnetKind,
    pub capacity_units: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InventoryError {
    #[error("insufficient {subnet} capacity: {free} free, {needed} needed")]
    InsufficientResources { subnet: SubnetKind, needed: u32, free: u32 },
    #[error("units_needed must be at least 1")]
    ZeroUnits,
    #[error("{holder} already holds {subnet} NFs in this pool")]
    HolderAlreadyAllocated { holder: NssiId, subnet: SubnetKind },
    #[error("duplicate NF id {0}")]
    DuplicateNf(NfId),
    #[error("NF {0} has zero capacity")]
    ZeroCapacity(NfId),
}

/// Per-subnet accounting, in NF counts and capacity units.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubnetAccount {
    pub total_nfs: u32,
    pub allocated_nfs: u32,
    pub free_nfs: u32,
    pub total_units: u32,
    pub allocated_units: u32,
    pub free_units: u32,
}

impl SubnetAccount {
    pub fn balanced(&self) -> bool {
        self.allocated_nfs + self.free_nfs == self.total_nfs
            && self.allocated_units + self.free_units == self.total_units
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSnapshot {
    pub location: LocationId,
    pub subnets: BTreeMap<SubnetKind, SubnetAccount>,
}

impl PoolSnapshot {
    pub fn allocated_units(&self) -> u32 {
        self.subnets.values().map(|a| a.allocated_units).sum()
    }

    pub fn total_units(&self) -> u32 {
        self.subnets.values().map(|a| a.total_units).sum()
    }

    pub fn balanced(&self) -> bool {
        self.subnets.values().all(SubnetAccount::balanced)
    }
}

/// NF inventory at one location.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NfPool {
    location: LocationRef,
    resources: BTreeMap<NfId, NetworkFunction>,
    allocations: BTreeMap<NfId, NssiId>,
}

impl NfPool {
    pub fn new(
        location: LocationRef,
        resources: impl IntoIterator<Item = NetworkFunction>,
    ) -> Result<Self, InventoryError> {
        let mut map = BTreeMap::new();
        for nf in resources {
            if nf.capacity_units == 0 {
                return Err(InventoryError::ZeroCapacity(nf.id));
            }
            if map.contains_key(&nf.id) {
                return Err(InventoryError::DuplicateNf(nf.id));
            }
            map.insert(nf.id.clone(), nf);
        }
        Ok(Self { location, resources: map, allocations: BTreeMap::new() })
    }

    pub fn location(&self) -> &LocationRef {
        &self.location
    }

    pub fn resources(&self) -> impl Iterator<Item = &NetworkFunction> {
        self.resources.values()
    }

    pub fn resource(&self, id: &NfId) -> Option<&NetworkFunction> {
        self.resources.get(id)
    }

    pub fn holder_of(&self, id: &NfId) -> Option<&NssiId> {
        self.allocations.get(id)
    }

    pub fn allocations(&self) -> &BTreeMap<NfId, NssiId> {
        &self.allocations
    }

    /// NFs held by `holder`, ascending.
    pub fn held_by(&self, holder: &NssiId) -> Vec<NfId> {
        self.allocations.iter().filter(|(_, h)| *h == holder).map(|(id, _)| id.clone()).collect()
    }

    /// Free NFs with the given affinity, ascending by id.
    pub fn free_nfs(&self, subnet: SubnetKind) -> impl Iterator<Item = &NetworkFunction> {
        self.resources.values().filter(move |nf| nf.subnet == subnet && !self.allocations.contains_key(&nf.id))
    }

    pub fn free_units(&self, subnet: SubnetKind) -> u32 {
        self.free_nfs(subnet).map(|nf| nf.capacity_units).sum()
    }

    /// Allocates free NFs of `subnet` to `holder`, all or nothing.
    ///
    /// The chosen set is the feasible set whose highest NF id is as low as
    /// possible, then whose second-highest id is as low as possible, and so
    /// on (colexicographic minimum). With unit capacities this is simply
    /// the first `units_needed` free NFs. The result never contains an NF
    /// that could be dropped while still covering `units_needed`.
    pub fn allocate_nfs(
        &mut self,
        subnet: SubnetKind,
        units_needed: u32,
        holder: &NssiId,
    ) -> Result<Vec<NfId>, InventoryError> {
        if units_needed == 0 {
            return Err(InventoryError::ZeroUnits);
        }
        let already = self
            .allocations
            .iter()
            .any(|(id, h)| h == holder && self.resources.get(id).is_some_and(|nf| nf.subnet == subnet));
        if already {
            return Err(InventoryError::HolderAlreadyAllocated { holder: holder.clone(), subnet });
        }

        let free: Vec<(&NfId, u32)> = self.free_nfs(subnet).map(|nf| (&nf.id, nf.capacity_units)).collect();
        let mut prefix = Vec::with_capacity(free.len());
        let mut acc = 0u64;
        for (_, cap) in &free {
            acc += u64::from(*cap);
            prefix.push(acc);
        }
        if acc < u64::from(units_needed) {
            return Err(InventoryError::InsufficientResources { subnet, needed: units_needed, free: acc as u32 });
        }

        // Pick from the top down: each pick is the lowest index whose
        // inclusive prefix sum still covers the remainder.
        let mut chosen = Vec::new();
        let mut remaining = u64::from(units_needed);
        let mut upper = free.len();
        while remaining > 0 {
            let idx = prefix[..upper].partition_point(|&p| p < remaining);
            debug_assert!(idx < upper);
            chosen.push(free[idx].0.clone());
            remaining = remaining.saturating_sub(u64::from(free[idx].1));
            upper = idx;
        }
        chosen.reverse();

        for id in &chosen {
            self.allocations.insert(id.clone(), holder.clone());
        }
        Ok(chosen)
    }

    /// Frees every NF held by `holder`; releasing nothing is a no-op.
    pub fn release_nfs(&mut self, holder: &NssiId) -> Vec<NfId> {
        let released = self.held_by(holder);
        for id in &released {
            self.allocations.remove(id);
        }
        released
    }

    pub fn snapshot(&self) -> PoolSnapshot {
        let mut subnets: BTreeMap<SubnetKind, SubnetAccount> =
            SubnetKind::ALL.iter().map(|s| (*s, SubnetAccount::default())).collect();
        for nf in self.resources.values() {
            let acct = subnets.entry(nf.subnet).or_default();
            acct.total_nfs += 1;
            acct.total_units += nf.capacity_units;
            if self.allocations.contains_key(&nf.id) {
                acct.allocated_nfs += 1;
                acct.allocated_units += nf.capacity_units;
            } else {
                acct.free_nfs += 1;
                acct.free_units += nf.capacity_units;
            }
        }
        PoolSnapshot { location: self.location.id.clone(), subnets }
    }
}
