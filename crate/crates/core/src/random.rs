//! Seeded generator of small random scenarios for property tests and the
//! `generate` command.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::csmf::RawSliceRequest;
use crate::inventory::{NetworkFunction, NfKind, SubnetKind};
use crate::mno::PolicyVerdict;
use crate::nsmf::{CustomerGroup, DepBBridge, DeploymentScenario, SharingAgreement};
use crate::provider::ServiceAgreement;
use crate::scenario::{LocationSpec, MicroOperatorSpec, MnoSpec, ScenarioSpec, TenantSpec};

/// Bounds for generated scenarios.
#[derive(Clone, Debug)]
pub struct RandomLimits {
    /// Upper bound on NFs across every pool, MNO included.
    pub max_nfs: usize,
    pub max_requests: usize,
}

impl Default for RandomLimits {
    fn default() -> Self {
        Self { max_nfs: 20, max_requests: 6 }
    }
}

fn random_pool(rng: &mut ChaCha8Rng, prefix: &str, count: usize) -> Vec<NetworkFunction> {
    (0..count)
        .map(|i| {
            // Cover every subnet before picking at random.
            let subnet = if i < 3 { SubnetKind::ALL[i] } else { *SubnetKind::ALL.choose(rng).unwrap() };
            NetworkFunction {
                id: format!("{prefix}nf{}", i + 1).into(),
                kind: if rng.gen_bool(0.5) { NfKind::Vnf } else { NfKind::Pnf },
                subnet,
                capacity_units: rng.gen_range(1..=3),
            }
        })
        .collect()
}

/// Builds a scenario from `seed`. Equal seeds give equal scenarios.
pub fn random_scenario(seed: u64, limits: &RandomLimits) -> ScenarioSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let with_mno = rng.gen_bool(0.6);
    let mno_nfs = if with_mno { rng.gen_range(3..=6.min(limits.max_nfs / 2).max(3)) } else { 0 };
    let location_count = rng.gen_range(1..=2);
    let budget = limits.max_nfs.saturating_sub(mno_nfs);

    let mut locations = Vec::new();
    for l in 1..=location_count {
        let share = budget / location_count;
        let count = rng.gen_range(share.min(3)..=share);
        locations.push(LocationSpec { id: format!("L{l}"), pool: random_pool(&mut rng, &format!("l{l}-"), count) });
    }
    let tenant_count = rng.gen_range(1..=3);
    let tenants: Vec<TenantSpec> =
        (1..=tenant_count).map(|t| TenantSpec { id: format!("t{t}"), vertical: None }).collect();

    let mnos = if with_mno {
        let policy = tenants
            .iter()
            .map(|t| (t.id.clone(), if rng.gen_bool(0.8) { PolicyVerdict::Allow } else { PolicyVerdict::Deny }))
            .collect::<BTreeMap<_, _>>();
        vec![MnoSpec {
            name: "mno1".to_owned(),
            location: "mno1-core".to_owned(),
            pool: random_pool(&mut rng, "m1-", mno_nfs),
            policy,
            reachable: rng.gen_bool(0.9),
            grant_nssi: rng.gen_bool(0.9),
        }]
    } else {
        Vec::new()
    };

    let mut agreements = Vec::new();
    for t in &tenants {
        if !rng.gen_bool(0.9) {
            continue;
        }
        agreements.push(ServiceAgreement {
            tenant_id: t.id.as_str().into(),
            valid_from_tick: if rng.gen_bool(0.1) { 40 } else { 0 },
            valid_until_tick: if rng.gen_bool(0.1) { 60 } else { 10_000 },
            allowed_scenarios: DeploymentScenario::ALL.into_iter().filter(|_| rng.gen_bool(0.95)).collect(),
            sharing_permitted: rng.gen_bool(0.8),
            charging_ok: rng.gen_bool(0.97),
            subscription_ok: rng.gen_bool(0.97),
        });
    }

    let request_count = rng.gen_range(1..=limits.max_requests.max(1));
    let requests = (1..=request_count)
        .map(|r| {
            let tenant = &tenants[rng.gen_range(0..tenants.len())];
            let home = format!("L{}", rng.gen_range(1..=location_count));
            let other = (location_count > 1).then(|| if home == "L1" { "L2" } else { "L1" }.to_owned());
            let sharing = match rng.gen_range(0..3) {
                0 => SharingAgreement::None,
                1 => SharingAgreement::WithinLocation,
                _ if other.is_some() => SharingAgreement::CrossLocation,
                _ => SharingAgreement::WithinLocation,
            };
            let share_with = match (&sharing, &other) {
                (SharingAgreement::CrossLocation, Some(o)) => vec![o.clone()],
                (SharingAgreement::None, Some(o)) if rng.gen_bool(0.3) => vec![o.clone()],
                _ => Vec::new(),
            };
            let group = match rng.gen_range(0..3) {
                1 if with_mno => CustomerGroup::OpenMnoSubscribers("mno1".to_owned()),
                2 => CustomerGroup::OpenPublic,
                _ => CustomerGroup::Closed,
            };
            let wide_area = group == CustomerGroup::Closed && rng.gen_bool(if with_mno { 0.3 } else { 0.02 });
            let multi_site =
                group == CustomerGroup::Closed && !wide_area && !share_with.is_empty() && rng.gen_bool(0.5);
            RawSliceRequest {
                tenant_slice_id: Some(format!("{}-r{r}", tenant.id)),
                tenant_id: Some(tenant.id.clone()),
                latency_ms: Some(f64::from(rng.gen_range(1..=50u32))),
                throughput_units: Some(rng.gen_range(1..=3)),
                duration_ticks: Some(rng.gen_range(1..=1000)),
                mobility: rng.gen_bool(0.3),
                customer_group: Some(group),
                sharing_agreement: Some(sharing),
                share_with_locations: share_with,
                home_location: Some(home),
                needs_mno_wide_area: wide_area,
                mno_needs_uo_access: !wide_area && rng.gen_bool(if with_mno { 0.1 } else { 0.01 }),
                mixed_network: rng.gen_bool(0.3),
                bridge: if multi_site { DepBBridge::MultiSite } else { DepBBridge::Mno },
                mno: None,
                profile_key: rng.gen_bool(0.3).then(|| "video".to_owned()),
                subscriber_group: None,
            }
        })
        .collect();

    ScenarioSpec {
        name: format!("random-{seed}"),
        seed,
        micro_operator: MicroOperatorSpec { name: "uo1".to_owned(), locations },
        mnos,
        tenants,
        agreements,
        requests,
        expectations: Vec::new(),
        inject_rejections: Vec::new(),
        latency_threshold_ms: crate::csmf::DEFAULT_STRICT_LATENCY_MS,
    }
}
