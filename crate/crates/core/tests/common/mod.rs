#![allow(dead_code)]

use std::path::PathBuf;

use serde_json::{json, Value};
use uo_slicing::{bundled, parse_scenario, run_scenario, FormationTrace, RunOutput, Scenario, BUNDLED};

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

pub fn golden_path(fixture: &str, trace: &FormationTrace) -> PathBuf {
    golden_dir().join(fixture).join(uo_slicing::runner::trace_file_name(trace))
}

/// Every bundled fixture with its run output.
pub fn run_all_fixtures() -> Vec<(&'static str, RunOutput)> {
    BUNDLED.iter().map(|(name, _)| (*name, run_scenario(&bundled(name).unwrap()))).collect()
}

pub fn read_golden(fixture: &str, request: &str) -> String {
    let path = golden_dir().join(fixture).join(format!("{request}.trace"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn nf(id: &str, subnet: &str, cap: u32) -> Value {
    json!({ "id": id, "kind": "vnf", "subnet": subnet, "capacity_units": cap })
}

pub fn uniform_pool(prefix: &str, per_subnet: usize, cap: u32) -> Vec<Value> {
    ["an", "cn", "dn"]
        .iter()
        .flat_map(|s| (1..=per_subnet).map(move |i| nf(&format!("{prefix}{s}{i}"), s, cap)))
        .collect()
}

pub fn agreement(tenant: &str) -> Value {
    json!({
        "tenant_id": tenant, "valid_from_tick": 0, "valid_until_tick": 100000,
        "allowed_scenarios": ["closed_dep_a", "closed_dep_b", "mno_open", "public_open", "mixed_option_a", "mixed_option_b"],
        "sharing_permitted": true, "charging_ok": true, "subscription_ok": true
    })
}

pub fn request(id: &str, tenant: &str, extra: Value) -> Value {
    let mut r = json!({
        "tenant_slice_id": id, "tenant_id": tenant, "latency_ms": 20.0, "throughput_units": 2,
        "duration_ticks": 100, "customer_group": "closed", "sharing_agreement": "none", "home_location": "L1"
    });
    for (k, v) in extra.as_object().unwrap() {
        r[k] = v.clone();
    }
    r
}

pub fn scenario(requests: Vec<Value>, mno: Option<Value>) -> Scenario {
    let tenants: std::collections::BTreeSet<String> =
        requests.iter().map(|r| r["tenant_id"].as_str().unwrap().to_owned()).collect();
    let spec = json!({
        "name": "hand-built",
        "micro_operator": { "name": "uo1", "locations": [
            { "id": "L1", "pool": uniform_pool("a-", 4, 2) },
            { "id": "L2", "pool": uniform_pool("b-", 2, 2) }
        ]},
        "mnos": mno.into_iter().collect::<Vec<_>>(),
        "tenants": tenants.iter().map(|t| json!({ "id": t })).collect::<Vec<_>>(),
        "agreements": tenants.iter().map(|t| agreement(t)).collect::<Vec<_>>(),
        "requests": requests,
    });
    parse_scenario(&spec.to_string()).unwrap()
}

pub fn mno(extra: Value) -> Value {
    let mut m =
        json!({ "name": "mno1", "location": "core", "pool": uniform_pool("m-", 3, 2), "policy": { "fans": "allow" } });
    for (k, v) in extra.as_object().unwrap() {
        m[k] = v.clone();
    }
    m
}
