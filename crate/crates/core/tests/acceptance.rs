//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use uo_slicing::engine::{Engine, EngineState, Outcome};
use uo_slicing::lifecycle::{is_legal_path, LifecycleEvent, LifecycleState};
use uo_slicing::nsmf::Nsi;
use uo_slicing::random::{random_scenario, RandomLimits};
use uo_slicing::{
    bundled, emit_report, run_scenario, validate_trace, DeploymentScenario, FormationTrace, NsiConfigType, Scenario,
    BUNDLED,
};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_scenarios(count: u64) -> impl Iterator<Item = (u64, Scenario)> {
    let limits = RandomLimits { max_nfs: 20, max_requests: 6 };
    (0..count).map(move |seed| {
        let spec = random_scenario(seed, &limits);
        (seed, Scenario::from_spec(spec).expect("generated scenario is valid"))
    })
}

fn fixture_and_random_scenarios(random: u64) -> Vec<(String, Scenario)> {
    BUNDLED
        .iter()
        .map(|(n, _)| (n.to_string(), bundled(n).unwrap()))
        .chain(random_scenarios(random).map(|(seed, s)| (format!("random seed {seed}"), s)))
        .collect()
}

fn c1_fixtures() -> Check {
    let start = Instant::now();
    for (name, _) in BUNDLED {
        let out = run_scenario(&bundled(name).unwrap());
        ensure(out.report.expectation_mismatches.is_empty(), || {
            format!("{name}: {:?}", out.report.expectation_mismatches)
        })?;
        ensure(out.report.traces_conformant(), || format!("{name}: non-conformant trace"))?;
        ensure(out.report.exit_code() == 0, || format!("{name}: exit {}", out.report.exit_code()))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("{} fixtures in {elapsed:?}", BUNDLED.len()))
}

fn c2_goldens() -> Check {
    let dep_a = FormationTrace::parse(&common::read_golden("closed_dep_a", "factory-s1")).map_err(|e| e.to_string())?;
    let steps: BTreeSet<u8> = dep_a.steps().map(|s| s.get()).collect();
    let want: BTreeSet<u8> = (0..=15).filter(|s| *s != 6).collect();
    ensure(steps == want, || format!("dep A steps {steps:?}"))?;
    ensure(validate_trace(&dep_a, DeploymentScenario::ClosedDepA).is_conformant(), || "dep A invalid".into())?;

    let mut step6 = 0;
    for req in ["logistics-s1", "logistics-s2", "logistics-s3"] {
        let t = FormationTrace::parse(&common::read_golden("closed_dep_b", req)).map_err(|e| e.to_string())?;
        step6 += t.steps().filter(|s| s.get() == 6).count();
        ensure(validate_trace(&t, DeploymentScenario::ClosedDepB).is_conformant(), || format!("{req} invalid"))?;
    }
    ensure(step6 >= 1, || "dep B golden has no step-6 event".into())?;

    let mut compared = 0;
    for (name, out) in common::run_all_fixtures() {
        for t in &out.traces {
            let path = common::golden_path(name, t);
            let golden = std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            ensure(golden == t.to_text().into_bytes(), || format!("{} differs", path.display()))?;
            compared += 1;
        }
    }
    Ok(format!("{compared} golden traces byte-exact, dep B has {step6} step-6 events"))
}

fn live_nsis(state: &EngineState) -> Vec<&Nsi> {
    state.nsis.iter().filter(|n| n.state != LifecycleState::Terminated).collect()
}

/// Pairwise check: a Type1 NSI shares no NSSI and no NF with any other NSI.
fn type1_overlaps(state: &EngineState) -> Vec<String> {
    let nfs_of = |nsi: &Nsi| -> BTreeSet<String> {
        state
            .nssis
            .iter()
            .filter(|x| nsi.constituents.contains(&x.id))
            .flat_map(|x| x.nf_ids.iter().map(|n| format!("{}/{}", x.owner_domain, n)))
            .collect()
    };
    let nsis = live_nsis(state);
    let mut found = Vec::new();
    for (i, a) in nsis.iter().enumerate() {
        for b in &nsis[i + 1..] {
            if a.config_type != NsiConfigType::Type1 && b.config_type != NsiConfigType::Type1 {
                continue;
            }
            let ids_a: BTreeSet<_> = a.constituents.iter().collect();
            if b.constituents.iter().any(|x| ids_a.contains(x)) {
                found.push(format!("{} and {} share an NSSI", a.id, b.id));
            }
            if !nfs_of(a).is_disjoint(&nfs_of(b)) {
                found.push(format!("{} and {} share an NF", a.id, b.id));
            }
        }
    }
    found
}

fn c3_isolation() -> Check {
    let start = Instant::now();
    let (mut pairs_checked, mut type1) = (0usize, 0usize);
    for (seed, s) in random_scenarios(1000) {
        let mut engine = s.build_engine(false);
        for r in &s.requests {
            engine.run_request(r);
            let state = engine.state();
            let bad = type1_overlaps(&state);
            ensure(bad.is_empty(), || format!("seed {seed}: {bad:?}"))?;
            let n = live_nsis(&state).len();
            pairs_checked += n * n.saturating_sub(1) / 2;
        }
        type1 += engine.state().nsis.iter().filter(|n| n.config_type == NsiConfigType::Type1).count();
    }
    let elapsed = start.elapsed();
    ensure(type1 > 0, || "no Type1 NSI was ever formed".into())?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("1000 scenarios, {type1} Type1 NSIs, {pairs_checked} pairs, 0 violations in {elapsed:?}"))
}

/// Independent pool accounting: units held by live NSSIs equal each pool's
/// allocated units, and allocated plus free equals total.
fn conservation(engine: &Engine) -> Result<(), String> {
    let state = engine.state();
    let mut held: BTreeMap<(String, String, String), u32> = BTreeMap::new();
    let mut capacity: BTreeMap<(String, String), u32> = BTreeMap::new();
    for m in engine.nssmfs() {
        for f in m.pools().values().flat_map(|p| p.resources()) {
            capacity.insert((m.domain().to_string(), f.id.to_string()), f.capacity_units);
        }
    }
    for n in state.nssis.iter().filter(|n| n.state != LifecycleState::Terminated) {
        let key = (n.owner_domain.to_string(), n.location.to_string(), n.subnet.as_str().to_owned());
        *held.entry(key).or_default() +=
            n.nf_ids.iter().map(|f| capacity[&(n.owner_domain.to_string(), f.to_string())]).sum::<u32>();
    }
    for (pool, snap) in &state.pools {
        for (subnet, acc) in &snap.subnets {
            ensure(acc.allocated_units + acc.free_units == acc.total_units, || {
                format!("{pool}/{subnet:?} unbalanced")
            })?;
            ensure(acc.allocated_nfs + acc.free_nfs == acc.total_nfs, || format!("{pool}/{subnet:?} NF count"))?;
            let (domain, location) = pool.split_once('/').unwrap();
            let want =
                held.get(&(domain.to_owned(), location.to_owned(), subnet.as_str().to_owned())).copied().unwrap_or(0);
            ensure(acc.allocated_units == want, || {
                format!("{pool}/{subnet:?}: pool says {} units, NSSIs hold {want}", acc.allocated_units)
            })?;
        }
    }
    Ok(())
}

fn c4_conservation() -> Check {
    let mut events = 0u64;
    let scenarios = fixture_and_random_scenarios(300);
    for (name, s) in &scenarios {
        let mut engine = s.build_engine(true);
        for r in &s.requests {
            engine.run_request(r);
            conservation(&engine).map_err(|e| format!("{name}: {e}"))?;
        }
        let mut torn = engine.clone();
        torn.teardown_all().map_err(|e| format!("{name}: {e}"))?;
        conservation(&torn).map_err(|e| format!("{name} after teardown: {e}"))?;
        ensure(torn.invariant_violations().is_empty(), || format!("{name}: {:?}", torn.invariant_violations()))?;
        ensure(&torn.pool_snapshots() == torn.initial_pool_snapshots(), || format!("{name}: pools not restored"))?;
        events += torn.invariant_checks();
    }
    Ok(format!("{} scenarios, per-event checks {events}, pools restored after terminate-all", scenarios.len()))
}

fn c5_injected_rejections() -> Check {
    let mut injected = 0;
    for (name, s) in fixture_and_random_scenarios(200) {
        for i in 0..s.requests.len() {
            let mut engine = s.build_engine(true);
            for r in &s.requests[..i] {
                engine.run_request(r);
            }
            let before = engine.state();
            let req = &s.requests[i];
            engine.inject_rejection(req.tenant_slice_id.clone());
            let t = engine.run_request(req).trace;
            let after = engine.state();
            let ctx = || format!("{name} request {}", req.tenant_slice_id);
            ensure(matches!(t.outcome, Outcome::Rejected(_)), || format!("{}: {}", ctx(), t.outcome))?;
            ensure(t.max_step().map(|s| s.get()) == Some(4), || format!("{}: max step {:?}", ctx(), t.max_step()))?;
            ensure(before.pools == after.pools && before.allocations == after.allocations, || {
                format!("{}: allocation changed", ctx())
            })?;
            ensure(
                before.nssis == after.nssis && before.nsis == after.nsis && before.services == after.services,
                || format!("{}: slice state changed", ctx()),
            )?;
            injected += 1;
        }
    }
    Ok(format!("{injected} injected rejections, max step 4, zero deltas"))
}

fn c6_lifecycle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut applied = 0u64;
    for n in 0..100_000 {
        let mut state = LifecycleState::Instantiated;
        let mut history = vec![state];
        for _ in 0..rng.gen_range(1..=24) {
            let event = LifecycleEvent::ALL[rng.gen_range(0..LifecycleEvent::ALL.len())];
            match state.apply(event) {
                Ok(next) => {
                    ensure(state != LifecycleState::Terminated, || format!("sequence {n}: left Terminated"))?;
                    ensure(LifecycleState::ALL.contains(&next), || format!("sequence {n}: undefined state"))?;
                    state = next;
                    history.push(next);
                    applied += 1;
                }
                Err(e) => ensure(e.from == state, || format!("sequence {n}: error names the wrong state"))?,
            }
        }
        ensure(is_legal_path(&history), || format!("sequence {n}: illegal path {history:?}"))?;
    }

    // The same property through the engine, on a served NSI.
    let s = bundled("closed_dep_a").unwrap();
    for n in 0..2_000 {
        let mut engine = s.build_engine(true);
        engine.run_request(&s.requests[0]);
        let id = engine.all_nsis().next().unwrap().id.clone();
        for _ in 0..rng.gen_range(1..=16) {
            let event = LifecycleEvent::ALL[rng.gen_range(0..LifecycleEvent::ALL.len())];
            let was = engine.find_nsi(&id).unwrap().state;
            let ok = engine.apply_lifecycle(&id, event).is_ok();
            ensure(!(ok && was == LifecycleState::Terminated), || format!("engine sequence {n}: left Terminated"))?;
        }
        let nsi = engine.find_nsi(&id).unwrap();
        ensure(is_legal_path(&nsi.history), || format!("engine sequence {n}: {:?}", nsi.history))?;
        if nsi.state == LifecycleState::Terminated {
            ensure(&engine.pool_snapshots() == engine.initial_pool_snapshots(), || {
                format!("engine sequence {n}: pools not released")
            })?;
        }
        ensure(engine.invariant_violations().is_empty(), || {
            format!("engine sequence {n}: {:?} {:?}", nsi.history, engine.invariant_violations())
        })?;
    }
    Ok(format!("100000 sequences ({applied} transitions) plus 2000 engine sequences"))
}

/// Step ordering written out independently of the engine's own table.
fn depends_on(before: u8, after: u8) -> bool {
    let direct = |a: u8, b: u8| match b {
        1 => a == 0,
        2 | 3 => a == 1,
        4 => a == 2,
        5 | 6 => a == 3 || a == 4,
        7 => a == 5 || a == 6,
        8..=15 => a == b - 1,
        _ => false,
    };
    let mut reach = [[false; 16]; 16];
    for (a, row) in reach.iter_mut().enumerate() {
        for (b, cell) in row.iter_mut().enumerate() {
            *cell = direct(a as u8, b as u8);
        }
    }
    for k in 0..16 {
        for i in 0..16 {
            for j in 0..16 {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    reach[before as usize][after as usize]
}

fn c7_transpositions() -> Check {
    let (mut tried, mut traces) = (0, 0);
    for (name, out) in common::run_all_fixtures() {
        for (trace, report) in out.traces.iter().zip(&out.report.requests) {
            let kind = report.classification.unwrap_or(DeploymentScenario::ClosedDepA);
            let golden = FormationTrace::parse(&std::fs::read_to_string(common::golden_path(name, trace)).unwrap())
                .map_err(|e| e.to_string())?;
            traces += 1;
            let events = &golden.events;
            for i in 0..events.len() {
                for j in i + 1..events.len() {
                    if !depends_on(events[i].step.get(), events[j].step.get()) {
                        continue;
                    }
                    let mut swapped = golden.clone();
                    let (a, b) = (events[i].clone(), events[j].clone());
                    for (slot, from) in [(i, &b), (j, &a)] {
                        let e = &mut swapped.events[slot];
                        e.step = from.step;
                        e.actor = from.actor;
                        e.payload = from.payload.clone();
                    }
                    ensure(validate_trace(&swapped, kind).has_dependency_violation(), || {
                        format!("{name}/{}: swapping events {i} and {j} went unflagged", golden.request_id)
                    })?;
                    tried += 1;
                }
            }
        }
    }
    ensure(tried > 0, || "no dependency-ordered pairs".into())?;
    Ok(format!("{tried} transpositions over {traces} golden traces, all flagged"))
}

fn allocated_units(out: &uo_slicing::RunOutput) -> u32 {
    out.final_state.pools.values().map(|p| p.allocated_units()).sum()
}

fn c8_sharing_units() -> Check {
    let run = |extra: serde_json::Value, n: usize| {
        let reqs = (1..=n).map(|i| common::request(&format!("r{i}"), &format!("t{i}"), extra.clone())).collect();
        let out = run_scenario(&common::scenario(reqs, None));
        assert!(out.report.requests.iter().all(|r| r.outcome == Outcome::Served));
        (allocated_units(&out), out.report.requests.iter().map(|r| r.config_type).collect::<Vec<_>>())
    };
    let shared = json!({ "customer_group": "open_public", "sharing_agreement": "within_location" });
    let (one2, t) = run(shared.clone(), 1);
    let (two2, t2) = run(shared, 2);
    ensure(t.iter().chain(&t2).all(|c| *c == Some(NsiConfigType::Type2)), || format!("types {t:?} {t2:?}"))?;
    ensure(two2 < 2 * one2, || format!("Type2: two use {two2}, one uses {one2}"))?;

    let (one1, t) = run(json!({}), 1);
    let (two1, t1) = run(json!({}), 2);
    ensure(t.iter().chain(&t1).all(|c| *c == Some(NsiConfigType::Type1)), || format!("types {t:?} {t1:?}"))?;
    ensure(two1 == 2 * one1, || format!("Type1: two use {two1}, one uses {one1}"))?;
    Ok(format!("Type2 {two2} < 2x{one2}, Type1 {two1} = 2x{one1}"))
}

fn c9_determinism() -> Check {
    let mut files = 0;
    for (name, _) in BUNDLED {
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        for d in &dirs {
            let out = run_scenario(&bundled(name).unwrap());
            emit_report(&out.report, &out.traces, d.path()).map_err(|e| e.to_string())?;
        }
        let list = |d: &tempfile::TempDir| -> BTreeMap<String, Vec<u8>> {
            let mut found = BTreeMap::new();
            let mut stack = vec![d.path().to_path_buf()];
            while let Some(p) = stack.pop() {
                for e in std::fs::read_dir(&p).unwrap() {
                    let path = e.unwrap().path();
                    if path.is_dir() {
                        stack.push(path);
                    } else {
                        let rel = path.strip_prefix(d.path()).unwrap().display().to_string();
                        found.insert(rel, std::fs::read(&path).unwrap());
                    }
                }
            }
            found
        };
        let (a, b) = (list(&dirs[0]), list(&dirs[1]));
        ensure(!a.is_empty() && a == b, || format!("{name}: outputs differ"))?;
        files += a.len();
    }
    Ok(format!("{files} files byte-identical across two runs"))
}

fn c10_mixed() -> Check {
    let a = run_scenario(&bundled("mixed_option_a").unwrap()).final_state;
    let nsis = live_nsis(&a);
    ensure(nsis.len() == 1, || format!("MixedOptionA: {} NSIs", nsis.len()))?;
    let domains: BTreeSet<String> =
        a.nssis.iter().filter(|x| nsis[0].constituents.contains(&x.id)).map(|x| x.owner_domain.to_string()).collect();
    ensure(domains.len() == 2, || format!("MixedOptionA NSSI domains {domains:?}"))?;

    let b = run_scenario(&bundled("mixed_option_b").unwrap()).final_state;
    ensure(b.services.len() == 1, || format!("MixedOptionB: {} services", b.services.len()))?;
    let svc = &b.services[0];
    ensure(svc.nsi_ids.len() == 2, || format!("MixedOptionB service has {} NSIs", svc.nsi_ids.len()))?;
    let owners: BTreeSet<String> =
        b.nsis.iter().filter(|n| svc.nsi_ids.contains(&n.id)).map(|n| n.owner_domain.to_string()).collect();
    ensure(owners.len() == 2, || format!("MixedOptionB NSI domains {owners:?}"))?;
    Ok(format!("A: 1 NSI over {domains:?}; B: 1 service over {owners:?}"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("fixtures reach expected outcomes with conformant traces", c1_fixtures),
        ("golden traces: dep A steps and dep B step 6, byte-exact", c2_goldens),
        ("no Type1 isolation violations over random scenarios", c3_isolation),
        ("conservation after every event, pools restored", c4_conservation),
        ("injected rejections stop at step 4 with zero deltas", c5_injected_rejections),
        ("lifecycle sequences stay defined and Terminated is final", c6_lifecycle),
        ("dependency-ordered transpositions are flagged", c7_transpositions),
        ("Type2 sharing saves units, Type1 does not", c8_sharing_units),
        ("same seed gives byte-identical output", c9_determinism),
        ("mixed options have the expected structure", c10_mixed),
    ];
    let mut failed = 0;
    for (i, (label, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        match result {
            Ok(detail) => println!("PASS {:>2} {label}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {label}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
