mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vertisync::export;
use vertisync::network::build_slot_system;
use vertisync::presets;
use vertisync::sim::{check_safety, metrics, monte_carlo, run, PolicyKind, RunOptions};

use common::{random_demand, random_network, spread_fleet};

fn random_case(seed: u64) -> (vertisync::NetworkSpec, vertisync::sim::DemandProfile) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = random_network(&mut rng);
    let demand = random_demand(&mut rng, &net, 150);
    (net, demand)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn policies_are_safe_and_conserve_requests(case in 0u64..10_000, seed in 0u64..1000) {
        let (net, demand) = random_case(case);
        let slots = build_slot_system(&net);
        let fleet = spread_fleet(&net, slots.total_distinct());
        for policy in [PolicyKind::VertiSync, PolicyKind::Fcfs] {
            let trace = run(&net, &slots, policy, &demand, &fleet, seed, 300, &RunOptions::default()).unwrap();
            let v = check_safety(&net, &slots, &trace.initial_fleet, &trace.flights, &trace.requests).unwrap();
            prop_assert!(v.is_empty(), "{policy}: {:?}", &v[..v.len().min(3)]);
            prop_assert_eq!(trace.check_conservation(&net), Ok(()));
        }
    }

    #[test]
    fn cycles_stay_within_their_bound(case in 0u64..10_000, seed in 0u64..1000) {
        let (net, demand) = random_case(case);
        let slots = build_slot_system(&net);
        let fleet = spread_fleet(&net, slots.total_distinct());
        let trace = run(&net, &slots, PolicyKind::VertiSync, &demand, &fleet, seed, 300, &RunOptions::default()).unwrap();
        for c in &trace.cycles {
            prop_assert!(c.length() <= c.bound, "cycle {} length {} bound {}", c.index, c.length(), c.bound);
            prop_assert_eq!(&c.serviced.iter().map(|&s| s as u64).collect::<Vec<_>>(), &c.queue);
        }
    }
}

#[test]
fn runs_are_deterministic() {
    let sc = presets::la_morning();
    for policy in [PolicyKind::VertiSync, PolicyKind::Fcfs] {
        let a = run(
            &sc.net,
            &sc.slots,
            policy,
            &sc.demand,
            &sc.fleet(),
            3,
            sc.horizon_steps,
            &sc.options,
        )
        .unwrap();
        let b = run(
            &sc.net,
            &sc.slots,
            policy,
            &sc.demand,
            &sc.fleet(),
            3,
            sc.horizon_steps,
            &sc.options,
        )
        .unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn trace_round_trips_through_csv() {
    let sc = presets::la_morning();
    let tmp = tempfile::tempdir().unwrap();
    for policy in [PolicyKind::VertiSync, PolicyKind::Fcfs] {
        let trace = run(
            &sc.net,
            &sc.slots,
            policy,
            &sc.demand,
            &sc.fleet(),
            5,
            sc.horizon_steps,
            &sc.options,
        )
        .unwrap();
        let v = check_safety(
            &sc.net,
            &sc.slots,
            &trace.initial_fleet,
            &trace.flights,
            &trace.requests,
        )
        .unwrap();
        let dir = tmp.path().join(policy.name());
        export::write_trace(&dir, &sc.net, &trace, &v).unwrap();
        let back = export::read_trace(&dir, &sc.net).unwrap();
        assert_eq!(metrics(&back), metrics(&trace));
        assert_eq!(back, trace);
    }
}

#[test]
fn one_seed_aggregate_matches_the_run() {
    let sc = presets::la_morning();
    let agg = monte_carlo(
        &sc.net,
        &sc.slots,
        PolicyKind::Fcfs,
        &sc.demand,
        &sc.fleet(),
        &[11],
        sc.horizon_steps,
        &sc.options,
    );
    let trace = run(
        &sc.net,
        &sc.slots,
        PolicyKind::Fcfs,
        &sc.demand,
        &sc.fleet(),
        11,
        sc.horizon_steps,
        &sc.options,
    )
    .unwrap();
    let m = metrics(&trace);
    assert_eq!(agg.outcomes.len(), 1);
    assert_eq!(agg.outcomes[0].result, Ok((m.clone(), 0)));
    assert_eq!(agg.mean_peak_travel_min, m.peak_travel_min);
    assert_eq!(agg.mean_serviced, Some(m.serviced as f64));
    let again = monte_carlo(
        &sc.net,
        &sc.slots,
        PolicyKind::Fcfs,
        &sc.demand,
        &sc.fleet(),
        &[11],
        sc.horizon_steps,
        &sc.options,
    );
    assert_eq!(agg, again);
}

#[test]
fn over_capacity_demand_grows_the_queue() {
    // 1.5 times the corridor limit on the Los Angeles morning pairs
    let sc = presets::la_morning();
    let morning = sc.demand.support();
    let rates: Vec<f64> = sc
        .net
        .pair_ids()
        .map(|p| if morning.contains(&p) { 0.375 } else { 0.0 })
        .collect();
    let horizon = 600;
    let demand =
        vertisync::sim::DemandProfile::constant(vertisync::sim::ProcessKind::PoissonCounts, horizon, &rates).unwrap();
    let trace = run(
        &sc.net,
        &sc.slots,
        PolicyKind::Fcfs,
        &demand,
        &sc.fleet(),
        0,
        horizon,
        &sc.options,
    )
    .unwrap();
    let q = trace.queues();
    let total = |t: usize| q[t].iter().map(|&x| x as f64).sum::<f64>();
    let half = horizon as usize / 2;
    let slope = (total(horizon as usize - 1) - total(half)) / (horizon as usize - 1 - half) as f64;
    // at least half the 0.5 per step excess accumulates
    assert!(slope >= 0.25, "slope {slope}");
}
