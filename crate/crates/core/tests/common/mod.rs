#![allow(dead_code)]

use std::fmt::Write as _;

use rand::Rng;
use vertisync::network::{load_network, NetworkSpec, PairId, SlotSystem, VertiportId};
use vertisync::schedule::AircraftState;
use vertisync::sim::{DemandProfile, ProcessKind};

/// A small random network: a ring of 2 to 4 vertiports with its reverse
/// ring, an optional chord, and sometimes one shared interior slot between
/// two routes.
pub fn random_network(rng: &mut impl Rng) -> NetworkSpec {
    let n = rng.gen_range(2..=4usize);
    let k = rng.gen_range(2..=4u32);
    let tau_c = 0.5;
    let mut text = format!("tau_min = {}\ntau_c_min = {tau_c}\n", k as f64 * tau_c);
    for v in 0..n {
        write!(
            text,
            "[[vertiports]]\nid = \"v{v}\"\nnum_vertipads = {}\n",
            rng.gen_range(1..=2)
        )
        .unwrap();
    }
    let mut pairs: Vec<(usize, usize, u32)> = Vec::new();
    for v in 0..n {
        let w = (v + 1) % n;
        if !pairs.iter().any(|&(a, b, _)| (a, b) == (v, w)) {
            pairs.push((v, w, rng.gen_range(2..=8)));
        }
        if !pairs.iter().any(|&(a, b, _)| (a, b) == (w, v)) {
            pairs.push((w, v, rng.gen_range(2..=8)));
        }
    }
    if n == 4 && rng.gen_bool(0.5) {
        pairs.push((0, 2, rng.gen_range(2..=8)));
    }
    let shared = if pairs.len() >= 2 && rng.gen_bool(0.5) {
        let a = rng.gen_range(0..pairs.len());
        let b = (a + rng.gen_range(1..pairs.len())) % pairs.len();
        Some((a, b))
    } else {
        None
    };
    for (i, &(o, d, f)) in pairs.iter().enumerate() {
        let mut links = vec![format!("\"l{i}\"")];
        if matches!(shared, Some((a, b)) if a == i || b == i) {
            links.push("\"shared\"".to_string());
        }
        write!(
            text,
            "[[od_pairs]]\norigin = \"v{o}\"\ndestination = \"v{d}\"\nflight_time_min = {}\nlinks = [{}]\n",
            f as f64 * tau_c,
            links.join(", ")
        )
        .unwrap();
    }
    if let Some((a, b)) = shared {
        let (pa, pb) = (pairs[a], pairs[b]);
        let sa = rng.gen_range(1..pa.2);
        let sb = rng.gen_range(1..pb.2);
        write!(
            text,
            "[[coincidences]]\nmembers = [{{ origin = \"v{}\", destination = \"v{}\", start = {sa} }}, {{ origin = \"v{}\", destination = \"v{}\", start = {sb} }}]\n",
            pa.0, pa.1, pb.0, pb.1
        )
        .unwrap();
    }
    load_network(&text).unwrap_or_else(|e| panic!("generated network is invalid: {e}\n{text}"))
}

/// Constant Bernoulli demand on a random subset of pairs.
pub fn random_demand(rng: &mut impl Rng, net: &NetworkSpec, horizon: i64) -> DemandProfile {
    let mut rates = vec![0.0; net.num_pairs()];
    for r in rates.iter_mut() {
        if rng.gen_bool(0.7) {
            *r = rng.gen_range(0.005..0.06);
        }
    }
    if rates.iter().all(|&r| r == 0.0) {
        rates[0] = 0.03;
    }
    DemandProfile::constant(ProcessKind::Bernoulli, horizon, &rates).unwrap()
}

/// `size` aircraft spread round-robin over the vertiports.
pub fn spread_fleet(net: &NetworkSpec, size: usize) -> Vec<AircraftState> {
    (0..size)
        .map(|i| AircraftState::parked(i, VertiportId(i % net.vertiports.len()), 0))
        .collect()
}

pub fn fleet_for(slots: &SlotSystem) -> usize {
    slots.total_distinct()
}

pub fn pair(net: &NetworkSpec, o: &str, d: &str) -> PairId {
    net.find_pair(o, d).unwrap()
}
