//! Service vectors: per-pair takeoff rates on the `1/k_tau` lattice that a
//! conflict-free periodic schedule can sustain.
//!
//! A rate `m/k_tau` for pair `p` means `m` takeoffs per `k_tau` steps. The
//! witness assigns those takeoffs to distinct offsets in `0..k_tau`, and the
//! schedule repeats every `k_tau` steps. Slot occupancy is checked on
//! residues modulo `k_tau`, which is exact for a periodic schedule.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use crate::network::{NetworkSpec, PairId, SlotSystem, VertiportId};

/// A verified service vector with its periodic witness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceVector {
    pub id: usize,
    /// Takeoffs per `k_tau` steps for every pair.
    pub multiples: Vec<u32>,
    /// Takeoff offsets within `0..k_tau` per pair; `offsets[p].len() == multiples[p]`.
    pub offsets: Vec<Vec<u32>>,
    pub k_tau: u32,
}

impl ServiceVector {
    pub fn rates(&self) -> Vec<f64> {
        self.multiples.iter().map(|&m| m as f64 / self.k_tau as f64).collect()
    }

    pub fn rate(&self, p: PairId) -> f64 {
        self.multiples[p.0] as f64 / self.k_tau as f64
    }

    pub fn support(&self) -> impl Iterator<Item = PairId> + '_ {
        self.multiples
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0)
            .map(|(p, _)| PairId(p))
    }

    /// Takeoff steps of pair `p` in `[start, end)` when the pattern is anchored at `anchor`.
    pub fn takeoffs_between(&self, p: PairId, anchor: i64, start: i64, end: i64) -> Vec<i64> {
        let k = self.k_tau as i64;
        let mut out = Vec::new();
        for &o in &self.offsets[p.0] {
            let first = anchor + o as i64;
            let mut t = if first >= start {
                first
            } else {
                first + ((start - first + k - 1) / k) * k
            };
            while t < end {
                out.push(t);
                t += k;
            }
        }
        out.sort_unstable();
        out
    }
}

/// Why a rate vector is not a service vector.
#[derive(Debug, Clone, PartialEq)]
pub enum Rejection {
    OffLattice {
        pair: PairId,
        rate: f64,
    },
    WrongLength {
        expected: usize,
        got: usize,
    },
    /// The set of service vectors contains non-zero vectors only.
    Zero,
    Conflict(ConflictReport),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConflictReport {
    /// Two takeoffs reach the same slot class at the same step (mod `k_tau`).
    Slot {
        step: u32,
        class: usize,
        pairs: (PairId, PairId),
    },
    /// More takeoffs per period than vertipads.
    TakeoffSeparation {
        vertiport: VertiportId,
        takeoffs: u32,
        pads: u32,
    },
    /// Landings per period plus simultaneous takeoffs exceed the vertipads.
    Landing {
        vertiport: VertiportId,
        step: u32,
        demand: u32,
        pads: u32,
    },
}

impl fmt::Display for ConflictReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConflictReport::Slot { step, class, pairs } => write!(
                f,
                "slot class {class} occupied twice at step {step} (mod k_tau) by pairs {} and {}",
                pairs.0, pairs.1
            ),
            ConflictReport::TakeoffSeparation {
                vertiport,
                takeoffs,
                pads,
            } => write!(
                f,
                "vertiport {} needs {takeoffs} takeoffs per period with {pads} vertipads",
                vertiport.0
            ),
            ConflictReport::Landing {
                vertiport,
                step,
                demand,
                pads,
            } => write!(
                f,
                "vertiport {} needs {demand} pads at step {step} (mod k_tau) with {pads} vertipads",
                vertiport.0
            ),
        }
    }
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rejection::OffLattice { pair, rate } => write!(f, "rate {rate} of pair {pair} is off the 1/k_tau lattice"),
            Rejection::WrongLength { expected, got } => {
                write!(f, "vector has {got} entries, network has {expected} pairs")
            }
            Rejection::Zero => write!(f, "the zero vector is not a service vector"),
            Rejection::Conflict(c) => write!(f, "{c}"),
        }
    }
}

/// Converts rates to lattice multiples, rejecting off-lattice entries.
pub fn to_multiples(k_tau: u32, rates: &[f64]) -> Result<Vec<u32>, Rejection> {
    rates
        .iter()
        .enumerate()
        .map(|(p, &r)| {
            let scaled = r * k_tau as f64;
            let m = scaled.round();
            if !(0.0..=1.0 + 1e-12).contains(&r) || (scaled - m).abs() > 1e-9 {
                Err(Rejection::OffLattice {
                    pair: PairId(p),
                    rate: r,
                })
            } else {
                Ok(m as u32)
            }
        })
        .collect()
}

/// Incremental occupancy of one period, used by the witness search.
struct Period<'a> {
    net: &'a NetworkSpec,
    slots: &'a SlotSystem,
    k: u32,
    /// owner of each (class, residue), indexed `class * k + residue`
    slot_owner: Vec<Option<PairId>>,
    /// takeoffs per vertiport per residue
    takeoffs_at: Vec<Vec<u32>>,
    /// landings per period per vertiport
    landings: Vec<u32>,
}

impl<'a> Period<'a> {
    fn new(net: &'a NetworkSpec, slots: &'a SlotSystem, multiples: &[u32]) -> Self {
        let k = net.k_tau;
        let mut landings = vec![0; net.vertiports.len()];
        for (p, &m) in multiples.iter().enumerate() {
            landings[net.od_pairs[p].destination.0] += m;
        }
        Self {
            net,
            slots,
            k,
            slot_owner: vec![None; slots.total_distinct() * k as usize],
            takeoffs_at: vec![vec![0; k as usize]; net.vertiports.len()],
            landings,
        }
    }

    /// Checks takeoff separation for the whole vector before any offsets are placed.
    fn static_check(&self, multiples: &[u32]) -> Option<ConflictReport> {
        let mut takeoffs = vec![0u32; self.net.vertiports.len()];
        for (p, &m) in multiples.iter().enumerate() {
            takeoffs[self.net.od_pairs[p].origin.0] += m;
        }
        // each class holds at most one aircraft per step, so at most k_tau passages per period
        let mut passages: HashMap<usize, (u32, PairId)> = HashMap::new();
        for (p, &m) in multiples.iter().enumerate().filter(|(_, &m)| m > 0) {
            for (_, class) in self.slots.interior(PairId(p)) {
                let entry = passages.entry(class).or_insert((0, PairId(p)));
                entry.0 += m;
                if entry.0 > self.k {
                    return Some(ConflictReport::Slot {
                        step: 0,
                        class,
                        pairs: (entry.1, PairId(p)),
                    });
                }
            }
        }
        for (v, spec) in self.net.vertiports.iter().enumerate() {
            if takeoffs[v] > spec.num_vertipads {
                return Some(ConflictReport::TakeoffSeparation {
                    vertiport: VertiportId(v),
                    takeoffs: takeoffs[v],
                    pads: spec.num_vertipads,
                });
            }
            if self.landings[v] > spec.num_vertipads {
                return Some(ConflictReport::Landing {
                    vertiport: VertiportId(v),
                    step: 0,
                    demand: self.landings[v],
                    pads: spec.num_vertipads,
                });
            }
        }
        None
    }

    fn conflict(&self, p: PairId, offset: u32) -> Option<ConflictReport> {
        let pair = self.net.pair(p);
        let v = pair.origin.0;
        let pads = self.net.vertiports[v].num_vertipads;
        let demand = self.takeoffs_at[v][offset as usize] + 1 + self.landings[v];
        if demand > pads {
            return Some(ConflictReport::Landing {
                vertiport: pair.origin,
                step: offset,
                demand,
                pads,
            });
        }
        for (i, class) in self.slots.interior(p) {
            let res = (offset + i) % self.k;
            if let Some(other) = self.slot_owner[class * self.k as usize + res as usize] {
                return Some(ConflictReport::Slot {
                    step: res,
                    class,
                    pairs: (other, p),
                });
            }
        }
        None
    }

    fn place(&mut self, p: PairId, offset: u32) {
        let v = self.net.pair(p).origin.0;
        self.takeoffs_at[v][offset as usize] += 1;
        for (i, class) in self.slots.interior(p) {
            self.slot_owner[class * self.k as usize + ((offset + i) % self.k) as usize] = Some(p);
        }
    }

    fn remove(&mut self, p: PairId, offset: u32) {
        let v = self.net.pair(p).origin.0;
        self.takeoffs_at[v][offset as usize] -= 1;
        for (i, class) in self.slots.interior(p) {
            self.slot_owner[class * self.k as usize + ((offset + i) % self.k) as usize] = None;
        }
    }
}

struct WitnessSearch<'a> {
    period: Period<'a>,
    multiples: &'a [u32],
    order: Vec<PairId>,
    offsets: Vec<Vec<u32>>,
    first_conflict: Option<ConflictReport>,
    budget: usize,
}

impl WitnessSearch<'_> {
    /// Places offsets for `order[depth..]`, lexicographically earliest first.
    fn search(&mut self, depth: usize, from: u32) -> bool {
        if self.budget == 0 {
            return false;
        }
        self.budget -= 1;
        let Some(&p) = self.order.get(depth) else { return true };
        let need = self.multiples[p.0] as usize;
        if self.offsets[p.0].len() == need {
            return self.search(depth + 1, 0);
        }
        let remaining = need - self.offsets[p.0].len();
        let k = self.period.k;
        // rotating a periodic schedule keeps it feasible, so the very first takeoff sits at 0
        let last = if depth == 0 && self.offsets[p.0].is_empty() {
            1
        } else {
            k
        };
        for o in from..last {
            if (k - o) < remaining as u32 {
                break;
            }
            match self.period.conflict(p, o) {
                Some(c) => {
                    if self.first_conflict.is_none() {
                        self.first_conflict = Some(c);
                    }
                }
                None => {
                    self.period.place(p, o);
                    self.offsets[p.0].push(o);
                    if self.viable(depth, o + 1) && self.search(depth, o + 1) {
                        return true;
                    }
                    self.offsets[p.0].pop();
                    self.period.remove(p, o);
                }
            }
        }
        false
    }

    /// Forward check: every unplaced takeoff still has enough free offsets.
    fn viable(&self, depth: usize, from: u32) -> bool {
        let k = self.period.k;
        self.order[depth..].iter().enumerate().all(|(j, &q)| {
            let need = self.multiples[q.0] as usize - self.offsets[q.0].len();
            if need == 0 {
                return true;
            }
            let start = if j == 0 { from } else { 0 };
            let free = (start..k)
                .filter(|&o| self.period.conflict(q, o).is_none())
                .take(need)
                .count();
            free >= need
        })
    }
}

const WITNESS_BUDGET: usize = 200_000;

fn find_witness(net: &NetworkSpec, slots: &SlotSystem, multiples: &[u32]) -> Result<Vec<Vec<u32>>, ConflictReport> {
    let period = Period::new(net, slots, multiples);
    if let Some(c) = period.static_check(multiples) {
        return Err(c);
    }
    let order: Vec<PairId> = (0..multiples.len()).filter(|&p| multiples[p] > 0).map(PairId).collect();
    let mut search = WitnessSearch {
        period,
        multiples,
        order,
        offsets: vec![Vec::new(); multiples.len()],
        first_conflict: None,
        budget: WITNESS_BUDGET,
    };
    if search.search(0, 0) {
        Ok(search.offsets)
    } else {
        Err(search.first_conflict.unwrap_or(ConflictReport::Slot {
            step: 0,
            class: 0,
            pairs: (PairId(0), PairId(0)),
        }))
    }
}

/// Checks that `rates` is a service vector and returns it with the earliest
/// feasible periodic witness (pairs in index order, offsets ascending).
pub fn verify_service_vector(net: &NetworkSpec, slots: &SlotSystem, rates: &[f64]) -> Result<ServiceVector, Rejection> {
    if rates.len() != net.num_pairs() {
        return Err(Rejection::WrongLength {
            expected: net.num_pairs(),
            got: rates.len(),
        });
    }
    let multiples = to_multiples(net.k_tau, rates)?;
    if multiples.iter().all(|&m| m == 0) {
        return Err(Rejection::Zero);
    }
    let offsets = find_witness(net, slots, &multiples).map_err(Rejection::Conflict)?;
    Ok(ServiceVector {
        id: 0,
        multiples,
        offsets,
        k_tau: net.k_tau,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumerateOptions {
    /// Vectors with more non-zero entries are skipped.
    pub max_active_pairs: Option<usize>,
    /// Keep only vectors not dominated componentwise by another.
    pub maximal_only: bool,
    /// Restrict the support to these pairs (others stay zero).
    pub pairs: Option<Vec<PairId>>,
    /// Cap on feasibility checks before the result is flagged truncated.
    pub budget: usize,
}

impl Default for EnumerateOptions {
    fn default() -> Self {
        Self {
            max_active_pairs: None,
            maximal_only: false,
            pairs: None,
            budget: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VectorSet {
    pub vectors: Vec<ServiceVector>,
    pub truncated: bool,
}

impl VectorSet {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn rate_matrix(&self) -> Vec<Vec<f64>> {
        self.vectors.iter().map(ServiceVector::rates).collect()
    }
}

/// Enumerates service vectors by depth-first search over the rate lattice.
///
/// Feasibility is downward closed, so once a pair's multiple fails for a
/// given prefix every larger multiple is skipped.
pub fn enumerate_service_vectors(net: &NetworkSpec, slots: &SlotSystem, options: &EnumerateOptions) -> VectorSet {
    let n = net.num_pairs();
    let pairs: Vec<PairId> = match &options.pairs {
        Some(list) => {
            let mut l: Vec<PairId> = list.iter().copied().filter(|p| p.0 < n).collect();
            l.sort();
            l.dedup();
            l
        }
        None => net.pair_ids().collect(),
    };
    let mut feasible: BTreeMap<Vec<u32>, Vec<Vec<u32>>> = BTreeMap::new();
    let mut checks = 0usize;
    let mut truncated = false;
    let mut current = vec![0u32; n];

    #[allow(clippy::too_many_arguments)]
    fn dfs(
        net: &NetworkSpec,
        slots: &SlotSystem,
        options: &EnumerateOptions,
        pairs: &[PairId],
        depth: usize,
        active: usize,
        current: &mut Vec<u32>,
        feasible: &mut BTreeMap<Vec<u32>, Vec<Vec<u32>>>,
        checks: &mut usize,
        truncated: &mut bool,
    ) {
        if depth == pairs.len() {
            return;
        }
        let p = pairs[depth];
        // leave this pair at zero
        dfs(
            net,
            slots,
            options,
            pairs,
            depth + 1,
            active,
            current,
            feasible,
            checks,
            truncated,
        );
        if options.max_active_pairs.is_some_and(|cap| active >= cap) {
            return;
        }
        for m in 1..=net.k_tau {
            if *checks >= options.budget {
                *truncated = true;
                return;
            }
            *checks += 1;
            current[p.0] = m;
            match find_witness(net, slots, current) {
                Ok(offsets) => {
                    feasible.insert(current.clone(), offsets);
                    dfs(
                        net,
                        slots,
                        options,
                        pairs,
                        depth + 1,
                        active + 1,
                        current,
                        feasible,
                        checks,
                        truncated,
                    );
                }
                Err(_) => break,
            }
        }
        current[p.0] = 0;
    }

    dfs(
        net,
        slots,
        options,
        &pairs,
        0,
        0,
        &mut current,
        &mut feasible,
        &mut checks,
        &mut truncated,
    );

    let keys: HashSet<Vec<u32>> = feasible.keys().cloned().collect();
    let mut vectors = Vec::new();
    for (multiples, offsets) in feasible {
        if options.maximal_only {
            let dominated = pairs.iter().any(|p| {
                let mut up = multiples.clone();
                up[p.0] += 1;
                keys.contains(&up)
            });
            if dominated {
                continue;
            }
        }
        vectors.push(ServiceVector {
            id: vectors.len(),
            multiples,
            offsets,
            k_tau: net.k_tau,
        });
    }
    VectorSet { vectors, truncated }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_slot_system, load_network};
    use crate::presets;

    #[test]
    fn example_one_vector_and_offsets() {
        let net = presets::example1_network();
        let slots = build_slot_system(&net);
        let v = verify_service_vector(&net, &slots, &[0.1, 0.0, 0.0, 0.1, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(v.offsets[0], vec![0]);
        assert_eq!(v.offsets[3], vec![1]);
    }

    #[test]
    fn zero_vector_rejected() {
        let net = presets::example1_network();
        let slots = build_slot_system(&net);
        assert_eq!(verify_service_vector(&net, &slots, &[0.0; 8]), Err(Rejection::Zero));
    }

    #[test]
    fn off_lattice_rejected() {
        let net = presets::example1_network();
        let slots = build_slot_system(&net);
        let err = verify_service_vector(&net, &slots, &[0.05, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Rejection::OffLattice { pair: PairId(0), .. }));
    }

    const OVERLAP: &str = r#"
tau_min = 1.0
tau_c_min = 1.0
[[vertiports]]
id = "A"
num_vertipads = 4
[[vertiports]]
id = "B"
num_vertipads = 4
[[vertiports]]
id = "C"
num_vertipads = 4
[[od_pairs]]
origin = "A"
destination = "C"
flight_time_min = 4.0
links = ["trunk"]
[[od_pairs]]
origin = "B"
destination = "C"
flight_time_min = 4.0
links = ["trunk"]
[[od_pairs]]
origin = "C"
destination = "A"
flight_time_min = 4.0
links = ["back"]
[[od_pairs]]
origin = "C"
destination = "B"
flight_time_min = 4.0
links = ["back2"]
[[coincidences]]
length = 3
members = [{ origin = "A", destination = "C", start = 1 }, { origin = "B", destination = "C", start = 1 }]
"#;

    #[test]
    fn fully_coinciding_routes_conflict() {
        let net = load_network(OVERLAP).unwrap();
        let slots = build_slot_system(&net);
        let err = verify_service_vector(&net, &slots, &[1.0, 1.0, 0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Rejection::Conflict(ConflictReport::Slot { .. })), "{err}");
        assert!(verify_service_vector(&net, &slots, &[1.0, 0.0, 0.0, 0.0]).is_ok());
    }

    #[test]
    fn single_pair_single_pad_maximal_set() {
        let text = r#"
tau_min = 5.0
tau_c_min = 0.5
[[vertiports]]
id = "A"
num_vertipads = 1
[[vertiports]]
id = "B"
num_vertipads = 1
[[od_pairs]]
origin = "A"
destination = "B"
flight_time_min = 2.0
links = ["ab"]
[[od_pairs]]
origin = "B"
destination = "A"
flight_time_min = 2.0
links = ["ba"]
"#;
        let net = load_network(text).unwrap();
        let slots = build_slot_system(&net);
        let opts = EnumerateOptions {
            maximal_only: true,
            pairs: Some(vec![PairId(0)]),
            ..Default::default()
        };
        let set = enumerate_service_vectors(&net, &slots, &opts);
        assert_eq!(set.len(), 1);
        assert_eq!(set.vectors[0].rates(), vec![0.1, 0.0]);
    }

    #[test]
    fn empty_network_enumerates_nothing() {
        let net =
            load_network("tau_min = 5.0\ntau_c_min = 0.5\n[[vertiports]]\nid = \"x\"\nnum_vertipads = 1\n").unwrap();
        let slots = build_slot_system(&net);
        assert!(enumerate_service_vectors(&net, &slots, &EnumerateOptions::default()).is_empty());
    }

    #[test]
    fn enumeration_is_sorted_and_downward_closed() {
        let net = presets::example1_network();
        let slots = build_slot_system(&net);
        let set = enumerate_service_vectors(&net, &slots, &EnumerateOptions::default());
        assert!(!set.truncated);
        let keys: HashSet<_> = set.vectors.iter().map(|v| v.multiples.clone()).collect();
        for w in set.vectors.windows(2) {
            assert!(w[0].multiples < w[1].multiples);
        }
        for v in &set.vectors {
            for p in 0..v.multiples.len() {
                if v.multiples[p] > 0 {
                    let mut down = v.multiples.clone();
                    down[p] -= 1;
                    assert!(down.iter().all(|&m| m == 0) || keys.contains(&down));
                }
            }
        }
    }

    #[test]
    fn takeoff_times_follow_offsets() {
        let v = ServiceVector {
            id: 0,
            multiples: vec![2],
            offsets: vec![vec![1, 6]],
            k_tau: 10,
        };
        assert_eq!(
            v.takeoffs_between(PairId(0), 100, 100, 125),
            vec![101, 106, 111, 116, 121]
        );
        assert_eq!(v.takeoffs_between(PairId(0), 100, 107, 112), vec![111]);
    }
}
