//! Network description: vertiports, O-D pairs, separations and the slot system
//! built on top of them.
//!
//! All engine arithmetic is done in integer steps of `tau_c`; minutes only
//! appear in the config file and in reports.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::Deserialize;

use crate::error::{Error, Result};

/// Discrete time index, one step is `tau_c` minutes.
pub type Step = i64;

/// Index of an O-D pair inside [`NetworkSpec::od_pairs`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
pub struct PairId(pub usize);

/// Index of a vertiport inside [`NetworkSpec::vertiports`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
pub struct VertiportId(pub usize);

impl fmt::Display for PairId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertiportSpec {
    pub id: String,
    pub num_vertipads: u32,
    /// `None` means unbounded parking.
    pub parking_capacity: Option<u32>,
}

/// An ordered origin/destination pair with its unique route.
#[derive(Debug, Clone, PartialEq)]
pub struct OdPair {
    pub origin: VertiportId,
    pub destination: VertiportId,
    /// Flight time in steps (`T_p / tau_c`).
    pub flight_steps: u32,
    pub links: Vec<String>,
}

impl OdPair {
    /// Number of slots along the route, first on the origin pad and last on
    /// the destination pad.
    pub fn slot_count(&self) -> u32 {
        self.flight_steps + 1
    }
}

/// One slot of one O-D pair, as written in the `coincidences` section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SlotRef {
    pub pair: PairId,
    pub index: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub tau_min: f64,
    pub tau_c_min: f64,
    /// `tau / tau_c`, integral.
    pub k_tau: u32,
    pub vertiports: Vec<VertiportSpec>,
    pub od_pairs: Vec<OdPair>,
    /// Groups of slots that occupy the same airspace position.
    pub coincidences: Vec<Vec<SlotRef>>,
}

// ---- config schema -------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    tau_min: f64,
    tau_c_min: f64,
    vertiports: Vec<RawVertiport>,
    #[serde(default)]
    od_pairs: Vec<RawPair>,
    #[serde(default)]
    coincidences: Vec<RawCoincidence>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVertiport {
    id: String,
    num_vertipads: u32,
    #[serde(default)]
    parking: Option<RawParking>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawParking {
    Count(u32),
    Word(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPair {
    origin: String,
    destination: String,
    flight_time_min: f64,
    #[serde(default)]
    links: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoincidence {
    #[serde(default = "one")]
    length: u32,
    members: Vec<RawSlot>,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSlot {
    origin: String,
    destination: String,
    start: u32,
}

fn integral_ratio(num: f64, den: f64) -> Option<u32> {
    let r = num / den;
    let rounded = r.round();
    if rounded >= 1.0 && (r - rounded).abs() <= 1e-9 * r.max(1.0) {
        Some(rounded as u32)
    } else {
        None
    }
}

/// Parses and validates a network config (TOML).
pub fn load_network(config_text: &str) -> Result<NetworkSpec> {
    let raw: RawNetwork = toml::from_str(config_text).map_err(|e| Error::Parse(e.to_string()))?;
    let mut problems = Vec::new();

    if !(raw.tau_min > 0.0 && raw.tau_min.is_finite()) {
        problems.push(format!("tau_min must be positive, got {}", raw.tau_min));
    }
    if !(raw.tau_c_min > 0.0 && raw.tau_c_min.is_finite()) {
        problems.push(format!("tau_c_min must be positive, got {}", raw.tau_c_min));
    }
    let k_tau = if problems.is_empty() {
        match integral_ratio(raw.tau_min, raw.tau_c_min) {
            Some(k) => k,
            None => {
                problems.push(format!(
                    "tau_min / tau_c_min = {} is not a positive integer (k_tau not integral)",
                    raw.tau_min / raw.tau_c_min
                ));
                1
            }
        }
    } else {
        1
    };

    let mut vertiports = Vec::new();
    let mut index_of = BTreeMap::new();
    for v in &raw.vertiports {
        if index_of.insert(v.id.clone(), VertiportId(vertiports.len())).is_some() {
            problems.push(format!("duplicate vertiport id {:?}", v.id));
        }
        if v.num_vertipads == 0 {
            problems.push(format!("vertiport {:?} has no vertipads", v.id));
        }
        let parking_capacity = match &v.parking {
            None => None,
            Some(RawParking::Count(0)) => {
                problems.push(format!("vertiport {:?} has zero parking", v.id));
                None
            }
            Some(RawParking::Count(n)) => Some(*n),
            Some(RawParking::Word(w)) if w == "unbounded" => None,
            Some(RawParking::Word(w)) => {
                problems.push(format!(
                    "vertiport {:?}: parking {:?} is not a count or \"unbounded\"",
                    v.id, w
                ));
                None
            }
        };
        vertiports.push(VertiportSpec {
            id: v.id.clone(),
            num_vertipads: v.num_vertipads,
            parking_capacity,
        });
    }
    if vertiports.is_empty() {
        problems.push("network has no vertiports".to_string());
    }

    let mut od_pairs = Vec::new();
    let mut pair_index = BTreeMap::new();
    for p in &raw.od_pairs {
        let o = index_of.get(&p.origin).copied();
        let d = index_of.get(&p.destination).copied();
        if o.is_none() {
            problems.push(format!(
                "O-D pair ({},{}) references unknown origin",
                p.origin, p.destination
            ));
        }
        if d.is_none() {
            problems.push(format!(
                "O-D pair ({},{}) references unknown destination",
                p.origin, p.destination
            ));
        }
        if p.origin == p.destination {
            problems.push(format!(
                "O-D pair ({},{}) has origin equal to destination",
                p.origin, p.destination
            ));
        }
        let flight_steps = if p.flight_time_min > 0.0 && raw.tau_c_min > 0.0 {
            integral_ratio(p.flight_time_min, raw.tau_c_min)
        } else {
            None
        };
        if flight_steps.is_none() {
            problems.push(format!(
                "O-D pair ({},{}) flight time {} min is not a positive multiple of tau_c",
                p.origin, p.destination, p.flight_time_min
            ));
        }
        let key = (p.origin.clone(), p.destination.clone());
        if pair_index.insert(key, PairId(od_pairs.len())).is_some() {
            problems.push(format!("more than one route for ({},{})", p.origin, p.destination));
        }
        od_pairs.push(OdPair {
            origin: o.unwrap_or(VertiportId(0)),
            destination: d.unwrap_or(VertiportId(0)),
            flight_steps: flight_steps.unwrap_or(1),
            links: p.links.clone(),
        });
    }

    let mut coincidences = Vec::new();
    for (gi, group) in raw.coincidences.iter().enumerate() {
        if group.length == 0 {
            problems.push(format!("coincidence group {gi} has zero length"));
            continue;
        }
        let mut members = Vec::new();
        for m in &group.members {
            match pair_index.get(&(m.origin.clone(), m.destination.clone())) {
                Some(&pid) => members.push((pid, m.start)),
                None => problems.push(format!(
                    "coincidence group {gi} references undeclared pair ({},{})",
                    m.origin, m.destination
                )),
            }
        }
        for offset in 0..group.length {
            coincidences.push(
                members
                    .iter()
                    .map(|&(pair, start)| SlotRef {
                        pair,
                        index: start + offset,
                    })
                    .collect::<Vec<_>>(),
            );
        }
    }

    let net = NetworkSpec {
        tau_min: raw.tau_min,
        tau_c_min: raw.tau_c_min,
        k_tau,
        vertiports,
        od_pairs,
        coincidences,
    };
    if problems.is_empty() {
        net.check_invariants(&mut problems);
    }
    if problems.is_empty() {
        Ok(net)
    } else {
        Err(Error::InvalidNetwork(problems))
    }
}

impl NetworkSpec {
    fn check_invariants(&self, problems: &mut Vec<String>) {
        for group in &self.coincidences {
            let mut seen = BTreeSet::new();
            for s in group {
                let pair = &self.od_pairs[s.pair.0];
                if s.index >= pair.slot_count() {
                    problems.push(format!(
                        "coincidence references slot {} of pair {} which has {} slots",
                        s.index,
                        self.pair_label(s.pair),
                        pair.slot_count()
                    ));
                }
                if !seen.insert(s.pair) {
                    problems.push(format!(
                        "coincidence relates two slots of the same pair {}",
                        self.pair_label(s.pair)
                    ));
                }
            }
            for (i, a) in group.iter().enumerate() {
                for b in &group[i + 1..] {
                    let (pa, pb) = (&self.od_pairs[a.pair.0], &self.od_pairs[b.pair.0]);
                    if !pa.links.iter().any(|l| pb.links.contains(l)) {
                        problems.push(format!(
                            "pairs {} and {} coincide but share no link",
                            self.pair_label(a.pair),
                            self.pair_label(b.pair)
                        ));
                    }
                    let a_first = a.index == 0;
                    let b_first = b.index == 0;
                    let a_last = a.index + 1 == pa.slot_count();
                    let b_last = b.index + 1 == pb.slot_count();
                    let endpoint_clash = (a_first || a_last || b_first || b_last)
                        && !(a_first && b_first && pa.origin == pb.origin)
                        && !(a_last && b_last && pa.destination == pb.destination);
                    if endpoint_clash {
                        problems.push(format!(
                            "endpoint slot of {} coincides with a slot of {} at a different vertiport",
                            self.pair_label(a.pair),
                            self.pair_label(b.pair)
                        ));
                    }
                }
            }
        }
        if self.vertiports.len() > 1 && !self.strongly_connected() {
            problems.push("routes do not connect every vertiport to every other".to_string());
        }
    }

    fn strongly_connected(&self) -> bool {
        let n = self.vertiports.len();
        (0..n).all(|v| self.hop_distances(VertiportId(v)).iter().all(Option::is_some))
    }

    /// Hop distances along declared routes from `from` to every vertiport.
    pub fn hop_distances(&self, from: VertiportId) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.vertiports.len()];
        dist[from.0] = Some(0);
        let mut queue = VecDeque::from([from]);
        while let Some(v) = queue.pop_front() {
            let dv = dist[v.0].unwrap();
            for p in &self.od_pairs {
                if p.origin == v && dist[p.destination.0].is_none() {
                    dist[p.destination.0] = Some(dv + 1);
                    queue.push_back(p.destination);
                }
            }
        }
        dist
    }

    /// Shortest route sequence (by hops, then by lowest pair index) from one
    /// vertiport to another. Empty when `from == to`, `None` if unreachable.
    pub fn route_path(&self, from: VertiportId, to: VertiportId) -> Option<Vec<PairId>> {
        if from == to {
            return Some(Vec::new());
        }
        let mut prev: Vec<Option<PairId>> = vec![None; self.vertiports.len()];
        let mut visited = vec![false; self.vertiports.len()];
        visited[from.0] = true;
        let mut queue = VecDeque::from([from]);
        while let Some(v) = queue.pop_front() {
            for (pi, p) in self.od_pairs.iter().enumerate() {
                if p.origin == v && !visited[p.destination.0] {
                    visited[p.destination.0] = true;
                    prev[p.destination.0] = Some(PairId(pi));
                    queue.push_back(p.destination);
                }
            }
        }
        if !visited[to.0] {
            return None;
        }
        let mut path = Vec::new();
        let mut at = to;
        while at != from {
            let pid = prev[at.0]?;
            path.push(pid);
            at = self.od_pairs[pid.0].origin;
        }
        path.reverse();
        Some(path)
    }

    pub fn num_pairs(&self) -> usize {
        self.od_pairs.len()
    }

    pub fn pair(&self, p: PairId) -> &OdPair {
        &self.od_pairs[p.0]
    }

    pub fn pair_ids(&self) -> impl Iterator<Item = PairId> + '_ {
        (0..self.od_pairs.len()).map(PairId)
    }

    pub fn vertiport_index(&self, id: &str) -> Option<VertiportId> {
        self.vertiports.iter().position(|v| v.id == id).map(VertiportId)
    }

    pub fn find_pair(&self, origin: &str, destination: &str) -> Option<PairId> {
        let (o, d) = (self.vertiport_index(origin)?, self.vertiport_index(destination)?);
        self.od_pairs
            .iter()
            .position(|p| p.origin == o && p.destination == d)
            .map(PairId)
    }

    /// `(o, d)` as vertiport ids, for messages and CSV output.
    pub fn pair_label(&self, p: PairId) -> String {
        let pair = &self.od_pairs[p.0];
        format!(
            "({},{})",
            self.vertiports[pair.origin.0].id, self.vertiports[pair.destination.0].id
        )
    }

    /// The reverse pair `(d_p, o_p)` if it is declared.
    pub fn opposite(&self, p: PairId) -> Result<Option<PairId>> {
        let pair = self
            .od_pairs
            .get(p.0)
            .ok_or_else(|| Error::UnknownPair(p.0.to_string()))?;
        Ok(self
            .od_pairs
            .iter()
            .position(|q| q.origin == pair.destination && q.destination == pair.origin)
            .map(PairId))
    }

    /// Longest flight time in steps (`T̄ / tau_c`).
    pub fn max_flight_steps(&self) -> u32 {
        self.od_pairs.iter().map(|p| p.flight_steps).max().unwrap_or(0)
    }

    pub fn minutes(&self, steps: f64) -> f64 {
        steps * self.tau_c_min
    }
}

/// Per-pair slot sequences with the coincidence classes collapsed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotSystem {
    /// `class_of[p][i]` is the class of slot `i` of pair `p`.
    class_of: Vec<Vec<usize>>,
    /// Canonical (smallest) member of each class.
    representatives: Vec<SlotRef>,
    /// Members of each class, sorted.
    members: Vec<Vec<SlotRef>>,
}

impl SlotSystem {
    pub fn slots_of(&self, p: PairId) -> usize {
        self.class_of[p.0].len()
    }

    pub fn class(&self, p: PairId, index: u32) -> usize {
        self.class_of[p.0][index as usize]
    }

    pub fn representative(&self, class: usize) -> SlotRef {
        self.representatives[class]
    }

    pub fn members(&self, class: usize) -> &[SlotRef] {
        &self.members[class]
    }

    /// `S`: number of distinct slots, overlapping slots counted once.
    pub fn total_distinct(&self) -> usize {
        self.representatives.len()
    }

    pub fn total_slots(&self) -> usize {
        self.class_of.iter().map(Vec::len).sum()
    }

    /// True when no two slots coincide.
    pub fn coincidence_is_empty(&self) -> bool {
        self.members.iter().all(|m| m.len() == 1)
    }

    /// Slots strictly between the origin and destination pads.
    pub fn interior(&self, p: PairId) -> impl Iterator<Item = (u32, usize)> + '_ {
        let row = &self.class_of[p.0];
        let n = row.len();
        (1..n.saturating_sub(1)).map(move |i| (i as u32, row[i]))
    }
}

/// Builds the slot system: `T_p / tau_c + 1` slots per pair, merged into
/// coincidence classes.
pub fn build_slot_system(net: &NetworkSpec) -> SlotSystem {
    let mut offsets = Vec::with_capacity(net.od_pairs.len());
    let mut total = 0usize;
    for p in &net.od_pairs {
        offsets.push(total);
        total += p.slot_count() as usize;
    }
    let flat = |s: SlotRef| offsets[s.pair.0] + s.index as usize;

    let mut parent: Vec<usize> = (0..total).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for group in &net.coincidences {
        for w in group.windows(2) {
            let (a, b) = (find(&mut parent, flat(w[0])), find(&mut parent, flat(w[1])));
            // smaller flat index is the smaller (pair, index), keep it as root
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            parent[hi] = lo;
        }
    }

    let mut class_by_root = BTreeMap::new();
    let mut representatives = Vec::new();
    let mut members: Vec<Vec<SlotRef>> = Vec::new();
    let mut class_of = Vec::with_capacity(net.od_pairs.len());
    for (pi, p) in net.od_pairs.iter().enumerate() {
        let mut row = Vec::with_capacity(p.slot_count() as usize);
        for i in 0..p.slot_count() {
            let s = SlotRef {
                pair: PairId(pi),
                index: i,
            };
            let root = find(&mut parent, flat(s));
            let class = *class_by_root.entry(root).or_insert_with(|| {
                representatives.push(s);
                members.push(Vec::new());
                representatives.len() - 1
            });
            members[class].push(s);
            row.push(class);
        }
        class_of.push(row);
    }
    SlotSystem {
        class_of,
        representatives,
        members,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_PORTS: &str = r#"
tau_min = 5.0
tau_c_min = 0.5

[[vertiports]]
id = "A"
num_vertipads = 1

[[vertiports]]
id = "B"
num_vertipads = 2
parking = 40

[[od_pairs]]
origin = "A"
destination = "B"
flight_time_min = 8.0
links = ["ab"]

[[od_pairs]]
origin = "B"
destination = "A"
flight_time_min = 5.0
links = ["ba"]
"#;

    #[test]
    fn loads_and_counts_slots() {
        let net = load_network(TWO_PORTS).unwrap();
        assert_eq!(net.k_tau, 10);
        let slots = build_slot_system(&net);
        assert_eq!(slots.slots_of(PairId(0)), 17);
        assert_eq!(slots.slots_of(PairId(1)), 11);
        assert!(slots.coincidence_is_empty());
        assert_eq!(slots.total_distinct(), 28);
        assert_eq!(net.opposite(PairId(0)).unwrap(), Some(PairId(1)));
    }

    #[test]
    fn rejects_non_integral_k_tau() {
        let text = TWO_PORTS.replace("tau_c_min = 0.5", "tau_c_min = 0.4");
        match load_network(&text) {
            Err(Error::InvalidNetwork(p)) => assert!(p[0].contains("k_tau")),
            other => panic!("expected invalid network, got {other:?}"),
        }
    }

    #[test]
    fn single_vertiport_is_valid() {
        let net =
            load_network("tau_min = 5.0\ntau_c_min = 0.5\n[[vertiports]]\nid = \"solo\"\nnum_vertipads = 3\n").unwrap();
        assert_eq!(net.num_pairs(), 0);
        assert_eq!(build_slot_system(&net).total_distinct(), 0);
    }

    #[test]
    fn reports_every_failed_check() {
        let text = r#"
tau_min = 5.0
tau_c_min = 0.5
[[vertiports]]
id = "A"
num_vertipads = 0
[[od_pairs]]
origin = "A"
destination = "Z"
flight_time_min = 0.7
"#;
        let Err(Error::InvalidNetwork(problems)) = load_network(text) else {
            panic!("expected failure");
        };
        assert!(problems.len() >= 3, "{problems:?}");
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = load_network("tau_min = \n").unwrap_err();
        assert!(matches!(err, Error::Parse(ref m) if m.contains("line")), "{err}");
    }

    #[test]
    fn one_way_network_has_no_opposite() {
        let text = TWO_PORTS.replace(
            "[[od_pairs]]\norigin = \"B\"\ndestination = \"A\"\nflight_time_min = 5.0\nlinks = [\"ba\"]\n",
            "",
        );
        // a lone one-way route does not connect B back to A
        assert!(load_network(&text).is_err());
        let net = load_network(TWO_PORTS).unwrap();
        assert!(net.opposite(PairId(7)).is_err());
    }

    #[test]
    fn coincidence_ranges_collapse_into_classes() {
        let text = format!(
            "{TWO_PORTS}\n{}",
            r#"
[[od_pairs]]
origin = "A"
destination = "B"
flight_time_min = 1.0
links = []
"#
        );
        // duplicate route for (A,B)
        assert!(load_network(&text).is_err());

        let text = r#"
tau_min = 1.0
tau_c_min = 0.5
[[vertiports]]
id = "A"
num_vertipads = 1
[[vertiports]]
id = "B"
num_vertipads = 1
[[vertiports]]
id = "C"
num_vertipads = 1
[[od_pairs]]
origin = "A"
destination = "C"
flight_time_min = 3.0
links = ["a", "trunk"]
[[od_pairs]]
origin = "B"
destination = "C"
flight_time_min = 3.0
links = ["b", "trunk"]
[[od_pairs]]
origin = "C"
destination = "A"
flight_time_min = 3.0
links = ["ca"]
[[od_pairs]]
origin = "C"
destination = "B"
flight_time_min = 3.0
links = ["cb"]
[[coincidences]]
length = 3
members = [{ origin = "A", destination = "C", start = 2 }, { origin = "B", destination = "C", start = 2 }]
"#;
        let net = load_network(text).unwrap();
        let slots = build_slot_system(&net);
        assert_eq!(slots.total_slots(), 28);
        assert_eq!(slots.total_distinct(), 25);
        assert_eq!(slots.class(PairId(1), 3), slots.class(PairId(0), 3));
        assert_eq!(
            slots.representative(slots.class(PairId(1), 4)),
            SlotRef {
                pair: PairId(0),
                index: 4
            }
        );
    }
}
