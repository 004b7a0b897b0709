use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::error::{Error, Result};
use crate::network::{NetworkSpec, PairId, SlotSystem, Step, VertiportId};
use crate::schedule::{AircraftState, Flight, Purpose};

use super::RequestRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ViolationKind {
    /// Two aircraft in one slot class at the same step.
    SlotConflict,
    /// More takeoffs from a vertiport within `k` steps than it has pads.
    TakeoffSeparation,
    /// Takeoffs plus recent landings exceed the pads.
    LandingClearance,
    /// An aircraft takes off before it is ready or away from where it is parked.
    Availability,
    /// A request's takeoff has no matching passenger flight, or the reverse.
    Service,
}

impl ViolationKind {
    pub fn name(self) -> &'static str {
        match self {
            ViolationKind::SlotConflict => "slot_conflict",
            ViolationKind::TakeoffSeparation => "takeoff_separation",
            ViolationKind::LandingClearance => "landing_clearance",
            ViolationKind::Availability => "availability",
            ViolationKind::Service => "service",
        }
    }
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub step: Step,
    pub kind: ViolationKind,
    pub detail: String,
}

/// Audits a flight log against every safety and consistency rule.
///
/// Flights without an aircraft id skip the availability check. An empty
/// result means the trace is safe.
pub fn check_safety(
    net: &NetworkSpec,
    slots: &SlotSystem,
    initial_fleet: &[AircraftState],
    flights: &[Flight],
    requests: &[RequestRecord],
) -> Result<Vec<Violation>> {
    for f in flights {
        if f.pair.0 >= net.num_pairs() {
            return Err(Error::MalformedTrace(format!(
                "flight at step {} uses unknown pair {}",
                f.takeoff, f.pair.0
            )));
        }
    }
    let mut out = Vec::new();
    slot_conflicts(net, slots, flights, &mut out);
    pad_rules(net, flights, &mut out);
    availability(net, initial_fleet, flights, &mut out)?;
    service(net, flights, requests, &mut out)?;
    out.sort();
    Ok(out)
}

fn slot_conflicts(net: &NetworkSpec, slots: &SlotSystem, flights: &[Flight], out: &mut Vec<Violation>) {
    let mut occ: HashMap<(usize, Step), Vec<&Flight>> = HashMap::new();
    for f in flights {
        for (i, class) in slots.interior(f.pair) {
            occ.entry((class, f.takeoff + i as Step)).or_default().push(f);
        }
    }
    for ((class, s), fs) in occ {
        if fs.len() > 1 {
            let who: Vec<String> = fs
                .iter()
                .map(|f| format!("{}@{}", net.pair_label(f.pair), f.takeoff))
                .collect();
            out.push(Violation {
                step: s,
                kind: ViolationKind::SlotConflict,
                detail: format!("slot class {class} held by {}", who.join(", ")),
            });
        }
    }
}

fn pad_rules(net: &NetworkSpec, flights: &[Flight], out: &mut Vec<Violation>) {
    let k = net.k_tau as Step;
    let mut takeoffs: BTreeMap<(usize, Step), u32> = BTreeMap::new();
    let mut landings: BTreeMap<(usize, Step), u32> = BTreeMap::new();
    for f in flights {
        let p = net.pair(f.pair);
        *takeoffs.entry((p.origin.0, f.takeoff)).or_default() += 1;
        *landings.entry((p.destination.0, f.landing(net))).or_default() += 1;
    }
    let count = |m: &BTreeMap<(usize, Step), u32>, v: usize, lo: Step, hi: Step| -> u32 {
        m.range((v, lo)..=(v, hi)).map(|(_, c)| *c).sum()
    };
    for &(v, s) in takeoffs.keys() {
        let pads = net.vertiports[v].num_vertipads;
        let id = &net.vertiports[v].id;
        let window = count(&takeoffs, v, s - k + 1, s);
        if window > pads {
            out.push(Violation {
                step: s,
                kind: ViolationKind::TakeoffSeparation,
                detail: format!("{window} takeoffs from {id} within {k} steps, {pads} pads"),
            });
        }
        let now = takeoffs[&(v, s)];
        let landed = count(&landings, v, s - k + 1, s);
        if now + landed > pads {
            out.push(Violation {
                step: s,
                kind: ViolationKind::LandingClearance,
                detail: format!("{now} takeoffs and {landed} recent landings at {id}, {pads} pads"),
            });
        }
    }
    // a landing holds its pad for k steps against further landings too
    for &(v, s) in landings.keys() {
        let pads = net.vertiports[v].num_vertipads;
        let now = count(&takeoffs, v, s, s);
        let landed = count(&landings, v, s - k + 1, s);
        if now == 0 && landed > pads {
            out.push(Violation {
                step: s,
                kind: ViolationKind::LandingClearance,
                detail: format!(
                    "{landed} landings at {} within {k} steps, {pads} pads",
                    net.vertiports[v].id
                ),
            });
        }
    }
}

fn availability(
    net: &NetworkSpec,
    initial_fleet: &[AircraftState],
    flights: &[Flight],
    out: &mut Vec<Violation>,
) -> Result<()> {
    let mut ground: HashMap<usize, (VertiportId, Step)> =
        initial_fleet.iter().map(|a| (a.id, a.next_ground(net))).collect();
    let mut ordered: Vec<&Flight> = flights.iter().filter(|f| f.aircraft.is_some()).collect();
    ordered.sort_by_key(|f| (f.takeoff, f.aircraft));
    for f in ordered {
        let a = f.aircraft.unwrap_or_default();
        let (at, ready) = *ground
            .get(&a)
            .ok_or_else(|| Error::MalformedTrace(format!("flight at step {} uses unknown aircraft {a}", f.takeoff)))?;
        let pair = net.pair(f.pair);
        if at != pair.origin {
            out.push(Violation {
                step: f.takeoff,
                kind: ViolationKind::Availability,
                detail: format!(
                    "aircraft {a} departs {} but is at {}",
                    net.vertiports[pair.origin.0].id, net.vertiports[at.0].id
                ),
            });
        } else if f.takeoff < ready {
            out.push(Violation {
                step: f.takeoff,
                kind: ViolationKind::Availability,
                detail: format!("aircraft {a} departs before it is ready at step {ready}"),
            });
        }
        ground.insert(a, (pair.destination, f.landing(net) + net.k_tau as Step));
    }
    Ok(())
}

fn service(net: &NetworkSpec, flights: &[Flight], requests: &[RequestRecord], out: &mut Vec<Violation>) -> Result<()> {
    let mut carried: HashMap<(PairId, Step), i64> = HashMap::new();
    for f in flights.iter().filter(|f| f.purpose == Purpose::Passenger) {
        *carried.entry((f.pair, f.takeoff)).or_default() += 1;
    }
    for r in requests {
        if r.pair.0 >= net.num_pairs() {
            return Err(Error::MalformedTrace(format!(
                "request {} uses unknown pair {}",
                r.id, r.pair.0
            )));
        }
        let Some(t) = r.takeoff else { continue };
        if t < r.arrival {
            out.push(Violation {
                step: t,
                kind: ViolationKind::Service,
                detail: format!("request {} departs before its arrival at step {}", r.id, r.arrival),
            });
        }
        if r.completion != Some(t + net.pair(r.pair).flight_steps as Step) {
            out.push(Violation {
                step: t,
                kind: ViolationKind::Service,
                detail: format!("request {} completion does not match its flight time", r.id),
            });
        }
        *carried.entry((r.pair, t)).or_default() -= 1;
    }
    for ((p, t), n) in carried {
        if n != 0 {
            let detail = if n > 0 {
                format!("{n} passenger flights of {} without a request", net.pair_label(p))
            } else {
                format!("{} requests of {} without a passenger flight", -n, net.pair_label(p))
            };
            out.push(Violation {
                step: t,
                kind: ViolationKind::Service,
                detail,
            });
        }
    }
    Ok(())
}
