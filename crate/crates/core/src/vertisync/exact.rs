//! Exact cycle planning as a time-expanded binary program.
//!
//! One binary `x[a][p][n]` per aircraft, pair and relative step marks a
//! takeoff. Slot positions follow from takeoff times (one slot per step), so
//! occupancy, pad and availability rules are all linear in the takeoffs.

use super::{CyclePlan, Phase, PhaseKind};
use crate::book::ReservationBook;
use crate::error::{Error, Result};
use crate::lp::{solve_milp, Integrality, LinearProgram, MilpModel, Relation, Status};
use crate::network::{NetworkSpec, PairId, SlotSystem, Step};
use crate::schedule::{AircraftState, Flight, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactOptions {
    /// Steps a landing keeps its pad busy; defaults to `k_tau`.
    pub landing_hold: Option<u32>,
    /// Largest number of binary variables accepted.
    pub max_variables: usize,
    pub node_limit: usize,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self {
            landing_hold: None,
            max_variables: 1500,
            node_limit: 200_000,
        }
    }
}

/// A built model together with the meaning of its variables.
#[derive(Debug, Clone)]
pub struct CycleMilp {
    pub model: MilpModel,
    pub start: Step,
    pub horizon: usize,
    pub num_aircraft: usize,
    pub num_pairs: usize,
}

impl CycleMilp {
    pub fn var(&self, aircraft: usize, pair: usize, n: usize) -> usize {
        (aircraft * self.num_pairs + pair) * self.horizon + n
    }

    /// Decodes `(aircraft index, pair, absolute takeoff step)` from a solution.
    pub fn takeoffs(&self, values: &[f64]) -> Vec<(usize, PairId, Step)> {
        let mut out = Vec::new();
        for a in 0..self.num_aircraft {
            for p in 0..self.num_pairs {
                for n in 0..self.horizon {
                    if values[self.var(a, p, n)] > 0.5 {
                        out.push((a, PairId(p), self.start + n as Step));
                    }
                }
            }
        }
        out
    }
}

/// Builds the exact cycle model over `horizon` steps from `start`.
///
/// Reservations already in `book` (earlier flights still constraining pads
/// or airspace) reduce the capacities on the right-hand side.
#[allow(clippy::too_many_arguments)]
pub fn build_cycle_milp(
    net: &NetworkSpec,
    slots: &SlotSystem,
    queue: &[u64],
    fleet: &[AircraftState],
    book: &ReservationBook,
    start: Step,
    horizon: usize,
    options: &ExactOptions,
) -> Result<CycleMilp> {
    let np = net.num_pairs();
    let na = fleet.len();
    let nv = net.vertiports.len();
    let m = horizon;
    let variables = na * np * m;
    if variables > options.max_variables {
        return Err(Error::ModelTooLarge {
            variables,
            cap: options.max_variables,
        });
    }
    let k = net.k_tau as Step;
    let hold = options.landing_hold.unwrap_or(net.k_tau) as Step;
    let cm = CycleMilp {
        model: MilpModel::new(LinearProgram::new(Vec::new()), Vec::new()),
        start,
        horizon: m,
        num_aircraft: na,
        num_pairs: np,
    };
    let mut objective = vec![0.0; variables];
    for a in 0..na {
        for p in 0..np {
            for n in 0..m {
                objective[cm.var(a, p, n)] = net.pair(PairId(p)).flight_steps as f64;
            }
        }
    }
    let mut lp = LinearProgram::new(objective);
    lp.bounds = vec![(0.0, 1.0); variables];
    let flight = |p: usize| net.od_pairs[p].flight_steps as Step;

    // every queued request gets a takeoff
    for p in 0..np {
        if queue[p] > 0 {
            let terms: Vec<(usize, f64)> = (0..na)
                .flat_map(|a| (0..m).map(move |n| (a, n)))
                .map(|(a, n)| (cm.var(a, p, n), 1.0))
                .collect();
            lp.add_sparse(&terms, Relation::Ge, queue[p] as f64);
        }
    }

    // availability: a takeoff from v at n needs the aircraft on the ground at v
    // since n - k at the latest
    for (a, state) in fleet.iter().enumerate() {
        let (home, avail) = state.next_ground(net);
        for v in 0..nv {
            for n in 0..m {
                let mut terms = Vec::new();
                for p in 0..np {
                    let pair = &net.od_pairs[p];
                    if pair.origin.0 == v {
                        for n2 in 0..=n {
                            terms.push((cm.var(a, p, n2), 1.0));
                        }
                    }
                    if pair.destination.0 == v {
                        let last = n as Step - flight(p) - k;
                        for n2 in 0..=last.min(m as Step - 1) {
                            if n2 >= 0 {
                                terms.push((cm.var(a, p, n2 as usize), -1.0));
                            }
                        }
                    }
                }
                let init = if home.0 == v && avail <= start + n as Step {
                    1.0
                } else {
                    0.0
                };
                if terms.iter().any(|t| t.1 > 0.0) {
                    lp.add_sparse(&terms, Relation::Le, init);
                }
            }
        }
    }

    let max_f = net.max_flight_steps() as Step;
    let end = start + m as Step + max_f + k.max(hold);

    // slot-class exclusivity
    for class in 0..slots.total_distinct() {
        let members: Vec<(usize, Step)> = slots
            .members(class)
            .iter()
            .filter(|r| r.index > 0 && r.index < net.pair(r.pair).slot_count() - 1)
            .map(|r| (r.pair.0, r.index as Step))
            .collect();
        if members.is_empty() {
            continue;
        }
        for s in start..end {
            let mut terms = Vec::new();
            for &(p, i) in &members {
                let n = s - i - start;
                if (0..m as Step).contains(&n) {
                    for a in 0..na {
                        terms.push((cm.var(a, p, n as usize), 1.0));
                    }
                }
            }
            let cap = if book.class_busy(class, s) { 0.0 } else { 1.0 };
            if terms.len() as f64 > cap {
                lp.add_sparse(&terms, Relation::Le, cap);
            }
        }
    }

    for v in 0..nv {
        let pads = net.vertiports[v].num_vertipads as f64;
        let out: Vec<usize> = (0..np).filter(|&p| net.od_pairs[p].origin.0 == v).collect();
        let inn: Vec<usize> = (0..np).filter(|&p| net.od_pairs[p].destination.0 == v).collect();
        for s in start..end {
            // takeoff separation over [s-k+1, s]
            let mut terms = Vec::new();
            let mut prior = 0.0;
            for t in s - k + 1..=s {
                prior += book.takeoffs_at(v, t) as f64;
                let n = t - start;
                if (0..m as Step).contains(&n) {
                    for &p in &out {
                        for a in 0..na {
                            terms.push((cm.var(a, p, n as usize), 1.0));
                        }
                    }
                }
            }
            if terms.len() as f64 > pads - prior {
                lp.add_sparse(&terms, Relation::Le, pads - prior);
            }

            // takeoffs at s with landings over [s-hold+1, s]
            let mut terms = Vec::new();
            let mut prior = book.takeoffs_at(v, s) as f64;
            let n = s - start;
            if (0..m as Step).contains(&n) {
                for &p in &out {
                    for a in 0..na {
                        terms.push((cm.var(a, p, n as usize), 1.0));
                    }
                }
            }
            for t in s - hold + 1..=s {
                prior += book.landings_at(v, t) as f64;
                for &p in &inn {
                    let n = t - flight(p) - start;
                    if (0..m as Step).contains(&n) {
                        for a in 0..na {
                            terms.push((cm.var(a, p, n as usize), 1.0));
                        }
                    }
                }
            }
            if terms.len() as f64 > pads - prior {
                lp.add_sparse(&terms, Relation::Le, pads - prior);
            }
        }
    }

    Ok(CycleMilp {
        model: MilpModel::new(lp, vec![Integrality::Binary; variables]),
        ..cm
    })
}

/// Plans a cycle by solving the exact model to optimality.
#[allow(clippy::too_many_arguments)]
pub fn plan_cycle_exact(
    net: &NetworkSpec,
    slots: &SlotSystem,
    queue: &[u64],
    fleet: &[AircraftState],
    book: &ReservationBook,
    start: Step,
    horizon: usize,
    cycle_index: usize,
    options: &ExactOptions,
) -> Result<CyclePlan> {
    let np = net.num_pairs();
    if queue.len() != np {
        return Err(Error::InvalidDemand(format!(
            "queue has {} entries for {np} pairs",
            queue.len()
        )));
    }
    if queue.iter().all(|&q| q == 0) {
        return Ok(CyclePlan::empty(cycle_index, start, 0, fleet));
    }
    let window = book.window_from(start);
    let cm = build_cycle_milp(net, slots, queue, fleet, &window, start, horizon, options)?;
    let sol = solve_milp(&cm.model, options.node_limit)?;
    match sol.status {
        Status::Optimal => {}
        Status::NodeLimit => {
            return Err(Error::ExactInfeasible(
                "node limit reached before optimality was proven".into(),
            ))
        }
        Status::NoIncumbent => return Err(Error::ExactInfeasible("node limit reached without a schedule".into())),
        _ => return Err(Error::ExactInfeasible(format!("no schedule within {horizon} steps"))),
    }

    let mut takeoffs = cm.takeoffs(&sol.values);
    takeoffs.sort_by_key(|&(a, p, n)| (n, p, fleet[a].id));
    let mut passengers = queue.to_vec();
    let mut flights = Vec::with_capacity(takeoffs.len());
    let mut served = vec![0u32; np];
    for &(a, p, n) in &takeoffs {
        let purpose = if passengers[p.0] > 0 {
            passengers[p.0] -= 1;
            served[p.0] += 1;
            Purpose::Passenger
        } else {
            Purpose::Rebalance
        };
        flights.push(Flight {
            takeoff: n,
            pair: p,
            aircraft: Some(fleet[a].id),
            purpose,
        });
    }
    flights.sort();
    let last_takeoff = flights.iter().map(|f| f.takeoff).max().unwrap_or(start);
    let planned_end_step = flights.iter().map(|f| f.landing(net)).max().unwrap_or(start).max(start);
    let final_fleet = fleet
        .iter()
        .map(|s| {
            let mut state = AircraftState::parked(s.id, s.next_ground(net).0, s.next_ground(net).1);
            for f in flights.iter().filter(|f| f.aircraft == Some(s.id)) {
                state = state.after(net, f);
            }
            state
        })
        .collect();
    Ok(CyclePlan {
        cycle_index,
        start_step: start,
        lp_solution: Vec::new(),
        phases: vec![Phase {
            kind: PhaseKind::Activate,
            vector: None,
            start,
            duration_steps: last_takeoff + 1 - start,
            serviced: served,
        }],
        flights,
        planned_end_step,
        bound_steps: horizon as Step,
        final_fleet,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_slot_system, load_network, VertiportId};
    use crate::schedule::fleet_at;

    const MERGE: &str = r#"
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
num_vertipads = 2
[[od_pairs]]
origin = "A"
destination = "C"
flight_time_min = 1.5
links = ["ac", "merge"]
[[od_pairs]]
origin = "B"
destination = "C"
flight_time_min = 1.5
links = ["bc", "merge"]
[[od_pairs]]
origin = "C"
destination = "A"
flight_time_min = 1.5
links = ["ca"]
[[od_pairs]]
origin = "C"
destination = "B"
flight_time_min = 1.5
links = ["cb"]
[[coincidences]]
members = [
  { origin = "A", destination = "C", start = 2 },
  { origin = "B", destination = "C", start = 2 },
]
"#;

    fn setup() -> (NetworkSpec, SlotSystem) {
        let net = load_network(MERGE).unwrap();
        let slots = build_slot_system(&net);
        (net, slots)
    }

    #[test]
    fn single_request_takes_off_at_once() {
        let (net, slots) = setup();
        let book = ReservationBook::new(&net, &slots, 0);
        let fleet = fleet_at(0, 1, VertiportId(0), 0);
        let plan = plan_cycle_exact(
            &net,
            &slots,
            &[1, 0, 0, 0],
            &fleet,
            &book,
            0,
            8,
            0,
            &ExactOptions::default(),
        )
        .unwrap();
        assert_eq!(plan.flights.len(), 1);
        assert_eq!(plan.flights[0].takeoff, 0);
        assert_eq!(plan.airborne_steps(&net), 3);
    }

    #[test]
    fn empty_queue_and_missing_aircraft() {
        let (net, slots) = setup();
        let book = ReservationBook::new(&net, &slots, 0);
        let plan = plan_cycle_exact(&net, &slots, &[0; 4], &[], &book, 0, 8, 0, &ExactOptions::default()).unwrap();
        assert!(plan.flights.is_empty());
        let err = plan_cycle_exact(
            &net,
            &slots,
            &[1, 0, 0, 0],
            &[],
            &book,
            0,
            8,
            0,
            &ExactOptions::default(),
        );
        assert!(matches!(err, Err(Error::ExactInfeasible(_))));
    }

    #[test]
    fn shared_class_staggers_takeoffs() {
        let (net, slots) = setup();
        let book = ReservationBook::new(&net, &slots, 0);
        let mut fleet = fleet_at(0, 1, VertiportId(0), 0);
        fleet.extend(fleet_at(1, 1, VertiportId(1), 0));
        let plan = plan_cycle_exact(
            &net,
            &slots,
            &[1, 1, 0, 0],
            &fleet,
            &book,
            0,
            8,
            0,
            &ExactOptions::default(),
        )
        .unwrap();
        let t: Vec<Step> = plan.flights.iter().map(|f| f.takeoff).collect();
        assert_eq!(t.len(), 2);
        assert!(t[0] != t[1]);
        assert_eq!(plan.airborne_steps(&net), 6);
    }

    #[test]
    fn oversized_model_is_refused() {
        let (net, slots) = setup();
        let book = ReservationBook::new(&net, &slots, 0);
        let fleet = fleet_at(0, 10, VertiportId(0), 0);
        let err = build_cycle_milp(
            &net,
            &slots,
            &[1, 0, 0, 0],
            &fleet,
            &book,
            0,
            100,
            &ExactOptions::default(),
        );
        assert!(matches!(
            err,
            Err(Error::ModelTooLarge {
                variables: 4000,
                cap: 1500
            })
        ));
    }
}
