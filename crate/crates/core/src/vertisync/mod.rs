//! Cycle-based synchronous policy.
//!
//! At the start of a cycle the planner takes the queue snapshot `Q`, solves
//! `min sum K_i` s.t. `sum_i r^i K_i >= Q`, and activates the chosen service
//! vectors one at a time. Each activation is preceded by a distribution
//! phase that positions aircraft at the origins, and aircraft that land
//! where they are not needed are flown back while the vector is active.

mod exact;

pub use exact::{build_cycle_milp, plan_cycle_exact, CycleMilp, ExactOptions};

use crate::book::ReservationBook;
use crate::error::{Error, Result};
use crate::lp::{solve_cycle_lp, Status};
use crate::network::{NetworkSpec, PairId, SlotSystem, Step, VertiportId};
use crate::schedule::{AircraftState, Flight, Purpose};
use crate::vectors::ServiceVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlannerOptions {
    /// Refuse to plan when the fleet is smaller than the number of distinct slots.
    pub require_fleet_bound: bool,
    /// Wait for an empty airspace between distribution, activation and the next phase.
    pub drain_between_phases: bool,
}

impl Default for PlannerOptions {
    fn default() -> Self {
        Self {
            require_fleet_bound: true,
            drain_between_phases: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseKind {
    Rebalance,
    Activate,
    Drain,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Phase {
    pub kind: PhaseKind,
    /// Index into the vector set given to the planner (activations only).
    pub vector: Option<usize>,
    pub start: Step,
    pub duration_steps: Step,
    /// Passengers served per pair during the phase.
    pub serviced: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CyclePlan {
    pub cycle_index: usize,
    pub start_step: Step,
    /// `K_i` per service vector, in steps.
    pub lp_solution: Vec<f64>,
    pub phases: Vec<Phase>,
    /// All flights of the cycle, sorted by takeoff.
    pub flights: Vec<Flight>,
    /// Step at which the last flight of the cycle has landed.
    pub planned_end_step: Step,
    pub bound_steps: Step,
    /// Aircraft states once every planned flight is done.
    pub final_fleet: Vec<AircraftState>,
}

impl CyclePlan {
    pub fn empty(cycle_index: usize, start: Step, num_vectors: usize, fleet: &[AircraftState]) -> Self {
        Self {
            cycle_index,
            start_step: start,
            lp_solution: vec![0.0; num_vectors],
            phases: Vec::new(),
            flights: Vec::new(),
            planned_end_step: start,
            bound_steps: 0,
            final_fleet: fleet.to_vec(),
        }
    }

    pub fn length(&self) -> Step {
        self.planned_end_step - self.start_step
    }

    pub fn serviced(&self, num_pairs: usize) -> Vec<u32> {
        let mut out = vec![0; num_pairs];
        for f in self.flights.iter().filter(|f| f.purpose == Purpose::Passenger) {
            out[f.pair.0] += 1;
        }
        out
    }

    /// Total airborne time of all flights, in steps.
    pub fn airborne_steps(&self, net: &NetworkSpec) -> Step {
        self.flights.iter().map(|f| net.pair(f.pair).flight_steps as Step).sum()
    }
}

/// Upper bound on the cycle length in steps:
/// `sum K_i + R * (A * T + T + 1)` with `T` the longest flight in steps.
pub fn cycle_length_bound(k_star: &[f64], num_vectors: usize, fleet_size: usize, max_flight_steps: u32) -> Step {
    let sum_k: f64 = k_star.iter().sum();
    let t = max_flight_steps as f64;
    let slack = num_vectors as f64 * (fleet_size as f64 * t + t + 1.0);
    (sum_k + slack - 1e-9).ceil().max(0.0) as Step
}

/// Aircraft placed at the origin of `p` before activation: `ceil(S_p / (k - k r_p + 1))`.
pub fn distribution_target(slot_count: u32, k_tau: u32, multiple: u32) -> u32 {
    let den = (k_tau as i64 - multiple as i64 + 1).max(1) as u32;
    slot_count.div_ceil(den)
}

struct Planner<'a, 'b> {
    net: &'a NetworkSpec,
    book: ReservationBook<'b>,
    /// next ground vertiport and availability per aircraft
    ground: Vec<(VertiportId, Step)>,
    ids: Vec<usize>,
    flights: Vec<Flight>,
    hops: Vec<Vec<Option<u32>>>,
}

impl<'a, 'b> Planner<'a, 'b> {
    fn fly(&mut self, a: usize, p: PairId, from: Step, purpose: Purpose) -> Step {
        let earliest = from.max(self.ground[a].1);
        let n = self.book.earliest(p, earliest);
        self.book.commit(p, n);
        let flight = Flight {
            takeoff: n,
            pair: p,
            aircraft: Some(self.ids[a]),
            purpose,
        };
        let pair = self.net.pair(p);
        self.ground[a] = (pair.destination, n + pair.flight_steps as Step + self.net.k_tau as Step);
        self.flights.push(flight);
        n
    }

    /// Flies aircraft `a` empty to `to`; returns the step it can take off there.
    fn reposition(&mut self, a: usize, to: VertiportId, from: Step) -> Step {
        let path = self
            .net
            .route_path(self.ground[a].0, to)
            .expect("network is strongly connected");
        for p in path {
            self.fly(a, p, from, Purpose::Rebalance);
        }
        self.ground[a].1
    }

    fn estimate_arrival(&self, a: usize, to: VertiportId) -> Step {
        let (at, avail) = self.ground[a];
        let path = self.net.route_path(at, to).unwrap_or_default();
        avail
            + path
                .iter()
                .map(|&p| (self.net.pair(p).flight_steps + self.net.k_tau) as Step)
                .sum::<Step>()
    }

    fn count_at(&self, v: VertiportId) -> usize {
        self.ground.iter().filter(|g| g.0 == v).count()
    }

    fn hop(&self, from: VertiportId, to: VertiportId) -> u32 {
        self.hops[from.0][to.0].unwrap_or(u32::MAX)
    }

    /// Aircraft at `v` with the earliest availability, ties by id.
    fn local(&self, v: VertiportId) -> Option<usize> {
        (0..self.ground.len())
            .filter(|&a| self.ground[a].0 == v)
            .min_by_key(|&a| (self.ground[a].1, self.ids[a]))
    }

    /// Best donor for `v` among vertiports holding more aircraft than `need`.
    fn donor(&self, v: VertiportId, need: &[i64]) -> Option<usize> {
        (0..self.ground.len())
            .filter(|&a| {
                let u = self.ground[a].0;
                u != v && (self.count_at(u) as i64) > need[u.0]
            })
            .min_by_key(|&a| (self.estimate_arrival(a, v), self.hop(self.ground[a].0, v), self.ids[a]))
    }
}

/// Builds a plan serving every request in `queue` with the given service vectors.
///
/// `book` holds reservations made before `start`; it is not modified.
#[allow(clippy::too_many_arguments)]
pub fn plan_cycle(
    net: &NetworkSpec,
    slots: &SlotSystem,
    vectors: &[ServiceVector],
    queue: &[u64],
    fleet: &[AircraftState],
    book: &ReservationBook,
    start: Step,
    cycle_index: usize,
    options: &PlannerOptions,
) -> Result<CyclePlan> {
    let np = net.num_pairs();
    if queue.len() != np {
        return Err(Error::InvalidDemand(format!(
            "queue has {} entries for {np} pairs",
            queue.len()
        )));
    }
    if queue.iter().all(|&q| q == 0) {
        return Ok(CyclePlan::empty(cycle_index, start, vectors.len(), fleet));
    }
    let required = slots.total_distinct();
    if fleet.is_empty() || (options.require_fleet_bound && fleet.len() < required) {
        return Err(Error::InsufficientFleet {
            fleet: fleet.len(),
            required,
        });
    }

    let rates: Vec<Vec<f64>> = vectors.iter().map(ServiceVector::rates).collect();
    let demand: Vec<f64> = queue.iter().map(|&q| q as f64).collect();
    let sol = solve_cycle_lp(&rates, &demand)?;
    if sol.status != Status::Optimal {
        let pair = (0..np)
            .find(|&p| queue[p] > 0 && rates.iter().all(|r| r[p] <= 0.0))
            .unwrap_or(0);
        return Err(Error::Unserviceable(net.pair_label(PairId(pair))));
    }
    let k_star = sol.values;
    let mut order: Vec<usize> = (0..vectors.len()).filter(|&i| k_star[i] > 1e-9).collect();
    // only activated vectors contribute a distribution and drain phase
    let bound_steps = cycle_length_bound(&k_star, order.len(), fleet.len(), net.max_flight_steps());
    order.sort_by(|&a, &b| k_star[b].total_cmp(&k_star[a]).then(a.cmp(&b)));

    // per-vector quotas; the last activated vector serving a pair takes what is left
    let mut remaining: Vec<u64> = queue.to_vec();
    let mut quotas: Vec<Vec<u64>> = Vec::with_capacity(order.len());
    for (pos, &i) in order.iter().enumerate() {
        let v = &vectors[i];
        let mut q = vec![0u64; np];
        for p in v.support() {
            let last = order[pos + 1..].iter().all(|&j| vectors[j].multiples[p.0] == 0);
            let share = (v.rate(p) * k_star[i] - 1e-9).ceil().max(0.0) as u64;
            q[p.0] = if last {
                remaining[p.0]
            } else {
                share.min(remaining[p.0])
            };
            remaining[p.0] -= q[p.0];
        }
        quotas.push(q);
    }
    if let Some(p) = (0..np).find(|&p| remaining[p] > 0) {
        return Err(Error::Unserviceable(net.pair_label(PairId(p))));
    }

    let mut planner = Planner {
        net,
        book: book.window_from(start),
        ground: fleet.iter().map(|a| a.next_ground(net)).collect(),
        ids: fleet.iter().map(|a| a.id).collect(),
        flights: Vec::new(),
        hops: (0..net.vertiports.len())
            .map(|v| net.hop_distances(VertiportId(v)))
            .collect(),
    };
    let k = net.k_tau as Step;
    let mut phases = Vec::new();
    let mut phase_start = start;

    for (pos, &i) in order.iter().enumerate() {
        let vector = &vectors[i];
        let mut quota = quotas[pos].clone();
        if quota.iter().all(|&q| q == 0) {
            continue;
        }
        let support: Vec<PairId> = vector.support().filter(|p| quota[p.0] > 0).collect();

        // distribution: place the target number of aircraft at each origin
        let mut targets = vec![0i64; net.vertiports.len()];
        let wanted: Vec<(PairId, u32)> = support
            .iter()
            .map(|&p| {
                let m = vector.multiples[p.0];
                (p, distribution_target(net.pair(p).slot_count(), net.k_tau, m))
            })
            .collect();
        let mut budget = fleet.len() as i64;
        let mut round = 0;
        while budget > 0 && wanted.iter().any(|&(_, c)| c > round) {
            for &(p, c) in &wanted {
                if c > round && budget > 0 {
                    targets[net.pair(p).origin.0] += 1;
                    budget -= 1;
                }
            }
            round += 1;
        }
        let before = planner.flights.len();
        for v in 0..net.vertiports.len() {
            let v = VertiportId(v);
            while (planner.count_at(v) as i64) < targets[v.0] {
                let Some(a) = planner.donor(v, &targets) else { break };
                planner.reposition(a, v, phase_start);
            }
        }
        let rebalance_end = planner.flights[before..]
            .iter()
            .map(|f| f.landing(net))
            .max()
            .unwrap_or(phase_start)
            .max(phase_start);
        phases.push(Phase {
            kind: PhaseKind::Rebalance,
            vector: Some(i),
            start: phase_start,
            duration_steps: rebalance_end - phase_start,
            serviced: vec![0; np],
        });

        // activation: follow the vector's periodic pattern, shifting a pair's
        // remaining takeoffs whenever one of them has to wait
        let anchor = if options.drain_between_phases {
            rebalance_end
        } else {
            phase_start
        };
        let mut offsets: Vec<Vec<u32>> = vector.offsets.clone();
        for o in &mut offsets {
            o.sort_unstable();
        }
        let pattern = |p: PairId, j: u64| -> Step {
            let m = offsets[p.0].len() as u64;
            anchor + offsets[p.0][(j % m) as usize] as Step + (j / m) as Step * k
        };
        let mut next = vec![0u64; np];
        let mut shift = vec![0 as Step; np];
        let mut served = vec![0u32; np];
        let mut last_takeoff = anchor;
        let still_needed = |quota: &[u64], v: VertiportId| -> i64 {
            support
                .iter()
                .filter(|p| net.pair(**p).origin == v)
                .map(|p| quota[p.0] as i64)
                .sum()
        };
        loop {
            let Some(p) = support
                .iter()
                .copied()
                .filter(|p| quota[p.0] > 0)
                .min_by_key(|&p| (pattern(p, next[p.0]) + shift[p.0], p))
            else {
                break;
            };
            let desired = pattern(p, next[p.0]) + shift[p.0];
            let origin = net.pair(p).origin;
            let need: Vec<i64> = (0..net.vertiports.len())
                .map(|v| still_needed(&quota, VertiportId(v)))
                .collect();
            let a = match planner.local(origin) {
                Some(a) if planner.ground[a].1 <= desired => a,
                local => {
                    let donor = planner.donor(origin, &need);
                    match (local, donor) {
                        (Some(l), Some(d)) if planner.estimate_arrival(d, origin) < planner.ground[l].1 => {
                            planner.reposition(d, origin, phase_start);
                            d
                        }
                        (Some(l), _) => l,
                        (None, Some(d)) => {
                            planner.reposition(d, origin, phase_start);
                            d
                        }
                        (None, None) => {
                            let a = (0..planner.ground.len())
                                .min_by_key(|&a| (planner.estimate_arrival(a, origin), planner.ids[a]))
                                .expect("fleet is non-empty");
                            planner.reposition(a, origin, phase_start);
                            a
                        }
                    }
                }
            };
            let n = planner.fly(a, p, desired, Purpose::Passenger);
            shift[p.0] = n - pattern(p, next[p.0]);
            next[p.0] += 1;
            quota[p.0] -= 1;
            served[p.0] += 1;
            last_takeoff = last_takeoff.max(n);

            // send the aircraft back if its new vertiport has no use for it
            let here = net.pair(p).destination;
            let need: Vec<i64> = (0..net.vertiports.len())
                .map(|v| still_needed(&quota, VertiportId(v)))
                .collect();
            if (planner.count_at(here) as i64) > need[here.0] {
                let target = (0..net.vertiports.len())
                    .map(VertiportId)
                    .filter(|&v| need[v.0] > planner.count_at(v) as i64)
                    .max_by_key(|&v| {
                        (
                            need[v.0] - planner.count_at(v) as i64,
                            std::cmp::Reverse(planner.hop(here, v)),
                            std::cmp::Reverse(v),
                        )
                    });
                if let Some(v) = target {
                    planner.reposition(a, v, phase_start);
                }
            }
        }
        // the vector stays active for its nominal ceil(K*) + 1 steps at least
        let nominal = (k_star[i] - 1e-9).ceil() as Step + 1;
        let activation_end = (last_takeoff + 1).max(anchor + nominal);
        phases.push(Phase {
            kind: PhaseKind::Activate,
            vector: Some(i),
            start: anchor,
            duration_steps: activation_end - anchor,
            serviced: served,
        });
        let airspace_empty = planner
            .flights
            .iter()
            .map(|f| f.landing(net))
            .max()
            .unwrap_or(activation_end)
            .max(activation_end);
        if options.drain_between_phases {
            phases.push(Phase {
                kind: PhaseKind::Drain,
                vector: Some(i),
                start: activation_end,
                duration_steps: airspace_empty - activation_end,
                serviced: vec![0; np],
            });
            phase_start = airspace_empty;
        } else {
            phase_start = activation_end;
        }
    }

    let mut flights = planner.flights;
    flights.sort();
    let planned_end_step = flights.iter().map(|f| f.landing(net)).max().unwrap_or(start).max(start);
    let final_fleet = planner
        .ids
        .iter()
        .zip(&planner.ground)
        .map(|(&id, &(v, avail))| AircraftState::parked(id, v, avail))
        .collect();
    Ok(CyclePlan {
        cycle_index,
        start_step: start,
        lp_solution: k_star,
        phases,
        flights,
        planned_end_step,
        bound_steps,
        final_fleet,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_slot_system, load_network};
    use crate::presets;
    use crate::schedule::fleet_at;
    use crate::sim::check_safety;
    use crate::vectors::{enumerate_service_vectors, EnumerateOptions};

    const SHUTTLE: &str = r#"
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
flight_time_min = 4.0
links = ["ab"]
[[od_pairs]]
origin = "B"
destination = "A"
flight_time_min = 4.0
links = ["ba"]
"#;

    fn all_vectors(net: &NetworkSpec, slots: &SlotSystem) -> Vec<ServiceVector> {
        let opts = EnumerateOptions {
            maximal_only: true,
            ..Default::default()
        };
        enumerate_service_vectors(net, slots, &opts).vectors
    }

    #[test]
    fn bound_formula() {
        assert_eq!(cycle_length_bound(&[], 0, 0, 16), 0);
        assert_eq!(cycle_length_bound(&[30.0], 1, 20, 16), 367);
        // no aircraft: each vector still pays one flight and one step
        assert_eq!(cycle_length_bound(&[10.0, 20.0], 2, 0, 16), 30 + 2 * 17);
    }

    #[test]
    fn distribution_target_rounds_up() {
        assert_eq!(distribution_target(16, 10, 1), 2);
        assert_eq!(distribution_target(16, 10, 10), 16);
        assert_eq!(distribution_target(0, 10, 3), 0);
    }

    #[test]
    fn empty_queue_gives_empty_plan() {
        let net = presets::example1_network();
        let slots = build_slot_system(&net);
        let book = ReservationBook::new(&net, &slots, 0);
        let fleet = fleet_at(0, slots.total_distinct(), VertiportId(0), 0);
        let plan = plan_cycle(
            &net,
            &slots,
            &[],
            &[0; 8],
            &fleet,
            &book,
            5,
            0,
            &PlannerOptions::default(),
        )
        .unwrap();
        assert!(plan.phases.is_empty() && plan.flights.is_empty());
        assert_eq!(plan.length(), 0);
    }

    #[test]
    fn single_pair_activation_spaces_takeoffs_by_k() {
        let net = load_network(SHUTTLE).unwrap();
        let slots = build_slot_system(&net);
        let single: Vec<ServiceVector> = all_vectors(&net, &slots)
            .into_iter()
            .filter(|v| v.multiples == [1, 0])
            .collect();
        assert_eq!(single.len(), 1);
        let book = ReservationBook::new(&net, &slots, 0);
        let fleet = fleet_at(0, slots.total_distinct(), VertiportId(0), 0);
        let plan = plan_cycle(
            &net,
            &slots,
            &single,
            &[3, 0],
            &fleet,
            &book,
            0,
            0,
            &PlannerOptions::default(),
        )
        .unwrap();
        assert!((plan.lp_solution[0] - 30.0).abs() < 1e-9);
        let act: Vec<&Phase> = plan.phases.iter().filter(|p| p.kind == PhaseKind::Activate).collect();
        assert_eq!(act.len(), 1);
        assert_eq!(act[0].duration_steps, 31);
        let takeoffs: Vec<Step> = plan
            .flights
            .iter()
            .filter(|f| f.purpose == Purpose::Passenger)
            .map(|f| f.takeoff)
            .collect();
        assert_eq!(takeoffs, vec![0, 10, 20]);
    }

    #[test]
    fn small_fleet_is_refused() {
        let net = presets::example1_network();
        let slots = build_slot_system(&net);
        let vectors = all_vectors(&net, &slots);
        let book = ReservationBook::new(&net, &slots, 0);
        let fleet = fleet_at(0, 3, VertiportId(0), 0);
        let q = [1, 0, 0, 0, 0, 0, 0, 0];
        let err = plan_cycle(
            &net,
            &slots,
            &vectors,
            &q,
            &fleet,
            &book,
            0,
            0,
            &PlannerOptions::default(),
        );
        assert!(matches!(err, Err(Error::InsufficientFleet { fleet: 3, .. })));
        let relaxed = PlannerOptions {
            require_fleet_bound: false,
            ..PlannerOptions::default()
        };
        assert!(plan_cycle(&net, &slots, &vectors, &q, &fleet, &book, 0, 0, &relaxed).is_ok());
    }

    #[test]
    fn example_one_queue_uses_the_two_crossing_vectors() {
        let net = presets::example1_network();
        let slots = build_slot_system(&net);
        let vectors = all_vectors(&net, &slots);
        let book = ReservationBook::new(&net, &slots, 0);
        let fleet = fleet_at(0, slots.total_distinct(), VertiportId(0), 0);
        let q = [10, 20, 5, 10, 0, 0, 0, 0];
        let plan = plan_cycle(
            &net,
            &slots,
            &vectors,
            &q,
            &fleet,
            &book,
            0,
            0,
            &PlannerOptions::default(),
        )
        .unwrap();
        let mut used: Vec<Vec<u32>> = plan
            .phases
            .iter()
            .filter(|p| p.kind == PhaseKind::Activate)
            .map(|p| vectors[p.vector.unwrap()].multiples[..4].to_vec())
            .collect();
        used.sort();
        assert_eq!(used, vec![vec![0, 1, 1, 0], vec![1, 0, 0, 1]]);
        let total: f64 = plan.lp_solution.iter().sum();
        assert!((total - 300.0).abs() < 1e-6);
        assert_eq!(plan.serviced(8), vec![10, 20, 5, 10, 0, 0, 0, 0]);
        assert!(plan.length() <= plan.bound_steps);
        // no request log here, so only the safety rules apply
        let violations = check_safety(&net, &slots, &fleet, &plan.flights, &[]).unwrap();
        assert!(
            violations.iter().all(|v| v.kind == crate::sim::ViolationKind::Service),
            "{violations:?}"
        );
    }
}
