//! Discrete-time simulation: demand, policies, traces.

mod demand;
mod metrics;
mod safety;

pub use demand::{generate_demand, load_demand, DemandProfile, ProcessKind, Request};
pub use metrics::{
    large_cycle_ratios, metrics, monte_carlo, AggregateReport, BinStat, MetricsReport, SeedOutcome, BIN_MINUTES,
};
pub use safety::{check_safety, Violation, ViolationKind};

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use crate::book::ReservationBook;
use crate::error::{Error, Result};
use crate::fcfs::{FcfsMode, FcfsState};
use crate::network::{NetworkSpec, PairId, SlotSystem, Step};
use crate::schedule::{AircraftState, Flight, Purpose};
use crate::vectors::{enumerate_service_vectors, EnumerateOptions, ServiceVector};
use crate::vertisync::{plan_cycle, plan_cycle_exact, ExactOptions, PlannerOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    VertiSync,
    VertiSyncExact,
    Fcfs,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::VertiSync => "vertisync",
            PolicyKind::VertiSyncExact => "vertisync_exact",
            PolicyKind::Fcfs => "fcfs",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vertisync" => Ok(PolicyKind::VertiSync),
            "vertisync_exact" => Ok(PolicyKind::VertiSyncExact),
            "fcfs" => Ok(PolicyKind::Fcfs),
            other => Err(Error::Parse(format!(
                "unknown policy '{other}' (vertisync, vertisync_exact, fcfs)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOptions {
    pub planner: PlannerOptions,
    pub exact: ExactOptions,
    pub fcfs_mode: FcfsMode,
    /// Service vectors to plan with; enumerated over the demand's pairs when absent.
    pub vectors: Option<Vec<ServiceVector>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestRecord {
    pub id: u64,
    pub pair: PairId,
    pub arrival: Step,
    pub takeoff: Option<Step>,
    pub completion: Option<Step>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    pub index: usize,
    pub start: Step,
    pub end: Step,
    pub sum_k: f64,
    pub bound: Step,
    pub queue: Vec<u64>,
    pub serviced: Vec<u32>,
}

impl CycleRecord {
    pub fn length(&self) -> Step {
        self.end - self.start
    }
}

/// Everything a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub policy: String,
    pub seed: u64,
    pub horizon: Step,
    pub tau_c_min: f64,
    pub num_pairs: usize,
    pub initial_fleet: Vec<AircraftState>,
    pub requests: Vec<RequestRecord>,
    /// Flight log sorted by takeoff.
    pub flights: Vec<Flight>,
    pub cycles: Vec<CycleRecord>,
    /// Some planned activity extends past the horizon.
    pub truncated: bool,
}

impl SimTrace {
    /// `Q_p(t)` for `t` in `0..horizon`, indexed `[t][p]`.
    pub fn queues(&self) -> Vec<Vec<u32>> {
        let h = self.horizon.max(0) as usize;
        let mut delta = vec![vec![0i64; self.num_pairs]; h + 1];
        for r in &self.requests {
            if r.arrival < self.horizon {
                delta[r.arrival as usize][r.pair.0] += 1;
                if let Some(t) = r.takeoff.filter(|&t| t < self.horizon) {
                    delta[t as usize][r.pair.0] -= 1;
                }
            }
        }
        let mut q = vec![0i64; self.num_pairs];
        (0..h)
            .map(|t| {
                for p in 0..self.num_pairs {
                    q[p] += delta[t][p];
                }
                q.iter().map(|&x| x as u32).collect()
            })
            .collect()
    }

    /// Cumulative arrivals `A_p(t)` for `t` in `0..horizon`.
    pub fn cumulative_arrivals(&self) -> Vec<Vec<u32>> {
        let h = self.horizon.max(0) as usize;
        let mut per_step = vec![vec![0u32; self.num_pairs]; h];
        for r in self.requests.iter().filter(|r| r.arrival < self.horizon) {
            per_step[r.arrival as usize][r.pair.0] += 1;
        }
        let mut acc = vec![0u32; self.num_pairs];
        per_step
            .into_iter()
            .map(|row| {
                for (a, x) in acc.iter_mut().zip(row) {
                    *a += x;
                }
                acc.clone()
            })
            .collect()
    }

    /// Requests that took off before the horizon.
    pub fn serviced(&self) -> usize {
        self.requests
            .iter()
            .filter(|r| r.takeoff.is_some_and(|t| t < self.horizon))
            .count()
    }

    pub fn requested(&self) -> usize {
        self.requests.iter().filter(|r| r.arrival < self.horizon).count()
    }

    /// Checks `A_p(t) = served_p(t) + Q_p(t)` and the takeoff-to-landing
    /// duration of every serviced request. Returns the first failure.
    pub fn check_conservation(&self, net: &NetworkSpec) -> std::result::Result<(), String> {
        let q = self.queues();
        let a = self.cumulative_arrivals();
        let mut served = vec![0u32; self.num_pairs];
        let mut takeoffs: Vec<Vec<u32>> = vec![vec![0; self.num_pairs]; self.horizon.max(0) as usize];
        for r in &self.requests {
            if let (Some(t), Some(c)) = (r.takeoff, r.completion) {
                if c - t != net.pair(r.pair).flight_steps as Step {
                    return Err(format!("request {} completes {} steps after takeoff", r.id, c - t));
                }
                if t < r.arrival {
                    return Err(format!("request {} takes off before it arrives", r.id));
                }
                if t < self.horizon {
                    takeoffs[t as usize][r.pair.0] += 1;
                }
            }
        }
        for t in 0..q.len() {
            for p in 0..self.num_pairs {
                served[p] += takeoffs[t][p];
                if a[t][p] != served[p] + q[t][p] {
                    return Err(format!(
                        "pair {p} at step {t}: {} arrived, {} served, {} queued",
                        a[t][p], served[p], q[t][p]
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Service vectors over the pairs that carry demand. By downward closure a
/// demand supported on those pairs needs no other vectors.
pub fn vectors_for_demand(net: &NetworkSpec, slots: &SlotSystem, profile: &DemandProfile) -> Vec<ServiceVector> {
    vectors_for_pairs(net, slots, profile.support())
}

fn vectors_for_pairs(net: &NetworkSpec, slots: &SlotSystem, pairs: Vec<PairId>) -> Vec<ServiceVector> {
    let opts = EnumerateOptions {
        maximal_only: true,
        pairs: Some(pairs),
        ..Default::default()
    };
    enumerate_service_vectors(net, slots, &opts).vectors
}

fn record_requests(requests: &[Request]) -> Vec<RequestRecord> {
    requests
        .iter()
        .map(|r| RequestRecord {
            id: r.id,
            pair: r.pair,
            arrival: r.arrival,
            takeoff: None,
            completion: None,
        })
        .collect()
}

/// Runs one policy on one demand realisation.
#[allow(clippy::too_many_arguments)]
pub fn run(
    net: &NetworkSpec,
    slots: &SlotSystem,
    policy: PolicyKind,
    profile: &DemandProfile,
    fleet_init: &[AircraftState],
    seed: u64,
    horizon: Step,
    options: &RunOptions,
) -> Result<SimTrace> {
    let requests = generate_demand(net, profile, seed)?;
    run_requests(
        net, slots, policy, &requests, profile, fleet_init, seed, horizon, options,
    )
}

/// Runs a policy on a given request stream.
#[allow(clippy::too_many_arguments)]
pub fn run_requests(
    net: &NetworkSpec,
    slots: &SlotSystem,
    policy: PolicyKind,
    requests: &[Request],
    profile: &DemandProfile,
    fleet_init: &[AircraftState],
    seed: u64,
    horizon: Step,
    options: &RunOptions,
) -> Result<SimTrace> {
    let mut trace = SimTrace {
        policy: policy.name().to_string(),
        seed,
        horizon,
        tau_c_min: net.tau_c_min,
        num_pairs: net.num_pairs(),
        initial_fleet: fleet_init.to_vec(),
        requests: record_requests(requests),
        flights: Vec::new(),
        cycles: Vec::new(),
        truncated: false,
    };
    match policy {
        PolicyKind::Fcfs => run_fcfs(net, slots, &mut trace, options)?,
        PolicyKind::VertiSync | PolicyKind::VertiSyncExact => {
            let vectors = match &options.vectors {
                Some(v) => v.clone(),
                None => {
                    let mut pairs = profile.support();
                    pairs.extend(requests.iter().map(|r| r.pair));
                    pairs.sort();
                    pairs.dedup();
                    vectors_for_pairs(net, slots, pairs)
                }
            };
            run_cycles(net, slots, policy, &vectors, fleet_init, &mut trace, options)?
        }
    }
    trace.flights.sort();
    Ok(trace)
}

fn run_fcfs(net: &NetworkSpec, slots: &SlotSystem, trace: &mut SimTrace, options: &RunOptions) -> Result<()> {
    let mut state = FcfsState::new(net, slots, options.fcfs_mode, &trace.initial_fleet);
    let horizon = trace.horizon;
    for r in trace.requests.iter_mut().filter(|r| r.arrival < horizon) {
        match state.schedule_next(r.pair, r.arrival, r.id) {
            Ok(f) => {
                r.takeoff = Some(f.takeoff);
                r.completion = Some(f.landing(net));
                if f.takeoff >= horizon {
                    trace.truncated = true;
                }
            }
            // a stranded request stays queued; later ones are still booked
            Err(Error::Unschedulable(_)) => trace.truncated = true,
            Err(e) => return Err(e),
        }
    }
    trace.flights = state.flights;
    Ok(())
}

fn run_cycles(
    net: &NetworkSpec,
    slots: &SlotSystem,
    policy: PolicyKind,
    vectors: &[ServiceVector],
    fleet_init: &[AircraftState],
    trace: &mut SimTrace,
    options: &RunOptions,
) -> Result<()> {
    let np = net.num_pairs();
    let mut book = ReservationBook::new(net, slots, 0);
    let mut fleet = fleet_init.to_vec();
    let mut pending: Vec<VecDeque<usize>> = vec![VecDeque::new(); np];
    let mut next_arrival = 0;
    let mut t: Step = 0;
    let horizon = trace.horizon;
    while t < horizon {
        while next_arrival < trace.requests.len() && trace.requests[next_arrival].arrival <= t {
            let r = &trace.requests[next_arrival];
            pending[r.pair.0].push_back(next_arrival);
            next_arrival += 1;
        }
        let queue: Vec<u64> = pending.iter().map(|q| q.len() as u64).collect();
        if queue.iter().all(|&q| q == 0) {
            t += 1;
            continue;
        }
        let index = trace.cycles.len();
        let constructive =
            plan_cycle(net, slots, vectors, &queue, &fleet, &book, t, index, &options.planner).map_err(|e| {
                Error::Planning {
                    cycle: index,
                    source: Box::new(e),
                }
            })?;
        let plan = if policy == PolicyKind::VertiSyncExact {
            let m = (constructive.bound_steps + net.k_tau as Step).max(constructive.length() + 1) as usize;
            plan_cycle_exact(net, slots, &queue, &fleet, &book, t, m, index, &options.exact).map_err(|e| {
                Error::Planning {
                    cycle: index,
                    source: Box::new(e),
                }
            })?
        } else {
            constructive
        };
        for f in &plan.flights {
            book.commit(f.pair, f.takeoff);
            if f.purpose == Purpose::Passenger {
                let id = pending[f.pair.0].pop_front().ok_or_else(|| Error::Planning {
                    cycle: index,
                    source: Box::new(Error::MalformedTrace("plan carries more passengers than queued".into())),
                })?;
                let r = &mut trace.requests[id];
                r.takeoff = Some(f.takeoff);
                r.completion = Some(f.landing(net));
            }
        }
        trace.flights.extend(plan.flights.iter().copied());
        trace.cycles.push(CycleRecord {
            index,
            start: t,
            end: plan.planned_end_step,
            sum_k: plan.lp_solution.iter().sum(),
            bound: plan.bound_steps,
            queue: queue.clone(),
            serviced: plan.serviced(np),
        });
        if plan.planned_end_step > horizon {
            trace.truncated = true;
        }
        fleet = plan.final_fleet;
        t = plan.planned_end_step.max(t + 1);
    }
    Ok(())
}
