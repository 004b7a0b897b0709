use rayon::prelude::*;

use crate::network::{NetworkSpec, SlotSystem, Step};
use crate::schedule::AircraftState;
use crate::stats;

use super::{check_safety, run, DemandProfile, PolicyKind, RunOptions, SimTrace};

/// Width of a travel-time bin.
pub const BIN_MINUTES: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct BinStat {
    pub start_min: f64,
    /// Mean travel time of serviced requests that arrived in the bin.
    pub mean_min: Option<f64>,
    pub count: usize,
    /// Requests in the bin still waiting at the horizon.
    pub censored: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub requested: usize,
    pub serviced: usize,
    pub censored: usize,
    /// Largest bin mean, in minutes.
    pub peak_travel_min: Option<f64>,
    pub mean_travel_min: Option<f64>,
    /// Mean of `horizon - arrival` over censored requests, a lower bound on their travel time.
    pub censored_mean_wait_min: Option<f64>,
    pub bins: Vec<BinStat>,
    pub max_queue: u32,
    pub mean_queue: f64,
    pub cycle_lengths: Vec<Step>,
    /// Total queue at the start of every cycle.
    pub cycle_start_queues: Vec<u64>,
    /// Squared ratios of consecutive cycle lengths.
    pub cycle_ratio_sq: Vec<f64>,
    /// Mean squared ratio over cycles whose length exceeds the upper quartile.
    pub large_cycle_ratio_sq_mean: Option<f64>,
    pub truncated: bool,
}

/// Squared length ratios `(L[k+1] / L[k])^2` restricted to `L[k]` above the
/// `q`-quantile of all lengths that have a successor.
pub fn large_cycle_ratios(lengths: &[Step], q: f64) -> Vec<f64> {
    if lengths.len() < 2 {
        return Vec::new();
    }
    let heads: Vec<f64> = lengths[..lengths.len() - 1].iter().map(|&l| l as f64).collect();
    let cut = stats::quantile(&heads, q);
    lengths
        .windows(2)
        .filter(|w| w[0] > 0 && w[0] as f64 > cut)
        .map(|w| (w[1] as f64 / w[0] as f64).powi(2))
        .collect()
}

pub fn metrics(trace: &SimTrace) -> MetricsReport {
    let h = trace.horizon;
    let to_min = |steps: Step| steps as f64 * trace.tau_c_min;
    let bin_steps = ((BIN_MINUTES / trace.tau_c_min).round() as Step).max(1);
    let num_bins = if h > 0 {
        ((h + bin_steps - 1) / bin_steps) as usize
    } else {
        0
    };
    let mut sums = vec![0.0; num_bins];
    let mut counts = vec![0usize; num_bins];
    let mut censored_bins = vec![0usize; num_bins];
    let mut censored_wait = Vec::new();
    let mut travel = Vec::new();
    for r in trace.requests.iter().filter(|r| r.arrival < h) {
        let b = (r.arrival / bin_steps) as usize;
        match (r.takeoff, r.completion) {
            (Some(t), Some(c)) if t < h => {
                let m = to_min(c - r.arrival);
                sums[b] += m;
                counts[b] += 1;
                travel.push(m);
            }
            _ => {
                censored_bins[b] += 1;
                censored_wait.push(to_min(h - r.arrival));
            }
        }
    }
    let bins: Vec<BinStat> = (0..num_bins)
        .map(|b| BinStat {
            start_min: to_min(b as Step * bin_steps),
            mean_min: (counts[b] > 0).then(|| sums[b] / counts[b] as f64),
            count: counts[b],
            censored: censored_bins[b],
        })
        .collect();
    let peak = bins
        .iter()
        .filter_map(|b| b.mean_min)
        .fold(None, |acc: Option<f64>, m| Some(acc.map_or(m, |a| a.max(m))));

    let queues = trace.queues();
    let totals: Vec<u32> = queues.iter().map(|q| q.iter().sum()).collect();
    let cycle_lengths: Vec<Step> = trace.cycles.iter().map(|c| c.length()).collect();
    let cycle_ratio_sq: Vec<f64> = cycle_lengths
        .windows(2)
        .filter(|w| w[0] > 0)
        .map(|w| (w[1] as f64 / w[0] as f64).powi(2))
        .collect();
    let large = large_cycle_ratios(&cycle_lengths, 0.75);

    MetricsReport {
        requested: trace.requested(),
        serviced: travel.len(),
        censored: censored_wait.len(),
        peak_travel_min: peak,
        mean_travel_min: (!travel.is_empty()).then(|| stats::mean(&travel)),
        censored_mean_wait_min: (!censored_wait.is_empty()).then(|| stats::mean(&censored_wait)),
        bins,
        max_queue: totals.iter().copied().max().unwrap_or(0),
        mean_queue: if totals.is_empty() {
            0.0
        } else {
            totals.iter().map(|&x| x as f64).sum::<f64>() / totals.len() as f64
        },
        cycle_lengths,
        cycle_start_queues: trace.cycles.iter().map(|c| c.queue.iter().sum()).collect(),
        cycle_ratio_sq,
        large_cycle_ratio_sq_mean: (!large.is_empty()).then(|| stats::mean(&large)),
        truncated: trace.truncated,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedOutcome {
    pub seed: u64,
    /// The run's metrics and its violation count, or the run's error.
    pub result: std::result::Result<(MetricsReport, usize), String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateReport {
    pub policy: PolicyKind,
    /// One entry per seed, in the order the seeds were given.
    pub outcomes: Vec<SeedOutcome>,
    pub mean_peak_travel_min: Option<f64>,
    pub std_peak_travel_min: Option<f64>,
    pub mean_serviced: Option<f64>,
    pub std_serviced: Option<f64>,
    pub total_violations: usize,
    pub failures: usize,
}

impl AggregateReport {
    fn from_outcomes(policy: PolicyKind, outcomes: Vec<SeedOutcome>) -> Self {
        let ok: Vec<&(MetricsReport, usize)> = outcomes.iter().filter_map(|o| o.result.as_ref().ok()).collect();
        let peaks: Vec<f64> = ok.iter().filter_map(|(m, _)| m.peak_travel_min).collect();
        let serviced: Vec<f64> = ok.iter().map(|(m, _)| m.serviced as f64).collect();
        let summary = |xs: &[f64]| {
            if xs.is_empty() {
                (None, None)
            } else {
                (Some(stats::mean(xs)), Some(stats::std_dev(xs)))
            }
        };
        let (mean_peak_travel_min, std_peak_travel_min) = summary(&peaks);
        let (mean_serviced, std_serviced) = summary(&serviced);
        Self {
            policy,
            total_violations: ok.iter().map(|(_, v)| v).sum(),
            failures: outcomes.len() - ok.len(),
            outcomes,
            mean_peak_travel_min,
            std_peak_travel_min,
            mean_serviced,
            std_serviced,
        }
    }
}

/// Replications over `seeds`, run concurrently. `VERTISYNC_THREADS` caps the
/// number of worker threads. A failing seed is recorded, not fatal.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo(
    net: &NetworkSpec,
    slots: &SlotSystem,
    policy: PolicyKind,
    profile: &DemandProfile,
    fleet_init: &[AircraftState],
    seeds: &[u64],
    horizon: Step,
    options: &RunOptions,
) -> AggregateReport {
    let one = |seed: u64| SeedOutcome {
        seed,
        result: run(net, slots, policy, profile, fleet_init, seed, horizon, options)
            .and_then(|trace| {
                let v = check_safety(net, slots, &trace.initial_fleet, &trace.flights, &trace.requests)?;
                Ok((metrics(&trace), v.len()))
            })
            .map_err(|e| e.to_string()),
    };
    let threads = std::env::var("VERTISYNC_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n > 0);
    let outcomes: Vec<SeedOutcome> = match threads.map(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build()) {
        Some(Ok(pool)) => pool.install(|| seeds.par_iter().map(|&s| one(s)).collect()),
        _ => seeds.par_iter().map(|&s| one(s)).collect(),
    };
    AggregateReport::from_outcomes(policy, outcomes)
}
