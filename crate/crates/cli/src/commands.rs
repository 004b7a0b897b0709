use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde_json::json;
use vertisync::export::{self, parse_pair};
use vertisync::network::{build_slot_system, NetworkSpec, PairId};
use vertisync::region::{max_uniform_scale, sample_grid};
use vertisync::sim::{self, check_safety, metrics, monte_carlo, PolicyKind};
use vertisync::vectors::{enumerate_service_vectors, EnumerateOptions, VectorSet};

use crate::scenario::{self, NotFound, ScenarioArgs};

/// Renders an error as a one-line JSON record.
pub fn error_record(e: &anyhow::Error) -> String {
    let kind = if e.downcast_ref::<NotFound>().is_some() {
        "not_found"
    } else if let Some(err) = e.downcast_ref::<vertisync::Error>() {
        core_kind(err)
    } else {
        "usage"
    };
    json!({ "error": kind, "message": format!("{e:#}") }).to_string()
}

fn core_kind(e: &vertisync::Error) -> &'static str {
    use vertisync::Error::*;
    match e {
        Parse(_) => "parse",
        InvalidNetwork(_) => "invalid_network",
        InvalidDemand(_) => "invalid_demand",
        UnknownPair(_) => "unknown_pair",
        OffLattice { .. } => "off_lattice",
        MalformedLp(_) | NumericalInstability(_) => "lp",
        InsufficientFleet { .. } | Unserviceable(_) | ModelTooLarge { .. } | ExactInfeasible(_) | Planning { .. } => {
            "planning"
        }
        Unschedulable(_) => "unschedulable",
        MalformedTrace(_) => "malformed_trace",
        Io(_) | Csv(_) => "io",
    }
}

fn status(violations: usize) -> ExitCode {
    if violations == 0 {
        ExitCode::SUCCESS
    } else {
        eprintln!(
            "{}",
            json!({ "error": "safety_violation", "message": format!("{violations} violations") })
        );
        ExitCode::from(1)
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// vertisync, vertisync_exact or fcfs.
    #[arg(long, default_value = "vertisync")]
    pub policy: PolicyKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Refuse to plan with fewer aircraft than distinct slots.
    #[arg(long)]
    pub strict_fleet: bool,
}

pub fn run(args: &RunArgs) -> Result<ExitCode> {
    let sc = scenario::resolve(&args.scenario)?;
    let mut options = sc.options.clone();
    if args.strict_fleet {
        options.planner.require_fleet_bound = true;
    }
    let trace = sim::run(
        &sc.net,
        &sc.slots,
        args.policy,
        &sc.demand,
        &sc.fleet(),
        args.seed,
        sc.horizon_steps,
        &options,
    )?;
    let violations = check_safety(
        &sc.net,
        &sc.slots,
        &trace.initial_fleet,
        &trace.flights,
        &trace.requests,
    )?;
    let report = metrics(&trace);
    export::write_trace(&args.out, &sc.net, &trace, &violations)?;
    export::write_metrics(&args.out, &report, violations.len())?;
    print!(
        "scenario: {}\npolicy: {}\nseed: {}\n{}",
        sc.name,
        args.policy,
        args.seed,
        export::summary(&report, violations.len())
    );
    println!("artifacts: {}", args.out.display());
    Ok(status(violations.len()))
}

#[derive(Debug, Args)]
pub struct EnumerationArgs {
    /// Only vectors with at most this many active pairs.
    #[arg(long)]
    pub max_active: Option<usize>,
    /// Keep dominated vectors too.
    #[arg(long)]
    pub all: bool,
    /// Cap on feasibility checks.
    #[arg(long, default_value_t = 2_000_000)]
    pub budget: usize,
}

impl EnumerationArgs {
    fn options(&self, pairs: Option<Vec<PairId>>) -> EnumerateOptions {
        EnumerateOptions {
            max_active_pairs: self.max_active,
            maximal_only: !self.all,
            pairs,
            budget: self.budget,
        }
    }
}

/// Pair labels separated by spaces or semicolons, such as `(1,3);(1,4)`.
fn pair_list(net: &NetworkSpec, text: &str) -> Result<Vec<PairId>> {
    text.split([';', ' '])
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_pair(net, s).map_err(Into::into))
        .collect()
}

fn report_enumeration(set: &VectorSet, elapsed: std::time::Duration) {
    println!("vectors: {}", set.len());
    println!("truncated: {}", set.truncated);
    println!("enumeration_ms: {}", elapsed.as_millis());
    if set.truncated {
        eprintln!("warning: enumeration budget exhausted, output is partial");
    }
}

#[derive(Debug, Args)]
pub struct RegionArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Direction weights per pair in declaration order, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "along")]
    pub direction: Vec<f64>,
    /// Unit direction over these pairs, e.g. "(1,3);(1,4)".
    #[arg(long)]
    pub along: Option<String>,
    /// Points per axis of the membership grid (0 for none).
    #[arg(long, default_value_t = 0)]
    pub grid: usize,
    /// The two grid axes, e.g. "(1,3);(2,4)"; defaults to the first two direction pairs.
    #[arg(long)]
    pub axes: Option<String>,
    /// Largest grid rate per step.
    #[arg(long, default_value_t = 1.0)]
    pub grid_max: f64,
    #[command(flatten)]
    pub enumeration: EnumerationArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

pub fn region(args: &RegionArgs) -> Result<ExitCode> {
    let (net, support) = if args.scenario.scenario.is_some() || args.scenario.demand.is_some() {
        let sc = scenario::resolve(&args.scenario)?;
        let support = sc.demand.support();
        (sc.net, support)
    } else {
        let net = scenario::network(&args.scenario)?;
        let all = net.pair_ids().collect();
        (net, all)
    };
    let n = net.num_pairs();
    let direction: Vec<f64> = if !args.direction.is_empty() {
        if args.direction.len() != n {
            bail!("--direction needs {n} weights, got {}", args.direction.len());
        }
        args.direction.clone()
    } else {
        let pairs = match &args.along {
            Some(text) => pair_list(&net, text)?,
            None => support,
        };
        let mut d = vec![0.0; n];
        for p in pairs {
            d[p.0] = 1.0;
        }
        d
    };
    if direction.iter().all(|&x| x == 0.0) {
        bail!("direction must be non-zero");
    }
    let mut pairs: Vec<PairId> = (0..n).filter(|&p| direction[p] != 0.0).map(PairId).collect();
    let axes = if args.grid > 0 {
        let axes = match &args.axes {
            Some(text) => pair_list(&net, text)?,
            None => pairs.clone(),
        };
        if axes.len() < 2 {
            bail!("the grid needs two axes");
        }
        pairs.extend(&axes[..2]);
        pairs.sort();
        pairs.dedup();
        Some((axes[0], axes[1]))
    } else {
        None
    };
    let slots = build_slot_system(&net);
    let t0 = Instant::now();
    let set = enumerate_service_vectors(&net, &slots, &args.enumeration.options(Some(pairs)));
    let elapsed = t0.elapsed();
    let scale = max_uniform_scale(&direction, &set.vectors)?;
    fs::create_dir_all(&args.out)?;
    export::write_vectors(&args.out.join("vectors.csv"), &net, &set.vectors)?;
    let per_tau = net.tau_min / net.tau_c_min;
    export::write_theta(&args.out.join("theta.csv"), &net, per_tau, &scale)?;
    if let Some(axes) = axes {
        let top = args.grid_max;
        let values: Vec<f64> = if args.grid == 1 {
            vec![top]
        } else {
            (0..args.grid)
                .map(|i| top * i as f64 / (args.grid - 1) as f64)
                .collect()
        };
        let points = sample_grid(n, axes, &values, &set.vectors, false)?;
        export::write_region_grid(&args.out.join("region_grid.csv"), &net, &points)?;
    }
    report_enumeration(&set, elapsed);
    let binding: Vec<String> = scale.binding_pairs.iter().map(|&p| net.pair_label(p)).collect();
    println!("theta_per_step: {:.9}", scale.theta);
    println!("theta_per_tau: {:.9}", scale.theta * per_tau);
    println!("binding_pairs: {}", binding.join(" "));
    println!("artifacts: {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Args)]
pub struct EnumerateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Restrict the support to these pairs, e.g. "(1,3);(1,4)".
    #[arg(long)]
    pub pairs: Option<String>,
    #[command(flatten)]
    pub enumeration: EnumerationArgs,
    /// Output CSV file.
    #[arg(long, default_value = "vectors.csv")]
    pub out: PathBuf,
}

pub fn enumerate(args: &EnumerateArgs) -> Result<ExitCode> {
    let net = scenario::network(&args.scenario)?;
    let pairs = args.pairs.as_deref().map(|t| pair_list(&net, t)).transpose()?;
    let slots = build_slot_system(&net);
    let t0 = Instant::now();
    let set = enumerate_service_vectors(&net, &slots, &args.enumeration.options(pairs));
    let elapsed = t0.elapsed();
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    export::write_vectors(&args.out, &net, &set.vectors)?;
    report_enumeration(&set, elapsed);
    println!("artifacts: {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, default_value = "vertisync")]
    pub policy: PolicyKind,
    #[arg(long)]
    pub a_min: usize,
    #[arg(long)]
    pub a_max: usize,
    #[arg(long, default_value_t = 1)]
    pub a_step: usize,
    /// Seeds 0..n.
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    /// Refuse to plan with fewer aircraft than distinct slots.
    #[arg(long)]
    pub strict_fleet: bool,
    /// Output CSV file.
    #[arg(long, default_value = "sweep.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub fleet: usize,
    pub mean_peak_min: Option<f64>,
    pub mean_serviced: Option<f64>,
    pub failures: usize,
    pub violations: usize,
    /// Every seed ran and finished all its cycles within the horizon.
    pub stable: bool,
}

/// Smallest fleet whose mean peak stays within `tol` (relative) for every larger fleet.
pub fn plateau(rows: &[SweepRow], tol: f64) -> Option<usize> {
    let peaks: Vec<(usize, f64)> = rows
        .iter()
        .filter_map(|r| r.mean_peak_min.map(|m| (r.fleet, m)))
        .collect();
    (0..peaks.len())
        .find(|&i| {
            peaks[i + 1..]
                .iter()
                .all(|&(_, m)| (m - peaks[i].1).abs() <= tol * peaks[i].1.abs())
        })
        .map(|i| peaks[i].0)
}

pub fn sweep_fleet(args: &SweepArgs) -> Result<ExitCode> {
    if args.a_min > args.a_max {
        bail!("--a-min must not exceed --a-max");
    }
    if args.a_min == 0 || args.a_step == 0 {
        bail!("--a-min and --a-step must be positive");
    }
    let base = scenario::resolve(&args.scenario)?;
    let mut options = base.options.clone();
    if args.strict_fleet {
        options.planner.require_fleet_bound = true;
    }
    let seeds: Vec<u64> = (0..args.seeds).collect();
    let mut rows = Vec::new();
    for a in (args.a_min..=args.a_max).step_by(args.a_step) {
        let sc = base.clone().with_fleet_size(a);
        let agg = monte_carlo(
            &sc.net,
            &sc.slots,
            args.policy,
            &sc.demand,
            &sc.fleet(),
            &seeds,
            sc.horizon_steps,
            &options,
        );
        let stable = agg.failures == 0
            && agg
                .outcomes
                .iter()
                .all(|o| o.result.as_ref().is_ok_and(|(m, _)| !m.truncated));
        for o in &agg.outcomes {
            if let Err(e) = &o.result {
                eprintln!("fleet {a} seed {}: {e}", o.seed);
            }
        }
        rows.push(SweepRow {
            fleet: a,
            mean_peak_min: agg.mean_peak_travel_min,
            mean_serviced: agg.mean_serviced,
            failures: agg.failures,
            violations: agg.total_violations,
            stable,
        });
    }
    let mut csv = String::from("fleet,mean_peak_min,mean_serviced,failures,violations,stable\n");
    let cell = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
    for r in &rows {
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.fleet,
            cell(r.mean_peak_min),
            cell(r.mean_serviced),
            r.failures,
            r.violations,
            r.stable
        )?;
    }
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&args.out, &csv).with_context(|| format!("writing {}", args.out.display()))?;
    print!("{csv}");
    let smallest = rows.iter().find(|r| r.stable).map(|r| r.fleet);
    println!(
        "smallest_stable_fleet: {}",
        smallest.map_or("none".into(), |a| a.to_string())
    );
    println!(
        "plateau_fleet: {}",
        plateau(&rows, 0.02).map_or("none".into(), |a| a.to_string())
    );
    let violations: usize = rows.iter().map(|r| r.violations).sum();
    let failures: usize = rows.iter().map(|r| r.failures).sum();
    if failures > 0 {
        eprintln!(
            "{}",
            json!({ "error": "planning", "message": format!("{failures} failed runs") })
        );
        return Ok(ExitCode::from(1));
    }
    Ok(status(violations))
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Directory written by `run`.
    #[arg(long)]
    pub trace: PathBuf,
}

pub fn verify_trace(args: &VerifyArgs) -> Result<ExitCode> {
    let net = scenario::network(&args.scenario)?;
    if !args.trace.is_dir() {
        return Err(NotFound(format!("trace directory not found: {}", args.trace.display())).into());
    }
    let slots = build_slot_system(&net);
    let trace = export::read_trace(&args.trace, &net)?;
    let violations = check_safety(&net, &slots, &trace.initial_fleet, &trace.flights, &trace.requests)?;
    for v in &violations {
        println!("violation step {} {}: {}", v.step, v.kind, v.detail);
    }
    if let Err(msg) = trace.check_conservation(&net) {
        bail!("conservation fails: {msg}");
    }
    print!("{}", export::summary(&metrics(&trace), violations.len()));
    Ok(status(violations.len()))
}
