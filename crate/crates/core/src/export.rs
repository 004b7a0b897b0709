//! CSV artifacts for traces, metrics, service vectors and region samples.
//!
//! A trace directory holds enough to rebuild the trace exactly:
//! `run.csv`, `fleet.csv`, `requests.csv`, `flights.csv` and `cycles.csv`.
//! `queues.csv`, `violations.csv` and `travel_time_bins.csv` are derived.

use std::fs::{self, File};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{NetworkSpec, PairId, Step, VertiportId};
use crate::region::{RegionCertificate, ScaleResult};
use crate::schedule::{AircraftState, Flight, Location, Purpose};
use crate::sim::{CycleRecord, MetricsReport, RequestRecord, SimTrace, Violation};
use crate::vectors::ServiceVector;

/// Parses a label such as `(1,3)` into the pair it names.
pub fn parse_pair(net: &NetworkSpec, label: &str) -> Result<PairId> {
    let inner = label.trim().trim_start_matches('(').trim_end_matches(')');
    let (o, d) = inner
        .split_once(',')
        .ok_or_else(|| Error::MalformedTrace(format!("bad pair label '{label}'")))?;
    net.find_pair(o.trim(), d.trim())
        .ok_or_else(|| Error::UnknownPair(label.to_string()))
}

fn parse_vertiport(net: &NetworkSpec, id: &str) -> Result<VertiportId> {
    net.vertiport_index(id)
        .ok_or_else(|| Error::MalformedTrace(format!("unknown vertiport '{id}'")))
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

fn split<T: std::str::FromStr>(s: &str) -> Result<Vec<T>> {
    s.split_whitespace()
        .map(|x| {
            x.parse()
                .map_err(|_| Error::MalformedTrace(format!("bad list entry '{x}'")))
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct RunRow {
    key: String,
    value: String,
}

#[derive(Serialize, Deserialize)]
struct FleetRow {
    aircraft_id: usize,
    state: String,
    vertiport: String,
    available_from: Option<Step>,
    pair: String,
    takeoff: Option<Step>,
}

#[derive(Serialize, Deserialize)]
struct RequestRow {
    id: u64,
    pair: String,
    arrival: Step,
    takeoff: Option<Step>,
    completion: Option<Step>,
}

#[derive(Serialize, Deserialize)]
struct FlightRow {
    takeoff: Step,
    pair: String,
    aircraft: Option<usize>,
    purpose: String,
}

#[derive(Serialize, Deserialize)]
struct CycleRow {
    k: usize,
    start: Step,
    end: Step,
    #[serde(rename = "sum_K")]
    sum_k: f64,
    bound: Step,
    queue: String,
    serviced: String,
}

#[derive(Serialize)]
struct QueueRow<'a> {
    step: Step,
    pair: &'a str,
    #[serde(rename = "Q")]
    q: u32,
}

#[derive(Serialize, Deserialize)]
struct ViolationRow {
    step: Step,
    kind: String,
    detail: String,
}

#[derive(Serialize)]
struct BinRow {
    bin_start_min: f64,
    mean_min: Option<f64>,
    count: usize,
    censored: usize,
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::MalformedTrace(format!("{}: {e}", path.display())))?;
    csv::Reader::from_reader(file)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

/// Writes the trace, its queue series and the violation list into `dir`.
pub fn write_trace(dir: &Path, net: &NetworkSpec, trace: &SimTrace, violations: &[Violation]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let labels: Vec<String> = net.pair_ids().map(|p| net.pair_label(p)).collect();
    let run = [
        ("policy", trace.policy.clone()),
        ("seed", trace.seed.to_string()),
        ("horizon", trace.horizon.to_string()),
        ("tau_c_min", trace.tau_c_min.to_string()),
        ("num_pairs", trace.num_pairs.to_string()),
        ("truncated", trace.truncated.to_string()),
    ];
    write_rows(
        &dir.join("run.csv"),
        run.iter().map(|(k, v)| RunRow {
            key: k.to_string(),
            value: v.clone(),
        }),
    )?;
    write_rows(
        &dir.join("fleet.csv"),
        trace.initial_fleet.iter().map(|a| match a.location {
            Location::Parked {
                vertiport,
                available_from,
            } => FleetRow {
                aircraft_id: a.id,
                state: "parked".into(),
                vertiport: net.vertiports[vertiport.0].id.clone(),
                available_from: Some(available_from),
                pair: String::new(),
                takeoff: None,
            },
            Location::Airborne { pair, takeoff } => FleetRow {
                aircraft_id: a.id,
                state: "airborne".into(),
                vertiport: String::new(),
                available_from: None,
                pair: labels[pair.0].clone(),
                takeoff: Some(takeoff),
            },
        }),
    )?;
    write_rows(
        &dir.join("requests.csv"),
        trace.requests.iter().map(|r| RequestRow {
            id: r.id,
            pair: labels[r.pair.0].clone(),
            arrival: r.arrival,
            takeoff: r.takeoff,
            completion: r.completion,
        }),
    )?;
    write_rows(
        &dir.join("flights.csv"),
        trace.flights.iter().map(|f| FlightRow {
            takeoff: f.takeoff,
            pair: labels[f.pair.0].clone(),
            aircraft: f.aircraft,
            purpose: match f.purpose {
                Purpose::Passenger => "passenger".into(),
                Purpose::Rebalance => "rebalance".into(),
            },
        }),
    )?;
    write_rows(
        &dir.join("cycles.csv"),
        trace.cycles.iter().map(|c| CycleRow {
            k: c.index,
            start: c.start,
            end: c.end,
            sum_k: c.sum_k,
            bound: c.bound,
            queue: join(&c.queue),
            serviced: join(&c.serviced),
        }),
    )?;
    let queues = trace.queues();
    write_rows(
        &dir.join("queues.csv"),
        queues.iter().enumerate().flat_map(|(t, q)| {
            let labels = &labels;
            q.iter().enumerate().map(move |(p, &x)| QueueRow {
                step: t as Step,
                pair: &labels[p],
                q: x,
            })
        }),
    )?;
    write_violations(&dir.join("violations.csv"), violations)
}

pub fn write_violations(path: &Path, violations: &[Violation]) -> Result<()> {
    write_rows(
        path,
        violations.iter().map(|v| ViolationRow {
            step: v.step,
            kind: v.kind.to_string(),
            detail: v.detail.clone(),
        }),
    )
}

/// Writes `travel_time_bins.csv` and a `metrics.txt` summary.
pub fn write_metrics(dir: &Path, report: &MetricsReport, violations: usize) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_rows(
        &dir.join("travel_time_bins.csv"),
        report.bins.iter().map(|b| BinRow {
            bin_start_min: b.start_min,
            mean_min: b.mean_min,
            count: b.count,
            censored: b.censored,
        }),
    )?;
    fs::write(dir.join("metrics.txt"), summary(report, violations))?;
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"))
}

/// Human-readable summary of a run.
pub fn summary(report: &MetricsReport, violations: usize) -> String {
    format!(
        "serviced: {}/{}\ncensored: {}\npeak_travel_min: {}\nmean_travel_min: {}\ncensored_mean_wait_min: {}\n\
         max_queue: {}\nmean_queue: {:.3}\ncycles: {}\nlarge_cycle_ratio_sq_mean: {}\ntruncated: {}\nviolations: {}\n",
        report.serviced,
        report.requested,
        report.censored,
        opt(report.peak_travel_min),
        opt(report.mean_travel_min),
        opt(report.censored_mean_wait_min),
        report.max_queue,
        report.mean_queue,
        report.cycle_lengths.len(),
        opt(report.large_cycle_ratio_sq_mean),
        report.truncated,
        violations,
    )
}

/// Rebuilds a trace written by [`write_trace`].
pub fn read_trace(dir: &Path, net: &NetworkSpec) -> Result<SimTrace> {
    let run: Vec<RunRow> = read_rows(&dir.join("run.csv"))?;
    let get = |key: &str| -> Result<&str> {
        run.iter()
            .find(|r| r.key == key)
            .map(|r| r.value.as_str())
            .ok_or_else(|| Error::MalformedTrace(format!("run.csv lacks '{key}'")))
    };
    let parse_err = |key: &str| Error::MalformedTrace(format!("run.csv has a bad '{key}'"));
    let num_pairs: usize = get("num_pairs")?.parse().map_err(|_| parse_err("num_pairs"))?;
    if num_pairs != net.num_pairs() {
        return Err(Error::MalformedTrace(format!(
            "trace has {num_pairs} pairs, network has {}",
            net.num_pairs()
        )));
    }

    let fleet = read_rows::<FleetRow>(&dir.join("fleet.csv"))?
        .into_iter()
        .map(|r| match r.state.as_str() {
            "parked" => Ok(AircraftState::parked(
                r.aircraft_id,
                parse_vertiport(net, &r.vertiport)?,
                r.available_from
                    .ok_or_else(|| Error::MalformedTrace("parked aircraft lacks available_from".into()))?,
            )),
            "airborne" => Ok(AircraftState {
                id: r.aircraft_id,
                location: Location::Airborne {
                    pair: parse_pair(net, &r.pair)?,
                    takeoff: r
                        .takeoff
                        .ok_or_else(|| Error::MalformedTrace("airborne aircraft lacks takeoff".into()))?,
                },
            }),
            other => Err(Error::MalformedTrace(format!("unknown aircraft state '{other}'"))),
        })
        .collect::<Result<Vec<_>>>()?;
    let requests = read_rows::<RequestRow>(&dir.join("requests.csv"))?
        .into_iter()
        .map(|r| {
            Ok(RequestRecord {
                id: r.id,
                pair: parse_pair(net, &r.pair)?,
                arrival: r.arrival,
                takeoff: r.takeoff,
                completion: r.completion,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let flights = read_rows::<FlightRow>(&dir.join("flights.csv"))?
        .into_iter()
        .map(|r| {
            let purpose = match r.purpose.as_str() {
                "passenger" => Purpose::Passenger,
                "rebalance" => Purpose::Rebalance,
                other => return Err(Error::MalformedTrace(format!("unknown flight purpose '{other}'"))),
            };
            Ok(Flight {
                takeoff: r.takeoff,
                pair: parse_pair(net, &r.pair)?,
                aircraft: r.aircraft,
                purpose,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let cycles = read_rows::<CycleRow>(&dir.join("cycles.csv"))?
        .into_iter()
        .map(|r| {
            Ok(CycleRecord {
                index: r.k,
                start: r.start,
                end: r.end,
                sum_k: r.sum_k,
                bound: r.bound,
                queue: split(&r.queue)?,
                serviced: split(&r.serviced)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimTrace {
        policy: get("policy")?.to_string(),
        seed: get("seed")?.parse().map_err(|_| parse_err("seed"))?,
        horizon: get("horizon")?.parse().map_err(|_| parse_err("horizon"))?,
        tau_c_min: get("tau_c_min")?.parse().map_err(|_| parse_err("tau_c_min"))?,
        num_pairs,
        initial_fleet: fleet,
        requests,
        flights,
        cycles,
        truncated: get("truncated")?.parse().map_err(|_| parse_err("truncated"))?,
    })
}

/// `vectors.csv`: one row per vector with its multiples and witness offsets per pair.
pub fn write_vectors(path: &Path, net: &NetworkSpec, vectors: &[ServiceVector]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["id".to_string()];
    for p in net.pair_ids() {
        header.push(format!("rate{}", net.pair_label(p)));
    }
    for p in net.pair_ids() {
        header.push(format!("offsets{}", net.pair_label(p)));
    }
    w.write_record(&header)?;
    for v in vectors {
        let mut row = vec![v.id.to_string()];
        row.extend(v.rates().iter().map(|r| r.to_string()));
        row.extend(v.offsets.iter().map(|o| join(o)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `region_grid.csv`: demand point, membership and LP margin.
pub fn write_region_grid(path: &Path, net: &NetworkSpec, points: &[(Vec<f64>, RegionCertificate)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = net.pair_ids().map(|p| format!("lambda{}", net.pair_label(p))).collect();
    header.extend(["member", "strict", "margin"].map(String::from));
    w.write_record(&header)?;
    for (lambda, cert) in points {
        let mut row: Vec<String> = lambda.iter().map(|x| x.to_string()).collect();
        row.push(cert.member.to_string());
        row.push(cert.strict.to_string());
        row.push(cert.margin.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `theta.csv`: the scale along a direction and the pairs whose constraint binds.
pub fn write_theta(path: &Path, net: &NetworkSpec, tau_over_tau_c: f64, scale: &ScaleResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["theta_per_step", "theta_per_tau", "binding_pairs"])?;
    let binding: Vec<String> = scale.binding_pairs.iter().map(|&p| net.pair_label(p)).collect();
    w.write_record([
        scale.theta.to_string(),
        (scale.theta * tau_over_tau_c).to_string(),
        binding.join(" "),
    ])?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn pair_labels_round_trip() {
        let net = presets::example1_network();
        for p in net.pair_ids() {
            assert_eq!(parse_pair(&net, &net.pair_label(p)).unwrap(), p);
        }
        assert!(parse_pair(&net, "(9,9)").is_err());
        assert!(parse_pair(&net, "13").is_err());
    }

    #[test]
    fn lists_round_trip() {
        assert_eq!(split::<u64>(&join(&[3u64, 0, 7])).unwrap(), vec![3, 0, 7]);
        assert!(split::<u64>("").unwrap().is_empty());
        assert!(split::<u64>("1 x").is_err());
    }
}
