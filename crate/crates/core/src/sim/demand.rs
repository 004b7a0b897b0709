use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::network::{NetworkSpec, PairId, Step};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessKind {
    /// At most one request per pair per step, with probability equal to the rate.
    Bernoulli,
    /// Poisson-distributed request counts per step with mean equal to the rate.
    PoissonCounts,
}

/// Piecewise-constant request rates (per step) for every pair.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandProfile {
    pub kind: ProcessKind,
    pub horizon_steps: Step,
    /// Per pair, `(first step, rate per step)` pieces sorted by step; the rate
    /// before the first piece is zero.
    pub rates: Vec<Vec<(Step, f64)>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Request {
    pub id: u64,
    pub pair: PairId,
    pub arrival: Step,
}

impl DemandProfile {
    /// Constant per-step rates over the whole horizon.
    pub fn constant(kind: ProcessKind, horizon_steps: Step, rates: &[f64]) -> Result<Self> {
        let profile = Self {
            kind,
            horizon_steps,
            rates: rates
                .iter()
                .map(|&r| if r > 0.0 { vec![(0, r)] } else { Vec::new() })
                .collect(),
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon_steps < 0 {
            return Err(Error::InvalidDemand("horizon must be non-negative".into()));
        }
        for (p, pieces) in self.rates.iter().enumerate() {
            for w in pieces.windows(2) {
                if w[1].0 <= w[0].0 {
                    return Err(Error::InvalidDemand(format!(
                        "breakpoints of pair {p} are not increasing"
                    )));
                }
            }
            for &(_, r) in pieces {
                if !r.is_finite() || r < 0.0 {
                    return Err(Error::InvalidDemand(format!("pair {p} has invalid rate {r}")));
                }
                if self.kind == ProcessKind::Bernoulli && r > 1.0 {
                    return Err(Error::InvalidDemand(format!(
                        "bernoulli rate {r} of pair {p} exceeds 1"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn num_pairs(&self) -> usize {
        self.rates.len()
    }

    pub fn rate_at(&self, p: PairId, t: Step) -> f64 {
        self.rates[p.0]
            .iter()
            .take_while(|(s, _)| *s <= t)
            .last()
            .map_or(0.0, |&(_, r)| r)
    }

    /// Pairs with a positive rate somewhere within the horizon.
    pub fn support(&self) -> Vec<PairId> {
        (0..self.rates.len())
            .filter(|&p| self.rates[p].iter().any(|&(s, r)| r > 0.0 && s < self.horizon_steps))
            .map(PairId)
            .collect()
    }

    /// Multiplies every rate by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let out = Self {
            kind: self.kind,
            horizon_steps: self.horizon_steps,
            rates: self
                .rates
                .iter()
                .map(|pc| pc.iter().map(|&(s, r)| (s, r * factor)).collect())
                .collect(),
        };
        out.validate()?;
        Ok(out)
    }

    /// Expected number of requests of pair `p` over the horizon.
    pub fn expected_requests(&self, p: PairId) -> f64 {
        (0..self.horizon_steps).map(|t| self.rate_at(p, t)).sum()
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    process: ProcessKind,
    horizon_min: f64,
    #[serde(default)]
    rate_unit: RateUnit,
    #[serde(default)]
    pairs: Vec<RawPairRate>,
}

#[derive(Debug, Default, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RateUnit {
    #[default]
    PerStep,
    PerTau,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPairRate {
    origin: String,
    destination: String,
    start_min: Vec<f64>,
    rate: Vec<f64>,
}

/// Parses a demand profile (TOML) against a network.
pub fn load_demand(net: &NetworkSpec, text: &str) -> Result<DemandProfile> {
    let raw: RawProfile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let to_steps = |min: f64| -> Result<Step> {
        let s = min / net.tau_c_min;
        if (s - s.round()).abs() > 1e-9 {
            return Err(Error::InvalidDemand(format!(
                "{min} min is not a whole number of steps"
            )));
        }
        Ok(s.round() as Step)
    };
    let unit = match raw.rate_unit {
        RateUnit::PerStep => 1.0,
        RateUnit::PerTau => 1.0 / net.k_tau as f64,
    };
    let mut rates = vec![Vec::new(); net.num_pairs()];
    for pr in &raw.pairs {
        let p = net
            .find_pair(&pr.origin, &pr.destination)
            .ok_or_else(|| Error::UnknownPair(format!("({},{})", pr.origin, pr.destination)))?;
        if pr.start_min.len() != pr.rate.len() {
            return Err(Error::InvalidDemand(format!(
                "pair ({},{}) has {} breakpoints and {} rates",
                pr.origin,
                pr.destination,
                pr.start_min.len(),
                pr.rate.len()
            )));
        }
        if !rates[p.0].is_empty() {
            return Err(Error::InvalidDemand(format!(
                "pair ({},{}) listed twice",
                pr.origin, pr.destination
            )));
        }
        rates[p.0] = pr
            .start_min
            .iter()
            .zip(&pr.rate)
            .map(|(&s, &r)| Ok((to_steps(s)?, r * unit)))
            .collect::<Result<_>>()?;
    }
    let profile = DemandProfile {
        kind: raw.process,
        horizon_steps: to_steps(raw.horizon_min)?,
        rates,
    };
    profile.validate()?;
    Ok(profile)
}

/// FNV-1a over the seed and the pair label, so a pair's stream does not
/// depend on how pairs are numbered.
fn stream_seed(seed: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in seed.to_le_bytes().iter().chain(label.as_bytes()) {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Draws the request stream; deterministic in `seed`.
///
/// Requests are ordered by arrival step, then pair, and numbered in that order.
pub fn generate_demand(net: &NetworkSpec, profile: &DemandProfile, seed: u64) -> Result<Vec<Request>> {
    profile.validate()?;
    if profile.num_pairs() != net.num_pairs() {
        return Err(Error::InvalidDemand(format!(
            "profile has {} pairs, network has {}",
            profile.num_pairs(),
            net.num_pairs()
        )));
    }
    // per step, per pair counts
    let mut arrivals: Vec<(Step, usize)> = Vec::new();
    for p in 0..net.num_pairs() {
        if profile.rates[p].iter().all(|&(_, r)| r == 0.0) {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, &net.pair_label(PairId(p))));
        for t in 0..profile.horizon_steps {
            let r = profile.rate_at(PairId(p), t);
            let count = match profile.kind {
                ProcessKind::Bernoulli => u64::from(r > 0.0 && rng.gen_bool(r)),
                ProcessKind::PoissonCounts => {
                    if r > 0.0 {
                        Poisson::new(r)
                            .map_err(|e| Error::InvalidDemand(e.to_string()))?
                            .sample(&mut rng) as u64
                    } else {
                        0
                    }
                }
            };
            for _ in 0..count {
                arrivals.push((t, p));
            }
        }
    }
    arrivals.sort();
    Ok(arrivals
        .into_iter()
        .enumerate()
        .map(|(id, (arrival, p))| Request {
            id: id as u64,
            pair: PairId(p),
            arrival,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn one_pair(kind: ProcessKind, rate: f64, horizon: Step) -> (NetworkSpec, DemandProfile) {
        let net = presets::example1_network();
        let mut rates = vec![0.0; net.num_pairs()];
        rates[0] = rate;
        let profile = DemandProfile::constant(kind, horizon, &rates).unwrap();
        (net, profile)
    }

    #[test]
    fn zero_rate_is_empty() {
        let (net, profile) = one_pair(ProcessKind::Bernoulli, 0.0, 100);
        assert!(generate_demand(&net, &profile, 1).unwrap().is_empty());
    }

    #[test]
    fn certain_bernoulli_fills_every_step() {
        let (net, profile) = one_pair(ProcessKind::Bernoulli, 1.0, 10);
        let reqs = generate_demand(&net, &profile, 9).unwrap();
        assert_eq!(reqs.len(), 10);
        assert!(reqs.iter().enumerate().all(|(i, r)| r.arrival == i as Step));
    }

    #[test]
    fn bernoulli_above_one_rejected() {
        let net = presets::example1_network();
        let mut rates = vec![0.0; net.num_pairs()];
        rates[2] = 1.5;
        assert!(DemandProfile::constant(ProcessKind::Bernoulli, 10, &rates).is_err());
        assert!(DemandProfile::constant(ProcessKind::PoissonCounts, 10, &rates).is_ok());
    }

    #[test]
    fn same_seed_same_stream() {
        let (net, profile) = one_pair(ProcessKind::PoissonCounts, 0.3, 500);
        assert_eq!(
            generate_demand(&net, &profile, 4).unwrap(),
            generate_demand(&net, &profile, 4).unwrap()
        );
        assert_ne!(
            generate_demand(&net, &profile, 4).unwrap(),
            generate_demand(&net, &profile, 5).unwrap()
        );
    }

    #[test]
    fn parses_per_tau_rates() {
        let net = presets::la_network();
        let text = r#"
process = "poisson_counts"
horizon_min = 60
rate_unit = "per_tau"
[[pairs]]
origin = "1"
destination = "3"
start_min = [0, 30]
rate = [1.0, 2.0]
"#;
        let d = load_demand(&net, text).unwrap();
        assert_eq!(d.horizon_steps, 120);
        assert!((d.rate_at(PairId(0), 59) - 0.1).abs() < 1e-12);
        assert!((d.rate_at(PairId(0), 60) - 0.2).abs() < 1e-12);
        assert_eq!(d.support(), vec![PairId(0)]);
    }
}
