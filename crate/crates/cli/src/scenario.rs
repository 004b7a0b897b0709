use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use vertisync::network::{build_slot_system, load_network, NetworkSpec, Step};
use vertisync::presets::{self, Scenario};
use vertisync::sim::load_demand;

/// Where the network, demand and fleet come from.
#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Bundled scenario: la_morning or example1.
    #[arg(long, conflicts_with = "network")]
    pub scenario: Option<String>,
    /// Network config (TOML) instead of a bundled scenario.
    #[arg(long)]
    pub network: Option<PathBuf>,
    /// Demand profile (TOML); replaces the scenario's demand.
    #[arg(long)]
    pub demand: Option<PathBuf>,
    /// Multiplies every demand rate.
    #[arg(long)]
    pub rate_scale: Option<f64>,
    /// Fleet size A.
    #[arg(long)]
    pub fleet: Option<usize>,
    /// Vertiport ids where the fleet starts, round-robin (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub fleet_at: Vec<String>,
    /// Simulated horizon in minutes.
    #[arg(long)]
    pub horizon_min: Option<f64>,
}

#[derive(Debug)]
pub struct NotFound(pub String);

impl std::fmt::Display for NotFound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NotFound {}

fn read(path: &Path, what: &str) -> Result<String> {
    if !path.is_file() {
        return Err(NotFound(format!("{what} not found: {}", path.display())).into());
    }
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Loads only the network, for commands that need no demand.
pub fn network(args: &ScenarioArgs) -> Result<NetworkSpec> {
    match (&args.network, &args.scenario) {
        (Some(path), _) => Ok(load_network(&read(path, "network config")?)?),
        (None, Some(name)) => Ok(presets::by_name(name)?.net),
        (None, None) => bail!("either --scenario or --network is required"),
    }
}

pub fn resolve(args: &ScenarioArgs) -> Result<Scenario> {
    let mut sc = match (&args.network, &args.scenario) {
        (Some(path), _) => {
            let net = load_network(&read(path, "network config")?)?;
            let Some(demand_path) = &args.demand else {
                bail!("--network needs --demand");
            };
            let demand = load_demand(&net, &read(demand_path, "demand profile")?)?;
            let fleet = build_slot_system(&net).total_distinct();
            let name = path
                .file_stem()
                .map_or("custom".into(), |s| s.to_string_lossy().into_owned());
            Scenario::new(&name, net, demand, fleet, vec![vertisync::network::VertiportId(0)])
        }
        (None, Some(name)) => {
            let mut sc = presets::by_name(name)?;
            if let Some(path) = &args.demand {
                sc.demand = load_demand(&sc.net, &read(path, "demand profile")?)?;
                sc.horizon_steps = sc.demand.horizon_steps;
            }
            sc
        }
        (None, None) => bail!("either --scenario or --network is required"),
    };
    if let Some(f) = args.rate_scale {
        sc.demand = sc.demand.scaled(f)?;
    }
    if let Some(a) = args.fleet {
        sc.fleet_size = a;
    }
    if !args.fleet_at.is_empty() {
        sc.fleet_vertiports = args
            .fleet_at
            .iter()
            .map(|id| {
                sc.net
                    .vertiport_index(id.trim())
                    .with_context(|| format!("unknown vertiport '{id}'"))
            })
            .collect::<Result<_>>()?;
    }
    if let Some(m) = args.horizon_min {
        sc.horizon_steps = steps(&sc.net, m)?;
    }
    Ok(sc)
}

fn steps(net: &NetworkSpec, minutes: f64) -> Result<Step> {
    if !minutes.is_finite() || minutes < 0.0 {
        bail!("horizon must be a non-negative number of minutes");
    }
    Ok((minutes / net.tau_c_min).round() as Step)
}
