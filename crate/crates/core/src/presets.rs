//! Networks, demand profiles and scenarios shipped with the crate.

use crate::error::{Error, Result};
use crate::network::{build_slot_system, load_network, NetworkSpec, SlotSystem, Step, VertiportId};
use crate::schedule::AircraftState;
use crate::sim::{load_demand, DemandProfile, ProcessKind, RunOptions};
use crate::vertisync::PlannerOptions;

pub const EXAMPLE1_NETWORK: &str = include_str!("../../../presets/example1.toml");
pub const LA_NETWORK: &str = include_str!("../../../presets/la_morning.toml");
pub const LA_DEMAND: &str = include_str!("../../../presets/la_morning_demand.toml");

/// The symmetric four-vertiport, one-pad network.
pub fn example1_network() -> NetworkSpec {
    load_network(EXAMPLE1_NETWORK).expect("bundled example1 network is valid")
}

/// The four-vertiport Los Angeles network with ten pads per vertiport.
pub fn la_network() -> NetworkSpec {
    load_network(LA_NETWORK).expect("bundled la_morning network is valid")
}

/// The approximate morning-rush demand on the Los Angeles network.
pub fn la_demand() -> DemandProfile {
    load_demand(&la_network(), LA_DEMAND).expect("bundled la_morning demand is valid")
}

/// A network, a demand profile and an initial fleet.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub net: NetworkSpec,
    pub slots: SlotSystem,
    pub demand: DemandProfile,
    pub fleet_size: usize,
    /// aircraft are parked round-robin over these vertiports
    pub fleet_vertiports: Vec<VertiportId>,
    pub horizon_steps: Step,
    pub options: RunOptions,
}

impl Scenario {
    pub fn new(
        name: &str,
        net: NetworkSpec,
        demand: DemandProfile,
        fleet_size: usize,
        fleet_vertiports: Vec<VertiportId>,
    ) -> Self {
        let slots = build_slot_system(&net);
        let horizon_steps = demand.horizon_steps;
        Self {
            name: name.to_string(),
            net,
            slots,
            demand,
            fleet_size,
            fleet_vertiports,
            horizon_steps,
            options: RunOptions::default(),
        }
    }

    pub fn fleet(&self) -> Vec<AircraftState> {
        (0..self.fleet_size)
            .map(|i| AircraftState::parked(i, self.fleet_vertiports[i % self.fleet_vertiports.len()], 0))
            .collect()
    }

    pub fn with_fleet_size(mut self, fleet_size: usize) -> Self {
        self.fleet_size = fleet_size;
        self
    }
}

/// Los Angeles morning rush: 32 aircraft parked at vertiport 1, 6:00 to 11:00.
///
/// The fleet is below the number of distinct slots, so the planner runs
/// without the fleet-size precondition.
pub fn la_morning() -> Scenario {
    let mut s = Scenario::new("la_morning", la_network(), la_demand(), 32, vec![VertiportId(0)]);
    s.options.planner = PlannerOptions {
        require_fleet_bound: false,
        ..PlannerOptions::default()
    };
    s
}

/// Example-1 network with uniform Bernoulli demand `rate` per step on every
/// pair for five hours, with one aircraft per distinct slot spread evenly
/// over the vertiports.
pub fn example1_uniform(rate: f64) -> Result<Scenario> {
    let net = example1_network();
    let horizon = (300.0 / net.tau_c_min).round() as Step;
    let demand = DemandProfile::constant(ProcessKind::Bernoulli, horizon, &vec![rate; net.num_pairs()])?;
    let slots = build_slot_system(&net);
    let size = slots.total_distinct();
    let homes = (0..net.vertiports.len()).map(VertiportId).collect();
    Ok(Scenario::new("example1", net, demand, size, homes))
}

pub fn by_name(name: &str) -> Result<Scenario> {
    match name {
        "la_morning" => Ok(la_morning()),
        "example1" => example1_uniform(0.01),
        other => Err(Error::Parse(format!(
            "unknown scenario '{other}' (la_morning, example1)"
        ))),
    }
}
