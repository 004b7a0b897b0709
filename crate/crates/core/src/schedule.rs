//! Flights, aircraft states and itinerary export shared by both policies.

use std::io::Write;

use crate::error::Result;
use crate::network::{NetworkSpec, PairId, Step, VertiportId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Purpose {
    Passenger,
    Rebalance,
}

/// One takeoff-to-landing trip of one aircraft.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Flight {
    pub takeoff: Step,
    pub pair: PairId,
    /// `None` for the unlimited-fleet baseline, where every flight has its own aircraft.
    pub aircraft: Option<usize>,
    pub purpose: Purpose,
}

impl Flight {
    pub fn landing(&self, net: &NetworkSpec) -> Step {
        self.takeoff + net.pair(self.pair).flight_steps as Step
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    /// On the ground; may take off at `available_from` or later.
    Parked {
        vertiport: VertiportId,
        available_from: Step,
    },
    /// In the air since `takeoff`.
    Airborne { pair: PairId, takeoff: Step },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AircraftState {
    pub id: usize,
    pub location: Location,
}

impl AircraftState {
    pub fn parked(id: usize, vertiport: VertiportId, available_from: Step) -> Self {
        Self {
            id,
            location: Location::Parked {
                vertiport,
                available_from,
            },
        }
    }

    /// Where the aircraft will be on the ground next, and from when it can take off.
    pub fn next_ground(&self, net: &NetworkSpec) -> (VertiportId, Step) {
        match self.location {
            Location::Parked {
                vertiport,
                available_from,
            } => (vertiport, available_from),
            Location::Airborne { pair, takeoff } => {
                let p = net.pair(pair);
                (p.destination, takeoff + p.flight_steps as Step + net.k_tau as Step)
            }
        }
    }

    /// State after flying `flight` (which must start from `next_ground`).
    pub fn after(&self, net: &NetworkSpec, flight: &Flight) -> Self {
        let p = net.pair(flight.pair);
        Self::parked(
            self.id,
            p.destination,
            flight.takeoff + p.flight_steps as Step + net.k_tau as Step,
        )
    }

    /// State observed at step `t` given the flights it flies from now on.
    pub fn at_step(&self, net: &NetworkSpec, flights: &[Flight], t: Step) -> Self {
        let mut state = *self;
        for f in flights.iter().filter(|f| f.aircraft == Some(self.id)) {
            if f.takeoff > t {
                break;
            }
            state = if f.landing(net) > t {
                Self {
                    id: self.id,
                    location: Location::Airborne {
                        pair: f.pair,
                        takeoff: f.takeoff,
                    },
                }
            } else {
                state.after(net, f)
            };
        }
        state
    }
}

/// Places `count` aircraft at `vertiport`, available from `from`, ids starting at `first_id`.
pub fn fleet_at(first_id: usize, count: usize, vertiport: VertiportId, from: Step) -> Vec<AircraftState> {
    (0..count)
        .map(|i| AircraftState::parked(first_id + i, vertiport, from))
        .collect()
}

/// Writes `aircraft_id, step, action, pair, slot_index` rows, one per slot
/// occupied, with `takeoff` and `land` marking the first and last slot.
pub fn write_itineraries<W: Write>(net: &NetworkSpec, flights: &[Flight], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["aircraft_id", "step", "action", "pair", "slot_index"])?;
    let mut sorted: Vec<&Flight> = flights.iter().collect();
    sorted.sort_by_key(|f| (f.aircraft, f.takeoff, f.pair));
    for f in sorted {
        let id = f.aircraft.map_or_else(|| "-".to_string(), |a| a.to_string());
        let steps = net.pair(f.pair).flight_steps;
        let label = net.pair_label(f.pair);
        for i in 0..=steps {
            let action = match (i, f.purpose) {
                (0, Purpose::Passenger) => "takeoff",
                (0, Purpose::Rebalance) => "takeoff_empty",
                (i, _) if i == steps => "land",
                _ => "occupy",
            };
            w.write_record([
                id.clone(),
                (f.takeoff + i as Step).to_string(),
                action.to_string(),
                label.clone(),
                i.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
