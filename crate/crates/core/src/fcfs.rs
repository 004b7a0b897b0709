//! First-come first-serve baseline.
//!
//! Requests are booked one by one in arrival order at the earliest takeoff
//! step that conflicts with no earlier booking. Takeoff steps never decrease
//! along the arrival order. There is no rebalancing.

use crate::book::ReservationBook;
use crate::error::{Error, Result};
use crate::network::{NetworkSpec, PairId, SlotSystem, Step, VertiportId};
use crate::schedule::{AircraftState, Flight, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FcfsMode {
    /// An aircraft is always available at the origin.
    #[default]
    InfiniteAircraft,
    /// Only the given fleet flies; aircraft stay where they land.
    FleetConstrained,
}

#[derive(Debug, Clone)]
pub struct FcfsState<'a> {
    net: &'a NetworkSpec,
    book: ReservationBook<'a>,
    mode: FcfsMode,
    last_takeoff: Step,
    ground: Vec<(VertiportId, Step)>,
    ids: Vec<usize>,
    pub flights: Vec<Flight>,
}

impl<'a> FcfsState<'a> {
    pub fn new(net: &'a NetworkSpec, slots: &'a SlotSystem, mode: FcfsMode, fleet: &[AircraftState]) -> Self {
        Self {
            net,
            book: ReservationBook::new(net, slots, 0),
            mode,
            last_takeoff: Step::MIN,
            ground: fleet.iter().map(|a| a.next_ground(net)).collect(),
            ids: fleet.iter().map(|a| a.id).collect(),
            flights: Vec::new(),
        }
    }

    pub fn book(&self) -> &ReservationBook<'a> {
        &self.book
    }

    /// Books the next request in arrival order and returns its flight.
    pub fn schedule_next(&mut self, pair: PairId, arrival: Step, request_id: u64) -> Result<Flight> {
        let floor = arrival.max(self.last_takeoff);
        let (aircraft, from) = match self.mode {
            FcfsMode::InfiniteAircraft => (None, floor),
            FcfsMode::FleetConstrained => {
                let origin = self.net.pair(pair).origin;
                let a = (0..self.ground.len())
                    .filter(|&a| self.ground[a].0 == origin)
                    .min_by_key(|&a| (self.ground[a].1, self.ids[a]))
                    .ok_or(Error::Unschedulable(request_id as usize))?;
                (Some(a), floor.max(self.ground[a].1))
            }
        };
        let n = self.book.earliest(pair, from);
        self.book.commit(pair, n);
        self.last_takeoff = n;
        let flight = Flight {
            takeoff: n,
            pair,
            aircraft: aircraft.map(|a| self.ids[a]),
            purpose: Purpose::Passenger,
        };
        if let Some(a) = aircraft {
            let p = self.net.pair(pair);
            self.ground[a] = (p.destination, n + p.flight_steps as Step + self.net.k_tau as Step);
        }
        self.flights.push(flight);
        Ok(flight)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_slot_system, load_network};
    use crate::presets;
    use crate::schedule::fleet_at;

    #[test]
    fn empty_state_takes_off_at_arrival() {
        let net = presets::example1_network();
        let slots = build_slot_system(&net);
        let mut st = FcfsState::new(&net, &slots, FcfsMode::InfiniteAircraft, &[]);
        assert_eq!(st.schedule_next(PairId(0), 0, 0).unwrap().takeoff, 0);
    }

    #[test]
    fn one_pad_spaces_same_pair_by_k() {
        let net = presets::example1_network();
        let slots = build_slot_system(&net);
        let mut st = FcfsState::new(&net, &slots, FcfsMode::InfiniteAircraft, &[]);
        st.schedule_next(PairId(0), 0, 0).unwrap();
        assert_eq!(st.schedule_next(PairId(0), 0, 1).unwrap().takeoff, 10);
    }

    #[test]
    fn shared_class_shifts_second_request() {
        // (1,3) and (2,4) cross at slot 8; (2,4) leaves from another pad
        let net = presets::example1_network();
        let slots = build_slot_system(&net);
        let mut st = FcfsState::new(&net, &slots, FcfsMode::InfiniteAircraft, &[]);
        st.schedule_next(PairId(0), 0, 0).unwrap();
        assert_eq!(st.schedule_next(PairId(3), 0, 1).unwrap().takeoff, 1);
    }

    #[test]
    fn fleet_mode_reports_stranded_origin() {
        let text = r#"
tau_min = 1.0
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
flight_time_min = 1.0
links = ["ab"]
[[od_pairs]]
origin = "B"
destination = "A"
flight_time_min = 1.0
links = ["ba"]
"#;
        let net = load_network(text).unwrap();
        let slots = build_slot_system(&net);
        let fleet = fleet_at(0, 1, VertiportId(0), 0);
        let mut st = FcfsState::new(&net, &slots, FcfsMode::FleetConstrained, &fleet);
        st.schedule_next(PairId(0), 0, 0).unwrap();
        assert!(matches!(
            st.schedule_next(PairId(0), 1, 1),
            Err(Error::Unschedulable(1))
        ));
        // the aircraft can still fly back, k steps after landing at step 2
        assert_eq!(st.schedule_next(PairId(1), 1, 2).unwrap().takeoff, 4);
    }
}
