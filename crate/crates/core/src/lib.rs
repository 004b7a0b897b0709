//! Scheduling and simulation toolkit for on-demand urban air mobility
//! networks: a cycle-based synchronous policy with rebalancing, a
//! first-come first-serve baseline, throughput-region computation from
//! service vectors, and a safety-checked discrete-time simulator.

pub mod book;
pub mod error;
pub mod export;
pub mod fcfs;
pub mod lp;
pub mod network;
pub mod presets;
pub mod region;
pub mod schedule;
pub mod sim;
pub mod stats;
pub mod vectors;
pub mod vertisync;

pub use error::{Error, Result};
pub use network::{build_slot_system, load_network, NetworkSpec, PairId, SlotSystem, Step, VertiportId};
