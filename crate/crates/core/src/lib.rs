//! Macroscopic highway simulator: the cell transmission model extended with
//! service stations where part of the traffic stops, dwells, and re-merges.
//!
//! The dynamics live in [`step`]; [`sim`] runs a [`scenario::Scenario`] over
//! its horizon and [`metrics`] turns trajectories into congestion figures.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod demand;
pub mod error;
pub mod flow;
pub mod merge;
pub mod metrics;
pub mod model;
pub mod report;
pub mod scenario;
pub mod sim;
pub mod step;
pub mod sweep;
pub mod validate;

pub use control::{ControlDecision, Controller, ControllerConfig, IntegralMetering, NoControl};
pub use demand::DemandProfile;
pub use error::{Error, MetricsError, ModelError, ScenarioError};
pub use flow::{cell_demand, cell_supply, station_demand, station_update};
pub use merge::{allocate_merge, MergeAllocation, MergeRegime};
pub use model::{
    CellParams, FlowRecord, OnRamp, Priority, Schedule, SimState, StationParams, StationState,
    Topology,
};
pub use scenario::{parse_scenario, preset_a13, Scenario, ScenarioDoc};
pub use sim::{compare, simulate, simulate_with, Trajectory};
pub use step::step;
pub use validate::{validate_topology, Violation};
