//! Deterministic simulator of deployable 5G networks (truck and UAV base
//! stations) coexisting with a macro mobile network.
//!
//! The pipeline is: load a [`Scenario`], build the [`RadioEnvironment`],
//! run the fixed-point [`allocate`] loop, cap traffic by backhaul, and emit
//! CSV files. [`beam`] holds the two-step UAV antenna alignment.

pub mod allocation;
pub mod backhaul;
pub mod beam;
pub mod geometry;
pub mod interference;
pub mod propagation;
pub mod runner;
pub mod scenario;

pub use allocation::{allocate, AllocationResult, UserOutcome, UserStatus};
pub use backhaul::{build_topology, BackhaulTree, Objective};
pub use beam::{align, AlignmentConfig, AlignmentState};
pub use interference::RadioEnvironment;
pub use runner::{compare, run_scenario, sweep, SweepSpec, Variant};
pub use scenario::{load_scenario, parse_scenario, Scenario, ScenarioError};

/// The documented baseline: two macros about 10 km from a 1 km emergency
/// area with 15 MC users, 30 normal users per macro, one UAV and one truck.
pub const BASELINE_SCENARIO_JSON: &str = include_str!("../scenarios/baseline.json");

pub fn baseline_scenario() -> Scenario {
    parse_scenario(BASELINE_SCENARIO_JSON).expect("bundled baseline is valid")
}
