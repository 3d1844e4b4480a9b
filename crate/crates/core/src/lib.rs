//! Estimate how the energy use of on-premise workloads changes when they
//! move to the cloud.
//!
//! Four migration scenarios are modelled on top of a per-machine CPU
//! utilization trace:
//!
//! - lift-and-shift onto more efficient cloud CPUs ([`catalog`]),
//! - static resizing to a target peak utilization ([`scenarios`]),
//! - both combined,
//! - auto-scaling, either continuously or once per hour.
//!
//! [`fleet`] aggregates per-machine results, [`synth`] generates synthetic
//! traces and fleets, and [`cli`] is the command-line front end.

pub mod catalog;
pub mod cli;
pub mod energy;
pub mod fleet;
pub mod report;
pub mod scenarios;
mod stats;
pub mod synth;
pub mod trace;

pub use catalog::{Catalog, CatalogError, CpuSpec};
pub use energy::{EnergyError, EnergyModel, PowerSample};
pub use fleet::{AnalysisSettings, FleetError, FleetReport, Manifest};
pub use scenarios::{
    analyze_machine, Baseline, MachineRecord, Scenario, ScenarioError, ScenarioReport, TargetUtilization,
};
pub use synth::{SynthError, SynthParams};
pub use trace::{PeakConfig, PeakUtilization, TraceError, UtilizationTrace};
