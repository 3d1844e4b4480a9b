//! Per-machine energy fractions for each migration scenario.
//!
//! With utilization trace `u(t)`, relative power curve `E` and capacity factor
//! `c`, a workload given `c` times its original resources uses `E(u/c) * c`.
//! The scenarios compare the energy of:
//!
//! * **lift-and-shift**: same capacity on cloud hardware, the CE ratio;
//! * **static resize**: one fixed `c = u_p / u_T` for the whole trace,
//!   relative to `∫E(u) dt`;
//! * **combined**: lift-and-shift followed by the static resize;
//! * **ideal auto-scaling**: `c(t) = u(t) / u_T`, energy `E(u_T) u(t) / u_T`;
//! * **hourly auto-scaling**: `c` fixed within each UTC hour at the hour's
//!   maximum utilization over `u_T`.
//!
//! Auto-scaling fractions are reported against a selectable [`Baseline`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{self, Catalog, CatalogError};
use crate::energy::EnergyModel;
use crate::trace::{
    self, CoverageGap, HourSlice, PeakConfig, PeakUtilization, TraceError, UtilizationTrace,
    GAP_WARNING_SECONDS,
};

/// Targets swept by default: 50% to 90% peak utilization.
pub const DEFAULT_TARGETS: [f64; 5] = [0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("idle machine: peak utilization is 0, so no resize factor exists")]
    IdleMachine,
    #[error("baseline energy is zero")]
    ZeroBaselineEnergy,
    #[error("target utilization must lie in (0, 1], got {0}")]
    InvalidTarget(f64),
    #[error("trace belongs to machine {trace:?}, record is {record:?}")]
    MachineMismatch { record: String, trace: String },
}

/// Target peak utilization `u_T` in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct TargetUtilization(f64);

impl TargetUtilization {
    pub fn new(value: f64) -> Result<Self, ScenarioError> {
        if value > 0.0 && value <= 1.0 {
            Ok(Self(value))
        } else {
            Err(ScenarioError::InvalidTarget(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn defaults() -> Vec<Self> {
        DEFAULT_TARGETS.iter().map(|&t| Self(t)).collect()
    }
}

impl TryFrom<f64> for TargetUtilization {
    type Error = ScenarioError;
    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<TargetUtilization> for f64 {
    fn from(t: TargetUtilization) -> f64 {
        t.0
    }
}

/// Energy that auto-scaling fractions are measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    /// `∫E(u) dt`: same capacity as on premise.
    #[default]
    LiftAndShift,
    /// `∫E(u/c) c dt` with `c = u_p / u_T`.
    StaticResized,
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Baseline::LiftAndShift => "lift-and-shift",
            Baseline::StaticResized => "static-resized",
        })
    }
}

impl FromStr for Baseline {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lift-and-shift" => Ok(Baseline::LiftAndShift),
            "static-resized" => Ok(Baseline::StaticResized),
            other => Err(format!(
                "unknown baseline {other:?} (expected lift-and-shift or static-resized)"
            )),
        }
    }
}

/// The scenarios reported per target, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    LiftAndShift,
    StaticResize,
    Combined,
    AutoscaleIdeal,
    AutoscaleHourly,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::LiftAndShift,
        Scenario::StaticResize,
        Scenario::Combined,
        Scenario::AutoscaleIdeal,
        Scenario::AutoscaleHourly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::LiftAndShift => "lift_and_shift",
            Scenario::StaticResize => "static_resize",
            Scenario::Combined => "combined",
            Scenario::AutoscaleIdeal => "autoscale_ideal",
            Scenario::AutoscaleHourly => "autoscale_hourly",
        }
    }

    pub fn value(self, fractions: &TargetFractions) -> Option<f64> {
        match self {
            Scenario::LiftAndShift => Some(fractions.lift_and_shift),
            Scenario::StaticResize => fractions.static_resize,
            Scenario::Combined => fractions.combined,
            Scenario::AutoscaleIdeal => fractions.autoscale_ideal,
            Scenario::AutoscaleHourly => fractions.autoscale_hourly,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A machine's trace bound to its on-premise CPU and datacenter.
#[derive(Debug, Clone)]
pub struct MachineRecord {
    pub machine_id: String,
    pub trace: UtilizationTrace,
    pub on_prem_cpu: String,
    pub datacenter_id: String,
}

impl MachineRecord {
    pub fn new(
        trace: UtilizationTrace,
        on_prem_cpu: impl Into<String>,
        datacenter_id: impl Into<String>,
    ) -> Self {
        Self {
            machine_id: trace.machine_id().to_string(),
            trace,
            on_prem_cpu: on_prem_cpu.into(),
            datacenter_id: datacenter_id.into(),
        }
    }
}

/// Integrals of one trace that are shared across targets.
struct TraceEnergy<'a> {
    trace: &'a UtilizationTrace,
    model: &'a EnergyModel,
    lift_and_shift: f64,
    utilization: f64,
    hours: Vec<HourSlice>,
}

impl<'a> TraceEnergy<'a> {
    fn new(trace: &'a UtilizationTrace, model: &'a EnergyModel) -> Self {
        Self {
            trace,
            model,
            lift_and_shift: trace::integrate(trace, |u| model.relative_power(u)),
            utilization: trace::integrate(trace, |u| u),
            hours: trace.hour_slices(),
        }
    }

    fn static_resized(&self, target: TargetUtilization, peak: PeakUtilization) -> Result<f64, ScenarioError> {
        if peak.value() == 0.0 {
            return Err(ScenarioError::IdleMachine);
        }
        let capacity = peak.value() / target.value();
        Ok(trace::integrate(self.trace, |u| self.model.scaled_power(u, capacity)))
    }

    fn ideal(&self, target: TargetUtilization) -> f64 {
        let t = target.value();
        self.model.relative_power(t) / t * self.utilization
    }

    fn hourly(&self, target: TargetUtilization) -> f64 {
        self.hours
            .iter()
            .map(|hour| {
                let capacity = hour.max_utilization() / target.value();
                if capacity == 0.0 {
                    0.0
                } else {
                    hour.integrate(|u| self.model.scaled_power(u, capacity))
                }
            })
            .sum()
    }

    fn baseline(
        &self,
        baseline: Baseline,
        target: TargetUtilization,
        peak: PeakUtilization,
    ) -> Result<f64, ScenarioError> {
        match baseline {
            Baseline::LiftAndShift => Ok(self.lift_and_shift),
            Baseline::StaticResized => self.static_resized(target, peak),
        }
    }
}

fn ratio(numerator: f64, denominator: f64) -> Result<f64, ScenarioError> {
    if denominator > 0.0 {
        Ok(numerator / denominator)
    } else {
        Err(ScenarioError::ZeroBaselineEnergy)
    }
}

/// `∫E(u/c) c dt / ∫E(u) dt` with `c = u_p / u_T`.
pub fn static_resize_fraction(
    trace: &UtilizationTrace,
    target: TargetUtilization,
    model: &EnergyModel,
    peak: PeakUtilization,
) -> Result<f64, ScenarioError> {
    let energy = TraceEnergy::new(trace, model);
    ratio(energy.static_resized(target, peak)?, energy.lift_and_shift)
}

/// Lift-and-shift fraction times the static resize fraction, with the peak
/// estimated from the machine's own trace.
pub fn combined_fraction(
    machine: &MachineRecord,
    target: TargetUtilization,
    model: &EnergyModel,
    catalog: &Catalog,
    peak_config: &PeakConfig,
) -> Result<f64, ScenarioError> {
    let on_prem = catalog.lookup(&machine.on_prem_cpu)?;
    let lift = catalog::lift_and_shift_fraction(on_prem, catalog.cloud_reference());
    let peak = trace::estimate_peak(&machine.trace, peak_config)?;
    Ok(lift * static_resize_fraction(&machine.trace, target, model, peak)?)
}

/// `∫E(u_T) u / u_T dt` over the chosen baseline energy. `peak` is only
/// used by the static-resized baseline.
pub fn autoscale_ideal_fraction(
    trace: &UtilizationTrace,
    target: TargetUtilization,
    model: &EnergyModel,
    baseline: Baseline,
    peak: PeakUtilization,
) -> Result<f64, ScenarioError> {
    let energy = TraceEnergy::new(trace, model);
    ratio(energy.ideal(target), energy.baseline(baseline, target, peak)?)
}

/// Hourly auto-scaling: within each clock-aligned UTC hour the capacity is the
/// hour's maximum utilization divided by `u_T` (hours that never leave zero
/// are allocated nothing).
///
/// Utilization is piecewise linear between samples, so an hour's maximum also
/// covers the interpolated values where the trace crosses the hour's edges.
pub fn autoscale_hourly_fraction(
    trace: &UtilizationTrace,
    target: TargetUtilization,
    model: &EnergyModel,
    baseline: Baseline,
    peak: PeakUtilization,
) -> Result<f64, ScenarioError> {
    let energy = TraceEnergy::new(trace, model);
    ratio(energy.hourly(target), energy.baseline(baseline, target, peak)?)
}

/// Ideal and hourly auto-scaling fractions against one baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AutoscalePair {
    pub ideal: f64,
    pub hourly: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AutoscaleByBaseline {
    pub lift_and_shift: AutoscalePair,
    /// Absent for idle machines.
    pub static_resized: Option<AutoscalePair>,
}

/// All scenario fractions at one target. Fractions depending on the static
/// resize are `None` for idle machines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TargetFractions {
    pub target: f64,
    pub lift_and_shift: f64,
    pub static_resize: Option<f64>,
    pub combined: Option<f64>,
    /// Against the report's selected baseline.
    pub autoscale_ideal: Option<f64>,
    /// Against the report's selected baseline.
    pub autoscale_hourly: Option<f64>,
    pub autoscale_by_baseline: AutoscaleByBaseline,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub machine_id: String,
    pub datacenter_id: String,
    pub cpu_model: String,
    pub cloud_reference: String,
    pub peak_utilization: PeakUtilization,
    pub idle_machine: bool,
    pub lift_and_shift: f64,
    pub baseline: Baseline,
    pub targets: Vec<TargetFractions>,
    pub coverage_warnings: Vec<CoverageGap>,
}

impl ScenarioReport {
    pub fn target(&self, target: f64) -> Option<&TargetFractions> {
        self.targets.iter().find(|t| t.target == target)
    }
}

/// Runs every scenario for one machine at each target.
pub fn analyze_machine(
    machine: &MachineRecord,
    targets: &[TargetUtilization],
    model: &EnergyModel,
    catalog: &Catalog,
    baseline: Baseline,
    peak_config: &PeakConfig,
) -> Result<ScenarioReport, ScenarioError> {
    if machine.trace.machine_id() != machine.machine_id {
        return Err(ScenarioError::MachineMismatch {
            record: machine.machine_id.clone(),
            trace: machine.trace.machine_id().to_string(),
        });
    }
    let on_prem = catalog.lookup(&machine.on_prem_cpu)?;
    let cloud = catalog.cloud_reference();
    let lift = catalog::lift_and_shift_fraction(on_prem, cloud);
    let peak = trace::estimate_peak(&machine.trace, peak_config)?;
    let energy = TraceEnergy::new(&machine.trace, model);
    let idle = peak.value() == 0.0;

    let mut rows = Vec::with_capacity(targets.len());
    for &target in targets {
        let ideal = energy.ideal(target);
        let hourly = energy.hourly(target);
        let vs_lift = AutoscalePair {
            ideal: ratio(ideal, energy.lift_and_shift)?,
            hourly: ratio(hourly, energy.lift_and_shift)?,
        };
        let resized = if idle {
            None
        } else {
            Some(energy.static_resized(target, peak)?)
        };
        let static_resize = resized
            .map(|r| ratio(r, energy.lift_and_shift))
            .transpose()?;
        let vs_resized = resized
            .map(|r| -> Result<_, ScenarioError> {
                Ok(AutoscalePair {
                    ideal: ratio(ideal, r)?,
                    hourly: ratio(hourly, r)?,
                })
            })
            .transpose()?;
        let selected = match baseline {
            Baseline::LiftAndShift => Some(vs_lift),
            Baseline::StaticResized => vs_resized,
        };
        rows.push(TargetFractions {
            target: target.value(),
            lift_and_shift: lift,
            static_resize,
            combined: static_resize.map(|s| lift * s),
            autoscale_ideal: selected.map(|p| p.ideal),
            autoscale_hourly: selected.map(|p| p.hourly),
            autoscale_by_baseline: AutoscaleByBaseline {
                lift_and_shift: vs_lift,
                static_resized: vs_resized,
            },
        });
    }

    Ok(ScenarioReport {
        machine_id: machine.machine_id.clone(),
        datacenter_id: machine.datacenter_id.clone(),
        cpu_model: on_prem.model_name.clone(),
        cloud_reference: cloud.model_name.clone(),
        peak_utilization: peak,
        idle_machine: idle,
        lift_and_shift: lift,
        baseline,
        targets: rows,
        coverage_warnings: machine.trace.coverage_gaps(GAP_WARNING_SECONDS),
    })
}
