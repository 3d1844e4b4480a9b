//! Synthetic utilization traces following a periodic datacenter-refresh cycle.
//!
//! Utilization starts low after each hardware refresh and ramps up linearly
//! until the next one, with a sinusoidal daily cycle and Gaussian noise on
//! top:
//!
//! ```text
//! u(t) = clamp(base + growth * days_since_refresh + amplitude * sin(2π hour / 24) + N(0, σ), 0, 1)
//! ```
//!
//! `days_since_refresh` counts whole days, so the ramp steps once per day.
//! Randomness comes from ChaCha8 (`rand_chacha`) seeded with `seed_from_u64`.
//! Fleet generation derives each machine's generator from the fleet seed by
//! selecting ChaCha stream `machine index`, so output is reproducible across
//! platforms and independent of generation order.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, CpuSpec};
use crate::fleet::{self, ManifestEntry};
use crate::scenarios::MachineRecord;
use crate::trace::{self, Sample, UtilizationTrace};

/// 2016-06-01T00:00:00Z.
pub const DEFAULT_START: i64 = 1_464_739_200;
pub const ALLOWED_PERIODS: [u32; 2] = [20, 30];
pub const MANIFEST_FILE: &str = "manifest.csv";
pub const TRACE_DIR: &str = "traces";

const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synthesis parameters: {0}")]
    InvalidParams(String),
    #[error("need n_machines >= n_datacenters >= 1, got {machines} machines and {datacenters} datacenters")]
    InvalidCounts { machines: usize, datacenters: usize },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// Parameters of one synthetic trace. All values are synthetic defaults, not
/// measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub seed: u64,
    pub duration_days: u32,
    pub sample_period_seconds: u32,
    pub base_utilization: f64,
    pub growth_per_day: f64,
    pub refresh_period_days: u32,
    /// Days already elapsed in the refresh cycle when the trace starts.
    pub refresh_phase_days: u32,
    pub diurnal_amplitude: f64,
    pub noise_stddev: f64,
    /// Unix seconds of the first sample.
    pub start: i64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            seed: 0,
            duration_days: 14,
            sample_period_seconds: 30,
            base_utilization: 0.2,
            growth_per_day: 0.005,
            refresh_period_days: 90,
            refresh_phase_days: 0,
            diurnal_amplitude: 0.1,
            noise_stddev: 0.02,
            start: DEFAULT_START,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |m: String| Err(SynthError::InvalidParams(m));
        if self.duration_days == 0 {
            return fail("duration_days must be positive".into());
        }
        if !ALLOWED_PERIODS.contains(&self.sample_period_seconds) {
            return fail(format!(
                "sample_period_seconds must be 20 or 30, got {}",
                self.sample_period_seconds
            ));
        }
        if !(0.0..=1.0).contains(&self.base_utilization) {
            return fail(format!("base_utilization {} outside [0, 1]", self.base_utilization));
        }
        if !(self.growth_per_day.is_finite() && self.growth_per_day >= 0.0) {
            return fail(format!("growth_per_day {} must be >= 0", self.growth_per_day));
        }
        if self.refresh_period_days == 0 {
            return fail("refresh_period_days must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.diurnal_amplitude) {
            return fail(format!("diurnal_amplitude {} outside [0, 1]", self.diurnal_amplitude));
        }
        if !(self.noise_stddev.is_finite() && self.noise_stddev >= 0.0) {
            return fail(format!("noise_stddev {} must be >= 0", self.noise_stddev));
        }
        Ok(())
    }

    /// Noise-free utilization at `t`, before clamping.
    pub fn envelope(&self, t: i64) -> f64 {
        let elapsed_days = (t - self.start).div_euclid(SECONDS_PER_DAY);
        let since_refresh =
            (elapsed_days + i64::from(self.refresh_phase_days)).rem_euclid(i64::from(self.refresh_period_days));
        let hour = t.rem_euclid(SECONDS_PER_DAY) as f64 / 3600.0;
        self.base_utilization
            + self.growth_per_day * since_refresh as f64
            + self.diurnal_amplitude * (2.0 * std::f64::consts::PI * hour / 24.0).sin()
    }

    fn sample_count(&self) -> i64 {
        i64::from(self.duration_days) * SECONDS_PER_DAY / i64::from(self.sample_period_seconds)
    }
}

pub fn generate_trace(params: &SynthParams, machine_id: &str) -> Result<UtilizationTrace, SynthError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let period = i64::from(params.sample_period_seconds);
    let samples = (0..params.sample_count())
        .map(|k| {
            let t = params.start + k * period;
            let noise: f64 = rng.sample(StandardNormal);
            let u = params.envelope(t) + params.noise_stddev * noise;
            Sample::new(t, u.clamp(0.0, 1.0))
        })
        .collect();
    UtilizationTrace::new(machine_id, samples).map_err(|e| SynthError::InvalidParams(e.to_string()))
}

/// Inclusive `[low, high]` range for a fleet parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range<T> {
    pub low: T,
    pub high: T,
}

impl<T> Range<T> {
    pub const fn new(low: T, high: T) -> Self {
        Self { low, high }
    }
}

/// Ranges per-machine parameters are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParamRanges {
    pub duration_days: u32,
    pub sample_periods: Vec<u32>,
    pub base_utilization: Range<f64>,
    pub growth_per_day: Range<f64>,
    pub refresh_period_days: Range<u32>,
    pub diurnal_amplitude: Range<f64>,
    pub noise_stddev: Range<f64>,
    pub start: i64,
}

impl Default for ParamRanges {
    fn default() -> Self {
        Self {
            duration_days: 14,
            sample_periods: ALLOWED_PERIODS.to_vec(),
            base_utilization: Range::new(0.02, 0.45),
            growth_per_day: Range::new(0.0, 0.006),
            refresh_period_days: Range::new(60, 120),
            diurnal_amplitude: Range::new(0.0, 0.25),
            noise_stddev: Range::new(0.0, 0.05),
            start: DEFAULT_START,
        }
    }
}

impl ParamRanges {
    fn validate(&self) -> Result<(), SynthError> {
        if self.sample_periods.is_empty() {
            return Err(SynthError::InvalidParams("sample_periods is empty".into()));
        }
        let ordered = self.base_utilization.low <= self.base_utilization.high
            && self.growth_per_day.low <= self.growth_per_day.high
            && self.refresh_period_days.low <= self.refresh_period_days.high
            && self.diurnal_amplitude.low <= self.diurnal_amplitude.high
            && self.noise_stddev.low <= self.noise_stddev.high;
        if !ordered {
            return Err(SynthError::InvalidParams("a range has low > high".into()));
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, range: Range<f64>) -> f64 {
    range.low + (range.high - range.low) * rng.random::<f64>()
}

#[derive(Debug, Clone)]
pub struct SynthMachine {
    pub machine_id: String,
    pub datacenter_id: String,
    pub cpu_model: String,
    pub params: SynthParams,
    pub trace: UtilizationTrace,
}

#[derive(Debug, Clone)]
pub struct SynthFleet {
    pub machines: Vec<SynthMachine>,
}

impl SynthFleet {
    pub fn records(&self) -> Vec<MachineRecord> {
        self.machines
            .iter()
            .map(|m| MachineRecord::new(m.trace.clone(), m.cpu_model.clone(), m.datacenter_id.clone()))
            .collect()
    }

    pub fn manifest(&self) -> Vec<ManifestEntry> {
        self.machines
            .iter()
            .map(|m| ManifestEntry {
                machine_id: m.machine_id.clone(),
                trace_path: trace_file(&m.machine_id),
                cpu_model: m.cpu_model.clone(),
                datacenter_id: m.datacenter_id.clone(),
            })
            .collect()
    }

    /// Writes `manifest.csv` and `traces/<machine_id>.csv` under `dir`.
    /// Returns the manifest path.
    pub fn write_to(&self, dir: &Path) -> Result<PathBuf, SynthError> {
        let io = |path: &Path, e: std::io::Error| SynthError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        let trace_dir = dir.join(TRACE_DIR);
        fs::create_dir_all(&trace_dir).map_err(|e| io(&trace_dir, e))?;
        for m in &self.machines {
            let path = dir.join(trace_file(&m.machine_id));
            let file = fs::File::create(&path).map_err(|e| io(&path, e))?;
            trace::write_trace(&m.trace, BufWriter::new(file)).map_err(|e| io(&path, e))?;
        }
        let manifest_path = dir.join(MANIFEST_FILE);
        let file = fs::File::create(&manifest_path).map_err(|e| io(&manifest_path, e))?;
        fleet::write_manifest(&self.manifest(), BufWriter::new(file)).map_err(|e| io(&manifest_path, e))?;
        Ok(manifest_path)
    }
}

fn trace_file(machine_id: &str) -> PathBuf {
    Path::new(TRACE_DIR).join(format!("{machine_id}.csv"))
}

/// Builds a fleet of `n_machines` spread round-robin over `n_datacenters`.
///
/// On-premise CPUs are drawn from the catalog's non-cloud entries (all
/// entries if none); older CPUs get a higher base utilization.
pub fn generate_fleet(
    fleet_seed: u64,
    n_machines: usize,
    n_datacenters: usize,
    ranges: &ParamRanges,
    catalog: &Catalog,
) -> Result<SynthFleet, SynthError> {
    if n_datacenters < 1 || n_machines < n_datacenters {
        return Err(SynthError::InvalidCounts {
            machines: n_machines,
            datacenters: n_datacenters,
        });
    }
    ranges.validate()?;

    let mut cpus: Vec<&CpuSpec> = catalog.iter().filter(|c| !c.cloud).collect();
    if cpus.is_empty() {
        cpus = catalog.iter().collect();
    }
    cpus.sort_by(|a, b| a.release_date.cmp(&b.release_date).then_with(|| a.model_name.cmp(&b.model_name)));

    let id_width = (n_machines.max(2) - 1).to_string().len().max(4);
    let dc_width = (n_datacenters.max(2) - 1).to_string().len().max(2);

    let mut machines = Vec::with_capacity(n_machines);
    for index in 0..n_machines {
        let mut rng = ChaCha8Rng::seed_from_u64(fleet_seed);
        rng.set_stream(index as u64);

        let cpu_index = rng.random_range(0..cpus.len());
        // 1 for the oldest CPU, 0 for the newest.
        let age = if cpus.len() > 1 {
            1.0 - cpu_index as f64 / (cpus.len() - 1) as f64
        } else {
            0.5
        };
        let base = &ranges.base_utilization;
        let base_utilization = base.low + (base.high - base.low) * (0.6 * age + 0.4 * rng.random::<f64>());
        let refresh_period_days = rng.random_range(ranges.refresh_period_days.low..=ranges.refresh_period_days.high);
        let params = SynthParams {
            seed: rng.random(),
            duration_days: ranges.duration_days,
            sample_period_seconds: ranges.sample_periods[rng.random_range(0..ranges.sample_periods.len())],
            base_utilization,
            growth_per_day: uniform(&mut rng, ranges.growth_per_day),
            refresh_period_days,
            refresh_phase_days: rng.random_range(0..refresh_period_days.max(1)),
            diurnal_amplitude: uniform(&mut rng, ranges.diurnal_amplitude),
            noise_stddev: uniform(&mut rng, ranges.noise_stddev),
            start: ranges.start,
        };
        let machine_id = format!("m{index:0id_width$}");
        let trace = generate_trace(&params, &machine_id)?;
        machines.push(SynthMachine {
            machine_id,
            datacenter_id: format!("dc{:0dc_width$}", index % n_datacenters),
            cpu_model: cpus[cpu_index].model_name.clone(),
            params,
            trace,
        });
    }
    Ok(SynthFleet { machines })
}
