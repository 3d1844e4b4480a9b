//! Fleet-level aggregation of per-machine scenario reports.
//!
//! Means are reported at two levels: the machine mean (every machine weighs
//! the same) and the datacenter mean (the mean of per-datacenter means).
//! Machines that fail analysis are kept in an exclusion ledger.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::catalog::Catalog;
use crate::energy::EnergyModel;
use crate::scenarios::{
    self, Baseline, MachineRecord, Scenario, ScenarioError, ScenarioReport, TargetUtilization,
};
use crate::stats;
use crate::trace::{self, PeakConfig, TraceError};

pub const MANIFEST_COLUMNS: [&str; 4] = ["machine_id", "trace_path", "cpu_model", "datacenter_id"];
pub const DEFAULT_BIN_COUNT: usize = 7;
/// Percentiles reported per CPU release year.
pub const RELEASE_PERCENTILES: [f64; 4] = [10.0, 25.0, 75.0, 90.0];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FleetError {
    #[error("manifest line {line}: {message}")]
    Manifest { line: u64, message: String },
    #[error("manifest line {line}: duplicate machine_id {machine_id:?}")]
    DuplicateMachine { line: u64, machine_id: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("no machine could be analyzed ({excluded} excluded)")]
    NoSuccessfulMachines { excluded: usize },
    #[error("cannot summarize an empty set of values")]
    EmptyInput,
    #[error("bin count must be at least 1, got {0}")]
    InvalidBinCount(usize),
}

/// One manifest row. Relative trace paths resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    pub machine_id: String,
    pub trace_path: PathBuf,
    pub cpu_model: String,
    pub datacenter_id: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    /// Directory that relative trace paths are resolved against.
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.trace_path.is_absolute() {
            entry.trace_path.clone()
        } else {
            self.base_dir.join(&entry.trace_path)
        }
    }
}

pub fn parse_manifest<R: Read>(source: R) -> Result<Vec<ManifestEntry>, FleetError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers().map_err(|e| FleetError::Manifest {
        line: 1,
        message: e.to_string(),
    })?;
    if headers.iter().ne(MANIFEST_COLUMNS.iter().copied()) {
        return Err(FleetError::Manifest {
            line: 1,
            message: format!("expected header {:?}", MANIFEST_COLUMNS.join(",")),
        });
    }
    let mut seen = BTreeSet::new();
    let mut entries = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| FleetError::Manifest {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| -> Result<String, FleetError> {
            match record.get(i) {
                Some(v) if !v.is_empty() => Ok(v.to_string()),
                _ => Err(FleetError::Manifest {
                    line,
                    message: format!("{} is empty", MANIFEST_COLUMNS[i]),
                }),
            }
        };
        let entry = ManifestEntry {
            machine_id: field(0)?,
            trace_path: PathBuf::from(field(1)?),
            cpu_model: field(2)?,
            datacenter_id: field(3)?,
        };
        if !seen.insert(entry.machine_id.clone()) {
            return Err(FleetError::DuplicateMachine {
                line,
                machine_id: entry.machine_id,
            });
        }
        entries.push(entry);
    }
    Ok(entries)
}

pub fn load_manifest(path: &Path) -> Result<Manifest, FleetError> {
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    let entries = parse_manifest(BufReader::new(file))?;
    Ok(Manifest {
        entries,
        base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
    })
}

pub fn write_manifest<W: Write>(entries: &[ManifestEntry], sink: W) -> std::io::Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(MANIFEST_COLUMNS)?;
    for e in entries {
        writer.write_record([
            e.machine_id.as_str(),
            &e.trace_path.to_string_lossy(),
            e.cpu_model.as_str(),
            e.datacenter_id.as_str(),
        ])?;
    }
    writer.flush()
}

fn io_error(path: &Path, err: impl std::fmt::Display) -> FleetError {
    FleetError::Io {
        path: path.display().to_string(),
        message: err.to_string(),
    }
}

/// Settings shared by every machine in a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisSettings {
    pub targets: Vec<TargetUtilization>,
    pub model: EnergyModel,
    pub baseline: Baseline,
    pub peak: PeakConfig,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            targets: TargetUtilization::defaults(),
            model: EnergyModel::default(),
            baseline: Baseline::default(),
            peak: PeakConfig::default(),
        }
    }
}

/// Why a machine is missing from the aggregates.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Exclusion {
    pub machine_id: String,
    pub datacenter_id: String,
    pub reason: String,
    /// True when the failure was too little data rather than bad input.
    pub insufficient_data: bool,
}

impl Exclusion {
    fn new(machine_id: &str, datacenter_id: &str, err: &dyn std::fmt::Display, insufficient_data: bool) -> Self {
        Self {
            machine_id: machine_id.to_string(),
            datacenter_id: datacenter_id.to_string(),
            reason: err.to_string(),
            insufficient_data,
        }
    }
}

pub type MachineOutcome = Result<ScenarioReport, Exclusion>;

fn analyze_record(record: &MachineRecord, catalog: &Catalog, settings: &AnalysisSettings) -> MachineOutcome {
    scenarios::analyze_machine(
        record,
        &settings.targets,
        &settings.model,
        catalog,
        settings.baseline,
        &settings.peak,
    )
    .map_err(|e| {
        let insufficient = matches!(e, ScenarioError::Trace(TraceError::InsufficientDays { .. }));
        Exclusion::new(&record.machine_id, &record.datacenter_id, &e, insufficient)
    })
}

fn with_pool<T: Send>(jobs: Option<usize>, work: impl FnOnce() -> T + Send) -> T {
    match jobs {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(work),
            Err(_) => work(),
        },
        None => work(),
    }
}

/// Analyzes in-memory machines in parallel. Output order follows input order.
pub fn analyze_machines(
    machines: &[MachineRecord],
    catalog: &Catalog,
    settings: &AnalysisSettings,
    jobs: Option<usize>,
) -> Vec<MachineOutcome> {
    with_pool(jobs, || {
        machines
            .par_iter()
            .map(|m| analyze_record(m, catalog, settings))
            .collect()
    })
}

/// Loads each manifest trace and analyzes it. Unreadable traces become exclusions.
pub fn analyze_manifest(
    manifest: &Manifest,
    catalog: &Catalog,
    settings: &AnalysisSettings,
    jobs: Option<usize>,
) -> Vec<MachineOutcome> {
    with_pool(jobs, || {
        manifest
            .entries
            .par_iter()
            .map(|entry| {
                let path = manifest.resolve(entry);
                let record = load_record(entry, &path).map_err(|(reason, insufficient)| Exclusion {
                    machine_id: entry.machine_id.clone(),
                    datacenter_id: entry.datacenter_id.clone(),
                    reason,
                    insufficient_data: insufficient,
                })?;
                analyze_record(&record, catalog, settings)
            })
            .collect()
    })
}

fn load_record(entry: &ManifestEntry, path: &Path) -> Result<MachineRecord, (String, bool)> {
    let file = File::open(path).map_err(|e| (format!("{}: {e}", path.display()), false))?;
    let trace = trace::parse_trace(BufReader::new(file), &entry.machine_id).map_err(|e| {
        let insufficient = matches!(e, TraceError::TooFewSamples { .. });
        (format!("{}: {e}", path.display()), insufficient)
    })?;
    Ok(MachineRecord::new(trace, entry.cpu_model.clone(), entry.datacenter_id.clone()))
}

/// A step-CDF point: fraction of values at or below `value`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CdfPoint {
    pub value: f64,
    pub probability: f64,
}

/// Right-continuous empirical CDF with duplicate values merged.
pub fn cdf(values: &[f64]) -> Result<Vec<CdfPoint>, FleetError> {
    if values.is_empty() {
        return Err(FleetError::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut points: Vec<CdfPoint> = Vec::new();
    for (i, value) in sorted.into_iter().enumerate() {
        let probability = (i + 1) as f64 / n as f64;
        match points.last_mut() {
            Some(last) if last.value == value => last.probability = probability,
            _ => points.push(CdfPoint { value, probability }),
        }
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeBin {
    pub bin: usize,
    pub datacenters: Vec<String>,
    pub machine_count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Per-datacenter machine count and mean lift-and-shift fraction, by id.
fn datacenter_lift_means(reports: &[ScenarioReport]) -> Vec<(String, usize, f64)> {
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in reports {
        groups.entry(&r.datacenter_id).or_default().push(r.lift_and_shift);
    }
    groups
        .into_iter()
        .map(|(dc, values)| (dc.to_string(), values.len(), stats::mean(&values).unwrap_or(0.0)))
        .collect()
}

/// Groups datacenters into `bin_count` contiguous bins by machine count.
///
/// Datacenters are sorted by machine count (then id) and split as evenly as
/// possible, earlier bins taking the remainder. Empty bins are omitted.
/// Statistics are over datacenter-mean lift-and-shift fractions.
pub fn group_by_size(reports: &[ScenarioReport], bin_count: usize) -> Result<Vec<SizeBin>, FleetError> {
    if bin_count < 1 {
        return Err(FleetError::InvalidBinCount(bin_count));
    }
    let mut dcs = datacenter_lift_means(reports);
    dcs.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));

    let base = dcs.len() / bin_count;
    let remainder = dcs.len() % bin_count;
    let mut bins = Vec::new();
    let mut rest = dcs.as_slice();
    for bin in 0..bin_count {
        let size = base + usize::from(bin < remainder);
        let (members, tail) = rest.split_at(size);
        rest = tail;
        if members.is_empty() {
            continue;
        }
        let means: Vec<f64> = members.iter().map(|m| m.2).collect();
        bins.push(SizeBin {
            bin,
            datacenters: members.iter().map(|m| m.0.clone()).collect(),
            machine_count: members.iter().map(|m| m.1).sum(),
            mean: stats::mean(&means).unwrap_or(0.0),
            min: means.iter().copied().fold(f64::INFINITY, f64::min),
            max: means.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        });
    }
    Ok(bins)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReleaseYearSummary {
    pub year: i32,
    pub machines: usize,
    pub mean: f64,
    pub p10: f64,
    pub p25: f64,
    pub p75: f64,
    pub p90: f64,
}

/// Peak utilization grouped by release year of each machine's on-premise CPU.
/// Machines whose CPU is not in `catalog` are skipped and returned as warnings.
pub fn utilization_by_release(
    reports: &[ScenarioReport],
    catalog: &Catalog,
) -> (Vec<ReleaseYearSummary>, Vec<String>) {
    use chrono::Datelike;
    let mut years: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
    let mut warnings = Vec::new();
    for r in reports {
        match catalog.lookup(&r.cpu_model) {
            Ok(cpu) => years
                .entry(cpu.release_date.year())
                .or_default()
                .push(r.peak_utilization.value()),
            Err(e) => warnings.push(format!("{}: {e}", r.machine_id)),
        }
    }
    let rows = years
        .into_iter()
        .map(|(year, peaks)| {
            let pct = |p: f64| stats::nearest_rank(&peaks, p).unwrap_or(0.0);
            ReleaseYearSummary {
                year,
                machines: peaks.len(),
                mean: stats::mean(&peaks).unwrap_or(0.0),
                p10: pct(RELEASE_PERCENTILES[0]),
                p25: pct(RELEASE_PERCENTILES[1]),
                p75: pct(RELEASE_PERCENTILES[2]),
                p90: pct(RELEASE_PERCENTILES[3]),
            }
        })
        .collect();
    (rows, warnings)
}

/// Mean of each scenario at one target; `None` when no machine has a value.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ScenarioMeans {
    pub lift_and_shift: Option<f64>,
    pub static_resize: Option<f64>,
    pub combined: Option<f64>,
    pub autoscale_ideal: Option<f64>,
    pub autoscale_hourly: Option<f64>,
}

impl ScenarioMeans {
    pub fn get(&self, scenario: Scenario) -> Option<f64> {
        match scenario {
            Scenario::LiftAndShift => self.lift_and_shift,
            Scenario::StaticResize => self.static_resize,
            Scenario::Combined => self.combined,
            Scenario::AutoscaleIdeal => self.autoscale_ideal,
            Scenario::AutoscaleHourly => self.autoscale_hourly,
        }
    }

    fn set(&mut self, scenario: Scenario, value: Option<f64>) {
        let slot = match scenario {
            Scenario::LiftAndShift => &mut self.lift_and_shift,
            Scenario::StaticResize => &mut self.static_resize,
            Scenario::Combined => &mut self.combined,
            Scenario::AutoscaleIdeal => &mut self.autoscale_ideal,
            Scenario::AutoscaleHourly => &mut self.autoscale_hourly,
        };
        *slot = value;
    }
}

/// The fleet-wide table of mean fractions at one target.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanRow {
    pub target: f64,
    pub machine_mean: ScenarioMeans,
    pub datacenter_mean: ScenarioMeans,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatacenterTargetMeans {
    pub target: f64,
    pub means: ScenarioMeans,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatacenterSummary {
    pub datacenter_id: String,
    pub machines: usize,
    pub targets: Vec<DatacenterTargetMeans>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdfSeries {
    pub scenario: Scenario,
    pub target: f64,
    pub points: Vec<CdfPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FleetReport {
    pub machine_count: usize,
    pub excluded_count: usize,
    pub targets: Vec<f64>,
    pub mean_table: Vec<MeanRow>,
    pub datacenters: Vec<DatacenterSummary>,
    pub size_bins: Vec<SizeBin>,
    pub utilization_by_release: Vec<ReleaseYearSummary>,
    pub cdfs: Vec<CdfSeries>,
    pub warnings: Vec<String>,
    pub excluded: Vec<Exclusion>,
    pub machines: Vec<ScenarioReport>,
}

impl FleetReport {
    pub fn mean_row(&self, target: f64) -> Option<&MeanRow> {
        self.mean_table.iter().find(|r| r.target == target)
    }
}

fn scenario_values(reports: &[&ScenarioReport], target_index: usize, scenario: Scenario) -> Vec<f64> {
    reports
        .iter()
        .filter_map(|r| r.targets.get(target_index).and_then(|t| scenario.value(t)))
        .collect()
}

/// Aggregates machine outcomes. Needs at least one successful machine.
pub fn aggregate(
    outcomes: Vec<MachineOutcome>,
    catalog: &Catalog,
    bin_count: usize,
) -> Result<FleetReport, FleetError> {
    let mut machines = Vec::new();
    let mut excluded = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(report) => machines.push(report),
            Err(exclusion) => excluded.push(exclusion),
        }
    }
    machines.sort_by(|a, b| a.machine_id.cmp(&b.machine_id));
    excluded.sort();
    if machines.is_empty() {
        return Err(FleetError::NoSuccessfulMachines {
            excluded: excluded.len(),
        });
    }

    let targets: Vec<f64> = machines[0].targets.iter().map(|t| t.target).collect();
    let all: Vec<&ScenarioReport> = machines.iter().collect();
    let mut by_dc: BTreeMap<&str, Vec<&ScenarioReport>> = BTreeMap::new();
    for r in &machines {
        by_dc.entry(r.datacenter_id.as_str()).or_default().push(r);
    }

    let mut datacenters: Vec<DatacenterSummary> = by_dc
        .iter()
        .map(|(dc, members)| DatacenterSummary {
            datacenter_id: dc.to_string(),
            machines: members.len(),
            targets: targets
                .iter()
                .map(|&target| DatacenterTargetMeans {
                    target,
                    means: ScenarioMeans::default(),
                })
                .collect(),
        })
        .collect();

    let mut mean_table = Vec::with_capacity(targets.len());
    let mut cdfs = Vec::new();
    for (ti, &target) in targets.iter().enumerate() {
        let mut machine_mean = ScenarioMeans::default();
        let mut datacenter_mean = ScenarioMeans::default();
        for scenario in Scenario::ALL {
            let values = scenario_values(&all, ti, scenario);
            machine_mean.set(scenario, stats::mean(&values));
            if let Ok(points) = cdf(&values) {
                cdfs.push(CdfSeries {
                    scenario,
                    target,
                    points,
                });
            }
            let mut dc_means = Vec::new();
            for (summary, members) in datacenters.iter_mut().zip(by_dc.values()) {
                let mean = stats::mean(&scenario_values(members, ti, scenario));
                summary.targets[ti].means.set(scenario, mean);
                dc_means.extend(mean);
            }
            datacenter_mean.set(scenario, stats::mean(&dc_means));
        }
        mean_table.push(MeanRow {
            target,
            machine_mean,
            datacenter_mean,
        });
    }

    let size_bins = group_by_size(&machines, bin_count)?;
    let (utilization_by_release, warnings) = utilization_by_release(&machines, catalog);
    Ok(FleetReport {
        machine_count: machines.len(),
        excluded_count: excluded.len(),
        targets,
        mean_table,
        datacenters,
        size_bins,
        utilization_by_release,
        cdfs,
        warnings,
        excluded,
        machines,
    })
}
