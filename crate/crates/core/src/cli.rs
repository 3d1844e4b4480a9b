//! Command-line front end.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success (fleet: at least one machine analyzed) |
//! | 1 | failure writing output |
//! | 2 | invalid arguments, unreadable or malformed input, unknown CPU model |
//! | 3 | insufficient data (too few days for a peak estimate) |
//! | 4 | fleet run in which no machine could be analyzed |
//!
//! Settings resolve as flags, then the `--config` TOML file, then defaults.
//! The catalog path falls back to `MIGRENT_CATALOG` and finally to the
//! bundled fixture catalog.

use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::catalog::{self, Catalog, CatalogError};
use crate::energy::EnergyModel;
use crate::fleet::{self, AnalysisSettings, FleetError, DEFAULT_BIN_COUNT};
use crate::report;
use crate::scenarios::{self, Baseline, MachineRecord, ScenarioError, TargetUtilization};
use crate::synth::{self, ParamRanges, SynthError};
use crate::trace::{self, PeakConfig, TraceError};

pub const CATALOG_ENV: &str = "MIGRENT_CATALOG";

pub const EXIT_OK: i32 = 0;
pub const EXIT_OUTPUT: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_INSUFFICIENT: i32 = 3;
pub const EXIT_NO_MACHINES: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "migrent", version, about = "Estimate the energy impact of migrating workloads to the cloud")]
struct Cli {
    #[command(flatten)]
    shared: SharedArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Default)]
struct SharedArgs {
    /// TOML file with default settings (flags take precedence).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// CPU catalog CSV [fallback: $MIGRENT_CATALOG, then the bundled fixture].
    #[arg(long, global = true, value_name = "PATH")]
    catalog: Option<PathBuf>,
    /// Cloud reference CPU model.
    #[arg(long = "cloud-ref", global = true, value_name = "MODEL")]
    cloud_ref: Option<String>,
    /// Target peak utilizations, comma-separated fractions.
    #[arg(long, global = true, value_delimiter = ',', value_name = "LIST")]
    targets: Option<Vec<f64>>,
    /// Baseline for auto-scaling fractions.
    #[arg(long, global = true, value_name = "lift-and-shift|static-resized")]
    baseline: Option<Baseline>,
    #[arg(long = "idle-fraction", global = true, value_name = "A")]
    idle_fraction: Option<f64>,
    #[arg(long = "linear-mix", global = true, value_name = "M")]
    linear_mix: Option<f64>,
    #[arg(long = "window-seconds", global = true, value_name = "SECONDS")]
    window_seconds: Option<f64>,
    #[arg(long, global = true, value_name = "P")]
    percentile: Option<f64>,
    #[arg(long = "min-days", global = true, value_name = "DAYS")]
    min_days: Option<usize>,
    /// Directory for CSV point files (fleet).
    #[arg(long = "emit-csv", global = true, value_name = "DIR")]
    emit_csv: Option<PathBuf>,
    /// Worker threads for fleet analysis [default: number of processors].
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Random seed (synth).
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Analyze one machine's trace and print its scenario report as JSON.
    Analyze {
        trace: PathBuf,
        /// On-premise CPU model.
        #[arg(long)]
        cpu: String,
        /// Machine id [default: trace file stem].
        #[arg(long = "machine-id")]
        machine_id: Option<String>,
        #[arg(long, default_value = "unassigned")]
        datacenter: String,
    },
    /// Analyze every machine in a manifest and print the fleet report as JSON.
    Fleet {
        manifest: PathBuf,
        /// Write the JSON report here instead of standard output.
        #[arg(long, value_name = "PATH")]
        output: Option<PathBuf>,
        /// Number of datacenter size bins.
        #[arg(long, default_value_t = DEFAULT_BIN_COUNT)]
        bins: usize,
    },
    /// Generate a synthetic fleet: a manifest plus one trace file per machine.
    Synth {
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        machines: usize,
        #[arg(long, default_value_t = 4)]
        datacenters: usize,
        /// Trace length in days [default: from params file, else 14].
        #[arg(long)]
        days: Option<u32>,
        /// TOML file with parameter ranges.
        #[arg(long, value_name = "PATH")]
        params: Option<PathBuf>,
    },
    /// Inspect the CPU catalog.
    #[command(subcommand)]
    Catalog(CatalogCommand),
}

#[derive(Debug, Subcommand)]
enum CatalogCommand {
    /// List model names.
    List,
    /// Show one model as JSON.
    Show { model: String },
    /// Print the lift-and-shift energy fraction from ON_PREM to CLOUD.
    Ce { on_prem: String, cloud: String },
}

/// Settings read from a `--config` file. Every key is optional.
#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub catalog: Option<PathBuf>,
    pub cloud_ref: Option<String>,
    pub targets: Option<Vec<f64>>,
    pub baseline: Option<Baseline>,
    pub idle_fraction: Option<f64>,
    pub linear_mix: Option<f64>,
    pub window_seconds: Option<f64>,
    pub percentile: Option<f64>,
    pub min_days: Option<usize>,
    pub emit_csv: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub catalog_path: Option<PathBuf>,
    pub cloud_ref: Option<String>,
    pub settings: AnalysisSettings,
    pub emit_csv: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub seed: u64,
}

#[derive(Debug)]
struct CliError {
    code: i32,
    kind: &'static str,
    message: String,
}

impl CliError {
    fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID,
            kind: "invalid_input",
            message: message.into(),
        }
    }

    fn output(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_OUTPUT,
            kind: "output",
            message: message.into(),
        }
    }
}

impl From<CatalogError> for CliError {
    fn from(e: CatalogError) -> Self {
        let kind = match e {
            CatalogError::UnknownModel { .. } => "unknown_model",
            _ => "catalog",
        };
        Self {
            code: EXIT_INVALID,
            kind,
            message: e.to_string(),
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Trace(TraceError::InsufficientDays { .. }) => Self {
                code: EXIT_INSUFFICIENT,
                kind: "insufficient_data",
                message: e.to_string(),
            },
            ScenarioError::Catalog(c) => c.into(),
            other => Self::invalid(other.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Io { .. } => Self::output(e.to_string()),
            other => Self::invalid(other.to_string()),
        }
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    code: i32,
    kind: &'a str,
    message: &'a str,
}

#[derive(Serialize)]
struct ErrorDocument<'a> {
    error: ErrorBody<'a>,
}

fn resolve_config(shared: &SharedArgs, env_catalog: Option<PathBuf>) -> Result<RunConfig, CliError> {
    let file = match &shared.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
            toml::from_str::<FileConfig>(&text)
                .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };

    let targets = shared
        .targets
        .clone()
        .or(file.targets)
        .unwrap_or_else(|| scenarios::DEFAULT_TARGETS.to_vec());
    if targets.is_empty() {
        return Err(CliError::invalid("at least one target is required"));
    }
    let targets = targets
        .into_iter()
        .map(TargetUtilization::new)
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::invalid(e.to_string()))?;

    let model = EnergyModel::new(
        shared
            .idle_fraction
            .or(file.idle_fraction)
            .unwrap_or(crate::energy::DEFAULT_IDLE_FRACTION),
        shared
            .linear_mix
            .or(file.linear_mix)
            .unwrap_or(crate::energy::DEFAULT_LINEAR_MIX),
    )
    .map_err(|e| CliError::invalid(e.to_string()))?;

    let peak = PeakConfig {
        window_seconds: shared
            .window_seconds
            .or(file.window_seconds)
            .unwrap_or(trace::DEFAULT_WINDOW_SECONDS),
        percentile: shared
            .percentile
            .or(file.percentile)
            .unwrap_or(trace::DEFAULT_PERCENTILE),
        min_days: shared
            .min_days
            .or(file.min_days)
            .unwrap_or(trace::DEFAULT_MIN_DAYS),
    };
    if !(peak.window_seconds.is_finite() && peak.window_seconds > 0.0) {
        return Err(CliError::invalid(TraceError::InvalidWindow(peak.window_seconds).to_string()));
    }
    if !(peak.percentile > 0.0 && peak.percentile <= 100.0) {
        return Err(CliError::invalid(TraceError::InvalidPercentile(peak.percentile).to_string()));
    }

    let jobs = shared.jobs.or(file.jobs);
    if jobs == Some(0) {
        return Err(CliError::invalid("--jobs must be at least 1"));
    }

    Ok(RunConfig {
        catalog_path: shared.catalog.clone().or(file.catalog).or(env_catalog),
        cloud_ref: shared.cloud_ref.clone().or(file.cloud_ref),
        settings: AnalysisSettings {
            targets,
            model,
            baseline: shared.baseline.or(file.baseline).unwrap_or_default(),
            peak,
        },
        emit_csv: shared.emit_csv.clone().or(file.emit_csv),
        jobs,
        seed: shared.seed.or(file.seed).unwrap_or(0),
    })
}

fn load_catalog(config: &RunConfig) -> Result<Catalog, CliError> {
    let cloud_ref = config.cloud_ref.as_deref();
    match &config.catalog_path {
        Some(path) => {
            let file = fs::File::open(path)
                .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
            catalog::load_catalog(BufReader::new(file), cloud_ref).map_err(|e| CliError {
                code: EXIT_INVALID,
                kind: "catalog",
                message: format!("{}: {e}", path.display()),
            })
        }
        None => Ok(match cloud_ref {
            Some(name) => Catalog::fixture().with_cloud_reference(name)?,
            None => Catalog::fixture(),
        }),
    }
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::output(format!("standard output: {e}")))
}

fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    report::to_json(value).map_err(|e| CliError::output(e.to_string()))
}

fn cmd_analyze(
    config: &RunConfig,
    trace_path: &Path,
    cpu: &str,
    machine_id: Option<String>,
    datacenter: &str,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let catalog = load_catalog(config)?;
    catalog.lookup(cpu)?;
    let machine_id = machine_id.unwrap_or_else(|| {
        trace_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "machine".into())
    });
    let file = fs::File::open(trace_path)
        .map_err(|e| CliError::invalid(format!("{}: {e}", trace_path.display())))?;
    let trace = trace::parse_trace(BufReader::new(file), &machine_id)
        .map_err(|e| CliError::invalid(format!("{}: {e}", trace_path.display())))?;
    let machine = MachineRecord::new(trace, cpu, datacenter);
    let s = &config.settings;
    let report = scenarios::analyze_machine(&machine, &s.targets, &s.model, &catalog, s.baseline, &s.peak)?;
    write_out(out, &json(&report)?)
}

fn cmd_fleet(
    config: &RunConfig,
    manifest_path: &Path,
    output: Option<&Path>,
    bins: usize,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    if bins < 1 {
        return Err(CliError::invalid(FleetError::InvalidBinCount(bins).to_string()));
    }
    let catalog = load_catalog(config)?;
    let manifest = fleet::load_manifest(manifest_path).map_err(|e| match e {
        FleetError::Io { .. } => CliError::invalid(e.to_string()),
        other => CliError::invalid(format!("{}: {other}", manifest_path.display())),
    })?;
    // Output locations are checked before any analysis runs.
    if let Some(dir) = &config.emit_csv {
        fs::create_dir_all(dir).map_err(|e| CliError::output(format!("{}: {e}", dir.display())))?;
    }
    if let Some(path) = output {
        fs::File::create(path).map_err(|e| CliError::output(format!("{}: {e}", path.display())))?;
    }

    let outcomes = fleet::analyze_manifest(&manifest, &catalog, &config.settings, config.jobs);
    let report = fleet::aggregate(outcomes, &catalog, bins).map_err(|e| match e {
        FleetError::NoSuccessfulMachines { .. } => CliError {
            code: EXIT_NO_MACHINES,
            kind: "no_machines",
            message: e.to_string(),
        },
        other => CliError::invalid(other.to_string()),
    })?;

    let text = json(&report)?;
    match output {
        Some(path) => fs::write(path, &text).map_err(|e| CliError::output(format!("{}: {e}", path.display())))?,
        None => write_out(out, &text)?,
    }
    if let Some(dir) = &config.emit_csv {
        report::write_point_files(&report, dir)
            .map_err(|e| CliError::output(format!("{}: {e}", dir.display())))?;
    }
    for exclusion in &report.excluded {
        let _ = writeln!(err, "excluded {}: {}", exclusion.machine_id, exclusion.reason);
    }
    let _ = report::write_summary(&report, err);
    Ok(())
}

fn cmd_synth(
    config: &RunConfig,
    dir: &Path,
    machines: usize,
    datacenters: usize,
    days: Option<u32>,
    params: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let catalog = load_catalog(config)?;
    let mut ranges = match params {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
            toml::from_str::<ParamRanges>(&text)
                .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?
        }
        None => ParamRanges::default(),
    };
    if let Some(days) = days {
        ranges.duration_days = days;
    }
    let fleet = synth::generate_fleet(config.seed, machines, datacenters, &ranges, &catalog)?;
    let manifest = fleet.write_to(dir)?;
    write_out(
        out,
        &format!(
            "wrote {} traces across {} datacenters; manifest {}\n",
            fleet.machines.len(),
            datacenters,
            manifest.display()
        ),
    )
}

fn cmd_catalog(config: &RunConfig, command: &CatalogCommand, out: &mut dyn Write) -> Result<(), CliError> {
    let catalog = load_catalog(config)?;
    match command {
        CatalogCommand::List => {
            let mut text = String::new();
            for name in catalog.model_names() {
                text.push_str(name);
                text.push('\n');
            }
            write_out(out, &text)
        }
        CatalogCommand::Show { model } => {
            #[derive(Serialize)]
            struct Shown<'a> {
                #[serde(flatten)]
                spec: &'a catalog::CpuSpec,
                computational_efficiency: f64,
                cloud_reference: bool,
            }
            let spec = catalog.lookup(model)?;
            let shown = Shown {
                spec,
                computational_efficiency: spec.computational_efficiency(),
                cloud_reference: spec.model_name == catalog.cloud_reference_name(),
            };
            write_out(out, &json(&shown)?)
        }
        CatalogCommand::Ce { on_prem, cloud } => {
            let fraction = catalog::lift_and_shift_fraction(catalog.lookup(on_prem)?, catalog.lookup(cloud)?);
            write_out(out, &format!("{}\n", report::format_significant(fraction)))
        }
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let env_catalog = std::env::var_os(CATALOG_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from);
    let config = resolve_config(&cli.shared, env_catalog)?;
    match cli.command {
        Command::Analyze {
            trace,
            cpu,
            machine_id,
            datacenter,
        } => cmd_analyze(&config, &trace, &cpu, machine_id, &datacenter, out),
        Command::Fleet { manifest, output, bins } => {
            cmd_fleet(&config, &manifest, output.as_deref(), bins, out, err)
        }
        Command::Synth {
            out: dir,
            machines,
            datacenters,
            days,
            params,
        } => cmd_synth(&config, &dir, machines, datacenters, days, params.as_deref(), out),
        Command::Catalog(command) => cmd_catalog(&config, &command, out),
    }
}

/// Runs the CLI with explicit arguments and streams, returning the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    match dispatch(cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let doc = ErrorDocument {
                error: ErrorBody {
                    code: e.code,
                    kind: e.kind,
                    message: &e.message,
                },
            };
            let text = serde_json::to_string(&doc).unwrap_or_else(|_| e.message.clone());
            let _ = writeln!(err, "{text}");
            e.code
        }
    }
}
