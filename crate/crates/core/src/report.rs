//! Machine-readable output: JSON reports and plot-ready CSV point files.
//!
//! Every float in JSON output is rounded to 6 significant digits so that
//! identical inputs produce byte-identical documents. Object keys are emitted
//! in sorted order.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{Number, Value};

use crate::fleet::FleetReport;
use crate::scenarios::Scenario;

pub const SIGNIFICANT_DIGITS: usize = 6;

/// Rounds `x` to six significant digits.
pub fn round_significant(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .unwrap_or(x)
}

/// Formats a float with six significant digits and no trailing zeros.
pub fn format_significant(x: f64) -> String {
    let rounded = round_significant(x);
    // Shortest round-trip representation of the rounded value.
    let s = format!("{rounded}");
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn round_value(value: Value) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => n
            .as_f64()
            .and_then(|x| Number::from_f64(round_significant(x)))
            .map(Value::Number)
            .unwrap_or(Value::Null),
        Value::Array(items) => Value::Array(items.into_iter().map(round_value).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_value(v))).collect()),
        other => other,
    }
}

/// Pretty JSON with floats rounded, terminated by a newline.
pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let rounded = round_value(serde_json::to_value(value)?);
    let mut text = serde_json::to_string_pretty(&rounded)?;
    text.push('\n');
    Ok(text)
}

fn target_label(target: f64) -> String {
    format!("{target:.2}")
}

/// File name of one CDF point file, e.g. `cdf_combined_0.70.csv`.
pub fn cdf_file_name(scenario: Scenario, target: f64) -> String {
    format!("cdf_{}_{}.csv", scenario.name(), target_label(target))
}

fn opt(value: Option<f64>) -> String {
    value.map(format_significant).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> std::io::Result<()> {
    let mut writer = csv::Writer::from_writer(fs::File::create(path)?);
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(row)?;
    }
    writer.flush()
}

/// Writes the per-figure CSV point files into `dir`, creating it if needed.
/// Returns the file names written, in order.
pub fn write_point_files(report: &FleetReport, dir: &Path) -> std::io::Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    for series in &report.cdfs {
        let name = cdf_file_name(series.scenario, series.target);
        let rows = series
            .points
            .iter()
            .map(|p| vec![format_significant(p.value), format_significant(p.probability)])
            .collect();
        write_csv(&dir.join(&name), &["value", "cumulative_probability"], rows)?;
        written.push(name);
    }

    let rows = report
        .size_bins
        .iter()
        .map(|b| {
            vec![
                b.bin.to_string(),
                b.datacenters.len().to_string(),
                b.machine_count.to_string(),
                format_significant(b.mean),
                format_significant(b.min),
                format_significant(b.max),
            ]
        })
        .collect();
    write_csv(
        &dir.join("size_bins.csv"),
        &["bin", "datacenters", "machines", "mean", "min", "max"],
        rows,
    )?;
    written.push("size_bins.csv".into());

    let rows = report
        .utilization_by_release
        .iter()
        .map(|r| {
            let mut row = vec![r.year.to_string(), r.machines.to_string()];
            row.extend([r.mean, r.p10, r.p25, r.p75, r.p90].map(format_significant));
            row
        })
        .collect();
    write_csv(
        &dir.join("util_by_release.csv"),
        &["year", "machines", "mean", "p10", "p25", "p75", "p90"],
        rows,
    )?;
    written.push("util_by_release.csv".into());

    let mut header = vec!["target".to_string()];
    for level in ["machine_mean", "datacenter_mean"] {
        for s in Scenario::ALL {
            header.push(format!("{level}_{}", s.name()));
        }
    }
    let rows = report
        .mean_table
        .iter()
        .map(|row| {
            let mut cells = vec![target_label(row.target)];
            cells.extend(Scenario::ALL.iter().map(|&s| opt(row.machine_mean.get(s))));
            cells.extend(Scenario::ALL.iter().map(|&s| opt(row.datacenter_mean.get(s))));
            cells
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&dir.join("mean_table.csv"), &header, rows)?;
    written.push("mean_table.csv".into());

    Ok(written)
}

/// Writes a one-line human summary of a fleet report.
pub fn write_summary<W: Write>(report: &FleetReport, mut sink: W) -> std::io::Result<()> {
    writeln!(
        sink,
        "analyzed {} machines, excluded {}",
        report.machine_count, report.excluded_count
    )
}
