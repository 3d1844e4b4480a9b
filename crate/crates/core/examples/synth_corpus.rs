//! Write a synthetic fleet to disk, then load it back through its manifest
//! the same way the `fleet` subcommand does.
//!
//! Run with `cargo run --example synth_corpus [DIR]`.

use std::path::PathBuf;

use migrent::catalog::Catalog;
use migrent::fleet::{self, AnalysisSettings, DEFAULT_BIN_COUNT};
use migrent::report;
use migrent::synth::{self, ParamRanges};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("migrent-synth"));
    let catalog = Catalog::fixture();
    let ranges = ParamRanges {
        duration_days: 8,
        ..ParamRanges::default()
    };
    let manifest_path = synth::generate_fleet(42, 12, 3, &ranges, &catalog)?.write_to(&dir)?;
    println!("wrote {}", manifest_path.display());

    let manifest = fleet::load_manifest(&manifest_path)?;
    let outcomes = fleet::analyze_manifest(&manifest, &catalog, &AnalysisSettings::default(), Some(2));
    let report = fleet::aggregate(outcomes, &catalog, DEFAULT_BIN_COUNT)?;
    let files = report::write_point_files(&report, &dir.join("points"))?;
    println!("{} machines analyzed; point files: {}", report.machine_count, files.join(", "));
    Ok(())
}
