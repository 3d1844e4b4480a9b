//! Analyze a synthetic fleet in memory and print the fleet-wide mean table
//! and datacenter size bins.
//!
//! Run with `cargo run --release --example fleet_report`.

use migrent::catalog::Catalog;
use migrent::fleet::{self, AnalysisSettings, DEFAULT_BIN_COUNT};
use migrent::scenarios::Scenario;
use migrent::synth::{self, ParamRanges};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let catalog = Catalog::fixture();
    let fleet = synth::generate_fleet(2024, 40, 8, &ParamRanges::default(), &catalog)?;
    let outcomes = fleet::analyze_machines(&fleet.records(), &catalog, &AnalysisSettings::default(), None);
    let report = fleet::aggregate(outcomes, &catalog, DEFAULT_BIN_COUNT)?;

    println!("{} machines analyzed, {} excluded", report.machine_count, report.excluded_count);
    print!("{:>6}", "target");
    for s in Scenario::ALL {
        print!(" {:>17}", s.name());
    }
    println!();
    for row in &report.mean_table {
        print!("{:>6.2}", row.target);
        for s in Scenario::ALL {
            match row.machine_mean.get(s) {
                Some(v) => print!(" {v:>17.4}"),
                None => print!(" {:>17}", "-"),
            }
        }
        println!();
    }

    println!("\nlift-and-shift fraction by datacenter size:");
    for bin in &report.size_bins {
        println!(
            "  bin {} ({} datacenters, {} machines): mean {:.4}",
            bin.bin,
            bin.datacenters.len(),
            bin.machine_count,
            bin.mean
        );
    }
    for row in &report.utilization_by_release {
        println!("  CPUs from {}: mean peak utilization {:.3}", row.year, row.mean);
    }
    Ok(())
}
