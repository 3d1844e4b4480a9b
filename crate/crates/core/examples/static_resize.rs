//! Static resizing of a steady machine to different target peaks, alone and
//! combined with lift-and-shift.
//!
//! Run with `cargo run --example static_resize`.

use migrent::catalog::Catalog;
use migrent::energy::EnergyModel;
use migrent::scenarios::{self, MachineRecord, TargetUtilization};
use migrent::trace::{self, PeakConfig, UtilizationTrace};

const DAY: i64 = 86_400;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Eight days at a constant 40% utilization, sampled every 5 minutes.
    let start = 1_464_739_200;
    let trace = UtilizationTrace::from_pairs("db-01", (0..=8 * DAY / 300).map(|i| (start + i * 300, 0.4)))?;
    let model = EnergyModel::default();
    let catalog = Catalog::fixture();
    let peak_config = PeakConfig::default();
    let peak = trace::estimate_peak(&trace, &peak_config)?;
    let machine = MachineRecord::new(trace, "Xeon-E5-2670", "dc-east");

    println!("peak utilization {:.3}", peak.value());
    println!("{:>6} {:>10} {:>10}", "target", "static", "combined");
    for target in TargetUtilization::defaults() {
        let resized = scenarios::static_resize_fraction(&machine.trace, target, &model, peak)?;
        let combined = scenarios::combined_fraction(&machine, target, &model, &catalog, &peak_config)?;
        println!("{:>6.2} {:>10.5} {:>10.5}", target.value(), resized, combined);
    }
    Ok(())
}
