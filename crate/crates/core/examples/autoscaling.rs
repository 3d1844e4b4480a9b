//! Ideal and hourly auto-scaling on a bursty synthetic trace, against both
//! baselines.
//!
//! Run with `cargo run --example autoscaling`.

use migrent::energy::EnergyModel;
use migrent::scenarios::{self, Baseline, TargetUtilization};
use migrent::synth::{self, SynthParams};
use migrent::trace::{self, PeakConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = SynthParams {
        seed: 11,
        base_utilization: 0.15,
        diurnal_amplitude: 0.2,
        noise_stddev: 0.04,
        ..SynthParams::default()
    };
    let trace = synth::generate_trace(&params, "batch-07")?;
    let model = EnergyModel::default();
    let peak = trace::estimate_peak(&trace, &PeakConfig::default())?;
    println!("peak utilization {:.3}", peak.value());

    for baseline in [Baseline::LiftAndShift, Baseline::StaticResized] {
        println!("baseline {baseline}");
        for target in TargetUtilization::defaults() {
            let ideal = scenarios::autoscale_ideal_fraction(&trace, target, &model, baseline, peak)?;
            let hourly = scenarios::autoscale_hourly_fraction(&trace, target, &model, baseline, peak)?;
            println!("  target {:.2}: ideal {ideal:.4}, hourly {hourly:.4}", target.value());
        }
    }
    Ok(())
}
