//! Peak-utilization estimate for a synthetic two-week trace: smoothing,
//! daily maxima, then the 95th percentile.
//!
//! Run with `cargo run --example peak_utilization`.

use migrent::synth::{self, SynthParams};
use migrent::trace::{self, PeakConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = SynthParams {
        seed: 7,
        base_utilization: 0.25,
        ..SynthParams::default()
    };
    let raw = synth::generate_trace(&params, "web-01")?;
    let config = PeakConfig::default();
    let smoothed = trace::smooth(&raw, config.window_seconds)?;
    let maxima = trace::daily_maxima(&smoothed);

    println!("{} samples, raw max {:.3}", raw.len(), raw.max_utilization());
    println!("smoothed ({}s window) max {:.3}", config.window_seconds, smoothed.max_utilization());
    for (day, max) in &maxima.days {
        println!("  {day}  {max:.3}");
    }
    let peak = trace::peak_utilization(&maxima, config.percentile, config.min_days)?;
    println!("p{} of daily maxima: {:.3}", config.percentile, peak.value());

    // A trace shorter than min_days has no peak estimate.
    let short = SynthParams {
        duration_days: 3,
        ..params
    };
    let err = trace::estimate_peak(&synth::generate_trace(&short, "web-02")?, &config).unwrap_err();
    println!("3-day trace: {err}");
    Ok(())
}
