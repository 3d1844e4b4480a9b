//! The relative power curve, its marginal allocation threshold, and
//! recovering curve parameters from measured points.
//!
//! Run with `cargo run --example energy_curve`.

use migrent::energy::{self, EnergyModel, PowerSample};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = EnergyModel::default();
    println!(
        "idle fraction {}, linear mix {}",
        model.idle_fraction(),
        model.linear_mix()
    );
    for step in 0..=10 {
        let u = step as f64 / 10.0;
        println!("  E({u:.1}) = {:.4}", model.relative_power(u));
    }

    // Above this utilization, adding capacity saves energy.
    let threshold = model.marginal_threshold();
    println!("marginal threshold {threshold:.4}");
    for x in [0.5, threshold, 0.95] {
        println!("  marginal allocation at {x:.4}: {:+.4}", model.marginal_allocation(x));
    }

    // Fit a curve to points sampled from a known model.
    let truth = EnergyModel::new(0.42, 0.55)?;
    let samples: Vec<PowerSample> = (0..=20)
        .map(|i| {
            let u = i as f64 / 20.0;
            PowerSample::new(u, truth.relative_power(u))
        })
        .collect();
    let fitted = energy::fit(&samples)?;
    println!(
        "fit: idle fraction {:.4}, linear mix {:.4}",
        fitted.idle_fraction(),
        fitted.linear_mix()
    );
    Ok(())
}
