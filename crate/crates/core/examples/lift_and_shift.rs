//! Lift-and-shift energy fractions for every on-premise CPU in the bundled
//! catalog against the default cloud reference.
//!
//! Run with `cargo run --example lift_and_shift`.

use migrent::catalog::{self, Catalog};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let catalog = Catalog::fixture();
    let cloud = catalog.cloud_reference();
    println!(
        "cloud reference: {} (CE {:.3} points/W)",
        cloud.model_name,
        cloud.computational_efficiency()
    );
    println!("{:<22} {:>6} {:>10} {:>9}", "on-prem CPU", "year", "CE", "fraction");
    for spec in catalog.iter().filter(|s| !s.cloud) {
        println!(
            "{:<22} {:>6} {:>10.3} {:>9.4}",
            spec.model_name,
            spec.release_date.format("%Y"),
            spec.computational_efficiency(),
            catalog::lift_and_shift_fraction(spec, cloud)
        );
    }

    // Any catalog entry can serve as the reference instead.
    let older = catalog.with_cloud_reference("Xeon-E5-2676-v3")?;
    let spec = older.lookup("Xeon-X5570")?;
    println!(
        "\nXeon-X5570 against {}: {:.4}",
        older.cloud_reference_name(),
        catalog::lift_and_shift_fraction(spec, older.cloud_reference())
    );
    Ok(())
}
