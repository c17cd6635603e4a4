//! Absorption-time planning: where the in-cube mass peaks, what fraction is
//! captured there, and the symbol rate that follows.
//!
//! ```bash
//! cargo run --example absorption_planning
//! ```

use opsk::channel::DiffusionModel;
use opsk::receiver::{mass_ratio, optimize_absorption_time, ReceiverGeometry, SearchBounds};

fn main() {
    let diff = DiffusionModel::isotropic(0.14e-4).unwrap();
    let m = 2.0; // symbol-to-sampling ratio

    println!(
        "{:>10} {:>10} {:>12} {:>14} {:>12}",
        "dist [m]", "u [m/s]", "T_a [s]", "mass ratio", "SR [sym/s]"
    );
    for distance in [0.01, 0.1, 1.0, 10.0] {
        for flow_ratio in [0.1, 1.0, 10.0] {
            let u = flow_ratio * distance;
            let geom = ReceiverGeometry::new([distance, 0.0, 0.0], 0.05 * distance).unwrap();
            let flow = [u, 0.0, 0.0];
            let search = SearchBounds::auto(&geom, flow, &diff).unwrap();
            let t_a = optimize_absorption_time(&geom, flow, &diff, &search).unwrap();
            let ratio = mass_ratio(&geom, flow, &diff, t_a).unwrap();
            println!(
                "{distance:>10.2} {u:>10.3} {t_a:>12.4e} {ratio:>14.4e} {:>12.4e}",
                1.0 / (m * t_a)
            );
        }
    }

    println!("\nalong constant flow-ratio lines the transit time 1/flow_ratio");
    println!("dominates, so the symbol rate barely moves with distance.");
}
