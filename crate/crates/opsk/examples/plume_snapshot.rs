//! Concentration of one instantaneous release as it drifts and spreads.
//!
//! ```bash
//! cargo run --example plume_snapshot
//! ```

use opsk::channel::{concentration, DiffusionModel, FlowSample, ReleaseEvent};
use opsk::perceptual::OdorId;

fn main() {
    let mass = 2.4e-9; // kg per release
    let diff = DiffusionModel::isotropic(0.14e-4).unwrap();
    let wind = FlowSample {
        u: [0.1, 0.0, 0.0],
        interval_index: 1,
    };

    let mut cloud = ReleaseEvent::new(OdorId(0), mass, 1).unwrap();
    println!("release of {mass:.2e} kg at the origin, wind 0.1 m/s along +x\n");
    println!(
        "{:>6} {:>10} {:>14} {:>14}",
        "t [s]", "center x", "peak [kg/m3]", "at x=0.1 m"
    );

    let mut elapsed = 0.0;
    for _ in 0..8 {
        let dt = 0.25;
        cloud.advance_drift(&wind, dt).unwrap();
        elapsed += dt;
        let peak = concentration(&cloud, cloud.drift(), &diff).unwrap();
        let at_receiver = concentration(&cloud, [0.1, 0.0, 0.0], &diff).unwrap();
        println!(
            "{elapsed:>6.2} {:>10.4} {peak:>14.4e} {at_receiver:>14.4e}",
            cloud.drift()[0]
        );
    }

    println!("\nthe cloud center passes the x = 0.1 m receiver at t = 1 s,");
    println!("which is where the concentration seen by the receiver peaks.");
}
