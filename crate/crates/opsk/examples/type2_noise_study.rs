//! Processor noise vs decode errors: Monte-Carlo against the exact oracle,
//! for the four bit allocations of the SER analyses.
//!
//! ```bash
//! cargo run --release --example type2_noise_study
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use opsk::perceptual::{BitAllocation, OdorBank};
use opsk::sim::{ser_type2_analytic, ser_type2_monte_carlo};

fn main() {
    let allocations = [
        BitAllocation::new(1, 1, 1).unwrap(),
        BitAllocation::new(2, 1, 1).unwrap(),
        BitAllocation::new(2, 2, 1).unwrap(),
        BitAllocation::new(3, 1, 1).unwrap(),
    ];
    let trials = 100_000;

    println!("type-2 SER at odor-set quality 1.0 ({trials} trials per point)\n");
    println!(
        "{:>10} {:>6} {:>12} {:>12}",
        "alloc", "PN", "analytic", "monte-carlo"
    );
    for alloc in allocations {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let bank = OdorBank::generate(alloc, 1.0, 2.4e-9, &mut rng).unwrap();
        for pn in [1.0, 2.0, 5.0, 10.0, 20.0] {
            let exact = ser_type2_analytic(&bank, pn).unwrap();
            let mc = ser_type2_monte_carlo(&bank, pn, trials, &mut rng).unwrap();
            println!(
                "{:>10} {pn:>6.0} {exact:>12.4e} {mc:>12.4e}",
                alloc.to_string()
            );
        }
        println!();
    }
    println!("more bits per dimension shrink the decision regions, so the same");
    println!("processor noise trips more decode errors.");
}
