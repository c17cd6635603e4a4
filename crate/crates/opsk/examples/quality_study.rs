//! Odor-set quality: generating banks at target quality and its effect on
//! decode errors at fixed processor noise.
//!
//! ```bash
//! cargo run --release --example quality_study
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use opsk::perceptual::{quality_overall, BitAllocation, OdorBank};
use opsk::sim::ser_type2_analytic;

fn main() {
    let alloc = BitAllocation::new(3, 1, 1).unwrap();
    let pn = 5.0;
    println!("allocation {alloc}, processor noise sigma {pn}\n");
    println!(
        "{:>9} {:>12} {:>12}",
        "target Q", "achieved Q", "type-2 SER"
    );
    for q10 in (1..=10).rev() {
        let target = q10 as f64 / 10.0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bank = OdorBank::generate(alloc, target, 2.4e-9, &mut rng).unwrap();
        let achieved = quality_overall(&bank).unwrap();
        let ser = ser_type2_analytic(&bank, pn).unwrap();
        println!("{target:>9.1} {achieved:>12.4} {ser:>12.4e}");
    }
    println!("\nlower quality parks odors closer to decision boundaries, so the");
    println!("same noise crosses into neighbor regions more often.");
}
