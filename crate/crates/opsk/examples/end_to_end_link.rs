//! One full Monte-Carlo link run with both noise sources active.
//!
//! ```bash
//! cargo run --release --example end_to_end_link
//! ```

use opsk::channel::Fnr;
use opsk::perceptual::BitAllocation;
use opsk::sim::{run_scenario, ScenarioConfig};

fn main() {
    let cfg = ScenarioConfig {
        allocation: BitAllocation::new(2, 1, 1).unwrap(),
        distance: 0.1,
        edge_ratio: 0.05,
        flow_ratio: 1.0,
        fnr: [Fnr::Finite(20.0); 3],
        pn: 5.0,
        quality: 0.8,
        n_symbols: 10_000,
        seed: 42,
        ..ScenarioConfig::default()
    };

    println!(
        "link: {} bits/symbol over {} m, flow {} m/s, FNR 20, PN 5, Q 0.8",
        cfg.allocation.k(),
        cfg.distance,
        cfg.flow_ratio * cfg.distance
    );
    let res = run_scenario(&cfg).unwrap();

    println!("\nsymbols sent        {:>10}", res.n_symbols);
    println!(
        "type-1 errors       {:>10}   (wrong odor selected)",
        res.type1_errors
    );
    println!(
        "type-2 errors       {:>10}   (right odor, wrong region)",
        res.type2_errors
    );
    println!("SER                 {:>10.4}", res.ser);
    println!("symbol rate         {:>10.4} sym/s", res.symbol_rate);
    println!("expected mass ratio {:>10.4e}", res.mass_ratio_expected);
}
