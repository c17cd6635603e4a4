//! A small type-1 SER sweep over distance and edge ratio at FNR 20,
//! emitted as CSV (the `opsk ser1` subcommand drives the same machinery
//! from a scenario file).
//!
//! ```bash
//! cargo run --release --example ser_map
//! ```

use opsk::channel::Fnr;
use opsk::sim::{sweep, ScenarioConfig, SweepMode};

fn main() {
    let mut grid = Vec::new();
    for distance in [0.01, 0.1, 1.0] {
        for edge_ratio in [0.001, 0.01, 0.05, 0.1] {
            grid.push(ScenarioConfig {
                distance,
                edge_ratio,
                flow_ratio: 1.0,
                fnr: [Fnr::Finite(20.0); 3],
                pn: 0.0,
                n_symbols: 4_000,
                seed: 11,
                ..ScenarioConfig::default()
            });
        }
    }
    let table = sweep(&grid, SweepMode::Type1).unwrap();
    print!("{}", table.to_csv_string());
}
