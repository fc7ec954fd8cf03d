//! A small `(γ, ω)` sweep with the chaotic fraction per forcing frequency.
//! Outputs land in `target/sweep-example/`.
//!
//! `cargo run --release --example chaos_sweep`

use std::path::Path;

use seasonal_sir::model::presets;
use seasonal_sir::sweep::{run_sweep, Format, SweepConfig};

fn main() -> seasonal_sir::Result<()> {
    let mut config = SweepConfig::chaos_grid(presets::near_hopf(), 0.6, 7, vec![0.7, 2.0, 8.0])?;
    config.seed = 11;
    let result = run_sweep(&config)?;
    println!(
        "seed point {:?} ({})",
        result.summary.seed_point, result.summary.seed_source
    );
    for f in &result.summary.chaotic_fraction {
        println!("omega {:>4}: {}/{} chaotic", f.omega, f.chaotic, f.cells);
    }
    println!("{:?}", result.summary.counts);
    let dir = Path::new("target/sweep-example");
    for format in [Format::Csv, Format::Json, Format::Gnuplot] {
        println!("wrote {}", result.export(dir, "sweep", format)?.display());
    }
    Ok(())
}
