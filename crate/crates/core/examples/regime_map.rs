//! Regime of the autonomous system over a grid in `(A, β₀)`, drawn as text.
//!
//! `cargo run --example regime_map`

use seasonal_sir::equilibria::RegimeTag;
use seasonal_sir::model::presets;
use seasonal_sir::sweep::{regime_map, Axis, SweepConfig};

fn main() -> seasonal_sir::Result<()> {
    let config = SweepConfig {
        base: seasonal_sir::sweep::BaseParams::Inline(presets::near_hopf()),
        axes: vec![
            Axis::linspace("beta0", 3.0, 0.5, 16)?,
            Axis::linspace("A", 0.6, 1.1, 60)?,
        ],
        ..Default::default()
    };
    let map = regime_map(&config)?;
    println!(". disease-free   b bistable   o limit cycle   # R0 >= 1   ! degenerate");
    for (row, beta0) in map.cells.chunks(60).zip(&config.axes[0].values) {
        let line: String = row
            .iter()
            .map(|c| match c.regime {
                Some(r) if r.degenerate => '!',
                Some(r) => match r.tag {
                    RegimeTag::DiseaseFreeGlobal => '.',
                    RegimeTag::BistableSink => 'b',
                    RegimeTag::LimitCycle => 'o',
                    RegimeTag::SupercriticalR0 => '#',
                },
                None => ' ',
            })
            .collect();
        println!("beta0 {beta0:5.2} |{line}|");
    }
    println!("             A from 0.6 to 1.1");
    Ok(())
}
