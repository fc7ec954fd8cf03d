//! Seasonality from a table of samples instead of the default cosine.
//!
//! `cargo run --release --example custom_forcing`

use seasonal_sir::attractor::{classify_attractor, ClassifyOptions};
use seasonal_sir::model::{presets, Forcing, ModelParams, State2};

fn main() -> seasonal_sir::Result<()> {
    // school terms: high contact for most of the year, a dip in summer
    let forcing = Forcing::table(
        12.0,
        vec![1.3, 1.3, 1.2, 1.2, 1.1, 0.8, 0.5, 0.5, 1.0, 1.3, 1.3, 1.3],
    )?;
    let p = ModelParams {
        forcing,
        ..presets::post_hopf().with_forcing(0.1, 1.0)
    };
    p.validate()?;
    println!(
        "forcing period {:.3} time units, Phi in [{:.3}, {:.3}]",
        p.forcing_period(),
        p.forcing.minimum(),
        p.forcing.maximum()
    );
    let v = classify_attractor(&p, State2::new(0.39, 0.37), &ClassifyOptions::default())?;
    println!(
        "verdict {} with lambda_max {:+.2e}",
        v.kind.name(),
        v.lambda_max
    );
    Ok(())
}
