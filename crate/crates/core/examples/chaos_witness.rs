//! Strong, slow forcing breaks the invariant torus: a converged positive
//! Lyapunov exponent on the near-Hopf parameters.
//!
//! `cargo run --release --example chaos_witness`

use seasonal_sir::attractor::{classify_attractor, ClassifyOptions};
use seasonal_sir::model::{presets, State2};

fn main() -> seasonal_sir::Result<()> {
    let opts = ClassifyOptions {
        min_kept_time: 40_000.0,
        ..Default::default()
    };
    let x0 = State2::new(0.4063, 0.2818);
    for (gamma, omega) in [(0.0, 1.0), (0.1, 32.0), (0.5, 0.7)] {
        let p = presets::near_hopf().with_forcing(gamma, omega);
        let v = classify_attractor(&p, x0, &opts)?;
        println!(
            "gamma {gamma:<4} omega {omega:<4} -> {:<16} lambda_max {:+.5} (spread {:.1e})",
            v.kind.name(),
            v.lambda_max,
            v.diagnostics.window_spread
        );
    }
    Ok(())
}
