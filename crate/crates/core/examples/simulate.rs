//! Integrates the full `(S, I, R)` system from an epidemic start and checks
//! the integrator's order on the reduced system.
//!
//! `cargo run --release --example simulate`

use seasonal_sir::integrate::{convergence_order, integrate, IntegratorOptions};
use seasonal_sir::model::{presets, FullSystem, ReducedSystem};

fn main() -> seasonal_sir::Result<()> {
    let p = presets::near_hopf().with_forcing(0.1, 2.0);
    let sys = FullSystem::new(&p)?;
    let mut opts = IntegratorOptions::adaptive(1e-10, (0.0, 400.0));
    opts.record_stride = 20;
    let tr = integrate(&sys, [0.8333, 0.3666, 0.0], &opts)?;

    println!("t,S,I,R");
    for (t, x) in tr.times.iter().zip(&tr.states).step_by(10) {
        println!("{t:.3},{:.6},{:.6},{:.6}", x[0], x[1], x[2]);
    }
    eprintln!(
        "accepted {} rejected {} invariant-region violation {:e}",
        tr.stats.steps_accepted, tr.stats.steps_rejected, tr.stats.max_invariant_violation
    );

    let order = convergence_order(
        &ReducedSystem::new(&presets::near_hopf())?,
        [0.8333, 0.3666],
        (0.0, 20.0),
        &[0.2, 0.1, 0.05, 0.025],
    )?;
    eprintln!("observed RK4 order {order:.3}");
    Ok(())
}
