//! Past the Hopf point `E₃` is a source surrounded by an attracting cycle.
//! Shooting on the section `S = S₃` finds it; the return-map derivative is
//! compared with `exp ∮ tr J`.
//!
//! `cargo run --release --example limit_cycle`

use seasonal_sir::attractor::{locate_limit_cycle, ShootingOptions};
use seasonal_sir::equilibria::endemic_e3;
use seasonal_sir::integrate::{section_crossings, Direction, IntegratorOptions, Section};
use seasonal_sir::model::{presets, ReducedSystem, State2};

fn main() -> seasonal_sir::Result<()> {
    let p = presets::post_hopf();
    let e3 = endemic_e3(&p)?.expect("E3 exists");
    println!("E3 = ({:.6}, {:.6})", e3.s, e3.i);

    let cycle = locate_limit_cycle(
        &p,
        State2::new(e3.s + 0.01, e3.i),
        &ShootingOptions::default(),
    )?;
    let (smin, smax) = cycle
        .points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), q| {
            (a.min(q.s), b.max(q.s))
        });
    println!(
        "period {:.6} after {} Newton steps",
        cycle.period, cycle.newton_iterations
    );
    println!("S range on the cycle [{smin:.4}, {smax:.4}]");
    println!(
        "return-map multiplier {:.8}, Liouville {:.8}",
        cycle.floquet_multiplier, cycle.liouville_multiplier
    );

    // both piercings of the section settle on the cycle
    let sys = ReducedSystem::new(&p)?;
    let hits = section_crossings(
        &sys,
        [e3.s + 0.01, e3.i],
        &IntegratorOptions::adaptive(1e-10, (0.0, 3000.0)),
        &Section::Line {
            point: [e3.s, e3.i],
            normal: [1.0, 0.0],
        },
        Direction::Both,
    )?;
    for c in hits.iter().rev().take(4).rev() {
        println!("t = {:9.3}  I = {:.8}", c.t, c.state[1]);
    }
    Ok(())
}
