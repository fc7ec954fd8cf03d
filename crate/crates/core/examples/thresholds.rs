//! Closed-form thresholds, equilibria and regimes for a few parameter sets.
//!
//! `cargo run --example thresholds`

use seasonal_sir::equilibria::{analyze, sensitivity_phi0};
use seasonal_sir::model::presets;

fn main() -> seasonal_sir::Result<()> {
    for (name, p) in [
        ("disease_free", presets::disease_free()),
        ("near_hopf", presets::near_hopf()),
        ("post_hopf", presets::post_hopf()),
        ("bistable", presets::bistable()),
    ] {
        let rep = analyze(&p)?;
        let th = rep.thresholds;
        println!("== {name}");
        println!(
            "  R0 = {:.6}  phi0 = {:.6}  phi1 = {:.6}  H = {}  A* = {:.4}  delta = {:.4}",
            th.r0,
            th.phi0,
            th.phi1,
            th.hopf_h.map_or("undefined".into(), |h| format!("{h:.6}")),
            th.a_star,
            th.delta
        );
        println!(
            "  regime {:?}{}  hopf margin {:?}",
            rep.regime.tag,
            if rep.regime.degenerate {
                " (degenerate)"
            } else {
                ""
            },
            rep.hopf.margin
        );
        for e in &rep.equilibria {
            println!(
                "  {:?} at ({:.6}, {:.6}): {:?}, eigenvalues {:.4} / {:.4}",
                e.label, e.point.s, e.point.i, e.stability, e.eigenvalues[0], e.eigenvalues[1]
            );
        }
        if let Ok(g) = sensitivity_phi0(&p) {
            println!(
                "  dphi0: a {:+.4}  beta0 {:+.4}  mu {:+.4}  r {:+.4}",
                g.a, g.beta0, g.mu, g.r
            );
        }
    }
    Ok(())
}
