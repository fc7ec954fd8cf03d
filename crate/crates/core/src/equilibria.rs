//! Closed-form analysis of the autonomous (`γ = 0`) reduced system:
//! equilibria, the `R₀`/`φ₀`/`φ₁`/`H`/`A*` thresholds, linear stability,
//! regime labels and the sensitivity of the saddle-node threshold.
//!
//! Every formula here uses `μ_eff = μ + d`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat2};
use crate::model::{field_reduced, jacobian_reduced, ModelParams, State2};

/// Equilibrium residual tolerance, relative to `1 + ‖x‖∞`.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Eigenvalue band for "zero", relative to `1 + ‖J‖∞`.
pub const EIGEN_TOL: f64 = 1e-8;
/// Band for `Δ = 0`.
pub const DELTA_TOL: f64 = 1e-12;
/// Band for ties between `R₀` and a threshold.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub r0: f64,
    /// Saddle-node threshold on the `R₀` axis.
    pub phi0: f64,
    /// Above this `R₀`, `S₃ < S₄ < A`.
    pub phi1: f64,
    /// Hopf threshold on the `R₀` axis; `None` unless `β₀ > 1`.
    pub hopf_h: Option<f64>,
    /// Capacity at which the endemic pair collides.
    pub a_star: f64,
    /// Endemic discriminant.
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EquilibriumLabel {
    E1,
    E2,
    E3,
    E4,
    /// Doubled endemic point at `Δ = 0`.
    EStar,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Sink,
    Source,
    Saddle,
    /// Purely imaginary pair within tolerance (Hopf candidate).
    CenterLike,
    /// A zero eigenvalue within tolerance (saddle-node candidate).
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub label: EquilibriumLabel,
    pub point: State2,
    pub eigenvalues: [Complex64; 2],
    pub trace: f64,
    pub det: f64,
    pub stability: Stability,
    /// `I ≥ 0` and `0 ≤ S ≤ A`.
    pub admissible: bool,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegimeTag {
    /// `R₀ < φ₀`: `E₂` attracts everything with `I > 0`.
    DiseaseFreeGlobal,
    /// `φ₀ < R₀ < H`: sink `E₃` coexists with sink `E₂`.
    BistableSink,
    /// `H < R₀ < 1`: attracting cycle around `E₃`.
    LimitCycle,
    SupercriticalR0,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub tag: RegimeTag,
    /// `R₀` ties one of the thresholds within [`TIE_TOL`].
    pub degenerate: bool,
    pub thresholds: Thresholds,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopfCondition {
    pub holds: bool,
    /// `bound − μ_eff`, where the bound is only defined for `β₀ > 1`.
    pub margin: Option<f64>,
}

/// Partial derivatives of `φ₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phi0Gradient {
    pub a: f64,
    pub beta0: f64,
    pub mu: f64,
    pub r: f64,
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Precondition(format!("{name} must be > 0 (got {v})")))
    }
}

/// `R₀ = β₀A / (μ_eff + r/a)`.
pub fn basic_reproduction_number(p: &ModelParams) -> Result<f64> {
    require_positive("a", p.saturation)?;
    let denom = p.mu_eff() + p.cure_rate / p.saturation;
    require_positive("mu_eff + r/a", denom)?;
    Ok(p.beta0 * p.capacity / denom)
}

/// `Δ = (aβ₀ + A − μ_eff/β₀)² − 4r`; two endemic equilibria iff `Δ > 0`.
pub fn discriminant(p: &ModelParams) -> Result<f64> {
    require_positive("beta0", p.beta0)?;
    let b = p.saturation * p.beta0 + p.capacity - p.mu_eff() / p.beta0;
    Ok(b * b - 4.0 * p.cure_rate)
}

/// `Δ` written in terms of `R₀`:
/// `(aβ₀ + R₀(μ_eff/β₀ + r/(aβ₀)) − μ_eff/β₀)² − 4r`.
pub fn discriminant_from_r0(p: &ModelParams, r0: f64) -> Result<f64> {
    require_positive("beta0", p.beta0)?;
    require_positive("a", p.saturation)?;
    let (a, b, mu, r) = (p.saturation, p.beta0, p.mu_eff(), p.cure_rate);
    let x = a * b + r0 * (mu / b + r / (a * b)) - mu / b;
    Ok(x * x - 4.0 * r)
}

/// Right-hand side of the Hopf condition,
/// `A(β₀−1) + aβ₀ − 2√(β₀(β₀−1)aA)`, for `β₀ > 1`.
pub fn hopf_bound(p: &ModelParams) -> Option<f64> {
    let (big_a, a, b) = (p.capacity, p.saturation, p.beta0);
    (b > 1.0).then(|| big_a * (b - 1.0) + a * b - 2.0 * (b * (b - 1.0) * a * big_a).sqrt())
}

pub fn thresholds(p: &ModelParams) -> Result<Thresholds> {
    require_positive("a", p.saturation)?;
    require_positive("beta0", p.beta0)?;
    let (a, b, mu, r) = (p.saturation, p.beta0, p.mu_eff(), p.cure_rate);
    let am_r = a * mu + r;
    require_positive("a*mu_eff + r", am_r)?;
    let sr = r.sqrt();
    let phi0 = 1.0 - (a * b - sr).powi(2) / am_r;
    let phi1 = (a * a * b * b + a * mu) / am_r;
    // Δ(A*) = 0 on the branch aβ₀ + A − μ_eff/β₀ = 2√r
    let a_star = 2.0 * sr - a * b + mu / b;
    let hopf_h = hopf_bound(p).and_then(|bound| {
        let denom = r / a + bound;
        (denom > 0.0).then(|| b * p.capacity / denom)
    });
    Ok(Thresholds {
        r0: basic_reproduction_number(p)?,
        phi0,
        phi1,
        hopf_h,
        a_star,
        delta: discriminant(p)?,
    })
}

fn residual(point: State2, p: &ModelParams) -> f64 {
    field_reduced(point, 0.0, &autonomous(p)).norm_inf()
}

fn autonomous(p: &ModelParams) -> ModelParams {
    let mut q = p.clone();
    q.gamma = 0.0;
    q
}

fn stability_of(j: &Mat2, eigenvalues: &[Complex64; 2]) -> Stability {
    let tol = EIGEN_TOL * (1.0 + linalg::norm_inf(j));
    let tr = linalg::trace(j);
    let det = linalg::det(j);
    let min_mod = eigenvalues[0].norm().min(eigenvalues[1].norm());
    if min_mod < tol {
        Stability::Degenerate
    } else if det < 0.0 {
        Stability::Saddle
    } else if tr.abs() < tol {
        Stability::CenterLike
    } else if tr < 0.0 {
        Stability::Sink
    } else {
        Stability::Source
    }
}

fn report(label: EquilibriumLabel, point: State2, p: &ModelParams) -> EquilibriumReport {
    let q = autonomous(p);
    let j = jacobian_reduced(point, 0.0, &q);
    let eigenvalues = linalg::eigenvalues(&j);
    EquilibriumReport {
        label,
        point,
        eigenvalues,
        trace: linalg::trace(&j),
        det: linalg::det(&j),
        stability: stability_of(&j, &eigenvalues),
        admissible: point.i >= 0.0 && point.s >= 0.0 && point.s <= p.capacity,
        residual: residual(point, p),
    }
}

/// Endemic points from the closed form: `(E₃, E₄)` if `Δ > 0`, the doubled
/// point if `Δ ≈ 0`, nothing otherwise.
fn endemic_points(p: &ModelParams) -> Result<Vec<(EquilibriumLabel, State2)>> {
    let delta = discriminant(p)?;
    let (a, b, mu) = (p.saturation, p.beta0, p.mu_eff());
    let sum = a * b + p.capacity + mu / b;
    let scale = (a * b + p.capacity - mu / b).powi(2) + 4.0 * p.cure_rate;
    let point = |s: f64| State2::new(s, (p.capacity - s) / b);
    if delta.abs() <= DELTA_TOL * (1.0 + scale) {
        Ok(vec![(EquilibriumLabel::EStar, point(0.5 * sum))])
    } else if delta > 0.0 {
        let sq = delta.sqrt();
        Ok(vec![
            (EquilibriumLabel::E3, point(0.5 * (sum - sq))),
            (EquilibriumLabel::E4, point(0.5 * (sum + sq))),
        ])
    } else {
        Ok(Vec::new())
    }
}

/// All equilibria of the autonomous reduced system, including endemic
/// points that violate `0 ≤ S ≤ A`, `I ≥ 0` (flagged, not dropped).
pub fn equilibria(p: &ModelParams) -> Result<Vec<EquilibriumReport>> {
    let mut out = vec![
        report(EquilibriumLabel::E1, State2::new(0.0, 0.0), p),
        report(EquilibriumLabel::E2, State2::new(p.capacity, 0.0), p),
    ];
    for (label, pt) in endemic_points(p)? {
        out.push(report(label, pt, p));
    }
    Ok(out)
}

/// Linear stability of an equilibrium of the autonomous system.
pub fn classify_equilibrium(point: State2, p: &ModelParams) -> Result<EquilibriumReport> {
    let res = residual(point, p);
    if !(res < RESIDUAL_TOL * (1.0 + point.norm_inf())) {
        return Err(Error::NotAnEquilibrium { residual: res });
    }
    let near = |q: State2| {
        let d = (q.s - point.s).abs().max((q.i - point.i).abs());
        d <= 1e-9 * (1.0 + q.norm_inf())
    };
    let mut label = EquilibriumLabel::Other;
    if near(State2::new(0.0, 0.0)) {
        label = EquilibriumLabel::E1;
    } else if near(State2::new(p.capacity, 0.0)) {
        label = EquilibriumLabel::E2;
    } else if p.beta0 > 0.0 {
        if let Some((l, _)) = endemic_points(p)?.into_iter().find(|(_, q)| near(*q)) {
            label = l;
        }
    }
    Ok(report(label, point, p))
}

/// `(tr J(E₃), det J(E₃))` from the closed forms
/// `tr = [(β₀−1)S₃I₃ − μ_eff I₃ − aS₃]/(a+I₃)` and
/// `det = S₃I₃(β₀² − r/(a+I₃)²)`.
pub fn trace_det_e3(p: &ModelParams) -> Result<(f64, f64)> {
    let delta = discriminant(p)?;
    if !(delta > 0.0) {
        return Err(Error::NoEndemicEquilibria { delta });
    }
    let (a, b, mu, r) = (p.saturation, p.beta0, p.mu_eff(), p.cure_rate);
    let s3 = 0.5 * (a * b + p.capacity + mu / b - delta.sqrt());
    let i3 = (p.capacity - s3) / b;
    let ai = a + i3;
    let trace = ((b - 1.0) * s3 * i3 - mu * i3 - a * s3) / ai;
    let det = s3 * i3 * (b * b - r / (ai * ai));
    Ok((trace, det))
}

/// Analytic gradient of `φ₀` with respect to `(a, β₀, μ_eff, r)`; requires
/// `aβ₀ < √r`.
pub fn sensitivity_phi0(p: &ModelParams) -> Result<Phi0Gradient> {
    let (a, b, mu, r) = (p.saturation, p.beta0, p.mu_eff(), p.cure_rate);
    let sr = r.sqrt();
    if !(sr - a * b > 0.0) {
        return Err(Error::Precondition(format!(
            "sensitivity needs a*beta0 < sqrt(r) ({} >= {})",
            a * b,
            sr
        )));
    }
    let am_r = a * mu + r;
    let gap = sr - a * b;
    Ok(Phi0Gradient {
        a: gap * (a * b * mu + sr * mu + 2.0 * b * r) / (am_r * am_r),
        beta0: 2.0 * a * gap / am_r,
        mu: gap * gap * a / (am_r * am_r),
        r: -a * gap * (sr * b + mu) / (am_r * am_r * sr),
    })
}

/// `β₀ > 1` and `μ_eff ≤ A(β₀−1) + aβ₀ − 2√(β₀(β₀−1)aA)`.
pub fn hopf_condition(p: &ModelParams) -> HopfCondition {
    match hopf_bound(p) {
        Some(bound) => {
            let margin = bound - p.mu_eff();
            HopfCondition {
                holds: margin >= 0.0,
                margin: Some(margin),
            }
        }
        None => HopfCondition {
            holds: false,
            margin: None,
        },
    }
}

/// Regime label from the ordering of `R₀` against `φ₀`, `H` and `1`.
pub fn detect_regime(p: &ModelParams) -> Result<Regime> {
    let th = thresholds(p)?;
    let r0 = th.r0;
    let tie = |x: f64| (r0 - x).abs() <= TIE_TOL * (1.0 + x.abs());
    let mut degenerate = tie(1.0) || tie(th.phi0);
    let tag = if r0 >= 1.0 {
        RegimeTag::SupercriticalR0
    } else if r0 < th.phi0 {
        RegimeTag::DiseaseFreeGlobal
    } else {
        match th.hopf_h {
            Some(h) => {
                degenerate |= tie(h);
                if r0 < h {
                    RegimeTag::BistableSink
                } else {
                    RegimeTag::LimitCycle
                }
            }
            None => {
                let e3 = equilibria(p)?
                    .into_iter()
                    .find(|e| matches!(e.label, EquilibriumLabel::E3 | EquilibriumLabel::EStar));
                match e3 {
                    Some(e) if e.stability == Stability::Source => RegimeTag::LimitCycle,
                    _ => RegimeTag::BistableSink,
                }
            }
        }
    };
    Ok(Regime {
        tag,
        degenerate,
        thresholds: th,
    })
}

/// Backward-bifurcation parameter set: `aβ₀ < √r`, `φ₀ < R₀ < 1`, `β₀ < 1`.
pub fn in_u1(p: &ModelParams) -> bool {
    match thresholds(p) {
        Ok(th) => {
            p.saturation * p.beta0 < p.cure_rate.sqrt()
                && th.phi0 < th.r0
                && th.r0 < 1.0
                && p.beta0 < 1.0
        }
        Err(_) => false,
    }
}

/// Periodic-solution parameter set: Hopf condition and `φ₀ < R₀ < 1`.
pub fn in_u2(p: &ModelParams) -> bool {
    match thresholds(p) {
        Ok(th) => hopf_condition(p).holds && th.phi0 < th.r0 && th.r0 < 1.0,
        Err(_) => false,
    }
}

/// The endemic sink `E₃`, if it exists (used to seed cycle searches).
pub fn endemic_e3(p: &ModelParams) -> Result<Option<State2>> {
    Ok(endemic_points(p)?
        .into_iter()
        .find(|(l, _)| matches!(l, EquilibriumLabel::E3 | EquilibriumLabel::EStar))
        .map(|(_, q)| q))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub params: ModelParams,
    pub thresholds: Thresholds,
    pub equilibria: Vec<EquilibriumReport>,
    pub regime: Regime,
    pub hopf: HopfCondition,
}

/// Everything the `analyze` command reports.
pub fn analyze(p: &ModelParams) -> Result<AnalysisReport> {
    Ok(AnalysisReport {
        params: p.clone(),
        thresholds: thresholds(p)?,
        equilibria: equilibria(p)?,
        regime: detect_regime(p)?,
        hopf: hopf_condition(p),
    })
}

impl AnalysisReport {
    pub const CSV_HEADER: [&'static str; 14] = [
        "A",
        "a",
        "r",
        "beta0",
        "mu_eff",
        "r0",
        "phi0",
        "phi1",
        "hopf_h",
        "a_star",
        "delta",
        "n_endemic",
        "e3_stability",
        "regime",
    ];

    /// One flat row for sweep post-processing.
    pub fn csv_row(&self) -> Vec<String> {
        let p = &self.params;
        let th = &self.thresholds;
        let endemic: Vec<_> = self
            .equilibria
            .iter()
            .filter(|e| !matches!(e.label, EquilibriumLabel::E1 | EquilibriumLabel::E2))
            .collect();
        let e3 = endemic
            .first()
            .map(|e| format!("{:?}", e.stability).to_lowercase())
            .unwrap_or_default();
        vec![
            p.capacity.to_string(),
            p.saturation.to_string(),
            p.cure_rate.to_string(),
            p.beta0.to_string(),
            p.mu_eff().to_string(),
            th.r0.to_string(),
            th.phi0.to_string(),
            th.phi1.to_string(),
            th.hopf_h.map(|h| h.to_string()).unwrap_or_default(),
            th.a_star.to_string(),
            th.delta.to_string(),
            endemic.len().to_string(),
            e3,
            format!("{:?}", self.regime.tag),
        ]
    }
}
