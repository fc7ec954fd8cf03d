//! Parameters, phase-space types, the seasonal forcing and the three vector
//! fields of the model:
//!
//! * full:     `Ṡ = S(A−S) − β(t)IS`, `İ = β(t)IS − (μ+d)I − rI/(a+I)`, `Ṙ = rI/(a+I) − μR`
//! * reduced:  the `(S, I)` block with `μ_eff = μ + d`
//! * extended: the reduced field made autonomous with a phase `θ`, `θ̇ = ω`
//!
//! where `β(t) = β₀(1 + γΦ(ωt))`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{Linearized, VectorField};
use crate::linalg::Mat2;

/// Periodic shape function `Φ` of the transmission rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Forcing {
    /// `Φ(s) = offset + amplitude·cos(s)`, period `2π`.
    Cosine { offset: f64, amplitude: f64 },
    /// Equally spaced samples over one period, interpolated by the
    /// trigonometric polynomial through them (smooth and periodic).
    #[serde(alias = "user_table")]
    Table(TableForcing),
}

impl Default for Forcing {
    fn default() -> Self {
        Forcing::Cosine {
            offset: 1.0,
            amplitude: 0.5,
        }
    }
}

impl Forcing {
    pub fn cosine(offset: f64, amplitude: f64) -> Result<Self> {
        let f = Forcing::Cosine { offset, amplitude };
        f.validate()?;
        Ok(f)
    }

    pub fn table(period: f64, samples: Vec<f64>) -> Result<Self> {
        let f = Forcing::Table(TableForcing::new(period, samples)?);
        f.validate()?;
        Ok(f)
    }

    pub fn period(&self) -> f64 {
        match self {
            Forcing::Cosine { .. } => TAU,
            Forcing::Table(t) => t.period,
        }
    }

    /// `Φ(s)` without validation.
    #[inline]
    pub fn value(&self, s: f64) -> f64 {
        match self {
            Forcing::Cosine { offset, amplitude } => offset + amplitude * s.cos(),
            Forcing::Table(t) => t.eval(s).0,
        }
    }

    /// `Φ'(s)`.
    #[inline]
    pub fn derivative(&self, s: f64) -> f64 {
        match self {
            Forcing::Cosine { amplitude, .. } => -amplitude * s.sin(),
            Forcing::Table(t) => t.eval(s).1,
        }
    }

    /// Minimum of `Φ` over one period (exact for the cosine, sampled densely
    /// for tables).
    pub fn minimum(&self) -> f64 {
        match self {
            Forcing::Cosine { offset, amplitude } => offset - amplitude.abs(),
            Forcing::Table(t) => dense_grid(t.period)
                .map(|s| t.eval(s).0)
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Maximum of `Φ` over one period.
    pub fn maximum(&self) -> f64 {
        match self {
            Forcing::Cosine { offset, amplitude } => offset + amplitude.abs(),
            Forcing::Table(t) => dense_grid(t.period)
                .map(|s| t.eval(s).0)
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Checks strict positivity and the presence of at least two
    /// nondegenerate critical points per period.
    pub fn validate(&self) -> Result<()> {
        match self {
            Forcing::Cosine { offset, amplitude } => {
                if !offset.is_finite() || !amplitude.is_finite() {
                    return Err(Error::InvalidForcing("non-finite coefficient".into()));
                }
                if *amplitude == 0.0 {
                    return Err(Error::InvalidForcing(
                        "constant forcing has no nondegenerate critical points".into(),
                    ));
                }
            }
            Forcing::Table(t) => {
                if !(t.period > 0.0) || !t.period.is_finite() {
                    return Err(Error::InvalidForcing("table period must be > 0".into()));
                }
                // sign changes of Φ' around the circle, ignoring exact zeros
                let signs: Vec<bool> = dense_grid(t.period)
                    .map(|s| t.eval(s).1)
                    .filter(|d| d.abs() > 1e-12)
                    .map(|d| d > 0.0)
                    .collect();
                let sign_changes = signs
                    .iter()
                    .zip(signs.iter().cycle().skip(1))
                    .filter(|(a, b)| a != b)
                    .count();
                if sign_changes < 2 {
                    return Err(Error::InvalidForcing(
                        "table needs at least two nondegenerate critical points".into(),
                    ));
                }
            }
        }
        let min = self.minimum();
        if !(min > 0.0) {
            return Err(Error::InvalidForcing(format!(
                "forcing must be strictly positive (minimum {min})"
            )));
        }
        Ok(())
    }
}

fn dense_grid(period: f64) -> impl Iterator<Item = f64> {
    const N: usize = 4096;
    (0..N).map(move |k| period * k as f64 / N as f64)
}

/// Trigonometric interpolant through equally spaced samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableSpec", into = "TableSpec")]
pub struct TableForcing {
    period: f64,
    samples: Vec<f64>,
    mean: f64,
    cos: Vec<f64>,
    sin: Vec<f64>,
    nyquist: f64,
}

#[derive(Serialize, Deserialize)]
struct TableSpec {
    period: f64,
    samples: Vec<f64>,
}

impl TryFrom<TableSpec> for TableForcing {
    type Error = Error;
    fn try_from(spec: TableSpec) -> Result<Self> {
        TableForcing::new(spec.period, spec.samples)
    }
}

impl From<TableForcing> for TableSpec {
    fn from(t: TableForcing) -> Self {
        TableSpec {
            period: t.period,
            samples: t.samples,
        }
    }
}

impl TableForcing {
    pub fn new(period: f64, samples: Vec<f64>) -> Result<Self> {
        let n = samples.len();
        if n < 3 {
            return Err(Error::InvalidForcing(
                "table forcing needs at least 3 samples".into(),
            ));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidForcing("non-finite table sample".into()));
        }
        let nf = n as f64;
        let mean = samples.iter().sum::<f64>() / nf;
        let kmax = (n - 1) / 2;
        let mut cos = Vec::with_capacity(kmax);
        let mut sin = Vec::with_capacity(kmax);
        for k in 1..=kmax {
            let (mut c, mut s) = (0.0, 0.0);
            for (j, v) in samples.iter().enumerate() {
                let arg = TAU * (k * j) as f64 / nf;
                c += v * arg.cos();
                s += v * arg.sin();
            }
            cos.push(2.0 * c / nf);
            sin.push(2.0 * s / nf);
        }
        let nyquist = if n.is_multiple_of(2) {
            samples
                .iter()
                .enumerate()
                .map(|(j, v)| if j % 2 == 0 { *v } else { -*v })
                .sum::<f64>()
                / nf
        } else {
            0.0
        };
        Ok(TableForcing {
            period,
            samples,
            mean,
            cos,
            sin,
            nyquist,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Value and derivative at `s`.
    fn eval(&self, s: f64) -> (f64, f64) {
        let w = TAU / self.period;
        let mut v = self.mean;
        let mut d = 0.0;
        for (k, (c, sn)) in self.cos.iter().zip(&self.sin).enumerate() {
            let kw = (k + 1) as f64 * w;
            let (si, co) = (kw * s).sin_cos();
            v += c * co + sn * si;
            d += kw * (-c * si + sn * co);
        }
        if self.nyquist != 0.0 {
            let kw = (self.samples.len() / 2) as f64 * w;
            let (si, co) = (kw * s).sin_cos();
            v += self.nyquist * co;
            d -= self.nyquist * kw * si;
        }
        (v, d)
    }
}

/// Model parameters. Serialized keys follow the usual notation
/// (`A, r, beta0, a, mu, d, gamma, omega, forcing`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Carrying capacity of the susceptible population.
    #[serde(rename = "A")]
    pub capacity: f64,
    /// Cure rate.
    #[serde(rename = "r")]
    pub cure_rate: f64,
    /// Transmission rate without seasonality.
    pub beta0: f64,
    /// Treatment saturation (delay in the response).
    #[serde(rename = "a")]
    pub saturation: f64,
    /// Natural death rate.
    pub mu: f64,
    /// Disease-induced death rate.
    #[serde(rename = "d", default)]
    pub disease_death: f64,
    /// Seasonal amplitude.
    #[serde(default)]
    pub gamma: f64,
    /// Seasonal angular frequency.
    #[serde(default = "default_omega")]
    pub omega: f64,
    #[serde(default)]
    pub forcing: Forcing,
}

fn default_omega() -> f64 {
    1.0
}

impl ModelParams {
    /// Autonomous parameters with the default forcing shape, `d = 0`,
    /// `γ = 0` and `ω = 1`.
    pub fn new(capacity: f64, saturation: f64, cure_rate: f64, beta0: f64, mu: f64) -> Self {
        ModelParams {
            capacity,
            cure_rate,
            beta0,
            saturation,
            mu,
            disease_death: 0.0,
            gamma: 0.0,
            omega: 1.0,
            forcing: Forcing::default(),
        }
    }

    pub fn with_forcing(mut self, gamma: f64, omega: f64) -> Self {
        self.gamma = gamma;
        self.omega = omega;
        self
    }

    /// Death rate of infected individuals used by the reduced system.
    #[inline]
    pub fn mu_eff(&self) -> f64 {
        self.mu + self.disease_death
    }

    /// Period of the forcing in time units.
    pub fn forcing_period(&self) -> f64 {
        self.forcing.period() / self.omega
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("A", self.capacity),
            ("r", self.cure_rate),
            ("beta0", self.beta0),
            ("a", self.saturation),
            ("mu", self.mu),
            ("d", self.disease_death),
            ("gamma", self.gamma),
            ("omega", self.omega),
        ];
        for (name, v) in named {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParams(format!(
                    "{name} must be finite and nonnegative (got {v})"
                )));
            }
        }
        if self.saturation <= 0.0 {
            return Err(Error::InvalidParams("a must be > 0".into()));
        }
        if self.beta0 <= 0.0 {
            return Err(Error::InvalidParams("beta0 must be > 0".into()));
        }
        if self.omega <= 0.0 {
            return Err(Error::InvalidParams("omega must be > 0".into()));
        }
        if self.gamma >= 1.0 {
            return Err(Error::InvalidParams(format!(
                "gamma must lie in [0, 1) (got {})",
                self.gamma
            )));
        }
        self.forcing.validate()?;
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let p: ModelParams = toml::from_str(s).map_err(|e| Error::Config(format!("toml: {e}")))?;
        p.validate()?;
        Ok(p)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let p: ModelParams =
            serde_json::from_str(s).map_err(|e| Error::Config(format!("json: {e}")))?;
        p.validate()?;
        Ok(p)
    }

    /// Loads a parameter table; `.json` files are parsed as JSON, anything
    /// else as TOML.
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let is_json = path
            .extension()
            .map(|e| e.eq_ignore_ascii_case("json"))
            .unwrap_or(false);
        let parsed = if is_json {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        };
        parsed.map_err(|e| Error::format(path, e))
    }
}

/// Reference parameter sets.
pub mod presets {
    use super::ModelParams;

    /// `A=0.96, a=0.02, r=0.25, β₀=0.8, μ=0.2`: only the disease-free
    /// equilibria exist and `E₂` attracts.
    pub fn disease_free() -> ModelParams {
        ModelParams::new(0.96, 0.02, 0.25, 0.8, 0.2)
    }

    /// `A=0.96, a=0.14, r=0.25, β₀=2, μ=0.2`: backward-bifurcation regime
    /// with `R₀ < 1`, two endemic equilibria, and `E₃` a weakly attracting
    /// focus just before its Hopf bifurcation (at `μ ≈ 0.19938`).
    pub fn near_hopf() -> ModelParams {
        ModelParams::new(0.96, 0.14, 0.25, 2.0, 0.2)
    }

    /// [`near_hopf`] with `μ = 0.19`: past the Hopf point, `E₃` is a source
    /// surrounded by an attracting limit cycle while `R₀ < 1`.
    pub fn post_hopf() -> ModelParams {
        ModelParams::new(0.96, 0.14, 0.25, 2.0, 0.19)
    }

    /// [`near_hopf`] with `μ = 0.21`, above the Hopf bound: `E₃` is a sink.
    pub fn bistable() -> ModelParams {
        ModelParams::new(0.96, 0.14, 0.25, 2.0, 0.21)
    }
}

/// Point of the reduced phase plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State2 {
    pub s: f64,
    pub i: f64,
}

/// Point of the full phase space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State3 {
    pub s: f64,
    pub i: f64,
    pub r: f64,
}

/// Point of the extended (autonomous) phase space; `theta` is cyclic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateExt {
    pub s: f64,
    pub i: f64,
    pub theta: f64,
}

impl State2 {
    pub const fn new(s: f64, i: f64) -> Self {
        State2 { s, i }
    }
    pub fn to_array(self) -> [f64; 2] {
        [self.s, self.i]
    }
    pub fn norm_inf(self) -> f64 {
        self.s.abs().max(self.i.abs())
    }
}

impl State3 {
    pub const fn new(s: f64, i: f64, r: f64) -> Self {
        State3 { s, i, r }
    }
    pub fn to_array(self) -> [f64; 3] {
        [self.s, self.i, self.r]
    }
    pub fn total(self) -> f64 {
        self.s + self.i + self.r
    }
}

impl StateExt {
    pub const fn new(s: f64, i: f64, theta: f64) -> Self {
        StateExt { s, i, theta }
    }
    pub fn to_array(self) -> [f64; 3] {
        [self.s, self.i, self.theta]
    }
}

impl From<[f64; 2]> for State2 {
    fn from(x: [f64; 2]) -> Self {
        State2 { s: x[0], i: x[1] }
    }
}

impl From<[f64; 3]> for State3 {
    fn from(x: [f64; 3]) -> Self {
        State3 {
            s: x[0],
            i: x[1],
            r: x[2],
        }
    }
}

impl From<[f64; 3]> for StateExt {
    fn from(x: [f64; 3]) -> Self {
        StateExt {
            s: x[0],
            i: x[1],
            theta: x[2],
        }
    }
}

/// `Φ(s)`, rejecting forcings that are not strictly positive.
pub fn forcing_value(forcing: &Forcing, s: f64) -> Result<f64> {
    forcing.validate()?;
    Ok(forcing.value(s))
}

/// Transmission rate at phase `θ`: `β₀(1 + γΦ(θ))`.
#[inline]
pub fn beta_at_phase(params: &ModelParams, theta: f64) -> f64 {
    if params.gamma == 0.0 {
        params.beta0
    } else {
        params.beta0 * (1.0 + params.gamma * params.forcing.value(theta))
    }
}

/// Transmission rate at time `t`: `β₀(1 + γΦ(ωt))`.
#[inline]
pub fn beta_gamma(params: &ModelParams, t: f64) -> f64 {
    beta_at_phase(params, params.omega * t)
}

#[inline]
fn saturated_cure(params: &ModelParams, i: f64) -> f64 {
    params.cure_rate * i / (params.saturation + i)
}

#[inline]
fn reduced_with_beta(x: State2, beta: f64, params: &ModelParams) -> State2 {
    let State2 { s, i } = x;
    let contact = beta * i * s;
    State2 {
        s: s * (params.capacity - s) - contact,
        i: contact - params.mu_eff() * i - saturated_cure(params, i),
    }
}

/// Full field; `I` dies at `μ + d`, `R` at `μ`.
pub fn field_full(x: State3, t: f64, params: &ModelParams) -> State3 {
    let beta = beta_gamma(params, t);
    let State3 { s, i, r } = x;
    let contact = beta * i * s;
    let cure = saturated_cure(params, i);
    State3 {
        s: s * (params.capacity - s) - contact,
        i: contact - (params.mu + params.disease_death) * i - cure,
        r: cure - params.mu * r,
    }
}

/// `(S, I)` field with `μ_eff = μ + d`.
pub fn field_reduced(x: State2, t: f64, params: &ModelParams) -> State2 {
    reduced_with_beta(x, beta_gamma(params, t), params)
}

/// Autonomous extension; the transmission rate is evaluated at the phase
/// `θ` rather than at `ωt`.
pub fn field_extended(x: StateExt, params: &ModelParams) -> StateExt {
    let d = reduced_with_beta(
        State2::new(x.s, x.i),
        beta_at_phase(params, x.theta),
        params,
    );
    StateExt {
        s: d.s,
        i: d.i,
        theta: params.omega,
    }
}

fn jacobian_with_beta(x: State2, beta: f64, params: &ModelParams) -> Mat2 {
    let State2 { s, i } = x;
    let a = params.saturation;
    [
        [-beta * i + params.capacity - 2.0 * s, -beta * s],
        [
            beta * i,
            beta * s - params.mu_eff() - params.cure_rate * a / ((a + i) * (a + i)),
        ],
    ]
}

/// Analytic Jacobian of [`field_reduced`].
pub fn jacobian_reduced(x: State2, t: f64, params: &ModelParams) -> Mat2 {
    jacobian_with_beta(x, beta_gamma(params, t), params)
}

/// Jacobian of [`field_extended`] (3×3, last row zero).
pub fn jacobian_extended(x: StateExt, params: &ModelParams) -> [[f64; 3]; 3] {
    let j = jacobian_with_beta(
        State2::new(x.s, x.i),
        beta_at_phase(params, x.theta),
        params,
    );
    let dbeta = params.beta0 * params.gamma * params.forcing.derivative(x.theta);
    let cross = dbeta * x.i * x.s;
    [
        [j[0][0], j[0][1], -cross],
        [j[1][0], j[1][1], cross],
        [0.0, 0.0, 0.0],
    ]
}

/// Distance from a full-system state to the positively invariant region
/// `{0 ≤ S ≤ A, I, R ≥ 0, S+I+R ≤ A(μ+A)/μ}` (natural death `μ`).
pub fn invariant_region_violation(x: State3, params: &ModelParams) -> f64 {
    let bound = if params.mu > 0.0 {
        params.capacity * (params.mu + params.capacity) / params.mu
    } else {
        f64::INFINITY
    };
    [-x.s, x.s - params.capacity, -x.i, -x.r, x.total() - bound]
        .into_iter()
        .fold(0.0, f64::max)
}

fn planar_violation(s: f64, i: f64, capacity: f64) -> f64 {
    [-s, s - capacity, -i].into_iter().fold(0.0, f64::max)
}

/// Full `(S, I, R)` system as an integrable vector field.
#[derive(Debug, Clone)]
pub struct FullSystem {
    pub params: ModelParams,
}

/// Reduced non-autonomous `(S, I)` system.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub params: ModelParams,
}

/// Extended `(S, I, θ)` system; `θ` is wrapped into one forcing period
/// after every step.
#[derive(Debug, Clone)]
pub struct ExtendedSystem {
    pub params: ModelParams,
}

macro_rules! checked_new {
    ($t:ident) => {
        impl $t {
            pub fn new(params: &ModelParams) -> Result<Self> {
                params.validate()?;
                Ok($t {
                    params: params.clone(),
                })
            }
        }
    };
}
checked_new!(FullSystem);
checked_new!(ReducedSystem);
checked_new!(ExtendedSystem);

impl VectorField<3> for FullSystem {
    fn eval(&self, t: f64, x: &[f64; 3]) -> [f64; 3] {
        field_full(State3::from(*x), t, &self.params).to_array()
    }

    fn region_violation(&self, x: &[f64; 3]) -> f64 {
        invariant_region_violation(State3::from(*x), &self.params)
    }
}

impl VectorField<2> for ReducedSystem {
    #[inline]
    fn eval(&self, t: f64, x: &[f64; 2]) -> [f64; 2] {
        field_reduced(State2::from(*x), t, &self.params).to_array()
    }

    fn region_violation(&self, x: &[f64; 2]) -> f64 {
        planar_violation(x[0], x[1], self.params.capacity)
    }
}

impl Linearized for ReducedSystem {
    #[inline]
    fn jacobian(&self, t: f64, x: &[f64; 2]) -> Mat2 {
        jacobian_reduced(State2::from(*x), t, &self.params)
    }
}

impl VectorField<3> for ExtendedSystem {
    fn eval(&self, _t: f64, x: &[f64; 3]) -> [f64; 3] {
        field_extended(StateExt::from(*x), &self.params).to_array()
    }

    fn normalize(&self, x: &mut [f64; 3]) {
        x[2] = x[2].rem_euclid(self.params.forcing.period());
    }

    fn region_violation(&self, x: &[f64; 3]) -> f64 {
        planar_violation(x[0], x[1], self.params.capacity)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn cosine_forcing_values() {
        let f = Forcing::cosine(1.0, 0.5).unwrap();
        assert_eq!(forcing_value(&f, 0.0).unwrap(), 1.5);
        assert!((forcing_value(&f, PI).unwrap() - 0.5).abs() < 1e-15);
        assert!((forcing_value(&f, 2.0 * PI).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn nonpositive_forcing_rejected() {
        assert!(Forcing::cosine(0.5, 0.5).is_err());
        assert!(Forcing::cosine(0.4, -0.5).is_err());
        let bad = Forcing::Cosine {
            offset: 1.0,
            amplitude: 2.0,
        };
        assert!(matches!(
            forcing_value(&bad, 0.0),
            Err(Error::InvalidForcing(_))
        ));
    }

    #[test]
    fn constant_forcing_lacks_critical_points() {
        assert!(Forcing::cosine(1.0, 0.0).is_err());
    }

    #[test]
    fn table_forcing_interpolates_samples() {
        let n = 16;
        let samples: Vec<f64> = (0..n)
            .map(|j| 1.0 + 0.5 * (TAU * j as f64 / n as f64).cos())
            .collect();
        let f = Forcing::table(TAU, samples.clone()).unwrap();
        for (j, v) in samples.iter().enumerate() {
            let s = TAU * j as f64 / n as f64;
            assert!((f.value(s) - v).abs() < 1e-12);
        }
        // band-limited input is reproduced everywhere
        for s in [0.1, 1.3, 2.9, 5.5] {
            assert!((f.value(s) - (1.0 + 0.5 * s.cos())).abs() < 1e-12);
            assert!((f.derivative(s) + 0.5 * s.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn table_forcing_must_be_positive() {
        assert!(Forcing::table(1.0, vec![1.0, -0.2, 1.0, 0.5]).is_err());
    }

    #[test]
    fn beta_without_seasonality() {
        let mut p = presets::near_hopf();
        p.beta0 = 2.0;
        for t in [0.0, 1.0, 17.3] {
            assert_eq!(beta_gamma(&p, t), 2.0);
        }
    }

    #[test]
    fn beta_with_seasonality() {
        let p = presets::near_hopf().with_forcing(0.1, 1.0);
        assert!((beta_gamma(&p, 0.0) - 2.3).abs() < 1e-15);
        let p = presets::near_hopf().with_forcing(0.1, 2.0);
        assert!((beta_gamma(&p, PI) - 2.3).abs() < 1e-14);
    }

    #[test]
    fn full_field_examples() {
        let p = presets::near_hopf();
        let z = field_full(State3::new(p.capacity, 0.0, 0.0), 0.0, &p);
        assert_eq!(z, State3::new(0.0, 0.0, 0.0));
        let z = field_full(State3::new(0.0, 0.0, 0.0), 0.0, &p);
        assert_eq!(z, State3::new(0.0, 0.0, 0.0));

        // independent arithmetic at (0.5, 0.1, 0)
        let d = field_full(State3::new(0.5, 0.1, 0.0), 0.0, &p);
        let cure = 0.25 * 0.1 / 0.24;
        assert!((d.s - 0.13).abs() < 1e-15);
        assert!((d.i - (0.1 - 0.02 - cure)).abs() < 1e-15);
        assert!((d.i - (-0.024_166_666_666_666_67)).abs() < 1e-12);
        assert!((d.r - cure).abs() < 1e-15);
    }

    #[test]
    fn reduced_field_drops_recovered() {
        let p = presets::near_hopf();
        let d = field_reduced(State2::new(0.5, 0.1), 0.0, &p);
        assert!((d.s - 0.13).abs() < 1e-15);
        assert!((d.i + 0.024_166_666_666_666_67).abs() < 1e-12);
        assert_eq!(
            field_reduced(State2::new(p.capacity, 0.0), 3.0, &p),
            State2::new(0.0, 0.0)
        );
    }

    #[test]
    fn full_keeps_death_rates_separate() {
        let mut p = presets::near_hopf();
        p.mu = 0.15;
        p.disease_death = 0.05;
        let x = State3::new(0.5, 0.1, 0.2);
        let full = field_full(x, 0.0, &p);
        let red = field_reduced(State2::new(0.5, 0.1), 0.0, &p);
        assert!((full.i - red.i).abs() < 1e-15);
        assert!((full.r - (0.25 * 0.1 / 0.24 - 0.15 * 0.2)).abs() < 1e-15);
    }

    #[test]
    fn extended_field_examples() {
        let p = presets::near_hopf();
        let d = field_extended(StateExt::new(0.5, 0.1, 1.0), &p);
        let r = field_reduced(State2::new(0.5, 0.1), 0.0, &p);
        assert_eq!((d.s, d.i, d.theta), (r.s, r.i, p.omega));

        let q = presets::near_hopf().with_forcing(0.05, 5.0);
        for th in [0.0, 1.0, 4.0] {
            let d = field_extended(StateExt::new(q.capacity, 0.0, th), &q);
            assert_eq!((d.s, d.i, d.theta), (0.0, 0.0, 5.0));
        }
        let d = field_extended(StateExt::new(0.5, 0.1, 0.0), &q);
        let beta = 2.0 * (1.0 + 0.05 * 1.5);
        assert!((d.s - (0.5 * 0.46 - beta * 0.05)).abs() < 1e-15);
        assert!((d.i - (beta * 0.05 - 0.02 - 0.25 * 0.1 / 0.24)).abs() < 1e-15);
        assert_eq!(d.theta, 5.0);
    }

    #[test]
    fn jacobian_at_disease_free_points() {
        let p = presets::near_hopf();
        let j1 = jacobian_reduced(State2::new(0.0, 0.0), 0.0, &p);
        assert_eq!(j1[0], [0.96, 0.0]);
        assert_eq!(j1[1][0], 0.0);
        assert!((j1[1][1] - (-0.2 - 0.25 / 0.14)).abs() < 1e-14);

        let j2 = jacobian_reduced(State2::new(0.96, 0.0), 0.0, &p);
        assert!((j2[0][0] + 0.96).abs() < 1e-15);
        assert!((j2[0][1] + 2.0 * 0.96).abs() < 1e-15);
        assert_eq!(j2[1][0], 0.0);
        assert!((j2[1][1] - (1.92 - 0.2 - 0.25 / 0.14)).abs() < 1e-14);
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let p = presets::near_hopf().with_forcing(0.1, 3.0);
        let x = State2::new(0.5, 0.1);
        let t = 0.7;
        let j = jacobian_reduced(x, t, &p);
        let h = 1e-6;
        for col in 0..2 {
            let mut xp = x.to_array();
            let mut xm = x.to_array();
            xp[col] += h;
            xm[col] -= h;
            let fp = field_reduced(xp.into(), t, &p).to_array();
            let fm = field_reduced(xm.into(), t, &p).to_array();
            for row in 0..2 {
                let fd = (fp[row] - fm[row]) / (2.0 * h);
                let scale = j[row][col].abs().max(1e-12);
                assert!((fd - j[row][col]).abs() / scale < 1e-6);
            }
        }
    }

    #[test]
    fn extended_jacobian_phase_column() {
        let p = presets::near_hopf().with_forcing(0.1, 3.0);
        let x = StateExt::new(0.5, 0.1, 0.9);
        let j = jacobian_extended(x, &p);
        let h = 1e-6;
        let fp = field_extended(StateExt::new(0.5, 0.1, 0.9 + h), &p);
        let fm = field_extended(StateExt::new(0.5, 0.1, 0.9 - h), &p);
        assert!(((fp.s - fm.s) / (2.0 * h) - j[0][2]).abs() < 1e-8);
        assert!(((fp.i - fm.i) / (2.0 * h) - j[1][2]).abs() < 1e-8);
    }

    #[test]
    fn params_roundtrip_toml_keys() {
        let text = r#"
            A = 0.96
            r = 0.25
            beta0 = 2.0
            a = 0.14
            mu = 0.2
            d = 0.0
            gamma = 0.05
            omega = 5.0
            forcing = { type = "cosine", offset = 1.0, amplitude = 0.5 }
        "#;
        let p = ModelParams::from_toml_str(text).unwrap();
        assert_eq!(p.capacity, 0.96);
        assert_eq!(p.saturation, 0.14);
        assert_eq!(p.omega, 5.0);
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.contains("\"A\":0.96"));
        assert_eq!(ModelParams::from_json_str(&json).unwrap(), p);
    }

    #[test]
    fn table_forcing_roundtrips_through_json() {
        let text = r#"{"A":0.96,"r":0.25,"beta0":2.0,"a":0.14,"mu":0.2,
            "forcing":{"type":"table","period":6.283185307179586,"samples":[1.5,1.0,0.5,1.0]}}"#;
        let p = ModelParams::from_json_str(text).unwrap();
        let back = serde_json::to_string(&p).unwrap();
        assert!(back.contains("\"samples\":[1.5,1.0,0.5,1.0]"));
        assert!(!back.contains("nyquist"));
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = presets::near_hopf();
        p.saturation = 0.0;
        assert!(p.validate().is_err());
        let mut p = presets::near_hopf();
        p.gamma = 1.0;
        assert!(p.validate().is_err());
        let mut p = presets::near_hopf();
        p.mu = -0.1;
        assert!(p.validate().is_err());
        let mut p = presets::near_hopf();
        p.omega = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn extended_system_wraps_phase() {
        let sys = ExtendedSystem::new(&presets::near_hopf()).unwrap();
        let mut x = [0.5, 0.1, 7.0];
        sys.normalize(&mut x);
        assert!((x[2] - (7.0 - TAU)).abs() < 1e-15);
        let mut x = [0.5, 0.1, -0.5];
        sys.normalize(&mut x);
        assert!((x[2] - (TAU - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn region_distance() {
        let p = presets::near_hopf();
        assert_eq!(
            invariant_region_violation(State3::new(0.5, 0.1, 0.1), &p),
            0.0
        );
        assert!((invariant_region_violation(State3::new(1.0, 0.0, 0.0), &p) - 0.04).abs() < 1e-15);
        assert!(
            (invariant_region_violation(State3::new(0.5, -0.01, 0.0), &p) - 0.01).abs() < 1e-15
        );
    }
}
