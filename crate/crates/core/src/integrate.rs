//! Explicit Runge–Kutta integration: classical fixed-step RK4 and the
//! Dormand–Prince 5(4) pair with PI step-size control, plus section
//! crossing location and observed-order estimation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat2;
use crate::model::{ExtendedSystem, FullSystem, ModelParams, ReducedSystem};

/// Right-hand side `ẋ = f(t, x)` on `ℝᴺ`.
pub trait VectorField<const N: usize> {
    fn eval(&self, t: f64, x: &[f64; N]) -> [f64; N];

    /// Maps a freshly stepped state back onto its canonical chart
    /// (e.g. wraps a cyclic coordinate). Called after every accepted step.
    fn normalize(&self, _x: &mut [f64; N]) {}

    /// Distance of `x` to the region the flow is known to preserve; zero
    /// inside.
    fn region_violation(&self, _x: &[f64; N]) -> f64 {
        0.0
    }
}

impl<F: VectorField<N> + ?Sized, const N: usize> VectorField<N> for &F {
    #[inline]
    fn eval(&self, t: f64, x: &[f64; N]) -> [f64; N] {
        (**self).eval(t, x)
    }
    fn normalize(&self, x: &mut [f64; N]) {
        (**self).normalize(x)
    }
    fn region_violation(&self, x: &[f64; N]) -> f64 {
        (**self).region_violation(x)
    }
}

/// A planar field with an analytic Jacobian, the generator of its tangent
/// flow.
pub trait Linearized: VectorField<2> {
    fn jacobian(&self, t: f64, x: &[f64; 2]) -> Mat2;
}

impl<F: Linearized + ?Sized> Linearized for &F {
    #[inline]
    fn jacobian(&self, t: f64, x: &[f64; 2]) -> Mat2 {
        (**self).jacobian(t, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rk4Fixed,
    Rk45Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorOptions {
    pub method: Method,
    /// Step for RK4; initial step for the adaptive method.
    pub dt: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub t_span: (f64, f64),
    /// Record intermediate samples; otherwise only the endpoints are kept.
    pub dense_output: bool,
    /// Keep every `record_stride`-th accepted step.
    pub record_stride: usize,
    pub max_steps: u64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            method: Method::Rk45Adaptive,
            dt: 1e-2,
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            dt_min: 1e-12,
            dt_max: 1.0,
            t_span: (0.0, 100.0),
            dense_output: true,
            record_stride: 1,
            max_steps: 500_000_000,
        }
    }
}

impl IntegratorOptions {
    pub fn rk4(dt: f64, t_span: (f64, f64)) -> Self {
        IntegratorOptions {
            method: Method::Rk4Fixed,
            dt,
            t_span,
            ..Default::default()
        }
    }

    pub fn adaptive(tol: f64, t_span: (f64, f64)) -> Self {
        IntegratorOptions {
            method: Method::Rk45Adaptive,
            abs_tol: tol,
            rel_tol: tol,
            t_span,
            ..Default::default()
        }
    }

    pub fn with_span(mut self, t0: f64, t1: f64) -> Self {
        self.t_span = (t0, t1);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidOptions(m.into()));
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad("dt must be positive");
        }
        if self.method == Method::Rk45Adaptive {
            if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) {
                return bad("tolerances must be positive");
            }
            if !(self.dt_min > 0.0) || !(self.dt_min <= self.dt_max) {
                return bad("need 0 < dt_min <= dt_max");
            }
        }
        let (t0, t1) = self.t_span;
        if !t0.is_finite() || !t1.is_finite() || !(t1 > t0) {
            return bad("t_span must satisfy t0 < t1");
        }
        if self.record_stride == 0 {
            return bad("record_stride must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegrationStats {
    pub steps_accepted: u64,
    pub steps_rejected: u64,
    pub max_invariant_violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
    pub stats: IntegrationStats,
}

impl<const N: usize> Trajectory<N> {
    pub fn final_state(&self) -> [f64; N] {
        *self
            .states
            .last()
            .expect("trajectory has at least one sample")
    }

    pub fn final_time(&self) -> f64 {
        *self
            .times
            .last()
            .expect("trajectory has at least one sample")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[inline]
fn axpy<const N: usize>(x: &[f64; N], terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *x;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += c * k[i];
        }
    }
    out
}

/// One classical RK4 step.
pub fn rk4_step<F: VectorField<N>, const N: usize>(
    field: &F,
    t: f64,
    x: &[f64; N],
    h: f64,
) -> [f64; N] {
    let k1 = field.eval(t, x);
    let k2 = field.eval(t + 0.5 * h, &axpy(x, &[(0.5 * h, &k1)]));
    let k3 = field.eval(t + 0.5 * h, &axpy(x, &[(0.5 * h, &k2)]));
    let k4 = field.eval(t + h, &axpy(x, &[(h, &k3)]));
    let mut out = *x;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// One Dormand–Prince step: returns the 5th-order solution, the embedded
/// error vector and `f(t+h, x_new)`.
fn dp45_step<F: VectorField<N>, const N: usize>(
    field: &F,
    t: f64,
    x: &[f64; N],
    k1: &[f64; N],
    h: f64,
) -> ([f64; N], [f64; N], [f64; N]) {
    let k2 = field.eval(t + C2 * h, &axpy(x, &[(h * A21, k1)]));
    let k3 = field.eval(t + C3 * h, &axpy(x, &[(h * A31, k1), (h * A32, &k2)]));
    let k4 = field.eval(
        t + C4 * h,
        &axpy(x, &[(h * A41, k1), (h * A42, &k2), (h * A43, &k3)]),
    );
    let k5 = field.eval(
        t + C5 * h,
        &axpy(
            x,
            &[
                (h * A51, k1),
                (h * A52, &k2),
                (h * A53, &k3),
                (h * A54, &k4),
            ],
        ),
    );
    let k6 = field.eval(
        t + h,
        &axpy(
            x,
            &[
                (h * A61, k1),
                (h * A62, &k2),
                (h * A63, &k3),
                (h * A64, &k4),
                (h * A65, &k5),
            ],
        ),
    );
    let xn = axpy(
        x,
        &[
            (h * B1, k1),
            (h * B3, &k3),
            (h * B4, &k4),
            (h * B5, &k5),
            (h * B6, &k6),
        ],
    );
    let k7 = field.eval(t + h, &xn);
    let mut err = [0.0; N];
    for i in 0..N {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    (xn, err, k7)
}

/// An accepted step: state before and after, the latter not yet normalized.
#[derive(Debug, Clone, Copy)]
pub struct Step<const N: usize> {
    pub t0: f64,
    pub x0: [f64; N],
    pub t1: f64,
    pub x1: [f64; N],
}

const SAFETY: f64 = 0.9;
const PI_BETA: f64 = 0.04;
const PI_ALPHA: f64 = 0.2 - 0.75 * PI_BETA;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Incremental integrator over one vector field.
pub struct Solver<F, const N: usize> {
    field: F,
    opts: IntegratorOptions,
    t: f64,
    x: [f64; N],
    h: f64,
    err_prev: f64,
    k_first: Option<[f64; N]>,
    stats: IntegrationStats,
}

impl<F: VectorField<N>, const N: usize> Solver<F, N> {
    /// Starts at `opts.t_span.0`; the end of the span is not enforced, use
    /// [`Solver::advance_to`].
    pub fn new(field: F, x0: [f64; N], opts: &IntegratorOptions) -> Result<Self> {
        opts.validate()?;
        let t = opts.t_span.0;
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { t });
        }
        let mut x = x0;
        field.normalize(&mut x);
        let h = match opts.method {
            Method::Rk4Fixed => opts.dt,
            Method::Rk45Adaptive => opts.dt.clamp(opts.dt_min, opts.dt_max),
        };
        let stats = IntegrationStats {
            max_invariant_violation: field.region_violation(&x),
            ..Default::default()
        };
        Ok(Solver {
            field,
            opts: opts.clone(),
            t,
            x,
            h,
            err_prev: 1e-4,
            k_first: None,
            stats,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> [f64; N] {
        self.x
    }

    pub fn stats(&self) -> IntegrationStats {
        self.stats
    }

    pub fn field(&self) -> &F {
        &self.field
    }

    pub fn options(&self) -> &IntegratorOptions {
        &self.opts
    }

    /// Replaces the current state (e.g. after renormalizing a tangent
    /// vector).
    pub fn set_state(&mut self, x: [f64; N]) {
        self.x = x;
        self.k_first = None;
    }

    /// Re-evaluates a partial step of length `tau` from `(t0, x0)` with the
    /// solver's method; used to locate events inside an accepted step.
    pub fn substep(&self, t0: f64, x0: &[f64; N], tau: f64) -> [f64; N] {
        match self.opts.method {
            Method::Rk4Fixed => rk4_step(&self.field, t0, x0, tau),
            Method::Rk45Adaptive => {
                let k1 = self.field.eval(t0, x0);
                dp45_step(&self.field, t0, x0, &k1, tau).0
            }
        }
    }

    /// Takes one accepted step without passing `t_stop`.
    pub fn step(&mut self, t_stop: f64) -> Result<Step<N>> {
        let remaining = t_stop - self.t;
        if !(remaining > 0.0) {
            return Err(Error::InvalidOptions(format!(
                "t_stop {t_stop} is not ahead of t = {}",
                self.t
            )));
        }
        if self.stats.steps_accepted + self.stats.steps_rejected >= self.opts.max_steps {
            return Err(Error::InvalidOptions(format!(
                "max_steps {} exhausted at t = {}",
                self.opts.max_steps, self.t
            )));
        }
        let t0 = self.t;
        let x0 = self.x;
        let (t1, x1) = match self.opts.method {
            Method::Rk4Fixed => {
                // land exactly on t_stop when the remainder is (nearly) a full step
                let h = if remaining <= self.h * (1.0 + 1e-12) {
                    remaining
                } else {
                    self.h
                };
                let x1 = rk4_step(&self.field, t0, &x0, h);
                if x1.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteState { t: t0 + h });
                }
                let t1 = if h == remaining { t_stop } else { t0 + h };
                (t1, x1)
            }
            Method::Rk45Adaptive => self.adaptive_step(t_stop)?,
        };
        self.stats.steps_accepted += 1;
        let mut xn = x1;
        self.field.normalize(&mut xn);
        let viol = self.field.region_violation(&xn);
        if viol > self.stats.max_invariant_violation {
            self.stats.max_invariant_violation = viol;
        }
        self.t = t1;
        self.x = xn;
        if xn != x1 {
            self.k_first = None;
        }
        Ok(Step { t0, x0, t1, x1 })
    }

    fn adaptive_step(&mut self, t_stop: f64) -> Result<(f64, [f64; N])> {
        let k1 = match self.k_first {
            Some(k) => k,
            None => self.field.eval(self.t, &self.x),
        };
        loop {
            let remaining = t_stop - self.t;
            let last = self.h >= remaining;
            let h = if last { remaining } else { self.h };
            let (xn, err, k7) = dp45_step(&self.field, self.t, &self.x, &k1, h);
            let mut en = 0.0f64;
            for i in 0..N {
                let sc = self.opts.abs_tol + self.opts.rel_tol * self.x[i].abs().max(xn[i].abs());
                let r = (err[i] / sc).abs();
                en = if r.is_nan() { f64::INFINITY } else { en.max(r) };
            }
            if en <= 1.0 {
                let fac = if en == 0.0 {
                    FAC_MAX
                } else {
                    (SAFETY * en.powf(-PI_ALPHA) * self.err_prev.powf(PI_BETA))
                        .clamp(FAC_MIN, FAC_MAX)
                };
                self.err_prev = en.max(1e-4);
                if xn.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteState { t: self.t + h });
                }
                // a truncated final step does not shrink the controller's step
                let base = if last { self.h.max(h) } else { h };
                self.h = (base * fac).min(self.opts.dt_max);
                self.k_first = Some(k7);
                let t1 = if last { t_stop } else { self.t + h };
                return Ok((t1, xn));
            }
            self.stats.steps_rejected += 1;
            let fac = if en.is_finite() {
                (SAFETY * en.powf(-PI_ALPHA)).clamp(FAC_MIN, 1.0)
            } else {
                FAC_MIN
            };
            self.h = h * fac;
            if self.h < self.opts.dt_min {
                return Err(Error::StepSizeUnderflow {
                    t: self.t,
                    dt: self.h,
                });
            }
        }
    }

    /// Integrates up to exactly `t_stop`.
    pub fn advance_to(&mut self, t_stop: f64) -> Result<()> {
        while self.t < t_stop {
            self.step(t_stop)?;
        }
        Ok(())
    }
}

/// Integrates `field` over `opts.t_span` from `x0`.
///
/// Nonnegativity is not enforced: any excursion out of the field's
/// invariant region is measured and reported in the statistics.
pub fn integrate<F: VectorField<N>, const N: usize>(
    field: F,
    x0: [f64; N],
    opts: &IntegratorOptions,
) -> Result<Trajectory<N>> {
    let mut solver = Solver::new(field, x0, opts)?;
    let t_end = opts.t_span.1;
    let mut times = vec![solver.t()];
    let mut states = vec![solver.state()];
    let mut count = 0usize;
    while solver.t() < t_end {
        solver.step(t_end)?;
        count += 1;
        if opts.dense_output && count.is_multiple_of(opts.record_stride) {
            times.push(solver.t());
            states.push(solver.state());
        }
    }
    if *times.last().unwrap() < solver.t() {
        times.push(solver.t());
        states.push(solver.state());
    }
    Ok(Trajectory {
        times,
        states,
        stats: solver.stats(),
    })
}

/// Selects one of the model's vector fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Full,
    Reduced,
    Extended,
}

impl FieldKind {
    pub fn dimension(self) -> usize {
        match self {
            FieldKind::Reduced => 2,
            FieldKind::Full | FieldKind::Extended => 3,
        }
    }

    pub fn columns(self) -> &'static [&'static str] {
        match self {
            FieldKind::Full => &["S", "I", "R"],
            FieldKind::Reduced => &["S", "I"],
            FieldKind::Extended => &["S", "I", "theta"],
        }
    }
}

impl std::str::FromStr for FieldKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(FieldKind::Full),
            "reduced" => Ok(FieldKind::Reduced),
            "extended" => Ok(FieldKind::Extended),
            other => Err(Error::Config(format!("unknown system `{other}`"))),
        }
    }
}

/// Trajectory of a model field with a runtime-selected dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelTrajectory {
    pub kind: FieldKind,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub stats: IntegrationStats,
}

fn erase<const N: usize>(kind: FieldKind, tr: Trajectory<N>) -> ModelTrajectory {
    ModelTrajectory {
        kind,
        times: tr.times,
        states: tr.states.iter().map(|s| s.to_vec()).collect(),
        stats: tr.stats,
    }
}

/// Integrates the selected model field. `x0` must have the field's
/// dimension.
pub fn integrate_model(
    kind: FieldKind,
    x0: &[f64],
    params: &ModelParams,
    opts: &IntegratorOptions,
) -> Result<ModelTrajectory> {
    if x0.len() != kind.dimension() {
        return Err(Error::Precondition(format!(
            "{kind:?} system needs {} initial values, got {}",
            kind.dimension(),
            x0.len()
        )));
    }
    if x0[0] < 0.0 || x0[1] < 0.0 || (kind == FieldKind::Full && x0[2] < 0.0) {
        return Err(Error::Precondition(
            "initial state must be nonnegative".into(),
        ));
    }
    Ok(match kind {
        FieldKind::Full => erase(
            kind,
            integrate(FullSystem::new(params)?, [x0[0], x0[1], x0[2]], opts)?,
        ),
        FieldKind::Reduced => erase(
            kind,
            integrate(ReducedSystem::new(params)?, [x0[0], x0[1]], opts)?,
        ),
        FieldKind::Extended => erase(
            kind,
            integrate(ExtendedSystem::new(params)?, [x0[0], x0[1], x0[2]], opts)?,
        ),
    })
}

/// Observed order of classical RK4 on `field` from `x0` over `[t0, t_end]`.
///
/// Each step size in `dts` is run to `t_end`; the global error is measured
/// against an adaptive Dormand–Prince reference at tolerance `1e-13` and the
/// order is the least-squares slope of `log(error)` against `log(dt)`.
pub fn convergence_order<F: VectorField<N>, const N: usize>(
    field: &F,
    x0: [f64; N],
    t_span: (f64, f64),
    dts: &[f64],
) -> Result<f64> {
    if dts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 step sizes, got {}",
            dts.len()
        )));
    }
    let mut ref_opts = IntegratorOptions::adaptive(1e-13, t_span);
    ref_opts.dense_output = false;
    ref_opts.dt_max = dts.iter().cloned().fold(f64::INFINITY, f64::min);
    let reference = integrate(field, x0, &ref_opts)?.final_state();
    let mut pts = Vec::with_capacity(dts.len());
    for &dt in dts {
        let mut o = IntegratorOptions::rk4(dt, t_span);
        o.dense_output = false;
        let end = integrate(field, x0, &o)?.final_state();
        let err = end
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if !(err > 0.0) {
            return Err(Error::InsufficientData(format!(
                "zero error at dt = {dt}; use larger steps"
            )));
        }
        pts.push((dt.ln(), err.ln()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Codimension-one section of phase space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Section {
    /// `θ = θ₀ (mod period)` on the extended system (third coordinate).
    Phase { theta0: f64, period: f64 },
    /// Line through `point` with normal `normal`, on the `(S, I)` plane.
    Line { point: [f64; 2], normal: [f64; 2] },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Section function goes from negative to nonnegative.
    Positive,
    Negative,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing<const N: usize> {
    pub t: f64,
    pub state: [f64; N],
}

/// Section-function tolerance for event location.
pub const EVENT_TOL: f64 = 1e-10;

type SectionFn<const N: usize> = Box<dyn Fn(&[f64; N]) -> f64>;

impl Section {
    fn line_value<const N: usize>(point: &[f64; 2], normal: &[f64; 2], x: &[f64; N]) -> f64 {
        normal[0] * (x[0] - point[0]) + normal[1] * (x[1] - point[1])
    }

    /// Returns the section function to bisect if the step crosses.
    fn crossing_in<const N: usize>(
        &self,
        step: &Step<N>,
        direction: Direction,
    ) -> Option<SectionFn<N>> {
        match *self {
            Section::Line { point, normal } => {
                let ga = Self::line_value(&point, &normal, &step.x0);
                let gb = Self::line_value(&point, &normal, &step.x1);
                let up = ga < 0.0 && gb >= 0.0;
                let down = ga > 0.0 && gb <= 0.0;
                let hit = match direction {
                    Direction::Positive => up,
                    Direction::Negative => down,
                    Direction::Both => up || down,
                };
                hit.then(|| {
                    Box::new(move |x: &[f64; N]| Self::line_value(&point, &normal, x))
                        as Box<dyn Fn(&[f64; N]) -> f64>
                })
            }
            Section::Phase { theta0, period } => {
                if N < 3 || direction == Direction::Negative {
                    return None;
                }
                let th_a = step.x0[2];
                let mut target = theta0 + period * ((th_a - theta0) / period).ceil();
                if target <= th_a {
                    target += period;
                }
                (step.x1[2] >= target).then(|| {
                    Box::new(move |x: &[f64; N]| x[2] - target) as Box<dyn Fn(&[f64; N]) -> f64>
                })
            }
        }
    }
}

fn locate<F: VectorField<N>, const N: usize>(
    solver: &Solver<F, N>,
    step: &Step<N>,
    g: &dyn Fn(&[f64; N]) -> f64,
) -> Crossing<N> {
    let h = step.t1 - step.t0;
    let ga = g(&step.x0);
    let (mut lo, mut hi) = (0.0, h);
    let mut best = (step.t1, step.x1);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let xm = solver.substep(step.t0, &step.x0, mid);
        let gm = g(&xm);
        best = (step.t0 + mid, xm);
        if gm.abs() < EVENT_TOL || hi - lo < 1e-15 * step.t1.abs().max(1.0) {
            break;
        }
        if (gm < 0.0) == (ga < 0.0) && gm != 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut state = best.1;
    solver.field().normalize(&mut state);
    Crossing { t: best.0, state }
}

/// Advances `solver` until the next crossing of `section` in `direction`,
/// or returns `None` at `t_max`.
pub fn next_crossing<F: VectorField<N>, const N: usize>(
    solver: &mut Solver<F, N>,
    section: &Section,
    direction: Direction,
    t_max: f64,
) -> Result<Option<Crossing<N>>> {
    while solver.t() < t_max {
        let step = solver.step(t_max)?;
        if let Some(g) = section.crossing_in(&step, direction) {
            return Ok(Some(locate(solver, &step, g.as_ref())));
        }
    }
    Ok(None)
}

/// All crossings of `section` over `opts.t_span`.
pub fn section_crossings<F: VectorField<N>, const N: usize>(
    field: F,
    x0: [f64; N],
    opts: &IntegratorOptions,
    section: &Section,
    direction: Direction,
) -> Result<Vec<Crossing<N>>> {
    let mut solver = Solver::new(field, x0, opts)?;
    let t_end = opts.t_span.1;
    let mut out = Vec::new();
    while let Some(c) = next_crossing(&mut solver, section, direction, t_end)? {
        out.push(c);
    }
    Ok(out)
}
