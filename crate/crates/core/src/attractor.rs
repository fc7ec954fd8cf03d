//! Long-run behaviour of the forced system: stroboscopic return map,
//! largest Lyapunov exponent from the tangent flow, Poincaré shooting for
//! the autonomous limit cycle, and a decision ladder that labels what the
//! stroboscopic orbit settles on.

use serde::{Deserialize, Serialize};

use crate::equilibria::endemic_e3;
use crate::error::{Error, Result};
use crate::integrate::{
    integrate, next_crossing, Direction, IntegratorOptions, Linearized, Section, Solver,
    VectorField,
};
use crate::linalg::{self, Mat2};
use crate::model::{
    jacobian_extended, ExtendedSystem, ModelParams, ReducedSystem, State2, StateExt,
};

/// Positive-exponent threshold for chaos (per unit time).
pub const LAMBDA_CHAOS: f64 = 1e-3;
/// Spread of the running Lyapunov average over the last quarter of
/// renormalizations below which the estimate counts as converged.
pub const CONVERGENCE_TOL: f64 = 5e-4;
/// Longest phase-locked period searched for.
pub const K_MAX: usize = 64;
/// Recurrence distance for a fixed point of the return map.
pub const EPS_FIX: f64 = 1e-6;
/// Recurrence distance for a `k`-periodic orbit of the return map.
pub const EPS_PER: f64 = 1e-6;
/// A `k`-cycle must also close much better than single steps do, so that a
/// slow spiral whose rotation is near `j/k` is not mistaken for locking.
pub const PERIODIC_CONTRAST: f64 = 1e-3;
/// Largest angular gap (degrees) allowed on an invariant curve.
pub const MAX_GAP_DEG: f64 = 15.0;
/// Largest radius jump between angular neighbours, relative to the mean
/// radius.
pub const MAX_ROUGHNESS: f64 = 0.05;
/// Largest relative change of mean radius between the two halves of the
/// kept orbit.
pub const MAX_DRIFT: f64 = 1e-2;

/// Planar field plus its tangent flow, `(x, v) ↦ (f(t,x), J(t,x)·v)`.
pub struct TangentFlow<F> {
    pub field: F,
}

impl<F: Linearized> VectorField<4> for TangentFlow<F> {
    #[inline]
    fn eval(&self, t: f64, y: &[f64; 4]) -> [f64; 4] {
        let x = [y[0], y[1]];
        let f = self.field.eval(t, &x);
        let j = self.field.jacobian(t, &x);
        let v = linalg::mul_vec(&j, [y[2], y[3]]);
        [f[0], f[1], v[0], v[1]]
    }

    fn region_violation(&self, y: &[f64; 4]) -> f64 {
        self.field.region_violation(&[y[0], y[1]])
    }
}

/// Extended `(S, I, θ)` field with its full 3D tangent flow.
struct ExtendedTangentFlow {
    sys: ExtendedSystem,
}

impl VectorField<6> for ExtendedTangentFlow {
    fn eval(&self, t: f64, y: &[f64; 6]) -> [f64; 6] {
        let x = [y[0], y[1], y[2]];
        let f = self.sys.eval(t, &x);
        let j = jacobian_extended(StateExt::from(x), &self.sys.params);
        let mut out = [f[0], f[1], f[2], 0.0, 0.0, 0.0];
        for r in 0..3 {
            out[3 + r] = j[r][0] * y[3] + j[r][1] * y[4] + j[r][2] * y[5];
        }
        out
    }

    fn normalize(&self, y: &mut [f64; 6]) {
        y[2] = y[2].rem_euclid(self.sys.params.forcing.period());
    }
}

/// `ẋ = M x` with constant `M`; exponents are the real parts of its
/// eigenvalues. Used to calibrate the Lyapunov estimator.
#[derive(Debug, Clone, Copy)]
pub struct LinearField {
    pub matrix: Mat2,
}

impl VectorField<2> for LinearField {
    fn eval(&self, _t: f64, x: &[f64; 2]) -> [f64; 2] {
        linalg::mul_vec(&self.matrix, *x)
    }
}

impl Linearized for LinearField {
    fn jacobian(&self, _t: f64, _x: &[f64; 2]) -> Mat2 {
        self.matrix
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LyapunovOptions {
    /// Time between tangent-vector renormalizations.
    pub renorm_interval: f64,
    /// Renormalizations that contribute to the estimate.
    pub n_renorm: usize,
    /// Renormalizations discarded before accumulating.
    pub transient: usize,
    pub integrator: IntegratorOptions,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        LyapunovOptions {
            renorm_interval: 1.0,
            n_renorm: 1000,
            transient: 300,
            integrator: default_orbit_integrator(),
        }
    }
}

fn default_orbit_integrator() -> IntegratorOptions {
    let mut o = IntegratorOptions::adaptive(1e-9, (0.0, 1.0));
    o.dense_output = false;
    o
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub lambda_max: f64,
    /// Running average after each renormalization.
    pub history: Vec<f64>,
    pub converged: bool,
    /// `max − min` of `history` over its last quarter.
    pub window_spread: f64,
}

fn window_spread(history: &[f64]) -> f64 {
    if history.is_empty() {
        return f64::INFINITY;
    }
    let start = history.len() - (history.len() / 4).max(1);
    let w = &history[start..];
    let max = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = w.iter().cloned().fold(f64::INFINITY, f64::min);
    max - min
}

/// Benettin estimate on an arbitrary planar field; also returns the
/// states at the renormalization times after the transient.
pub fn lyapunov_with_samples<F: Linearized>(
    field: F,
    x0: [f64; 2],
    opts: &LyapunovOptions,
) -> Result<(LyapunovEstimate, Vec<[f64; 2]>)> {
    if !(opts.renorm_interval > 0.0) || opts.n_renorm == 0 {
        return Err(Error::InvalidOptions(
            "renorm_interval must be > 0 and n_renorm >= 1".into(),
        ));
    }
    let mut iopts = opts.integrator.clone();
    let t0 = iopts.t_span.0;
    iopts.t_span = (t0, t0 + opts.renorm_interval);
    let mut solver = Solver::new(TangentFlow { field }, [x0[0], x0[1], 1.0, 0.0], &iopts)?;
    let mut sum_log = 0.0;
    let mut history = Vec::with_capacity(opts.n_renorm);
    let mut samples = Vec::with_capacity(opts.n_renorm);
    for k in 1..=(opts.transient + opts.n_renorm) {
        let t_k = t0 + k as f64 * opts.renorm_interval;
        solver.advance_to(t_k)?;
        let y = solver.state();
        let norm = y[2].hypot(y[3]);
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NonFiniteState { t: t_k });
        }
        solver.set_state([y[0], y[1], y[2] / norm, y[3] / norm]);
        if k > opts.transient {
            sum_log += norm.ln();
            let n = (k - opts.transient) as f64;
            history.push(sum_log / (n * opts.renorm_interval));
            samples.push([y[0], y[1]]);
        }
    }
    let spread = window_spread(&history);
    Ok((
        LyapunovEstimate {
            lambda_max: *history.last().unwrap(),
            converged: spread < CONVERGENCE_TOL,
            window_spread: spread,
            history,
        },
        samples,
    ))
}

/// Largest Lyapunov exponent of the reduced non-autonomous system from
/// `x0`, excluding the trivial phase direction.
pub fn largest_lyapunov(
    params: &ModelParams,
    x0: State2,
    opts: &LyapunovOptions,
) -> Result<LyapunovEstimate> {
    Ok(lyapunov_with_samples(ReducedSystem::new(params)?, x0.to_array(), opts)?.0)
}

/// Same estimate on the extended system with a 3D tangent space; the
/// initial tangent vector is `(v_S, v_I, v_θ)`.
pub fn largest_lyapunov_extended(
    params: &ModelParams,
    x0: State2,
    v0: [f64; 3],
    opts: &LyapunovOptions,
) -> Result<LyapunovEstimate> {
    let sys = ExtendedSystem::new(params)?;
    let mut iopts = opts.integrator.clone();
    let t0 = iopts.t_span.0;
    iopts.t_span = (t0, t0 + opts.renorm_interval);
    let theta0 = params.omega * t0;
    let n0 = (v0[0] * v0[0] + v0[1] * v0[1] + v0[2] * v0[2]).sqrt();
    let mut solver = Solver::new(
        ExtendedTangentFlow { sys },
        [x0.s, x0.i, theta0, v0[0] / n0, v0[1] / n0, v0[2] / n0],
        &iopts,
    )?;
    let mut sum_log = 0.0;
    let mut history = Vec::with_capacity(opts.n_renorm);
    for k in 1..=(opts.transient + opts.n_renorm) {
        solver.advance_to(t0 + k as f64 * opts.renorm_interval)?;
        let y = solver.state();
        let norm = (y[3] * y[3] + y[4] * y[4] + y[5] * y[5]).sqrt();
        solver.set_state([y[0], y[1], y[2], y[3] / norm, y[4] / norm, y[5] / norm]);
        if k > opts.transient {
            sum_log += norm.ln();
            let n = (k - opts.transient) as f64;
            history.push(sum_log / (n * opts.renorm_interval));
        }
    }
    let spread = window_spread(&history);
    Ok(LyapunovEstimate {
        lambda_max: *history.last().unwrap(),
        converged: spread < CONVERGENCE_TOL,
        window_spread: spread,
        history,
    })
}

/// Orbit of the time-`2π/ω` map of the forced system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StroboscopicOrbit {
    pub points: Vec<State2>,
    pub transient_discarded: usize,
    /// Sampling period in time units.
    pub period: f64,
    pub params: ModelParams,
}

/// Integrates the extended system from `(x0, θ = 0)` and records `(S, I)`
/// each time the phase returns to `0`, discarding the first `n_transient`
/// returns.
pub fn stroboscopic_orbit(
    params: &ModelParams,
    x0: State2,
    n_transient: usize,
    n_keep: usize,
) -> Result<StroboscopicOrbit> {
    stroboscopic_orbit_with(params, x0, n_transient, n_keep, &default_orbit_integrator())
}

pub fn stroboscopic_orbit_with(
    params: &ModelParams,
    x0: State2,
    n_transient: usize,
    n_keep: usize,
    integrator: &IntegratorOptions,
) -> Result<StroboscopicOrbit> {
    let sys = ExtendedSystem::new(params)?;
    let period = params.forcing_period();
    let mut points = Vec::with_capacity(n_keep);
    if n_keep > 0 {
        let mut iopts = integrator.clone();
        iopts.t_span = (0.0, period);
        let mut solver = Solver::new(&sys, [x0.s, x0.i, 0.0], &iopts)?;
        for k in 1..=(n_transient + n_keep) {
            solver.advance_to(k as f64 * period)?;
            if k > n_transient {
                let y = solver.state();
                points.push(State2::new(y[0], y[1]));
            }
        }
    }
    Ok(StroboscopicOrbit {
        points,
        transient_discarded: n_transient,
        period,
        params: params.clone(),
    })
}

/// Closed-curve diagnostics of a planar point cloud.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveFill {
    /// Largest angular gap around the centroid, degrees.
    pub max_gap_deg: f64,
    /// Largest radius jump between angular neighbours over the mean radius.
    pub roughness: f64,
    /// Relative change of mean radius between the first and second half.
    pub drift: f64,
}

impl CurveFill {
    pub fn passes(&self) -> bool {
        self.max_gap_deg < MAX_GAP_DEG && self.roughness < MAX_ROUGHNESS && self.drift < MAX_DRIFT
    }
}

/// Sorts points by angle about their centroid and measures how well they
/// trace a single closed curve.
pub fn curve_fill(points: &[State2]) -> CurveFill {
    let n = points.len();
    if n < 3 {
        return CurveFill {
            max_gap_deg: 360.0,
            roughness: f64::INFINITY,
            drift: f64::INFINITY,
        };
    }
    let cs = points.iter().map(|p| p.s).sum::<f64>() / n as f64;
    let ci = points.iter().map(|p| p.i).sum::<f64>() / n as f64;
    let polar: Vec<(f64, f64)> = points
        .iter()
        .map(|p| {
            let (ds, di) = (p.s - cs, p.i - ci);
            (di.atan2(ds), ds.hypot(di))
        })
        .collect();
    let mean_r = polar.iter().map(|p| p.1).sum::<f64>() / n as f64;
    if !(mean_r > 1e-9) {
        return CurveFill {
            max_gap_deg: 360.0,
            roughness: f64::INFINITY,
            drift: f64::INFINITY,
        };
    }
    let half = n / 2;
    let r_first = polar[..half].iter().map(|p| p.1).sum::<f64>() / half as f64;
    let r_second = polar[half..].iter().map(|p| p.1).sum::<f64>() / (n - half) as f64;
    let drift = (r_first - r_second).abs() / mean_r;

    let mut sorted = polar;
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut max_gap = 0.0f64;
    let mut roughness = 0.0f64;
    for k in 0..n {
        let (a0, r0) = sorted[k];
        let (a1, r1) = sorted[(k + 1) % n];
        let gap = if k + 1 == n {
            a1 + std::f64::consts::TAU - a0
        } else {
            a1 - a0
        };
        max_gap = max_gap.max(gap);
        roughness = roughness.max((r1 - r0).abs() / mean_r);
    }
    CurveFill {
        max_gap_deg: max_gap.to_degrees(),
        roughness,
        drift,
    }
}

/// `max_j ‖x_{j+k} − x_j‖∞` over the window.
pub fn recurrence_distance(points: &[State2], k: usize) -> f64 {
    if points.len() <= k {
        return f64::INFINITY;
    }
    points
        .iter()
        .zip(&points[k..])
        .map(|(a, b)| (a.s - b.s).abs().max((a.i - b.i).abs()))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttractorKind {
    /// Fixed point of the return map: an equilibrium or a forcing-period
    /// orbit of the flow.
    FixedPoint,
    /// `k`-periodic orbit of the return map (phase locking).
    PeriodicOrbit {
        k: usize,
    },
    /// Quasiperiodic: a closed invariant curve of the return map.
    InvariantCurve,
    Chaotic,
    Undetermined,
}

impl AttractorKind {
    pub fn name(&self) -> String {
        match self {
            AttractorKind::FixedPoint => "fixed_point".into(),
            AttractorKind::PeriodicOrbit { k } => format!("periodic_{k}"),
            AttractorKind::InvariantCurve => "invariant_curve".into(),
            AttractorKind::Chaotic => "chaotic".into(),
            AttractorKind::Undetermined => "undetermined".into(),
        }
    }

    /// Small integer code used for heatmaps.
    pub fn code(&self) -> i32 {
        match self {
            AttractorKind::FixedPoint => 0,
            AttractorKind::PeriodicOrbit { .. } => 1,
            AttractorKind::InvariantCurve => 2,
            AttractorKind::Chaotic => 3,
            AttractorKind::Undetermined => -1,
        }
    }
}

impl std::str::FromStr for AttractorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "fixed_point" => AttractorKind::FixedPoint,
            "invariant_curve" => AttractorKind::InvariantCurve,
            "chaotic" => AttractorKind::Chaotic,
            "undetermined" => AttractorKind::Undetermined,
            other => match other.strip_prefix("periodic_").map(str::parse) {
                Some(Ok(k)) => AttractorKind::PeriodicOrbit { k },
                _ => return Err(Error::Config(format!("unknown verdict `{other}`"))),
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Recurrence distance of consecutive return-map points.
    pub recurrence: f64,
    /// Smallest `k`-step recurrence distance for `2 ≤ k ≤ K_MAX`.
    pub best_periodic_recurrence: f64,
    pub curve: CurveFill,
    pub window_spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractorVerdict {
    pub kind: AttractorKind,
    pub lambda_max: f64,
    pub converged: bool,
    pub diagnostics: Diagnostics,
    /// Return-map points analysed (tail of the kept orbit).
    #[serde(skip)]
    pub points: Vec<State2>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifyOptions {
    pub transient_periods: usize,
    pub kept_periods: usize,
    /// Lower bounds on the horizons in time units, so that fast forcing
    /// still integrates long enough for the exponent to settle.
    pub min_transient_time: f64,
    pub min_kept_time: f64,
    pub integrator: IntegratorOptions,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            transient_periods: 300,
            kept_periods: 1000,
            min_transient_time: 2000.0,
            min_kept_time: 10000.0,
            integrator: default_orbit_integrator(),
        }
    }
}

impl ClassifyOptions {
    /// `(transient, kept)` counts of forcing periods for `params`.
    pub fn horizons(&self, params: &ModelParams) -> (usize, usize) {
        let period = params.forcing_period();
        let nt = self
            .transient_periods
            .max((self.min_transient_time / period).ceil() as usize);
        let nk = self
            .kept_periods
            .max((self.min_kept_time / period).ceil() as usize);
        (nt, nk)
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.integrator.abs_tol = tol;
        self.integrator.rel_tol = tol;
        self
    }
}

/// Decision ladder on the stroboscopic orbit:
/// fixed point → `k`-periodic (`k ≤ 64`) → invariant curve (non-positive
/// exponent, closed curve) → chaotic (converged positive exponent) →
/// undetermined.
pub fn classify_attractor(
    params: &ModelParams,
    x0: State2,
    opts: &ClassifyOptions,
) -> Result<AttractorVerdict> {
    let (nt, nk) = opts.horizons(params);
    let period = params.forcing_period();
    let mut integrator = opts.integrator.clone();
    integrator.dt_max = integrator.dt_max.min(period / 8.0);
    let lopts = LyapunovOptions {
        renorm_interval: period,
        n_renorm: nk,
        transient: nt,
        integrator,
    };
    let (est, samples) = lyapunov_with_samples(ReducedSystem::new(params)?, x0.to_array(), &lopts)?;
    let points: Vec<State2> = samples.into_iter().map(State2::from).collect();
    Ok(decide(est, points))
}

fn decide(est: LyapunovEstimate, points: Vec<State2>) -> AttractorVerdict {
    let n = points.len();
    let window = (n / 4).max((2 * K_MAX + 2).min(n));
    let tail = &points[n - window..];
    let recurrence = recurrence_distance(tail, 1);
    let mut best_k = None;
    let mut best_periodic = f64::INFINITY;
    for k in 2..=K_MAX {
        let d = recurrence_distance(tail, k);
        best_periodic = best_periodic.min(d);
        if best_k.is_none() && d < EPS_PER && d < PERIODIC_CONTRAST * recurrence {
            best_k = Some(k);
        }
    }
    let curve = curve_fill(&points);
    let kind = if recurrence < EPS_FIX {
        AttractorKind::FixedPoint
    } else if let Some(k) = best_k {
        AttractorKind::PeriodicOrbit { k }
    } else if est.lambda_max <= LAMBDA_CHAOS && curve.passes() {
        AttractorKind::InvariantCurve
    } else if est.lambda_max > LAMBDA_CHAOS && est.converged {
        AttractorKind::Chaotic
    } else {
        AttractorKind::Undetermined
    };
    AttractorVerdict {
        kind,
        lambda_max: est.lambda_max,
        converged: est.converged,
        diagnostics: Diagnostics {
            recurrence,
            best_periodic_recurrence: best_periodic,
            curve,
            window_spread: est.window_spread,
        },
        points: tail.to_vec(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitCycle {
    /// Fixed point of the return map on the section through `E₃`.
    pub section_point: State2,
    /// One period of the cycle, starting at `section_point`.
    pub points: Vec<State2>,
    pub period: f64,
    /// Derivative of the return map at its fixed point.
    pub floquet_multiplier: f64,
    /// `exp(∫₀ᵀ tr J dt)` along the cycle.
    pub liouville_multiplier: f64,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShootingOptions {
    /// Time integrated from the guess before the first section hit.
    pub transient: f64,
    /// Longest allowed return time.
    pub max_return_time: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Section offsets below this count as collapsed onto `E₃`.
    pub min_amplitude: f64,
    pub tol: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        ShootingOptions {
            transient: 2000.0,
            max_return_time: 500.0,
            newton_tol: 1e-10,
            max_newton: 40,
            min_amplitude: 1e-4,
            tol: 1e-12,
        }
    }
}

struct ReturnMap<'a> {
    sys: &'a ReducedSystem,
    e3: State2,
    section: Section,
    opts: &'a ShootingOptions,
}

impl ReturnMap<'_> {
    fn integrator(&self) -> IntegratorOptions {
        let mut o = IntegratorOptions::adaptive(self.opts.tol, (0.0, self.opts.max_return_time));
        o.dt_max = 0.5;
        o
    }

    /// Maps the section offset `u = I − I₃` to `(u', return time)`.
    fn apply(&self, u: f64) -> Result<(f64, f64)> {
        let mut solver = Solver::new(self.sys, [self.e3.s, self.e3.i + u], &self.integrator())?;
        match next_crossing(
            &mut solver,
            &self.section,
            Direction::Negative,
            self.opts.max_return_time,
        )? {
            Some(c) => Ok((c.state[1] - self.e3.i, c.t)),
            None => Err(Error::NoCycleFound(format!(
                "no return to the section within {} time units",
                self.opts.max_return_time
            ))),
        }
    }

    fn derivative(&self, u: f64) -> Result<f64> {
        let h = 1e-4 * u.abs().max(1e-3);
        let (p, _) = self.apply(u + h)?;
        let (m, _) = self.apply(u - h)?;
        Ok((p - m) / (2.0 * h))
    }
}

/// Finds the attracting cycle of the autonomous system by Newton's method
/// on the return map to the half-line `{S = S₃, I > I₃}`.
pub fn locate_limit_cycle(
    params: &ModelParams,
    guess: State2,
    opts: &ShootingOptions,
) -> Result<LimitCycle> {
    if params.gamma != 0.0 {
        return Err(Error::Precondition(
            "limit cycle shooting needs the autonomous system (gamma = 0)".into(),
        ));
    }
    let sys = ReducedSystem::new(params)?;
    let e3 = endemic_e3(params)?
        .ok_or_else(|| Error::NoCycleFound("no endemic equilibrium to encircle".into()))?;
    let map = ReturnMap {
        sys: &sys,
        e3,
        section: Section::Line {
            point: [e3.s, e3.i],
            normal: [1.0, 0.0],
        },
        opts,
    };

    let mut o = map.integrator();
    o.t_span = (0.0, opts.transient + opts.max_return_time);
    let mut solver = Solver::new(&sys, guess.to_array(), &o)?;
    solver.advance_to(opts.transient)?;
    let first = next_crossing(
        &mut solver,
        &map.section,
        Direction::Negative,
        opts.transient + opts.max_return_time,
    )?
    .ok_or_else(|| {
        Error::NoCycleFound("trajectory from the guess never crosses the section".into())
    })?;

    let mut u = first.state[1] - e3.i;
    let mut pu = map.apply(u)?.0;
    let mut iterations = 0;
    loop {
        if u.abs() < opts.min_amplitude {
            return Err(Error::NoCycleFound(format!(
                "return map collapses onto the equilibrium (offset {u:e})"
            )));
        }
        let residual = pu - u;
        if residual.abs() < opts.newton_tol {
            break;
        }
        if iterations >= opts.max_newton {
            return Err(Error::NoCycleFound(
                "Newton iteration did not converge".into(),
            ));
        }
        iterations += 1;
        let slope = map.derivative(u)? - 1.0;
        let mut step = if slope.abs() > 1e-12 {
            residual / slope
        } else {
            0.0
        };
        step = step.clamp(-0.5 * u, 0.5 * u);
        // backtrack on |P(u) − u|; fall back to one application of the map
        let mut accepted = None;
        for _ in 0..20 {
            if step == 0.0 {
                break;
            }
            let cand = u - step;
            if let Ok((pc, _)) = map.apply(cand) {
                if (pc - cand).abs() < residual.abs() {
                    accepted = Some((cand, pc));
                    break;
                }
            }
            step *= 0.5;
        }
        (u, pu) = match accepted {
            Some(next) => next,
            None => (pu, map.apply(pu)?.0),
        };
    }

    let (_, period) = map.apply(u)?;
    let multiplier = map.derivative(u)?;
    let start = State2::new(e3.s, e3.i + u);

    let mut po = IntegratorOptions::adaptive(opts.tol, (0.0, period));
    po.dt_max = period / 200.0;
    let tr = integrate(&sys, start.to_array(), &po)?;
    let points = tr.states.iter().map(|x| State2::from(*x)).collect();

    let liouville = {
        let aug = TraceAccumulator { sys: &sys };
        let mut o = IntegratorOptions::adaptive(opts.tol, (0.0, period));
        o.dense_output = false;
        let end = integrate(aug, [start.s, start.i, 0.0], &o)?.final_state();
        end[2].exp()
    };

    Ok(LimitCycle {
        section_point: start,
        points,
        period,
        floquet_multiplier: multiplier,
        liouville_multiplier: liouville,
        newton_iterations: iterations,
    })
}

/// `(x, s) ↦ (f(x), tr J(x))`: accumulates the divergence along an orbit.
struct TraceAccumulator<'a> {
    sys: &'a ReducedSystem,
}

impl VectorField<3> for TraceAccumulator<'_> {
    fn eval(&self, t: f64, y: &[f64; 3]) -> [f64; 3] {
        let x = [y[0], y[1]];
        let f = self.sys.eval(t, &x);
        [f[0], f[1], linalg::trace(&self.sys.jacobian(t, &x))]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;
    use std::f64::consts::TAU;

    #[test]
    fn linear_field_exponent() {
        let f = LinearField {
            matrix: [[-1.0, 0.0], [0.0, -2.0]],
        };
        let opts = LyapunovOptions {
            renorm_interval: 1.0,
            n_renorm: 200,
            transient: 10,
            ..Default::default()
        };
        let (est, _) = lyapunov_with_samples(f, [1.0, 1.0], &opts).unwrap();
        assert!((est.lambda_max + 1.0).abs() < 1e-3, "{}", est.lambda_max);
        assert!(est.converged);
    }

    #[test]
    fn rotation_has_zero_exponent() {
        let f = LinearField {
            matrix: [[0.0, -1.0], [1.0, 0.0]],
        };
        let opts = LyapunovOptions {
            renorm_interval: 0.7,
            n_renorm: 100,
            transient: 0,
            ..Default::default()
        };
        let (est, _) = lyapunov_with_samples(f, [1.0, 0.0], &opts).unwrap();
        assert!(est.lambda_max.abs() < 1e-8);
    }

    #[test]
    fn empty_stroboscopic_orbit() {
        let orb = stroboscopic_orbit(&presets::near_hopf(), State2::new(0.5, 0.2), 10, 0).unwrap();
        assert!(orb.points.is_empty());
        assert_eq!(orb.transient_discarded, 10);
    }

    #[test]
    fn disease_free_orbit_collapses_to_e2() {
        let p = presets::disease_free().with_forcing(0.1, 2.0);
        let orb = stroboscopic_orbit(&p, State2::new(0.4, 0.3), 100, 20).unwrap();
        for q in &orb.points {
            assert!((q.s - 0.96).abs() < 1e-8 && q.i.abs() < 1e-8);
        }
    }

    #[test]
    fn curve_fill_on_circle_and_cloud() {
        let circle: Vec<State2> = (0..500)
            .map(|k| {
                let a = k as f64 * 0.618_033_988_75 * TAU;
                State2::new(0.4 + 0.1 * a.cos(), 0.3 + 0.1 * a.sin())
            })
            .collect();
        let c = curve_fill(&circle);
        assert!(c.passes(), "{c:?}");

        // a slowly shrinking spiral fails the drift test
        let spiral: Vec<State2> = (0..500)
            .map(|k| {
                let a = k as f64 * 0.618_033_988_75 * TAU;
                let r = 0.1 * (-(k as f64) / 500.0).exp();
                State2::new(0.4 + r * a.cos(), 0.3 + r * a.sin())
            })
            .collect();
        assert!(!curve_fill(&spiral).passes());

        // a handful of points leaves gaps
        assert!(curve_fill(&circle[..10]).max_gap_deg > MAX_GAP_DEG);
    }

    #[test]
    fn recurrence_on_period_three() {
        let pts: Vec<State2> = (0..30).map(|k| State2::new((k % 3) as f64, 0.0)).collect();
        assert_eq!(recurrence_distance(&pts, 3), 0.0);
        assert_eq!(recurrence_distance(&pts, 1), 2.0);
        assert!(recurrence_distance(&pts[..2], 3).is_infinite());
    }

    #[test]
    fn verdict_names_roundtrip() {
        for k in [
            AttractorKind::FixedPoint,
            AttractorKind::PeriodicOrbit { k: 7 },
            AttractorKind::InvariantCurve,
            AttractorKind::Chaotic,
            AttractorKind::Undetermined,
        ] {
            assert_eq!(k.name().parse::<AttractorKind>().unwrap(), k);
        }
    }

    #[test]
    fn shooting_requires_autonomous_system() {
        let p = presets::post_hopf().with_forcing(0.1, 1.0);
        assert!(matches!(
            locate_limit_cycle(&p, State2::new(0.4, 0.3), &ShootingOptions::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn no_cycle_without_endemic_equilibrium() {
        assert!(matches!(
            locate_limit_cycle(
                &presets::disease_free(),
                State2::new(0.4, 0.3),
                &ShootingOptions::default()
            ),
            Err(Error::NoCycleFound(_))
        ));
    }
}
