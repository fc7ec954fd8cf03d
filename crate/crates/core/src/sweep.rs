//! Parameter sweeps: grids over `(γ, ω)` or any model parameter, the
//! per-`ω` chaotic fraction, regime maps of the autonomous system, and
//! export to CSV / JSON / gnuplot matrix files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attractor::{
    classify_attractor, largest_lyapunov, locate_limit_cycle, AttractorKind, ClassifyOptions,
    LyapunovOptions, ShootingOptions, CONVERGENCE_TOL, LAMBDA_CHAOS,
};
use crate::equilibria::{detect_regime, endemic_e3, in_u2, Regime, RegimeTag};
use crate::error::{Error, Result};
use crate::model::{presets, ModelParams, State2};

/// Radius of the per-cell initial-condition jitter.
pub const JITTER_RADIUS: f64 = 1e-3;
/// Default upper end of the `γ` interval.
pub const DEFAULT_EPSILON: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Job {
    #[default]
    Classify,
    /// Largest exponent only; the verdict is `Chaotic` when the exponent is
    /// converged and above threshold, `Undetermined` otherwise.
    Lyapunov,
    /// Autonomous regime of each cell; the verdict is always `Undetermined`.
    Analyze,
}

/// Sweep axis: a parameter name and its values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AxisSpec")]
pub struct Axis {
    pub param: String,
    pub values: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AxisSpec {
    param: String,
    values: Option<Vec<f64>>,
    start: Option<f64>,
    stop: Option<f64>,
    n: Option<usize>,
}

impl TryFrom<AxisSpec> for Axis {
    type Error = Error;
    fn try_from(s: AxisSpec) -> Result<Self> {
        match (s.values, s.start, s.stop, s.n) {
            (Some(values), None, None, None) => Axis::list(&s.param, values),
            (None, Some(a), Some(b), Some(n)) => Axis::linspace(&s.param, a, b, n),
            _ => Err(Error::Config(format!(
                "axis `{}` needs either `values` or `start`, `stop` and `n`",
                s.param
            ))),
        }
    }
}

impl Axis {
    pub fn linspace(param: &str, start: f64, stop: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config(format!("axis `{param}` needs n >= 1")));
        }
        let values = if n == 1 {
            vec![start]
        } else {
            (0..n)
                .map(|k| start + (stop - start) * k as f64 / (n - 1) as f64)
                .collect()
        };
        Axis::list(param, values)
    }

    pub fn list(param: &str, values: Vec<f64>) -> Result<Self> {
        let axis = Axis {
            param: param.to_string(),
            values,
        };
        axis.validate()?;
        Ok(axis)
    }

    /// `[0, ε]` with `n` points.
    pub fn gamma(epsilon: f64, n: usize) -> Result<Self> {
        Axis::linspace("gamma", 0.0, epsilon, n)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Config(format!("axis `{}` is empty", self.param)));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!(
                "axis `{}` has non-finite values",
                self.param
            )));
        }
        if self.param == "gamma" && self.values.len() > 1 {
            let max = self
                .values
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            if !(max > 0.0) {
                return Err(Error::Config("gamma axis needs epsilon > 0".into()));
            }
        }
        set_param(&mut presets::near_hopf(), &self.param, 0.0)
    }
}

/// Sets a parameter by its serialized name. `R0` rescales `A` so that the
/// basic reproduction number takes the given value.
pub fn set_param(p: &mut ModelParams, name: &str, v: f64) -> Result<()> {
    match name {
        "A" | "capacity" => p.capacity = v,
        "r" | "cure_rate" => p.cure_rate = v,
        "beta0" => p.beta0 = v,
        "a" | "saturation" => p.saturation = v,
        "mu" => p.mu = v,
        "d" | "disease_death" => p.disease_death = v,
        "gamma" => p.gamma = v,
        "omega" => p.omega = v,
        "R0" | "r0" => p.capacity = v * (p.mu_eff() + p.cure_rate / p.saturation) / p.beta0,
        other => return Err(Error::Config(format!("unknown sweep parameter `{other}`"))),
    }
    Ok(())
}

/// Base parameters: inline, or a path to a TOML/JSON parameter file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BaseParams {
    File(PathBuf),
    Inline(ModelParams),
}

impl Default for BaseParams {
    fn default() -> Self {
        BaseParams::Inline(presets::near_hopf())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub base: BaseParams,
    /// At most two axes; the first varies slowest.
    pub axes: Vec<Axis>,
    pub job: Job,
    /// `0` means one worker per available core.
    pub workers: usize,
    pub seed: u64,
    pub classify: ClassifyOptions,
    pub out_dir: Option<PathBuf>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            base: BaseParams::default(),
            axes: Vec::new(),
            job: Job::Classify,
            workers: 0,
            seed: 0,
            classify: ClassifyOptions::default(),
            out_dir: None,
        }
    }
}

impl SweepConfig {
    /// `γ ∈ [0, ε]` (`n_gamma` points) against the listed `ω` values.
    pub fn chaos_grid(
        base: ModelParams,
        epsilon: f64,
        n_gamma: usize,
        omegas: Vec<f64>,
    ) -> Result<Self> {
        Ok(SweepConfig {
            base: BaseParams::Inline(base),
            axes: vec![Axis::gamma(epsilon, n_gamma)?, Axis::list("omega", omegas)?],
            ..Default::default()
        })
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: SweepConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let c: SweepConfig = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Loads a config file (JSON by extension, TOML otherwise). A relative
    /// `base` path is resolved against the config's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c = if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
        .map_err(|e| Error::format(path, e.to_string()))?;
        if let BaseParams::File(f) = &c.base {
            if f.is_relative() {
                if let Some(dir) = path.parent() {
                    c.base = BaseParams::File(dir.join(f));
                }
            }
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.len() > 2 {
            return Err(Error::Config("at most two sweep axes are supported".into()));
        }
        for a in &self.axes {
            a.validate()?;
        }
        Ok(())
    }

    pub fn base_params(&self) -> Result<ModelParams> {
        let p = match &self.base {
            BaseParams::Inline(p) => p.clone(),
            BaseParams::File(f) => ModelParams::load(f)?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn n_cells(&self) -> usize {
        self.axes.iter().map(Axis::len).product()
    }

    /// Axis coordinates of cell `idx` (row-major, first axis slowest).
    pub fn coords(&self, idx: usize) -> Vec<f64> {
        let mut rem = idx;
        let mut out = vec![0.0; self.axes.len()];
        for (k, axis) in self.axes.iter().enumerate().rev() {
            out[k] = axis.values[rem % axis.len()];
            rem /= axis.len();
        }
        out
    }

    fn cell_params(&self, base: &ModelParams, coords: &[f64]) -> Result<ModelParams> {
        let mut p = base.clone();
        for (axis, &v) in self.axes.iter().zip(coords) {
            set_param(&mut p, &axis.param, v)?;
        }
        p.validate()?;
        Ok(p)
    }

    fn effective_workers(&self) -> usize {
        let w = if self.workers == 0 {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        } else {
            self.workers
        };
        w.clamp(1, self.n_cells().max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub coords: Vec<f64>,
    pub verdict: AttractorKind,
    pub lambda_max: Option<f64>,
    pub converged: bool,
    pub regime: Option<RegimeTag>,
    pub runtime_ms: f64,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionAt {
    pub omega: f64,
    pub chaotic: usize,
    pub cells: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    /// Share of `Chaotic` cells among the `γ` cells at each `ω`.
    pub chaotic_fraction: Vec<FractionAt>,
    /// Cell counts by verdict name, and by regime for `analyze` jobs.
    pub counts: BTreeMap<String, usize>,
    /// Whether the base parameters sit in the periodic-solution set.
    pub base_in_u2: bool,
    pub seed_point: State2,
    /// How `seed_point` was obtained.
    pub seed_source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axes: Vec<Axis>,
    pub job: Job,
    pub base: ModelParams,
    pub cells: Vec<Cell>,
    pub summary: SweepSummary,
}

/// Initial point for forced runs: a point of the `γ = 0` limit cycle, or
/// just off `E₃` when there is no cycle to find.
pub fn seed_point(base: &ModelParams) -> (State2, String) {
    let autonomous = base.clone().with_forcing(0.0, base.omega);
    let e3 = endemic_e3(&autonomous).ok().flatten();
    if let Some(e3) = e3 {
        let guess = State2::new(e3.s + 0.01, e3.i);
        match locate_limit_cycle(&autonomous, guess, &ShootingOptions::default()) {
            Ok(c) => (c.section_point, "limit_cycle".into()),
            Err(e) => (guess, format!("e3_offset ({e})")),
        }
    } else {
        let a = base.capacity;
        (
            State2::new(0.5 * a, 0.1 * a),
            "no_endemic_equilibrium".into(),
        )
    }
}

/// Start point of cell `idx`: `x` displaced inside a disc of radius
/// [`JITTER_RADIUS`] drawn from the cell's own ChaCha stream.
pub fn jitter(seed: u64, idx: usize, x: State2) -> State2 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(idx as u64);
    let angle = rng.gen::<f64>() * std::f64::consts::TAU;
    let radius = JITTER_RADIUS * rng.gen::<f64>().sqrt();
    State2::new(
        (x.s + radius * angle.cos()).max(0.0),
        (x.i + radius * angle.sin()).max(0.0),
    )
}

fn run_cell(config: &SweepConfig, base: &ModelParams, x_seed: State2, idx: usize) -> Cell {
    let coords = config.coords(idx);
    let start = Instant::now();
    let mut cell = Cell {
        coords: coords.clone(),
        verdict: AttractorKind::Undetermined,
        lambda_max: None,
        converged: false,
        regime: None,
        runtime_ms: 0.0,
        note: None,
    };
    let outcome = (|| -> Result<()> {
        let p = config.cell_params(base, &coords)?;
        let x0 = jitter(config.seed, idx, x_seed);
        match config.job {
            Job::Classify => {
                let v = classify_attractor(&p, x0, &config.classify)?;
                cell.verdict = v.kind;
                cell.lambda_max = Some(v.lambda_max);
                cell.converged = v.converged;
            }
            Job::Lyapunov => {
                let (nt, nk) = config.classify.horizons(&p);
                let period = p.forcing_period();
                let mut integrator = config.classify.integrator.clone();
                integrator.dt_max = integrator.dt_max.min(period / 8.0);
                let est = largest_lyapunov(
                    &p,
                    x0,
                    &LyapunovOptions {
                        renorm_interval: period,
                        n_renorm: nk,
                        transient: nt,
                        integrator,
                    },
                )?;
                if est.converged && est.lambda_max > LAMBDA_CHAOS {
                    cell.verdict = AttractorKind::Chaotic;
                }
                cell.lambda_max = Some(est.lambda_max);
                cell.converged = est.window_spread < CONVERGENCE_TOL;
            }
            Job::Analyze => {
                cell.regime = Some(detect_regime(&p)?.tag);
            }
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        cell.verdict = AttractorKind::Undetermined;
        cell.note = Some(e.to_string());
    }
    cell.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    cell
}

/// Runs every cell of the grid on a pool of scoped threads, each taking a
/// contiguous block of cells.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let base = config.base_params()?;
    let (x_seed, seed_source) = match config.job {
        Job::Analyze => (State2::new(0.0, 0.0), "none".into()),
        _ => seed_point(&base),
    };
    let n = config.n_cells();
    let workers = config.effective_workers();
    let block = n.div_ceil(workers);
    let mut slots: Vec<Option<Cell>> = vec![None; n];
    std::thread::scope(|scope| {
        for (w, chunk) in slots.chunks_mut(block).enumerate() {
            let base = &base;
            scope.spawn(move || {
                for (k, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(run_cell(config, base, x_seed, w * block + k));
                }
            });
        }
    });
    let cells: Vec<Cell> = slots
        .into_iter()
        .map(|c| c.expect("every cell is filled"))
        .collect();
    let summary = summarize(config, &base, &cells, x_seed, seed_source);
    Ok(SweepResult {
        axes: config.axes.clone(),
        job: config.job,
        base,
        cells,
        summary,
    })
}

fn summarize(
    config: &SweepConfig,
    base: &ModelParams,
    cells: &[Cell],
    seed_point: State2,
    seed_source: String,
) -> SweepSummary {
    let omega_axis = config.axes.iter().position(|a| a.param == "omega");
    let mut by_omega: Vec<FractionAt> = match omega_axis {
        Some(k) => config.axes[k]
            .values
            .iter()
            .map(|&omega| FractionAt {
                omega,
                chaotic: 0,
                cells: 0,
                fraction: 0.0,
            })
            .collect(),
        None => vec![FractionAt {
            omega: base.omega,
            chaotic: 0,
            cells: 0,
            fraction: 0.0,
        }],
    };
    let mut counts = BTreeMap::new();
    for c in cells {
        let slot = match omega_axis {
            Some(k) => by_omega
                .iter()
                .position(|f| f.omega == c.coords[k])
                .expect("omega value from axis"),
            None => 0,
        };
        by_omega[slot].cells += 1;
        if c.verdict == AttractorKind::Chaotic {
            by_omega[slot].chaotic += 1;
        }
        let key = match (config.job, c.regime) {
            (Job::Analyze, Some(r)) => format!("{r:?}"),
            _ => c.verdict.name(),
        };
        *counts.entry(key).or_insert(0) += 1;
    }
    for f in &mut by_omega {
        f.fraction = if f.cells > 0 {
            f.chaotic as f64 / f.cells as f64
        } else {
            0.0
        };
    }
    SweepSummary {
        chaotic_fraction: by_omega,
        counts,
        base_in_u2: in_u2(base),
        seed_point,
        seed_source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeCell {
    pub coords: Vec<f64>,
    pub regime: Option<Regime>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeMap {
    pub axes: Vec<Axis>,
    pub cells: Vec<RegimeCell>,
}

/// Autonomous regime of every cell; `γ` and `ω` are ignored.
pub fn regime_map(config: &SweepConfig) -> Result<RegimeMap> {
    config.validate()?;
    let base = config.base_params()?.with_forcing(0.0, 1.0);
    let cells = (0..config.n_cells())
        .map(|idx| {
            let coords = config.coords(idx);
            match config.cell_params(&base, &coords).and_then(|mut p| {
                p.gamma = 0.0;
                detect_regime(&p)
            }) {
                Ok(r) => RegimeCell {
                    coords,
                    regime: Some(r),
                    note: None,
                },
                Err(e) => RegimeCell {
                    coords,
                    regime: None,
                    note: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(RegimeMap {
        axes: config.axes.clone(),
        cells,
    })
}

pub fn regime_code(tag: RegimeTag) -> i32 {
    match tag {
        RegimeTag::DiseaseFreeGlobal => 0,
        RegimeTag::BistableSink => 1,
        RegimeTag::LimitCycle => 2,
        RegimeTag::SupercriticalR0 => 3,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Gnuplot,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Gnuplot => "dat",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "gnuplot" | "gnuplot-dat" | "dat" => Ok(Format::Gnuplot),
            other => Err(Error::Config(format!("unknown format `{other}`"))),
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn axis_names(axes: &[Axis]) -> Vec<String> {
    axes.iter().map(|a| a.param.clone()).collect()
}

/// Matrix of `value(cell)` laid out as rows of the first axis and columns
/// of the second (a single column for one axis).
fn matrix_block<T>(
    axes: &[Axis],
    items: &[T],
    title: &str,
    value: impl Fn(&T) -> String,
) -> String {
    let cols = if axes.len() == 2 { axes[1].len() } else { 1 };
    let mut out = String::new();
    let _ = writeln!(out, "# {title}");
    match axes.len() {
        2 => {
            let _ = writeln!(out, "# rows: {} {:?}", axes[0].param, axes[0].values);
            let _ = writeln!(out, "# cols: {} {:?}", axes[1].param, axes[1].values);
        }
        1 => {
            let _ = writeln!(out, "# rows: {} {:?}", axes[0].param, axes[0].values);
        }
        _ => {}
    }
    for row in items.chunks(cols) {
        let line: Vec<String> = row.iter().map(&value).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out.push_str("\n\n");
    out
}

impl SweepResult {
    /// One row per cell. With `with_runtime = false` the runtime column is
    /// left empty so that repeated runs give identical files.
    pub fn to_csv(&self, with_runtime: bool) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = axis_names(&self.axes);
        header.extend(
            [
                "verdict",
                "regime",
                "lambda_max",
                "converged",
                "runtime_ms",
                "note",
            ]
            .map(String::from),
        );
        w.write_record(&header).map_err(csv_err)?;
        for c in &self.cells {
            let mut row: Vec<String> = c.coords.iter().map(f64::to_string).collect();
            row.push(c.verdict.name());
            row.push(c.regime.map(|r| format!("{r:?}")).unwrap_or_default());
            row.push(fmt_opt(c.lambda_max));
            row.push(c.converged.to_string());
            row.push(if with_runtime {
                format!("{:.3}", c.runtime_ms)
            } else {
                String::new()
            });
            row.push(c.note.clone().unwrap_or_default());
            w.write_record(&row).map_err(csv_err)?;
        }
        into_string(w)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    /// Verdict codes and `λ_max` as gnuplot matrix blocks (`index 0`, `index 1`).
    pub fn to_gnuplot(&self) -> String {
        let mut out = matrix_block(
            &self.axes,
            &self.cells,
            "verdict code: 0 fixed point, 1 periodic, 2 invariant curve, 3 chaotic, -1 undetermined",
            |c| c.verdict.code().to_string(),
        );
        out += &matrix_block(&self.axes, &self.cells, "lambda_max", |c| {
            c.lambda_max.map_or("NaN".into(), |l| format!("{l:e}"))
        });
        out
    }

    /// Writes `<stem>.<ext>` into `dir`, creating it if needed.
    pub fn export(&self, dir: &Path, stem: &str, format: Format) -> Result<PathBuf> {
        let body = match format {
            Format::Csv => self.to_csv(true)?,
            Format::Json => self.to_json()?,
            Format::Gnuplot => self.to_gnuplot(),
        };
        write_file(dir, stem, format, &body)
    }
}

impl RegimeMap {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = axis_names(&self.axes);
        header.extend(["regime", "degenerate", "r0", "phi0", "hopf_h", "note"].map(String::from));
        w.write_record(&header).map_err(csv_err)?;
        for c in &self.cells {
            let mut row: Vec<String> = c.coords.iter().map(f64::to_string).collect();
            match &c.regime {
                Some(r) => {
                    row.push(format!("{:?}", r.tag));
                    row.push(r.degenerate.to_string());
                    row.push(r.thresholds.r0.to_string());
                    row.push(r.thresholds.phi0.to_string());
                    row.push(fmt_opt(r.thresholds.hopf_h));
                }
                None => row.extend(std::iter::repeat_n(String::new(), 5)),
            }
            row.push(c.note.clone().unwrap_or_default());
            w.write_record(&row).map_err(csv_err)?;
        }
        into_string(w)
    }

    pub fn to_gnuplot(&self) -> String {
        matrix_block(
            &self.axes,
            &self.cells,
            "regime code: 0 disease-free, 1 bistable, 2 limit cycle, 3 R0 >= 1, -1 invalid",
            |c| c.regime.map_or(-1, |r| regime_code(r.tag)).to_string(),
        )
    }

    pub fn export(&self, dir: &Path, stem: &str, format: Format) -> Result<PathBuf> {
        let body = match format {
            Format::Csv => self.to_csv()?,
            Format::Json => {
                serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?
            }
            Format::Gnuplot => self.to_gnuplot(),
        };
        write_file(dir, stem, format, &body)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Config(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
}

fn write_file(dir: &Path, stem: &str, format: Format, body: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(format!("{stem}.{}", format.extension()));
    fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn analyze_config() -> SweepConfig {
        SweepConfig {
            axes: vec![
                Axis::linspace("A", 0.5, 1.2, 8).unwrap(),
                Axis::list("beta0", vec![0.5, 2.0]).unwrap(),
            ],
            job: Job::Analyze,
            workers: 3,
            ..Default::default()
        }
    }

    #[test]
    fn linspace_endpoints() {
        let a = Axis::linspace("gamma", 0.0, 0.15, 4).unwrap();
        assert_eq!(a.values.first(), Some(&0.0));
        assert_eq!(a.values.last(), Some(&0.15));
        assert_eq!(
            Axis::linspace("gamma", 0.0, 0.15, 1).unwrap().values,
            vec![0.0]
        );
    }

    #[test]
    fn axis_validation() {
        assert!(Axis::linspace("gamma", 0.0, 0.1, 0).is_err());
        assert!(Axis::linspace("gamma", 0.0, 0.0, 5).is_err());
        assert!(Axis::list("nope", vec![1.0]).is_err());
        let c = SweepConfig {
            axes: vec![Axis::gamma(0.1, 2).unwrap(); 3],
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn coords_are_row_major() {
        let c = analyze_config();
        assert_eq!(c.n_cells(), 16);
        assert_eq!(c.coords(0), vec![0.5, 0.5]);
        assert_eq!(c.coords(1), vec![0.5, 2.0]);
        assert_eq!(c.coords(15), vec![1.2, 2.0]);
    }

    #[test]
    fn r0_axis_hits_target() {
        let mut p = presets::near_hopf();
        set_param(&mut p, "R0", 0.9).unwrap();
        let r0 = crate::equilibria::basic_reproduction_number(&p).unwrap();
        assert!((r0 - 0.9).abs() < 1e-14);
    }

    #[test]
    fn jitter_is_deterministic_and_small() {
        let x = State2::new(0.4, 0.3);
        let a = jitter(7, 3, x);
        assert_eq!(a, jitter(7, 3, x));
        assert_ne!(a, jitter(7, 4, x));
        assert!((a.s - x.s).hypot(a.i - x.i) <= JITTER_RADIUS);
    }

    #[test]
    fn analyze_sweep_fills_grid() {
        let r = run_sweep(&analyze_config()).unwrap();
        assert_eq!(r.cells.len(), 16);
        assert!(r.cells.iter().all(|c| c.regime.is_some()));
        assert_eq!(r.summary.counts.values().sum::<usize>(), 16);
    }

    #[test]
    fn invalid_cells_become_notes() {
        let c = SweepConfig {
            axes: vec![Axis::list("mu", vec![0.2, -1.0]).unwrap()],
            job: Job::Analyze,
            ..Default::default()
        };
        let r = run_sweep(&c).unwrap();
        assert!(r.cells[0].note.is_none());
        assert!(r.cells[1].note.is_some());
        assert_eq!(r.cells[1].verdict, AttractorKind::Undetermined);
    }

    #[test]
    fn config_from_toml() {
        let c = SweepConfig::from_toml_str(
            r#"
            job = "classify"
            seed = 9
            workers = 2
            [base]
            A = 0.96
            a = 0.14
            r = 0.25
            beta0 = 2.0
            mu = 0.2
            [[axes]]
            param = "gamma"
            start = 0.0
            stop = 0.15
            n = 4
            [[axes]]
            param = "omega"
            values = [0.5, 32.0]
            [classify]
            kept_periods = 50
            "#,
        )
        .unwrap();
        assert_eq!(c.n_cells(), 8);
        assert_eq!(c.classify.kept_periods, 50);
        assert_eq!(c.classify.transient_periods, 300);
        assert_eq!(c.base_params().unwrap(), presets::near_hopf());
        assert!(SweepConfig::from_toml_str("[[axes]]\nparam = \"gamma\"\nn = 3").is_err());
    }

    #[test]
    fn gnuplot_block_shape() {
        let r = run_sweep(&analyze_config()).unwrap();
        let g = r.to_gnuplot();
        let block: Vec<&str> = g
            .split("\n\n\n")
            .next()
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('#'))
            .collect();
        assert_eq!(block.len(), 8);
        assert!(block.iter().all(|l| l.split_whitespace().count() == 2));
    }
}
