use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use seasonal_sir::attractor::{
    classify_attractor, largest_lyapunov, locate_limit_cycle, stroboscopic_orbit, ClassifyOptions,
    LyapunovOptions, ShootingOptions,
};
use seasonal_sir::equilibria::analyze;
use seasonal_sir::integrate::{
    integrate_model, section_crossings, Direction, FieldKind, IntegratorOptions, Section,
};
use seasonal_sir::model::{presets, ExtendedSystem, ModelParams, ReducedSystem, State2};
use seasonal_sir::sweep::{regime_map, run_sweep, Format, SweepConfig};

#[derive(Parser)]
#[command(
    name = "sirf",
    version,
    about = "Seasonally forced SIR model with saturated treatment"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Args)]
struct Global {
    /// Parameter file (analyze, simulate, poincare, lyapunov) or sweep file (TOML/JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; results go to stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output formats (repeatable).
    #[arg(long, global = true, value_enum)]
    format: Vec<OutFormat>,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum OutFormat {
    Csv,
    Json,
    Gnuplot,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::Csv => Format::Csv,
            OutFormat::Json => Format::Json,
            OutFormat::Gnuplot => Format::Gnuplot,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Thresholds, equilibria, stability and regime of the autonomous system.
    Analyze,
    /// Integrate one trajectory.
    Simulate(SimulateArgs),
    /// Section crossings, optionally with limit-cycle shooting.
    Poincare(PoincareArgs),
    /// Largest Lyapunov exponent and attractor verdict.
    Lyapunov(LyapunovArgs),
    /// Grid sweep described by a sweep file.
    Sweep,
    /// Autonomous regime over a grid described by a sweep file.
    RegimeMap,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value = "reduced")]
    system: String,
    /// Initial state, comma separated (`S,I`, `S,I,R` or `S,I,theta`).
    #[arg(long, default_value = "0.8333,0.3666")]
    x0: String,
    #[arg(long, default_value_t = 500.0)]
    t_end: f64,
    /// Fixed RK4 step; adaptive Dormand–Prince when omitted.
    #[arg(long)]
    rk4: Option<f64>,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 1)]
    stride: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dir {
    Positive,
    Negative,
    Both,
}

#[derive(Args)]
struct PoincareArgs {
    #[arg(long, default_value = "0.8333,0.3666")]
    x0: String,
    /// Stroboscopic section `θ = 0`; otherwise the line `S = S₃` through `E₃`.
    #[arg(long)]
    phase: bool,
    #[arg(long, value_enum, default_value = "negative")]
    direction: Dir,
    #[arg(long, default_value_t = 2000.0)]
    t_end: f64,
    /// Also locate the autonomous limit cycle by shooting.
    #[arg(long)]
    shoot: bool,
}

#[derive(Args)]
struct LyapunovArgs {
    #[arg(long, default_value = "0.8333,0.3666")]
    x0: String,
    #[arg(long)]
    transient: Option<usize>,
    #[arg(long)]
    periods: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
}

fn parse_state(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .with_context(|| format!("bad number `{t}` in `{s}`"))
        })
        .collect()
}

fn state2(s: &str) -> Result<State2> {
    match parse_state(s)?[..] {
        [a, b] => Ok(State2::new(a, b)),
        _ => bail!("expected `S,I`, got `{s}`"),
    }
}

fn load_params(g: &Global) -> Result<ModelParams> {
    match &g.config {
        Some(p) => Ok(ModelParams::load(p)?),
        None => Ok(presets::near_hopf()),
    }
}

fn load_sweep(g: &Global) -> Result<SweepConfig> {
    let path = g
        .config
        .as_ref()
        .context("--config <sweep file> is required")?;
    let mut c = SweepConfig::load(path)?;
    if let Some(w) = g.workers {
        c.workers = w;
    }
    if let Some(s) = g.seed {
        c.seed = s;
    }
    Ok(c)
}

fn formats(g: &Global, default: OutFormat) -> Vec<OutFormat> {
    if g.format.is_empty() {
        vec![default]
    } else {
        g.format.clone()
    }
}

/// Writes `body` to `<out>/<name>` or to stdout.
fn emit(g: &Global, name: &str, body: &str) -> Result<()> {
    match &g.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join(name);
            std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes())?;
            if !body.ends_with('\n') {
                writeln!(out)?;
            }
        }
    }
    Ok(())
}

fn csv_table(header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(f64::to_string))?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn cmd_analyze(g: &Global) -> Result<()> {
    let p = load_params(g)?;
    let report = analyze(&p)?;
    for f in formats(g, OutFormat::Json) {
        match f {
            OutFormat::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(seasonal_sir::equilibria::AnalysisReport::CSV_HEADER)?;
                w.write_record(report.csv_row())?;
                emit(g, "analysis.csv", &String::from_utf8(w.into_inner()?)?)?;
            }
            _ => emit(g, "analysis.json", &serde_json::to_string_pretty(&report)?)?,
        }
    }
    Ok(())
}

fn cmd_simulate(g: &Global, a: &SimulateArgs) -> Result<()> {
    let p = load_params(g)?;
    let kind: FieldKind = a.system.parse()?;
    let mut x0 = parse_state(&a.x0)?;
    if kind.dimension() == 3 && x0.len() == 2 {
        x0.push(0.0);
    }
    let mut opts = match a.rk4 {
        Some(dt) => IntegratorOptions::rk4(dt, (0.0, a.t_end)),
        None => IntegratorOptions::adaptive(a.tol, (0.0, a.t_end)),
    };
    opts.record_stride = a.stride;
    let tr = integrate_model(kind, &x0, &p, &opts)?;
    let mut header = vec!["t"];
    header.extend_from_slice(kind.columns());
    let rows = tr.times.iter().zip(&tr.states).map(|(t, x)| {
        let mut r = vec![*t];
        r.extend_from_slice(x);
        r
    });
    emit(g, "trajectory.csv", &csv_table(&header, rows)?)?;
    if g.out.is_some() {
        emit(
            g,
            "trajectory_stats.json",
            &serde_json::to_string_pretty(&tr.stats)?,
        )?;
    } else {
        eprintln!("{}", serde_json::to_string(&tr.stats)?);
    }
    Ok(())
}

fn cmd_poincare(g: &Global, a: &PoincareArgs) -> Result<()> {
    let p = load_params(g)?;
    let x0 = state2(&a.x0)?;
    let direction = match a.direction {
        Dir::Positive => Direction::Positive,
        Dir::Negative => Direction::Negative,
        Dir::Both => Direction::Both,
    };
    let opts = IntegratorOptions::adaptive(1e-10, (0.0, a.t_end));
    let body = if a.phase {
        let sys = ExtendedSystem::new(&p)?;
        let section = Section::Phase {
            theta0: 0.0,
            period: p.forcing.period(),
        };
        let hits = section_crossings(
            &sys,
            [x0.s, x0.i, 0.0],
            &opts,
            &section,
            Direction::Positive,
        )?;
        csv_table(
            &["t", "S", "I"],
            hits.iter().map(|c| vec![c.t, c.state[0], c.state[1]]),
        )?
    } else {
        let e3 = seasonal_sir::equilibria::endemic_e3(&p)?
            .context("no endemic equilibrium E3 to place the section through")?;
        let sys = ReducedSystem::new(&p)?;
        let section = Section::Line {
            point: [e3.s, e3.i],
            normal: [1.0, 0.0],
        };
        let hits = section_crossings(&sys, x0.to_array(), &opts, &section, direction)?;
        csv_table(
            &["t", "S", "I"],
            hits.iter().map(|c| vec![c.t, c.state[0], c.state[1]]),
        )?
    };
    emit(g, "section.csv", &body)?;
    if a.shoot {
        let verdict = match locate_limit_cycle(&p, x0, &ShootingOptions::default()) {
            Ok(c) => serde_json::json!({
                "found": true,
                "section_point": c.section_point,
                "period": c.period,
                "floquet_multiplier": c.floquet_multiplier,
                "liouville_multiplier": c.liouville_multiplier,
            }),
            Err(e) => serde_json::json!({ "found": false, "reason": e.to_string() }),
        };
        emit(g, "cycle.json", &serde_json::to_string_pretty(&verdict)?)?;
    }
    Ok(())
}

fn cmd_lyapunov(g: &Global, a: &LyapunovArgs) -> Result<()> {
    let p = load_params(g)?;
    let x0 = state2(&a.x0)?;
    let mut opts = ClassifyOptions::default();
    if let Some(n) = a.transient {
        opts.transient_periods = n;
        opts.min_transient_time = 0.0;
    }
    if let Some(n) = a.periods {
        opts.kept_periods = n;
        opts.min_kept_time = 0.0;
    }
    if let Some(t) = a.tol {
        opts = opts.with_tolerance(t);
    }
    let verdict = classify_attractor(&p, x0, &opts)?;
    let (nt, nk) = opts.horizons(&p);
    let period = p.forcing_period();
    let est = largest_lyapunov(
        &p,
        x0,
        &LyapunovOptions {
            renorm_interval: period,
            n_renorm: nk,
            transient: nt,
            integrator: opts.integrator.clone(),
        },
    )?;
    emit(
        g,
        "verdict.json",
        &serde_json::to_string_pretty(&serde_json::json!({
            "verdict": verdict.kind.name(),
            "lambda_max": verdict.lambda_max,
            "converged": verdict.converged,
            "diagnostics": verdict.diagnostics,
        }))?,
    )?;
    if g.out.is_some() {
        let hist = est
            .history
            .iter()
            .enumerate()
            .map(|(k, l)| vec![(k + 1) as f64 * period, *l]);
        emit(
            g,
            "lyapunov_history.csv",
            &csv_table(&["t", "lambda"], hist)?,
        )?;
        let orbit = stroboscopic_orbit(&p, x0, nt, nk)?;
        let rows = orbit.points.iter().map(|q| vec![q.s, q.i]);
        emit(g, "stroboscopic.csv", &csv_table(&["S", "I"], rows)?)?;
    }
    Ok(())
}

fn write_all<F>(g: &Global, dir: &Path, default: OutFormat, export: F) -> Result<()>
where
    F: Fn(&Path, Format) -> seasonal_sir::Result<PathBuf>,
{
    for f in formats(g, default) {
        let path = export(dir, f.into())?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn out_dir(g: &Global, c: &SweepConfig) -> PathBuf {
    g.out
        .clone()
        .or_else(|| c.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."))
}

fn cmd_sweep(g: &Global) -> Result<()> {
    let c = load_sweep(g)?;
    let result = run_sweep(&c)?;
    for f in &result.summary.chaotic_fraction {
        eprintln!(
            "omega = {}: chaotic fraction {} ({}/{})",
            f.omega, f.fraction, f.chaotic, f.cells
        );
    }
    if !result.summary.base_in_u2 {
        eprintln!("warning: base parameters are outside the periodic-solution set");
    }
    write_all(g, &out_dir(g, &c), OutFormat::Csv, |d, f| {
        result.export(d, "sweep", f)
    })
}

fn cmd_regime_map(g: &Global) -> Result<()> {
    let c = load_sweep(g)?;
    let map = regime_map(&c)?;
    write_all(g, &out_dir(g, &c), OutFormat::Csv, |d, f| {
        map.export(d, "regime_map", f)
    })
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let g = &cli.global;
    let res = match &cli.command {
        Command::Analyze => cmd_analyze(g),
        Command::Simulate(a) => cmd_simulate(g, a),
        Command::Poincare(a) => cmd_poincare(g, a),
        Command::Lyapunov(a) => cmd_lyapunov(g, a),
        Command::Sweep => cmd_sweep(g),
        Command::RegimeMap => cmd_regime_map(g),
    };
    // a closed stdout (`sirf ... | head`) is not an error
    match res {
        Err(e)
            if e.downcast_ref::<std::io::Error>()
                .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe) =>
        {
            Ok(())
        }
        other => other,
    }
}
