mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use tmpnn::lattice::desk_ring;
use tmpnn::systems::{self, NoiseSpec};
use tmpnn::{
    estimate_frequency, fine_tune, ode_to_map_with_order, reference_trajectory,
    symplectic_residual, train_one_shot, DeskRing, FlowConfig, Lattice, LossReport, Network,
    ObservationSeries, PolynomialOde, SymplecticStructure, TaylorMap, TrainConfig,
};

use manifest::Recorder;

/// Taylor-map polynomial networks: derive maps from ODEs, fine-tune them from
/// one trajectory, track lattices and estimate tunes.
#[derive(Debug, Parser)]
#[command(name = "tmpnn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Derive the Taylor map of an ODE over one time step.
    Derive(DeriveArgs),
    /// Apply a map repeatedly and write the trajectory.
    Simulate(SimulateArgs),
    /// Write an observation CSV from a system trajectory or one lattice turn.
    Observe(ObserveArgs),
    /// Fine-tune a shared map chain or a lattice from one observation series.
    Train(TrainArgs),
    /// Write a desk-scale FODO ring lattice.
    Ring(RingArgs),
    /// Track a ring over many turns.
    Track(TrackArgs),
    /// Estimate horizontal and vertical tunes from a turn series.
    Tunes(TunesArgs),
    /// Report the symplectic residual of a map or of every lattice element.
    Check(CheckArgs),
}

#[derive(Debug, Args, Serialize)]
struct OdeSource {
    /// Built-in system name.
    #[arg(long, conflicts_with = "ode")]
    system: Option<String>,
    /// Polynomial ODE JSON file.
    #[arg(long)]
    ode: Option<PathBuf>,
    /// System parameter override `key=value`; repeatable.
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, f64)>,
}

#[derive(Debug, Args, Serialize)]
struct DeriveArgs {
    #[command(flatten)]
    source: OdeSource,
    #[arg(long)]
    dt: f64,
    #[arg(long, default_value_t = FlowConfig::DEFAULT_SUBSTEPS)]
    substeps: usize,
    /// Map order; defaults to the ODE order.
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    /// Map JSON file; otherwise the map is derived from the ODE source.
    #[arg(long, conflicts_with_all = ["system", "ode"])]
    map: Option<PathBuf>,
    #[command(flatten)]
    source: OdeSource,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value_t = FlowConfig::DEFAULT_SUBSTEPS)]
    substeps: usize,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long, value_parser = parse_vector)]
    x0: Vector,
    #[arg(long)]
    steps: usize,
    /// Also write the dense RK4 reference as `<name>_ref` columns.
    #[arg(long)]
    oracle: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct ObserveArgs {
    /// Record one turn of monitor readings of this lattice instead.
    #[arg(long, conflicts_with_all = ["system", "ode"])]
    lattice: Option<PathBuf>,
    #[command(flatten)]
    source: OdeSource,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, value_parser = parse_vector)]
    x0: Vector,
    #[arg(long)]
    steps: Option<usize>,
    /// Observed component names, comma separated; all by default.
    #[arg(long, value_delimiter = ',')]
    observe: Vec<String>,
    /// Standard deviation of Gaussian noise added to observed entries.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    /// Initial map, repeated `--layers` times with shared weights.
    #[arg(long, conflicts_with = "lattice", requires = "layers")]
    map: Option<PathBuf>,
    #[arg(long)]
    layers: Option<usize>,
    /// Lattice whose elements are fine-tuned from monitor readings.
    #[arg(long)]
    lattice: Option<PathBuf>,
    /// Observation CSV (`tap,<components>`).
    #[arg(long)]
    obs: PathBuf,
    #[arg(long, value_parser = parse_vector)]
    x0: Vector,
    /// Training configuration as `key = value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    clip: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Weight degrees held fixed, comma separated.
    #[arg(long, value_delimiter = ',')]
    frozen_degrees: Option<Vec<usize>>,
    #[arg(long)]
    out: PathBuf,
    /// Loss history CSV; defaults to `<out>.loss.csv`.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct RingArgs {
    /// Ring parameter `key=value` (cells, kf, kd, quad_length, drift_length,
    /// sextupole, sextupole_length, order); repeatable.
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, f64)>,
    /// Element index whose focusing strength is scaled by `--factor`.
    #[arg(long, requires = "factor")]
    perturb: Option<usize>,
    #[arg(long)]
    factor: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct TrackArgs {
    #[arg(long)]
    lattice: PathBuf,
    #[arg(long, value_parser = parse_vector)]
    x0: Vector,
    #[arg(long)]
    turns: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct TunesArgs {
    /// Turn-series CSV with `x` and `y` columns.
    #[arg(long)]
    series: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
enum Structure {
    /// `(q1..qm, p1..pm)`.
    Canonical,
    /// `(q1, p1, q2, p2, ..)`.
    Interleaved,
}

#[derive(Debug, Args, Serialize)]
struct CheckArgs {
    #[arg(long, conflicts_with = "lattice", required_unless_present = "lattice")]
    map: Option<PathBuf>,
    #[arg(long)]
    lattice: Option<PathBuf>,
    /// Defaults to canonical for maps and interleaved for lattices.
    #[arg(long, value_enum)]
    structure: Option<Structure>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Debug, Serialize)]
#[serde(transparent)]
struct Vector(Vec<f64>);

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got {s:?}"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("{s:?}: {e}"))?;
    Ok((k.trim().to_string(), v))
}

fn parse_vector(s: &str) -> Result<Vector, String> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()
        .map(Vector)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Derive(a) => derive(&a),
        Command::Simulate(a) => simulate(&a),
        Command::Observe(a) => observe(&a),
        Command::Train(a) => train(&a),
        Command::Ring(a) => ring(&a),
        Command::Track(a) => track(&a),
        Command::Tunes(a) => tunes(&a),
        Command::Check(a) => check(&a),
    }
}

/// The ODE and its component names.
fn load_ode(source: &OdeSource, rec: &mut Recorder) -> Result<(PolynomialOde, Vec<String>)> {
    match (&source.system, &source.ode) {
        (Some(name), None) => {
            let s = systems::build_system(name, &source.params)?;
            Ok((s.ode, s.components))
        }
        (None, Some(path)) => {
            if !source.params.is_empty() {
                bail!("--param applies to built-in systems only");
            }
            let ode = PolynomialOde::from_json(&rec.read(path)?)
                .with_context(|| format!("parsing {}", path.display()))?;
            let names = ObservationSeries::default_names(ode.dim());
            Ok((ode, names))
        }
        _ => bail!("give exactly one of --system or --ode"),
    }
}

fn ensure_finite<'a>(what: &str, values: impl IntoIterator<Item = &'a f64>) -> Result<()> {
    if values.into_iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        bail!("{what} contains non-finite values")
    }
}

fn derive(a: &DeriveArgs) -> Result<()> {
    let mut rec = Recorder::new("derive", a, None)?;
    let (ode, _) = load_ode(&a.source, &mut rec)?;
    let cfg = FlowConfig::new(a.dt).with_substeps(a.substeps);
    let map = ode_to_map_with_order(&ode, a.order.unwrap_or(ode.order()), &cfg)?;
    ensure_finite("map", map.weights().iter())?;
    rec.write(&a.out, (map.to_json()? + "\n").as_bytes())?;
    rec.finish(&a.out)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let mut rec = Recorder::new("simulate", a, None)?;
    let (map, ode, names) = match &a.map {
        Some(path) => {
            if a.oracle {
                bail!("--oracle needs an ODE source (--system or --ode)");
            }
            let map = TaylorMap::from_json(&rec.read(path)?)
                .with_context(|| format!("parsing {}", path.display()))?;
            let names = ObservationSeries::default_names(map.dim());
            (map, None, names)
        }
        None => {
            let (ode, names) = load_ode(&a.source, &mut rec)?;
            let dt = a.dt.ok_or_else(|| anyhow!("--dt is required with an ODE source"))?;
            let cfg = FlowConfig::new(dt).with_substeps(a.substeps);
            let map = ode_to_map_with_order(&ode, a.order.unwrap_or(ode.order()), &cfg)?;
            (map, Some((ode, dt)), names)
        }
    };
    let states = Network::shared_chain(map, a.steps)?.states(&a.x0.0)?;
    let reference = match (&ode, a.oracle) {
        (Some((ode, dt)), true) => Some(reference_trajectory(ode, &a.x0.0, *dt, a.steps)?),
        _ => None,
    };

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["step".to_string()];
    header.extend(names.iter().cloned());
    if reference.is_some() {
        header.extend(names.iter().map(|n| format!("{n}_ref")));
    }
    w.write_record(&header)?;
    for (i, s) in states.iter().enumerate() {
        ensure_finite("trajectory", s)?;
        let mut row = vec![i.to_string()];
        row.extend(s.iter().map(|v| v.to_string()));
        if let Some(r) = &reference {
            row.extend(r[i].iter().map(|v| v.to_string()));
        }
        w.write_record(&row)?;
    }
    rec.write(&a.out, &w.into_inner().map_err(|e| anyhow!("{e}"))?)?;
    rec.finish(&a.out)?;
    println!("wrote {} ({} steps)", a.out.display(), a.steps);
    Ok(())
}

fn observe(a: &ObserveArgs) -> Result<()> {
    let mut rec = Recorder::new("observe", a, Some(a.seed))?;
    let series = match &a.lattice {
        Some(path) => {
            if !a.observe.is_empty() || a.noise != 0.0 {
                bail!("lattice readings are noise-free (x, y) monitor values");
            }
            load_lattice(path, &mut rec)?.observe_turn(&a.x0.0)?
        }
        None => {
            let (ode, names) = load_ode(&a.source, &mut rec)?;
            let dt = a.dt.ok_or_else(|| anyhow!("--dt is required"))?;
            let steps = a.steps.ok_or_else(|| anyhow!("--steps is required"))?;
            let mask: Vec<bool> = if a.observe.is_empty() {
                vec![true; names.len()]
            } else {
                for o in &a.observe {
                    if !names.contains(o) {
                        bail!("unknown component {o:?}; components are {}", names.join(","));
                    }
                }
                names.iter().map(|n| a.observe.contains(n)).collect()
            };
            let noise = if a.noise > 0.0 {
                NoiseSpec::gaussian(a.noise, a.seed)
            } else {
                NoiseSpec::none()
            };
            let states = reference_trajectory(&ode, &a.x0.0, dt, steps)?;
            systems::observe(&states, names, &mask, &noise)?
        }
    };
    let mut buf = Vec::new();
    series.write_csv(&mut buf)?;
    rec.write(&a.out, &buf)?;
    rec.finish(&a.out)?;
    println!("wrote {} ({} records)", a.out.display(), series.records().len());
    Ok(())
}

fn load_lattice(path: &Path, rec: &mut Recorder) -> Result<Lattice> {
    Lattice::from_json(&rec.read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn train_config(a: &TrainArgs, rec: &mut Recorder) -> Result<TrainConfig> {
    let mut cfg = match &a.config {
        Some(path) => TrainConfig::from_key_values(&rec.read(path)?)
            .with_context(|| format!("parsing {}", path.display()))?,
        None => TrainConfig::default(),
    };
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.lr {
        cfg.step_size = v;
    }
    if let Some(v) = a.clip {
        cfg.clip_norm = v;
    }
    if let Some(v) = a.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = &a.frozen_degrees {
        cfg.frozen_degrees = v.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn train(a: &TrainArgs) -> Result<()> {
    let mut rec = Recorder::new("train", a, a.seed)?;
    let cfg = train_config(a, &mut rec)?;
    let obs = ObservationSeries::read_csv(rec.read(&a.obs)?.as_bytes())
        .with_context(|| format!("parsing {}", a.obs.display()))?;
    let (output, report): (String, LossReport) = match (&a.map, &a.lattice) {
        (Some(path), None) => {
            let map = TaylorMap::from_json(&rec.read(path)?)
                .with_context(|| format!("parsing {}", path.display()))?;
            let layers = a.layers.ok_or_else(|| anyhow!("--layers is required with --map"))?;
            let net = Network::shared_chain(map, layers)?;
            let (trained, report) = train_one_shot(&net, &a.x0.0, &obs, &cfg)?;
            ensure_finite("trained map", trained.group(0).weights().iter())?;
            (trained.group(0).to_json()?, report)
        }
        (None, Some(path)) => {
            let lattice = load_lattice(path, &mut rec)?;
            let (tuned, report) = fine_tune(&lattice, &a.x0.0, &obs, &cfg)?;
            for m in tuned.maps() {
                ensure_finite("tuned lattice", m.weights().iter())?;
            }
            (tuned.to_json()?, report)
        }
        _ => bail!("give exactly one of --map or --lattice"),
    };
    let history = a.history.clone().unwrap_or_else(|| {
        let mut name = a.out.file_name().unwrap_or_default().to_os_string();
        name.push(".loss.csv");
        a.out.with_file_name(name)
    });
    rec.write(&a.out, (output + "\n").as_bytes())?;
    rec.write(&history, report.to_csv().as_bytes())?;
    rec.finish(&a.out)?;
    let (first, last) = (report.initial().unwrap(), report.last().unwrap());
    println!(
        "loss {:e} -> {:e} over {} epochs; wrote {} and {}",
        first.total,
        last.total,
        cfg.epochs,
        a.out.display(),
        history.display()
    );
    Ok(())
}

fn ring(a: &RingArgs) -> Result<()> {
    let mut rec = Recorder::new("ring", a, None)?;
    let mut p = DeskRing::default();
    for (k, v) in &a.params {
        let count = || -> Result<usize> {
            if *v < 1.0 || v.fract() != 0.0 {
                bail!("{k} must be a positive integer");
            }
            Ok(*v as usize)
        };
        match k.as_str() {
            "cells" => p.cells = count()?,
            "order" => p.order = count()?,
            "kf" => p.kf = *v,
            "kd" => p.kd = *v,
            "quad_length" => p.quad_length = *v,
            "drift_length" => p.drift_length = *v,
            "sextupole" => p.sextupole = *v,
            "sextupole_length" => p.sextupole_length = *v,
            _ => bail!("unknown ring parameter {k:?}"),
        }
    }
    let mut lattice = desk_ring(&p)?;
    if let (Some(index), Some(factor)) = (a.perturb, a.factor) {
        lattice = lattice.perturb_element(index, factor)?;
    }
    rec.write(&a.out, (lattice.to_json()? + "\n").as_bytes())?;
    rec.finish(&a.out)?;
    println!("wrote {} ({} elements)", a.out.display(), lattice.len());
    Ok(())
}

fn track(a: &TrackArgs) -> Result<()> {
    let mut rec = Recorder::new("track", a, None)?;
    let lattice = load_lattice(&a.lattice, &mut rec)?;
    let series = lattice.multi_turn(&a.x0.0, a.turns)?;
    let mut buf = Vec::new();
    series.write_csv(&mut buf)?;
    rec.write(&a.out, &buf)?;
    rec.finish(&a.out)?;
    println!("wrote {} ({} turns)", a.out.display(), series.len());
    Ok(())
}

#[derive(Debug, Serialize)]
struct TunesReport {
    qx: f64,
    qy: f64,
    degenerate_x: bool,
    degenerate_y: bool,
    samples: usize,
}

fn tunes(a: &TunesArgs) -> Result<()> {
    let mut rec = Recorder::new("tunes", a, None)?;
    let text = rec.read(&a.series)?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    let column = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("{} has no {name:?} column", a.series.display()))
    };
    let (cx, cy) = (column("x")?, column("y")?);
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for row in reader.records() {
        let row = row?;
        let get = |c: usize| -> Result<f64> {
            row.get(c)
                .unwrap_or("")
                .parse()
                .with_context(|| format!("bad value in row {:?}", row.position().map(|p| p.line())))
        };
        x.push(get(cx)?);
        y.push(get(cy)?);
    }
    let (fx, fy) = (estimate_frequency(&x)?, estimate_frequency(&y)?);
    let report = TunesReport {
        qx: fx.frequency,
        qy: fy.frequency,
        degenerate_x: fx.degenerate,
        degenerate_y: fy.degenerate,
        samples: x.len(),
    };
    rec.write(&a.out, (serde_json::to_string_pretty(&report)? + "\n").as_bytes())?;
    rec.finish(&a.out)?;
    println!("Qx {} Qy {}", report.qx, report.qy);
    Ok(())
}

#[derive(Debug, Serialize)]
struct ElementCheck {
    name: String,
    penalty: f64,
    max_abs_residual: f64,
    constraints: usize,
}

fn residual_report(name: &str, map: &TaylorMap, form: &SymplecticStructure) -> Result<ElementCheck> {
    let r = symplectic_residual(map, form)?;
    let max_abs_residual = r
        .entries
        .iter()
        .flat_map(|e| e.coeffs.iter())
        .fold(0.0f64, |m, c| m.max(c.abs()));
    Ok(ElementCheck {
        name: name.to_string(),
        penalty: r.penalty(),
        max_abs_residual,
        constraints: r.constraint_count(),
    })
}

fn structure(kind: Structure, n: usize) -> Result<SymplecticStructure> {
    Ok(match kind {
        Structure::Canonical => SymplecticStructure::canonical(n)?,
        Structure::Interleaved => SymplecticStructure::interleaved(n)?,
    })
}

fn check(a: &CheckArgs) -> Result<()> {
    let mut rec = Recorder::new("check", a, None)?;
    let checks = match (&a.map, &a.lattice) {
        (Some(path), None) => {
            let map = TaylorMap::from_json(&rec.read(path)?)
                .with_context(|| format!("parsing {}", path.display()))?;
            let form = structure(a.structure.unwrap_or(Structure::Canonical), map.dim())?;
            vec![residual_report("map", &map, &form)?]
        }
        (None, Some(path)) => {
            let lattice = load_lattice(path, &mut rec)?;
            let form = structure(a.structure.unwrap_or(Structure::Interleaved), 4)?;
            lattice
                .elements()
                .iter()
                .map(|e| residual_report(&e.name, &e.map, &form))
                .collect::<Result<Vec<_>>>()?
        }
        _ => bail!("give exactly one of --map or --lattice"),
    };
    ensure_finite("penalty", checks.iter().map(|c| &c.penalty))?;
    let total: f64 = checks.iter().map(|c| c.penalty).sum();
    let report = serde_json::json!({ "total_penalty": total, "elements": checks });
    rec.write(&a.out, (serde_json::to_string_pretty(&report)? + "\n").as_bytes())?;
    rec.finish(&a.out)?;
    for c in &checks {
        println!("{} penalty {:e} max residual {:e}", c.name, c.penalty, c.max_abs_residual);
    }
    Ok(())
}
