use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;
use surfdep::benchmarks;
use surfdep::copulas::{CopulaError, CopulaSpec, Family};
use surfdep::estimation::{
    fit_raw, parametric_bootstrap_many, read_series, rolling_lambda, simulation_study, EstimationError, GhKind, Measure, Model,
    ModelFamily, ResamplingConfig, RollingConfig,
};
use surfdep::ghdist::{GHParams, GhError, GhTabulation};
use surfdep::measures::{full_report, lambda_all, strong_tdc, MeasureError, MeshConfig};
use surfdep::numerics::{OptimConfig, RngStream};
use surfdep::surfaces::{write_surface_csv, Side, SurfaceSelector};

#[derive(Parser, Debug)]
#[command(name = "surfdep", version, about = "Surface-integral dependence measures for bivariate copulas")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
struct Common {
    /// mesh nodes per axis
    #[arg(long, global = true, default_value_t = 1000)]
    mesh: usize,
    /// focus parameters, comma separated (simulate defaults to 0.7)
    #[arg(long, global = true, value_delimiter = ',')]
    p: Option<Vec<f64>>,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// worker threads (default: all cores)
    #[arg(long, global = true, env = "SURFDEP_THREADS")]
    threads: Option<usize>,
    /// output file (default: stdout)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

/// Model selection: a JSON spec file and/or inline flags (inline wins).
#[derive(Args, Debug, Clone, Default, Serialize)]
struct ModelArgs {
    /// JSON file `{"family": ..., "params": {...}}`; GH-type families take
    /// GH parameters (lambda, alpha, beta, delta, mu, Delta)
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    family: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    theta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    rho: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    /// parameters in canonical order, comma separated
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    params: Option<Vec<f64>>,
    /// probability nodes per axis of GH copula tables
    #[arg(long, default_value_t = 512)]
    gh_grid: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Every measure for one copula
    Measure {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Recompute a published table and report deviations
    Table {
        /// table number: 2 and 3 (GH rows), 4, 5, 6 (closed-form families)
        #[arg(long)]
        id: u32,
        #[arg(long, default_value_t = 512)]
        gh_grid: usize,
    },
    /// Dump Ψ (or a difference of two Ψ) on a grid
    Surface {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "lower")]
        side: String,
        #[arg(long, default_value = "x|y")]
        direction: String,
        #[arg(long, default_value_t = 101)]
        grid: usize,
        /// second family subtracted from the first
        #[arg(long)]
        minus_family: Option<String>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        minus_params: Option<Vec<f64>>,
    },
    /// Fit a family to a `date,x,y` series
    Fit {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        input: PathBuf,
        /// parametric bootstrap replicates for Λ bands at the first p (0 = none)
        #[arg(long, default_value_t = 0)]
        bootstrap: usize,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
    },
    /// Monte Carlo study of estimated Λ
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        /// refit closed-form copulas to rank pseudo-observations of each draw
        #[arg(long)]
        rank_transform: bool,
    },
    /// Moving-window fits of a `date,x,y` series
    Rolling {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 500)]
        window: usize,
        #[arg(long, default_value_t = 0)]
        bootstrap: usize,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Measure { .. } => "measure",
            Command::Table { .. } => "table",
            Command::Surface { .. } => "surface",
            Command::Fit { .. } => "fit",
            Command::Simulate { .. } => "simulate",
            Command::Rolling { .. } => "rolling",
        }
    }
}

/// Failure with its process exit code.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let err: anyhow::Error = e.into();
        Failure { code: exit_code(&err), err }
    }
}

/// 2 for invalid specifications or settings, 1 otherwise.
fn exit_code(e: &anyhow::Error) -> u8 {
    let invalid_copula = |c: &CopulaError| {
        matches!(c, CopulaError::InvalidParameter { .. } | CopulaError::MissingParameter { .. } | CopulaError::UnknownFamily(_))
    };
    for cause in e.chain() {
        if cause.downcast_ref::<SpecError>().is_some() {
            return 2;
        }
        if let Some(c) = cause.downcast_ref::<CopulaError>() {
            if invalid_copula(c) {
                return 2;
            }
        }
        if let Some(GhError::Inadmissible(_)) = cause.downcast_ref::<GhError>() {
            return 2;
        }
        if let Some(MeasureError::Focus(_) | MeasureError::Mesh(_)) = cause.downcast_ref::<MeasureError>() {
            return 2;
        }
        if let Some(est) = cause.downcast_ref::<EstimationError>() {
            match est {
                EstimationError::Copula(c) if invalid_copula(c) => return 2,
                EstimationError::Gh(GhError::Inadmissible(_)) => return 2,
                EstimationError::Measure(MeasureError::Focus(_) | MeasureError::Mesh(_)) | EstimationError::Config(_) => return 2,
                _ => {}
            }
        }
    }
    1
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct SpecError(String);

#[derive(Serialize)]
struct RunManifest {
    command: String,
    config: Value,
    seed: u64,
    mesh: MeshConfig,
    version: String,
    fixture_version: u32,
    duration_seconds: f64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(t) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

fn mesh_of(c: &Common) -> Result<MeshConfig, Failure> {
    let m = MeshConfig { n: c.mesh, ..MeshConfig::default() };
    m.validate().map_err(|e| Failure { code: 2, err: e.into() })?;
    Ok(m)
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    let started = Instant::now();
    let c = &cli.common;
    let mesh = mesh_of(c)?;
    let mut buf: Vec<u8> = Vec::new();
    let (config, code) = match &cli.cmd {
        Command::Measure { model } => {
            let m = resolve_model(model)?;
            let ps = c.p.clone().unwrap_or_else(|| vec![1.0]);
            let spec = m.copula(&tab(model.gh_grid))?;
            let rep = full_report(&spec, &ps, &mesh)?;
            match c.format {
                Format::Json => writeln!(buf, "{}", serde_json::to_string_pretty(&rep)?)?,
                Format::Csv => rep.write_csv(&mut buf, true)?,
            }
            (json!({ "model": m.to_json(), "p": ps, "gh_grid": model.gh_grid }), 0)
        }
        Command::Table { id, gh_grid } => {
            let failed = table(*id, &mesh, *gh_grid, &mut buf)?;
            (json!({ "table": id, "gh_grid": gh_grid }), if failed { 3 } else { 0 })
        }
        Command::Surface { model, side, direction, grid, minus_family, minus_params } => {
            let sel = SurfaceSelector::parse(side, direction)
                .ok_or_else(|| SpecError(format!("unknown surface '{side}' '{direction}'")))?;
            if *grid < 32 {
                return Err(SpecError(format!("grid ≥ 32 required, got {grid}")).into());
            }
            let m = resolve_model(model)?;
            let spec = m.copula(&tab(model.gh_grid))?;
            let minus = match minus_family {
                Some(f) => {
                    let margs = ModelArgs {
                        family: Some(f.clone()),
                        params: minus_params.clone(),
                        gh_grid: model.gh_grid,
                        ..ModelArgs::default()
                    };
                    Some(resolve_model(&margs)?.copula(&tab(model.gh_grid))?)
                }
                None => None,
            };
            write_surface_csv(&mut buf, &spec, minus.as_ref(), sel, *grid)?;
            let mj = minus.as_ref().map(|s| s.to_json());
            (json!({ "model": m.to_json(), "minus": mj, "selector": sel, "grid": grid }), 0)
        }
        Command::Fit { model, input, bootstrap, level } => {
            let fam = resolve_family(model)?;
            let series = read_series(BufReader::new(File::open(input).with_context(|| input.display().to_string())?))?;
            let data: Vec<[f64; 2]> = series.iter().map(|r| [r.x, r.y]).collect();
            let fit = fit_raw(fam, &data, None, &OptimConfig::default())?;
            let ps = c.p.clone().unwrap_or_else(|| vec![1.0]);
            let rcfg = ResamplingConfig { mesh, gh: tab(model.gh_grid), ..ResamplingConfig::default() };
            let report = full_report(&fit.model.copula(&rcfg.gh)?, &ps, &mesh)?;
            let bands = if *bootstrap > 0 {
                let ms = Measure::lambdas(&ps[..1]);
                Some(parametric_bootstrap_many(&fit, &ms, *bootstrap, *level, &RngStream::new(c.seed, 0), &rcfg)?)
            } else {
                None
            };
            match c.format {
                Format::Json => {
                    let out = json!({ "fit": fit.to_json(), "report": report, "bootstrap": bands });
                    writeln!(buf, "{}", serde_json::to_string_pretty(&out)?)?
                }
                Format::Csv => report.write_csv(&mut buf, true)?,
            }
            (json!({ "family": fam.name(), "input": input, "p": ps, "bootstrap": bootstrap, "level": level }), 0)
        }
        Command::Simulate { model, n, reps, rank_transform } => {
            let m = resolve_model(model)?;
            let ps = c.p.clone().unwrap_or_else(|| vec![benchmarks::SIMULATION_P]);
            let rcfg = ResamplingConfig { mesh, gh: tab(model.gh_grid), rank_transform: *rank_transform, ..ResamplingConfig::default() };
            let rep = simulation_study(&m, *n, *reps, &ps, &rcfg, &RngStream::new(c.seed, 0))?;
            match c.format {
                Format::Json => writeln!(buf, "{}", serde_json::to_string_pretty(&rep)?)?,
                Format::Csv => rep.write_csv(&mut buf)?,
            }
            (json!({ "model": m.to_json(), "n": n, "reps": reps, "p": ps, "rank_transform": rank_transform }), 0)
        }
        Command::Rolling { model, input, window, bootstrap, level } => {
            let fam = resolve_family(model)?;
            let series = read_series(BufReader::new(File::open(input).with_context(|| input.display().to_string())?))?;
            let ps = c.p.clone().unwrap_or_else(|| vec![1.0]);
            let cfg = RollingConfig {
                window: *window,
                family: fam,
                ps: ps.clone(),
                resampling: ResamplingConfig { mesh, gh: tab(model.gh_grid), ..ResamplingConfig::default() },
                bootstrap: (*bootstrap > 0).then_some((*bootstrap, *level, c.seed)),
            };
            let res = rolling_lambda(&series, &cfg)?;
            match c.format {
                Format::Json => writeln!(buf, "{}", serde_json::to_string_pretty(&res)?)?,
                Format::Csv => res.write_csv(&mut buf)?,
            }
            (json!({ "family": fam.name(), "input": input, "window": window, "p": ps, "bootstrap": bootstrap, "level": level }), 0)
        }
    };
    match &c.out {
        Some(path) => {
            std::fs::write(path, &buf).with_context(|| path.display().to_string())?;
            let manifest = RunManifest {
                command: cli.cmd.name().to_string(),
                config: json!({ "common": c, "command": config }),
                seed: c.seed,
                mesh,
                version: env!("CARGO_PKG_VERSION").to_string(),
                fixture_version: benchmarks::VERSION,
                duration_seconds: started.elapsed().as_secs_f64(),
            };
            let mpath = manifest_path(path);
            let mut w = BufWriter::new(File::create(&mpath).with_context(|| mpath.display().to_string())?);
            writeln!(w, "{}", serde_json::to_string_pretty(&manifest)?)?;
        }
        None => std::io::stdout().write_all(&buf)?,
    }
    Ok(code)
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn tab(grid_n: usize) -> GhTabulation {
    GhTabulation { grid_n, ..GhTabulation::default() }
}

// ---------------------------------------------------------------------------
// model resolution

/// Family and parameter object from the spec file, then inline flags on top.
fn merged(args: &ModelArgs) -> Result<(String, Map<String, Value>), Failure> {
    let (mut family, mut params) = match &args.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| path.display().to_string())?;
            let v: Value = serde_json::from_str(&text).map_err(|e| SpecError(format!("{}: {e}", path.display())))?;
            let f = v.get("family").and_then(Value::as_str).map(String::from);
            let p = v.get("params").and_then(Value::as_object).cloned().unwrap_or_default();
            (f, p)
        }
        None => (None, Map::new()),
    };
    if let Some(f) = &args.family {
        if let Some(old) = &family {
            if old != f {
                log::warn!("--family {f} overrides '{old}' from the spec file; its parameters are dropped");
                params.clear();
            }
        }
        family = Some(f.clone());
    }
    let family = family.ok_or_else(|| SpecError("no family given (use --family or --spec)".into()))?;
    let mut set = |name: &str, val: Option<f64>| {
        if let Some(x) = val {
            if let Some(old) = params.get(name).and_then(Value::as_f64) {
                if old != x {
                    log::warn!("--{name} {x} overrides {old} from the spec file");
                }
            }
            params.insert(name.to_string(), json!(x));
        }
    };
    if let Ok(ModelFamily::Copula(f)) = ModelFamily::parse(&family) {
        if let Some(list) = &args.params {
            for (name, x) in f.param_names().iter().zip(list) {
                set(name, Some(*x));
            }
        }
    }
    set("theta", args.theta);
    set("alpha", args.alpha);
    set("beta", args.beta);
    set("rho", args.rho);
    set("nu", args.nu);
    Ok((family, params))
}

fn resolve_family(args: &ModelArgs) -> Result<ModelFamily, Failure> {
    let (family, _) = merged(args)?;
    Ok(ModelFamily::parse(&family)?)
}

fn resolve_model(args: &ModelArgs) -> Result<Model, Failure> {
    let (family, params) = merged(args)?;
    match ModelFamily::parse(&family)? {
        ModelFamily::Copula(Family::TabulatedGh) | ModelFamily::Gh(_) => {
            let kind = match ModelFamily::parse(&family)? {
                ModelFamily::Gh(k) => k,
                _ => GhKind::Gh,
            };
            let p: GHParams = serde_json::from_value(Value::Object(params))
                .map_err(|e| SpecError(format!("GH parameters (lambda, alpha, beta, delta, mu, Delta) required: {e}")))?;
            p.validate()?;
            Ok(Model::Gh { kind, params: p })
        }
        ModelFamily::Copula(f) => {
            let spec = CopulaSpec::from_json(&json!({ "family": f.name(), "params": params }))?;
            Ok(Model::Copula(spec))
        }
    }
}

// ---------------------------------------------------------------------------
// tables

/// Writes the table as CSV; returns true when some row failed.
fn table(id: u32, mesh: &MeshConfig, gh_grid: usize, out: &mut Vec<u8>) -> Result<bool, Failure> {
    let mut w = csv::Writer::from_writer(out);
    let tags = ["lower_xy", "lower_yx", "upper_xy", "upper_yx"];
    let mut failed = false;
    let mut emit = |w: &mut csv::Writer<&mut Vec<u8>>,
                    row: usize,
                    label: &str,
                    computed: Result<Vec<f64>, anyhow::Error>,
                    published: &[Option<f64>]|
     -> Result<(), Failure> {
        let mut rec = vec![row.to_string(), label.to_string()];
        match computed {
            Ok(vals) => {
                let diff = vals
                    .iter()
                    .zip(published)
                    .filter_map(|(c, p)| p.map(|p| (c - p).abs()))
                    .fold(0.0, f64::max);
                rec.extend(vals.iter().map(|v| format!("{v:.4}")));
                rec.extend(published.iter().map(|p| p.map(|x| x.to_string()).unwrap_or_default()));
                rec.push(format!("{diff:.4}"));
                rec.push("ok".into());
            }
            Err(e) => {
                failed = true;
                rec.extend(std::iter::repeat_n(String::new(), 2 * published.len() + 1));
                rec.push(format!("error: {e:#}"));
            }
        }
        w.write_record(&rec)?;
        w.flush()?;
        Ok(())
    };
    let header = |cols: &[String]| -> Vec<String> {
        let mut h = vec!["row".to_string(), "model".to_string()];
        h.extend(cols.iter().cloned());
        h.extend(cols.iter().map(|c| format!("published_{c}")));
        h.push("max_abs_diff".into());
        h.push("status".into());
        h
    };
    let kappa_cols: Vec<String> = tags.iter().map(|t| format!("kappa_{t}")).chain(["tau".into(), "rho".into()]).collect();
    let lambda_cols = |ps: &[&str]| -> Vec<String> {
        ps.iter().flat_map(|p| tags.iter().map(move |t| format!("lambda_{t}_p{p}"))).collect()
    };
    let some = |v: &[f64]| v.iter().map(|x| Some(*x)).collect::<Vec<_>>();
    match id {
        4 => {
            w.write_record(header(&kappa_cols))?;
            for (i, r) in benchmarks::CONCORDANCE.iter().enumerate() {
                let computed = (|| -> anyhow::Result<Vec<f64>> {
                    let rep = full_report(&r.spec()?, &[], mesh)?;
                    let mut v: Vec<f64> = SurfaceSelector::ALL.iter().map(|s| rep.surface(*s).kappa).collect();
                    v.extend([rep.tau, rep.rho]);
                    Ok(v)
                })();
                let mut publ = some(&r.kappa);
                publ.extend([Some(r.tau), Some(r.rho)]);
                let label = format!("{}({})", r.family, r.params.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","));
                emit(&mut w, i + 1, &label, computed, &publ)?;
            }
        }
        5 | 6 => {
            let (rows, p, pname) = if id == 5 { (&benchmarks::LAMBDA_P1, 1.0, "1") } else { (&benchmarks::LAMBDA_P07, 0.7, "0.7") };
            let mut cols = lambda_cols(&[pname]);
            if id == 5 {
                cols.push("strong_tdc".into());
            }
            w.write_record(header(&cols))?;
            for (i, r) in rows.iter().enumerate() {
                let computed = (|| -> anyhow::Result<Vec<f64>> {
                    let spec = r.spec()?;
                    let mut v = lambda_all(&spec, &[p], mesh)?[0].to_vec();
                    if id == 5 {
                        v.push(strong_tdc(&spec, Side::Lower).value.max(strong_tdc(&spec, Side::Upper).value));
                    }
                    Ok(v)
                })();
                let mut publ = some(&r.values);
                if id == 5 {
                    publ.push(benchmarks::STRONG_TDC[i]);
                }
                emit(&mut w, i + 1, &r.label(), computed, &publ)?;
            }
        }
        2 | 3 => {
            let cols = if id == 2 { kappa_cols.clone() } else { lambda_cols(&["1", "0.7"]) };
            w.write_record(header(&cols))?;
            for (i, (name, params)) in benchmarks::gh_rows().into_iter().enumerate() {
                let computed = (|| -> anyhow::Result<Vec<f64>> {
                    let spec = Model::Gh { kind: GhKind::Gh, params }.copula(&tab(gh_grid))?;
                    if id == 2 {
                        let rep = full_report(&spec, &[], mesh)?;
                        let mut v: Vec<f64> = SurfaceSelector::ALL.iter().map(|s| rep.surface(*s).kappa).collect();
                        v.extend([rep.tau, rep.rho]);
                        Ok(v)
                    } else {
                        let l = lambda_all(&spec, &[1.0, 0.7], mesh)?;
                        Ok(l.iter().flat_map(|x| x.to_vec()).collect())
                    }
                })();
                let publ = if id == 2 {
                    let (k, t, r) = benchmarks::GH_CONCORDANCE[i];
                    let mut v = some(&k);
                    v.extend([Some(t), Some(r)]);
                    v
                } else {
                    let (a, b) = benchmarks::GH_LAMBDA[i];
                    let mut v = some(&a);
                    v.extend(some(&b));
                    v
                };
                emit(&mut w, i + 1, name, computed, &publ)?;
            }
        }
        other => return Err(SpecError(format!("unknown table {other}; expected one of 2, 3, 4, 5, 6")).into()),
    }
    Ok(failed)
}
