//! Pseudo-observations, copula maximum likelihood, parametric bootstrap,
//! Monte Carlo studies of estimated measures and the rolling-window driver.
//!
//! Closed-form families are fitted to rank pseudo-observations; GH-type
//! models are fitted to the raw observations by full likelihood and enter
//! the measures through their tabulated implied copula.

use crate::copulas::{CopulaError, CopulaSpec, Family, UnitSquarePoint};
use crate::ghdist::{gh_fit, gh_implied_copula_with, gh_sample, GHParams, GhError, GhFitOptions, GhTabulation};
use crate::measures::{classical_concordance, full_report, MeasureError, MeshConfig};
use crate::numerics::{brent_root, nelder_mead, GaussLegendre, NumericsError, OptimConfig, RngStream};
use crate::surfaces::SurfaceSelector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("at least {need} observations required, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("{0} has no density; maximum likelihood is not available")]
    NoDensity(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("input: {0}")]
    Input(String),
    #[error(transparent)]
    Copula(#[from] CopulaError),
    #[error(transparent)]
    Gh(#[from] GhError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, EstimationError>;

// ---------------------------------------------------------------------------
// pseudo-observations

/// Average ranks (1-based) with ties sharing their mean rank.
fn average_ranks(x: &[f64]) -> Result<Vec<f64>> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(EstimationError::Input("non-finite observation".into()));
    }
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    Ok(r)
}

/// Rank transform u_i = rank(x_i)/(n+1), v_i likewise.
pub fn pseudo_observations(data: &[[f64; 2]]) -> Result<Vec<UnitSquarePoint>> {
    let n = data.len();
    if n < 2 {
        return Err(EstimationError::TooFew { need: 2, got: n });
    }
    let mut cols = Vec::with_capacity(2);
    for c in 0..2 {
        let x: Vec<f64> = data.iter().map(|z| z[c]).collect();
        if x.iter().all(|&v| v == x[0]) {
            return Err(EstimationError::Degenerate(format!("column {} is constant", c + 1)));
        }
        cols.push(average_ranks(&x)?);
    }
    let d = (n + 1) as f64;
    Ok((0..n).map(|i| UnitSquarePoint { u: cols[0][i] / d, v: cols[1][i] / d }).collect())
}

/// Sample Kendall τ (τ-a on ranks; ties contribute zero).
pub fn empirical_tau(pts: &[UnitSquarePoint]) -> f64 {
    // O(n²); thin very long samples
    let stride = pts.len().div_ceil(3000).max(1);
    let p: Vec<&UnitSquarePoint> = pts.iter().step_by(stride).collect();
    let n = p.len();
    if n < 2 {
        return 0.0;
    }
    let mut s = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            let a = (p[i].u - p[j].u) * (p[i].v - p[j].v);
            s += (a > 0.0) as i64 - (a < 0.0) as i64;
        }
    }
    2.0 * s as f64 / (n * (n - 1)) as f64
}

// ---------------------------------------------------------------------------
// models

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GhKind {
    /// free λ
    Gh,
    /// λ = −1/2
    Nig,
    /// δ = 0
    Vg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelFamily {
    Copula(Family),
    Gh(GhKind),
}

impl ModelFamily {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "gh" | "generalized_hyperbolic" => ModelFamily::Gh(GhKind::Gh),
            "nig" => ModelFamily::Gh(GhKind::Nig),
            "vg" | "variance_gamma" => ModelFamily::Gh(GhKind::Vg),
            other => ModelFamily::Copula(Family::parse(other)?),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelFamily::Copula(f) => f.name(),
            ModelFamily::Gh(GhKind::Gh) => "gh",
            ModelFamily::Gh(GhKind::Nig) => "nig",
            ModelFamily::Gh(GhKind::Vg) => "vg",
        }
    }
}

/// A fully specified dependence model: a copula, or a GH law whose implied
/// copula is tabulated on demand.
#[derive(Debug, Clone)]
pub enum Model {
    Copula(CopulaSpec),
    Gh { kind: GhKind, params: GHParams },
}

impl Model {
    pub fn family(&self) -> ModelFamily {
        match self {
            Model::Copula(s) => ModelFamily::Copula(s.family()),
            Model::Gh { kind, .. } => ModelFamily::Gh(*kind),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Model::Copula(s) => s.label(),
            Model::Gh { kind, .. } => ModelFamily::Gh(*kind).name().to_string(),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Model::Copula(s) => s.to_json(),
            Model::Gh { kind, params } => json!({ "family": ModelFamily::Gh(*kind).name(), "params": params }),
        }
    }

    /// The copula used by the measures.
    pub fn copula(&self, tab: &GhTabulation) -> Result<CopulaSpec> {
        match self {
            Model::Copula(s) => Ok(s.clone()),
            Model::Gh { params, .. } => Ok(CopulaSpec::tabulated(Arc::new(gh_implied_copula_with(params, tab)?))),
        }
    }

    /// n raw draws: uniforms for copulas, GH variates otherwise.
    pub fn sample_raw(&self, n: usize, stream: &RngStream) -> Result<Vec<[f64; 2]>> {
        match self {
            Model::Copula(s) => Ok(s.sample(n, stream).into_iter().map(|p| [p.u, p.v]).collect()),
            Model::Gh { params, .. } => Ok(gh_sample(params, n, stream)?),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: Model,
    pub loglik: f64,
    pub converged: bool,
    pub n_obs: usize,
    pub iterations: usize,
}

impl FitResult {
    pub fn to_json(&self) -> Value {
        json!({
            "model": self.model.to_json(),
            "loglik": self.loglik,
            "converged": self.converged,
            "n_obs": self.n_obs,
            "iterations": self.iterations,
        })
    }
}

// ---------------------------------------------------------------------------
// copula maximum likelihood

/// Unconstrained coordinates → natural parameters.
fn natural(family: Family, y: &[f64]) -> Vec<f64> {
    match family {
        Family::GumbelHougaard => vec![1.0 + y[0].exp()],
        Family::Clayton => vec![y[0].exp()],
        Family::Frank => vec![y[0]],
        Family::AliMikhailHaq | Family::Gaussian => vec![y[0].tanh()],
        Family::StudentT => vec![y[0].tanh(), y[1].exp()],
        _ => vec![],
    }
}

fn unconstrained(family: Family, p: &[f64]) -> Vec<f64> {
    match family {
        Family::GumbelHougaard => vec![(p[0] - 1.0).max(1e-3).ln()],
        Family::Clayton => vec![p[0].max(1e-3).ln()],
        Family::Frank => vec![p[0]],
        Family::AliMikhailHaq | Family::Gaussian => vec![p[0].clamp(-0.999, 0.999).atanh()],
        Family::StudentT => vec![p[0].clamp(-0.999, 0.999).atanh(), p[1].ln()],
        _ => vec![],
    }
}

/// Frank τ = 1 − 4/θ·(1 − D₁(θ)), D₁ the first Debye function.
fn frank_tau(theta: f64) -> f64 {
    let gl = GaussLegendre::new(32);
    let d1 = gl.integrate(0.0, theta, |t| if t == 0.0 { 1.0 } else { t / t.exp_m1() }) / theta;
    1.0 - 4.0 / theta * (1.0 - d1)
}

/// Method-of-moments start from the sample τ.
fn tau_start(family: Family, tau: f64) -> Vec<f64> {
    let tau = tau.clamp(-0.95, 0.95);
    match family {
        Family::GumbelHougaard => vec![(1.0 / (1.0 - tau)).max(1.05)],
        Family::Clayton => vec![(2.0 * tau / (1.0 - tau)).max(0.05)],
        Family::Frank => {
            let t = if tau.abs() < 1e-3 { 1e-3f64.copysign(tau + 1e-300) } else { tau };
            let th = brent_root(|x| frank_tau(x) - t, if t > 0.0 { 1e-3 } else { -200.0 }, if t > 0.0 { 200.0 } else { -1e-3 }, 1e-8)
                .unwrap_or(if t > 0.0 { 1.0 } else { -1.0 });
            vec![th]
        }
        Family::AliMikhailHaq => {
            let f = |th: f64| CopulaSpec::amh(th).ok().and_then(|s| s.analytic_tau()).unwrap_or(0.0) - tau;
            vec![brent_root(f, -0.999, 0.999, 1e-8).unwrap_or(if tau > 0.0 { 0.9 } else { -0.9 })]
        }
        Family::Gaussian => vec![(PI * tau / 2.0).sin().clamp(-0.98, 0.98)],
        Family::StudentT => vec![(PI * tau / 2.0).sin().clamp(-0.98, 0.98), 5.0],
        _ => vec![],
    }
}

fn copula_loglik(spec: &CopulaSpec, pts: &[UnitSquarePoint]) -> f64 {
    let mut s = 0.0;
    for p in pts {
        match spec.ln_density(p.u, p.v) {
            Ok(l) if l.is_finite() => s += l,
            _ => return f64::NEG_INFINITY,
        }
    }
    s
}

/// Maximum likelihood for an absolutely continuous family on
/// pseudo-observations; optimization runs over unconstrained coordinates
/// (θ = 1+eᵃ for Gumbel, eᵃ for Clayton, tanh a for AMH/Gaussian/t's ρ,
/// eᵇ for t's ν) from a τ-inversion start.
pub fn copula_mle(family: Family, pseudo: &[UnitSquarePoint], cfg: &OptimConfig) -> Result<FitResult> {
    if !family.has_density() || family == Family::TabulatedGh {
        return Err(EstimationError::NoDensity(family.name()));
    }
    const MIN_N: usize = 30;
    if pseudo.len() < MIN_N {
        return Err(EstimationError::TooFew { need: MIN_N, got: pseudo.len() });
    }
    if pseudo.iter().any(|p| !(p.u > 0.0 && p.u < 1.0 && p.v > 0.0 && p.v < 1.0)) {
        return Err(EstimationError::Input("pseudo-observations must lie strictly inside the unit square".into()));
    }
    if family == Family::Independence {
        return Ok(FitResult {
            model: Model::Copula(CopulaSpec::independence()),
            loglik: 0.0,
            converged: true,
            n_obs: pseudo.len(),
            iterations: 0,
        });
    }
    let start = tau_start(family, empirical_tau(pseudo));
    let objective = |y: &[f64]| -> f64 {
        match CopulaSpec::from_params(family, &natural(family, y)) {
            Ok(s) => -copula_loglik(&s, pseudo),
            Err(_) => f64::INFINITY,
        }
    };
    let mut r = nelder_mead(objective, &unconstrained(family, &start), cfg)?;
    let again = nelder_mead(objective, &r.x, cfg)?;
    if again.f <= r.f {
        r = crate::numerics::OptimResult { iterations: r.iterations + again.iterations, ..again };
    }
    let spec = CopulaSpec::from_params(family, &natural(family, &r.x))?;
    Ok(FitResult { model: Model::Copula(spec), loglik: -r.f, converged: r.converged, n_obs: pseudo.len(), iterations: r.iterations })
}

/// Default GH start: β = 0, δ = 1 (0 for VG), Δ the sample covariance
/// scaled to unit determinant, μ the sample mean.
pub fn gh_start(kind: GhKind, data: &[[f64; 2]]) -> Result<GHParams> {
    let n = data.len() as f64;
    let m = [data.iter().map(|z| z[0]).sum::<f64>() / n, data.iter().map(|z| z[1]).sum::<f64>() / n];
    let mut s = [[0.0; 2]; 2];
    for z in data {
        let d = [z[0] - m[0], z[1] - m[1]];
        for i in 0..2 {
            for j in 0..2 {
                s[i][j] += d[i] * d[j] / n;
            }
        }
    }
    let det = s[0][0] * s[1][1] - s[0][1] * s[0][1];
    if !(det > 0.0) {
        return Err(EstimationError::Degenerate("sample covariance is singular".into()));
    }
    let k = det.sqrt().recip();
    let disp = [[s[0][0] * k, s[0][1] * k], [s[0][1] * k, s[1][1] * k]];
    let (lambda, delta) = match kind {
        GhKind::Gh => (1.0, 1.0),
        GhKind::Nig => (-0.5, 1.0),
        GhKind::Vg => (1.0, 0.0),
    };
    Ok(GHParams::new(lambda, 1.5, [0.0, 0.0], delta, m, disp)?)
}

/// Fits `family` to raw observations: closed-form copulas via
/// pseudo-observations, GH-type models by full likelihood from `init`
/// (or [`gh_start`]).
pub fn fit_raw(family: ModelFamily, data: &[[f64; 2]], init: Option<&GHParams>, cfg: &OptimConfig) -> Result<FitResult> {
    match family {
        ModelFamily::Copula(f) => copula_mle(f, &pseudo_observations(data)?, cfg),
        ModelFamily::Gh(kind) => {
            let start = match init {
                Some(p) => *p,
                None => gh_start(kind, data)?,
            };
            let fit = gh_fit(data, &start, cfg, GhFitOptions { fix_lambda: kind == GhKind::Nig })?;
            Ok(FitResult {
                model: Model::Gh { kind, params: fit.params },
                loglik: fit.loglik,
                converged: fit.converged,
                n_obs: data.len(),
                iterations: fit.iterations,
            })
        }
    }
}

// ---------------------------------------------------------------------------
// measures of a fitted model

/// A scalar measure of a copula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "measure", rename_all = "snake_case")]
pub enum Measure {
    Delta { selector: SurfaceSelector },
    Kappa { selector: SurfaceSelector },
    DeltaBar { selector: SurfaceSelector },
    Lambda { selector: SurfaceSelector, p: f64 },
    Tau,
    Rho,
    Sigma,
}

impl Measure {
    pub fn name(&self) -> &'static str {
        match self {
            Measure::Delta { .. } => "delta",
            Measure::Kappa { .. } => "kappa",
            Measure::DeltaBar { .. } => "delta_bar",
            Measure::Lambda { .. } => "lambda",
            Measure::Tau => "tau",
            Measure::Rho => "rho",
            Measure::Sigma => "sigma",
        }
    }

    pub fn selector(&self) -> Option<SurfaceSelector> {
        match *self {
            Measure::Delta { selector } | Measure::Kappa { selector } | Measure::DeltaBar { selector } => Some(selector),
            Measure::Lambda { selector, .. } => Some(selector),
            _ => None,
        }
    }

    pub fn p(&self) -> Option<f64> {
        match *self {
            Measure::Lambda { p, .. } => Some(p),
            _ => None,
        }
    }

    /// The four Λ surfaces at each p.
    pub fn lambdas(ps: &[f64]) -> Vec<Measure> {
        ps.iter().flat_map(|&p| SurfaceSelector::ALL.map(|selector| Measure::Lambda { selector, p })).collect()
    }
}

/// Evaluates several measures on one tabulation of the copula.
pub fn evaluate_measures(spec: &CopulaSpec, measures: &[Measure], mesh: &MeshConfig) -> Result<Vec<f64>> {
    let surface = measures.iter().any(|m| m.selector().is_some());
    let concord = measures.iter().any(|m| m.selector().is_none());
    let mut ps: Vec<f64> = Vec::new();
    for m in measures {
        if let Some(p) = m.p() {
            if !ps.contains(&p) {
                ps.push(p);
            }
        }
    }
    let report = if surface { Some(full_report(spec, &ps, mesh)?) } else { None };
    let tr = match (&report, concord) {
        (Some(r), _) => Some((r.tau, r.rho, r.sigma)),
        (None, true) => Some(classical_concordance(spec, mesh)?),
        _ => None,
    };
    Ok(measures
        .iter()
        .map(|m| {
            let r = report.as_ref();
            match *m {
                Measure::Delta { selector } => r.map(|r| r.surface(selector).delta),
                Measure::Kappa { selector } => r.map(|r| r.surface(selector).kappa),
                Measure::DeltaBar { selector } => r.map(|r| r.surface(selector).delta_bar),
                Measure::Lambda { selector, p } => r.and_then(|r| r.surface(selector).lambda_at(p)),
                Measure::Tau => tr.map(|t| t.0),
                Measure::Rho => tr.map(|t| t.1),
                Measure::Sigma => tr.map(|t| t.2),
            }
            .expect("requested measure was computed")
        })
        .collect())
}

/// Settings shared by the resampling drivers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResamplingConfig {
    pub mesh: MeshConfig,
    pub optim: OptimConfig,
    pub gh: GhTabulation,
    /// Refit closed-form copulas to rank pseudo-observations of each draw
    /// instead of the drawn uniforms themselves (margins treated as known).
    pub rank_transform: bool,
}

impl Default for ResamplingConfig {
    fn default() -> Self {
        Self { mesh: MeshConfig::default(), optim: OptimConfig::default(), gh: GhTabulation::default(), rank_transform: false }
    }
}

/// One replicate: draw n from `truth`, refit its family, evaluate measures.
/// GH refits start from the generating parameters.
fn replicate(truth: &Model, n: usize, measures: &[Measure], cfg: &ResamplingConfig, stream: &RngStream) -> Result<Vec<f64>> {
    let raw = truth.sample_raw(n, stream)?;
    let init = match truth {
        Model::Gh { params, .. } => Some(params),
        Model::Copula(_) => None,
    };
    let fit = match truth.family() {
        ModelFamily::Copula(f) if !cfg.rank_transform => {
            let pts: Vec<UnitSquarePoint> = raw.iter().map(|z| UnitSquarePoint { u: z[0], v: z[1] }).collect();
            copula_mle(f, &pts, &cfg.optim)?
        }
        fam => fit_raw(fam, &raw, init, &cfg.optim)?,
    };
    if !fit.converged {
        log::debug!("replicate {}: optimizer did not converge", stream.stream_id);
    }
    evaluate_measures(&fit.model.copula(&cfg.gh)?, measures, &cfg.mesh)
}

/// Runs `reps` replicates in parallel; replicate r uses substream r.
fn replicates(truth: &Model, n: usize, reps: usize, measures: &[Measure], cfg: &ResamplingConfig, stream: &RngStream) -> Vec<Option<Vec<f64>>> {
    (0..reps as u64)
        .into_par_iter()
        .map(|r| match replicate(truth, n, measures, cfg, &stream.substream(r)) {
            Ok(v) => Some(v),
            Err(e) => {
                log::warn!("replicate {r} failed: {e}");
                None
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// parametric bootstrap

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapBand {
    pub measure: Measure,
    pub point_estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    #[serde(rename = "B")]
    pub b: usize,
    pub failures: usize,
    /// more than 5% of replicate fits failed
    pub unreliable: bool,
    pub note: Option<String>,
}

/// Linear-interpolation empirical quantile of sorted data.
fn quantile_sorted(x: &[f64], q: f64) -> f64 {
    let h = (x.len() - 1) as f64 * q;
    let i = h.floor() as usize;
    let j = (i + 1).min(x.len() - 1);
    x[i] + (h - i as f64) * (x[j] - x[i])
}

fn band_from(measure: Measure, point: f64, mut vals: Vec<f64>, b: usize, level: f64) -> BootstrapBand {
    let failures = b - vals.len();
    let unreliable = failures as f64 > 0.05 * b as f64;
    if vals.is_empty() {
        return BootstrapBand {
            measure,
            point_estimate: point,
            lower: f64::NAN,
            upper: f64::NAN,
            level,
            b,
            failures,
            unreliable: true,
            note: Some("every replicate failed".into()),
        };
    }
    vals.sort_by(f64::total_cmp);
    let lower = quantile_sorted(&vals, (1.0 - level) / 2.0);
    let upper = quantile_sorted(&vals, (1.0 + level) / 2.0);
    let note = if !(lower <= point && point <= upper) {
        let s = format!("point estimate {point} outside the percentile band [{lower}, {upper}]");
        log::info!("{s}");
        Some(s)
    } else {
        None
    };
    BootstrapBand { measure, point_estimate: point, lower, upper, level, b, failures, unreliable, note }
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(EstimationError::Config(format!("level must lie in (0,1), got {level}")));
    }
    Ok(())
}

/// Percentile bands for several measures from one set of B refits of the
/// fitted model.
pub fn parametric_bootstrap_many(
    fit: &FitResult,
    measures: &[Measure],
    b: usize,
    level: f64,
    stream: &RngStream,
    cfg: &ResamplingConfig,
) -> Result<Vec<BootstrapBand>> {
    check_level(level)?;
    if b == 0 {
        return Err(EstimationError::Config("B must be positive".into()));
    }
    if b < 100 {
        log::warn!("B = {b} replicates is below the recommended minimum of 100");
    }
    if !fit.converged {
        log::warn!("bootstrapping a fit whose optimizer did not converge");
    }
    let point = evaluate_measures(&fit.model.copula(&cfg.gh)?, measures, &cfg.mesh)?;
    let reps = replicates(&fit.model, fit.n_obs, b, measures, cfg, stream);
    Ok(measures
        .iter()
        .enumerate()
        .map(|(k, m)| band_from(*m, point[k], reps.iter().flatten().map(|v| v[k]).collect(), b, level))
        .collect())
}

pub fn parametric_bootstrap(
    fit: &FitResult,
    measure: Measure,
    b: usize,
    level: f64,
    stream: &RngStream,
    cfg: &ResamplingConfig,
) -> Result<BootstrapBand> {
    Ok(parametric_bootstrap_many(fit, &[measure], b, level, stream, cfg)?.remove(0))
}

// ---------------------------------------------------------------------------
// simulation study

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub measure: String,
    pub side: String,
    pub direction: String,
    pub p: Option<f64>,
    pub true_value: f64,
    pub mean: f64,
    pub std_dev: f64,
    pub bias: f64,
    pub mse: f64,
    pub n: usize,
    pub reps: usize,
    pub failures: usize,
}

/// Moments use the population convention (divide by the number of
/// successful replicates), so mse = bias² + std_dev² exactly.
pub const VARIANCE_CONVENTION: &str = "population";

pub const SIMULATION_CSV_HEADER: [&str; 12] =
    ["measure", "side", "direction", "p", "true_value", "mean", "std_dev", "bias", "mse", "n", "reps", "failures"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationReport {
    pub model: Value,
    pub variance_convention: String,
    pub summaries: Vec<SimulationSummary>,
}

impl SimulationReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(SIMULATION_CSV_HEADER)?;
        for s in &self.summaries {
            wr.serialize((
                &s.measure, &s.side, &s.direction, s.p, s.true_value, s.mean, s.std_dev, s.bias, s.mse, s.n, s.reps, s.failures,
            ))?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Vec<SimulationSummary>> {
        let mut rd = csv::Reader::from_reader(r);
        let mut out = Vec::new();
        for rec in rd.deserialize() {
            out.push(rec?);
        }
        Ok(out)
    }

    pub fn find(&self, measure: &str, sel: SurfaceSelector, p: f64) -> Option<&SimulationSummary> {
        self.summaries
            .iter()
            .find(|s| s.measure == measure && s.side == sel.side_name() && s.direction == sel.direction_name() && s.p == Some(p))
    }
}

pub fn summarize(measure: &Measure, true_value: f64, vals: &[f64], n: usize, reps: usize) -> SimulationSummary {
    let k = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / k;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k;
    let bias = mean - true_value;
    let (side, direction) = measure
        .selector()
        .map(|s| (s.side_name().to_string(), s.direction_name().to_string()))
        .unwrap_or_default();
    SimulationSummary {
        measure: measure.name().to_string(),
        side,
        direction,
        p: measure.p(),
        true_value,
        mean,
        std_dev: var.sqrt(),
        bias,
        mse: bias * bias + var,
        n,
        reps,
        failures: reps - vals.len(),
    }
}

/// Draws `reps` samples of size n from `truth`, refits, and summarizes the
/// four Λ(p) per p against their true-parameter values on the same mesh.
pub fn simulation_study(truth: &Model, n: usize, reps: usize, ps: &[f64], cfg: &ResamplingConfig, stream: &RngStream) -> Result<SimulationReport> {
    if reps < 2 {
        return Err(EstimationError::Config(format!("at least 2 replicates required, got {reps}")));
    }
    let measures = Measure::lambdas(ps);
    let truth_vals = evaluate_measures(&truth.copula(&cfg.gh)?, &measures, &cfg.mesh)?;
    let reps_out = replicates(truth, n, reps, &measures, cfg, stream);
    let ok: Vec<&Vec<f64>> = reps_out.iter().flatten().collect();
    if ok.is_empty() {
        return Err(EstimationError::Degenerate("every replicate failed".into()));
    }
    let summaries = measures
        .iter()
        .enumerate()
        .map(|(k, m)| summarize(m, truth_vals[k], &ok.iter().map(|v| v[k]).collect::<Vec<_>>(), n, reps))
        .collect();
    Ok(SimulationReport { model: truth.to_json(), variance_convention: VARIANCE_CONVENTION.into(), summaries })
}

// ---------------------------------------------------------------------------
// rolling windows

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub date: String,
    pub x: f64,
    pub y: f64,
}

/// Reads a `date,x,y` CSV.
pub fn read_series<R: Read>(r: R) -> Result<Vec<SeriesRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let h = rd.headers()?.clone();
    if h.len() != 3 || &h[0] != "date" || &h[1] != "x" || &h[2] != "y" {
        return Err(EstimationError::Input(format!("expected header 'date,x,y', found '{}'", h.iter().collect::<Vec<_>>().join(","))));
    }
    let mut out: Vec<SeriesRow> = Vec::new();
    for (line, rec) in rd.deserialize().enumerate() {
        let row: SeriesRow = rec.map_err(|e| EstimationError::Input(format!("row {}: {e}", line + 2)))?;
        if !(row.x.is_finite() && row.y.is_finite()) {
            return Err(EstimationError::Input(format!("row {}: missing or non-finite value", line + 2)));
        }
        out.push(row);
    }
    Ok(out)
}

pub fn write_series<W: Write>(w: W, rows: &[SeriesRow]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct RollingConfig {
    pub window: usize,
    pub family: ModelFamily,
    pub ps: Vec<f64>,
    pub resampling: ResamplingConfig,
    /// (B, level, seed) for per-window Λ bands at the first p
    pub bootstrap: Option<(usize, f64, u64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowStatus {
    Ok,
    /// fit failed; previous window's fit and values repeated
    CarriedForward,
    /// fit failed with nothing to carry forward
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RollingRow {
    pub date: String,
    pub status: WindowStatus,
    pub converged: bool,
    pub loglik: f64,
    pub model: Value,
    /// Λ per p in the four-surface order
    pub lambda: Vec<[f64; 4]>,
    pub bands: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RollingResult {
    pub window: usize,
    pub family: String,
    pub p: Vec<f64>,
    pub rows: Vec<RollingRow>,
}

impl RollingResult {
    /// `date,status,p,<four Λ>[,<four band pairs>]` — one line per window and p.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut head: Vec<String> = ["date", "status", "p"].map(String::from).to_vec();
        let tags = ["lower_xy", "lower_yx", "upper_xy", "upper_yx"];
        head.extend(tags.iter().map(|t| format!("lambda_{t}")));
        let bands = self.rows.iter().any(|r| r.bands.is_some());
        if bands {
            for t in tags {
                head.push(format!("band_lo_{t}"));
                head.push(format!("band_hi_{t}"));
            }
        }
        wr.write_record(&head)?;
        for r in &self.rows {
            for (k, p) in self.p.iter().enumerate() {
                let status = serde_json::to_value(r.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
                let mut rec = vec![r.date.clone(), status, p.to_string()];
                rec.extend(r.lambda[k].iter().map(|v| v.to_string()));
                if bands {
                    match (&r.bands, k) {
                        (Some(b), 0) => rec.extend(b.iter().flat_map(|(lo, hi)| [lo.to_string(), hi.to_string()])),
                        _ => rec.extend(std::iter::repeat_n(String::new(), 8)),
                    }
                }
                wr.write_record(&rec)?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

struct WindowOut {
    fit: FitResult,
    lambda: Vec<[f64; 4]>,
    bands: Option<Vec<(f64, f64)>>,
}

fn fit_window(data: &[[f64; 2]], cfg: &RollingConfig, index: u64) -> Result<WindowOut> {
    let fit = fit_raw(cfg.family, data, None, &cfg.resampling.optim)?;
    let spec = fit.model.copula(&cfg.resampling.gh)?;
    let measures = Measure::lambdas(&cfg.ps);
    let vals = evaluate_measures(&spec, &measures, &cfg.resampling.mesh)?;
    let lambda = vals.chunks(4).map(|c| [c[0], c[1], c[2], c[3]]).collect();
    let bands = match cfg.bootstrap {
        Some((b, level, seed)) => {
            let stream = RngStream::new(seed, index);
            let m = Measure::lambdas(&cfg.ps[..1]);
            let bb = parametric_bootstrap_many(&fit, &m, b, level, &stream, &cfg.resampling)?;
            Some(bb.iter().map(|x| (x.lower, x.upper)).collect())
        }
        None => None,
    };
    Ok(WindowOut { fit, lambda, bands })
}

/// Fits every window of `cfg.window` consecutive observations (advancing
/// by one) and reports the four Λ(p) of each fit, labelled by the window's
/// last date. A failed window repeats the previous window's values.
pub fn rolling_lambda(series: &[SeriesRow], cfg: &RollingConfig) -> Result<RollingResult> {
    let w = cfg.window;
    if w < 2 || series.len() < w {
        return Err(EstimationError::Config(format!("window {w} needs 2 ≤ window ≤ series length {}", series.len())));
    }
    if cfg.ps.is_empty() {
        return Err(EstimationError::Config("at least one p required".into()));
    }
    let data: Vec<[f64; 2]> = series.iter().map(|r| [r.x, r.y]).collect();
    let outs: Vec<Result<WindowOut>> =
        (0..=series.len() - w).into_par_iter().map(|s| fit_window(&data[s..s + w], cfg, s as u64)).collect();
    let mut rows = Vec::with_capacity(outs.len());
    let mut last: Option<RollingRow> = None;
    for (s, out) in outs.into_iter().enumerate() {
        let date = series[s + w - 1].date.clone();
        let row = match out {
            Ok(o) => RollingRow {
                date,
                status: WindowStatus::Ok,
                converged: o.fit.converged,
                loglik: o.fit.loglik,
                model: o.fit.model.to_json(),
                lambda: o.lambda,
                bands: o.bands,
            },
            Err(e) => {
                log::warn!("window ending {date}: {e}");
                match &last {
                    Some(prev) => RollingRow { date, status: WindowStatus::CarriedForward, ..prev.clone() },
                    None => RollingRow {
                        date,
                        status: WindowStatus::Failed,
                        converged: false,
                        loglik: f64::NAN,
                        model: Value::Null,
                        lambda: vec![[f64::NAN; 4]; cfg.ps.len()],
                        bands: None,
                    },
                }
            }
        };
        if row.status == WindowStatus::Ok {
            last = Some(row.clone());
        }
        rows.push(row);
    }
    Ok(RollingResult { window: w, family: cfg.family.name().to_string(), p: cfg.ps.clone(), rows })
}
