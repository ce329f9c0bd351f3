//! Surface-integral measures (A, δ, κ, δ̄, Γ, Λ), classical concordance
//! (τ, ρ, σ) and limit-based tail coefficients (λ, χ).
//!
//! All surface integrals share one mesh per axis: nodes g_i = i/(N+1),
//! i = 1..N, product trapezoid weights normalized to unit mass, and
//! gradients taken by central differences of the tabulated surface
//! (one-sided on the first and last node). The alternative midpoint rule
//! uses nodes (i − ½)/N, uniform weights and closed-form partials.

use crate::copulas::{CopulaSpec, Family};
use crate::surfaces::{l_of, Reference, Side, SurfaceSelector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::HashMap;
use std::io::Write;
use std::sync::{Mutex, OnceLock};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("invalid mesh: {0}")]
    Mesh(String),
    #[error("non-finite {what} integrand at (u, v) = ({u}, {v})")]
    NonFinite { what: String, u: f64, v: f64 },
    #[error("focus parameter p must be positive, got {0}")]
    Focus(f64),
}

pub type Result<T> = std::result::Result<T, MeasureError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshRule {
    /// nodes i/(N+1), trapezoid weights, difference gradients
    Trapezoid,
    /// nodes (i − ½)/N, uniform weights, closed-form partials
    Midpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeshConfig {
    #[serde(rename = "n_cells_per_axis")]
    pub n: usize,
    pub rule: MeshRule,
    pub parallel_chunk: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self { n: 1000, rule: MeshRule::Trapezoid, parallel_chunk: 16 }
    }
}

impl MeshConfig {
    pub fn new(n: usize) -> Result<Self> {
        let m = Self { n, ..Self::default() };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 16 {
            return Err(MeasureError::Mesh(format!("at least 16 nodes per axis required, got {}", self.n)));
        }
        if self.parallel_chunk == 0 {
            return Err(MeasureError::Mesh("parallel_chunk must be positive".into()));
        }
        Ok(())
    }

    pub fn nodes(&self) -> Vec<f64> {
        let n = self.n;
        match self.rule {
            MeshRule::Trapezoid => (1..=n).map(|i| i as f64 / (n + 1) as f64).collect(),
            MeshRule::Midpoint => (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect(),
        }
    }

    /// One-axis weights; the product weights sum to one.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.n;
        match self.rule {
            MeshRule::Trapezoid => {
                let mut w = vec![1.0 / (n - 1) as f64; n];
                w[0] *= 0.5;
                w[n - 1] *= 0.5;
                w
            }
            MeshRule::Midpoint => vec![1.0 / n as f64; n],
        }
    }

    pub fn spacing(&self) -> f64 {
        match self.rule {
            MeshRule::Trapezoid => 1.0 / (self.n + 1) as f64,
            MeshRule::Midpoint => 1.0 / self.n as f64,
        }
    }
}

/// Weighted sums over one surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSums {
    /// Σ w √(1 + |∇Ψ|²)
    pub area: f64,
    /// Σ w |Ψ − 𝕀| √(1 + |∇Ψ|²)
    pub s1: f64,
    /// Σ w (Ψ − 𝕀) √(1 + |∇Ψ|²)
    pub s2: f64,
    /// Σ w L^p √(1 + |∇Ψ|²), one per requested p
    pub gamma: Vec<f64>,
}

/// A copula tabulated on a mesh, ready for any number of surface passes.
pub struct MeshEvaluation {
    mesh: MeshConfig,
    nodes: Vec<f64>,
    w: Vec<f64>,
    c: Vec<f64>,
    partials: Option<(Vec<f64>, Vec<f64>)>,
    /// Π: surfaces are exact planes
    plane: bool,
}

impl MeshEvaluation {
    pub fn new(spec: &CopulaSpec, mesh: &MeshConfig) -> Result<Self> {
        mesh.validate()?;
        let nodes = mesh.nodes();
        let c = spec.cdf_grid(&nodes);
        let partials = match mesh.rule {
            MeshRule::Trapezoid => None,
            MeshRule::Midpoint => {
                let n = mesh.n;
                let mut cu = vec![0.0; n * n];
                let mut cv = vec![0.0; n * n];
                cu.par_chunks_mut(n).zip(cv.par_chunks_mut(n)).enumerate().for_each(|(i, (ru, rv))| {
                    for j in 0..n {
                        let d = spec.partials(nodes[i], nodes[j]);
                        ru[j] = d.du;
                        rv[j] = d.dv;
                    }
                });
                Some((cu, cv))
            }
        };
        let plane = spec.family() == Family::Independence;
        Ok(Self { mesh: *mesh, w: mesh.weights(), nodes, c, partials, plane })
    }

    pub fn mesh(&self) -> &MeshConfig {
        &self.mesh
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// C at the mesh nodes, row-major with u outermost.
    pub fn cdf(&self) -> &[f64] {
        &self.c
    }

    /// Fixed-order reduction over row chunks.
    fn reduce<const K: usize, F>(&self, row: F) -> std::result::Result<[f64; K], (usize, usize)>
    where
        F: Fn(usize, &mut [f64; K]) -> std::result::Result<(), usize> + Sync,
    {
        let n = self.mesh.n;
        let chunk = self.mesh.parallel_chunk;
        let starts: Vec<usize> = (0..n).step_by(chunk).collect();
        let parts: Vec<std::result::Result<[f64; K], (usize, usize)>> = starts
            .par_iter()
            .map(|&s| {
                let mut acc = [0.0; K];
                for i in s..(s + chunk).min(n) {
                    let mut r = [0.0; K];
                    row(i, &mut r).map_err(|j| (i, j))?;
                    for k in 0..K {
                        acc[k] += self.w[i] * r[k];
                    }
                }
                Ok(acc)
            })
            .collect();
        let mut total = [0.0; K];
        for p in parts {
            let p = p?;
            for k in 0..K {
                total[k] += p[k];
            }
        }
        Ok(total)
    }

    /// Ψ values on the mesh.
    fn surface_values(&self, sel: SurfaceSelector) -> Vec<f64> {
        let n = self.mesh.n;
        let mut p = vec![0.0; n * n];
        p.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let u = self.nodes[i];
            for (j, z) in row.iter_mut().enumerate() {
                *z = if self.plane {
                    sel.independence(u, self.nodes[j])
                } else {
                    sel.value(u, self.nodes[j], self.c[i * n + j])
                };
            }
        });
        p
    }

    /// Ψ and its gradient at node (i, j).
    #[inline]
    fn fused(&self, sel: SurfaceSelector, p: &[f64], i: usize, j: usize) -> (f64, f64, f64) {
        let n = self.mesh.n;
        match &self.partials {
            Some((cu, cv)) => {
                let k = i * n + j;
                sel.transform(self.nodes[i], self.nodes[j], self.c[k], cu[k], cv[k])
            }
            None => {
                let h = self.mesh.spacing();
                let at = |a: usize, b: usize| p[a * n + b];
                let gu = if i == 0 {
                    (at(1, j) - at(0, j)) / h
                } else if i == n - 1 {
                    (at(n - 1, j) - at(n - 2, j)) / h
                } else {
                    (at(i + 1, j) - at(i - 1, j)) / (2.0 * h)
                };
                let gv = if j == 0 {
                    (at(i, 1) - at(i, 0)) / h
                } else if j == n - 1 {
                    (at(i, n - 1) - at(i, n - 2)) / h
                } else {
                    (at(i, j + 1) - at(i, j - 1)) / (2.0 * h)
                };
                (at(i, j), gu, gv)
            }
        }
    }

    /// Area, S₁, S₂ and Γ(p) for one surface in a single pass.
    pub fn surface_sums(&self, sel: SurfaceSelector, ps: &[f64]) -> Result<SurfaceSums> {
        for &p in ps {
            if !(p > 0.0) {
                return Err(MeasureError::Focus(p));
            }
        }
        const MAXP: usize = 6;
        let mut out = SurfaceSums { area: 0.0, s1: 0.0, s2: 0.0, gamma: Vec::with_capacity(ps.len()) };
        let values = self.surface_values(sel);
        let n = self.mesh.n;
        for (chunk_no, pchunk) in ps.chunks(MAXP).enumerate() {
            let sums = self
                .reduce::<{ 3 + MAXP }, _>(|i, acc| {
                    for j in 0..n {
                        let (z, gu, gv) = self.fused(sel, &values, i, j);
                        let jac = (1.0 + gu * gu + gv * gv).sqrt();
                        let dev = z - sel.independence(self.nodes[i], self.nodes[j]);
                        let l = l_of(gu, gv);
                        if !(jac.is_finite() && dev.is_finite()) {
                            return Err(j);
                        }
                        let wj = self.w[j];
                        acc[0] += wj * jac;
                        acc[1] += wj * dev.abs() * jac;
                        acc[2] += wj * dev * jac;
                        if l > 0.0 {
                            for (k, &p) in pchunk.iter().enumerate() {
                                let lp = if p == 1.0 { l } else { l.powf(p) };
                                acc[3 + k] += wj * lp * jac;
                            }
                        }
                    }
                    Ok(())
                })
                .map_err(|(i, j)| MeasureError::NonFinite {
                    what: format!("{sel} surface"),
                    u: self.nodes[i],
                    v: self.nodes[j],
                })?;
            if chunk_no == 0 {
                out.area = sums[0];
                out.s1 = sums[1];
                out.s2 = sums[2];
            }
            out.gamma.extend_from_slice(&sums[3..3 + pchunk.len()]);
        }
        if ps.is_empty() {
            // area and S sums still needed
            let sums = self.surface_sums(sel, &[1.0])?;
            out.area = sums.area;
            out.s1 = sums.s1;
            out.s2 = sums.s2;
        }
        Ok(out)
    }

    /// (τ, ρ, σ) from C and its partials on the mesh.
    pub fn concordance(&self) -> Result<(f64, f64, f64)> {
        let n = self.mesh.n;
        let h = self.mesh.spacing();
        let c = &self.c;
        let sums = self
            .reduce::<3, _>(|i, acc| {
                let u = self.nodes[i];
                for j in 0..n {
                    let k = i * n + j;
                    let (cu, cv) = match &self.partials {
                        Some((pu, pv)) => (pu[k], pv[k]),
                        None => {
                            let cu = if i == 0 {
                                (c[n + j] - c[j]) / h
                            } else if i == n - 1 {
                                (c[k] - c[k - n]) / h
                            } else {
                                (c[k + n] - c[k - n]) / (2.0 * h)
                            };
                            let cv = if j == 0 {
                                (c[k + 1] - c[k]) / h
                            } else if j == n - 1 {
                                (c[k] - c[k - 1]) / h
                            } else {
                                (c[k + 1] - c[k - 1]) / (2.0 * h)
                            };
                            (cu, cv)
                        }
                    };
                    let d = c[k] - u * self.nodes[j];
                    if !(cu.is_finite() && cv.is_finite() && d.is_finite()) {
                        return Err(j);
                    }
                    let wj = self.w[j];
                    acc[0] += wj * cu * cv;
                    acc[1] += wj * d;
                    acc[2] += wj * d.abs();
                }
                Ok(())
            })
            .map_err(|(i, j)| MeasureError::NonFinite { what: "concordance".into(), u: self.nodes[i], v: self.nodes[j] })?;
        Ok((1.0 - 4.0 * sums[0], 12.0 * sums[1], 12.0 * sums[2]))
    }
}

// ---------------------------------------------------------------------------
// reference surfaces, cached per mesh

#[derive(Hash, PartialEq, Eq)]
struct RefKey {
    mesh: MeshConfig,
    sel: SurfaceSelector,
    kind: Reference,
    ps: Vec<u64>,
}

/// Sums for 𝕀, 𝕄 or 𝕎 on the given mesh; computed once per process.
pub fn reference_sums(kind: Reference, sel: SurfaceSelector, mesh: &MeshConfig, ps: &[f64]) -> Result<SurfaceSums> {
    static CACHE: OnceLock<Mutex<HashMap<RefKey, SurfaceSums>>> = OnceLock::new();
    let key = RefKey { mesh: *mesh, sel, kind, ps: ps.iter().map(|p| p.to_bits()).collect() };
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(s) = cache.lock().expect("cache poisoned").get(&key) {
        return Ok(s.clone());
    }
    let ev = MeshEvaluation::new(&kind.copula(), mesh)?;
    let s = ev.surface_sums(sel, ps)?;
    cache.lock().expect("cache poisoned").insert(key, s.clone());
    Ok(s)
}

fn clamp_logged(x: f64, lo: f64, hi: f64, what: &str) -> f64 {
    if x < lo || x > hi {
        log::info!("{what} = {x} clamped to [{lo}, {hi}]");
    }
    x.clamp(lo, hi)
}

/// δ, κ, δ̄ and Λ(p) for one surface given its sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceMeasures {
    pub selector: SurfaceSelector,
    pub area: f64,
    pub delta: f64,
    pub kappa: f64,
    pub delta_bar: f64,
    pub lambda: Vec<LambdaValue>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaValue {
    pub p: f64,
    pub value: f64,
    pub gamma: f64,
}

impl SurfaceMeasures {
    pub fn lambda_at(&self, p: f64) -> Option<f64> {
        self.lambda.iter().find(|l| l.p == p).map(|l| l.value)
    }
}

fn surface_measures(sums: &SurfaceSums, sel: SurfaceSelector, mesh: &MeshConfig, ps: &[f64]) -> Result<SurfaceMeasures> {
    let m = reference_sums(Reference::M, sel, mesh, ps)?;
    let w = reference_sums(Reference::W, sel, mesh, ps)?;
    let root2 = std::f64::consts::SQRT_2;
    let delta = clamp_logged((sums.area - root2) / (m.area - root2), 0.0, 1.0, "δ");
    let kappa = clamp_logged(2.0 * (sums.s2 - w.s2) / (m.s2 - w.s2) - 1.0, -1.0, 1.0, "κ");
    let delta_bar = clamp_logged(sums.s1 / m.s1, 0.0, 1.0, "δ̄");
    let lambda = ps
        .iter()
        .enumerate()
        .map(|(k, &p)| LambdaValue { p, value: clamp_logged(sums.gamma[k] / m.gamma[k], 0.0, 1.0, "Λ"), gamma: sums.gamma[k] })
        .collect();
    Ok(SurfaceMeasures { selector: sel, area: sums.area, delta, kappa, delta_bar, lambda })
}

pub fn surface_area(spec: &CopulaSpec, sel: SurfaceSelector, mesh: &MeshConfig) -> Result<f64> {
    Ok(MeshEvaluation::new(spec, mesh)?.surface_sums(sel, &[])?.area)
}

fn measures_for(spec: &CopulaSpec, sel: SurfaceSelector, mesh: &MeshConfig, ps: &[f64]) -> Result<SurfaceMeasures> {
    let sums = MeshEvaluation::new(spec, mesh)?.surface_sums(sel, ps)?;
    surface_measures(&sums, sel, mesh, ps)
}

pub fn delta(spec: &CopulaSpec, sel: SurfaceSelector, mesh: &MeshConfig) -> Result<f64> {
    Ok(measures_for(spec, sel, mesh, &[])?.delta)
}

pub fn kappa(spec: &CopulaSpec, sel: SurfaceSelector, mesh: &MeshConfig) -> Result<f64> {
    Ok(measures_for(spec, sel, mesh, &[])?.kappa)
}

pub fn delta_bar(spec: &CopulaSpec, sel: SurfaceSelector, mesh: &MeshConfig) -> Result<f64> {
    Ok(measures_for(spec, sel, mesh, &[])?.delta_bar)
}

pub fn gamma_integral(spec: &CopulaSpec, sel: SurfaceSelector, p: f64, mesh: &MeshConfig) -> Result<f64> {
    Ok(MeshEvaluation::new(spec, mesh)?.surface_sums(sel, &[p])?.gamma[0])
}

pub fn lambda_tdc(spec: &CopulaSpec, sel: SurfaceSelector, p: f64, mesh: &MeshConfig) -> Result<f64> {
    Ok(measures_for(spec, sel, mesh, &[p])?.lambda[0].value)
}

/// Λ for all four surfaces and each p, on one tabulation of C.
pub fn lambda_all(spec: &CopulaSpec, ps: &[f64], mesh: &MeshConfig) -> Result<Vec<[f64; 4]>> {
    let ev = MeshEvaluation::new(spec, mesh)?;
    let mut out = vec![[0.0; 4]; ps.len()];
    for (s, sel) in SurfaceSelector::ALL.iter().enumerate() {
        let m = surface_measures(&ev.surface_sums(*sel, ps)?, *sel, mesh, ps)?;
        for (k, l) in m.lambda.iter().enumerate() {
            out[k][s] = l.value;
        }
    }
    Ok(out)
}

pub fn classical_concordance(spec: &CopulaSpec, mesh: &MeshConfig) -> Result<(f64, f64, f64)> {
    MeshEvaluation::new(spec, mesh)?.concordance()
}

// ---------------------------------------------------------------------------
// limit-based tail coefficients

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TdcMethod {
    Analytic,
    Numeric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TdcEstimate {
    pub value: f64,
    pub method: TdcMethod,
    /// for numeric limits: the tail of the sequence settled
    pub converged: bool,
}

impl TdcEstimate {
    fn analytic(value: f64) -> Self {
        Self { value, method: TdcMethod::Analytic, converged: true }
    }
}

/// Closed-form Sibuya coefficients where the family has one.
fn strong_closed_form(spec: &CopulaSpec, side: Side) -> Option<f64> {
    let p = spec.params();
    let lower = side == Side::Lower;
    Some(match spec.family() {
        Family::Frechet => p[0],
        Family::Mardia => p[0] * p[0] * (1.0 + p[0]) / 2.0,
        Family::CuadrasAuge => {
            if lower {
                0.0
            } else {
                p[0]
            }
        }
        Family::MarshallOlkin => {
            if lower {
                0.0
            } else {
                p[0].min(p[1])
            }
        }
        Family::GumbelHougaard => {
            if lower {
                0.0
            } else {
                2.0 - 2f64.powf(1.0 / p[0])
            }
        }
        Family::Clayton => {
            if lower && p[0] > 0.0 {
                2f64.powf(-1.0 / p[0])
            } else {
                0.0
            }
        }
        Family::AliMikhailHaq => {
            if lower && p[0] == 1.0 {
                0.5
            } else {
                0.0
            }
        }
        Family::Frank | Family::Gaussian | Family::Independence | Family::Countermonotone => 0.0,
        Family::Comonotone => 1.0,
        Family::StudentT => {
            let (rho, nu) = (p[0], p[1]);
            2.0 * crate::numerics::t_cdf(-((nu + 1.0) * (1.0 - rho) / (1.0 + rho)).sqrt(), nu + 1.0)
        }
        Family::TabulatedGh => return None,
    })
}

/// Dyadic probes a = 2^{−k}; tabulated copulas stop a decade above their
/// smallest grid node.
fn probe_levels(spec: &CopulaSpec) -> Vec<f64> {
    let floor = spec.table().map(|t| 10.0 * t.grid_u[1]).unwrap_or(0.0);
    (6..=24).map(|k| 2f64.powi(-k)).filter(|&a| a >= floor).collect()
}

/// Joint tail probability P(U ≤ a, V ≤ a) or P(U > 1−a, V > 1−a).
fn joint_tail(spec: &CopulaSpec, side: Side, a: f64) -> f64 {
    match side {
        Side::Lower => spec.cdf(a, a),
        Side::Upper => (2.0 * a - 1.0 + spec.cdf(1.0 - a, 1.0 - a)).max(0.0),
    }
}

fn settled(seq: &[f64], tol: f64) -> bool {
    let n = seq.len();
    if n < 4 {
        return false;
    }
    let tail = &seq[n - 4..];
    let inc = tail.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    let dec = tail.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    (inc || dec) && (seq[n - 1] - seq[n - 2]).abs() < tol
}

/// Sibuya's λ: closed form where known, otherwise the limit of
/// P(joint tail)/a with a two-point Richardson step in a.
pub fn strong_tdc(spec: &CopulaSpec, side: Side) -> TdcEstimate {
    if let Some(v) = strong_closed_form(spec, side) {
        return TdcEstimate::analytic(v);
    }
    let levels = probe_levels(spec);
    let seq: Vec<f64> = levels.iter().map(|&a| joint_tail(spec, side, a) / a).collect();
    let n = seq.len();
    let value = if n >= 2 { 2.0 * seq[n - 1] - seq[n - 2] } else { seq[n - 1] };
    TdcEstimate { value: value.clamp(0.0, 1.0), method: TdcMethod::Numeric, converged: settled(&seq, 1e-3) }
}

/// Correlation of the dispersion matrix for elliptical (β = 0) GH tables.
fn elliptical_gh_rho(spec: &CopulaSpec) -> Option<f64> {
    let t = spec.table()?;
    let p = &t.params;
    if p.beta != [0.0, 0.0] {
        return None;
    }
    let d = p.dispersion;
    Some(d[0][1] / (d[0][0] * d[1][1]).sqrt())
}

/// Weak coefficient χ = lim 2 ln a / ln P(joint tail) − 1, extrapolated in
/// 1/k along a = 2^{−k}; the Gaussian (χ = ρ) and elliptical GH
/// (χ = √(2(1+ρ)) − 1) values are used directly.
pub fn weak_tdc(spec: &CopulaSpec, side: Side) -> TdcEstimate {
    match spec.family() {
        Family::Gaussian => return TdcEstimate::analytic(spec.params()[0]),
        Family::Independence => return TdcEstimate::analytic(0.0),
        Family::Comonotone => return TdcEstimate::analytic(1.0),
        Family::Countermonotone => return TdcEstimate::analytic(-1.0),
        _ => {}
    }
    if let Some(rho) = elliptical_gh_rho(spec) {
        return TdcEstimate::analytic(((2.0 * (1.0 + rho)).sqrt() - 1.0).clamp(-1.0, 1.0));
    }
    let levels = probe_levels(spec);
    let seq: Vec<f64> = levels
        .iter()
        .map(|&a| {
            let pj = joint_tail(spec, side, a);
            if pj <= 0.0 {
                -1.0
            } else {
                (2.0 * a.ln() / pj.ln() - 1.0).clamp(-1.0, 1.0)
            }
        })
        .collect();
    let n = seq.len();
    let value = if n >= 2 {
        // error ∝ 1/k: combine the last two levels
        let k1 = -levels[n - 2].log2();
        let k2 = -levels[n - 1].log2();
        (k2 * seq[n - 1] - k1 * seq[n - 2]) / (k2 - k1)
    } else {
        seq[n - 1]
    };
    TdcEstimate { value: value.clamp(-1.0, 1.0), method: TdcMethod::Numeric, converged: settled(&seq, 2e-2) }
}

// ---------------------------------------------------------------------------
// reports

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureReport {
    pub copula: Value,
    pub label: String,
    pub mesh: MeshConfig,
    pub p: Vec<f64>,
    pub surfaces: Vec<SurfaceMeasures>,
    pub tau: f64,
    pub rho: f64,
    pub sigma: f64,
    pub strong_lower: TdcEstimate,
    pub strong_upper: TdcEstimate,
    pub weak_lower: TdcEstimate,
    pub weak_upper: TdcEstimate,
}

pub const CSV_HEADER: [&str; 6] = ["copula", "measure", "side", "direction", "p", "value"];

impl MeasureReport {
    pub fn surface(&self, sel: SurfaceSelector) -> &SurfaceMeasures {
        self.surfaces.iter().find(|s| s.selector == sel).expect("all four surfaces are reported")
    }

    /// One row per (measure, side, direction, p); empty cells where a key
    /// does not apply.
    pub fn csv_rows(&self) -> Vec<[String; 6]> {
        let mut rows = Vec::new();
        let lab = &self.label;
        let mut push = |m: &str, side: &str, dir: &str, p: Option<f64>, v: f64| {
            rows.push([
                lab.clone(),
                m.to_string(),
                side.to_string(),
                dir.to_string(),
                p.map(|p| p.to_string()).unwrap_or_default(),
                format!("{v}"),
            ]);
        };
        for s in &self.surfaces {
            let (sd, dr) = (s.selector.side_name(), s.selector.direction_name());
            push("delta", sd, dr, None, s.delta);
            push("kappa", sd, dr, None, s.kappa);
            push("delta_bar", sd, dr, None, s.delta_bar);
            for l in &s.lambda {
                push("lambda", sd, dr, Some(l.p), l.value);
            }
        }
        push("tau", "", "", None, self.tau);
        push("rho", "", "", None, self.rho);
        push("sigma", "", "", None, self.sigma);
        push("strong_tdc", "lower", "", None, self.strong_lower.value);
        push("strong_tdc", "upper", "", None, self.strong_upper.value);
        push("weak_tdc", "lower", "", None, self.weak_lower.value);
        push("weak_tdc", "upper", "", None, self.weak_upper.value);
        rows
    }

    pub fn write_csv<W: Write>(&self, w: W, header: bool) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        if header {
            wr.write_record(CSV_HEADER)?;
        }
        for r in self.csv_rows() {
            wr.write_record(&r)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Every measure for one copula; C is tabulated once and each surface is
/// swept once.
pub fn full_report(spec: &CopulaSpec, ps: &[f64], mesh: &MeshConfig) -> Result<MeasureReport> {
    let ev = MeshEvaluation::new(spec, mesh)?;
    let mut surfaces = Vec::with_capacity(4);
    for sel in SurfaceSelector::ALL {
        surfaces.push(surface_measures(&ev.surface_sums(sel, ps)?, sel, mesh, ps)?);
    }
    let (tau, rho, sigma) = ev.concordance()?;
    Ok(MeasureReport {
        copula: spec.to_json(),
        label: spec.label(),
        mesh: *mesh,
        p: ps.to_vec(),
        surfaces,
        tau: clamp_logged(tau, -1.0, 1.0, "τ"),
        rho: clamp_logged(rho, -1.0, 1.0, "ρ"),
        sigma: clamp_logged(sigma, 0.0, 1.0, "σ"),
        strong_lower: strong_tdc(spec, Side::Lower),
        strong_upper: strong_tdc(spec, Side::Upper),
        weak_lower: weak_tdc(spec, Side::Lower),
        weak_upper: weak_tdc(spec, Side::Upper),
    })
}
