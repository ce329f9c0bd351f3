//! Bivariate generalized hyperbolic (GH) law: density, numerical marginals,
//! tabulated implied copula, mixture sampling and direct maximum likelihood.

use crate::copulas::UnitSquarePoint;
use crate::numerics::{
    bessel_k_scaled, brent_root, hermite, monotone_slopes, nelder_mead, segment, GaussLegendre, Gig, NumericsError,
    OptimConfig, RngStream,
};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::{LN_2, PI};
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GhError {
    #[error("inadmissible GH parameters: {0}")]
    Inadmissible(String),
    #[error("GH support truncation failed: {0}")]
    Range(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("invalid input: {0}")]
    Input(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GhError>;

/// (λ, α, β, δ, μ, Δ) of the bivariate GH density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GHParams {
    pub lambda: f64,
    pub alpha: f64,
    pub beta: [f64; 2],
    pub delta: f64,
    pub mu: [f64; 2],
    #[serde(rename = "Delta")]
    pub dispersion: [[f64; 2]; 2],
}

impl GHParams {
    pub fn new(lambda: f64, alpha: f64, beta: [f64; 2], delta: f64, mu: [f64; 2], dispersion: [[f64; 2]; 2]) -> Result<Self> {
        let p = Self { lambda, alpha, beta, delta, mu, dispersion };
        p.validate()?;
        Ok(p)
    }

    /// Checks the λ-sign dependent admissibility constraints.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GhError::Inadmissible(m));
        let all = [self.lambda, self.alpha, self.beta[0], self.beta[1], self.delta, self.mu[0], self.mu[1]];
        if all.iter().any(|x| !x.is_finite()) || self.dispersion.iter().flatten().any(|x| !x.is_finite()) {
            return bad("non-finite parameter".into());
        }
        let d = self.dispersion;
        if (d[0][1] - d[1][0]).abs() > 1e-12 * (1.0 + d[0][1].abs()) {
            return bad("Δ must be symmetric".into());
        }
        if !(d[0][0] > 0.0 && self.det() > 0.0) {
            return bad("Δ must be positive definite".into());
        }
        if !(self.alpha > 0.0) {
            return bad("α > 0 required".into());
        }
        let b = self.beta_norm();
        if self.lambda >= 0.0 {
            if self.lambda == 0.0 && !(self.delta > 0.0) {
                return bad("λ = 0 requires δ > 0".into());
            }
            if !(self.delta >= 0.0) {
                return bad("δ ≥ 0 required".into());
            }
            if !(b < self.alpha) {
                return bad(format!("√(β′Δβ) = {b} < α = {} required", self.alpha));
            }
        } else {
            if !(self.delta > 0.0) {
                return bad("λ < 0 requires δ > 0".into());
            }
            if !(b <= self.alpha) {
                return bad(format!("√(β′Δβ) = {b} ≤ α = {} required", self.alpha));
            }
        }
        Ok(())
    }

    pub fn det(&self) -> f64 {
        let d = self.dispersion;
        d[0][0] * d[1][1] - d[0][1] * d[1][0]
    }

    /// √(β′Δβ).
    pub fn beta_norm(&self) -> f64 {
        let (b, d) = (self.beta, self.dispersion);
        (b[0] * b[0] * d[0][0] + 2.0 * b[0] * b[1] * d[0][1] + b[1] * b[1] * d[1][1]).max(0.0).sqrt()
    }

    /// ψ = α² − β′Δβ, the GIG rate of the mixing variable.
    pub fn psi(&self) -> f64 {
        let b = self.beta_norm();
        (self.alpha * self.alpha - b * b).max(0.0)
    }

    /// Δβ, the drift of the mixture representation.
    pub fn drift(&self) -> [f64; 2] {
        let (b, d) = (self.beta, self.dispersion);
        [d[0][0] * b[0] + d[0][1] * b[1], d[1][0] * b[0] + d[1][1] * b[1]]
    }

    pub fn mixing(&self) -> Result<Gig> {
        Ok(Gig::new(self.lambda, self.delta * self.delta, self.psi())?)
    }

    /// The same law with Δ scaled by k: (α√k, β, δ/√k, kΔ).
    pub fn rescaled(&self, k: f64) -> Self {
        let mut p = *self;
        let s = k.sqrt();
        p.alpha *= s;
        p.delta /= s;
        for row in p.dispersion.iter_mut() {
            for x in row.iter_mut() {
                *x *= k;
            }
        }
        p
    }

    /// Equivalent parameters with |Δ| = 1.
    pub fn normalized(&self) -> Self {
        self.rescaled(1.0 / self.det().sqrt())
    }

    /// E[Z] = μ + E[W]Δβ.
    pub fn mean(&self) -> Result<[f64; 2]> {
        let ew = self.mixing()?.mean()?;
        let g = self.drift();
        Ok([self.mu[0] + ew * g[0], self.mu[1] + ew * g[1]])
    }

    /// Cov Z = E[W]Δ + Var(W)(Δβ)(Δβ)′.
    pub fn covariance(&self) -> Result<[[f64; 2]; 2]> {
        let g = self.mixing()?;
        let ew = g.mean()?;
        let vw = g.second_moment()? - ew * ew;
        let dr = self.drift();
        let d = self.dispersion;
        let mut c = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                c[i][j] = ew * d[i][j] + vw * dr[i] * dr[j];
            }
        }
        Ok(c)
    }

    /// Exchangeable law (equal margins, symmetric in the two coordinates).
    pub fn is_exchangeable(&self) -> bool {
        self.beta[0] == self.beta[1] && self.mu[0] == self.mu[1] && self.dispersion[0][0] == self.dispersion[1][1]
    }
}

/// Log-density evaluator with the normalizing constant precomputed.
#[derive(Debug, Clone)]
pub struct GhDensity {
    p: GHParams,
    ln_norm: f64,
    inv: [f64; 3],
    nu: f64,
    delta2: f64,
}

impl GhDensity {
    pub fn new(p: &GHParams) -> Result<Self> {
        p.validate()?;
        let (lam, alpha, delta) = (p.lambda, p.alpha, p.delta);
        let psi = p.psi();
        // ln[δ^λ K_λ(δ√ψ)] − (λ/2) ln ψ, with its δ → 0 and ψ → 0 limits
        let ln_scale = if delta == 0.0 {
            ln_gamma(lam) + (lam - 1.0) * LN_2 - lam * psi.ln()
        } else if psi == 0.0 {
            ln_gamma(-lam) - (lam + 1.0) * LN_2 + 2.0 * lam * delta.ln()
        } else {
            let x = delta * psi.sqrt();
            lam * delta.ln() + bessel_k_scaled(lam, x)?.ln() - x - 0.5 * lam * psi.ln()
        };
        let det = p.det();
        let ln_norm = -(2.0 * PI).ln() - 0.5 * det.ln() - (lam - 1.0) * alpha.ln() - ln_scale;
        let d = p.dispersion;
        let inv = [d[1][1] / det, -d[0][1] / det, d[0][0] / det];
        Ok(Self { p: *p, ln_norm, inv, nu: lam - 1.0, delta2: delta * delta })
    }

    pub fn params(&self) -> &GHParams {
        &self.p
    }

    #[inline]
    pub fn ln_density(&self, x: f64, y: f64) -> f64 {
        let zx = x - self.p.mu[0];
        let zy = y - self.p.mu[1];
        let q = self.inv[0] * zx * zx + 2.0 * self.inv[1] * zx * zy + self.inv[2] * zy * zy;
        let s2 = q + self.delta2;
        if s2 <= 0.0 {
            // at μ with δ = 0: s^ν K_ν(αs) → Γ(ν) 2^{ν−1} α^{−ν} for ν > 0
            return if self.nu > 0.0 {
                self.ln_norm + ln_gamma(self.nu) + (self.nu - 1.0) * LN_2 - self.nu * self.p.alpha.ln()
            } else {
                f64::INFINITY
            };
        }
        let arg = self.p.alpha * s2.sqrt();
        let lk = match bessel_k_scaled(self.nu, arg) {
            Ok(k) => k.ln() - arg,
            Err(_) => return f64::NEG_INFINITY,
        };
        self.ln_norm + 0.5 * self.nu * s2.ln() + lk + self.p.beta[0] * zx + self.p.beta[1] * zy
    }

    #[inline]
    pub fn density(&self, x: f64, y: f64) -> f64 {
        self.ln_density(x, y).exp()
    }

    /// True when the density is unbounded at μ (variance-gamma with λ ≤ 1).
    fn singular_at_mu(&self) -> bool {
        self.delta2 == 0.0 && self.p.lambda <= 1.0
    }

    /// ∫∫ over a rectangle with an `order`² tensor Gauss–Legendre rule;
    /// a rectangle containing a density singularity is split there and the
    /// corner pieces refined geometrically.
    fn rect_mass(&self, gl: &GaussLegendre, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
        let (mx, my) = (self.p.mu[0], self.p.mu[1]);
        if self.singular_at_mu() && x0 <= mx && mx <= x1 && y0 <= my && my <= y1 {
            let xs = [x0, mx, x1];
            let ys = [y0, my, y1];
            let mut total = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    if xs[i + 1] > xs[i] && ys[j + 1] > ys[j] {
                        total += self.corner_mass(gl, xs[i], xs[i + 1], ys[j], ys[j + 1]);
                    }
                }
            }
            return total;
        }
        self.tensor(gl, x0, x1, y0, y1)
    }

    fn tensor(&self, gl: &GaussLegendre, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
        let mut s = 0.0;
        for (x, wx) in gl.points(x0, x1) {
            for (y, wy) in gl.points(y0, y1) {
                s += wx * wy * self.density(x, y);
            }
        }
        s
    }

    /// Rectangle with μ at one of its corners.
    fn corner_mass(&self, gl: &GaussLegendre, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
        let (mx, my) = (self.p.mu[0], self.p.mu[1]);
        let (mut ax, mut bx, mut ay, mut by) = (x0, x1, y0, y1);
        let mut total = 0.0;
        for _ in 0..40 {
            let cx = 0.5 * (ax + bx);
            let cy = 0.5 * (ay + by);
            // keep the half adjacent to μ in each coordinate
            let (nx0, nx1, ox0, ox1) = if (ax - mx).abs() < (bx - mx).abs() { (ax, cx, cx, bx) } else { (cx, bx, ax, cx) };
            let (ny0, ny1, oy0, oy1) = if (ay - my).abs() < (by - my).abs() { (ay, cy, cy, by) } else { (cy, by, ay, cy) };
            total += self.tensor(gl, ox0, ox1, ny0, ny1);
            total += self.tensor(gl, nx0, nx1, oy0, oy1);
            total += self.tensor(gl, ox0, ox1, oy0, oy1);
            (ax, bx, ay, by) = (nx0, nx1, ny0, ny1);
        }
        total
    }
}

pub fn gh_log_density(params: &GHParams, z: [f64; 2]) -> Result<f64> {
    Ok(GhDensity::new(params)?.ln_density(z[0], z[1]))
}

pub fn gh_density(params: &GHParams, z: [f64; 2]) -> Result<f64> {
    let v = gh_log_density(params, z)?.exp();
    if v.is_infinite() {
        return Err(GhError::Numerics(NumericsError::Overflow(format!("density overflows at {z:?}"))));
    }
    Ok(v)
}

// ---------------------------------------------------------------------------
// marginals

/// Numerical marginal CDF on a retained support, interpolated in logit space
/// with a monotone cubic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarginalTable {
    pub x: Vec<f64>,
    pub cdf: Vec<f64>,
    logit: Vec<f64>,
    slopes: Vec<f64>,
}

fn logit_of(lower: f64, upper: f64) -> f64 {
    lower.ln() - upper.ln()
}

fn logistic(l: f64) -> f64 {
    if l >= 0.0 {
        1.0 / (1.0 + (-l).exp())
    } else {
        let e = l.exp();
        e / (1.0 + e)
    }
}

impl MarginalTable {
    /// From abscissae with lower and upper tail masses at each.
    fn from_tails(x: &[f64], lower: &[f64], upper: &[f64]) -> Result<Self> {
        let mut xs = Vec::new();
        let mut cdf = Vec::new();
        let mut logit = Vec::new();
        for i in 0..x.len() {
            if lower[i] > 0.0 && upper[i] > 0.0 {
                let l = logit_of(lower[i], upper[i]);
                if logit.last().is_some_and(|&p| l <= p) {
                    continue;
                }
                xs.push(x[i]);
                cdf.push(lower[i] / (lower[i] + upper[i]));
                logit.push(l);
            }
        }
        if xs.len() < 8 {
            return Err(GhError::Range("marginal table has fewer than 8 retained nodes".into()));
        }
        let (lo, hi) = (cdf[0], cdf[cdf.len() - 1]);
        if lo > 1e-8 || hi < 1.0 - 1e-8 {
            return Err(GhError::Range(format!(
                "retained support covers cumulative probability [{lo:e}, 1 − {:e}], need [1e-8, 1 − 1e-8]",
                1.0 - hi
            )));
        }
        let slopes = monotone_slopes(&xs, &logit);
        Ok(Self { x: xs, cdf, logit, slopes })
    }

    fn logit_at(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.logit[0] + self.slopes[0] * (t - self.x[0]);
        }
        if t >= self.x[n - 1] {
            return self.logit[n - 1] + self.slopes[n - 1] * (t - self.x[n - 1]);
        }
        let i = segment(&self.x, t);
        hermite(self.x[i], self.x[i + 1], self.logit[i], self.logit[i + 1], self.slopes[i], self.slopes[i + 1], t).0
    }

    pub fn cdf_at(&self, t: f64) -> f64 {
        logistic(self.logit_at(t))
    }

    /// Inverse CDF by logit target: solves logit F(x) = ℓ.
    pub fn quantile_logit(&self, l: f64) -> f64 {
        let n = self.x.len();
        if l <= self.logit[0] {
            return self.x[0] + (l - self.logit[0]) / self.slopes[0].max(1e-300);
        }
        if l >= self.logit[n - 1] {
            return self.x[n - 1] + (l - self.logit[n - 1]) / self.slopes[n - 1].max(1e-300);
        }
        let i = segment(&self.logit, l);
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        let f = |t: f64| hermite(x0, x1, self.logit[i], self.logit[i + 1], self.slopes[i], self.slopes[i + 1], t).0 - l;
        brent_root(f, x0, x1, 1e-13 * (1.0 + x0.abs().max(x1.abs()))).unwrap_or(0.5 * (x0 + x1))
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.quantile_logit(p.ln() - (-p).ln_1p())
    }
}

/// Truncation rectangle and tabulated marginals.
struct Support {
    x: [f64; 2],
    y: [f64; 2],
}

fn find_support(dens: &GhDensity) -> Result<Support> {
    let p = dens.params();
    let mean = p.mean()?;
    let cov = p.covariance()?;
    let mut half = [50.0 * cov[0][0].sqrt(), 50.0 * cov[1][1].sqrt()];
    const M: usize = 241;
    let cut = (1e-12f64).ln();
    for _attempt in 0..5 {
        let xs: Vec<f64> = (0..M).map(|i| mean[0] - half[0] + 2.0 * half[0] * i as f64 / (M - 1) as f64).collect();
        let ys: Vec<f64> = (0..M).map(|i| mean[1] - half[1] + 2.0 * half[1] * i as f64 / (M - 1) as f64).collect();
        let vals: Vec<f64> = xs
            .par_iter()
            .flat_map_iter(|&x| ys.iter().map(move |&y| dens.ln_density(x, y)))
            .collect();
        let peak = vals.iter().cloned().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
        let (mut ix, mut iy) = ([usize::MAX, 0], [usize::MAX, 0]);
        for i in 0..M {
            for j in 0..M {
                if vals[i * M + j] - peak > cut {
                    ix = [ix[0].min(i), ix[1].max(i)];
                    iy = [iy[0].min(j), iy[1].max(j)];
                }
            }
        }
        if ix[0] == usize::MAX {
            return Err(GhError::Range("density has no mass on the search grid".into()));
        }
        let touches = ix[0] == 0 || iy[0] == 0 || ix[1] == M - 1 || iy[1] == M - 1;
        if touches {
            half = [half[0] * 2.0, half[1] * 2.0];
            continue;
        }
        // one coarse cell of slack, then a 20% margin
        let (x0, x1) = (xs[ix[0] - 1], xs[ix[1] + 1]);
        let (y0, y1) = (ys[iy[0] - 1], ys[iy[1] + 1]);
        let (mx, my) = (0.2 * (x1 - x0), 0.2 * (y1 - y0));
        return Ok(Support { x: [x0 - mx, x1 + mx], y: [y0 - my, y1 + my] });
    }
    Err(GhError::Range(format!("mass above 1e-12 of the mode extends beyond ±{half:?} around the mean")))
}

/// Quadrature settings for marginals and the implied-copula table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GhTabulation {
    /// probability grid nodes per axis (interior, excluding 0 and 1)
    pub grid_n: usize,
    /// uniform cells per axis of the marginal base grid
    pub base_cells: usize,
    /// Gauss–Legendre order per base cell and axis
    pub base_order: usize,
    /// Gauss–Legendre order per copula-table cell and axis
    pub cell_order: usize,
    /// smallest tabulated probability; the grid is symmetric about 1/2
    pub u_min: f64,
}

impl Default for GhTabulation {
    fn default() -> Self {
        Self { grid_n: 512, base_cells: 512, base_order: 16, cell_order: 8, u_min: 1e-7 }
    }
}

fn marginals_on(dens: &GhDensity, sup: &Support, cfg: &GhTabulation) -> Result<(MarginalTable, MarginalTable, f64)> {
    let m = cfg.base_cells;
    let gl = GaussLegendre::new(cfg.base_order);
    let ex: Vec<f64> = (0..=m).map(|i| sup.x[0] + (sup.x[1] - sup.x[0]) * i as f64 / m as f64).collect();
    let ey: Vec<f64> = (0..=m).map(|j| sup.y[0] + (sup.y[1] - sup.y[0]) * j as f64 / m as f64).collect();
    let mass: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| (0..m).map(|j| dens.rect_mass(&gl, ex[i], ex[i + 1], ey[j], ey[j + 1])).collect())
        .collect();
    let rows: Vec<f64> = mass.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..m).map(|j| mass.iter().map(|r| r[j]).sum()).collect();
    let total: f64 = rows.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(GhError::Range(format!("tabulated mass {total} is not usable")));
    }
    if (total - 1.0).abs() > 5e-3 {
        return Err(GhError::Range(format!("tabulated mass {total} deviates from 1 by more than 5e-3")));
    }
    let table = |cells: &[f64], edges: &[f64]| {
        let mut lower = vec![0.0; m + 1];
        let mut upper = vec![0.0; m + 1];
        for i in 0..m {
            lower[i + 1] = lower[i] + cells[i];
            upper[m - 1 - i] = upper[m - i] + cells[m - 1 - i];
        }
        MarginalTable::from_tails(edges, &lower, &upper)
    };
    Ok((table(&rows, &ex)?, table(&cols, &ey)?, total))
}

/// Both marginal CDFs by quadrature of the joint density over the other
/// coordinate.
pub fn gh_marginals(params: &GHParams) -> Result<(MarginalTable, MarginalTable)> {
    let dens = GhDensity::new(params)?;
    let sup = find_support(&dens)?;
    let (fx, fy, _) = marginals_on(&dens, &sup, &GhTabulation::default())?;
    Ok((fx, fy))
}

// ---------------------------------------------------------------------------
// implied copula

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpOrder {
    Linear,
    CubicMonotone,
}

/// Copula tabulated on a probability grid (boundary rows included) and
/// interpolated separably.
#[derive(Debug, Clone)]
pub struct InterpolatedCopula {
    pub params: GHParams,
    pub grid_u: Vec<f64>,
    pub grid_v: Vec<f64>,
    /// row-major, u index outermost
    pub cdf_table: Vec<f64>,
    pub order: InterpOrder,
    /// ∂/∂u slopes of the interpolant along each column
    du_slopes: Vec<f64>,
    symmetric: bool,
    marginals: Option<(MarginalTable, MarginalTable)>,
}

/// Probability nodes with logistic (arctanh) spacing in [u_min, 1 − u_min];
/// returned with their logits.
fn probability_grid(n: usize, u_min: f64) -> Vec<(f64, f64)> {
    let smax = 0.5 * ((1.0 - u_min) / u_min).ln();
    (0..n)
        .map(|k| {
            let s = -smax + 2.0 * smax * k as f64 / (n - 1) as f64;
            (logistic(2.0 * s), 2.0 * s)
        })
        .collect()
}

impl InterpolatedCopula {
    fn from_table(params: GHParams, grid_u: Vec<f64>, grid_v: Vec<f64>, table: Vec<f64>, order: InterpOrder) -> Self {
        let (nu, nv) = (grid_u.len(), grid_v.len());
        let mut du_slopes = vec![0.0; nu * nv];
        if order == InterpOrder::CubicMonotone {
            for j in 0..nv {
                let col: Vec<f64> = (0..nu).map(|i| table[i * nv + j]).collect();
                for (i, d) in monotone_slopes(&grid_u, &col).into_iter().enumerate() {
                    du_slopes[i * nv + j] = d;
                }
            }
        }
        let symmetric = params.is_exchangeable() && grid_u == grid_v;
        Self { params, grid_u, grid_v, cdf_table: table, order, du_slopes, symmetric, marginals: None }
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn marginals(&self) -> Option<&(MarginalTable, MarginalTable)> {
        self.marginals.as_ref()
    }

    /// Column values of the interpolant at a fixed u.
    fn row_at(&self, u: f64) -> Vec<f64> {
        let nv = self.grid_v.len();
        let i = segment(&self.grid_u, u);
        let (u0, u1) = (self.grid_u[i], self.grid_u[i + 1]);
        (0..nv)
            .map(|j| {
                let (c0, c1) = (self.cdf_table[i * nv + j], self.cdf_table[(i + 1) * nv + j]);
                match self.order {
                    InterpOrder::Linear => c0 + (c1 - c0) * (u - u0) / (u1 - u0),
                    InterpOrder::CubicMonotone => {
                        hermite(u0, u1, c0, c1, self.du_slopes[i * nv + j], self.du_slopes[(i + 1) * nv + j], u).0
                    }
                }
            })
            .collect()
    }

    fn along_v(&self, row: &[f64], slopes: &[f64], v: f64) -> f64 {
        let j = segment(&self.grid_v, v);
        let (v0, v1) = (self.grid_v[j], self.grid_v[j + 1]);
        match self.order {
            InterpOrder::Linear => row[j] + (row[j + 1] - row[j]) * (v - v0) / (v1 - v0),
            InterpOrder::CubicMonotone => hermite(v0, v1, row[j], row[j + 1], slopes[j], slopes[j + 1], v).0,
        }
    }

    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        let row = self.row_at(u);
        let slopes = monotone_slopes(&self.grid_v, &row);
        self.along_v(&row, &slopes, v).clamp((u + v - 1.0).max(0.0), u.min(v))
    }

    /// Central differences of the interpolant (h = 1e-5, kept inside (0,1)).
    pub fn partials(&self, u: f64, v: f64) -> (f64, f64) {
        let h = 1e-5;
        let d = |a: f64, b: f64, ca: f64, cb: f64| ((cb - ca) / (b - a)).clamp(0.0, 1.0);
        let (ua, ub) = ((u - h).max(0.0), (u + h).min(1.0));
        let (va, vb) = ((v - h).max(0.0), (v + h).min(1.0));
        (d(ua, ub, self.cdf(ua, v), self.cdf(ub, v)), d(va, vb, self.cdf(u, va), self.cdf(u, vb)))
    }

    /// C on `nodes × nodes`, row-major.
    pub fn cdf_grid(&self, nodes: &[f64]) -> Vec<f64> {
        let n = nodes.len();
        let mut out = vec![0.0; n * n];
        out.par_chunks_mut(n).enumerate().for_each(|(a, dst)| {
            let u = nodes[a];
            let row = self.row_at(u);
            let slopes = monotone_slopes(&self.grid_v, &row);
            for (b, c) in dst.iter_mut().enumerate() {
                let v = nodes[b];
                *c = self.along_v(&row, &slopes, v).clamp((u + v - 1.0).max(0.0), u.min(v));
            }
        });
        out
    }

    /// Draws from the GH law and maps through the tabulated marginals.
    pub fn sample(&self, n: usize, stream: &RngStream) -> Vec<UnitSquarePoint> {
        let owned;
        let (fx, fy) = match &self.marginals {
            Some(m) => (&m.0, &m.1),
            None => {
                owned = gh_marginals(&self.params).expect("parameters were validated when tabulated");
                (&owned.0, &owned.1)
            }
        };
        gh_sample(&self.params, n, stream)
            .expect("parameters were validated when tabulated")
            .into_iter()
            .map(|z| UnitSquarePoint { u: fx.cdf_at(z[0]), v: fy.cdf_at(z[1]) })
            .collect()
    }

    /// CSV dump: `grid_u,...`, `grid_v,...`, then one row per u node.
    /// The first line carries the GH parameters as a JSON comment.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let js = serde_json::to_string(&self.params).map_err(|e| GhError::Input(e.to_string()))?;
        writeln!(w, "# {js}")?;
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",");
        writeln!(w, "grid_u,{}", join(&self.grid_u))?;
        writeln!(w, "grid_v,{}", join(&self.grid_v))?;
        for row in self.cdf_table.chunks(self.grid_v.len()) {
            writeln!(w, "{}", join(row))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            lines.next().ok_or_else(|| GhError::Input("truncated copula table".into()))?.map_err(GhError::from)
        };
        let head = next()?;
        let params: GHParams = serde_json::from_str(head.trim_start_matches('#').trim())
            .map_err(|e| GhError::Input(format!("parameter header: {e}")))?;
        let parse = |s: &str| -> Result<Vec<f64>> {
            s.split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|e| GhError::Input(format!("{t}: {e}"))))
                .collect()
        };
        let gu_line = next()?;
        let gv_line = next()?;
        let gu = parse(gu_line.strip_prefix("grid_u,").ok_or_else(|| GhError::Input("missing grid_u".into()))?)?;
        let gv = parse(gv_line.strip_prefix("grid_v,").ok_or_else(|| GhError::Input("missing grid_v".into()))?)?;
        let mut table = Vec::with_capacity(gu.len() * gv.len());
        for _ in 0..gu.len() {
            let row = parse(&next()?)?;
            if row.len() != gv.len() {
                return Err(GhError::Input("ragged copula table".into()));
            }
            table.extend(row);
        }
        Ok(Self::from_table(params, gu, gv, table, InterpOrder::CubicMonotone))
    }
}

/// Tabulates C(u,v) = H(F⁻¹(u), G⁻¹(v)) with default quadrature settings.
pub fn gh_implied_copula(params: &GHParams, grid_n: usize) -> Result<InterpolatedCopula> {
    gh_implied_copula_with(params, &GhTabulation { grid_n, ..GhTabulation::default() })
}

pub fn gh_implied_copula_with(params: &GHParams, cfg: &GhTabulation) -> Result<InterpolatedCopula> {
    if cfg.grid_n < 64 {
        return Err(GhError::Input(format!("grid_n ≥ 64 required, got {}", cfg.grid_n)));
    }
    let dens = GhDensity::new(params)?;
    let sup = find_support(&dens)?;
    let (fx, fy, total) = marginals_on(&dens, &sup, cfg)?;
    let probs = probability_grid(cfg.grid_n, cfg.u_min);
    let xq: Vec<f64> = probs.iter().map(|&(_, l)| fx.quantile_logit(l)).collect();
    let yq: Vec<f64> = probs.iter().map(|&(_, l)| fy.quantile_logit(l)).collect();
    let n = cfg.grid_n;
    let gl = GaussLegendre::new(cfg.cell_order);

    // cell edges: support start, the quantile nodes, support end
    let mut ex = vec![sup.x[0].min(xq[0])];
    ex.extend(&xq);
    ex.push(sup.x[1].max(xq[n - 1]));
    let mut ey = vec![sup.y[0].min(yq[0])];
    ey.extend(&yq);
    ey.push(sup.y[1].max(yq[n - 1]));
    // the outer strips run between the truncation edges and the extreme
    // quantiles; split them so the rule resolves the decaying tails
    let strip = |a: f64, b: f64, k: usize| -> Vec<(f64, f64)> {
        (0..k).map(|s| (a + (b - a) * s as f64 / k as f64, a + (b - a) * (s + 1) as f64 / k as f64)).collect()
    };
    let pieces = |edges: &[f64], i: usize| -> Vec<(f64, f64)> {
        if i == 0 || i == n {
            strip(edges[i], edges[i + 1], 24)
        } else {
            vec![(edges[i], edges[i + 1])]
        }
    };
    let mass: Vec<Vec<f64>> = (0..=n)
        .into_par_iter()
        .map(|a| {
            let px = pieces(&ex, a);
            (0..=n)
                .map(|b| {
                    let py = pieces(&ey, b);
                    let mut s = 0.0;
                    for &(x0, x1) in &px {
                        for &(y0, y1) in &py {
                            s += dens.rect_mass(&gl, x0, x1, y0, y1);
                        }
                    }
                    s
                })
                .collect()
        })
        .collect();
    // H at the quantile nodes, plus its own margins: normalizing by the
    // table's margins (rather than the base-grid marginals) keeps
    // C(u,1) = u exact on the grid, which the upper-tail surfaces need
    let mut cum = vec![0.0; (n + 1) * (n + 1)];
    for a in 0..=n {
        let mut acc = 0.0;
        for b in 0..=n {
            acc += mass[a][b];
            cum[a * (n + 1) + b] = acc + if a > 0 { cum[(a - 1) * (n + 1) + b] } else { 0.0 };
        }
    }
    let t = cum[(n + 1) * (n + 1) - 1];
    if (t / total - 1.0).abs() > 5e-3 {
        return Err(GhError::Range(format!("copula table mass {t} disagrees with marginal mass {total}")));
    }
    let mut gu: Vec<f64> = (0..n).map(|a| cum[a * (n + 1) + n] / t).collect();
    let mut gv: Vec<f64> = (0..n).map(|b| cum[n * (n + 1) + b] / t).collect();
    let mut h: Vec<f64> = (0..n * n).map(|k| cum[(k / n) * (n + 1) + k % n] / t).collect();
    if params.is_exchangeable() {
        for k in 0..n {
            let g = 0.5 * (gu[k] + gv[k]);
            gu[k] = g;
            gv[k] = g;
            for l in 0..k {
                let z = 0.5 * (h[k * n + l] + h[l * n + k]);
                h[k * n + l] = z;
                h[l * n + k] = z;
            }
        }
    }
    let defect = probs.iter().zip(&gu).map(|(&(u, _), g)| (u - g).abs()).fold(0.0, f64::max);
    log::debug!("implied copula: max |nominal − tabulated| margin = {defect:e}");
    for g in [&gu, &gv] {
        if g.windows(2).any(|w| w[1] <= w[0]) || g[0] <= 0.0 || g[n - 1] >= 1.0 {
            return Err(GhError::Range("tabulated margins are not strictly increasing inside (0,1)".into()));
        }
    }
    let m = n + 2;
    let frame = |g: &[f64]| {
        let mut out = Vec::with_capacity(m);
        out.push(0.0);
        out.extend_from_slice(g);
        out.push(1.0);
        out
    };
    let (grid_u, grid_v) = (frame(&gu), frame(&gv));
    let mut table = vec![0.0; m * m];
    for a in 0..n {
        for b in 0..n {
            let (u, v) = (grid_u[a + 1], grid_v[b + 1]);
            table[(a + 1) * m + b + 1] = h[a * n + b].clamp((u + v - 1.0).max(0.0), u.min(v));
        }
    }
    for k in 0..m {
        table[(m - 1) * m + k] = grid_v[k];
        table[k * m + m - 1] = grid_u[k];
    }
    let mut out = InterpolatedCopula::from_table(*params, grid_u, grid_v, table, InterpOrder::CubicMonotone);
    out.marginals = Some((fx, fy));
    Ok(out)
}

// ---------------------------------------------------------------------------
// sampling and fitting

/// Z = μ + WΔβ + √W·L·N with W ~ GIG(λ, δ², ψ) and LL′ = Δ.
pub fn gh_sample(params: &GHParams, n: usize, stream: &RngStream) -> Result<Vec<[f64; 2]>> {
    params.validate()?;
    let gig = params.mixing()?;
    let d = params.dispersion;
    let l11 = d[0][0].sqrt();
    let l21 = d[1][0] / l11;
    let l22 = (d[1][1] - l21 * l21).sqrt();
    let g = params.drift();
    let mut rng = stream.rng();
    Ok((0..n)
        .map(|_| {
            let w = gig.sample(&mut rng);
            let n1: f64 = StandardNormal.sample(&mut rng);
            let n2: f64 = StandardNormal.sample(&mut rng);
            let s = w.sqrt();
            [
                params.mu[0] + w * g[0] + s * l11 * n1,
                params.mu[1] + w * g[1] + s * (l21 * n1 + l22 * n2),
            ]
        })
        .collect())
}

/// Which parameters stay at their initial values during fitting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GhFitOptions {
    /// keep λ fixed (e.g. λ = −1/2 for NIG)
    pub fix_lambda: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GhFit {
    pub params: GHParams,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
}

pub fn gh_loglik(params: &GHParams, data: &[[f64; 2]]) -> Result<f64> {
    let d = GhDensity::new(params)?;
    Ok(data.iter().map(|z| d.ln_density(z[0], z[1])).sum())
}

/// Unconstrained coordinates: λ, ln(α − √(β′Δβ)), β, ln δ, μ, and a
/// unit-determinant factor L = [[e^a, 0], [b, e^{−a}]] of Δ.
fn encode(p: &GHParams) -> Vec<f64> {
    let q = p.normalized();
    let d = q.dispersion;
    let l11 = d[0][0].sqrt();
    let b = d[1][0] / l11;
    let gap = (q.alpha - q.beta_norm()).max(1e-12);
    let ld = if q.delta > 0.0 { q.delta.ln() } else { f64::NEG_INFINITY };
    vec![q.lambda, gap.ln(), q.beta[0], q.beta[1], ld, q.mu[0], q.mu[1], l11.ln(), b]
}

fn decode(x: &[f64]) -> GHParams {
    let (ea, b) = (x[7].exp(), x[8]);
    let dispersion = [[ea * ea, ea * b], [ea * b, b * b + 1.0 / (ea * ea)]];
    let mut p = GHParams {
        lambda: x[0],
        alpha: 1.0,
        beta: [x[2], x[3]],
        delta: x[4].exp(),
        mu: [x[5], x[6]],
        dispersion,
    };
    p.alpha = p.beta_norm() + x[1].exp();
    p
}

/// Direct maximum likelihood over the unconstrained coordinates. A
/// variance-gamma start (δ = 0) keeps δ = 0. The result is reported on the
/// dispersion scale |Δ| of `init`.
pub fn gh_fit(data: &[[f64; 2]], init: &GHParams, cfg: &OptimConfig, opts: GhFitOptions) -> Result<GhFit> {
    if data.len() < 50 {
        return Err(GhError::Input(format!("at least 50 observations required, got {}", data.len())));
    }
    init.validate()?;
    cfg.validate()?;
    let scale = init.det().sqrt();
    let x0 = encode(init);
    let vg = init.delta == 0.0;
    // free coordinates, in order
    let free: Vec<usize> = (0..9).filter(|&k| !(k == 0 && opts.fix_lambda) && !(k == 4 && vg)).collect();
    let full = |y: &[f64]| {
        let mut x = x0.clone();
        for (k, &i) in free.iter().enumerate() {
            x[i] = y[k];
        }
        x
    };
    let objective = |y: &[f64]| -> f64 {
        let p = decode(&full(y));
        match gh_loglik(&p, data) {
            Ok(l) if l.is_finite() => -l,
            _ => f64::INFINITY,
        }
    };
    let y0: Vec<f64> = free.iter().map(|&i| x0[i]).collect();
    let mut r = nelder_mead(objective, &y0, cfg)?;
    // restart from the optimum to escape simplex collapse
    for _ in 0..3 {
        let again = nelder_mead(objective, &r.x, cfg)?;
        let improved = r.f - again.f;
        let done = improved.abs() <= cfg.f_tolerance.max(1e-9 * r.f.abs());
        r = crate::numerics::OptimResult { iterations: r.iterations + again.iterations, ..again };
        if done {
            break;
        }
    }
    let params = decode(&full(&r.x)).rescaled(scale);
    Ok(GhFit { params, loglik: -r.f, converged: r.converged, iterations: r.iterations })
}

/// Constructor in the (λ, α, β, δ, Δ) layout of the published GH rows, μ = 0.
pub fn gh_params(lambda: f64, alpha: f64, beta: [f64; 2], delta: f64, d11: f64, d12: f64, d22: f64) -> Result<GHParams> {
    GHParams::new(lambda, alpha, beta, delta, [0.0, 0.0], [[d11, d12], [d12, d22]])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probability_grid_is_symmetric() {
        let g = probability_grid(64, 1e-7);
        assert!((g[0].0 - 1e-7).abs() < 1e-15);
        for k in 0..64 {
            assert!((g[k].0 + g[63 - k].0 - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn encode_decode_roundtrip() {
        let p = gh_params(1.5, 0.8, [-0.4, 0.3], 1.0, 2.29, 2.06, 2.29).unwrap();
        let q = decode(&encode(&p)).rescaled(p.det().sqrt());
        for (a, b) in [(p.alpha, q.alpha), (p.delta, q.delta), (p.dispersion[0][1], q.dispersion[0][1])] {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn scale_equivalence_preserves_density_shape() {
        let p = gh_params(-0.5, 1.2, [-0.4, -0.3], 1.0, 1.77, 1.57, 1.96).unwrap();
        let q = p.rescaled(3.0);
        let (a, b) = (GhDensity::new(&p).unwrap(), GhDensity::new(&q).unwrap());
        for z in [[0.1, -0.3], [2.0, 1.5], [-4.0, 3.0]] {
            assert!((a.ln_density(z[0], z[1]) - b.ln_density(z[0], z[1])).abs() < 1e-10);
        }
    }
}
