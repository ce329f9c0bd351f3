//! Closed-form bivariate copula families, the three reference copulas
//! (W, Π, M) and GH-implied tabulated copulas.

use crate::ghdist::InterpolatedCopula;
use crate::numerics::{
    brent_root, integrate_adaptive, normal_cdf, normal_quantile_unchecked, t_cdf, t_ln_norm, t_quantile,
    GaussLegendre, RngStream,
};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CopulaError {
    #[error("{family}: {constraint}")]
    InvalidParameter { family: &'static str, constraint: String },
    #[error("{0} has a singular component; use sampling-based methods instead of the density")]
    Singular(&'static str),
    #[error("unknown copula family '{0}'")]
    UnknownFamily(String),
    #[error("{family}: missing parameter '{name}'")]
    MissingParameter { family: &'static str, name: &'static str },
    #[error("point ({u}, {v}) outside the unit square")]
    OutOfSquare { u: f64, v: f64 },
}

pub type Result<T> = std::result::Result<T, CopulaError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Frechet,
    Mardia,
    CuadrasAuge,
    GumbelHougaard,
    AliMikhailHaq,
    Clayton,
    Frank,
    MarshallOlkin,
    Gaussian,
    StudentT,
    Independence,
    Comonotone,
    Countermonotone,
    TabulatedGh,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Frechet => "frechet",
            Family::Mardia => "mardia",
            Family::CuadrasAuge => "cuadras_auge",
            Family::GumbelHougaard => "gumbel",
            Family::AliMikhailHaq => "amh",
            Family::Clayton => "clayton",
            Family::Frank => "frank",
            Family::MarshallOlkin => "marshall_olkin",
            Family::Gaussian => "gaussian",
            Family::StudentT => "t",
            Family::Independence => "independence",
            Family::Comonotone => "comonotone",
            Family::Countermonotone => "countermonotone",
            Family::TabulatedGh => "gh",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let k = s.to_ascii_lowercase().replace(['-', ' '], "_");
        Ok(match k.as_str() {
            "frechet" => Family::Frechet,
            "mardia" => Family::Mardia,
            "cuadras_auge" | "cuadras" | "cuadrasauge" => Family::CuadrasAuge,
            "gumbel" | "gumbel_hougaard" => Family::GumbelHougaard,
            "amh" | "ali_mikhail_haq" | "alimikhailhaq" => Family::AliMikhailHaq,
            "clayton" => Family::Clayton,
            "frank" => Family::Frank,
            "marshall_olkin" | "marshall" | "marshallolkin" => Family::MarshallOlkin,
            "gaussian" | "normal" | "gauss" => Family::Gaussian,
            "t" | "student_t" | "studentt" | "student" => Family::StudentT,
            "independence" | "pi" | "product" => Family::Independence,
            "comonotone" | "m" | "upper_bound" => Family::Comonotone,
            "countermonotone" | "w" | "lower_bound" => Family::Countermonotone,
            "gh" | "tabulated_gh" => Family::TabulatedGh,
            _ => return Err(CopulaError::UnknownFamily(s.to_string())),
        })
    }

    /// Parameter names in canonical order.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            Family::Frechet | Family::MarshallOlkin => &["alpha", "beta"],
            Family::Mardia
            | Family::CuadrasAuge
            | Family::GumbelHougaard
            | Family::AliMikhailHaq
            | Family::Clayton
            | Family::Frank => &["theta"],
            Family::Gaussian => &["rho"],
            Family::StudentT => &["rho", "nu"],
            _ => &[],
        }
    }

    /// Families with an absolutely continuous law on the open square.
    pub fn has_density(self) -> bool {
        matches!(
            self,
            Family::GumbelHougaard
                | Family::AliMikhailHaq
                | Family::Clayton
                | Family::Frank
                | Family::Gaussian
                | Family::StudentT
                | Family::Independence
        )
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitSquarePoint {
    pub u: f64,
    pub v: f64,
}

impl UnitSquarePoint {
    pub fn new(u: f64, v: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v) {
            Ok(Self { u, v })
        } else {
            Err(CopulaError::OutOfSquare { u, v })
        }
    }
}

/// ∂C/∂u and ∂C/∂v at a point; `analytic` is false when obtained by
/// central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Partials {
    pub du: f64,
    pub dv: f64,
    pub analytic: bool,
}

#[derive(Debug, Clone)]
enum Kind {
    Frechet { a: f64, b: f64 },
    Mardia { theta: f64, a: f64, b: f64 },
    Cuadras { theta: f64 },
    Gumbel { theta: f64 },
    Amh { theta: f64 },
    Clayton { theta: f64 },
    Frank { theta: f64 },
    Marshall { a: f64, b: f64 },
    Gaussian { rho: f64 },
    StudentT { rho: f64, nu: f64 },
    Independence,
    Comonotone,
    Countermonotone,
    Tabulated(Arc<InterpolatedCopula>),
}

/// A validated bivariate copula. Parameters are checked at construction;
/// evaluation never fails on parameter grounds.
#[derive(Debug, Clone)]
pub struct CopulaSpec {
    kind: Kind,
}

fn invalid(family: &'static str, constraint: impl Into<String>) -> CopulaError {
    CopulaError::InvalidParameter { family, constraint: constraint.into() }
}

impl CopulaSpec {
    pub fn frechet(alpha: f64, beta: f64) -> Result<Self> {
        if !((0.0..=1.0).contains(&alpha) && (0.0..=1.0).contains(&beta) && alpha + beta <= 1.0 + 1e-12) {
            return Err(invalid("frechet", "α, β ∈ [0,1] and α + β ≤ 1 required"));
        }
        Ok(Self { kind: Kind::Frechet { a: alpha, b: beta } })
    }

    pub fn mardia(theta: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&theta) {
            return Err(invalid("mardia", "θ ∈ [−1, 1] required"));
        }
        let t2 = theta * theta;
        Ok(Self { kind: Kind::Mardia { theta, a: t2 * (1.0 + theta) / 2.0, b: t2 * (1.0 - theta) / 2.0 } })
    }

    pub fn cuadras_auge(theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(invalid("cuadras_auge", "θ ∈ [0, 1] required"));
        }
        Ok(Self { kind: Kind::Cuadras { theta } })
    }

    pub fn gumbel(theta: f64) -> Result<Self> {
        if !(theta >= 1.0 && theta.is_finite()) {
            return Err(invalid("gumbel", "θ ≥ 1 required"));
        }
        Ok(Self { kind: Kind::Gumbel { theta } })
    }

    pub fn amh(theta: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&theta) {
            return Err(invalid("amh", "θ ∈ [−1, 1] required"));
        }
        Ok(Self { kind: Kind::Amh { theta } })
    }

    pub fn clayton(theta: f64) -> Result<Self> {
        if !(theta >= -1.0 && theta != 0.0 && theta.is_finite()) {
            return Err(invalid("clayton", "θ ∈ [−1, 0) ∪ (0, ∞) required"));
        }
        Ok(Self { kind: Kind::Clayton { theta } })
    }

    pub fn frank(theta: f64) -> Result<Self> {
        if !(theta != 0.0 && theta.is_finite()) {
            return Err(invalid("frank", "θ ≠ 0 required"));
        }
        Ok(Self { kind: Kind::Frank { theta } })
    }

    pub fn marshall_olkin(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0 && beta > 0.0 && beta < 1.0) {
            return Err(invalid("marshall_olkin", "α, β ∈ (0, 1) required"));
        }
        Ok(Self { kind: Kind::Marshall { a: alpha, b: beta } })
    }

    pub fn gaussian(rho: f64) -> Result<Self> {
        if !(rho > -1.0 && rho < 1.0) {
            return Err(invalid("gaussian", "ρ ∈ (−1, 1) required"));
        }
        Ok(Self { kind: Kind::Gaussian { rho } })
    }

    pub fn student_t(rho: f64, nu: f64) -> Result<Self> {
        if !(rho > -1.0 && rho < 1.0) {
            return Err(invalid("t", "ρ ∈ (−1, 1) required"));
        }
        if !(nu > 0.0) {
            return Err(invalid("t", "ν > 0 required"));
        }
        Ok(Self { kind: Kind::StudentT { rho, nu } })
    }

    pub fn independence() -> Self {
        Self { kind: Kind::Independence }
    }

    pub fn comonotone() -> Self {
        Self { kind: Kind::Comonotone }
    }

    pub fn countermonotone() -> Self {
        Self { kind: Kind::Countermonotone }
    }

    pub fn tabulated(table: Arc<InterpolatedCopula>) -> Self {
        Self { kind: Kind::Tabulated(table) }
    }

    /// Builds a spec from a family and parameters in canonical order.
    pub fn from_params(family: Family, params: &[f64]) -> Result<Self> {
        let need = family.param_names().len();
        if params.len() < need {
            return Err(CopulaError::MissingParameter {
                family: family.name(),
                name: family.param_names()[params.len()],
            });
        }
        match family {
            Family::Frechet => Self::frechet(params[0], params[1]),
            Family::Mardia => Self::mardia(params[0]),
            Family::CuadrasAuge => Self::cuadras_auge(params[0]),
            Family::GumbelHougaard => Self::gumbel(params[0]),
            Family::AliMikhailHaq => Self::amh(params[0]),
            Family::Clayton => Self::clayton(params[0]),
            Family::Frank => Self::frank(params[0]),
            Family::MarshallOlkin => Self::marshall_olkin(params[0], params[1]),
            Family::Gaussian => Self::gaussian(params[0]),
            Family::StudentT => Self::student_t(params[0], params[1]),
            Family::Independence => Ok(Self::independence()),
            Family::Comonotone => Ok(Self::comonotone()),
            Family::Countermonotone => Ok(Self::countermonotone()),
            Family::TabulatedGh => Err(invalid("gh", "tabulated GH copulas are built from GH parameters")),
        }
    }

    pub fn family(&self) -> Family {
        match self.kind {
            Kind::Frechet { .. } => Family::Frechet,
            Kind::Mardia { .. } => Family::Mardia,
            Kind::Cuadras { .. } => Family::CuadrasAuge,
            Kind::Gumbel { .. } => Family::GumbelHougaard,
            Kind::Amh { .. } => Family::AliMikhailHaq,
            Kind::Clayton { .. } => Family::Clayton,
            Kind::Frank { .. } => Family::Frank,
            Kind::Marshall { .. } => Family::MarshallOlkin,
            Kind::Gaussian { .. } => Family::Gaussian,
            Kind::StudentT { .. } => Family::StudentT,
            Kind::Independence => Family::Independence,
            Kind::Comonotone => Family::Comonotone,
            Kind::Countermonotone => Family::Countermonotone,
            Kind::Tabulated(_) => Family::TabulatedGh,
        }
    }

    /// Parameters in canonical order (empty for parameter-free copulas).
    pub fn params(&self) -> Vec<f64> {
        match self.kind {
            Kind::Frechet { a, b } | Kind::Marshall { a, b } => vec![a, b],
            Kind::Mardia { theta, .. }
            | Kind::Cuadras { theta }
            | Kind::Gumbel { theta }
            | Kind::Amh { theta }
            | Kind::Clayton { theta }
            | Kind::Frank { theta } => vec![theta],
            Kind::Gaussian { rho } => vec![rho],
            Kind::StudentT { rho, nu } => vec![rho, nu],
            _ => vec![],
        }
    }

    pub fn table(&self) -> Option<&Arc<InterpolatedCopula>> {
        match &self.kind {
            Kind::Tabulated(t) => Some(t),
            _ => None,
        }
    }

    /// Short label such as `clayton(theta=5)`.
    pub fn label(&self) -> String {
        let names = self.family().param_names();
        if names.is_empty() {
            return self.family().name().to_string();
        }
        let inner: Vec<String> = names.iter().zip(self.params()).map(|(n, p)| format!("{n}={p}")).collect();
        format!("{}({})", self.family().name(), inner.join(","))
    }

    /// `{"family": ..., "params": {name: value}}`.
    pub fn to_json(&self) -> Value {
        let mut params = Map::new();
        for (n, p) in self.family().param_names().iter().zip(self.params()) {
            params.insert((*n).to_string(), json!(p));
        }
        if let Kind::Tabulated(t) = &self.kind {
            return json!({"family": "gh", "params": serde_json::to_value(&t.params).unwrap_or(Value::Null)});
        }
        json!({"family": self.family().name(), "params": params})
    }

    /// Parses the JSON form. GH specs are rejected here; they need the
    /// tabulation pipeline (see `ghdist`).
    pub fn from_json(v: &Value) -> Result<Self> {
        let fam = v
            .get("family")
            .and_then(Value::as_str)
            .ok_or_else(|| CopulaError::UnknownFamily(v.to_string()))?;
        let family = Family::parse(fam)?;
        let params = v.get("params").cloned().unwrap_or(Value::Object(Map::new()));
        let mut vals = Vec::new();
        for &name in family.param_names() {
            let x = params
                .get(name)
                .and_then(Value::as_f64)
                .ok_or(CopulaError::MissingParameter { family: family.name(), name })?;
            vals.push(x);
        }
        Self::from_params(family, &vals)
    }

    /// C(u, v) = C(v, u) for every point.
    pub fn is_symmetric(&self) -> bool {
        match &self.kind {
            Kind::Marshall { a, b } => a == b,
            Kind::Tabulated(t) => t.is_symmetric(),
            _ => true,
        }
    }

    // -----------------------------------------------------------------------
    // evaluation

    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let v = v.clamp(0.0, 1.0);
        if u == 0.0 || v == 0.0 {
            return 0.0;
        }
        if u == 1.0 {
            return v;
        }
        if v == 1.0 {
            return u;
        }
        match &self.kind {
            Kind::Frechet { a, b } | Kind::Mardia { a, b, .. } => {
                a * u.min(v) + (1.0 - a - b) * u * v + b * (u + v - 1.0).max(0.0)
            }
            Kind::Cuadras { theta } => u.min(v).powf(*theta) * (u * v).powf(1.0 - theta),
            Kind::Gumbel { theta } => {
                let s = (-u.ln()).powf(*theta) + (-v.ln()).powf(*theta);
                (-s.powf(1.0 / theta)).exp()
            }
            Kind::Amh { theta } => u * v / (1.0 - theta * (1.0 - u) * (1.0 - v)),
            Kind::Clayton { theta } => {
                let a = u.powf(-theta) + v.powf(-theta) - 1.0;
                if a <= 0.0 {
                    0.0
                } else {
                    a.powf(-1.0 / theta)
                }
            }
            Kind::Frank { theta } => {
                let x = (-theta * u).exp_m1() * (-theta * v).exp_m1() / (-theta).exp_m1();
                if x > -0.5 {
                    -x.ln_1p() / theta
                } else {
                    -(frank_denominator(*theta, u, v) / (-theta).exp_m1()).ln() / theta
                }
            }
            Kind::Marshall { a, b } => (u.powf(1.0 - a) * v).min(u * v.powf(1.0 - b)),
            Kind::Gaussian { rho } => gaussian_cdf(u, v, *rho),
            Kind::StudentT { rho, nu } => t_copula_cdf(u, v, *rho, *nu),
            Kind::Independence => u * v,
            Kind::Comonotone => u.min(v),
            Kind::Countermonotone => (u + v - 1.0).max(0.0),
            Kind::Tabulated(t) => t.cdf(u, v),
        }
    }

    /// First partial derivatives. At ridges (diagonal of M, anti-diagonal of
    /// W, kinks of Cuadras-Augé / Marshall-Olkin) the limit from below in the
    /// differencing coordinate is returned.
    pub fn partials(&self, u: f64, v: f64) -> Partials {
        let analytic = |du: f64, dv: f64| Partials { du, dv, analytic: true };
        match &self.kind {
            Kind::Frechet { a, b } | Kind::Mardia { a, b, .. } => {
                let (mu, mv) = m_partials(u, v);
                let (wu, wv) = w_partials(u, v);
                analytic(a * mu + (1.0 - a - b) * v + b * wu, a * mv + (1.0 - a - b) * u + b * wv)
            }
            Kind::Cuadras { theta } => {
                // u < v: C = u v^{1−θ};  u > v: C = u^{1−θ} v
                let du = if u <= v { v.powf(1.0 - theta) } else { (1.0 - theta) * u.powf(-theta) * v };
                let dv = if v <= u { u.powf(1.0 - theta) } else { (1.0 - theta) * v.powf(-theta) * u };
                analytic(du, dv)
            }
            Kind::Gumbel { theta } => {
                let (lu, lv) = (-u.ln(), -v.ln());
                let s = lu.powf(*theta) + lv.powf(*theta);
                let c = (-s.powf(1.0 / theta)).exp();
                let k = c * s.powf(1.0 / theta - 1.0);
                analytic(k * lu.powf(theta - 1.0) / u, k * lv.powf(theta - 1.0) / v)
            }
            Kind::Amh { theta } => {
                let d = 1.0 - theta * (1.0 - u) * (1.0 - v);
                let d2 = d * d;
                analytic(
                    (v * d - u * v * theta * (1.0 - v)) / d2,
                    (u * d - u * v * theta * (1.0 - u)) / d2,
                )
            }
            Kind::Clayton { theta } => {
                let a = u.powf(-theta) + v.powf(-theta) - 1.0;
                if a <= 0.0 {
                    return analytic(0.0, 0.0);
                }
                let k = a.powf(-1.0 / theta - 1.0);
                analytic(k * u.powf(-theta - 1.0), k * v.powf(-theta - 1.0))
            }
            Kind::Frank { theta } => {
                let eu = (-theta * u).exp_m1();
                let ev = (-theta * v).exp_m1();
                let d = frank_denominator(*theta, u, v);
                analytic((-theta * u).exp() * ev / d, (-theta * v).exp() * eu / d)
            }
            Kind::Marshall { a, b } => {
                // C = u^{1−α} v where u^α ≥ v^β, else u v^{1−β}
                let region1_u = u.powf(*a) > v.powf(*b); // strict: ridge goes left (smaller u)
                let du = if region1_u { (1.0 - a) * u.powf(-a) * v } else { v.powf(1.0 - b) };
                let region1_v = u.powf(*a) >= v.powf(*b); // ridge goes to smaller v
                let dv = if region1_v { u.powf(1.0 - a) } else { (1.0 - b) * u * v.powf(-b) };
                analytic(du, dv)
            }
            Kind::Gaussian { rho } => {
                let x = normal_quantile_unchecked(u);
                let y = normal_quantile_unchecked(v);
                let s = (1.0 - rho * rho).sqrt();
                analytic(normal_cdf((y - rho * x) / s), normal_cdf((x - rho * y) / s))
            }
            Kind::StudentT { rho, nu } => {
                let x = t_quantile(u, *nu);
                let y = t_quantile(v, *nu);
                analytic(t_conditional(x, y, *rho, *nu), t_conditional(y, x, *rho, *nu))
            }
            Kind::Independence => analytic(v, u),
            Kind::Comonotone => analytic(m_partials(u, v).0, m_partials(u, v).1),
            Kind::Countermonotone => analytic(w_partials(u, v).0, w_partials(u, v).1),
            Kind::Tabulated(t) => {
                let (du, dv) = t.partials(u, v);
                Partials { du, dv, analytic: false }
            }
        }
    }

    /// Copula density on the open square.
    pub fn density(&self, u: f64, v: f64) -> Result<f64> {
        let fam = self.family();
        if !fam.has_density() {
            return Err(CopulaError::Singular(fam.name()));
        }
        Ok(match self.kind {
            Kind::Gumbel { theta } => {
                let (lu, lv) = (-u.ln(), -v.ln());
                let s = lu.powf(theta) + lv.powf(theta);
                let r = s.powf(1.0 / theta);
                (-r).exp() * (lu * lv).powf(theta - 1.0) / (u * v) * s.powf(2.0 / theta - 2.0)
                    * (1.0 + (theta - 1.0) / r)
            }
            Kind::Amh { theta } => {
                let d = 1.0 - theta * (1.0 - u) * (1.0 - v);
                (1.0 + theta * ((1.0 + u) * (1.0 + v) - 3.0) + theta * theta * (1.0 - u) * (1.0 - v)) / (d * d * d)
            }
            Kind::Clayton { theta } => {
                let a = u.powf(-theta) + v.powf(-theta) - 1.0;
                if a <= 0.0 {
                    0.0
                } else {
                    (1.0 + theta) * (u * v).powf(-theta - 1.0) * a.powf(-1.0 / theta - 2.0)
                }
            }
            Kind::Frank { theta } => {
                let e1 = (-theta).exp_m1();
                let d = frank_denominator(theta, u, v);
                -theta * e1 * (-theta * (u + v)).exp() / (d * d)
            }
            Kind::Gaussian { rho } => {
                let x = normal_quantile_unchecked(u);
                let y = normal_quantile_unchecked(v);
                let r2 = 1.0 - rho * rho;
                ((-(rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * r2)).exp()) / r2.sqrt()
            }
            Kind::StudentT { rho, nu } => {
                let x = t_quantile(u, nu);
                let y = t_quantile(v, nu);
                t_copula_ln_density(x, y, rho, nu).exp()
            }
            Kind::Independence => 1.0,
            _ => unreachable!(),
        })
    }

    /// ln c(u, v) with the t quantiles supplied by the caller (MLE fast path).
    pub(crate) fn ln_density(&self, u: f64, v: f64) -> Result<f64> {
        if let Kind::StudentT { rho, nu } = self.kind {
            return Ok(t_copula_ln_density(t_quantile(u, nu), t_quantile(v, nu), rho, nu));
        }
        if let Kind::Gaussian { rho } = self.kind {
            let x = normal_quantile_unchecked(u);
            let y = normal_quantile_unchecked(v);
            let r2 = 1.0 - rho * rho;
            return Ok(-(rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * r2) - 0.5 * r2.ln());
        }
        Ok(self.density(u, v)?.ln())
    }

    /// Draws `n` points from the copula.
    pub fn sample(&self, n: usize, stream: &RngStream) -> Vec<UnitSquarePoint> {
        let mut rng = stream.rng();
        if let Kind::Tabulated(t) = &self.kind {
            return t.sample(n, stream);
        }
        (0..n).map(|_| self.sample_one(&mut rng)).collect()
    }

    fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> UnitSquarePoint {
        let unif = |rng: &mut R| -> f64 {
            loop {
                let x: f64 = rng.random();
                if x > 0.0 {
                    return x;
                }
            }
        };
        let (u, v) = match self.kind {
            Kind::Frechet { a, b } | Kind::Mardia { a, b, .. } => {
                let u = unif(rng);
                let k: f64 = rng.random();
                if k < a {
                    (u, u)
                } else if k < a + b {
                    (u, 1.0 - u)
                } else {
                    (u, unif(rng))
                }
            }
            Kind::Cuadras { theta } => {
                if theta == 0.0 {
                    (unif(rng), unif(rng))
                } else if theta == 1.0 {
                    let u = unif(rng);
                    (u, u)
                } else {
                    marshall_olkin_draw(theta, theta, rng)
                }
            }
            Kind::Marshall { a, b } => marshall_olkin_draw(a, b, rng),
            Kind::Clayton { theta } if theta > 0.0 => {
                let u = unif(rng);
                let w = unif(rng);
                let v = ((w.powf(-theta / (1.0 + theta)) - 1.0) * u.powf(-theta) + 1.0).powf(-1.0 / theta);
                (u, v)
            }
            Kind::Frank { theta } => {
                let u = unif(rng);
                let w = unif(rng);
                // invert ∂C/∂u(u, ·) = w in closed form
                let v = -((w * (-theta).exp_m1()) / (w + (1.0 - w) * (-theta * u).exp())).ln_1p() / theta;
                (u, v)
            }
            Kind::Gumbel { .. } | Kind::Amh { .. } | Kind::Clayton { .. } => {
                let u = unif(rng);
                let w = unif(rng);
                let v = brent_root(|v| self.partials(u, v).du - w, 1e-300, 1.0, 1e-15).unwrap_or(w);
                (u, v)
            }
            Kind::Gaussian { rho } => {
                let z1: f64 = StandardNormal.sample(rng);
                let e: f64 = StandardNormal.sample(rng);
                let z2 = rho * z1 + (1.0 - rho * rho).sqrt() * e;
                (normal_cdf(z1), normal_cdf(z2))
            }
            Kind::StudentT { rho, nu } => {
                let z1: f64 = StandardNormal.sample(rng);
                let e: f64 = StandardNormal.sample(rng);
                let z2 = rho * z1 + (1.0 - rho * rho).sqrt() * e;
                let w: f64 = ChiSquared::new(nu).expect("ν > 0").sample(rng);
                let s = (w / nu).sqrt();
                (t_cdf(z1 / s, nu), t_cdf(z2 / s, nu))
            }
            Kind::Independence => (unif(rng), unif(rng)),
            Kind::Comonotone => {
                let u = unif(rng);
                (u, u)
            }
            Kind::Countermonotone => {
                let u = unif(rng);
                (u, 1.0 - u)
            }
            Kind::Tabulated(_) => unreachable!(),
        };
        UnitSquarePoint { u: u.clamp(0.0, 1.0), v: v.clamp(0.0, 1.0) }
    }

    /// Closed-form Kendall τ where the family has an elementary one.
    pub fn analytic_tau(&self) -> Option<f64> {
        match self.kind {
            Kind::Frechet { a, b } | Kind::Mardia { a, b, .. } => Some((a - b) * (a + b + 2.0) / 3.0),
            Kind::Cuadras { theta } => Some(theta / (2.0 - theta)),
            Kind::Gumbel { theta } => Some(1.0 - 1.0 / theta),
            Kind::Amh { theta } => Some(if theta.abs() < 1e-8 {
                2.0 * theta / 9.0
            } else if theta == 1.0 {
                1.0 / 3.0
            } else {
                1.0 - 2.0 * (theta + (1.0 - theta).powi(2) * (-theta).ln_1p()) / (3.0 * theta * theta)
            }),
            Kind::Clayton { theta } => Some(theta / (theta + 2.0)),
            Kind::Frank { .. } => None,
            Kind::Marshall { a, b } => Some(a * b / (a + b - a * b)),
            Kind::Gaussian { rho } | Kind::StudentT { rho, .. } => Some(2.0 / PI * rho.asin()),
            Kind::Independence => Some(0.0),
            Kind::Comonotone => Some(1.0),
            Kind::Countermonotone => Some(-1.0),
            Kind::Tabulated(_) => None,
        }
    }

    /// C on the square grid `nodes × nodes`, row-major with the u index
    /// outermost: `out[i * n + j] = C(nodes[i], nodes[j])`.
    pub fn cdf_grid(&self, nodes: &[f64]) -> Vec<f64> {
        match &self.kind {
            Kind::Gaussian { rho } => elliptical_grid(nodes, Elliptical::Gauss { rho: *rho }),
            Kind::StudentT { rho, nu } => elliptical_grid(nodes, Elliptical::T { rho: *rho, nu: *nu }),
            Kind::Tabulated(t) => t.cdf_grid(nodes),
            _ => {
                let n = nodes.len();
                let mut out = vec![0.0; n * n];
                out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
                    let u = nodes[i];
                    for (j, c) in row.iter_mut().enumerate() {
                        *c = self.cdf(u, nodes[j]);
                    }
                });
                out
            }
        }
    }
}

/// Left-limit partials of M = min(u, v).
fn m_partials(u: f64, v: f64) -> (f64, f64) {
    (if u <= v { 1.0 } else { 0.0 }, if v <= u { 1.0 } else { 0.0 })
}

/// Left-limit partials of W = max(u + v − 1, 0).
fn w_partials(u: f64, v: f64) -> (f64, f64) {
    let d = if u + v > 1.0 { 1.0 } else { 0.0 };
    (d, d)
}

fn marshall_olkin_draw<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> (f64, f64) {
    // shocks with unit common rate: α = 1/(1 + λ₁), β = 1/(1 + λ₂)
    let l1 = 1.0 / a - 1.0;
    let l2 = 1.0 / b - 1.0;
    let z12: f64 = Exp1.sample(rng);
    let e1: f64 = Exp1.sample(rng);
    let e2: f64 = Exp1.sample(rng);
    let (z1, z2) = (e1 / l1, e2 / l2);
    let x = z1.min(z12);
    let y = z2.min(z12);
    ((-(l1 + 1.0) * x).exp(), (-(l2 + 1.0) * y).exp())
}

// ---------------------------------------------------------------------------
// elliptical copulas

/// P(Y ≤ y | X = x) for the bivariate t with correlation ρ.
#[inline]
fn t_conditional(x: f64, y: f64, rho: f64, nu: f64) -> f64 {
    let s = ((nu + x * x) * (1.0 - rho * rho) / (nu + 1.0)).sqrt();
    t_cdf((y - rho * x) / s, nu + 1.0)
}

fn t_copula_ln_density(x: f64, y: f64, rho: f64, nu: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let r2 = 1.0 - rho * rho;
    let q = (x * x - 2.0 * rho * x * y + y * y) / (nu * r2);
    let ln_joint = ln_gamma(0.5 * (nu + 2.0)) - ln_gamma(0.5 * nu) - (nu * PI).ln() - 0.5 * r2.ln()
        - 0.5 * (nu + 2.0) * q.ln_1p();
    let ln_marg = |z: f64| t_ln_norm(nu) - 0.5 * (nu + 1.0) * (z * z / nu).ln_1p();
    ln_joint - ln_marg(x) - ln_marg(y)
}

/// Φ₂(Φ⁻¹(u), Φ⁻¹(v); ρ) via Φ(x)Φ(y) + (2π)⁻¹ ∫₀^{asin ρ} exp(−(x²+y²−2xy sin θ)/(2cos²θ)) dθ.
fn gaussian_cdf(u: f64, v: f64, rho: f64) -> f64 {
    let x = normal_quantile_unchecked(u);
    let y = normal_quantile_unchecked(v);
    let amax = rho.asin();
    let f = |th: f64| {
        let (s, c) = th.sin_cos();
        (-(x * x + y * y - 2.0 * x * y * s) / (2.0 * c * c)).exp()
    };
    let tol = 1e-14 * u.min(v).max(1e-300);
    let val = u * v + integrate_adaptive(f, 0.0, amax, tol * 2.0 * PI) / (2.0 * PI);
    val.clamp((u + v - 1.0).max(0.0), u.min(v))
}

/// C(u,v) = ∫₀^u ∂C/∂u(s, v) ds for the t copula, with the lower tail of
/// the integral taken in ln s.
fn t_copula_cdf(u: f64, v: f64, rho: f64, nu: f64) -> f64 {
    let y = t_quantile(v, nu);
    let h = |s: f64| {
        if s <= 0.0 {
            return 0.0;
        }
        t_conditional(t_quantile(s.min(1.0 - 1e-16), nu), y, rho, nu)
    };
    let tol = 1e-13 * u.min(v);
    let split = (0.5 * u).min(1e-3);
    // ∫₀^split h(s) ds = split ∫₀^∞ h(split e^{−r}) e^{−r} dr
    let tail = split * integrate_adaptive(|r| h(split * (-r).exp()) * (-r).exp(), 0.0, 45.0, tol / split);
    let body = integrate_adaptive(h, split, u, tol);
    (tail + body).clamp((u + v - 1.0).max(0.0), u.min(v))
}

#[derive(Clone, Copy)]
enum Elliptical {
    Gauss { rho: f64 },
    T { rho: f64, nu: f64 },
}

impl Elliptical {
    fn quantile(self, p: f64) -> f64 {
        match self {
            Elliptical::Gauss { .. } => normal_quantile_unchecked(p),
            Elliptical::T { nu, .. } => t_quantile(p, nu),
        }
    }

    /// ∂C/∂u at marginal quantile x for the column with quantile y.
    #[inline]
    fn conditional(self, x: f64, y: f64) -> f64 {
        match self {
            Elliptical::Gauss { rho } => normal_cdf((y - rho * x) / (1.0 - rho * rho).sqrt()),
            Elliptical::T { rho, nu } => t_conditional(x, y, rho, nu),
        }
    }
}

/// Bulk evaluation of exchangeable elliptical copulas: each column is the
/// running integral of ∂C/∂u along u, computed for the upper triangle and
/// mirrored.
fn elliptical_grid(nodes: &[f64], e: Elliptical) -> Vec<f64> {
    let n = nodes.len();
    const M: usize = 6;
    let gl = GaussLegendre::new(M);
    // quadrature points for the first panel [0, g₀] in r = ln(g₀/s)
    let g0 = nodes[0];
    let tail_gl = GaussLegendre::new(8);
    let mut tail_pts: Vec<(f64, f64)> = Vec::new();
    let edges = [0.0, 1.0, 2.5, 4.5, 7.0, 10.0, 14.0, 19.0, 25.0, 33.0, 45.0];
    for w in edges.windows(2) {
        for (r, wr) in tail_gl.points(w[0], w[1]) {
            let s = g0 * (-r).exp();
            tail_pts.push((e.quantile(s), wr * s));
        }
    }
    // panel points between consecutive nodes
    let mut panel_pts: Vec<[(f64, f64); M]> = Vec::with_capacity(n);
    for k in 1..n {
        let mut arr = [(0.0, 0.0); M];
        for (slot, (s, w)) in arr.iter_mut().zip(gl.points(nodes[k - 1], nodes[k])) {
            *slot = (e.quantile(s), w);
        }
        panel_pts.push(arr);
    }
    let q: Vec<f64> = nodes.iter().map(|&p| e.quantile(p)).collect();

    // column j holds C(nodes[i], nodes[j]) for i ≤ j
    let cols: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let y = q[j];
            let mut col = Vec::with_capacity(j + 1);
            let mut acc: f64 = tail_pts.iter().map(|&(x, w)| w * e.conditional(x, y)).sum();
            col.push(acc);
            for panel in panel_pts.iter().take(j) {
                acc += panel.iter().map(|&(x, w)| w * e.conditional(x, y)).sum::<f64>();
                col.push(acc);
            }
            col
        })
        .collect();
    let mut out = vec![0.0; n * n];
    for (j, col) in cols.iter().enumerate() {
        for (i, &c) in col.iter().enumerate() {
            let (u, v) = (nodes[i], nodes[j]);
            let c = c.clamp((u + v - 1.0).max(0.0), u.min(v));
            out[i * n + j] = c;
            out[j * n + i] = c;
        }
    }
    out
}

// free-function forms of the operations

/// (e^{−θ} − 1) + (e^{−θu} − 1)(e^{−θv} − 1). The expanded four-term form
/// avoids the cancellation of the factored one when both factors are near −1.
fn frank_denominator(theta: f64, u: f64, v: f64) -> f64 {
    let eu = (-theta * u).exp_m1();
    let ev = (-theta * v).exp_m1();
    if theta > 0.0 && eu * ev > 0.25 {
        (-theta).exp() - (-theta * u).exp() - (-theta * v).exp() + (-theta * (u + v)).exp()
    } else {
        (-theta).exp_m1() + eu * ev
    }
}

pub fn copula_cdf(spec: &CopulaSpec, p: UnitSquarePoint) -> f64 {
    spec.cdf(p.u, p.v)
}

pub fn copula_partials(spec: &CopulaSpec, p: UnitSquarePoint) -> Partials {
    spec.partials(p.u, p.v)
}

pub fn copula_density(spec: &CopulaSpec, p: UnitSquarePoint) -> Result<f64> {
    spec.density(p.u, p.v)
}

pub fn copula_sample(spec: &CopulaSpec, n: usize, stream: &RngStream) -> Vec<UnitSquarePoint> {
    spec.sample(n, stream)
}

pub fn analytic_tau(spec: &CopulaSpec) -> Option<f64> {
    spec.analytic_tau()
}
