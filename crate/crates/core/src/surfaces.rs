//! The four conditional cumulative-probability surfaces Ψ, their reference
//! planes 𝕀/𝕄/𝕎, fused value+gradient evaluation and the L operator.

use crate::copulas::{CopulaSpec, Family, UnitSquarePoint};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurfaceError {
    #[error("{sel}: conditioning coordinate {coord} = {value} is on the singular boundary of the surface")]
    SingularBoundary { sel: SurfaceSelector, coord: &'static str, value: f64 },
    #[error("surface grid needs at least 2 nodes per axis, got {0}")]
    Grid(usize),
    #[error(transparent)]
    Io(#[from] IoMessage),
}

/// io::Error is not Clone; keep its message.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct IoMessage(pub String);

impl From<std::io::Error> for SurfaceError {
    fn from(e: std::io::Error) -> Self {
        SurfaceError::Io(IoMessage(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// X given Y: conditions on the v coordinate
    #[serde(rename = "x|y")]
    XgivenY,
    /// Y given X: conditions on the u coordinate
    #[serde(rename = "y|x")]
    YgivenX,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SurfaceSelector {
    pub side: Side,
    pub direction: Direction,
}

impl SurfaceSelector {
    pub const LOWER_X_GIVEN_Y: Self = Self { side: Side::Lower, direction: Direction::XgivenY };
    pub const LOWER_Y_GIVEN_X: Self = Self { side: Side::Lower, direction: Direction::YgivenX };
    pub const UPPER_X_GIVEN_Y: Self = Self { side: Side::Upper, direction: Direction::XgivenY };
    pub const UPPER_Y_GIVEN_X: Self = Self { side: Side::Upper, direction: Direction::YgivenX };
    pub const ALL: [Self; 4] = [Self::LOWER_X_GIVEN_Y, Self::LOWER_Y_GIVEN_X, Self::UPPER_X_GIVEN_Y, Self::UPPER_Y_GIVEN_X];

    pub fn new(side: Side, direction: Direction) -> Self {
        Self { side, direction }
    }

    pub fn side_name(&self) -> &'static str {
        match self.side {
            Side::Lower => "lower",
            Side::Upper => "upper",
        }
    }

    pub fn direction_name(&self) -> &'static str {
        match self.direction {
            Direction::XgivenY => "x|y",
            Direction::YgivenX => "y|x",
        }
    }

    /// Parses `lower`/`upper` and `x|y`/`y|x` (also `xy`/`yx`).
    pub fn parse(side: &str, direction: &str) -> Option<Self> {
        let side = match side.to_ascii_lowercase().as_str() {
            "lower" | "l" => Side::Lower,
            "upper" | "u" => Side::Upper,
            _ => return None,
        };
        let direction = match direction.to_ascii_lowercase().replace(['|', '_', ' '], "").as_str() {
            "xy" | "xgiveny" => Direction::XgivenY,
            "yx" | "ygivenx" => Direction::YgivenX,
            _ => return None,
        };
        Some(Self { side, direction })
    }

    fn check(&self, p: UnitSquarePoint) -> Result<(), SurfaceError> {
        let (coord, value) = match self.direction {
            Direction::XgivenY => ("v", p.v),
            Direction::YgivenX => ("u", p.u),
        };
        let bad = match self.side {
            Side::Lower => value <= 0.0,
            Side::Upper => value >= 1.0,
        };
        if bad {
            Err(SurfaceError::SingularBoundary { sel: *self, coord, value })
        } else {
            Ok(())
        }
    }

    /// Ψ and its gradient from C and its partials at (u, v).
    #[inline]
    pub fn transform(&self, u: f64, v: f64, c: f64, cu: f64, cv: f64) -> (f64, f64, f64) {
        match (self.side, self.direction) {
            (Side::Lower, Direction::XgivenY) => (c / v, cu / v, cv / v - c / (v * v)),
            (Side::Lower, Direction::YgivenX) => (c / u, cu / u - c / (u * u), cv / u),
            (Side::Upper, Direction::XgivenY) => {
                let s = 1.0 - u - v + c;
                let w = 1.0 - v;
                (s / w, (cu - 1.0) / w, (cv - 1.0) / w + s / (w * w))
            }
            (Side::Upper, Direction::YgivenX) => {
                let s = 1.0 - u - v + c;
                let w = 1.0 - u;
                (s / w, (cu - 1.0) / w + s / (w * w), (cv - 1.0) / w)
            }
        }
    }

    /// Ψ value only.
    #[inline]
    pub fn value(&self, u: f64, v: f64, c: f64) -> f64 {
        match (self.side, self.direction) {
            (Side::Lower, Direction::XgivenY) => c / v,
            (Side::Lower, Direction::YgivenX) => c / u,
            (Side::Upper, Direction::XgivenY) => (1.0 - u - v + c) / (1.0 - v),
            (Side::Upper, Direction::YgivenX) => (1.0 - u - v + c) / (1.0 - u),
        }
    }

    /// The independence plane 𝕀 for this surface.
    #[inline]
    pub fn independence(&self, u: f64, v: f64) -> f64 {
        match (self.side, self.direction) {
            (Side::Lower, Direction::XgivenY) => u,
            (Side::Lower, Direction::YgivenX) => v,
            (Side::Upper, Direction::XgivenY) => 1.0 - u,
            (Side::Upper, Direction::YgivenX) => 1.0 - v,
        }
    }
}

impl fmt::Display for SurfaceSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.side_name(), self.direction_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceValue {
    pub value: f64,
    pub grad_u: f64,
    pub grad_v: f64,
    pub analytic_grad: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Reference {
    /// independence plane
    I,
    /// comonotone upper bound
    M,
    /// countermonotone lower bound
    W,
}

impl Reference {
    pub fn copula(self) -> CopulaSpec {
        match self {
            Reference::I => CopulaSpec::independence(),
            Reference::M => CopulaSpec::comonotone(),
            Reference::W => CopulaSpec::countermonotone(),
        }
    }
}

pub fn psi(spec: &CopulaSpec, sel: SurfaceSelector, p: UnitSquarePoint) -> Result<SurfaceValue, SurfaceError> {
    sel.check(p)?;
    if spec.family() == Family::Independence {
        // exact planes; the quotient form leaves rounding in the gradients
        let (gu, gv) = match (sel.side, sel.direction) {
            (Side::Lower, Direction::XgivenY) => (1.0, 0.0),
            (Side::Lower, Direction::YgivenX) => (0.0, 1.0),
            (Side::Upper, Direction::XgivenY) => (-1.0, 0.0),
            (Side::Upper, Direction::YgivenX) => (0.0, -1.0),
        };
        return Ok(SurfaceValue { value: sel.independence(p.u, p.v), grad_u: gu, grad_v: gv, analytic_grad: true });
    }
    let c = spec.cdf(p.u, p.v);
    let d = spec.partials(p.u, p.v);
    let (value, grad_u, grad_v) = sel.transform(p.u, p.v, c, d.du, d.dv);
    Ok(SurfaceValue { value: value.clamp(0.0, 1.0), grad_u, grad_v, analytic_grad: d.analytic })
}

/// Ψ of the reference copula; ridge gradients follow the left-limit rule.
pub fn reference_surface(kind: Reference, sel: SurfaceSelector, p: UnitSquarePoint) -> Result<SurfaceValue, SurfaceError> {
    psi(&kind.copula(), sel, p)
}

/// L = −min(∂Ψ/∂u · ∂Ψ/∂v, 0).
#[inline]
pub fn l_operator(sv: &SurfaceValue) -> f64 {
    l_of(sv.grad_u, sv.grad_v)
}

#[inline]
pub(crate) fn l_of(gu: f64, gv: f64) -> f64 {
    -(gu * gv).min(0.0)
}

/// Writes `u,v,value` rows of Ψ (minus a second copula's Ψ when given) on
/// the grid i/(n+1), i = 1..n, per axis.
pub fn write_surface_csv<W: Write>(
    mut out: W,
    spec: &CopulaSpec,
    minus: Option<&CopulaSpec>,
    sel: SurfaceSelector,
    n: usize,
) -> Result<(), SurfaceError> {
    if n < 2 {
        return Err(SurfaceError::Grid(n));
    }
    let nodes: Vec<f64> = (1..=n).map(|i| i as f64 / (n + 1) as f64).collect();
    let a = spec.cdf_grid(&nodes);
    let b = minus.map(|m| m.cdf_grid(&nodes));
    writeln!(out, "u,v,value")?;
    for (i, &u) in nodes.iter().enumerate() {
        for (j, &v) in nodes.iter().enumerate() {
            let mut z = sel.value(u, v, a[i * n + j]);
            if let Some(b) = &b {
                z -= sel.value(u, v, b[i * n + j]);
            }
            writeln!(out, "{u},{v},{z}")?;
        }
    }
    Ok(())
}
