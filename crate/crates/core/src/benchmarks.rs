//! Published reference values used by `surfdep table` to self-report
//! deviations and by the regression tests. Values are as printed (two
//! decimals unless stated); column order of the four-surface blocks is
//! lower X|Y, lower Y|X, upper X|Y, upper Y|X.

use crate::copulas::{CopulaSpec, Family, Result as CopulaResult};
use crate::ghdist::{gh_params, GHParams};

/// Fixture revision; bump when any value below changes.
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy)]
pub struct FamilyRow {
    pub family: &'static str,
    pub params: &'static [f64],
    /// four-surface block
    pub values: [f64; 4],
}

impl FamilyRow {
    pub fn spec(&self) -> CopulaResult<CopulaSpec> {
        CopulaSpec::from_params(Family::parse(self.family)?, self.params)
    }

    pub fn label(&self) -> String {
        let p: Vec<String> = self.params.iter().map(|x| x.to_string()).collect();
        format!("{}({})", self.family, p.join(","))
    }
}

/// κ per surface plus τ and ρ.
#[derive(Debug, Clone, Copy)]
pub struct ConcordanceRow {
    pub family: &'static str,
    pub params: &'static [f64],
    pub kappa: [f64; 4],
    pub tau: f64,
    pub rho: f64,
}

impl ConcordanceRow {
    pub fn spec(&self) -> CopulaResult<CopulaSpec> {
        CopulaSpec::from_params(Family::parse(self.family)?, self.params)
    }
}

macro_rules! kr {
    ($f:expr, [$($p:expr),*], $a:expr, $b:expr, $c:expr, $d:expr, $t:expr, $r:expr) => {
        ConcordanceRow { family: $f, params: &[$($p),*], kappa: [$a, $b, $c, $d], tau: $t, rho: $r }
    };
}

macro_rules! fr {
    ($f:expr, [$($p:expr),*], $a:expr, $b:expr, $c:expr, $d:expr) => {
        FamilyRow { family: $f, params: &[$($p),*], values: [$a, $b, $c, $d] }
    };
}

/// κ, τ, ρ for the closed-form families.
pub const CONCORDANCE: [ConcordanceRow; 36] = [
    kr!("frechet", [0.3, 0.7], -0.40, -0.40, -0.40, -0.40, -0.39, -0.41),
    kr!("frechet", [0.5, 0.5], 0.0, 0.0, 0.0, 0.0, 0.0, 0.01),
    kr!("frechet", [0.7, 0.3], 0.40, 0.40, 0.40, 0.40, 0.40, 0.39),
    kr!("gumbel", [4.0], 0.84, 0.84, 0.91, 0.91, 0.75, 0.90),
    kr!("gumbel", [6.0], 0.91, 0.91, 0.96, 0.96, 0.83, 0.95),
    kr!("gumbel", [10.0], 0.96, 0.96, 0.99, 0.99, 0.90, 0.97),
    kr!("clayton", [1.0], 0.55, 0.55, 0.36, 0.36, 0.34, 0.47),
    kr!("clayton", [2.0], 0.75, 0.75, 0.53, 0.53, 0.50, 0.67),
    kr!("clayton", [5.0], 0.92, 0.92, 0.73, 0.73, 0.72, 0.87),
    kr!("clayton", [10.0], 0.97, 0.97, 0.84, 0.84, 0.83, 0.95),
    kr!("clayton", [30.0], 1.0, 1.0, 0.94, 0.94, 0.94, 0.98),
    kr!("frank", [1.5], 0.20, 0.20, 0.20, 0.20, 0.17, 0.23),
    kr!("frank", [5.0], 0.55, 0.55, 0.55, 0.55, 0.46, 0.63),
    kr!("frank", [15.0], 0.84, 0.84, 0.84, 0.84, 0.76, 0.92),
    kr!("amh", [0.5], 0.17, 0.17, 0.15, 0.15, 0.13, 0.18),
    kr!("amh", [1.0], 0.55, 0.55, 0.36, 0.36, 0.34, 0.47),
    kr!("mardia", [-0.9], -0.71, -0.71, -0.71, -0.71, -0.68, -0.74),
    kr!("mardia", [0.9], 0.71, 0.71, 0.71, 0.71, 0.68, 0.72),
    kr!("cuadras_auge", [0.5], 0.35, 0.35, 0.41, 0.41, 0.34, 0.42),
    kr!("cuadras_auge", [0.8], 0.67, 0.67, 0.74, 0.74, 0.67, 0.74),
    kr!("gaussian", [0.5], 0.44, 0.44, 0.44, 0.44, 0.33, 0.47),
    kr!("gaussian", [0.7], 0.62, 0.62, 0.62, 0.62, 0.49, 0.67),
    kr!("gaussian", [0.9], 0.85, 0.85, 0.85, 0.85, 0.71, 0.88),
    kr!("gaussian", [0.95], 0.92, 0.92, 0.92, 0.92, 0.80, 0.93),
    kr!("marshall_olkin", [0.5, 0.5], 0.35, 0.35, 0.41, 0.41, 0.34, 0.42),
    kr!("marshall_olkin", [0.6, 0.1], 0.13, 0.09, 0.12, 0.15, 0.10, 0.12),
    kr!("marshall_olkin", [0.7, 0.9], 0.68, 0.62, 0.71, 0.76, 0.65, 0.72),
    kr!("t", [0.5, 4.0], 0.42, 0.42, 0.42, 0.42, 0.33, 0.46),
    kr!("t", [0.9, 4.0], 0.85, 0.85, 0.85, 0.85, 0.71, 0.87),
    kr!("t", [0.95, 4.0], 0.92, 0.92, 0.92, 0.92, 0.80, 0.93),
    kr!("t", [0.5, 2.0], 0.42, 0.42, 0.42, 0.42, 0.33, 0.44),
    kr!("t", [0.9, 2.0], 0.85, 0.85, 0.85, 0.85, 0.71, 0.86),
    kr!("t", [0.95, 2.0], 0.92, 0.92, 0.92, 0.92, 0.80, 0.92),
    kr!("t", [0.5, 1.0], 0.41, 0.41, 0.41, 0.41, 0.34, 0.42),
    kr!("t", [0.9, 1.0], 0.83, 0.83, 0.83, 0.83, 0.71, 0.83),
    kr!("t", [0.95, 1.0], 0.90, 0.90, 0.90, 0.90, 0.80, 0.90),
];

/// Λ at p = 1 for the closed-form families.
pub const LAMBDA_P1: [FamilyRow; 31] = [
    fr!("frechet", [0.3, 0.7], 0.03, 0.03, 0.03, 0.03),
    fr!("frechet", [0.5, 0.5], 0.13, 0.13, 0.13, 0.13),
    fr!("frechet", [0.7, 0.3], 0.34, 0.34, 0.34, 0.34),
    fr!("gumbel", [1.5], 0.0, 0.0, 0.09, 0.09),
    fr!("gumbel", [4.0], 0.07, 0.07, 0.48, 0.48),
    fr!("gumbel", [6.0], 0.15, 0.15, 0.62, 0.62),
    fr!("gumbel", [10.0], 0.29, 0.29, 0.77, 0.77),
    fr!("clayton", [1.0], 0.14, 0.14, 0.0, 0.0),
    fr!("clayton", [2.0], 0.32, 0.32, 0.0, 0.0),
    fr!("clayton", [5.0], 0.61, 0.61, 0.0, 0.0),
    fr!("clayton", [10.0], 0.78, 0.78, 0.01, 0.01),
    fr!("clayton", [30.0], 0.92, 0.92, 0.02, 0.02),
    fr!("frank", [5.0], 0.0, 0.0, 0.0, 0.0),
    fr!("frank", [15.0], 0.01, 0.01, 0.01, 0.01),
    fr!("cuadras_auge", [0.2], 0.0, 0.0, 0.01, 0.01),
    fr!("cuadras_auge", [0.5], 0.0, 0.0, 0.13, 0.13),
    fr!("cuadras_auge", [0.8], 0.04, 0.04, 0.51, 0.51),
    fr!("marshall_olkin", [0.1, 0.6], 0.0, 0.0, 0.17, 0.0),
    fr!("marshall_olkin", [0.5, 0.5], 0.0, 0.0, 0.13, 0.13),
    fr!("marshall_olkin", [0.6, 0.1], 0.0, 0.0, 0.0, 0.17),
    fr!("marshall_olkin", [0.7, 0.9], 0.01, 0.15, 0.65, 0.30),
    fr!("gaussian", [0.7], 0.04, 0.04, 0.04, 0.04),
    fr!("gaussian", [0.9], 0.15, 0.15, 0.15, 0.15),
    fr!("gaussian", [0.95], 0.25, 0.25, 0.25, 0.25),
    fr!("gaussian", [0.99], 0.53, 0.53, 0.53, 0.53),
    fr!("t", [0.5, 2.0], 0.07, 0.07, 0.07, 0.07),
    fr!("t", [0.9, 2.0], 0.33, 0.33, 0.33, 0.33),
    fr!("t", [0.95, 2.0], 0.46, 0.46, 0.46, 0.46),
    fr!("t", [0.5, 1.0], 0.11, 0.11, 0.11, 0.11),
    fr!("t", [0.9, 1.0], 0.42, 0.42, 0.42, 0.42),
    fr!("t", [0.95, 1.0], 0.54, 0.54, 0.54, 0.54),
];

/// Λ at p = 0.7, same rows as [`LAMBDA_P1`].
pub const LAMBDA_P07: [FamilyRow; 31] = [
    fr!("frechet", [0.3, 0.7], 0.06, 0.06, 0.06, 0.06),
    fr!("frechet", [0.5, 0.5], 0.19, 0.19, 0.19, 0.19),
    fr!("frechet", [0.7, 0.3], 0.43, 0.43, 0.43, 0.43),
    fr!("gumbel", [1.5], 0.05, 0.05, 0.21, 0.21),
    fr!("gumbel", [4.0], 0.22, 0.22, 0.60, 0.60),
    fr!("gumbel", [6.0], 0.33, 0.33, 0.72, 0.72),
    fr!("gumbel", [10.0], 0.48, 0.48, 0.83, 0.83),
    fr!("clayton", [1.0], 0.27, 0.27, 0.02, 0.02),
    fr!("clayton", [2.0], 0.44, 0.44, 0.04, 0.04),
    fr!("clayton", [5.0], 0.69, 0.69, 0.06, 0.06),
    fr!("clayton", [10.0], 0.83, 0.83, 0.09, 0.09),
    fr!("clayton", [30.0], 0.94, 0.94, 0.17, 0.17),
    fr!("frank", [5.0], 0.05, 0.05, 0.05, 0.05),
    fr!("frank", [15.0], 0.10, 0.10, 0.10, 0.10),
    fr!("cuadras_auge", [0.2], 0.01, 0.01, 0.04, 0.04),
    fr!("cuadras_auge", [0.5], 0.03, 0.03, 0.21, 0.21),
    fr!("cuadras_auge", [0.8], 0.16, 0.16, 0.59, 0.59),
    fr!("marshall_olkin", [0.1, 0.6], 0.0, 0.04, 0.29, 0.01),
    fr!("marshall_olkin", [0.5, 0.5], 0.03, 0.03, 0.21, 0.21),
    fr!("marshall_olkin", [0.6, 0.1], 0.04, 0.0, 0.01, 0.29),
    fr!("marshall_olkin", [0.7, 0.9], 0.08, 0.31, 0.73, 0.43),
    fr!("gaussian", [0.7], 0.15, 0.15, 0.15, 0.15),
    fr!("gaussian", [0.9], 0.32, 0.32, 0.32, 0.32),
    fr!("gaussian", [0.95], 0.43, 0.43, 0.43, 0.43),
    fr!("gaussian", [0.99], 0.68, 0.68, 0.68, 0.68),
    fr!("t", [0.5, 2.0], 0.16, 0.16, 0.16, 0.16),
    fr!("t", [0.9, 2.0], 0.46, 0.46, 0.46, 0.46),
    fr!("t", [0.95, 2.0], 0.58, 0.58, 0.58, 0.58),
    fr!("t", [0.5, 1.0], 0.20, 0.20, 0.20, 0.20),
    fr!("t", [0.9, 1.0], 0.53, 0.53, 0.53, 0.53),
    fr!("t", [0.95, 1.0], 0.64, 0.64, 0.64, 0.64),
];

/// Printed strong tail coefficient accompanying each Λ row (the nonzero
/// side; `None` where no value is printed).
pub const STRONG_TDC: [Option<f64>; 31] = [
    Some(0.3),
    Some(0.5),
    Some(0.7),
    Some(0.41),
    Some(0.81),
    Some(0.88),
    Some(0.93),
    Some(0.50),
    Some(0.71),
    Some(0.87),
    Some(0.93),
    Some(0.98),
    None,
    None,
    Some(0.2),
    Some(0.5),
    Some(0.8),
    Some(0.10),
    Some(0.5),
    Some(0.1),
    Some(0.7),
    None,
    None,
    None,
    None,
    Some(0.42),
    Some(0.73),
    Some(0.81),
    Some(0.56),
    Some(0.80),
    Some(0.86),
];

/// Generalized hyperbolic rows: name and parameters (μ = 0).
pub fn gh_rows() -> Vec<(&'static str, GHParams)> {
    let a = (2.29, 2.06, 2.29);
    let b = (1.77, 1.57, 1.96);
    let c = (3.43, 0.69, 0.43);
    let mk = |l: f64, al: f64, be: [f64; 2], de: f64, d: (f64, f64, f64)| {
        gh_params(l, al, be, de, d.0, d.1, d.2).expect("tabulated GH rows are admissible")
    };
    vec![
        ("GH1", mk(1.5, 1.1, [0.0, 0.0], 1.0, a)),
        ("GH2", mk(1.5, 0.8, [-0.4, 0.3], 1.0, a)),
        ("GH3", mk(1.0, 1.3, [0.0, 0.0], 1.0, b)),
        ("GH4", mk(1.0, 1.3, [-0.4, -0.3], 1.0, c)),
        ("NIG1", mk(-0.5, 1.2, [0.0, 0.0], 1.0, b)),
        ("NIG2", mk(-0.5, 1.2, [-0.4, -0.3], 1.0, b)),
        ("NIG3", mk(-0.5, 1.2, [-0.4, -0.3], 1.0, c)),
        ("NIG4", mk(-0.5, 1.2, [-0.4, 0.3], 1.0, c)),
        ("VG1", mk(0.8, 1.3, [0.0, 0.0], 0.0, b)),
        ("VG2", mk(0.8, 1.3, [-0.4, -0.3], 0.0, b)),
        ("VG3", mk(0.5, 1.1, [-0.4, -0.3], 0.0, b)),
        ("VG4", mk(0.5, 1.1, [-0.4, -0.3], 0.0, c)),
    ]
}

/// κ (four surfaces), τ, ρ for the GH rows, in [`gh_rows`] order.
pub const GH_CONCORDANCE: [([f64; 4], f64, f64); 12] = [
    ([0.85, 0.85, 0.85, 0.85], 0.71, 0.87),
    ([0.85, 0.86, 0.83, 0.82], 0.70, 0.86),
    ([0.78, 0.78, 0.78, 0.78], 0.64, 0.81),
    ([0.71, 0.71, 0.59, 0.58], 0.53, 0.70),
    ([0.78, 0.78, 0.78, 0.78], 0.64, 0.81),
    ([0.89, 0.89, 0.80, 0.80], 0.71, 0.87),
    ([0.67, 0.67, 0.53, 0.52], 0.47, 0.63),
    ([0.55, 0.54, 0.45, 0.47], 0.39, 0.53),
    ([0.78, 0.78, 0.78, 0.78], 0.64, 0.80),
    ([0.91, 0.91, 0.82, 0.82], 0.76, 0.90),
    ([0.94, 0.94, 0.84, 0.84], 0.80, 0.92),
    ([0.77, 0.79, 0.59, 0.55], 0.58, 0.74),
];

/// Λ for the GH rows: (p = 1 block, p = 0.7 block).
pub const GH_LAMBDA: [([f64; 4], [f64; 4]); 12] = [
    ([0.19, 0.19, 0.19, 0.19], [0.36, 0.36, 0.36, 0.36]),
    ([0.23, 0.19, 0.13, 0.19], [0.40, 0.35, 0.29, 0.35]),
    ([0.13, 0.13, 0.13, 0.13], [0.28, 0.28, 0.28, 0.28]),
    ([0.12, 0.10, 0.01, 0.02], [0.27, 0.25, 0.06, 0.10]),
    ([0.14, 0.14, 0.14, 0.14], [0.30, 0.30, 0.30, 0.30]),
    ([0.37, 0.36, 0.09, 0.09], [0.52, 0.51, 0.23, 0.24]),
    ([0.16, 0.13, 0.01, 0.02], [0.30, 0.27, 0.06, 0.10]),
    ([0.09, 0.05, 0.01, 0.03], [0.23, 0.15, 0.05, 0.13]),
    ([0.14, 0.14, 0.14, 0.18], [0.30, 0.30, 0.30, 0.32]),
    ([0.33, 0.33, 0.09, 0.09], [0.50, 0.50, 0.24, 0.25]),
    ([0.42, 0.38, 0.09, 0.11], [0.58, 0.56, 0.24, 0.26]),
    ([0.11, 0.15, 0.01, 0.01], [0.28, 0.32, 0.06, 0.09]),
];

/// Monte Carlo study row: mean and standard deviation of an estimated Λ.
#[derive(Debug, Clone, Copy)]
pub struct SimulationRow {
    pub model: &'static str,
    /// surface as printed
    pub surface: usize,
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub mse: Option<f64>,
}

/// Λ(0.7) sampling study (1000 replicates as printed). Surface index follows
/// the four-surface block order. The GH₂ rows are stored under the labels as
/// printed, which are transposed relative to the Λ table (see
/// `SIMULATION_GH2_LABELS_SWAPPED`).
pub const SIMULATION: [SimulationRow; 16] = [
    SimulationRow { model: "gumbel10", surface: 0, n: 500, mean: 0.484, std_dev: 0.011, mse: Some(1.241e-4) },
    SimulationRow { model: "gumbel10", surface: 0, n: 1000, mean: 0.483, std_dev: 0.008, mse: Some(6.443e-5) },
    SimulationRow { model: "gumbel10", surface: 2, n: 500, mean: 0.828, std_dev: 0.0064, mse: Some(4.157e-4) },
    SimulationRow { model: "gumbel10", surface: 2, n: 1000, mean: 0.827, std_dev: 0.0046, mse: Some(2.125e-5) },
    SimulationRow { model: "gh2", surface: 1, n: 500, mean: 0.372, std_dev: 0.018, mse: None },
    SimulationRow { model: "gh2", surface: 0, n: 500, mean: 0.346, std_dev: 0.017, mse: None },
    SimulationRow { model: "gh2", surface: 3, n: 500, mean: 0.313, std_dev: 0.019, mse: None },
    SimulationRow { model: "gh2", surface: 2, n: 500, mean: 0.3451, std_dev: 0.016, mse: None },
    SimulationRow { model: "gh2", surface: 1, n: 1000, mean: 0.392, std_dev: 0.012, mse: None },
    SimulationRow { model: "gh2", surface: 0, n: 1000, mean: 0.351, std_dev: 0.011, mse: None },
    SimulationRow { model: "gh2", surface: 3, n: 1000, mean: 0.301, std_dev: 0.011, mse: None },
    SimulationRow { model: "gh2", surface: 2, n: 1000, mean: 0.348, std_dev: 0.013, mse: None },
    SimulationRow { model: "t0.8_3", surface: 0, n: 500, mean: 0.2994, std_dev: 0.0158, mse: None },
    SimulationRow { model: "t0.8_3", surface: 2, n: 500, mean: 0.2994, std_dev: 0.0157, mse: None },
    SimulationRow { model: "t0.8_3", surface: 0, n: 1000, mean: 0.3002, std_dev: 0.0119, mse: None },
    SimulationRow { model: "t0.8_3", surface: 2, n: 1000, mean: 0.3004, std_dev: 0.0119, mse: None },
];

pub const SIMULATION_GH2_LABELS_SWAPPED: bool = true;

/// Focus parameter of the sampling study.
pub const SIMULATION_P: f64 = 0.7;
