//! Special functions, sampling primitives, root finding and derivative-free
//! optimization shared by the rest of the crate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::{beta, erf, gamma};
use std::f64::consts::{PI, SQRT_2};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("non-finite objective at starting point")]
    NonFiniteStart,
    #[error("no sign change on [{a}, {b}]: f(a)={fa}, f(b)={fb}")]
    NoBracket { a: f64, b: f64, fa: f64, fb: f64 },
}

pub type Result<T> = std::result::Result<T, NumericsError>;

// ---------------------------------------------------------------------------
// Bessel K

/// Taylor coefficients of 1/Γ(z) about 0 (c_1 .. c_26).
const RGAMMA: [f64; 26] = [
    1.0,
    0.577_215_664_901_532_9,
    -0.655_878_071_520_253_8,
    -0.042_002_635_034_095_2,
    0.166_538_611_382_291_5,
    -0.042_197_734_555_544_3,
    -0.009_621_971_527_877_0,
    0.007_218_943_246_663_0,
    -0.001_165_167_591_859_1,
    -0.000_215_241_674_114_9,
    0.000_128_050_282_388_2,
    -0.000_020_134_854_780_7,
    -0.000_001_250_493_482_1,
    0.000_001_133_027_232_0,
    -0.000_000_205_633_841_7,
    0.000_000_006_116_095_0,
    0.000_000_005_002_007_5,
    -0.000_000_001_181_274_6,
    0.000_000_000_104_342_7,
    0.000_000_000_007_782_3,
    -0.000_000_000_003_696_8,
    0.000_000_000_000_510_0,
    -0.000_000_000_000_020_6,
    -0.000_000_000_000_005_4,
    0.000_000_000_000_001_4,
    0.000_000_000_000_000_1,
];

/// Returns (γ₁, γ₂, 1/Γ(1+x), 1/Γ(1−x)) for |x| ≤ 1/2, where
/// γ₁ = (1/Γ(1−x) − 1/Γ(1+x))/(2x) and γ₂ = (1/Γ(1−x) + 1/Γ(1+x))/2.
fn temme_gammas(x: f64) -> (f64, f64, f64, f64) {
    // 1/Γ(1+x) = Σ_{j≥0} c_{j+1} x^j; split into even and odd parts.
    let x2 = x * x;
    let mut even = 0.0;
    let mut odd = 0.0;
    let mut p = 1.0;
    let mut k = 0;
    while k + 1 < RGAMMA.len() {
        even += RGAMMA[k] * p;
        odd += RGAMMA[k + 1] * p;
        p *= x2;
        k += 2;
    }
    let gam1 = -odd;
    let gam2 = even;
    (gam1, gam2, gam2 - x * gam1, gam2 + x * gam1)
}

/// e^x·K_ν(x) and e^x·K_{ν+1}(x) for ν ≥ 0 (Temme series for x < 2,
/// Steed's continued fraction above, upward recurrence in the order).
pub(crate) fn bessel_k_scaled_pair(nu: f64, x: f64) -> (f64, f64) {
    const EPS: f64 = 1e-16;
    let nl = (nu + 0.5).floor();
    let xmu = nu - nl;
    let xmu2 = xmu * xmu;
    let xi = 1.0 / x;
    let xi2 = 2.0 * xi;
    let (mut rkmu, mut rk1);
    if x < 2.0 {
        let x2 = 0.5 * x;
        let pimu = PI * xmu;
        let fact = if pimu.abs() < EPS { 1.0 } else { pimu / pimu.sin() };
        let d = -x2.ln();
        let e = xmu * d;
        let fact2 = if e.abs() < EPS { 1.0 } else { e.sinh() / e };
        let (gam1, gam2, gampl, gammi) = temme_gammas(xmu);
        let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
        let mut sum = ff;
        let ee = e.exp();
        let mut p = 0.5 * ee / gampl;
        let mut q = 0.5 / (ee * gammi);
        let mut c = 1.0;
        let dd = x2 * x2;
        let mut sum1 = p;
        let mut i = 1.0;
        loop {
            ff = (i * ff + p + q) / (i * i - xmu2);
            c *= dd / i;
            p /= i - xmu;
            q /= i + xmu;
            let del = c * ff;
            sum += del;
            sum1 += c * (p - i * ff);
            if del.abs() < sum.abs() * EPS || i > 500.0 {
                break;
            }
            i += 1.0;
        }
        let ex = x.exp();
        rkmu = sum * ex;
        rk1 = sum1 * xi2 * ex;
    } else {
        let mut b = 2.0 * (1.0 + x);
        let mut d = 1.0 / b;
        let mut delh = d;
        let mut h = d;
        let mut q1 = 0.0;
        let mut q2 = 1.0;
        let a1 = 0.25 - xmu2;
        let mut c = a1;
        let mut q = c;
        let mut a = -a1;
        let mut s = 1.0 + q * delh;
        let mut i = 2.0;
        loop {
            a -= 2.0 * (i - 1.0);
            c = -a * c / i;
            let qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh = (b * d - 1.0) * delh;
            h += delh;
            let dels = q * delh;
            s += dels;
            if (dels / s).abs() < EPS || i > 50_000.0 {
                break;
            }
            i += 1.0;
        }
        h *= a1;
        rkmu = (PI / (2.0 * x)).sqrt() / s;
        rk1 = rkmu * (xmu + x + 0.5 - h) * xi;
    }
    let mut k = 1.0;
    while k <= nl {
        let t = (xmu + k) * xi2 * rk1 + rkmu;
        rkmu = rk1;
        rk1 = t;
        k += 1.0;
    }
    (rkmu, rk1)
}

/// Exponentially scaled modified Bessel function of the second kind,
/// e^x·K_ν(x).
pub fn bessel_k_scaled(nu: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(NumericsError::Domain(format!("bessel_k requires x > 0, got {x}")));
    }
    if !nu.is_finite() {
        return Err(NumericsError::Domain(format!("bessel_k requires finite order, got {nu}")));
    }
    let (k, _) = bessel_k_scaled_pair(nu.abs(), x);
    if !k.is_finite() {
        return Err(NumericsError::Overflow(format!("K_{nu}({x}) exceeds the double range")));
    }
    Ok(k)
}

/// Modified Bessel function of the second kind K_ν(x).
pub fn bessel_k(nu: f64, x: f64) -> Result<f64> {
    let ks = bessel_k_scaled(nu, x)?;
    let k = ks * (-x).exp();
    if k == 0.0 {
        return Err(NumericsError::Overflow(format!("K_{nu}({x}) underflows")));
    }
    Ok(k)
}

/// ln K_ν(x), usable where K_ν(x) itself underflows.
pub fn ln_bessel_k(nu: f64, x: f64) -> Result<f64> {
    Ok(bessel_k_scaled(nu, x)?.ln() - x)
}

// ---------------------------------------------------------------------------
// Normal and Student t

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(NumericsError::Domain(format!("normal quantile needs 0 < p < 1, got {p}")));
    }
    Ok(normal_quantile_unchecked(p))
}

pub(crate) fn normal_quantile_unchecked(p: f64) -> f64 {
    let mut x = -SQRT_2 * erf::erfc_inv(2.0 * p);
    // one Halley step against the complementary side that is better conditioned
    if x.is_finite() {
        let f = normal_pdf(x);
        if f > 0.0 {
            let e = if x < 0.0 { normal_cdf(x) - p } else { (1.0 - p) - normal_cdf(-x) };
            let r = e / f;
            x -= r / (1.0 + 0.5 * x * r);
        }
    }
    x
}

fn check_nu(nu: f64) -> Result<()> {
    if nu > 0.0 {
        Ok(())
    } else {
        Err(NumericsError::Domain(format!("degrees of freedom must be positive, got {nu}")))
    }
}

/// P(T_ν ≤ x).
pub fn student_t_cdf(x: f64, nu: f64) -> Result<f64> {
    check_nu(nu)?;
    Ok(t_cdf(x, nu))
}

pub(crate) fn t_cdf(x: f64, nu: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if nu.is_infinite() {
        return normal_cdf(x);
    }
    if x.is_infinite() {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    let x2 = x * x;
    // tail = P(T > |x|)
    let tail = if x2 < nu {
        // the small-argument form avoids 1 − ν/(ν+x²) cancellation
        0.5 - 0.5 * beta::beta_reg(0.5, 0.5 * nu, x2 / (nu + x2))
    } else {
        0.5 * beta::beta_reg(0.5 * nu, 0.5, nu / (nu + x2))
    };
    if x > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

pub(crate) fn t_ln_norm(nu: f64) -> f64 {
    gamma::ln_gamma(0.5 * (nu + 1.0)) - gamma::ln_gamma(0.5 * nu) - 0.5 * (nu * PI).ln()
}

pub fn student_t_pdf(x: f64, nu: f64) -> f64 {
    (t_ln_norm(nu) - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p()).exp()
}

/// Inverse of the Student t CDF.
pub fn student_t_quantile(p: f64, nu: f64) -> Result<f64> {
    check_nu(nu)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(NumericsError::Domain(format!("t quantile needs 0 < p < 1, got {p}")));
    }
    Ok(t_quantile(p, nu))
}

pub(crate) fn t_quantile(p: f64, nu: f64) -> f64 {
    if nu.is_infinite() {
        return normal_quantile_unchecked(p);
    }
    if p == 0.5 {
        return 0.0;
    }
    let lower = p < 0.5;
    let pt = if lower { p } else { 1.0 - p };
    // P(T < -t) = I_{ν/(ν+t²)}(ν/2, 1/2)/2
    let z = beta::inv_beta_reg(0.5 * nu, 0.5, 2.0 * pt);
    let mut t = if z > 0.0 { (nu * (1.0 - z) / z).sqrt() } else { f64::INFINITY };
    if !t.is_finite() || t.is_nan() {
        t = -normal_quantile_unchecked(pt);
    }
    // Newton on ln F(−t) = ln pt in ln t; the tail is close to a power law
    // there, so this converges from the rough incomplete-beta start
    let ln_norm = t_ln_norm(nu);
    let target = pt.ln();
    for _ in 0..60 {
        let f = t_cdf(-t, nu);
        if !(f > 0.0) {
            break;
        }
        let d = (ln_norm - 0.5 * (nu + 1.0) * (t * t / nu).ln_1p()).exp();
        let slope = -t * d / f;
        if !(slope < 0.0) {
            break;
        }
        let step = (f.ln() - target) / slope;
        let step = step.clamp(-2.0, 2.0);
        t *= (-step).exp();
        if step.abs() <= 1e-15 {
            break;
        }
    }
    if lower {
        -t
    } else {
        t
    }
}

// ---------------------------------------------------------------------------
// Random streams

/// Identifies a reproducible random stream: equal (seed, stream_id) pairs
/// replay identical sequences; distinct stream ids are independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Child stream for a replicate; keeps the seed, derives a fresh id.
    pub fn substream(&self, index: u64) -> Self {
        let mix = self
            .stream_id
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .rotate_left(17)
            ^ index.wrapping_add(1).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        Self { seed: self.seed, stream_id: mix }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream_id);
        r
    }
}

// ---------------------------------------------------------------------------
// GIG sampling

/// Sampler for GIG(λ, χ, ψ) with density ∝ x^{λ−1} exp(−(χ/x + ψx)/2).
#[derive(Debug, Clone, Copy)]
pub struct Gig {
    lambda: f64,
    chi: f64,
    psi: f64,
    kind: GigKind,
}

#[derive(Debug, Clone, Copy)]
enum GigKind {
    /// χ = 0: Gamma(λ, rate ψ/2)
    Gamma,
    /// ψ = 0: inverse Gamma(−λ, scale χ/2)
    InvGamma,
    /// ratio of uniforms with mode shift on the standardized law
    Rou(RouSetup),
}

#[derive(Debug, Clone, Copy)]
struct RouSetup {
    lam: f64, // |λ|
    omega: f64,
    eta: f64,
    invert: bool,
    mode: f64,
    um: f64,
    up: f64,
}

impl Gig {
    pub fn new(lambda: f64, chi: f64, psi: f64) -> Result<Self> {
        let bad = || NumericsError::Domain(format!("inadmissible GIG({lambda}, {chi}, {psi})"));
        if !(lambda.is_finite() && chi >= 0.0 && psi >= 0.0 && chi.is_finite() && psi.is_finite()) {
            return Err(bad());
        }
        let kind = if chi == 0.0 {
            if !(lambda > 0.0 && psi > 0.0) {
                return Err(bad());
            }
            GigKind::Gamma
        } else if psi == 0.0 {
            if !(lambda < 0.0) {
                return Err(bad());
            }
            GigKind::InvGamma
        } else {
            let omega = (chi * psi).sqrt();
            let eta = (chi / psi).sqrt();
            let lam = lambda.abs();
            let mode = if lam >= 1.0 {
                ((lam - 1.0) + ((lam - 1.0).powi(2) + omega * omega).sqrt()) / omega
            } else {
                omega / ((1.0 - lam) + ((1.0 - lam).powi(2) + omega * omega).sqrt())
            };
            // bounding rectangle from the roots of the cubic for the extrema of
            // (x − m)·sqrt(g(x)), written in depressed trigonometric form
            let a = -2.0 * (lam + 1.0) / omega - mode;
            let b = 2.0 * (lam - 1.0) * mode / omega - 1.0;
            let c = mode;
            let p = b - a * a / 3.0;
            let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
            let phi = (-q / 2.0 * (-27.0 / (p * p * p)).sqrt()).clamp(-1.0, 1.0).acos();
            let r = (-4.0 * p / 3.0).sqrt();
            let xm = r * (phi / 3.0 + 4.0 * PI / 3.0).cos() - a / 3.0;
            let xp = r * (phi / 3.0).cos() - a / 3.0;
            let g = |x: f64| gig_ratio(x, mode, lam, omega).sqrt();
            let um = (xm - mode) * g(xm);
            let up = (xp - mode) * g(xp);
            GigKind::Rou(RouSetup { lam, omega, eta, invert: lambda < 0.0, mode, um, up })
        };
        Ok(Self { lambda, chi, psi, kind })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            GigKind::Gamma => {
                let g = rand_distr::Gamma::new(self.lambda, 2.0 / self.psi).expect("validated");
                rand_distr::Distribution::sample(&g, rng)
            }
            GigKind::InvGamma => {
                let g = rand_distr::Gamma::new(-self.lambda, 2.0 / self.chi).expect("validated");
                1.0 / rand_distr::Distribution::sample(&g, rng)
            }
            GigKind::Rou(s) => loop {
                let u = s.um + (s.up - s.um) * rng.random::<f64>();
                let v: f64 = rng.random();
                if v == 0.0 {
                    continue;
                }
                let x = u / v + s.mode;
                if x > 0.0 && v * v <= gig_ratio(x, s.mode, s.lam, s.omega) {
                    let x = if s.invert { 1.0 / x } else { x };
                    return x * s.eta;
                }
            },
        }
    }

    /// E[X] = η K_{λ+1}(ω)/K_λ(ω); closed forms on the boundaries.
    pub fn mean(&self) -> Result<f64> {
        match self.kind {
            GigKind::Gamma => Ok(2.0 * self.lambda / self.psi),
            GigKind::InvGamma => {
                if -self.lambda > 1.0 {
                    Ok(0.5 * self.chi / (-self.lambda - 1.0))
                } else {
                    Ok(f64::INFINITY)
                }
            }
            GigKind::Rou(s) => {
                let num = bessel_k_scaled(self.lambda + 1.0, s.omega)?;
                let den = bessel_k_scaled(self.lambda, s.omega)?;
                Ok(s.eta * num / den)
            }
        }
    }

    /// E[X²].
    pub fn second_moment(&self) -> Result<f64> {
        match self.kind {
            GigKind::Gamma => {
                let th = 2.0 / self.psi;
                Ok(self.lambda * (self.lambda + 1.0) * th * th)
            }
            GigKind::InvGamma => {
                let a = -self.lambda;
                if a > 2.0 {
                    let b = 0.5 * self.chi;
                    Ok(b * b / ((a - 1.0) * (a - 2.0)))
                } else {
                    Ok(f64::INFINITY)
                }
            }
            GigKind::Rou(s) => {
                let num = bessel_k_scaled(self.lambda + 2.0, s.omega)?;
                let den = bessel_k_scaled(self.lambda, s.omega)?;
                Ok(s.eta * s.eta * num / den)
            }
        }
    }

    /// Unnormalized log density.
    pub fn ln_kernel(&self, x: f64) -> f64 {
        (self.lambda - 1.0) * x.ln() - 0.5 * (self.chi / x + self.psi * x)
    }
}

/// g(x)/g(mode) for the standardized GIG kernel x^{λ−1} exp(−ω(x + 1/x)/2).
fn gig_ratio(x: f64, mode: f64, lam: f64, omega: f64) -> f64 {
    ((lam - 1.0) * (x / mode).ln() - 0.5 * omega * (x + 1.0 / x - mode - 1.0 / mode)).exp()
}

/// Draws `n` GIG(λ, χ, ψ) variates from the given stream.
pub fn gig_sample(lambda: f64, chi: f64, psi: f64, n: usize, stream: &RngStream) -> Result<Vec<f64>> {
    let g = Gig::new(lambda, chi, psi)?;
    let mut rng = stream.rng();
    Ok((0..n).map(|_| g.sample(&mut rng)).collect())
}

// ---------------------------------------------------------------------------
// Optimization and roots

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub max_iterations: usize,
    pub x_tolerance: f64,
    pub f_tolerance: f64,
    pub initial_simplex_scale: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self { max_iterations: 4000, x_tolerance: 1e-8, f_tolerance: 1e-10, initial_simplex_scale: 0.1 }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations >= 1
            && self.x_tolerance > 0.0
            && self.f_tolerance > 0.0
            && self.initial_simplex_scale > 0.0
        {
            Ok(())
        } else {
            Err(NumericsError::Domain(format!("invalid optimizer config {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Nelder–Mead simplex minimization. Non-finite objective values away from
/// the start are treated as +∞; failure to converge is reported through the
/// flag, not as an error.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], cfg: &OptimConfig) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> f64,
{
    cfg.validate()?;
    let n = x0.len();
    let f0 = f(x0);
    if !f0.is_finite() {
        return Err(NumericsError::NonFiniteStart);
    }
    if n == 0 {
        return Ok(OptimResult { x: vec![], f: f0, converged: true, iterations: 0 });
    }
    let mut eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    let mut fv = vec![f0];
    for i in 0..n {
        let mut x = x0.to_vec();
        let step = if x[i] != 0.0 { cfg.initial_simplex_scale * x[i].abs().max(1.0) } else { cfg.initial_simplex_scale };
        x[i] += step;
        fv.push(eval(&x));
        simplex.push(x);
    }
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iterations {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| fv[a].total_cmp(&fv[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        fv = order.iter().map(|&i| fv[i]).collect();

        let fspread = (fv[n] - fv[0]).abs();
        let xspread = simplex[1..]
            .iter()
            .flat_map(|x| x.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if fspread <= cfg.f_tolerance && xspread <= cfg.x_tolerance.max(1e-3 * cfg.x_tolerance.sqrt()) || xspread <= cfg.x_tolerance {
            converged = fv[n].is_finite();
            if converged {
                break;
            }
        }
        iterations += 1;

        let centroid: Vec<f64> =
            (0..n).map(|j| simplex[..n].iter().map(|x| x[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (c - w)).collect()
        };
        let xr = along(alpha);
        let fr = eval(&xr);
        if fr < fv[0] {
            let xe = along(gamma);
            let fe = eval(&xe);
            if fe < fr {
                simplex[n] = xe;
                fv[n] = fe;
            } else {
                simplex[n] = xr;
                fv[n] = fr;
            }
            continue;
        }
        if fr < fv[n - 1] {
            simplex[n] = xr;
            fv[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < fv[n] {
            let xc = along(rho * alpha);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(-rho);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < fv[n].min(fr) {
            simplex[n] = xc;
            fv[n] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for i in 1..=n {
            for j in 0..n {
                simplex[i][j] = best[j] + sigma * (simplex[i][j] - best[j]);
            }
            fv[i] = eval(&simplex[i]);
        }
    }
    let ib = (0..=n).min_by(|&a, &b| fv[a].total_cmp(&fv[b])).unwrap();
    let (x, fbest) = if fv[ib] <= f0 { (simplex[ib].clone(), fv[ib]) } else { (x0.to_vec(), f0) };
    Ok(OptimResult { x, f: fbest, converged, iterations })
}

/// Brent's method for a root of `f` bracketed by [a, b].
pub fn brent_root<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    if !(tol > 0.0) {
        return Err(NumericsError::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(NumericsError::NoBracket { a, b, fa, fb });
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..300 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    Ok(b)
}

// ---------------------------------------------------------------------------
// Quadrature

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j as f64 + 1.0) * z * p2 - j as f64 * p3) / (j as f64 + 1.0);
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Fixed-order Gauss–Legendre rule mapped to arbitrary intervals.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        Self { nodes, weights }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let h = 0.5 * (b - a);
        let c = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(c + h * x)).sum::<f64>() * h
    }

    /// (point, weight) pairs on [a, b].
    pub fn points(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = 0.5 * (b - a);
        let c = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (c + h * x, w * h))
    }
}

/// Adaptive bisection with a 10-point Gauss–Legendre rule; accepts an
/// interval once the split estimate agrees with the whole within `tol`
/// (absolute) scaled to the interval share.
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> f64 {
    const MAX_INTERVALS: usize = 200_000;
    let gl = GaussLegendre::new(10);
    let total = b - a;
    let mut stack = vec![(a, b, gl.integrate(a, b, &mut f), 0u32)];
    let mut acc = 0.0;
    let mut done = 0usize;
    while let Some((lo, hi, whole, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = gl.integrate(lo, mid, &mut f);
        let right = gl.integrate(mid, hi, &mut f);
        let share = tol * ((hi - lo) / total).abs().max(1e-6);
        let err = (left + right - whole).abs();
        done += 1;
        if !(err > share) || depth >= 40 || done + stack.len() >= MAX_INTERVALS {
            acc += left + right;
        } else {
            stack.push((lo, mid, left, depth + 1));
            stack.push((mid, hi, right, depth + 1));
        }
    }
    acc
}

/// Fritsch–Carlson slopes for monotone piecewise-cubic Hermite interpolation.
pub fn monotone_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut d = vec![0.0; n];
    if n < 2 {
        return d;
    }
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
    d[0] = delta[0];
    d[n - 1] = delta[n - 2];
    for i in 1..n - 1 {
        if delta[i - 1] * delta[i] <= 0.0 {
            d[i] = 0.0;
        } else {
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            let w1 = 2.0 * h1 + h0;
            let w2 = h1 + 2.0 * h0;
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    d
}

/// Cubic Hermite value and derivative on [x0, x1].
#[inline]
pub fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> (f64, f64) {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    let v = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
    let dh00 = (6.0 * t2 - 6.0 * t) / h;
    let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
    let dh01 = (-6.0 * t2 + 6.0 * t) / h;
    let dh11 = 3.0 * t2 - 2.0 * t;
    (v, dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1)
}

/// Index i with x[i] ≤ t < x[i+1], clamped to the valid segment range.
#[inline]
pub fn segment(x: &[f64], t: f64) -> usize {
    match x.binary_search_by(|v| v.total_cmp(&t)) {
        Ok(i) => i.min(x.len() - 2),
        Err(i) => i.saturating_sub(1).min(x.len() - 2),
    }
}
