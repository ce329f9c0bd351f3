use std::sync::{Arc, OnceLock};
use surfdep::benchmarks::gh_rows;
use surfdep::copulas::CopulaSpec;
use surfdep::ghdist::*;
use surfdep::measures::{kappa, lambda_tdc, MeshConfig};
use surfdep::numerics::{integrate_adaptive, OptimConfig, RngStream};
use surfdep::surfaces::SurfaceSelector;

fn row(name: &str) -> GHParams {
    gh_rows().into_iter().find(|r| r.0 == name).unwrap().1
}

fn small() -> GhTabulation {
    GhTabulation { grid_n: 96, base_cells: 192, ..GhTabulation::default() }
}

/// GH1 at the default tabulation, shared between tests.
fn gh1_default() -> &'static CopulaSpec {
    static T: OnceLock<CopulaSpec> = OnceLock::new();
    T.get_or_init(|| CopulaSpec::tabulated(Arc::new(gh_implied_copula(&row("GH1"), 512).unwrap())))
}

/// K_ν(x) from ∫₀^∞ e^{−x cosh t} cosh(νt) dt.
fn bessel_k_oracle(nu: f64, x: f64) -> f64 {
    let mut tmax = 1.0;
    while x * (f64::cosh(tmax) - 1.0) - nu.abs() * tmax < 50.0 {
        tmax += 1.0;
    }
    integrate_adaptive(|t| (-x * t.cosh()).exp() * (nu * t).cosh(), 0.0, tmax, 1e-14)
}

/// Textbook bivariate GH density in the (λ, α, β, δ, μ, Δ) parameterization.
fn gh_density_oracle(p: &GHParams, z: [f64; 2]) -> f64 {
    let d = p.dispersion;
    let det = d[0][0] * d[1][1] - d[0][1] * d[1][0];
    let (x, y) = (z[0] - p.mu[0], z[1] - p.mu[1]);
    let q = (d[1][1] * x * x - 2.0 * d[0][1] * x * y + d[0][0] * y * y) / det;
    let bdb = p.beta[0] * (d[0][0] * p.beta[0] + d[0][1] * p.beta[1]) + p.beta[1] * (d[1][0] * p.beta[0] + d[1][1] * p.beta[1]);
    let g = (p.alpha * p.alpha - bdb).sqrt();
    let (lam, a, de) = (p.lambda, p.alpha, p.delta);
    let norm = (g / de).powf(lam) / (2.0 * std::f64::consts::PI * det.sqrt() * a.powf(lam - 1.0) * bessel_k_oracle(lam, de * g));
    let s = (de * de + q).sqrt();
    norm * bessel_k_oracle(lam - 1.0, a * s) * s.powf(lam - 1.0) * (p.beta[0] * x + p.beta[1] * y).exp()
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos is overkill here; half-integer and integer arguments only
    let mut v = x;
    let mut acc = 0.0;
    while v > 1.5 {
        v -= 1.0;
        acc += v.ln();
    }
    if (v - 0.5).abs() < 1e-12 {
        acc + 0.5 * std::f64::consts::PI.ln()
    } else {
        acc
    }
}

#[test]
fn density_matches_textbook_formula() {
    for name in ["GH1", "GH2", "NIG2", "GH4"] {
        let p = row(name);
        for z in [[0.0, 0.0], [0.7, -0.3], [-1.5, -2.0], [2.5, 1.0]] {
            let got = gh_density(&p, z).unwrap();
            let want = gh_density_oracle(&p, z);
            assert!((got / want - 1.0).abs() < 1e-9, "{name} at {z:?}: {got} vs {want}");
            assert!((gh_log_density(&p, z).unwrap() - want.ln()).abs() < 1e-9);
        }
    }
}

#[test]
fn symmetric_density_is_centrally_symmetric() {
    let mut p = row("GH3");
    p.mu = [0.4, -1.0];
    for z in [[0.3, 0.9], [-2.0, 0.5], [1.7, 1.1]] {
        let a = gh_density(&p, [p.mu[0] + z[0], p.mu[1] + z[1]]).unwrap();
        let b = gh_density(&p, [p.mu[0] - z[0], p.mu[1] - z[1]]).unwrap();
        assert!((a - b).abs() <= 1e-14 * a.max(b));
    }
}

#[test]
fn t_limit_of_small_alpha() {
    let nu: f64 = 3.0;
    let disp = [[1.0, 0.5], [0.5, 2.0]];
    let p = GHParams::new(-nu / 2.0, 1e-4, [0.0, 0.0], nu.sqrt(), [0.0, 0.0], disp).unwrap();
    let det: f64 = 1.75;
    for z in [[0.0, 0.0], [1.0, -0.5], [-2.0, 3.0]] {
        let q = (disp[1][1] * z[0] * z[0] - 2.0 * disp[0][1] * z[0] * z[1] + disp[0][0] * z[1] * z[1]) / det;
        let ln_t = ln_gamma((nu + 2.0) / 2.0) - ln_gamma(nu / 2.0) - (nu * std::f64::consts::PI).ln() - 0.5 * det.ln()
            - (nu + 2.0) / 2.0 * (1.0 + q / nu).ln();
        let got = gh_log_density(&p, z).unwrap();
        assert!((got - ln_t).abs() < 1e-3, "at {z:?}: {got} vs {ln_t}");
    }
}

#[test]
fn density_integrates_to_one() {
    // nested adaptive quadrature split at μ, where the variance-gamma density
    // has an integrable singularity
    let r = 30.0;
    for name in ["GH1", "NIG4", "VG2"] {
        let p = row(name);
        let inner = |x: f64| {
            let f = |y: f64| gh_density(&p, [x, y]).unwrap();
            integrate_adaptive(f, -r, 0.0, 1e-11) + integrate_adaptive(f, 0.0, r, 1e-11)
        };
        let s = integrate_adaptive(inner, -r, 0.0, 1e-9) + integrate_adaptive(inner, 0.0, r, 1e-9);
        assert!((s - 1.0).abs() < 5e-3, "{name}: {s}");
    }
}

#[test]
fn admissibility_is_enforced() {
    assert!(gh_params(1.0, 0.5, [0.6, 0.0], 1.0, 1.0, 0.0, 1.0).is_err());
    assert!(gh_params(-0.5, 1.0, [0.0, 0.0], 0.0, 1.0, 0.0, 1.0).is_err());
    assert!(gh_params(0.0, 1.0, [0.0, 0.0], 0.0, 1.0, 0.0, 1.0).is_err());
    assert!(gh_params(1.0, 1.0, [0.0, 0.0], 1.0, 1.0, 1.0, 1.0).is_err());
    // λ < 0 admits the boundary √(β′Δβ) = α
    assert!(gh_params(-0.5, 0.6, [0.6, 0.0], 1.0, 1.0, 0.0, 1.0).is_ok());
}

#[test]
fn marginals_are_consistent() {
    let (f, g) = gh_marginals(&row("GH1")).unwrap();
    assert!((f.cdf_at(0.0) - 0.5).abs() < 1e-4 && (g.cdf_at(0.0) - 0.5).abs() < 1e-4);
    assert!(f.cdf.first().unwrap() <= &1e-8 && f.cdf.last().unwrap() >= &(1.0 - 1e-8));
    // strictly increasing until 1 − F falls below f64 resolution near 1
    assert!(f.cdf.windows(2).all(|w| w[1] > w[0] || (w[0] > 1.0 - 1e-12 && w[1] >= w[0])));
    let (lo, hi) = (f.quantile(1e-6), f.quantile(1.0 - 1e-6));
    for k in 0..=50 {
        let x = lo + (hi - lo) * k as f64 / 50.0;
        assert!((f.quantile(f.cdf_at(x)) - x).abs() < 1e-5, "x={x}");
    }
}

#[test]
fn marginal_mean_matches_monte_carlo() {
    let p = row("NIG2");
    let (f, _) = gh_marginals(&p).unwrap();
    let m = 200_000;
    let table_mean = (0..m).map(|k| f.quantile((k as f64 + 0.5) / m as f64)).sum::<f64>() / m as f64;
    let n = 1_000_000;
    let draws = gh_sample(&p, n, &RngStream::new(21, 0)).unwrap();
    let mc = draws.iter().map(|z| z[0]).sum::<f64>() / n as f64;
    let var = draws.iter().map(|z| (z[0] - mc).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    assert!((table_mean - mc).abs() < 3.0 * se + 1e-4, "table {table_mean} mc {mc} se {se}");
    assert!((p.mean().unwrap()[0] - table_mean).abs() < 1e-3);
}

#[test]
fn sample_moments() {
    let n = 1_000_000;
    let p = row("GH1");
    let draws = gh_sample(&p, n, &RngStream::new(4, 0)).unwrap();
    let mean = [0, 1].map(|k| draws.iter().map(|z| z[k]).sum::<f64>() / n as f64);
    let cov = |a: usize, b: usize| draws.iter().map(|z| (z[a] - mean[a]) * (z[b] - mean[b])).sum::<f64>() / (n - 1) as f64;
    let (sxx, syy, sxy) = (cov(0, 0), cov(1, 1), cov(0, 1));
    for k in 0..2 {
        let se = ([sxx, syy][k] / n as f64).sqrt();
        assert!(mean[k].abs() < 3.0 * se, "mean {k} = {}", mean[k]);
    }
    let c = p.covariance().unwrap();
    let want = c[0][1] / (c[0][0] * c[1][1]).sqrt();
    assert!((sxy / (sxx * syy).sqrt() - want).abs() < 0.01);
    assert_eq!(gh_sample(&p, 20, &RngStream::new(4, 0)).unwrap(), draws[..20].to_vec());
}

#[test]
fn implied_copula_table_invariants() {
    let t = gh_implied_copula_with(&row("GH1"), &small()).unwrap();
    let (nu, nv) = (t.grid_u.len(), t.grid_v.len());
    assert!(t.grid_u.windows(2).all(|w| w[1] > w[0]));
    assert_eq!((t.grid_u[0], t.grid_u[nu - 1]), (0.0, 1.0));
    let c = |i: usize, j: usize| t.cdf_table[i * nv + j];
    for i in 0..nu {
        assert!((c(i, nv - 1) - t.grid_u[i]).abs() < 1e-6);
        for j in 0..nv {
            let (u, v) = (t.grid_u[i], t.grid_v[j]);
            assert!(c(i, j) >= (u + v - 1.0).max(0.0) - 1e-12 && c(i, j) <= u.min(v) + 1e-12);
            if i > 0 {
                assert!(c(i, j) >= c(i - 1, j));
            }
            if j > 0 {
                assert!(c(i, j) >= c(i, j - 1));
            }
            // β = 0 and equal diagonal: exchangeable
            assert!((c(i, j) - c(j, i)).abs() < 1e-5);
        }
    }
    for j in 0..nv {
        assert!((c(nu - 1, j) - t.grid_v[j]).abs() < 1e-6);
    }
}

#[test]
fn implied_copula_passes_copula_properties() {
    let spec = CopulaSpec::tabulated(Arc::new(gh_implied_copula_with(&row("NIG4"), &small()).unwrap()));
    let mut rng = RngStream::new(8, 0).rng();
    use rand::Rng;
    for _ in 0..2000 {
        let (a, b, c, d): (f64, f64, f64, f64) = (rng.random(), rng.random(), rng.random(), rng.random());
        let (u1, u2, v1, v2) = (a.min(b), a.max(b), c.min(d), c.max(d));
        let x = spec.cdf(u1, v1);
        assert!(x >= (u1 + v1 - 1.0).max(0.0) - 1e-12 && x <= u1.min(v1) + 1e-12);
        let vol = spec.cdf(u2, v2) - spec.cdf(u1, v2) - spec.cdf(u2, v1) + spec.cdf(u1, v1);
        assert!(vol >= -1e-9, "volume {vol}");
        assert!((spec.cdf(a, 1.0) - a).abs() < 1e-6);
    }
}

#[test]
fn every_table_row_tabulates() {
    let cfg = GhTabulation { grid_n: 64, base_cells: 128, ..GhTabulation::default() };
    for (name, p) in gh_rows() {
        let t = gh_implied_copula_with(&p, &cfg);
        assert!(t.is_ok(), "{name}: {:?}", t.err());
    }
}

#[test]
fn csv_dump_round_trips() {
    let t = gh_implied_copula_with(&row("VG1"), &GhTabulation { grid_n: 64, base_cells: 128, ..GhTabulation::default() }).unwrap();
    let mut buf = Vec::new();
    t.write_csv(&mut buf).unwrap();
    let back = InterpolatedCopula::read_csv(std::io::BufReader::new(&buf[..])).unwrap();
    assert_eq!(back.grid_u, t.grid_u);
    assert_eq!(back.cdf_table, t.cdf_table);
    assert!((back.cdf(0.3, 0.6) - t.cdf(0.3, 0.6)).abs() < 1e-15);
}

#[test]
fn gh1_downstream_measures() {
    let spec = gh1_default();
    let m = MeshConfig::default();
    let k = kappa(spec, SurfaceSelector::LOWER_X_GIVEN_Y, &m).unwrap();
    assert!((k - 0.85).abs() < 0.02, "κ = {k}");
    let (tau, _, _) = surfdep::measures::classical_concordance(spec, &m).unwrap();
    assert!((tau - 0.71).abs() < 0.02, "τ = {tau}");
}

#[test]
fn skewed_gh_keeps_direction_asymmetry() {
    let spec = CopulaSpec::tabulated(Arc::new(gh_implied_copula(&row("GH2"), 512).unwrap()));
    let m = MeshConfig::default();
    let xy = lambda_tdc(&spec, SurfaceSelector::LOWER_X_GIVEN_Y, 1.0, &m).unwrap();
    let yx = lambda_tdc(&spec, SurfaceSelector::LOWER_Y_GIVEN_X, 1.0, &m).unwrap();
    assert!((xy - 0.23).abs() < 0.02 && (yx - 0.19).abs() < 0.02, "{xy} {yx}");
}

#[test]
fn fit_improves_on_start_and_is_stationary() {
    let truth = row("GH3");
    let data = gh_sample(&truth, 1000, &RngStream::new(17, 0)).unwrap();
    let cfg = OptimConfig::default();
    let ll0: f64 = data.iter().map(|z| gh_log_density(&truth, *z).unwrap()).sum();
    let fit = gh_fit(&data, &truth, &cfg, GhFitOptions::default()).unwrap();
    fit.params.validate().unwrap();
    assert!(fit.loglik >= ll0 - 1e-9, "{} < {ll0}", fit.loglik);
    // 9 free coordinates: the gain over the truth is χ²₉/2-scale noise
    assert!(fit.loglik - ll0 < 15.0, "gain {}", fit.loglik - ll0);
    let again = gh_fit(&data, &fit.params, &cfg, GhFitOptions::default()).unwrap();
    assert!((again.loglik - fit.loglik).abs() < 1e-4, "{} vs {}", again.loglik, fit.loglik);
}

#[test]
fn fit_rejects_short_samples() {
    let data = vec![[0.0, 0.0]; 49];
    assert!(gh_fit(&data, &row("GH1"), &OptimConfig::default(), GhFitOptions::default()).is_err());
}
