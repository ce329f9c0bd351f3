use proptest::prelude::*;
use surfdep::benchmarks::gh_rows;
use surfdep::copulas::{CopulaSpec, Family, UnitSquarePoint};
use surfdep::estimation::*;
use surfdep::ghdist::{gh_sample, GhTabulation};
use surfdep::measures::MeshConfig;
use surfdep::numerics::{normal_quantile, OptimConfig, RngStream};
use surfdep::surfaces::SurfaceSelector;

fn cfg(n: usize) -> ResamplingConfig {
    ResamplingConfig {
        mesh: MeshConfig::new(n).unwrap(),
        gh: GhTabulation { grid_n: 64, base_cells: 128, ..GhTabulation::default() },
        ..ResamplingConfig::default()
    }
}

fn draws(spec: &CopulaSpec, n: usize, seed: u64) -> Vec<UnitSquarePoint> {
    spec.sample(n, &RngStream::new(seed, 0))
}

/// Normal-margin innovations with the given copula.
fn innovations(spec: &CopulaSpec, n: usize, seed: u64) -> Vec<[f64; 2]> {
    draws(spec, n, seed).iter().map(|p| [normal_quantile(p.u).unwrap(), normal_quantile(p.v).unwrap()]).collect()
}

fn series(data: &[[f64; 2]]) -> Vec<SeriesRow> {
    data.iter().enumerate().map(|(i, z)| SeriesRow { date: format!("d{i:05}"), x: z[0], y: z[1] }).collect()
}

#[test]
fn pseudo_observations_by_hand() {
    let p = pseudo_observations(&[[1.0, 10.0], [2.0, 20.0], [3.0, 30.0]]).unwrap();
    let want = [0.25, 0.5, 0.75];
    for (q, w) in p.iter().zip(want) {
        assert_eq!((q.u, q.v), (w, w));
    }
    // x ranks 1, 2.5, 2.5, 4; y ranks 4, 3, 1, 2
    let p = pseudo_observations(&[[0.1, 9.0], [0.5, 7.0], [0.5, 1.0], [0.9, 2.0]]).unwrap();
    let u: Vec<f64> = p.iter().map(|q| q.u).collect();
    let v: Vec<f64> = p.iter().map(|q| q.v).collect();
    assert_eq!(u, vec![0.2, 0.5, 0.5, 0.8]);
    assert_eq!(v, vec![0.8, 0.6, 0.2, 0.4]);
}

#[test]
fn pseudo_observation_errors() {
    assert!(matches!(pseudo_observations(&[[1.0, 2.0]]), Err(EstimationError::TooFew { .. })));
    assert!(matches!(pseudo_observations(&[[1.0, 2.0], [1.0, 3.0]]), Err(EstimationError::Degenerate(_))));
    assert!(pseudo_observations(&[[f64::NAN, 2.0], [1.0, 3.0]]).is_err());
}

/// Clayton log-density written out directly.
fn clayton_ln_density(t: f64, u: f64, v: f64) -> f64 {
    (1.0 + t).ln() - (1.0 + t) * (u * v).ln() - (2.0 + 1.0 / t) * (u.powf(-t) + v.powf(-t) - 1.0).ln()
}

#[test]
fn clayton_mle_matches_grid_search() {
    let pts = draws(&CopulaSpec::clayton(3.0).unwrap(), 800, 5);
    let pseudo = pseudo_observations(&pts.iter().map(|p| [p.u, p.v]).collect::<Vec<_>>()).unwrap();
    let fit = copula_mle(Family::Clayton, &pseudo, &OptimConfig::default()).unwrap();
    assert!(fit.converged);
    let ll = |t: f64| pseudo.iter().map(|p| clayton_ln_density(t, p.u, p.v)).sum::<f64>();
    let best = (1..=6000).map(|k| k as f64 * 1e-3).max_by(|a, b| ll(*a).total_cmp(&ll(*b))).unwrap();
    let th = match &fit.model {
        Model::Copula(s) => s.params()[0],
        _ => unreachable!(),
    };
    assert!((th - best).abs() < 2e-3, "{th} vs grid {best}");
    assert!((fit.loglik - ll(th)).abs() < 1e-8 * ll(th).abs());
}

#[test]
fn gumbel_mle_recovers_theta() {
    let pts = draws(&CopulaSpec::gumbel(10.0).unwrap(), 1000, 3);
    let fit = copula_mle(Family::GumbelHougaard, &pts, &OptimConfig::default()).unwrap();
    let Model::Copula(s) = &fit.model else { unreachable!() };
    assert!((s.params()[0] - 10.0).abs() < 1.0, "{}", s.label());
}

#[test]
fn frank_on_independent_data_shrinks_toward_zero() {
    let mean_abs = |n: usize| {
        (0..24u64)
            .map(|seed| {
                let pts = draws(&CopulaSpec::independence(), n, 100 + seed);
                let Model::Copula(s) = copula_mle(Family::Frank, &pts, &OptimConfig::default()).unwrap().model else {
                    unreachable!()
                };
                s.params()[0].abs()
            })
            .sum::<f64>()
            / 24.0
    };
    let m: Vec<f64> = [500, 2000, 8000].iter().map(|&n| mean_abs(n)).collect();
    assert!(m[0] > m[1] && m[1] > m[2] && m[2] < 0.1, "{m:?}");
}

#[test]
fn mle_preconditions() {
    let pts = draws(&CopulaSpec::clayton(1.0).unwrap(), 20, 1);
    assert!(matches!(copula_mle(Family::Clayton, &pts, &OptimConfig::default()), Err(EstimationError::TooFew { .. })));
    let pts = draws(&CopulaSpec::clayton(1.0).unwrap(), 100, 1);
    for f in [Family::Comonotone, Family::MarshallOlkin, Family::CuadrasAuge, Family::Frechet] {
        assert!(matches!(copula_mle(f, &pts, &OptimConfig::default()), Err(EstimationError::NoDensity(_))), "{f:?}");
    }
}

#[test]
fn fits_ignore_monotone_marginal_transforms() {
    let data = innovations(&CopulaSpec::student_t(0.6, 5.0).unwrap(), 400, 9);
    let warped: Vec<[f64; 2]> = data.iter().map(|z| [z[0].exp(), z[1].powi(3) + 2.0 * z[1]]).collect();
    for fam in ["gumbel", "t", "frank"] {
        let f = ModelFamily::parse(fam).unwrap();
        let a = fit_raw(f, &data, None, &OptimConfig::default()).unwrap();
        let b = fit_raw(f, &warped, None, &OptimConfig::default()).unwrap();
        assert_eq!(a.model.to_json(), b.model.to_json(), "{fam}");
        assert_eq!(a.loglik, b.loglik);
    }
}

#[test]
fn bootstrap_single_replicate_and_determinism() {
    let pts = draws(&CopulaSpec::gumbel(3.0).unwrap(), 300, 2);
    let fit = copula_mle(Family::GumbelHougaard, &pts, &OptimConfig::default()).unwrap();
    let m = Measure::Lambda { selector: SurfaceSelector::UPPER_X_GIVEN_Y, p: 1.0 };
    let c = cfg(100);
    let one = parametric_bootstrap(&fit, m, 1, 0.9, &RngStream::new(4, 0), &c).unwrap();
    assert_eq!(one.lower, one.upper);
    let a = parametric_bootstrap(&fit, m, 12, 0.9, &RngStream::new(4, 0), &c).unwrap();
    let b = parametric_bootstrap(&fit, m, 12, 0.9, &RngStream::new(4, 0), &c).unwrap();
    assert_eq!((a.lower.to_bits(), a.upper.to_bits()), (b.lower.to_bits(), b.upper.to_bits()));
    // the first replicate of B = 12 is the B = 1 replicate
    assert!(a.lower <= one.lower && one.lower <= a.upper);
    let d = parametric_bootstrap(&fit, m, 12, 0.9, &RngStream::new(5, 0), &c).unwrap();
    assert_ne!(a.lower, d.lower);
    assert!(!a.unreliable && a.failures == 0);
    assert!(parametric_bootstrap(&fit, m, 0, 0.9, &RngStream::new(4, 0), &c).is_err());
    assert!(parametric_bootstrap(&fit, m, 5, 1.0, &RngStream::new(4, 0), &c).is_err());
}

#[test]
fn bootstrap_band_width_for_gumbel_upper() {
    // ±2 sd of the sampling spread of Λ^(u) at n = 500
    let pts = draws(&CopulaSpec::gumbel(10.0).unwrap(), 500, 8);
    let fit = copula_mle(Family::GumbelHougaard, &pts, &OptimConfig::default()).unwrap();
    let m = Measure::Lambda { selector: SurfaceSelector::UPPER_X_GIVEN_Y, p: 0.7 };
    let band = parametric_bootstrap(&fit, m, 200, 0.9545, &RngStream::new(21, 0), &cfg(1000)).unwrap();
    let width = band.upper - band.lower;
    assert!((width - 4.0 * 0.0064).abs() < 0.35 * 4.0 * 0.0064, "width {width}");
    assert!(band.lower <= band.point_estimate && band.point_estimate <= band.upper);
}

#[test]
fn simulation_is_reproducible_and_round_trips() {
    let truth = Model::Copula(CopulaSpec::clayton(2.0).unwrap());
    let c = cfg(80);
    let a = simulation_study(&truth, 200, 3, &[1.0, 0.7], &c, &RngStream::new(7, 0)).unwrap();
    let b = simulation_study(&truth, 200, 3, &[1.0, 0.7], &c, &RngStream::new(7, 0)).unwrap();
    assert_eq!(a.summaries.len(), 8);
    for (x, y) in a.summaries.iter().zip(&b.summaries) {
        assert_eq!(x.mean.to_bits(), y.mean.to_bits());
        assert_eq!(x.std_dev.to_bits(), y.std_dev.to_bits());
    }
    for s in &a.summaries {
        let id = (s.mean - s.true_value).powi(2) + s.std_dev.powi(2);
        assert!((s.mse - id).abs() < 1e-12, "{s:?}");
    }
    assert_eq!(a.variance_convention, "population");
    let mut buf = Vec::new();
    a.write_csv(&mut buf).unwrap();
    let back = SimulationReport::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.len(), a.summaries.len());
    for (x, y) in back.iter().zip(&a.summaries) {
        assert_eq!((x.measure.as_str(), x.side.as_str(), x.direction.as_str(), x.p), (y.measure.as_str(), y.side.as_str(), y.direction.as_str(), y.p));
        assert!((x.mse - y.mse).abs() <= 1e-15 * y.mse.abs().max(1e-300));
    }
    assert!(simulation_study(&truth, 200, 1, &[1.0], &c, &RngStream::new(7, 0)).is_err());
}

#[test]
fn spread_shrinks_with_sample_size() {
    let c = cfg(300);
    for truth in [CopulaSpec::gumbel(10.0).unwrap(), CopulaSpec::student_t(0.8, 3.0).unwrap()] {
        let m = Model::Copula(truth);
        let s500 = simulation_study(&m, 500, 40, &[1.0, 0.7], &c, &RngStream::new(7, 0)).unwrap();
        let s1000 = simulation_study(&m, 1000, 40, &[1.0, 0.7], &c, &RngStream::new(7, 0)).unwrap();
        for (a, b) in s500.summaries.iter().zip(&s1000.summaries) {
            assert!(b.std_dev < a.std_dev, "{} {} {} {:?}: {} vs {}", m.label(), a.side, a.direction, a.p, b.std_dev, a.std_dev);
        }
    }
}

proptest! {
    #[test]
    fn mse_identity(vals in prop::collection::vec(0.0..1.0f64, 2..60), truth in 0.0..1.0f64) {
        let m = Measure::Lambda { selector: SurfaceSelector::LOWER_X_GIVEN_Y, p: 1.0 };
        let s = summarize(&m, truth, &vals, 100, vals.len());
        prop_assert!((s.mse - ((s.mean - truth).powi(2) + s.std_dev.powi(2))).abs() < 1e-12);
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        prop_assert!((s.std_dev - var.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn pseudo_observations_are_rank_invariant(xs in prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 3..40)) {
        let data: Vec<[f64; 2]> = xs.iter().map(|&(a, b)| [a, b]).collect();
        prop_assume!(data.iter().any(|z| z[0] != data[0][0]) && data.iter().any(|z| z[1] != data[0][1]));
        let warped: Vec<[f64; 2]> = data.iter().map(|z| [z[0].powi(3), (z[1] / 10.0).exp()]).collect();
        let a = pseudo_observations(&data).unwrap();
        let b = pseudo_observations(&warped).unwrap();
        prop_assert_eq!(a.clone(), b);
        prop_assert!(a.iter().all(|p| p.u > 0.0 && p.u < 1.0 && p.v > 0.0 && p.v < 1.0));
    }
}

fn rolling_cfg(window: usize, family: &str, mesh: usize) -> RollingConfig {
    RollingConfig { window, family: ModelFamily::parse(family).unwrap(), ps: vec![1.0], resampling: cfg(mesh), bootstrap: None }
}

#[test]
fn rolling_constant_copula_is_flat() {
    let spec = CopulaSpec::gumbel(4.0).unwrap();
    let s = series(&innovations(&spec, 1500, 17));
    let c = rolling_cfg(500, "gumbel", 200);
    let r = rolling_lambda(&s, &c).unwrap();
    assert_eq!(r.rows.len(), 1001);
    assert_eq!(r.rows[0].date, "d00499");
    assert!(r.rows.iter().all(|x| x.status == WindowStatus::Ok));
    // simulation oracle: the n = 500 sampling spread of rank-based Λ^(u)
    // refits on the same mesh
    let oracle = ResamplingConfig { rank_transform: true, ..c.resampling.clone() };
    let sim = simulation_study(&Model::Copula(spec), 500, 60, &[1.0], &oracle, &RngStream::new(3, 0)).unwrap();
    let ref_u = sim.find("lambda", SurfaceSelector::UPPER_X_GIVEN_Y, 1.0).unwrap();
    let traj: Vec<f64> = r.rows.iter().map(|x| x.lambda[0][2]).collect();
    let mean = traj.iter().sum::<f64>() / traj.len() as f64;
    // each point is one n = 500 estimate; neighbours share most of their data
    assert!((mean - ref_u.true_value).abs() < 3.0 * ref_u.std_dev, "mean {mean} vs {}", ref_u.true_value);
    assert!(traj.iter().all(|x| (x - ref_u.true_value).abs() < 4.0 * ref_u.std_dev), "sd {}", ref_u.std_dev);
}

#[test]
fn rolling_full_window_equals_direct_fit() {
    let data = innovations(&CopulaSpec::clayton(2.0).unwrap(), 300, 4);
    let c = rolling_cfg(300, "clayton", 100);
    let r = rolling_lambda(&series(&data), &c).unwrap();
    assert_eq!(r.rows.len(), 1);
    let fit = fit_raw(c.family, &data, None, &c.resampling.optim).unwrap();
    assert_eq!(r.rows[0].model, fit.model.to_json());
    let direct = evaluate_measures(&fit.model.copula(&c.resampling.gh).unwrap(), &Measure::lambdas(&[1.0]), &c.resampling.mesh).unwrap();
    assert_eq!(r.rows[0].lambda[0].to_vec(), direct);
}

#[test]
fn rolling_carries_failed_windows_forward() {
    let mut data = innovations(&CopulaSpec::frank(5.0).unwrap(), 140, 6);
    for z in data.iter_mut().skip(70) {
        z[0] = 0.0;
    }
    let c = rolling_cfg(60, "frank", 64);
    let r = rolling_lambda(&series(&data), &c).unwrap();
    assert_eq!(r.rows.len(), 81);
    let first_bad = 70; // window starting at 70 is constant in x
    assert_eq!(r.rows[first_bad - 1].status, WindowStatus::Ok);
    for row in &r.rows[first_bad..] {
        assert_eq!(row.status, WindowStatus::CarriedForward);
        assert_eq!(row.lambda, r.rows[first_bad - 1].lambda);
    }
    let mut buf = Vec::new();
    r.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("date,status,p,lambda_lower_xy"));
    assert_eq!(text.lines().count(), 82);
    assert!(text.lines().last().unwrap().contains("carried_forward"));

    // nothing to carry forward
    let mut data = innovations(&CopulaSpec::frank(5.0).unwrap(), 80, 6);
    for z in data.iter_mut().take(60) {
        z[1] = 1.0;
    }
    let r = rolling_lambda(&series(&data), &c).unwrap();
    assert_eq!(r.rows[0].status, WindowStatus::Failed);
    assert!(r.rows[0].lambda[0][0].is_nan());
    assert!(rolling_lambda(&series(&data[..50]), &c).is_err());
}

#[test]
fn series_csv_round_trip() {
    let rows = series(&[[0.5, -1.0], [1.5, 2.25]]);
    let mut buf = Vec::new();
    write_series(&mut buf, &rows).unwrap();
    assert_eq!(read_series(buf.as_slice()).unwrap(), rows);
    assert!(read_series("a,b,c\n1,2,3\n".as_bytes()).is_err());
    assert!(read_series("date,x,y\nd1,1,\n".as_bytes()).is_err());
}

#[test]
fn gh_and_nig_trajectories_agree() {
    let (_, params) = gh_rows().into_iter().find(|(n, _)| *n == "GH1").unwrap();
    let data = gh_sample(&params, 602, &RngStream::new(12, 0)).unwrap();
    let s = series(&data);
    let gh = rolling_lambda(&s, &rolling_cfg(600, "gh", 200)).unwrap();
    let nig = rolling_lambda(&s, &rolling_cfg(600, "nig", 200)).unwrap();
    assert_eq!(gh.rows.len(), 3);
    for (a, b) in gh.rows.iter().zip(&nig.rows) {
        for k in 0..4 {
            assert!((a.lambda[0][k] - b.lambda[0][k]).abs() < 0.05, "{}: {:?} vs {:?}", a.date, a.lambda, b.lambda);
        }
    }
}
