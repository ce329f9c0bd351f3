//! Module-level published examples and invariants at their pinned
//! tolerances. Several of these are known not to hold; see the README.

use surfdep::benchmarks::CONCORDANCE;
use surfdep::copulas::CopulaSpec;
use surfdep::estimation::{simulation_study, Model, ResamplingConfig};
use surfdep::measures::*;
use surfdep::numerics::RngStream;
use surfdep::surfaces::SurfaceSelector;

const LXY: SurfaceSelector = SurfaceSelector::LOWER_X_GIVEN_Y;
const UXY: SurfaceSelector = SurfaceSelector::UPPER_X_GIVEN_Y;

fn mesh(n: usize) -> MeshConfig {
    MeshConfig::new(n).unwrap()
}

fn near(what: &str, got: f64, want: f64, tol: f64) -> Option<String> {
    ((got - want).abs() > tol).then(|| format!("{what}: {got:.4} vs {want} ± {tol}"))
}

fn report(misses: Vec<String>) {
    assert!(misses.is_empty(), "{} miss(es):\n{}", misses.len(), misses.join("\n"));
}

#[test]
fn kappa_examples() {
    let m = mesh(1000);
    let mut misses = Vec::new();
    for (spec, lo, up) in [(CopulaSpec::clayton(5.0).unwrap(), 0.92, 0.73), (CopulaSpec::gumbel(4.0).unwrap(), 0.84, 0.91)] {
        let r = full_report(&spec, &[1.0], &m).unwrap();
        misses.extend(near(&format!("{} κ^(l)", r.label), r.surface(LXY).kappa, lo, 0.01));
        misses.extend(near(&format!("{} κ^(u)", r.label), r.surface(UXY).kappa, up, 0.01));
    }
    let g = full_report(&CopulaSpec::gaussian(0.9).unwrap(), &[1.0], &m).unwrap();
    for s in &g.surfaces {
        misses.extend(near(&format!("{} κ {}", g.label, s.selector), s.kappa, 0.85, 0.01));
    }
    report(misses);
}

#[test]
fn gumbel_rho_example() {
    let (_, rho, _) = classical_concordance(&CopulaSpec::gumbel(4.0).unwrap(), &mesh(1000)).unwrap();
    report(near("gumbel(4) ρ", rho, 0.90, 0.01).into_iter().collect());
}

#[test]
fn mesh_self_consistency() {
    let mut misses = Vec::new();
    for row in CONCORDANCE.iter() {
        let spec = row.spec().unwrap();
        let a = full_report(&spec, &[1.0], &mesh(500)).unwrap();
        let b = full_report(&spec, &[1.0], &mesh(1000)).unwrap();
        for (x, y) in a.surfaces.iter().zip(&b.surfaces) {
            misses.extend(near(&format!("{} {} δ(500)", a.label, x.selector), x.delta, y.delta, 0.01));
            misses.extend(near(&format!("{} {} κ(500)", a.label, x.selector), x.kappa, y.kappa, 0.01));
        }
        misses.extend(near(&format!("{} τ(500)", a.label), a.tau, b.tau, 0.01));
        misses.extend(near(&format!("{} ρ(500)", a.label), a.rho, b.rho, 0.01));
        misses.extend(near(&format!("{} σ(500)", a.label), a.sigma, b.sigma, 0.01));
    }
    report(misses);
}

#[test]
fn gumbel_sampling_study_at_n_1000() {
    let truth = Model::Copula(CopulaSpec::gumbel(10.0).unwrap());
    let sim = simulation_study(&truth, 1000, 100, &[0.7], &ResamplingConfig::default(), &RngStream::new(7, 0)).unwrap();
    let s = sim.find("lambda", LXY, 0.7).unwrap();
    report(near("gumbel(10) n=1000 Λ^(l) mean", s.mean, 0.483, 3.0 * 0.008 / 10.0).into_iter().collect());
}
