//! The finite-element pipeline in dimension one against closed forms.

use std::sync::Arc;

use weakhom_core::corrector_route::{first_order_moment_route, moment_route};
use weakhom_core::defect::{first_order, second_order, sweep, CellData, SweepOptions};
use weakhom_core::fem::SolverOptions;
use weakhom_core::law::{builtin_law, LawKind};
use weakhom_core::oned::{exact_a_star, exact_orders, finite_n_orders, OneDMaterial};
use weakhom_core::quadrature::Integrator;
use weakhom_core::stochastic::mc_reference;

fn opts() -> SolverOptions {
    SolverOptions { tolerance: 1e-13, ..Default::default() }
}

fn two_phase() -> OneDMaterial {
    OneDMaterial::new(vec![(0.3, 2.0, 1.0), (0.7, 5.0, -2.0)]).unwrap()
}

#[test]
fn defect_route_matches_finite_n_closed_forms() {
    let m = two_phase();
    let cell = Arc::new(CellData::new(&m.to_material(10).unwrap(), 10, opts()).unwrap());
    assert!((cell.periodic.tensor.get(0, 0) - exact_a_star(&m)).abs() < 1e-11);
    for kind in [LawKind::Bernoulli, LawKind::ClippedGaussian, LawKind::BernoulliMinusUniform] {
        let e = builtin_law(kind).unwrap().expansion().clone();
        for n in [3usize, 5, 8] {
            let cache = weakhom_core::defect::DefectProblemCache::new(cell.clone(), n).unwrap();
            let (a1, a2) = finite_n_orders(&m, &e, n).unwrap();
            let f = first_order(&cache, &e).unwrap().get(0, 0);
            let s = second_order(&cache, &e, None).unwrap().tensor.get(0, 0);
            assert!((f - a1).abs() < 1e-9 * a1.abs().max(1.0), "{kind:?} N={n}: {f} vs {a1}");
            assert!((s - a2).abs() < 1e-9 * a2.abs().max(1.0), "{kind:?} N={n}: {s} vs {a2}");
        }
    }
}

#[test]
fn pure_derivative_first_order_is_n_independent_and_equals_moment_route() {
    let m = two_phase();
    let cell = Arc::new(CellData::new(&m.to_material(10).unwrap(), 10, opts()).unwrap());
    let law = builtin_law(LawKind::ClippedGaussian).unwrap();
    let r = sweep(cell.clone(), &[3, 5, 9], law.expansion(), SweepOptions { second_order: false, ..Default::default() }).unwrap();
    assert!(r.first_differences.iter().all(|d| *d < 1e-12));
    let moments = law.moments().unwrap();
    let route = first_order_moment_route(&cell, moments.mean_b0);
    assert!((route.get(0, 0) - r.first[0].get(0, 0)).abs() < 1e-11);
    let exact = exact_orders(&m, law.expansion()).unwrap();
    assert!((route.get(0, 0) - exact.first).abs() < 1e-11);
}

#[test]
fn corrector_route_second_order_tends_to_exact_value() {
    // in 1D the truncated t_i has a piecewise-linear tail, so convergence in N is O(1/N)
    let m = two_phase();
    let cell = CellData::new(&m.to_material(10).unwrap(), 10, opts()).unwrap();
    let law = builtin_law(LawKind::ClippedGaussian).unwrap();
    let exact = exact_orders(&m, law.expansion()).unwrap();
    let moments = law.moments().unwrap();
    let errs: Vec<f64> = [5usize, 21, 81]
        .iter()
        .map(|&n| (moment_route(&cell, &moments, n).unwrap().1.get(0, 0) - exact.second).abs())
        .collect();
    assert!(errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
    assert!(errs[2] < 2e-2 * exact.second.abs(), "{errs:?}");
}

#[test]
fn monte_carlo_mean_approaches_harmonic_law() {
    let m = OneDMaterial::constant(2.0, 1.0).unwrap();
    let cell = CellData::new(&m.to_material(2).unwrap(), 2, opts()).unwrap();
    let law = builtin_law(LawKind::Bernoulli).unwrap();
    let eta = 0.3;
    let report = mc_reference(&cell, &law, eta, 2001, 8, 11).unwrap();
    let exact = weakhom_core::oned::exact_full(&m, &law, eta, &Integrator::default()).unwrap();
    // standard error of the 8-realization mean is about 2.7e-3
    assert!((report.mean.get(0, 0) - exact).abs() < 6e-3, "{} vs {exact}", report.mean.get(0, 0));
    assert!(report.max_duality_gap() < 1e-9);
}
