//! Reduced single-cell forms against full supercell integrals, and
//! amplitude derivatives against finite differences.

use std::sync::Arc;

use weakhom_core::defect::{first_order, second_order, CellData, Defect, DefectProblemCache};
use weakhom_core::fem::SolverOptions;
use weakhom_core::law::{builtin_law, ExpansionTerm, LawKind, PointMassExpansion};
use weakhom_core::material::{make_inclusion_material, Material, PeriodicTensorField};
use weakhom_core::tensor::{add, unit, Tensor};

fn opts() -> SolverOptions {
    SolverOptions { tolerance: 1e-13, ..Default::default() }
}

fn inclusion(m: usize) -> Arc<CellData> {
    let mat = make_inclusion_material(20.0, 100.0, 0.3, m).unwrap();
    Arc::new(CellData::new(&mat, m, opts()).unwrap())
}

fn nonsymmetric(m: usize) -> Arc<CellData> {
    let base = PeriodicTensorField::new_general(
        2,
        m,
        (0..m * m)
            .map(|p| {
                let skew = if (p / m) % 2 == 0 { 0.6 } else { -0.4 };
                Tensor([[3.0 + (p % m) as f64 * 0.2, skew], [-0.5 * skew, 2.0]])
            })
            .collect(),
    )
    .unwrap();
    let pert = PeriodicTensorField::from_fn(2, m, |x| if x[0] * x[0] + x[1] * x[1] < 0.09 { Tensor::scalar(2, -1.2) } else { Tensor::ZERO }).unwrap();
    Arc::new(CellData::new(&Material::new(base, pert).unwrap(), m, opts()).unwrap())
}

/// `∂^α ∫_{I_N} A(∇w_i + e_i)·e_j` for the configuration, assembled over the
/// whole supercell from the product rule in the amplitudes.
fn full_flux(cache: &DefectProblemCache, i: usize, defects: &[Defect]) -> [f64; 2] {
    let problem = cache.problem(defects).unwrap();
    let mesh = *cache.mesh();
    let sol = cache.solution(i, defects).unwrap();
    let base = defects.iter().all(|d| d.order == 0);
    let e_i = unit(i);
    let mut total = [0.0; 2];
    for e in 0..mesh.num_elements() {
        let g = if base { add(&sol.gradient(e), &e_i) } else { sol.gradient(e) };
        let f = problem.element_tensor(e).apply(&g);
        total = add(&total, &f);
    }
    for (l, d) in defects.iter().enumerate() {
        if d.order == 0 {
            continue;
        }
        let mut lower = defects.to_vec();
        lower[l].order -= 1;
        let prev = cache.solution(i, &lower).unwrap();
        let prev_base = lower.iter().all(|d| d.order == 0);
        let cell = mesh.cell_index(d.offset);
        for e in mesh.elements_in_cell(cell) {
            let g = if prev_base { add(&prev.gradient(e), &e_i) } else { prev.gradient(e) };
            let f = problem.perturbation_tensor(e).apply(&g);
            total = add(&total, &[d.order as f64 * f[0], d.order as f64 * f[1]]);
        }
    }
    let area = mesh.element_measure();
    [total[0] * area, total[1] * area]
}

fn sign(k: u32) -> f64 {
    if k % 2 == 0 { 1.0 } else { -1.0 }
}

fn full_first_order(cache: &DefectProblemCache, terms: &[ExpansionTerm]) -> Tensor {
    let mut m = Tensor::ZERO;
    for t in terms {
        for i in 0..2 {
            let f = full_flux(cache, i, &[Defect::new([0, 0], t.location, t.derivative)]);
            for j in 0..2 {
                m.0[j][i] += t.weight * sign(t.derivative) * f[j];
            }
        }
    }
    m
}

fn full_second_order(cache: &DefectProblemCache, expansion: &PointMassExpansion) -> Tensor {
    let mut m = full_first_order(cache, expansion.order2());
    for c in 1..cache.mesh().num_cells() {
        let k = cache.mesh().cell_offset(c);
        for tm in expansion.order1() {
            for tn in expansion.order1() {
                for i in 0..2 {
                    let f = full_flux(
                        cache,
                        i,
                        &[Defect::new([0, 0], tm.location, tm.derivative), Defect::new(k, tn.location, tn.derivative)],
                    );
                    let w = 0.5 * tm.weight * tn.weight * sign(tm.derivative + tn.derivative);
                    for j in 0..2 {
                        m.0[j][i] += w * f[j];
                    }
                }
            }
        }
    }
    m
}

#[test]
fn reduced_first_order_matches_full_integral() {
    for cell in [inclusion(6), nonsymmetric(6)] {
        let cache = DefectProblemCache::new(cell, 3).unwrap();
        for kind in [LawKind::Bernoulli, LawKind::ClippedGaussian, LawKind::BernoulliMinusUniform] {
            let e = builtin_law(kind).unwrap().expansion().clone();
            let reduced = first_order(&cache, &e).unwrap().entries;
            let full = full_first_order(&cache, e.order1());
            assert!((reduced - full).max_abs() < 1e-8 * full.max_abs().max(1.0), "{kind:?}: {reduced:?} vs {full:?}");
        }
    }
}

#[test]
fn reduced_second_order_matches_full_integral() {
    for cell in [inclusion(6), nonsymmetric(6)] {
        let cache = DefectProblemCache::new(cell, 3).unwrap();
        for kind in [LawKind::Bernoulli, LawKind::BernoulliMinusUniform] {
            let e = builtin_law(kind).unwrap().expansion().clone();
            let reduced = second_order(&cache, &e, None).unwrap().tensor.entries;
            let full = full_second_order(&cache, &e);
            assert!((reduced - full).max_abs() < 1e-7 * full.max_abs().max(1.0), "{kind:?}: {reduced:?} vs {full:?}");
        }
    }
}

#[test]
fn bernoulli_reduces_to_differences_of_evaluations() {
    let cache = DefectProblemCache::new(inclusion(6), 3).unwrap();
    let e = builtin_law(LawKind::Bernoulli).unwrap().expansion().clone();
    let reduced = first_order(&cache, &e).unwrap();
    for i in 0..2 {
        let one = full_flux(&cache, i, &[Defect::new([0, 0], 1.0, 0)]);
        let zero = full_flux(&cache, i, &[]);
        for j in 0..2 {
            assert!((reduced.get(j, i) - (one[j] - zero[j])).abs() < 1e-8 * reduced.max_abs());
        }
    }
}

fn rel(a: &weakhom_core::fem::CorrectorField, b: &weakhom_core::fem::CorrectorField) -> f64 {
    a.max_gradient_difference(b) / b.gradients().iter().map(|g| g[0].abs().max(g[1].abs())).fold(0.0, f64::max)
}

#[test]
fn amplitude_derivatives_match_finite_differences() {
    let cache = DefectProblemCache::new(inclusion(6), 3).unwrap();
    let h = 1e-4;
    let fd = |order: u32, s: f64, i: usize| {
        let p = cache.solution(i, &[Defect::new([0, 0], s + h, order)]).unwrap();
        let m = cache.solution(i, &[Defect::new([0, 0], s - h, order)]).unwrap();
        p.combine(0.5 / h, &m, -0.5 / h).unwrap()
    };
    for s in [0.0, 0.5] {
        for i in 0..2 {
            let d1 = cache.solution(i, &[Defect::new([0, 0], s, 1)]).unwrap();
            assert!(rel(&fd(0, s, i), &d1) < 1e-5);
            let d2 = cache.solution(i, &[Defect::new([0, 0], s, 2)]).unwrap();
            assert!(rel(&fd(1, s, i), &d2) < 1e-5);
        }
    }
    // mixed derivative of a two-defect problem
    let k = [1, 0];
    for (s, t) in [(0.0, 0.0), (1.0, 0.5)] {
        let mixed = cache.solution(0, &[Defect::new([0, 0], s, 1), Defect::new(k, t, 1)]).unwrap();
        let p = cache.solution(0, &[Defect::new([0, 0], s, 1), Defect::new(k, t + h, 0)]).unwrap();
        let m = cache.solution(0, &[Defect::new([0, 0], s, 1), Defect::new(k, t - h, 0)]).unwrap();
        let fd = p.combine(0.5 / h, &m, -0.5 / h).unwrap();
        assert!(rel(&fd, &mixed) < 1e-5);
    }
}

#[test]
fn pair_solutions_satisfy_their_problems() {
    let cache = DefectProblemCache::new(inclusion(6), 3).unwrap();
    let defects = [Defect::new([0, 0], 0.7, 0), Defect::new([-1, 1], -0.3, 0)];
    let problem = cache.problem(&defects).unwrap();
    let sol = cache.solution(1, &defects).unwrap();
    let direct = problem.solve_corrector(1, None).unwrap();
    assert!(rel(&sol, &direct) < 1e-9);
}

#[test]
fn zero_expansions_and_perturbations_give_zero() {
    let cache = DefectProblemCache::new(inclusion(6), 3).unwrap();
    let gauss = builtin_law(LawKind::BernoulliGaussian).unwrap();
    assert_eq!(first_order(&cache, gauss.expansion()).unwrap().max_abs(), 0.0);
    assert_eq!(second_order(&cache, gauss.expansion(), None).unwrap().tensor.max_abs(), 0.0);
}

#[test]
fn energy_bounds_hold_on_small_supercell() {
    let mat = make_inclusion_material(20.0, 100.0, 0.3, 6).unwrap();
    let bounds = mat.bounds(weakhom_core::material::AmplitudeRange::symmetric(1.1)).unwrap();
    let cache = DefectProblemCache::new(Arc::new(CellData::new(&mat, 6, opts()).unwrap()), 3).unwrap();
    for s in [-0.5, 0.5, 1.0] {
        for i in 0..2 {
            let check = weakhom_core::defect::defect_bound_check(&cache, i, s, bounds.alpha, 1.1).unwrap();
            assert!(check.holds(), "{check:?}");
        }
    }
}

#[test]
fn lipschitz_bound_holds_on_sampled_pairs() {
    let mat = make_inclusion_material(20.0, 100.0, 0.3, 6).unwrap();
    let bounds = mat.bounds(weakhom_core::material::AmplitudeRange::symmetric(1.1)).unwrap();
    let cache = DefectProblemCache::new(Arc::new(CellData::new(&mat, 6, opts()).unwrap()), 3).unwrap();
    for (s, t) in [(-0.5, 0.5), (0.5, 1.0), (-1.0, 1.0)] {
        let check = weakhom_core::defect::defect_lipschitz_check(&cache, 0, s, t, bounds.alpha, 1.1).unwrap();
        assert!(check.holds(), "{check:?}");
    }
}
