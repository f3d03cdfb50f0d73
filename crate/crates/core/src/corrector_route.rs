//! Moment-based corrections: the deterministic cell problems for `t_i`, `s_i`
//! and the tensors they produce.

use crate::defect::CellData;
use crate::error::{Error, Result};
use crate::fem::{CorrectorField, DiscreteProblem, PeriodicMesh, VectorLoadField};
use crate::law::LawMoments;
use crate::periodic::{EffectiveTensor, Provenance};
use crate::tensor::{add, unit, Tensor};

/// `∫_Q C_per(∇w_i⁰ + e_i)·(∇w̃_j⁰ + e_j)` as a matrix (`[j][i]`).
pub fn base_pairing(cell: &CellData) -> Tensor {
    let mut m = Tensor::ZERO;
    for i in 0..cell.dim() {
        for j in 0..cell.dim() {
            m.0[j][i] = cell.cell_pairing(&cell.periodic.correctors[i], Some(i), j);
        }
    }
    m
}

/// `Ã₁* = E(B̄₀) ∫_Q C_per(∇w_i⁰ + e_i)·(∇w̃_j⁰ + e_j)`.
pub fn first_order_moment_route(cell: &CellData, mean_b0: f64) -> EffectiveTensor {
    EffectiveTensor::new(cell.dim(), base_pairing(cell) * mean_b0, Provenance::CorrectorRoute)
}

/// Truncated `t_i` on `I_N` with its outer-layer diagnostic.
#[derive(Debug, Clone)]
pub struct TruncatedCorrector {
    pub field: CorrectorField,
    /// `‖∇t_i‖` over the outermost ring of cells.
    pub outer_layer_norm: f64,
    pub total_norm: f64,
}

fn cell_load(problem: &DiscreteProblem, base: &CorrectorField, direction: usize, cells: &[usize]) -> VectorLoadField {
    let mesh = *problem.mesh();
    let e_i = unit(direction);
    let mut load = VectorLoadField::zeros(&mesh);
    for &c in cells {
        load.add_on_cell(c, |e| problem.perturbation_tensor(e).apply(&add(&base.gradient(mesh.unit_element(e)), &e_i)));
    }
    load
}

/// `-div(A_per ∇t_i) = div(1_Q C_per(∇w_i⁰ + e_i))` on `I_N` with periodic
/// conditions.
pub fn solve_t_i(cell: &CellData, direction: usize, cells: usize) -> Result<TruncatedCorrector> {
    let unit_mesh = cell.unit_mesh;
    let mesh = PeriodicMesh::with_diagonal(unit_mesh.dim(), cells, unit_mesh.per_cell(), unit_mesh.diagonal())?;
    let problem = DiscreteProblem::periodic_with_perturbation(&cell.material, &mesh, cell.options)?;
    let load = cell_load(&problem, &cell.periodic.correctors[direction], direction, &[0]);
    let field = problem.solve_source(&load, None)?;
    let ring = (0..mesh.num_cells()).map(|c| mesh.cell_offset(c)).map(|o| o[0].abs().max(o[1].abs())).max().unwrap_or(0);
    let outer: Vec<usize> = (0..mesh.num_cells())
        .filter(|&c| {
            let o = mesh.cell_offset(c);
            o[0].abs().max(o[1].abs()) == ring
        })
        .collect();
    let outer_layer_norm = if ring == 0 { 0.0 } else { field.gradient_norm(Some(&outer)) };
    let total_norm = field.gradient_norm(None);
    Ok(TruncatedCorrector { field, outer_layer_norm, total_norm })
}

/// `-div(A_per ∇s_i) = div(C_per(∇w_i⁰ + e_i))` on the unit cell.
pub fn solve_s_i(cell: &CellData, direction: usize) -> Result<CorrectorField> {
    let problem = DiscreteProblem::periodic_with_perturbation(&cell.material, &cell.unit_mesh, cell.options)?;
    let load = cell_load(&problem, &cell.periodic.correctors[direction], direction, &[0]);
    problem.solve_source(&load, None)
}

/// `Ã₂*` from the law moments, the truncated `t_i`, `s_i` and the
/// covariances `cov(B̄₀, B̄₀(τ_k ·))` for offsets `k ≠ 0` (empty for i.i.d.
/// cells).
pub fn second_order_moment_route(
    cell: &CellData,
    moments: &LawMoments,
    t: &[TruncatedCorrector],
    s: &[CorrectorField],
    covariances: &[([i64; 2], f64)],
) -> Result<EffectiveTensor> {
    let dim = cell.dim();
    if t.len() != dim || s.len() != dim {
        return Err(Error::ShapeMismatch("one t_i and one s_i per direction".into()));
    }
    let mesh = *t[0].field.mesh();
    let core = (mesh.cells() as i64 - 1) / 2 - 1;
    for &(k, _) in covariances {
        if k == [0, 0] {
            return Err(Error::InvalidParameter("offset 0 is the variance term".into()));
        }
        if k[0].abs().max(k[1].abs()) > core {
            return Err(Error::TruncationTooSmall { offset: k, core });
        }
    }
    let base = base_pairing(cell);
    let mut m = base * moments.mean_r0;
    for i in 0..dim {
        for j in 0..dim {
            let mut v = moments.var_b0 * cell.cell_pairing(&t[i].field, None, j)
                + moments.mean_b0 * moments.mean_b0 * cell.cell_pairing(&s[i], None, j);
            for &(k, cov) in covariances {
                let c = mesh.cell_index([-k[0], -k[1]]);
                v += cov * cell.pairing_on_cell(&t[i].field, c, None, j);
            }
            m.0[j][i] += v;
        }
    }
    Ok(EffectiveTensor::new(dim, m, Provenance::CorrectorRoute))
}

/// Both corrections of the moment route with `t_i` truncated to `cells`.
pub fn moment_route(cell: &CellData, moments: &LawMoments, cells: usize) -> Result<(EffectiveTensor, EffectiveTensor)> {
    let dim = cell.dim();
    let t = (0..dim).map(|i| solve_t_i(cell, i, cells)).collect::<Result<Vec<_>>>()?;
    let s = (0..dim).map(|i| solve_s_i(cell, i)).collect::<Result<Vec<_>>>()?;
    Ok((first_order_moment_route(cell, moments.mean_b0), second_order_moment_route(cell, moments, &t, &s, &[])?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::defect::{Defect, DefectProblemCache};
    use crate::fem::SolverOptions;
    use crate::material::{make_inclusion_material, Material, PeriodicTensorField};
    use std::sync::Arc;

    fn opts() -> SolverOptions {
        SolverOptions { tolerance: 1e-12, ..Default::default() }
    }

    fn inclusion(m: usize) -> Arc<CellData> {
        let mat = make_inclusion_material(20.0, 100.0, 0.3, m).unwrap();
        Arc::new(CellData::new(&mat, m, opts()).unwrap())
    }

    #[test]
    fn one_d_constants_give_mu_times_c() {
        let base = PeriodicTensorField::constant(1, 4, Tensor::scalar(1, 2.0)).unwrap();
        let pert = PeriodicTensorField::constant(1, 4, Tensor::scalar(1, 1.0)).unwrap();
        let cell = CellData::new(&Material::new(base, pert).unwrap(), 4, opts()).unwrap();
        assert!((first_order_moment_route(&cell, 0.37).get(0, 0) - 0.37).abs() < 1e-12);
        assert_eq!(first_order_moment_route(&cell, 0.0).max_abs(), 0.0);
        // constant coefficients make the load divergence free
        let s = solve_s_i(&cell, 0).unwrap();
        assert!(s.gradient_norm(None) < 1e-12);
    }

    #[test]
    fn zero_perturbation_gives_zero_fields() {
        let mat = make_inclusion_material(20.0, 0.0, 0.3, 6).unwrap();
        let cell = CellData::new(&mat, 6, opts()).unwrap();
        assert_eq!(solve_t_i(&cell, 0, 3).unwrap().total_norm, 0.0);
        assert_eq!(solve_s_i(&cell, 1).unwrap().gradient_norm(None), 0.0);
    }

    #[test]
    fn t_i_is_the_first_amplitude_derivative_at_zero() {
        let cell = inclusion(6);
        let cache = DefectProblemCache::new(cell.clone(), 3).unwrap();
        for i in 0..2 {
            let t = solve_t_i(&cell, i, 3).unwrap();
            let d = cache.solution(i, &[Defect::new([0, 0], 0.0, 1)]).unwrap();
            assert!(t.field.max_gradient_difference(&d) < 1e-8);
            assert!(t.outer_layer_norm < t.total_norm);
        }
    }

    #[test]
    fn summed_pair_derivatives_give_s_i() {
        let cell = inclusion(6);
        let n = 3;
        let cache = DefectProblemCache::new(cell.clone(), n).unwrap();
        for i in 0..2 {
            let mut sum = CorrectorField::zero(cache.mesh());
            for c in 0..cache.mesh().num_cells() {
                let k = cache.mesh().cell_offset(c);
                let d = cache.solution(i, &[Defect::new([0, 0], 0.0, 0), Defect::new(k, 0.0, 1)]).unwrap();
                sum = sum.combine(1.0, &d, 1.0).unwrap();
            }
            let s = solve_s_i(&cell, i).unwrap().tile(cache.mesh()).unwrap();
            assert!(sum.max_gradient_difference(&s) < 1e-8);
        }
    }

    #[test]
    fn mean_corrector_reproduces_first_order() {
        // -div(A_per ∇v) = div(μ C_per(∇w⁰ + e_i)) on Q, then ∫ μC(∇w⁰+e_i)·e_j + A_per∇v·e_j
        let cell = inclusion(8);
        let mu = 0.4;
        let expected = first_order_moment_route(&cell, mu);
        let problem = DiscreteProblem::periodic_with_perturbation(&cell.material, &cell.unit_mesh, opts()).unwrap();
        let mesh = cell.unit_mesh;
        for i in 0..2 {
            let v = solve_s_i(&cell, i).unwrap();
            let w = &cell.periodic.correctors[i];
            for j in 0..2 {
                let mut total = 0.0;
                for e in 0..mesh.num_elements() {
                    let c = problem.perturbation_tensor(e).apply(&add(&w.gradient(e), &unit(i)));
                    let a = problem.element_tensor(e).apply(&v.gradient(e));
                    total += mu * (c[j] + a[j]) * mesh.element_measure();
                }
                assert!((total - expected.get(j, i)).abs() < 1e-8 * expected.max_abs(), "{total} {expected:?}");
            }
        }
    }

    #[test]
    fn covariance_offsets_outside_core_are_rejected() {
        let cell = inclusion(4);
        let t = (0..2).map(|i| solve_t_i(&cell, i, 5).unwrap()).collect::<Vec<_>>();
        let s = (0..2).map(|i| solve_s_i(&cell, i).unwrap()).collect::<Vec<_>>();
        let m = LawMoments { mean_b0: 0.3, var_b0: 0.2, mean_b0_sq: 0.29, mean_r0: 0.0 };
        assert!(second_order_moment_route(&cell, &m, &t, &s, &[([1, 0], 0.1)]).is_ok());
        assert!(matches!(
            second_order_moment_route(&cell, &m, &t, &s, &[([2, 0], 0.1)]),
            Err(Error::TruncationTooSmall { .. })
        ));
        let zero = second_order_moment_route(&cell, &LawMoments::zero(), &t, &s, &[]).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
    }
}
