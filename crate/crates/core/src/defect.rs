//! First and second order corrections from one- and two-defect supercell
//! problems and distributional actions in the amplitude variables.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{CorrectorField, DiscreteProblem, PeriodicMesh, SolverOptions};
use crate::law::{ExpansionTerm, PointMassExpansion};
use crate::material::{field_with_defects, Material};
use crate::periodic::{solve_periodic, EffectiveTensor, PeriodicSolution, Provenance};
use crate::tensor::{add, dot, unit, Tensor, Vector};

/// A perturbed cell at torus offset `offset` with amplitude `amplitude`,
/// differentiated `order` times in that amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Defect {
    pub offset: [i64; 2],
    pub amplitude: f64,
    pub order: u32,
}

impl Defect {
    pub fn new(offset: [i64; 2], amplitude: f64, order: u32) -> Self {
        Self { offset, amplitude, order }
    }

    fn active(&self) -> bool {
        self.amplitude != 0.0 || self.order > 0
    }
}

type Key = (usize, Vec<(usize, u64, u32)>);

/// Unit-cell data shared by every supercell size.
#[derive(Debug, Clone)]
pub struct CellData {
    pub material: Material,
    pub unit_mesh: PeriodicMesh,
    pub options: SolverOptions,
    pub periodic: PeriodicSolution,
    /// `C_perᵀ(e_j + ∇w̃_j⁰)` per unit-cell element, per `j`.
    weights: Vec<Vec<Vector>>,
}

impl CellData {
    pub fn new(material: &Material, per_cell: usize, options: SolverOptions) -> Result<Self> {
        let unit_mesh = PeriodicMesh::new(material.dim(), 1, per_cell)?;
        Self::with_mesh(material, &unit_mesh, options)
    }

    pub fn with_mesh(material: &Material, unit_mesh: &PeriodicMesh, options: SolverOptions) -> Result<Self> {
        let periodic = solve_periodic(material, unit_mesh, options)?;
        let dim = material.dim();
        let weights = (0..dim)
            .map(|j| {
                let e_j = unit(j);
                (0..unit_mesh.num_elements())
                    .map(|e| {
                        let c = material.perturbation.at(unit_mesh.square_local_center(unit_mesh.square_of_element(e)));
                        c.transpose().apply(&add(&e_j, &periodic.adjoint[j].gradient(e)))
                    })
                    .collect()
            })
            .collect();
        Ok(Self { material: material.clone(), unit_mesh: *unit_mesh, options, periodic, weights })
    }

    pub fn dim(&self) -> usize {
        self.material.dim()
    }

    /// `∫_Q C_per ∇φ·(e_j + ∇w̃_j⁰)` over cell 0 of `field`'s mesh, with
    /// `e_i` added to the gradient when `shift` is given.
    pub fn cell_pairing(&self, field: &CorrectorField, shift: Option<usize>, j: usize) -> f64 {
        self.pairing_on_cell(field, 0, shift, j)
    }

    /// As [`Self::cell_pairing`], reading `field` on torus cell `cell`.
    pub fn pairing_on_cell(&self, field: &CorrectorField, cell: usize, shift: Option<usize>, j: usize) -> f64 {
        let mesh = field.mesh();
        let area = mesh.element_measure();
        let e_i = shift.map(unit).unwrap_or([0.0; 2]);
        let w = &self.weights[j];
        mesh.elements_in_cell(cell)
            .map(|e| dot(&add(&field.gradient(e), &e_i), &w[mesh.unit_element(e)]))
            .sum::<f64>()
            * area
    }
}

/// Memoized defect and amplitude-derivative solutions on one supercell.
///
/// Only configurations with at most one active defect are kept; they are
/// shared by every offset of the two-defect sums.
pub struct DefectProblemCache {
    cell: Arc<CellData>,
    mesh: PeriodicMesh,
    tiled: Vec<CorrectorField>,
    store: Mutex<HashMap<Key, Arc<CorrectorField>>>,
    solves: Mutex<usize>,
}

impl DefectProblemCache {
    pub fn new(cell: Arc<CellData>, cells: usize) -> Result<Self> {
        let unit = cell.unit_mesh;
        let mesh = PeriodicMesh::with_diagonal(unit.dim(), cells, unit.per_cell(), unit.diagonal())?;
        let tiled = cell.periodic.correctors.iter().map(|w| w.tile(&mesh)).collect::<Result<Vec<_>>>()?;
        Ok(Self { cell, mesh, tiled, store: Mutex::new(HashMap::new()), solves: Mutex::new(0) })
    }

    pub fn cell_data(&self) -> &CellData {
        &self.cell
    }

    pub fn mesh(&self) -> &PeriodicMesh {
        &self.mesh
    }

    /// Supercell size `N`.
    pub fn cells(&self) -> usize {
        self.mesh.cells()
    }

    /// Number of linear solves performed so far.
    pub fn solve_count(&self) -> usize {
        *self.solves.lock().expect("solve counter")
    }

    /// `w⁰` periodically extended to the supercell.
    pub fn tiled_corrector(&self, direction: usize) -> &CorrectorField {
        &self.tiled[direction]
    }

    /// Assembled problem for a defect configuration (offsets are torus cells).
    pub fn problem(&self, defects: &[Defect]) -> Result<DiscreteProblem> {
        let list: Vec<(usize, f64)> =
            defects.iter().filter(|d| d.amplitude != 0.0).map(|d| (self.mesh.cell_index(d.offset), d.amplitude)).collect();
        let field = field_with_defects(&self.cell.material, self.cells(), &list)?;
        DiscreteProblem::new(&field, &self.mesh, self.cell.options)
    }

    /// `∂^α w_i` for the configuration, `α` being the defects' orders.
    pub fn solution(&self, direction: usize, defects: &[Defect]) -> Result<Arc<CorrectorField>> {
        let mut local = HashMap::new();
        self.solution_with(direction, defects, &mut local)
    }

    fn solution_with(
        &self,
        direction: usize,
        defects: &[Defect],
        local: &mut HashMap<Key, Arc<CorrectorField>>,
    ) -> Result<Arc<CorrectorField>> {
        if direction >= self.mesh.dim() {
            return Err(Error::InvalidParameter(format!("direction {direction}")));
        }
        let active: Vec<Defect> = defects.iter().copied().filter(Defect::active).collect();
        if active.is_empty() {
            return Ok(Arc::new(self.tiled[direction].clone()));
        }
        let shift = active[0].offset;
        let normalized: Vec<Defect> = active
            .iter()
            .map(|d| Defect { offset: [d.offset[0] - shift[0], d.offset[1] - shift[1]], ..*d })
            .collect();
        let key: Key = (
            direction,
            normalized.iter().map(|d| (self.mesh.cell_index(d.offset), d.amplitude.to_bits(), d.order)).collect(),
        );
        let shared = normalized.len() == 1;
        let found = if shared {
            self.store.lock().expect("defect cache").get(&key).cloned()
        } else {
            local.get(&key).cloned()
        };
        let field = match found {
            Some(f) => f,
            None => {
                let f = Arc::new(self.compute(direction, &normalized, local)?);
                if shared {
                    self.store.lock().expect("defect cache").entry(key).or_insert_with(|| f.clone());
                } else {
                    local.insert(key, f.clone());
                }
                f
            }
        };
        let back = [shift[0].rem_euclid(self.cells() as i64), shift[1].rem_euclid(self.cells() as i64)];
        if back == [0, 0] {
            Ok(field)
        } else {
            Ok(Arc::new(field.translated(back)))
        }
    }

    fn compute(
        &self,
        direction: usize,
        defects: &[Defect],
        local: &mut HashMap<Key, Arc<CorrectorField>>,
    ) -> Result<CorrectorField> {
        let problem = self.problem(defects)?;
        let result = if defects.iter().all(|d| d.order == 0) {
            let warm = if defects.len() > 1 {
                self.solution_with(direction, &defects[..defects.len() - 1], local)?
            } else {
                Arc::new(self.tiled[direction].clone())
            };
            problem.solve_corrector(direction, Some(&warm))?
        } else {
            let cells: Vec<usize> = defects.iter().map(|d| self.mesh.cell_index(d.offset)).collect();
            let orders: Vec<u32> = defects.iter().map(|d| d.order).collect();
            let mut lower = Vec::with_capacity(defects.len());
            for l in 0..defects.len() {
                if defects[l].order == 0 {
                    lower.push(None);
                    continue;
                }
                let mut reduced = defects.to_vec();
                reduced[l].order -= 1;
                lower.push(Some(self.solution_with(direction, &reduced, local)?));
            }
            let refs: Vec<Option<&CorrectorField>> = lower.iter().map(|o| o.as_deref()).collect();
            let load = problem.derivative_load_from(direction, &cells, &orders, &refs)?;
            problem.solve_source(&load, None)?
        };
        *self.solves.lock().expect("solve counter") += 1;
        Ok(result)
    }

    /// `g^{(k)}(s) = ∫_Q C ∇∂_s^k w̄·(e_j + ∇w̃_j⁰)` for a single defect at the
    /// origin, with `∇∂^0 w̄ = ∇w + e_i`, for all `j`.
    fn single_moments(&self, i: usize, s: f64, k: u32) -> Result<Vector> {
        let sol = self.solution(i, &[Defect::new([0, 0], s, k)])?;
        let shift = if k == 0 { Some(i) } else { None };
        let mut out = [0.0; 2];
        for (j, o) in out.iter_mut().enumerate().take(self.mesh.dim()) {
            *o = self.cell_data().cell_pairing(&sol, shift, j);
        }
        Ok(out)
    }

    /// `d^k/ds^k F(s)` with `F(s) = ∫_Q s C(∇w^{1,s} + e_i)·(e_j + ∇w̃_j⁰)`.
    pub fn f_derivative(&self, i: usize, s: f64, k: u32) -> Result<Vector> {
        let mut out = [0.0; 2];
        if s != 0.0 {
            let g = self.single_moments(i, s, k)?;
            out = [s * g[0], s * g[1]];
        }
        if k > 0 {
            let g = self.single_moments(i, s, k - 1)?;
            out = [out[0] + k as f64 * g[0], out[1] + k as f64 * g[1]];
        }
        Ok(out)
    }

    /// `⟨terms, F⟩` as a matrix.
    pub fn single_defect_action(&self, terms: &[ExpansionTerm]) -> Result<Tensor> {
        let dim = self.mesh.dim();
        let mut m = Tensor::ZERO;
        for t in terms {
            let sign = if t.derivative % 2 == 0 { 1.0 } else { -1.0 };
            for i in 0..dim {
                let f = self.f_derivative(i, t.location, t.derivative)?;
                for j in 0..dim {
                    m.0[j][i] += t.weight * sign * f[j];
                }
            }
        }
        Ok(m)
    }

    /// Pair contribution of one offset:
    /// `Σ_{m,n} c_m c_n (-1)^{k_m+l_n} ∂_s^{k_m} ∂_t^{l_n} G(s_m, t_n)` with
    /// `G(s,t) = ∫_Q s C ∇w^{2,s,t,0,k}·(e_j + ∇w̃_j⁰)`.
    pub fn pair_action(&self, offset: [i64; 2], terms: &[ExpansionTerm]) -> Result<Tensor> {
        let dim = self.mesh.dim();
        if self.mesh.cell_index(offset) == 0 {
            return Err(Error::InvalidParameter("pair offset must differ from the origin".into()));
        }
        let mut m = Tensor::ZERO;
        for i in 0..dim {
            let mut local = HashMap::new();
            let h = |a: u32, s: f64, b: u32, t: f64, local: &mut HashMap<Key, Arc<CorrectorField>>| -> Result<Vector> {
                let sol = self.solution_with(i, &[Defect::new([0, 0], s, a), Defect::new(offset, t, b)], local)?;
                let mut out = [0.0; 2];
                for (j, o) in out.iter_mut().enumerate().take(dim) {
                    *o = self.cell_data().cell_pairing(&sol, None, j);
                }
                Ok(out)
            };
            for tm in terms {
                for tn in terms {
                    let (s, a, t, b) = (tm.location, tm.derivative, tn.location, tn.derivative);
                    let mut d = [0.0; 2];
                    if s != 0.0 {
                        let v = h(a, s, b, t, &mut local)?;
                        d = [s * v[0], s * v[1]];
                    }
                    if a > 0 {
                        let v = h(a - 1, s, b, t, &mut local)?;
                        d = [d[0] + a as f64 * v[0], d[1] + a as f64 * v[1]];
                    }
                    let sign = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
                    let w = tm.weight * tn.weight * sign;
                    for j in 0..dim {
                        m.0[j][i] += w * d[j];
                    }
                }
            }
        }
        Ok(m)
    }

    /// Offsets `k ≠ 0` of the supercell sorted by distance to the origin,
    /// then lexicographically.
    pub fn pair_offsets(&self) -> Vec<[i64; 2]> {
        let mut offsets: Vec<[i64; 2]> =
            (1..self.mesh.num_cells()).map(|c| self.mesh.cell_offset(c)).collect();
        offsets.sort_by_key(|o| (o[0] * o[0] + o[1] * o[1], o[1], o[0]));
        offsets
    }
}

/// Result of the second-order computation.
#[derive(Debug, Clone)]
pub struct SecondOrder {
    pub tensor: EffectiveTensor,
    /// Pair contributions per offset, in [`DefectProblemCache::pair_offsets`] order.
    pub per_offset: Vec<([i64; 2], Tensor)>,
    pub offsets_total: usize,
    /// `true` when the budget cut the offset sum short.
    pub truncated: bool,
}

/// `A₁*,N` from the reduced single-cell form.
pub fn first_order(cache: &DefectProblemCache, expansion: &PointMassExpansion) -> Result<EffectiveTensor> {
    let m = cache.single_defect_action(expansion.order1())?;
    Ok(EffectiveTensor::new(cache.mesh().dim(), m, Provenance::DefectOrder1))
}

/// `A₂*,N`: pair sum over offsets plus the second-order single-defect term.
/// At most `budget` offsets (nearest first) are evaluated.
pub fn second_order(
    cache: &DefectProblemCache,
    expansion: &PointMassExpansion,
    budget: Option<usize>,
) -> Result<SecondOrder> {
    let offsets = cache.pair_offsets();
    let total = offsets.len();
    let used = budget.map_or(total, |b| b.min(total));
    let terms = expansion.order1();
    let per_offset: Vec<([i64; 2], Tensor)> = if terms.is_empty() {
        Vec::new()
    } else {
        let work = &offsets[..used];
        #[cfg(feature = "parallel")]
        let iter = work.par_iter();
        #[cfg(not(feature = "parallel"))]
        let iter = work.iter();
        iter.map(|&o| cache.pair_action(o, terms).map(|t| (o, t))).collect::<Result<Vec<_>>>()?
    };
    let mut m = cache.single_defect_action(expansion.order2())?;
    for (_, t) in &per_offset {
        m = m + *t;
    }
    Ok(SecondOrder {
        tensor: EffectiveTensor::new(cache.mesh().dim(), m, Provenance::DefectOrder2),
        per_offset,
        offsets_total: total,
        truncated: used < total && !terms.is_empty(),
    })
}

/// Per-N corrections with convergence diagnostics.
#[derive(Debug, Clone)]
pub struct ExpansionResult {
    pub sizes: Vec<usize>,
    pub first: Vec<EffectiveTensor>,
    /// `(N, A₂*,N)` for the sizes within the pair budget.
    pub second: Vec<(usize, SecondOrder)>,
    /// `max |A₁*,N_{k+1} - A₁*,N_k|` between successive sizes.
    pub first_differences: Vec<f64>,
    pub second_differences: Vec<f64>,
    pub periodic: EffectiveTensor,
}

impl ExpansionResult {
    /// `Ā₁*`, taken as the value at the largest size.
    pub fn first_limit(&self) -> Option<&EffectiveTensor> {
        self.first.last()
    }

    /// `Ā₂*`, taken as the value at the largest size computed.
    pub fn second_limit(&self) -> Option<&EffectiveTensor> {
        self.second.last().map(|(_, s)| &s.tensor)
    }
}

/// Options of [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub second_order: bool,
    /// Largest `N` for which the second order is computed.
    pub max_pair_cells: usize,
    /// Per-`N` cap on the number of pair offsets.
    pub pair_budget: Option<usize>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { second_order: true, max_pair_cells: 25, pair_budget: None }
    }
}

/// First (and optionally second) order corrections for ascending sizes.
pub fn sweep(
    cell: Arc<CellData>,
    sizes: &[usize],
    expansion: &PointMassExpansion,
    options: SweepOptions,
) -> Result<ExpansionResult> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("sizes must be ascending and non-empty".into()));
    }
    let mut first = Vec::new();
    let mut second = Vec::new();
    for &n in sizes {
        let cache = DefectProblemCache::new(cell.clone(), n)?;
        first.push(first_order(&cache, expansion)?);
        if options.second_order && n <= options.max_pair_cells {
            second.push((n, second_order(&cache, expansion, options.pair_budget)?));
        }
    }
    let diff = |a: &EffectiveTensor, b: &EffectiveTensor| (a.entries - b.entries).max_abs();
    let first_differences = first.windows(2).map(|w| diff(&w[0], &w[1])).collect();
    let second_differences = second.windows(2).map(|w| diff(&w[0].1.tensor, &w[1].1.tensor)).collect();
    Ok(ExpansionResult {
        sizes: sizes.to_vec(),
        first,
        second,
        first_differences,
        second_differences,
        periodic: cell.periodic.tensor,
    })
}

/// Energy norms entering the a priori bounds on `q^{1,s,0,N} = w^{1,s,0,N} - w⁰`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefectBoundCheck {
    pub amplitude: f64,
    pub direction: usize,
    /// `‖∇q‖_{L²(I_N)}`.
    pub q_norm: f64,
    /// `‖∇∂_s q‖_{L²(I_N)}`.
    pub dq_norm: f64,
    /// `‖∇w⁰ + e_i‖_{L²(Q)}`.
    pub reference: f64,
    /// `M ‖C_per‖_∞ / α`.
    pub c0: f64,
    /// `(M + 1) ‖C_per‖_∞ / α`.
    pub c1: f64,
}

impl DefectBoundCheck {
    pub fn holds(&self) -> bool {
        self.q_norm <= self.c0 * self.reference * (1.0 + 1e-9) && self.dq_norm <= self.c1 * self.reference * (1.0 + 1e-9)
    }
}

/// Evaluates the energy bounds for one amplitude, with `α` and `M` from
/// `bounds`.
pub fn defect_bound_check(
    cache: &DefectProblemCache,
    direction: usize,
    amplitude: f64,
    alpha: f64,
    bound: f64,
) -> Result<DefectBoundCheck> {
    let w = cache.solution(direction, &[Defect::new([0, 0], amplitude, 0)])?;
    let dw = cache.solution(direction, &[Defect::new([0, 0], amplitude, 1)])?;
    let q = w.combine(1.0, cache.tiled_corrector(direction), -1.0)?;
    let w0 = &cache.cell_data().periodic.correctors[direction];
    let unit_mesh = w0.mesh();
    let e_i = unit(direction);
    let reference = ((0..unit_mesh.num_elements())
        .map(|e| {
            let g = add(&w0.gradient(e), &e_i);
            dot(&g, &g)
        })
        .sum::<f64>()
        * unit_mesh.element_measure())
    .sqrt();
    let c_norm = cache.cell_data().material.perturbation.sup_norm();
    Ok(DefectBoundCheck {
        amplitude,
        direction,
        q_norm: q.gradient_norm(None),
        dq_norm: dw.gradient_norm(None),
        reference,
        c0: bound * c_norm / alpha,
        c1: (bound + 1.0) * c_norm / alpha,
    })
}

/// `‖∇q^{1,s} - ∇q^{1,s'}‖_{L²(I_N)}` against `(M + 1)‖C_per‖_∞/α ‖∇w⁰ + e_i‖ |s - s'|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzCheck {
    pub s: f64,
    pub t: f64,
    pub difference: f64,
    pub bound: f64,
}

impl LipschitzCheck {
    pub fn holds(&self) -> bool {
        self.difference <= self.bound * (1.0 + 1e-9)
    }
}

pub fn defect_lipschitz_check(
    cache: &DefectProblemCache,
    direction: usize,
    s: f64,
    t: f64,
    alpha: f64,
    bound: f64,
) -> Result<LipschitzCheck> {
    let a = cache.solution(direction, &[Defect::new([0, 0], s, 0)])?;
    let b = cache.solution(direction, &[Defect::new([0, 0], t, 0)])?;
    let at_s = defect_bound_check(cache, direction, s, alpha, bound)?;
    Ok(LipschitzCheck {
        s,
        t,
        difference: a.combine(1.0, &b, -1.0)?.gradient_norm(None),
        bound: at_s.c1 * at_s.reference * (s - t).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::{builtin_law, LawKind};
    use crate::material::PeriodicTensorField;

    fn oned(a: f64, c: f64) -> Arc<CellData> {
        let base = PeriodicTensorField::constant(1, 10, Tensor::scalar(1, a)).unwrap();
        let pert = PeriodicTensorField::constant(1, 10, Tensor::scalar(1, c)).unwrap();
        let mat = Material::new(base, pert).unwrap();
        Arc::new(CellData::new(&mat, 10, SolverOptions { tolerance: 1e-13, ..Default::default() }).unwrap())
    }

    #[test]
    fn one_d_bernoulli_matches_finite_n_harmonic_means() {
        let cell = oned(2.0, 1.0);
        let law = builtin_law(LawKind::Bernoulli).unwrap();
        for n in [3usize, 5] {
            let cache = DefectProblemCache::new(cell.clone(), n).unwrap();
            let nf = n as f64;
            let a1 = first_order(&cache, law.expansion()).unwrap();
            assert!((a1.get(0, 0) - 2.0 * nf / (3.0 * nf - 1.0)).abs() < 1e-9, "{a1:?}");
            let a2 = second_order(&cache, law.expansion(), None).unwrap();
            let expected = 2.0 * nf * (nf - 1.0) / ((3.0 * nf - 2.0) * (3.0 * nf - 1.0));
            assert!((a2.tensor.get(0, 0) - expected).abs() < 1e-9, "{:?}", a2.tensor);
            assert!(!a2.truncated);
            // in 1D every offset contributes the same amount
            let first = a2.per_offset[0].1.get(0, 0);
            assert!(a2.per_offset.iter().all(|(_, t)| (t.get(0, 0) - first).abs() < 1e-10));
        }
    }

    #[test]
    fn zero_perturbation_gives_zero_corrections() {
        let cell = oned(2.0, 0.0);
        let law = builtin_law(LawKind::BernoulliMinusUniform).unwrap();
        let cache = DefectProblemCache::new(cell, 3).unwrap();
        assert_eq!(first_order(&cache, law.expansion()).unwrap().max_abs(), 0.0);
        assert!(second_order(&cache, law.expansion(), None).unwrap().tensor.max_abs() < 1e-14);
    }

    #[test]
    fn budget_truncates_pair_sum() {
        let cell = oned(2.0, 1.0);
        let law = builtin_law(LawKind::Bernoulli).unwrap();
        let cache = DefectProblemCache::new(cell, 5).unwrap();
        let a2 = second_order(&cache, law.expansion(), Some(2)).unwrap();
        assert!(a2.truncated);
        assert_eq!(a2.per_offset.len(), 2);
        assert_eq!(a2.offsets_total, 4);
    }

    #[test]
    fn f_derivative_matches_finite_difference() {
        let cell = oned(2.0, 1.0);
        let cache = DefectProblemCache::new(cell, 3).unwrap();
        let h = 1e-4;
        for s in [0.0, 0.4] {
            let d = cache.f_derivative(0, s, 1).unwrap()[0];
            let fd = (cache.f_derivative(0, s + h, 0).unwrap()[0] - cache.f_derivative(0, s - h, 0).unwrap()[0]) / (2.0 * h);
            assert!((d - fd).abs() < 1e-7 * d.abs().max(1.0), "{d} {fd}");
        }
    }

    #[test]
    fn cache_reuses_single_defect_solutions() {
        let cell = oned(2.0, 1.0);
        let cache = DefectProblemCache::new(cell, 3).unwrap();
        cache.solution(0, &[Defect::new([1, 0], 0.5, 1)]).unwrap();
        let after = cache.solve_count();
        let shifted = cache.solution(0, &[Defect::new([0, 0], 0.5, 1)]).unwrap();
        assert_eq!(cache.solve_count(), after);
        let direct = cache.solution(0, &[Defect::new([-1, 0], 0.5, 1)]).unwrap();
        assert!(shifted.translated([2, 0]).max_gradient_difference(&direct) < 1e-14);
    }
}
