//! Cell and supercell problems: correctors, source problems, fluxes and
//! amplitude-derivative solves.

use std::collections::HashMap;

use super::mesh::PeriodicMesh;
use super::operator::{assemble_load, element_gradients, StencilOperator};
use super::solver::{project_mean_zero, solve, SolveStats, SolverOptions};
use crate::error::{Error, Result};
use crate::material::{Material, PerturbedField, PeriodicTensorField};
use crate::tensor::{add, dot, unit, Tensor, Vector};

/// Nodal P1 solution on a periodic mesh with its element gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectorField {
    mesh: PeriodicMesh,
    values: Vec<f64>,
    gradients: Vec<Vector>,
    stats: SolveStats,
}

impl CorrectorField {
    pub fn from_values(mesh: &PeriodicMesh, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_nodes() {
            return Err(Error::ShapeMismatch(format!(
                "{} nodal values for {} nodes",
                values.len(),
                mesh.num_nodes()
            )));
        }
        project_mean_zero(&mut values);
        let gradients = element_gradients(mesh, &values);
        Ok(Self { mesh: *mesh, values, gradients, stats: SolveStats::default() })
    }

    pub fn zero(mesh: &PeriodicMesh) -> Self {
        Self {
            mesh: *mesh,
            values: vec![0.0; mesh.num_nodes()],
            gradients: vec![[0.0; 2]; mesh.num_elements()],
            stats: SolveStats::default(),
        }
    }

    pub fn mesh(&self) -> &PeriodicMesh {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn gradients(&self) -> &[Vector] {
        &self.gradients
    }

    #[inline]
    pub fn gradient(&self, e: usize) -> Vector {
        self.gradients[e]
    }

    /// Iterations and final relative residual of the solve that produced it.
    pub fn stats(&self) -> SolveStats {
        self.stats
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Periodic extension of a unit-cell solution to a supercell mesh.
    pub fn tile(&self, target: &PeriodicMesh) -> Result<Self> {
        if self.mesh.cells() != 1 || target.unit() != self.mesh {
            return Err(Error::ShapeMismatch("tiling needs a unit-cell field with matching m".into()));
        }
        let values = (0..target.num_nodes()).map(|k| self.values[target.unit_node(k)]).collect();
        let gradients = (0..target.num_elements()).map(|e| self.gradients[target.unit_element(e)]).collect();
        Ok(Self { mesh: *target, values, gradients, stats: self.stats })
    }

    /// The field translated by whole cells: `u(x - shift)`.
    pub fn translated(&self, shift: [i64; 2]) -> Self {
        if shift == [0, 0] {
            return self.clone();
        }
        let mesh = &self.mesh;
        let mut values = vec![0.0; self.values.len()];
        for (k, v) in self.values.iter().enumerate() {
            values[mesh.shift_node(k, shift)] = *v;
        }
        let eps = mesh.elements_per_square();
        let mut gradients = vec![[0.0; 2]; self.gradients.len()];
        for (e, g) in self.gradients.iter().enumerate() {
            let q = mesh.shift_node(e / eps, shift);
            gradients[q * eps + e % eps] = *g;
        }
        Self { mesh: self.mesh, values, gradients, stats: self.stats }
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &CorrectorField, b: f64) -> Result<Self> {
        if self.mesh != other.mesh {
            return Err(Error::ShapeMismatch("combining fields on different meshes".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        let gradients = self
            .gradients
            .iter()
            .zip(&other.gradients)
            .map(|(x, y)| [a * x[0] + b * y[0], a * x[1] + b * y[1]])
            .collect();
        Ok(Self { mesh: self.mesh, values, gradients, stats: self.stats })
    }

    /// `‖∇u‖_{L²}` over the cells listed, or the whole mesh for `None`.
    pub fn gradient_norm(&self, cells: Option<&[usize]>) -> f64 {
        let area = self.mesh.element_measure();
        let sq = |g: &Vector| dot(g, g);
        let total: f64 = match cells {
            None => self.gradients.iter().map(sq).sum(),
            Some(list) => list
                .iter()
                .flat_map(|&c| self.mesh.elements_in_cell(c))
                .map(|e| sq(&self.gradients[e]))
                .sum(),
        };
        (total * area).sqrt()
    }

    /// Maximum gradient difference between two fields on the same mesh.
    pub fn max_gradient_difference(&self, other: &CorrectorField) -> f64 {
        self.gradients
            .iter()
            .zip(&other.gradients)
            .map(|(a, b)| (a[0] - b[0]).abs().max((a[1] - b[1]).abs()))
            .fold(0.0, f64::max)
    }
}

/// Per-element constant flux `F`, entering the weak form as `-∫ F·∇v`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorLoadField {
    mesh: PeriodicMesh,
    values: Vec<Vector>,
}

impl VectorLoadField {
    pub fn zeros(mesh: &PeriodicMesh) -> Self {
        Self { mesh: *mesh, values: vec![[0.0; 2]; mesh.num_elements()] }
    }

    pub fn from_values(mesh: &PeriodicMesh, values: Vec<Vector>) -> Result<Self> {
        if values.len() != mesh.num_elements() {
            return Err(Error::ShapeMismatch(format!(
                "{} element loads for {} elements",
                values.len(),
                mesh.num_elements()
            )));
        }
        Ok(Self { mesh: *mesh, values })
    }

    pub fn mesh(&self) -> &PeriodicMesh {
        &self.mesh
    }

    pub fn values(&self) -> &[Vector] {
        &self.values
    }

    /// Adds `f(e)` on every element of unit cell `cell`.
    pub fn add_on_cell(&mut self, cell: usize, f: impl Fn(usize) -> Vector) {
        let mesh = self.mesh;
        for e in mesh.elements_in_cell(cell) {
            self.values[e] = add(&self.values[e], &f(e));
        }
    }

    /// Cells on which the load is nonzero.
    pub fn support_cells(&self) -> Vec<usize> {
        let mut cells: Vec<usize> = (0..self.values.len())
            .filter(|&e| self.values[e] != [0.0, 0.0])
            .map(|e| self.mesh.cell_of_element(e))
            .collect();
        cells.sort_unstable();
        cells.dedup();
        cells
    }
}

/// Assembled discrete problem `-div(A∇·)` on a periodic mesh.
#[derive(Debug, Clone)]
pub struct DiscreteProblem {
    mesh: PeriodicMesh,
    tensors: Vec<Tensor>,
    perturbation: Vec<Tensor>,
    operator: StencilOperator,
    options: SolverOptions,
}

impl DiscreteProblem {
    /// Problem for a realization on a supercell mesh.
    pub fn new(field: &PerturbedField, mesh: &PeriodicMesh, options: SolverOptions) -> Result<Self> {
        if field.dim() != mesh.dim() || field.cells() != mesh.cells() {
            return Err(Error::ShapeMismatch(format!(
                "field on {}^{} cells, mesh on {}^{}",
                field.cells(),
                field.dim(),
                mesh.cells(),
                mesh.dim()
            )));
        }
        let pert = &field.material().perturbation;
        let tensors = (0..mesh.num_squares())
            .map(|q| field.cell_tensor(mesh.cell_of_square(q), mesh.square_local_center(q)))
            .collect();
        let perturbation = (0..mesh.num_squares()).map(|q| pert.at(mesh.square_local_center(q))).collect();
        Ok(Self::from_tensors(mesh, tensors, perturbation, options))
    }

    /// Problem for a periodic field tiled over the mesh (no perturbation).
    pub fn periodic(field: &PeriodicTensorField, mesh: &PeriodicMesh, options: SolverOptions) -> Result<Self> {
        if field.dim() != mesh.dim() {
            return Err(Error::ShapeMismatch("field and mesh dimensions differ".into()));
        }
        let (lo, _) = field
            .pixels()
            .iter()
            .map(|t| t.symmetric_eigen_range(field.dim()))
            .fold((f64::INFINITY, 0.0), |acc, r| (acc.0.min(r.0), 0.0));
        if lo <= 0.0 {
            return Err(Error::NotCoercive { cell: None, amplitude: 0.0, eigenvalue: lo });
        }
        let tensors = (0..mesh.num_squares()).map(|q| field.at(mesh.square_local_center(q))).collect();
        let perturbation = vec![Tensor::ZERO; mesh.num_squares()];
        Ok(Self::from_tensors(mesh, tensors, perturbation, options))
    }

    /// Tiled `A_per` with `C_per` available for derivative loads.
    pub fn periodic_with_perturbation(material: &Material, mesh: &PeriodicMesh, options: SolverOptions) -> Result<Self> {
        let mut problem = Self::periodic(&material.base, mesh, options)?;
        problem.perturbation =
            (0..mesh.num_squares()).map(|q| material.perturbation.at(mesh.square_local_center(q))).collect();
        Ok(problem)
    }

    fn from_tensors(mesh: &PeriodicMesh, tensors: Vec<Tensor>, perturbation: Vec<Tensor>, options: SolverOptions) -> Self {
        let operator = StencilOperator::assemble(mesh, &tensors);
        Self { mesh: *mesh, tensors, perturbation, operator, options }
    }

    /// The same problem with transposed tensors.
    pub fn adjoint(&self) -> Self {
        let tensors = self.tensors.iter().map(Tensor::transpose).collect();
        let perturbation = self.perturbation.iter().map(Tensor::transpose).collect();
        Self::from_tensors(&self.mesh, tensors, perturbation, self.options)
    }

    pub fn mesh(&self) -> &PeriodicMesh {
        &self.mesh
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    pub fn operator(&self) -> &StencilOperator {
        &self.operator
    }

    #[inline]
    pub fn element_tensor(&self, e: usize) -> Tensor {
        self.tensors[self.mesh.square_of_element(e)]
    }

    /// `C_per` on element `e` (zero for purely periodic problems).
    #[inline]
    pub fn perturbation_tensor(&self, e: usize) -> Tensor {
        self.perturbation[self.mesh.square_of_element(e)]
    }

    pub fn is_symmetric(&self) -> bool {
        self.tensors.iter().all(|t| t.is_symmetric(1e-13))
    }

    /// Corrector `w_i`: `-div(A(∇w_i + e_i)) = 0`.
    pub fn solve_corrector(&self, direction: usize, initial: Option<&CorrectorField>) -> Result<CorrectorField> {
        self.check_direction(direction)?;
        let e_i = unit(direction);
        let load = (0..self.mesh.num_elements()).map(|e| self.element_tensor(e).apply(&e_i)).collect();
        self.solve_source(&VectorLoadField { mesh: self.mesh, values: load }, initial)
    }

    /// `-div(A∇u) = div(F)` with `F` the load.
    pub fn solve_source(&self, load: &VectorLoadField, initial: Option<&CorrectorField>) -> Result<CorrectorField> {
        if load.mesh != self.mesh {
            return Err(Error::ShapeMismatch("load assembled on a different mesh".into()));
        }
        let b = assemble_load(&self.mesh, &load.values);
        let guess = initial.filter(|c| c.mesh == self.mesh).map(|c| c.values.as_slice());
        let (values, stats) = solve(&self.operator, &b, guess, &self.options)?;
        let gradients = element_gradients(&self.mesh, &values);
        Ok(CorrectorField { mesh: self.mesh, values, gradients, stats })
    }

    /// Relative residual of `u` for the given load, recomputed from scratch.
    pub fn residual(&self, u: &CorrectorField, load: &VectorLoadField) -> f64 {
        let mut b = assemble_load(&self.mesh, &load.values);
        project_mean_zero(&mut b);
        let mut ku = vec![0.0; b.len()];
        self.operator.apply(&u.values, &mut ku);
        let r: f64 = ku.iter().zip(&b).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let bn: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        if bn == 0.0 {
            r
        } else {
            r / bn
        }
    }

    /// `(1/N^d) ∫ A(∇w_i + e_i)`.
    pub fn average_flux(&self, corrector: &CorrectorField, direction: usize) -> Result<Vector> {
        self.check_field(corrector)?;
        let e_i = unit(direction);
        let mut total = [0.0; 2];
        for e in 0..self.mesh.num_elements() {
            let f = self.element_tensor(e).apply(&add(&corrector.gradients[e], &e_i));
            total = add(&total, &f);
        }
        let scale = self.mesh.element_measure() / self.mesh.num_cells() as f64;
        Ok([total[0] * scale, total[1] * scale])
    }

    /// `(1/N^d) ∫ A(∇w_i + e_i)·(e_j + ∇w̃_j)`.
    pub fn energy_pairing(
        &self,
        primal: &CorrectorField,
        i: usize,
        adjoint: &CorrectorField,
        j: usize,
    ) -> Result<f64> {
        self.check_field(primal)?;
        self.check_field(adjoint)?;
        let (e_i, e_j) = (unit(i), unit(j));
        let mut total = 0.0;
        for e in 0..self.mesh.num_elements() {
            let f = self.element_tensor(e).apply(&add(&primal.gradients[e], &e_i));
            total += dot(&f, &add(&adjoint.gradients[e], &e_j));
        }
        Ok(total * self.mesh.element_measure() / self.mesh.num_cells() as f64)
    }

    /// Right-hand side flux of an amplitude-derivative problem:
    /// `Σ_l α_l 1_{Q_l} C ∇∂^{α-e_l} w̄` with `∇∂^0 w̄ = ∇w + e_i`.
    pub fn derivative_load(
        &self,
        direction: usize,
        cells: &[usize],
        orders: &[u32],
        lower: &HashMap<Vec<u32>, CorrectorField>,
    ) -> Result<VectorLoadField> {
        let mut prev = Vec::with_capacity(orders.len());
        for (l, &alpha) in orders.iter().enumerate() {
            if alpha == 0 {
                prev.push(None);
                continue;
            }
            let mut key = orders.to_vec();
            key[l] -= 1;
            prev.push(Some(lower.get(&key).ok_or(Error::MissingLowerOrder(key))?));
        }
        self.derivative_load_from(direction, cells, orders, &prev)
    }

    /// As [`Self::derivative_load`], with `lower[l]` the solution whose `l`-th
    /// order is one less (ignored where `orders[l] == 0`).
    pub fn derivative_load_from(
        &self,
        direction: usize,
        cells: &[usize],
        orders: &[u32],
        lower: &[Option<&CorrectorField>],
    ) -> Result<VectorLoadField> {
        self.check_direction(direction)?;
        if cells.len() != orders.len() || lower.len() != orders.len() {
            return Err(Error::ShapeMismatch("one derivative order per defect cell".into()));
        }
        if let Some(&c) = cells.iter().find(|&&c| c >= self.mesh.num_cells()) {
            return Err(Error::InvalidParameter(format!("defect cell {c} outside supercell")));
        }
        let e_i = unit(direction);
        let mut load = VectorLoadField::zeros(&self.mesh);
        for (l, &alpha) in orders.iter().enumerate() {
            if alpha == 0 {
                continue;
            }
            let mut key = orders.to_vec();
            key[l] -= 1;
            let prev = lower[l].ok_or_else(|| Error::MissingLowerOrder(key.clone()))?;
            self.check_field(prev)?;
            let base = key.iter().all(|&k| k == 0);
            let factor = alpha as f64;
            load.add_on_cell(cells[l], |e| {
                let g = if base { add(&prev.gradients[e], &e_i) } else { prev.gradients[e] };
                let f = self.perturbation_tensor(e).apply(&g);
                [factor * f[0], factor * f[1]]
            });
        }
        Ok(load)
    }

    fn check_direction(&self, direction: usize) -> Result<()> {
        if direction >= self.mesh.dim() {
            return Err(Error::InvalidParameter(format!("direction {direction} in dimension {}", self.mesh.dim())));
        }
        Ok(())
    }

    fn check_field(&self, field: &CorrectorField) -> Result<()> {
        if field.mesh != self.mesh {
            return Err(Error::ShapeMismatch("corrector computed on a different mesh".into()));
        }
        Ok(())
    }
}

/// Corrector of a realization for direction `i`.
pub fn solve_corrector(
    field: &PerturbedField,
    direction: usize,
    mesh: &PeriodicMesh,
    options: SolverOptions,
) -> Result<CorrectorField> {
    DiscreteProblem::new(field, mesh, options)?.solve_corrector(direction, None)
}

/// Source problem `-div(A∇u) = div(F)` for a realization.
pub fn solve_source(
    field: &PerturbedField,
    load: &VectorLoadField,
    mesh: &PeriodicMesh,
    options: SolverOptions,
) -> Result<CorrectorField> {
    DiscreteProblem::new(field, mesh, options)?.solve_source(load, None)
}

/// `(1/N^d) ∫ A(∇w_i + e_i)` for a realization.
pub fn average_flux(field: &PerturbedField, corrector: &CorrectorField, direction: usize) -> Result<Vector> {
    let problem = DiscreteProblem::new(field, corrector.mesh(), SolverOptions::default())?;
    problem.average_flux(corrector, direction)
}

/// Amplitude derivative `∂^α w_i` of the corrector of `field`, where the
/// defects sit at `cells` with multi-order `orders = α`. `lower` must hold
/// every `∂^{α-e_l} w_i` keyed by its order vector, the all-zero key being
/// the corrector itself.
pub fn derivative_corrector(
    problem: &DiscreteProblem,
    direction: usize,
    cells: &[usize],
    orders: &[u32],
    lower: &HashMap<Vec<u32>, CorrectorField>,
) -> Result<CorrectorField> {
    let load = problem.derivative_load(direction, cells, orders, lower)?;
    problem.solve_source(&load, None)
}
