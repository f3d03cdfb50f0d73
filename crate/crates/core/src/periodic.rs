//! Periodic homogenized tensor and adjoint correctors on the unit cell.

use crate::error::{Error, Result};
use crate::fem::{CorrectorField, DiscreteProblem, PeriodicMesh, SolverOptions};
use crate::material::{Material, PeriodicTensorField};
use crate::tensor::Tensor;

/// Where an effective tensor comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Periodic,
    MonteCarlo,
    DefectOrder1,
    DefectOrder2,
    CorrectorRoute,
}

impl Provenance {
    pub fn tag(&self) -> &'static str {
        match self {
            Provenance::Periodic => "periodic",
            Provenance::MonteCarlo => "mc",
            Provenance::DefectOrder1 => "defect-order-1",
            Provenance::DefectOrder2 => "defect-order-2",
            Provenance::CorrectorRoute => "corrector-route",
        }
    }
}

/// A d×d matrix whose column `i` is `A e_i`, i.e. `entries[j][i] = A e_i·e_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveTensor {
    pub dim: usize,
    pub entries: Tensor,
    pub provenance: Provenance,
    /// Arithmetic mean of the coefficient (upper bound).
    pub voigt: Option<Tensor>,
    /// Harmonic mean of the coefficient (lower bound).
    pub reuss: Option<Tensor>,
}

impl EffectiveTensor {
    pub fn new(dim: usize, entries: Tensor, provenance: Provenance) -> Self {
        Self { dim, entries, provenance, voigt: None, reuss: None }
    }

    /// Builds the matrix from `pairing(i, j) = A e_i·e_j`.
    pub fn from_pairings(dim: usize, provenance: Provenance, mut pairing: impl FnMut(usize, usize) -> Result<f64>) -> Result<Self> {
        let mut entries = Tensor::ZERO;
        for i in 0..dim {
            for j in 0..dim {
                entries.0[j][i] = pairing(i, j)?;
            }
        }
        Ok(Self::new(dim, entries, provenance))
    }

    pub fn with_bounds(mut self, voigt: Tensor, reuss: Tensor) -> Self {
        self.voigt = Some(voigt);
        self.reuss = Some(reuss);
        self
    }

    /// Matrix entry `(row, col)`.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries.0[row][col]
    }

    /// Reuss ≤ A ≤ Voigt in the Loewner order (symmetric parts), with a
    /// relative tolerance.
    pub fn within_voigt_reuss(&self, tol: f64) -> bool {
        match (self.voigt, self.reuss) {
            (Some(v), Some(r)) => {
                let scale = v.max_abs();
                v.dominates(&self.entries, self.dim, tol * scale) && self.entries.dominates(&r, self.dim, tol * scale)
            }
            _ => true,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.max_abs()
    }
}

/// Voigt and Reuss bounds `(1/N^d)∫A` and `((1/N^d)∫A⁻¹)⁻¹` of an assembled problem.
pub fn voigt_reuss(problem: &DiscreteProblem) -> Result<(Tensor, Tensor)> {
    let mesh = problem.mesh();
    let dim = mesh.dim();
    let weight = mesh.element_measure() / mesh.num_cells() as f64;
    let mut mean = Tensor::ZERO;
    let mut inv_mean = Tensor::ZERO;
    for e in 0..mesh.num_elements() {
        let a = problem.element_tensor(e);
        mean = mean + a * weight;
        let inv = a.inverse(dim).ok_or(Error::NotCoercive { cell: None, amplitude: 0.0, eigenvalue: 0.0 })?;
        inv_mean = inv_mean + inv * weight;
    }
    let reuss = inv_mean.inverse(dim).ok_or_else(|| Error::InvalidParameter("singular harmonic mean".into()))?;
    Ok((mean, reuss))
}

/// Unit-cell correctors and the periodic homogenized tensor.
#[derive(Debug, Clone)]
pub struct PeriodicSolution {
    pub tensor: EffectiveTensor,
    /// `w_i⁰`, one per direction.
    pub correctors: Vec<CorrectorField>,
    /// `w̃_j⁰` of the transposed tensor.
    pub adjoint: Vec<CorrectorField>,
}

/// `A_per*` and the correctors `w_i⁰` on the given (usually single-cell) mesh.
pub fn periodic_tensor(
    field: &PeriodicTensorField,
    mesh: &PeriodicMesh,
    options: SolverOptions,
) -> Result<(EffectiveTensor, Vec<CorrectorField>)> {
    let problem = DiscreteProblem::periodic(field, mesh, options)?;
    let correctors = (0..mesh.dim()).map(|i| problem.solve_corrector(i, None)).collect::<Result<Vec<_>>>()?;
    let (voigt, reuss) = voigt_reuss(&problem)?;
    let tensor = EffectiveTensor::from_pairings(mesh.dim(), Provenance::Periodic, |i, j| {
        Ok(problem.average_flux(&correctors[i], i)?[j])
    })?
    .with_bounds(voigt, reuss);
    Ok((tensor, correctors))
}

/// Correctors `w̃_j⁰` of `A_perᵀ`.
pub fn adjoint_correctors(
    field: &PeriodicTensorField,
    mesh: &PeriodicMesh,
    options: SolverOptions,
) -> Result<Vec<CorrectorField>> {
    let problem = DiscreteProblem::periodic(&field.transpose(), mesh, options)?;
    (0..mesh.dim()).map(|j| problem.solve_corrector(j, None)).collect()
}

/// Periodic tensor, correctors and adjoint correctors of `A_per` on the
/// unit-cell mesh with `m` nodes per edge. Adjoints are copies of the primal
/// correctors when `A_per` is symmetric.
pub fn solve_periodic(material: &Material, unit_mesh: &PeriodicMesh, options: SolverOptions) -> Result<PeriodicSolution> {
    if unit_mesh.cells() != 1 {
        return Err(Error::InvalidParameter("the periodic cell problem lives on a single cell".into()));
    }
    let (tensor, correctors) = periodic_tensor(&material.base, unit_mesh, options)?;
    let adjoint = if material.base.is_symmetric() {
        correctors.clone()
    } else {
        adjoint_correctors(&material.base, unit_mesh, options)?
    };
    Ok(PeriodicSolution { tensor, correctors, adjoint })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::Diagonal;
    use crate::material::make_laminate_material;

    #[test]
    fn constant_tensor_is_reproduced() {
        let field = PeriodicTensorField::constant(2, 4, Tensor::scalar(2, 3.5)).unwrap();
        let mesh = PeriodicMesh::new(2, 1, 4).unwrap();
        let (t, w) = periodic_tensor(&field, &mesh, SolverOptions::default()).unwrap();
        assert!((t.entries - Tensor::scalar(2, 3.5)).max_abs() < 1e-12);
        assert!(w.iter().all(|c| c.values().iter().all(|v| v.abs() < 1e-12)));
        let adj = adjoint_correctors(&field, &mesh, SolverOptions::default()).unwrap();
        assert!(adj.iter().all(|c| c.values().iter().all(|v| v.abs() < 1e-12)));
    }

    #[test]
    fn one_d_half_cells_give_harmonic_mean() {
        let pixels = vec![Tensor::scalar(1, 5.0), Tensor::scalar(1, 15.0)];
        let field = PeriodicTensorField::new(1, 2, pixels).unwrap();
        let mesh = PeriodicMesh::new(1, 1, 10).unwrap();
        let (t, _) = periodic_tensor(&field, &mesh, SolverOptions::default()).unwrap();
        assert!((t.get(0, 0) - 7.5).abs() < 1e-10);
    }

    #[test]
    fn laminate_harmonic_across_arithmetic_along() {
        let mat = make_laminate_material(5.0, 15.0, 10).unwrap();
        for diag in [Diagonal::Main, Diagonal::Anti] {
            let mesh = PeriodicMesh::with_diagonal(2, 1, 10, diag).unwrap();
            let (t, _) = periodic_tensor(&mat.base, &mesh, SolverOptions::default()).unwrap();
            assert!((t.get(0, 0) - 7.5).abs() < 1e-8, "{t:?}");
            assert!((t.get(1, 1) - 10.0).abs() < 1e-8, "{t:?}");
            assert!(t.get(0, 1).abs() < 1e-8);
            assert!(t.within_voigt_reuss(1e-12));
        }
    }

    #[test]
    fn symmetric_adjoint_matches_primal() {
        let mat = crate::material::make_inclusion_material(20.0, 100.0, 0.3, 10).unwrap();
        let mesh = PeriodicMesh::new(2, 1, 10).unwrap();
        let (_, w) = periodic_tensor(&mat.base, &mesh, SolverOptions::default()).unwrap();
        let wt = adjoint_correctors(&mat.base, &mesh, SolverOptions::default()).unwrap();
        for (a, b) in w.iter().zip(&wt) {
            assert!(a.max_gradient_difference(b) <= 1e-8);
        }
    }

    #[test]
    fn nonsymmetric_adjoint_differs_but_duality_holds() {
        let field = PeriodicTensorField::from_fn(2, 8, |x| {
            let off = if x[0] > 0.0 { 0.8 } else { -0.3 };
            Tensor([[2.0 + x[1], off], [0.0, 1.5]])
        })
        .unwrap();
        let mesh = PeriodicMesh::new(2, 1, 8).unwrap();
        let opts = SolverOptions { tolerance: 1e-13, ..Default::default() };
        let (t, w) = periodic_tensor(&field, &mesh, opts).unwrap();
        let wt = adjoint_correctors(&field, &mesh, opts).unwrap();
        let gap = w[0].max_gradient_difference(&wt[0]).max(w[1].max_gradient_difference(&wt[1]));
        assert!(gap > 1e-3, "{gap}");
        let problem = DiscreteProblem::periodic(&field, &mesh, opts).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let paired = problem.energy_pairing(&w[i], i, &wt[j], j).unwrap();
                assert!((paired - t.entries.0[j][i]).abs() < 1e-10 * t.max_abs());
            }
        }
    }
}
