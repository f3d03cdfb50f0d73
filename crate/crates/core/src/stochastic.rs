//! Monte Carlo supercell reference `A_η*,N`.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::defect::CellData;
use crate::error::{Error, Result};
use crate::fem::{DiscreteProblem, PeriodicMesh};
use crate::law::PerturbationLaw;
use crate::material::realize_field;
use crate::periodic::{voigt_reuss, EffectiveTensor, Provenance};
use crate::tensor::Tensor;

/// One homogenized realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub index: u64,
    pub tensor: EffectiveTensor,
    /// `max_{i,j} |flux form - energy form| / max |A|`.
    pub duality_gap: f64,
    pub iterations: usize,
}

/// Aggregated Monte Carlo estimate for one `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct McReport {
    pub cells: usize,
    pub eta: f64,
    pub seed: u64,
    pub mean: Tensor,
    pub min: Tensor,
    pub max: Tensor,
    pub realizations: Vec<Realization>,
}

impl McReport {
    /// Aggregates realizations in index order.
    pub fn aggregate(cells: usize, eta: f64, seed: u64, mut realizations: Vec<Realization>) -> Result<Self> {
        if realizations.is_empty() {
            return Err(Error::InvalidParameter("at least one realization is required".into()));
        }
        realizations.sort_by_key(|r| r.index);
        let mut mean = Tensor::ZERO;
        let mut min = Tensor([[f64::INFINITY; 2]; 2]);
        let mut max = Tensor([[f64::NEG_INFINITY; 2]; 2]);
        for r in &realizations {
            mean = mean + r.tensor.entries;
            for a in 0..2 {
                for b in 0..2 {
                    min.0[a][b] = min.0[a][b].min(r.tensor.entries.0[a][b]);
                    max.0[a][b] = max.0[a][b].max(r.tensor.entries.0[a][b]);
                }
            }
        }
        mean = mean * (1.0 / realizations.len() as f64);
        Ok(Self { cells, eta, seed, mean, min, max, realizations })
    }

    pub fn count(&self) -> usize {
        self.realizations.len()
    }

    pub fn mean_tensor(&self, dim: usize) -> EffectiveTensor {
        EffectiveTensor::new(dim, self.mean, Provenance::MonteCarlo)
    }

    /// Every realization lies between its Voigt and Reuss bounds.
    pub fn within_bounds(&self, tol: f64) -> bool {
        self.realizations.iter().all(|r| r.tensor.within_voigt_reuss(tol))
    }

    pub fn max_duality_gap(&self) -> f64 {
        self.realizations.iter().map(|r| r.duality_gap).fold(0.0, f64::max)
    }
}

/// Homogenizes realization `index` (amplitudes from substream `index` of `seed`).
pub fn homogenize_realization(
    cell: &CellData,
    law: &PerturbationLaw,
    eta: f64,
    cells: usize,
    seed: u64,
    index: u64,
) -> Result<Realization> {
    let unit = cell.unit_mesh;
    let mesh = PeriodicMesh::with_diagonal(unit.dim(), cells, unit.per_cell(), unit.diagonal())?;
    let dim = mesh.dim();
    let amplitudes = law.sample_cells(eta, mesh.num_cells(), seed, index)?;
    let field = realize_field(&cell.material, amplitudes, cells)?;
    let problem = DiscreteProblem::new(&field, &mesh, cell.options)?;
    let mut correctors = Vec::with_capacity(dim);
    let mut iterations = 0;
    for i in 0..dim {
        let warm = cell.periodic.correctors[i].tile(&mesh)?;
        let w = problem.solve_corrector(i, Some(&warm))?;
        iterations += w.stats().iterations;
        correctors.push(w);
    }
    let adjoint = if problem.is_symmetric() {
        correctors.clone()
    } else {
        let adj = problem.adjoint();
        (0..dim).map(|j| adj.solve_corrector(j, None)).collect::<Result<Vec<_>>>()?
    };
    let (voigt, reuss) = voigt_reuss(&problem)?;
    let tensor = EffectiveTensor::from_pairings(dim, Provenance::MonteCarlo, |i, j| Ok(problem.average_flux(&correctors[i], i)?[j]))?
        .with_bounds(voigt, reuss);
    let mut gap: f64 = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            let energy = problem.energy_pairing(&correctors[i], i, &adjoint[j], j)?;
            gap = gap.max((energy - tensor.get(j, i)).abs());
        }
    }
    Ok(Realization { index, tensor, duality_gap: gap / tensor.max_abs().max(f64::MIN_POSITIVE), iterations })
}

/// `realizations` independent supercell homogenizations on `I_N`.
pub fn mc_reference(
    cell: &CellData,
    law: &PerturbationLaw,
    eta: f64,
    cells: usize,
    realizations: usize,
    seed: u64,
) -> Result<McReport> {
    let indices: Vec<u64> = (0..realizations as u64).collect();
    #[cfg(feature = "parallel")]
    let iter = indices.par_iter();
    #[cfg(not(feature = "parallel"))]
    let iter = indices.iter();
    let results = iter.map(|&r| homogenize_realization(cell, law, eta, cells, seed, r)).collect::<Result<Vec<_>>>()?;
    McReport::aggregate(cells, eta, seed, results)
}

/// Reports for ascending sizes and the successive mean differences
/// `max |mean_{k+1} - mean_k|`.
pub fn sweep_mc(
    cell: &CellData,
    law: &PerturbationLaw,
    eta: f64,
    sizes: &[usize],
    realizations: usize,
    seed: u64,
) -> Result<(Vec<McReport>, Vec<f64>)> {
    let reports = sizes.iter().map(|&n| mc_reference(cell, law, eta, n, realizations, seed)).collect::<Result<Vec<_>>>()?;
    let diffs = reports.windows(2).map(|w| (w[1].mean - w[0].mean).max_abs()).collect();
    Ok((reports, diffs))
}

/// Rough count of unknowns solved for, used to flag runs above desk scale.
pub fn workload(dim: usize, per_cell: usize, sizes: &[usize], realizations: usize) -> f64 {
    sizes.iter().map(|&n| ((n * per_cell) as f64).powi(dim as i32) * dim as f64 * realizations as f64).sum()
}

/// `true` when a sweep needs more than about `10⁸` unknown-solves.
pub fn above_desk_scale(dim: usize, per_cell: usize, sizes: &[usize], realizations: usize) -> bool {
    workload(dim, per_cell, sizes, realizations) > 1e8
}
