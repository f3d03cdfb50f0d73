//! P1 finite elements on structured periodic grids.

pub mod corrector;
pub mod mesh;
pub mod operator;
pub mod solver;

pub use corrector::{
    average_flux, derivative_corrector, solve_corrector, solve_source, CorrectorField, DiscreteProblem,
    VectorLoadField,
};
pub use mesh::{Diagonal, PeriodicMesh};
pub use operator::StencilOperator;
pub use solver::{PreconditionerKind, SolveStats, SolverOptions};
