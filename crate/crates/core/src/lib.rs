//! Homogenization of weakly random perturbations of periodic materials.
//!
//! The coefficient of a realization is `A_per + Σ_k 1_{Q_k} s_k C_per` with
//! i.i.d. amplitudes `s_k` drawn from a law whose image measure expands as
//! `δ₀ + η dP̄₁ + η² dP̄₂`. The crate computes the effective tensor by Monte
//! Carlo on supercells and by the first and second order deterministic
//! corrections, in 1D and 2D.

pub mod corrector_route;
pub mod defect;
pub mod error;
pub mod fem;
pub mod law;
pub mod material;
pub mod oned;
pub mod periodic;
pub mod quadrature;
pub mod stochastic;
pub mod tensor;

pub use error::{Error, Result};
