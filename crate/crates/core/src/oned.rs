//! Closed-form one-dimensional homogenization: harmonic means, the map
//! `f(s) = ∫ s c / (a (a + s c))` and the exact expansion coefficients.

use crate::error::{Error, Result};
use crate::law::{act, PerturbationLaw, PointMassExpansion, SmoothFn};
use crate::material::{Material, PeriodicTensorField};
use crate::quadrature::Integrator;
use crate::tensor::Tensor;

/// Piecewise-constant `a_per`, `c_per` on `[-1/2, 1/2]`, pieces listed left
/// to right as `(length, a, c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneDMaterial {
    pieces: Vec<(f64, f64, f64)>,
}

impl OneDMaterial {
    pub fn new(pieces: Vec<(f64, f64, f64)>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidParameter("no pieces".into()));
        }
        let total: f64 = pieces.iter().map(|p| p.0).sum();
        if pieces.iter().any(|p| !(p.0 > 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("piece lengths must be positive and sum to 1, got {total}")));
        }
        if let Some(p) = pieces.iter().find(|p| !(p.1 > 0.0)) {
            return Err(Error::NotCoercive { cell: None, amplitude: 0.0, eigenvalue: p.1 });
        }
        Ok(Self { pieces })
    }

    /// Constant `a`, `c` on the whole cell.
    pub fn constant(a: f64, c: f64) -> Result<Self> {
        Self::new(vec![(1.0, a, c)])
    }

    pub fn pieces(&self) -> &[(f64, f64, f64)] {
        &self.pieces
    }

    /// Smallest `a + s c` over pieces and `s ∈ {lo, hi}`.
    pub fn coercivity(&self, lo: f64, hi: f64) -> f64 {
        self.pieces.iter().flat_map(|&(_, a, c)| [a + lo * c, a + hi * c]).fold(f64::INFINITY, f64::min)
    }

    /// `∫ (a + s c)⁻¹`.
    pub fn inverse_mean(&self, s: f64) -> f64 {
        self.pieces.iter().map(|&(l, a, c)| l / (a + s * c)).sum()
    }

    /// Rasterized to `resolution` pixels; exact when every breakpoint falls
    /// on a pixel boundary.
    pub fn to_material(&self, resolution: usize) -> Result<Material> {
        let mut a = Vec::with_capacity(resolution);
        let mut c = Vec::with_capacity(resolution);
        for p in 0..resolution {
            let x = (p as f64 + 0.5) / resolution as f64;
            let mut acc = 0.0;
            let piece = self
                .pieces
                .iter()
                .find(|piece| {
                    acc += piece.0;
                    x < acc
                })
                .unwrap_or_else(|| self.pieces.last().expect("non-empty"));
            a.push(Tensor::scalar(1, piece.1));
            c.push(Tensor::scalar(1, piece.2));
        }
        Material::new(PeriodicTensorField::new(1, resolution, a)?, PeriodicTensorField::new(1, resolution, c)?)
    }
}

/// `a_per* = (∫ a_per⁻¹)⁻¹`.
pub fn exact_a_star(material: &OneDMaterial) -> f64 {
    1.0 / material.inverse_mean(0.0)
}

/// `f(s) = ∫ s c / (a (a + s c)) = ∫ a⁻¹ - ∫ (a + s c)⁻¹` with derivatives of
/// any order.
#[derive(Debug, Clone, Copy)]
pub struct FOfS<'a> {
    material: &'a OneDMaterial,
}

impl SmoothFn for FOfS<'_> {
    fn derivative(&self, order: u32, s: f64) -> Option<f64> {
        Some(f_of_s(self.material, s, order))
    }
}

/// `f^{(k)}(s)`.
pub fn f_of_s(material: &OneDMaterial, s: f64, k: u32) -> f64 {
    if k == 0 {
        return material.pieces.iter().map(|&(l, a, c)| l * s * c / (a * (a + s * c))).sum();
    }
    // d^k/ds^k of -1/(a + s c) = (-1)^{k+1} k! c^k / (a + s c)^{k+1}
    let fact: f64 = (1..=k).map(f64::from).product();
    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
    material
        .pieces
        .iter()
        .map(|&(l, a, c)| l * sign * fact * c.powi(k as i32) / (a + s * c).powi(k as i32 + 1))
        .sum()
}

pub fn f_function(material: &OneDMaterial) -> FOfS<'_> {
    FOfS { material }
}

/// `(a_per*, ā₁*, ā₂*)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactOrders {
    pub a_star: f64,
    pub first: f64,
    pub second: f64,
}

impl ExactOrders {
    pub fn predict(&self, eta: f64) -> f64 {
        self.a_star + eta * self.first + eta * eta * self.second
    }
}

/// `ā₁* = a*²⟨dP̄₁, f⟩`, `ā₂* = a*³⟨dP̄₁, f⟩² + a*²⟨dP̄₂, f⟩`.
pub fn exact_orders(material: &OneDMaterial, expansion: &PointMassExpansion) -> Result<ExactOrders> {
    let a = exact_a_star(material);
    let f = f_function(material);
    let p1 = act(expansion.order1(), &f)?;
    let p2 = act(expansion.order2(), &f)?;
    Ok(ExactOrders { a_star: a, first: a * a * p1, second: a * a * a * p1 * p1 + a * a * p2 })
}

/// `a_η* = (E ∫ (a + B_η c)⁻¹)⁻¹`.
pub fn exact_full(material: &OneDMaterial, law: &PerturbationLaw, eta: f64, integrator: &Integrator) -> Result<f64> {
    let support = law.support(eta)?;
    if material.coercivity(support.lo, support.hi) <= 0.0 {
        return Err(Error::NotCoercive { cell: None, amplitude: support.lo, eigenvalue: material.coercivity(support.lo, support.hi) });
    }
    let inv = law.exact_expectation(eta, &|s| material.inverse_mean(s), integrator)?;
    Ok(1.0 / inv)
}

/// `E(B_η^k)` for `k = 0..=k_max`.
pub fn raw_moments(law: &PerturbationLaw, eta: f64, k_max: usize, integrator: &Integrator) -> Result<Vec<f64>> {
    (0..=k_max).map(|k| law.exact_expectation(eta, &|s| s.powi(k as i32), integrator)).collect()
}

/// `Σ_{k ≤ k_max} (-1)^k E(B_η^k) ∫ (c/a)^k a⁻¹`, an approximation of
/// `1/a_η*`. Converges when `M ‖c/a‖_∞ < 1`.
pub fn series_partial_sum(material: &OneDMaterial, moments: &[f64]) -> f64 {
    moments
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * m * material.pieces.iter().map(|&(l, a, c)| l * (c / a).powi(k as i32) / a).sum::<f64>()
        })
        .sum()
}

/// Truncated bivariate Taylor series `Σ c[a][b] x^a y^b`, `a, b ≤ order`.
#[derive(Debug, Clone, PartialEq)]
struct Taylor2 {
    order: usize,
    c: Vec<Vec<f64>>,
}

impl Taylor2 {
    fn zero(order: usize) -> Self {
        Self { order, c: vec![vec![0.0; order + 1]; order + 1] }
    }

    fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.order);
        for a in 0..=self.order {
            for b in 0..=self.order {
                if self.c[a][b] == 0.0 {
                    continue;
                }
                for p in 0..=self.order - a {
                    for q in 0..=self.order - b {
                        out.c[a + p][b + q] += self.c[a][b] * other.c[p][q];
                    }
                }
            }
        }
        out
    }

    /// `1 / (c0 + self)` for `self` without constant term.
    fn reciprocal_shifted(&self, c0: f64) -> Self {
        let mut out = Self::zero(self.order);
        let mut power = Self::zero(self.order);
        power.c[0][0] = 1.0;
        for n in 0..=2 * self.order {
            let scale = if n % 2 == 0 { 1.0 } else { -1.0 } / c0.powi(n as i32 + 1);
            for a in 0..=self.order {
                for b in 0..=self.order {
                    out.c[a][b] += scale * power.c[a][b];
                }
            }
            power = power.mul(self);
        }
        out
    }
}

fn inverse_mean_series(material: &OneDMaterial, s0: f64, order: usize, along_y: bool) -> Taylor2 {
    let mut t = Taylor2::zero(order);
    for k in 1..=order {
        // k-th Taylor coefficient of ∫(a + s c)⁻¹ at s0
        let v: f64 = material
            .pieces
            .iter()
            .map(|&(l, a, c)| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                l * sign * c.powi(k as i32) / (a + s0 * c).powi(k as i32 + 1)
            })
            .sum();
        if along_y {
            t.c[0][k] = v;
        } else {
            t.c[k][0] = v;
        }
    }
    t
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

/// Finite-`N` corrections `(A₁*,N, A₂*,N)` of the one- and two-defect
/// supercell problems, where `∫_{I_N} A(∇w + e) = N² / ((N - n_d) ∫a⁻¹ + Σ ∫(a + s_l c)⁻¹)`.
pub fn finite_n_orders(material: &OneDMaterial, expansion: &PointMassExpansion, cells: usize) -> Result<(f64, f64)> {
    if cells < 2 {
        return Err(Error::InvalidParameter("at least two cells are needed for pair terms".into()));
    }
    let n = cells as f64;
    let h = material.inverse_mean(0.0);
    let order = (expansion.p1().max(expansion.p2()) as usize).max(1);
    let single = |s: f64, k: u32| -> f64 {
        let t = inverse_mean_series(material, s, order, false);
        let r = t.reciprocal_shifted((n - 1.0) * h + material.inverse_mean(s));
        n * n * r.c[k as usize][0] * factorial(k as usize)
    };
    let act_single = |terms: &[crate::law::ExpansionTerm]| -> f64 {
        terms
            .iter()
            .map(|t| {
                let sign = if t.derivative % 2 == 0 { 1.0 } else { -1.0 };
                t.weight * sign * single(t.location, t.derivative)
            })
            .sum()
    };
    let first = act_single(expansion.order1());
    let mut pair = 0.0;
    for tm in expansion.order1() {
        for tn in expansion.order1() {
            let sx = inverse_mean_series(material, tm.location, order, false);
            let sy = inverse_mean_series(material, tn.location, order, true);
            let mut sum = sx.clone();
            for a in 0..=order {
                for b in 0..=order {
                    sum.c[a][b] += sy.c[a][b];
                }
            }
            let c0 = (n - 2.0) * h + material.inverse_mean(tm.location) + material.inverse_mean(tn.location);
            let r = sum.reciprocal_shifted(c0);
            let (a, b) = (tm.derivative as usize, tn.derivative as usize);
            let d = n * n * r.c[a][b] * factorial(a) * factorial(b);
            let sign = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
            pair += tm.weight * tn.weight * sign * d;
        }
    }
    let second = 0.5 * (n - 1.0) * pair + act_single(expansion.order2());
    Ok((first, second))
}

/// Rows of the `oned` table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneDRow {
    pub eta: f64,
    pub orders: ExactOrders,
    pub exact: f64,
    pub residual: f64,
}

/// Exact value and expansion residual for each `η`.
pub fn oned_table(material: &OneDMaterial, law: &PerturbationLaw, etas: &[f64], integrator: &Integrator) -> Result<Vec<OneDRow>> {
    let orders = exact_orders(material, law.expansion())?;
    etas.iter()
        .map(|&eta| {
            let exact = exact_full(material, law, eta, integrator)?;
            Ok(OneDRow { eta, orders, exact, residual: exact - orders.predict(eta) })
        })
        .collect()
}
