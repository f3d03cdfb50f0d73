//! Small dense tensors of dimension 1 or 2.
//!
//! A one-dimensional tensor is stored in the `[0][0]` slot with every other
//! entry kept at zero, so the same arithmetic serves both dimensions.

use core::ops::{Add, Mul, Sub};

/// A d×d matrix with d ∈ {1, 2}, stored as a 2×2 array.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Tensor(pub [[f64; 2]; 2]);

/// A d-vector with d ∈ {1, 2}.
pub type Vector = [f64; 2];

impl Tensor {
    pub const ZERO: Tensor = Tensor([[0.0; 2]; 2]);

    pub fn identity(dim: usize) -> Self {
        let mut t = Self::ZERO;
        for k in 0..dim {
            t.0[k][k] = 1.0;
        }
        t
    }

    pub fn scalar(dim: usize, value: f64) -> Self {
        Self::identity(dim) * value
    }

    pub fn from_rows(rows: [[f64; 2]; 2]) -> Self {
        Tensor(rows)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[i][j]
    }

    #[inline]
    pub fn apply(&self, v: &Vector) -> Vector {
        [
            self.0[0][0] * v[0] + self.0[0][1] * v[1],
            self.0[1][0] * v[0] + self.0[1][1] * v[1],
        ]
    }

    pub fn transpose(&self) -> Self {
        Tensor([[self.0[0][0], self.0[1][0]], [self.0[0][1], self.0[1][1]]])
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (self.0[0][1] - self.0[1][0]).abs() <= tol * (1.0 + self.max_abs())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Operator 2-norm.
    pub fn norm(&self, dim: usize) -> f64 {
        if dim == 1 {
            return self.0[0][0].abs();
        }
        let ata = self.transpose() * *self;
        let (_, hi) = ata.symmetric_eigen_range(2);
        hi.max(0.0).sqrt()
    }

    /// Smallest and largest eigenvalue of the symmetric part.
    pub fn symmetric_eigen_range(&self, dim: usize) -> (f64, f64) {
        if dim == 1 {
            return (self.0[0][0], self.0[0][0]);
        }
        let a = self.0[0][0];
        let d = self.0[1][1];
        let b = 0.5 * (self.0[0][1] + self.0[1][0]);
        let mean = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        (mean - rad, mean + rad)
    }

    pub fn determinant(&self, dim: usize) -> f64 {
        if dim == 1 {
            self.0[0][0]
        } else {
            self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
        }
    }

    pub fn inverse(&self, dim: usize) -> Option<Self> {
        let det = self.determinant(dim);
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        if dim == 1 {
            return Some(Self::scalar(1, 1.0 / det));
        }
        Some(Tensor([
            [self.0[1][1] / det, -self.0[0][1] / det],
            [-self.0[1][0] / det, self.0[0][0] / det],
        ]))
    }

    /// `true` when `self - other` is positive semi-definite up to `tol`
    /// (symmetric parts only).
    pub fn dominates(&self, other: &Tensor, dim: usize, tol: f64) -> bool {
        let (lo, _) = (*self - *other).symmetric_eigen_range(dim);
        lo >= -tol
    }
}

impl Add for Tensor {
    type Output = Tensor;
    fn add(self, rhs: Tensor) -> Tensor {
        let mut out = self;
        for i in 0..2 {
            for j in 0..2 {
                out.0[i][j] += rhs.0[i][j];
            }
        }
        out
    }
}

impl Sub for Tensor {
    type Output = Tensor;
    fn sub(self, rhs: Tensor) -> Tensor {
        self + rhs * -1.0
    }
}

impl Mul<f64> for Tensor {
    type Output = Tensor;
    fn mul(self, rhs: f64) -> Tensor {
        let mut out = self;
        out.0.iter_mut().flatten().for_each(|x| *x *= rhs);
        out
    }
}

impl Mul for Tensor {
    type Output = Tensor;
    fn mul(self, rhs: Tensor) -> Tensor {
        let mut out = Tensor::ZERO;
        for i in 0..2 {
            for j in 0..2 {
                out.0[i][j] = self.0[i][0] * rhs.0[0][j] + self.0[i][1] * rhs.0[1][j];
            }
        }
        out
    }
}

#[inline]
pub fn dot(a: &Vector, b: &Vector) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn unit(i: usize) -> Vector {
    let mut e = [0.0; 2];
    e[i] = 1.0;
    e
}

#[inline]
pub fn add(a: &Vector, b: &Vector) -> Vector {
    [a[0] + b[0], a[1] + b[1]]
}
