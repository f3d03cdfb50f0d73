//! Krylov solvers for the singular periodic systems, restricted to the
//! mean-zero subspace.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::operator::StencilOperator;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PreconditionerKind {
    /// Inverse of the constant-coefficient operator, applied by FFT.
    #[default]
    Fourier,
    Jacobi,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative residual `‖b − Kx‖ / ‖b‖` at which iteration stops.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub preconditioner: PreconditionerKind,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tolerance: 1e-10, max_iterations: 20_000, preconditioner: PreconditionerKind::Fourier }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn project_mean_zero(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

enum Precond {
    Identity,
    Jacobi(Vec<f64>),
    Fourier(Box<FourierInverse>),
}

impl Precond {
    fn new(op: &StencilOperator, kind: PreconditionerKind) -> Self {
        match kind {
            PreconditionerKind::Identity => Precond::Identity,
            PreconditionerKind::Jacobi => Precond::Jacobi(op.diagonal().iter().map(|d| 1.0 / d).collect()),
            PreconditionerKind::Fourier => Precond::Fourier(Box::new(FourierInverse::new(op))),
        }
    }

    fn apply(&mut self, r: &[f64], z: &mut [f64]) {
        match self {
            Precond::Identity => z.copy_from_slice(r),
            Precond::Jacobi(inv) => z.iter_mut().zip(r).zip(inv.iter()).for_each(|((z, r), d)| *z = r * d),
            Precond::Fourier(f) => f.apply(r, z),
        }
        project_mean_zero(z);
    }
}

/// Exact inverse (on mean-zero vectors) of the periodic constant stencil
/// obtained by averaging the operator's rows.
struct FourierInverse {
    dim: usize,
    n: usize,
    inv_symbol: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    a: Vec<Complex64>,
    b: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl FourierInverse {
    fn new(op: &StencilOperator) -> Self {
        let mesh = op.mesh();
        let dim = mesh.dim();
        let n = mesh.nodes_per_axis();
        let stencil = op.mean_symmetric_stencil();
        let offsets = mesh.stencil_offsets();
        let tau = 2.0 * core::f64::consts::PI / n as f64;
        let len = n.pow(dim as u32);
        let mut inv_symbol = vec![0.0; len];
        // layout after the forward transform: index kx * n + ky (2D)
        for (idx, slot) in inv_symbol.iter_mut().enumerate() {
            let (kx, ky) = if dim == 1 { (idx, 0) } else { (idx / n, idx % n) };
            if idx == 0 {
                continue;
            }
            let mut lambda = stencil[0];
            for (s, o) in offsets.iter().enumerate().skip(1) {
                lambda += stencil[s] * (tau * (kx as f64 * o[0] as f64 + ky as f64 * o[1] as f64)).cos();
            }
            *slot = if lambda > 1e-14 * stencil[0].abs() { 1.0 / lambda } else { 0.0 };
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        Self {
            dim,
            n,
            inv_symbol,
            forward,
            inverse,
            a: vec![Complex64::new(0.0, 0.0); len],
            b: vec![Complex64::new(0.0, 0.0); len],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    fn apply(&mut self, r: &[f64], z: &mut [f64]) {
        let n = self.n;
        for (c, &v) in self.a.iter_mut().zip(r) {
            *c = Complex64::new(v, 0.0);
        }
        self.forward.process_with_scratch(&mut self.a, &mut self.scratch);
        if self.dim == 1 {
            for (c, s) in self.a.iter_mut().zip(&self.inv_symbol) {
                *c *= *s;
            }
            self.inverse.process_with_scratch(&mut self.a, &mut self.scratch);
            let scale = 1.0 / n as f64;
            for (z, c) in z.iter_mut().zip(&self.a) {
                *z = c.re * scale;
            }
            return;
        }
        transpose(&self.a, &mut self.b, n);
        self.forward.process_with_scratch(&mut self.b, &mut self.scratch);
        for (c, s) in self.b.iter_mut().zip(&self.inv_symbol) {
            *c *= *s;
        }
        self.inverse.process_with_scratch(&mut self.b, &mut self.scratch);
        transpose(&self.b, &mut self.a, n);
        self.inverse.process_with_scratch(&mut self.a, &mut self.scratch);
        let scale = 1.0 / (n * n) as f64;
        for (z, c) in z.iter_mut().zip(&self.a) {
            *z = c.re * scale;
        }
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    const B: usize = 16;
    for by in (0..n).step_by(B) {
        for bx in (0..n).step_by(B) {
            for y in by..(by + B).min(n) {
                for x in bx..(bx + B).min(n) {
                    dst[x * n + y] = src[y * n + x];
                }
            }
        }
    }
}

/// Solves `K x = b` on the mean-zero subspace. Uses conjugate gradients when
/// the operator is symmetric and BiCGSTAB otherwise.
pub fn solve(
    op: &StencilOperator,
    rhs: &[f64],
    initial: Option<&[f64]>,
    options: &SolverOptions,
) -> Result<(Vec<f64>, SolveStats)> {
    if rhs.len() != op.len() {
        return Err(Error::ShapeMismatch(format!("load of length {} for {} unknowns", rhs.len(), op.len())));
    }
    let mut b = rhs.to_vec();
    project_mean_zero(&mut b);
    let bnorm = norm(&b);
    if bnorm == 0.0 || !bnorm.is_finite() {
        if !bnorm.is_finite() {
            return Err(Error::InvalidParameter("non-finite load".into()));
        }
        return Ok((vec![0.0; b.len()], SolveStats::default()));
    }
    let mut x = match initial {
        Some(x0) if x0.len() == b.len() => x0.to_vec(),
        _ => vec![0.0; b.len()],
    };
    project_mean_zero(&mut x);
    let mut precond = Precond::new(op, options.preconditioner);
    if op.is_symmetric(1e-13) {
        pcg(op, &b, bnorm, &mut x, &mut precond, options)
    } else {
        bicgstab(op, &b, bnorm, &mut x, &mut precond, options)
    }
    .map(|stats| {
        project_mean_zero(&mut x);
        (x, stats)
    })
}

fn pcg(
    op: &StencilOperator,
    b: &[f64],
    bnorm: f64,
    x: &mut [f64],
    precond: &mut Precond,
    options: &SolverOptions,
) -> Result<SolveStats> {
    let len = b.len();
    let mut r = vec![0.0; len];
    op.apply(x, &mut r);
    r.iter_mut().zip(b).for_each(|(r, b)| *r = b - *r);
    let mut res = norm(&r) / bnorm;
    if res <= options.tolerance {
        return Ok(SolveStats { iterations: 0, residual: res });
    }
    let mut z = vec![0.0; len];
    precond.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; len];
    for it in 1..=options.max_iterations {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SolverDiverged { iterations: it, residual: res });
        }
        let alpha = rz / pap;
        x.iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
        r.iter_mut().zip(&ap).for_each(|(r, a)| *r -= alpha * a);
        res = norm(&r) / bnorm;
        if res <= options.tolerance {
            return Ok(SolveStats { iterations: it, residual: res });
        }
        precond.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
    }
    Err(Error::SolverDiverged { iterations: options.max_iterations, residual: res })
}

fn bicgstab(
    op: &StencilOperator,
    b: &[f64],
    bnorm: f64,
    x: &mut [f64],
    precond: &mut Precond,
    options: &SolverOptions,
) -> Result<SolveStats> {
    let len = b.len();
    let mut r = vec![0.0; len];
    op.apply(x, &mut r);
    r.iter_mut().zip(b).for_each(|(r, b)| *r = b - *r);
    let mut res = norm(&r) / bnorm;
    if res <= options.tolerance {
        return Ok(SolveStats { iterations: 0, residual: res });
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; len];
    let mut p = vec![0.0; len];
    let mut y = vec![0.0; len];
    let mut s = vec![0.0; len];
    let mut zs = vec![0.0; len];
    let mut t = vec![0.0; len];
    for it in 1..=options.max_iterations {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || omega == 0.0 {
            return Err(Error::SolverDiverged { iterations: it, residual: res });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for k in 0..len {
            p[k] = r[k] + beta * (p[k] - omega * v[k]);
        }
        precond.apply(&p, &mut y);
        op.apply(&y, &mut v);
        alpha = rho / dot(&r_hat, &v);
        for k in 0..len {
            s[k] = r[k] - alpha * v[k];
        }
        if norm(&s) / bnorm <= options.tolerance {
            x.iter_mut().zip(&y).for_each(|(x, y)| *x += alpha * y);
            // confirm with the true residual
            op.apply(x, &mut r);
            r.iter_mut().zip(b).for_each(|(r, b)| *r = b - *r);
            res = norm(&r) / bnorm;
            if res <= options.tolerance {
                return Ok(SolveStats { iterations: it, residual: res });
            }
            continue;
        }
        precond.apply(&s, &mut zs);
        op.apply(&zs, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for k in 0..len {
            x[k] += alpha * y[k] + omega * zs[k];
            r[k] = s[k] - omega * t[k];
        }
        res = norm(&r) / bnorm;
        if res <= options.tolerance {
            return Ok(SolveStats { iterations: it, residual: res });
        }
    }
    Err(Error::SolverDiverged { iterations: options.max_iterations, residual: res })
}
