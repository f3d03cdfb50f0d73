//! Gauss–Legendre rules and composite integration.

use crate::error::{Error, Result};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre integration of `f` over `[a, b]`, doubling the
/// panel count until two successive values agree to `rel_tol`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integrator {
    pub points: usize,
    pub initial_panels: usize,
    pub max_panels: usize,
    pub rel_tol: f64,
}

impl Default for Integrator {
    fn default() -> Self {
        Self { points: 16, initial_panels: 8, max_panels: 1 << 14, rel_tol: 1e-14 }
    }
}

impl Integrator {
    pub fn fixed(&self, f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        let (x, w) = gauss_legendre(self.points);
        let width = (b - a) / panels as f64;
        let mut total = 0.0;
        for p in 0..panels {
            let lo = a + width * p as f64;
            let mid = lo + 0.5 * width;
            let mut s = 0.0;
            for (xi, wi) in x.iter().zip(&w) {
                s += wi * f(mid + 0.5 * width * xi);
            }
            total += 0.5 * width * s;
        }
        total
    }

    pub fn integrate(&self, f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        let mut panels = self.initial_panels.max(1);
        let mut prev = self.fixed(f, a, b, panels);
        while panels * 2 <= self.max_panels {
            panels *= 2;
            let next = self.fixed(f, a, b, panels);
            if (next - prev).abs() <= self.rel_tol * next.abs().max(1e-300) || next == prev {
                return Ok(next);
            }
            prev = next;
        }
        Err(Error::IntegratorBudget(format!(
            "no convergence on [{a}, {b}] with {} panels of {} points",
            self.max_panels, self.points
        )))
    }
}
