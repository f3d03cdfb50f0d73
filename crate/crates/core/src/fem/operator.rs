//! Matrix-free P1 stiffness operator stored as a per-node stencil.

use super::mesh::PeriodicMesh;
use crate::tensor::{dot, Tensor, Vector};

/// `K_ab = ∫ A∇φ_b·∇φ_a` with one tensor per grid square, stored as
/// row stencils over [`PeriodicMesh::stencil_offsets`].
#[derive(Debug, Clone)]
pub struct StencilOperator {
    mesh: PeriodicMesh,
    rows: Vec<[f64; 7]>,
}

impl StencilOperator {
    pub fn assemble(mesh: &PeriodicMesh, square_tensors: &[Tensor]) -> Self {
        assert_eq!(square_tensors.len(), mesh.num_squares());
        let offsets = mesh.stencil_offsets();
        let slot = |dx: i64, dy: i64| offsets.iter().position(|o| *o == [dx, dy]).expect("stencil slot");
        let mut rows = vec![[0.0; 7]; mesh.num_nodes()];
        let area = mesh.element_measure();
        if mesh.dim() == 1 {
            let inv_h = mesh.per_cell() as f64;
            for (e, a) in square_tensors.iter().enumerate() {
                let k = area * a.0[0][0] * inv_h * inv_h;
                let next = (e + 1) % mesh.num_nodes();
                rows[e][0] += k;
                rows[e][1] -= k;
                rows[next][0] += k;
                rows[next][2] -= k;
            }
            return Self { mesh: *mesh, rows };
        }
        let n = mesh.nodes_per_axis();
        let inv_h = mesh.per_cell() as f64;
        // local matrices depend only on the tensor and the triangle shape
        let slots: Vec<[[usize; 3]; 3]> = mesh
            .shapes()
            .iter()
            .map(|(corners, _)| {
                let mut s = [[0; 3]; 3];
                for a in 0..3 {
                    for b in 0..3 {
                        s[a][b] = slot(
                            corners[b][0] as i64 - corners[a][0] as i64,
                            corners[b][1] as i64 - corners[a][1] as i64,
                        );
                    }
                }
                s
            })
            .collect();
        for (q, a) in square_tensors.iter().enumerate() {
            let [ix, iy] = mesh.square_coords(q);
            for (t, (corners, grads)) in mesh.shapes().iter().enumerate() {
                for i in 0..3 {
                    let node = mesh.node_index((ix + corners[i][0]) % n, (iy + corners[i][1]) % n);
                    let gi = [grads[i][0] * inv_h, grads[i][1] * inv_h];
                    for j in 0..3 {
                        let gj = [grads[j][0] * inv_h, grads[j][1] * inv_h];
                        rows[node][slots[t][i][j]] += area * dot(&a.apply(&gj), &gi);
                    }
                }
            }
        }
        Self { mesh: *mesh, rows }
    }

    pub fn mesh(&self) -> &PeriodicMesh {
        &self.mesh
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[[f64; 7]] {
        &self.rows
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r[0]).collect()
    }

    /// `y = K x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.mesh.nodes_per_axis();
        if self.mesh.dim() == 1 {
            for i in 0..n {
                let r = &self.rows[i];
                y[i] = r[0] * x[i] + r[1] * x[(i + 1) % n] + r[2] * x[(i + n - 1) % n];
            }
            return;
        }
        let main = self.mesh.stencil_offsets()[5] == [1, 1];
        for iy in 0..n {
            let up = if iy + 1 == n { 0 } else { iy + 1 };
            let dn = if iy == 0 { n - 1 } else { iy - 1 };
            let (d_plus, d_minus) = if main { (up, dn) } else { (dn, up) };
            let row = iy * n;
            let (rup, rdn, rdp, rdm) = (up * n, dn * n, d_plus * n, d_minus * n);
            for ix in 0..n {
                let xp = if ix + 1 == n { 0 } else { ix + 1 };
                let xm = if ix == 0 { n - 1 } else { ix - 1 };
                let r = &self.rows[row + ix];
                y[row + ix] = r[0] * x[row + ix]
                    + r[1] * x[row + xp]
                    + r[2] * x[row + xm]
                    + r[3] * x[rup + ix]
                    + r[4] * x[rdn + ix]
                    + r[5] * x[rdp + xp]
                    + r[6] * x[rdm + xm];
            }
        }
    }

    /// Stencil of the node-averaged operator, symmetrized between opposite
    /// slots; its Fourier symbol is real.
    pub fn mean_symmetric_stencil(&self) -> [f64; 7] {
        let mut mean = [0.0; 7];
        for r in &self.rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        let count = self.rows.len() as f64;
        mean.iter_mut().for_each(|m| *m /= count);
        let slots = if self.mesh.dim() == 1 { 1 } else { 3 };
        for p in 0..slots {
            let avg = 0.5 * (mean[1 + 2 * p] + mean[2 + 2 * p]);
            mean[1 + 2 * p] = avg;
            mean[2 + 2 * p] = avg;
        }
        mean
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let offsets = self.mesh.stencil_offsets();
        let scale = self.rows.iter().map(|r| r[0].abs()).fold(0.0, f64::max);
        (0..self.rows.len()).all(|i| {
            (1..offsets.len()).step_by(2).all(|s| {
                let j = self.neighbor(i, offsets[s]);
                (self.rows[i][s] - self.rows[j][s + 1]).abs() <= tol * scale
            })
        })
    }

    fn neighbor(&self, node: usize, offset: [i64; 2]) -> usize {
        let n = self.mesh.nodes_per_axis() as i64;
        if self.mesh.dim() == 1 {
            return (node as i64 + offset[0]).rem_euclid(n) as usize;
        }
        let ix = (node as i64 % n + offset[0]).rem_euclid(n);
        let iy = (node as i64 / n + offset[1]).rem_euclid(n);
        (iy * n + ix) as usize
    }
}

/// Load vector `b_a = -∫ F·∇φ_a` of a per-element constant flux `F`.
pub fn assemble_load(mesh: &PeriodicMesh, flux: &[Vector]) -> Vec<f64> {
    assert_eq!(flux.len(), mesh.num_elements());
    let mut b = vec![0.0; mesh.num_nodes()];
    let area = mesh.element_measure();
    for (e, f) in flux.iter().enumerate() {
        if f[0] == 0.0 && f[1] == 0.0 {
            continue;
        }
        let (nodes, grads) = mesh.element(e);
        for a in 0..3 {
            b[nodes[a]] -= area * dot(f, &grads[a]);
        }
    }
    b
}

/// Exact P1 gradient of nodal values on every element.
pub fn element_gradients(mesh: &PeriodicMesh, values: &[f64]) -> Vec<Vector> {
    (0..mesh.num_elements())
        .map(|e| {
            let (nodes, grads) = mesh.element(e);
            let mut g = [0.0; 2];
            for a in 0..3 {
                g[0] += values[nodes[a]] * grads[a][0];
                g[1] += values[nodes[a]] * grads[a][1];
            }
            g
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::mesh::Diagonal;

    fn dense_reference(mesh: &PeriodicMesh, tensors: &[Tensor], x: &[f64]) -> Vec<f64> {
        // y_a = Σ_e area (A_e ∇u_e)·∇φ_a
        let grads = element_gradients(mesh, x);
        let mut y = vec![0.0; mesh.num_nodes()];
        for e in 0..mesh.num_elements() {
            let a = tensors[mesh.square_of_element(e)];
            let flux = a.apply(&grads[e]);
            let (nodes, g) = mesh.element(e);
            for k in 0..3 {
                y[nodes[k]] += mesh.element_measure() * dot(&flux, &g[k]);
            }
        }
        y
    }

    #[test]
    fn stencil_matches_element_loop() {
        for diag in [Diagonal::Main, Diagonal::Anti] {
            let mesh = PeriodicMesh::with_diagonal(2, 2, 3, diag).unwrap();
            let tensors: Vec<Tensor> = (0..mesh.num_squares())
                .map(|q| Tensor([[2.0 + q as f64 * 0.1, 0.3 * (q % 2) as f64], [-0.2, 1.0 + (q % 3) as f64]]))
                .collect();
            let op = StencilOperator::assemble(&mesh, &tensors);
            let x: Vec<f64> = (0..mesh.num_nodes()).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
            let mut y = vec![0.0; x.len()];
            op.apply(&x, &mut y);
            let r = dense_reference(&mesh, &tensors, &x);
            for (a, b) in y.iter().zip(&r) {
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
            assert!(!op.is_symmetric(1e-12));
        }
    }

    #[test]
    fn constants_in_kernel_and_symmetry() {
        let mesh = PeriodicMesh::new(2, 2, 4).unwrap();
        let tensors = vec![Tensor([[3.0, 0.5], [0.5, 2.0]]); mesh.num_squares()];
        let op = StencilOperator::assemble(&mesh, &tensors);
        let mut y = vec![1.0; mesh.num_nodes()];
        op.apply(&vec![1.0; mesh.num_nodes()], &mut y);
        assert!(y.iter().all(|v| v.abs() < 1e-12));
        assert!(op.is_symmetric(1e-12));
    }

    #[test]
    fn load_of_constant_flux_vanishes() {
        let mesh = PeriodicMesh::new(2, 1, 5).unwrap();
        let b = assemble_load(&mesh, &vec![[1.0, 2.0]; mesh.num_elements()]);
        assert!(b.iter().all(|v| v.abs() < 1e-12));
    }
}
