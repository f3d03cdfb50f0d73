//! Structured periodic P1 meshes of the supercell torus `[0, N)^d`.

use crate::error::{Error, Result};
use crate::tensor::Vector;

/// Which diagonal splits each grid square into two triangles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Diagonal {
    /// From `(0,0)` to `(h,h)`.
    #[default]
    Main,
    /// From `(h,0)` to `(0,h)`.
    Anti,
}

/// Uniform periodic grid with `m` nodes per unit edge on `N^d` unit cells.
///
/// Nodes and squares share the index `iy·n + ix` with `n = N·m`; square
/// `(ix, iy)` has its lower-left corner at node `(ix, iy)`. In 2D square `q`
/// carries the elements `2q` and `2q+1`, in 1D element `q` is the interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PeriodicMesh {
    dim: usize,
    cells: usize,
    per_cell: usize,
    diagonal: Diagonal,
}

/// Corner offsets and scaled basis gradients (in units of `1/h`) of the two
/// triangle shapes of a square.
type Shape = ([[usize; 2]; 3], [[f64; 2]; 3]);

const MAIN: [Shape; 2] = [
    ([[0, 0], [1, 0], [1, 1]], [[-1.0, 0.0], [1.0, -1.0], [0.0, 1.0]]),
    ([[0, 0], [1, 1], [0, 1]], [[0.0, -1.0], [1.0, 0.0], [-1.0, 1.0]]),
];
const ANTI: [Shape; 2] = [
    ([[0, 0], [1, 0], [0, 1]], [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]),
    ([[1, 0], [1, 1], [0, 1]], [[0.0, -1.0], [1.0, 1.0], [-1.0, 0.0]]),
];

impl PeriodicMesh {
    pub fn new(dim: usize, cells: usize, per_cell: usize) -> Result<Self> {
        Self::with_diagonal(dim, cells, per_cell, Diagonal::Main)
    }

    pub fn with_diagonal(dim: usize, cells: usize, per_cell: usize, diagonal: Diagonal) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidParameter(format!("dimension {dim} not in {{1, 2}}")));
        }
        if cells == 0 || per_cell == 0 {
            return Err(Error::InvalidParameter("mesh needs N >= 1 and m >= 1".into()));
        }
        if dim == 2 && cells * per_cell < 2 {
            return Err(Error::InvalidParameter("2D mesh needs at least two nodes per axis".into()));
        }
        Ok(Self { dim, cells, per_cell, diagonal })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Supercell size `N`.
    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Nodes per unit edge `m`.
    pub fn per_cell(&self) -> usize {
        self.per_cell
    }

    pub fn diagonal(&self) -> Diagonal {
        self.diagonal
    }

    /// Nodes per axis `n = N·m`.
    pub fn nodes_per_axis(&self) -> usize {
        self.cells * self.per_cell
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes_per_axis().pow(self.dim as u32)
    }

    pub fn num_squares(&self) -> usize {
        self.num_nodes()
    }

    pub fn num_elements(&self) -> usize {
        if self.dim == 1 {
            self.num_nodes()
        } else {
            2 * self.num_nodes()
        }
    }

    pub fn num_cells(&self) -> usize {
        self.cells.pow(self.dim as u32)
    }

    pub fn h(&self) -> f64 {
        1.0 / self.per_cell as f64
    }

    pub fn element_measure(&self) -> f64 {
        let h = self.h();
        if self.dim == 1 {
            h
        } else {
            0.5 * h * h
        }
    }

    pub fn elements_per_square(&self) -> usize {
        if self.dim == 1 {
            1
        } else {
            2
        }
    }

    pub fn square_of_element(&self, e: usize) -> usize {
        e / self.elements_per_square()
    }

    pub fn square_coords(&self, q: usize) -> [usize; 2] {
        if self.dim == 1 {
            [q, 0]
        } else {
            let n = self.nodes_per_axis();
            [q % n, q / n]
        }
    }

    /// Unit cell containing square `q`.
    pub fn cell_of_square(&self, q: usize) -> usize {
        let [ix, iy] = self.square_coords(q);
        let m = self.per_cell;
        (iy / m) * self.cells + ix / m
    }

    pub fn cell_of_element(&self, e: usize) -> usize {
        self.cell_of_square(self.square_of_element(e))
    }

    /// Square center relative to the center of its unit cell.
    pub fn square_local_center(&self, q: usize) -> Vector {
        let [ix, iy] = self.square_coords(q);
        let m = self.per_cell;
        let c = |i: usize| ((i % m) as f64 + 0.5) / m as f64 - 0.5;
        if self.dim == 1 {
            [c(ix), 0.0]
        } else {
            [c(ix), c(iy)]
        }
    }

    /// Linear cell index of the cell at torus coordinates `offset` (any sign).
    pub fn cell_index(&self, offset: [i64; 2]) -> usize {
        let n = self.cells as i64;
        let x = offset[0].rem_euclid(n) as usize;
        if self.dim == 1 {
            x
        } else {
            offset[1].rem_euclid(n) as usize * self.cells + x
        }
    }

    /// Centered offset in `⟦-(N-1)/2, N/2⟧^d` of a linear cell index.
    pub fn cell_offset(&self, cell: usize) -> [i64; 2] {
        let n = self.cells as i64;
        let center = |v: i64| if v > n / 2 { v - n } else { v };
        if self.dim == 1 {
            [center(cell as i64), 0]
        } else {
            [center((cell % self.cells) as i64), center((cell / self.cells) as i64)]
        }
    }

    #[inline]
    pub fn node_index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nodes_per_axis() + ix
    }

    /// Nodes and basis gradients of element `e`.
    pub fn element(&self, e: usize) -> ([usize; 3], [Vector; 3]) {
        let n = self.nodes_per_axis();
        let inv_h = self.per_cell as f64;
        if self.dim == 1 {
            return ([e, (e + 1) % n, e], [[-inv_h, 0.0], [inv_h, 0.0], [0.0, 0.0]]);
        }
        let q = e / 2;
        let [ix, iy] = self.square_coords(q);
        let (corners, grads) = self.shapes()[e % 2];
        let mut nodes = [0; 3];
        let mut g = [[0.0; 2]; 3];
        for a in 0..3 {
            nodes[a] = self.node_index((ix + corners[a][0]) % n, (iy + corners[a][1]) % n);
            g[a] = [grads[a][0] * inv_h, grads[a][1] * inv_h];
        }
        (nodes, g)
    }

    pub(crate) fn shapes(&self) -> &'static [Shape; 2] {
        match self.diagonal {
            Diagonal::Main => &MAIN,
            Diagonal::Anti => &ANTI,
        }
    }

    /// Node offsets `(dx, dy)` of the 7 stencil slots (3 in 1D).
    pub fn stencil_offsets(&self) -> Vec<[i64; 2]> {
        if self.dim == 1 {
            return vec![[0, 0], [1, 0], [-1, 0]];
        }
        let d = match self.diagonal {
            Diagonal::Main => [1, 1],
            Diagonal::Anti => [1, -1],
        };
        vec![[0, 0], [1, 0], [-1, 0], [0, 1], [0, -1], d, [-d[0], -d[1]]]
    }

    /// Elements of unit cell `cell`, in increasing order.
    pub fn elements_in_cell(&self, cell: usize) -> impl Iterator<Item = usize> + '_ {
        let m = self.per_cell;
        let (cx, cy) = if self.dim == 1 { (cell, 0) } else { (cell % self.cells, cell / self.cells) };
        let rows = if self.dim == 1 { 1 } else { m };
        let eps = self.elements_per_square();
        (0..rows).flat_map(move |ly| {
            (0..m).flat_map(move |lx| {
                let q = if self.dim == 1 {
                    cx * m + lx
                } else {
                    self.node_index(cx * m + lx, cy * m + ly)
                };
                (0..eps).map(move |t| q * eps + t)
            })
        })
    }

    /// The single-cell mesh with the same `m` and diagonal.
    pub fn unit(&self) -> PeriodicMesh {
        PeriodicMesh { cells: 1, ..*self }
    }

    /// Element of the unit-cell mesh at the same position within its cell.
    pub fn unit_element(&self, e: usize) -> usize {
        let eps = self.elements_per_square();
        let [ix, iy] = self.square_coords(e / eps);
        let m = self.per_cell;
        let q = if self.dim == 1 { ix % m } else { (iy % m) * m + ix % m };
        q * eps + e % eps
    }

    /// Node of the unit-cell mesh at the same position within its cell.
    pub fn unit_node(&self, node: usize) -> usize {
        let m = self.per_cell;
        if self.dim == 1 {
            return node % m;
        }
        let n = self.nodes_per_axis();
        ((node / n) % m) * m + (node % n) % m
    }

    /// Translation of node indices by whole cells.
    pub fn shift_node(&self, node: usize, cell_shift: [i64; 2]) -> usize {
        let n = self.nodes_per_axis() as i64;
        let m = self.per_cell as i64;
        if self.dim == 1 {
            return (node as i64 + cell_shift[0] * m).rem_euclid(n) as usize;
        }
        let ix = (node as i64 % n + cell_shift[0] * m).rem_euclid(n);
        let iy = (node as i64 / n + cell_shift[1] * m).rem_euclid(n);
        (iy * n + ix) as usize
    }
}
