//! Periodic piecewise-constant tensor fields and their per-cell random
//! perturbations `A_per + s_k C_per` on a supercell.

use crate::error::{Error, Result};
use crate::tensor::{Tensor, Vector};

/// A ℤᵈ-periodic tensor field, constant on each pixel of an `R^d` raster of
/// the unit cell `Q = [-1/2, 1/2]^d`.
///
/// Pixels are stored row-major with `x₁` varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicTensorField {
    dim: usize,
    resolution: usize,
    pixels: Vec<Tensor>,
}

impl PeriodicTensorField {
    /// Builds a field from symmetric pixel tensors.
    pub fn new(dim: usize, resolution: usize, pixels: Vec<Tensor>) -> Result<Self> {
        let field = Self::new_general(dim, resolution, pixels)?;
        if let Some(p) = field.pixels.iter().position(|t| !t.is_symmetric(1e-12)) {
            return Err(Error::InvalidParameter(format!("pixel {p} holds a non-symmetric tensor")));
        }
        Ok(field)
    }

    /// Like [`PeriodicTensorField::new`] but accepts non-symmetric tensors.
    pub fn new_general(dim: usize, resolution: usize, pixels: Vec<Tensor>) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidParameter(format!("dimension {dim} not in {{1, 2}}")));
        }
        if resolution == 0 {
            return Err(Error::InvalidParameter("raster resolution must be positive".into()));
        }
        if pixels.len() != resolution.pow(dim as u32) {
            return Err(Error::ShapeMismatch(format!(
                "{} pixels for a {resolution}^{dim} raster",
                pixels.len()
            )));
        }
        if pixels.iter().flat_map(|t| t.0.iter().flatten()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite pixel value".into()));
        }
        if dim == 1 && pixels.iter().any(|t| t.0[0][1] != 0.0 || t.0[1][0] != 0.0 || t.0[1][1] != 0.0) {
            return Err(Error::InvalidParameter("1D tensors may only set the [0][0] entry".into()));
        }
        Ok(Self { dim, resolution, pixels })
    }

    pub fn from_fn(dim: usize, resolution: usize, f: impl Fn(Vector) -> Tensor) -> Result<Self> {
        let count = resolution.pow(dim as u32);
        let pixels = (0..count).map(|p| f(pixel_center(dim, resolution, p))).collect();
        Self::new_general(dim, resolution, pixels)
    }

    pub fn constant(dim: usize, resolution: usize, value: Tensor) -> Result<Self> {
        Self::new(dim, resolution, vec![value; resolution.pow(dim as u32)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn pixels(&self) -> &[Tensor] {
        &self.pixels
    }

    pub fn is_symmetric(&self) -> bool {
        self.pixels.iter().all(|t| t.is_symmetric(1e-12))
    }

    pub fn is_zero(&self) -> bool {
        self.pixels.iter().all(|t| t.max_abs() == 0.0)
    }

    pub fn transpose(&self) -> Self {
        Self {
            dim: self.dim,
            resolution: self.resolution,
            pixels: self.pixels.iter().map(Tensor::transpose).collect(),
        }
    }

    /// Supremum of the operator norm over pixels.
    pub fn sup_norm(&self) -> f64 {
        self.pixels.iter().map(|t| t.norm(self.dim)).fold(0.0, f64::max)
    }

    /// Pixel index containing the local point `x ∈ Q` (coordinates relative
    /// to the cell center); points are wrapped periodically.
    pub fn pixel_index(&self, x: Vector) -> usize {
        let r = self.resolution;
        let coord = |v: f64| -> usize {
            let u = v + 0.5;
            let u = u - u.floor();
            ((u * r as f64) as usize).min(r - 1)
        };
        if self.dim == 1 {
            coord(x[0])
        } else {
            coord(x[1]) * r + coord(x[0])
        }
    }

    pub fn at(&self, x: Vector) -> Tensor {
        self.pixels[self.pixel_index(x)]
    }

    /// Field with every pixel multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            resolution: self.resolution,
            pixels: self.pixels.iter().map(|t| *t * factor).collect(),
        }
    }
}

/// Local coordinates of the center of pixel `p`.
pub fn pixel_center(dim: usize, resolution: usize, p: usize) -> Vector {
    let c = |i: usize| (i as f64 + 0.5) / resolution as f64 - 0.5;
    if dim == 1 {
        [c(p), 0.0]
    } else {
        [c(p % resolution), c(p / resolution)]
    }
}

/// Closed amplitude interval `[lo, hi]` over which coercivity is required.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeRange {
    pub lo: f64,
    pub hi: f64,
}

impl AmplitudeRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter(format!("bad amplitude range [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn symmetric(m: f64) -> Self {
        Self { lo: -m.abs(), hi: m.abs() }
    }

    /// `M = max(|lo|, |hi|)`.
    pub fn bound(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn contains(&self, s: f64) -> bool {
        (self.lo..=self.hi).contains(&s)
    }
}

/// Uniform ellipticity constants of `A_per + s C_per` over an amplitude range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoercivityBounds {
    pub alpha: f64,
    pub beta: f64,
    pub range: AmplitudeRange,
}

impl CoercivityBounds {
    /// Pixel-wise extremes over `s ∈ {lo, 0, hi}`. The smallest eigenvalue of
    /// the symmetric part is concave in `s` and the operator norm convex, so
    /// the extremes over the interval are attained at these points.
    pub fn compute(
        base: &PeriodicTensorField,
        perturbation: &PeriodicTensorField,
        range: AmplitudeRange,
    ) -> Result<Self> {
        check_pair(base, perturbation)?;
        let dim = base.dim();
        let mut alpha = f64::INFINITY;
        let mut beta = 0.0_f64;
        let samples = [range.lo, 0.0, range.hi];
        for (a, c) in base.pixels().iter().zip(perturbation.pixels()) {
            for &s in &samples {
                let t = *a + *c * s;
                let (lo, _) = t.symmetric_eigen_range(dim);
                alpha = alpha.min(lo);
                beta = beta.max(t.norm(dim));
            }
        }
        if alpha <= 0.0 {
            let eigenvalue = alpha;
            let amplitude = samples
                .iter()
                .copied()
                .find(|&s| {
                    base.pixels().iter().zip(perturbation.pixels()).any(|(a, c)| {
                        (*a + *c * s).symmetric_eigen_range(dim).0 <= 0.0
                    })
                })
                .unwrap_or(0.0);
            return Err(Error::NotCoercive { cell: None, amplitude, eigenvalue });
        }
        Ok(Self { alpha, beta, range })
    }

    /// `M` of the amplitude range.
    pub fn amplitude_bound(&self) -> f64 {
        self.range.bound()
    }
}

fn check_pair(base: &PeriodicTensorField, perturbation: &PeriodicTensorField) -> Result<()> {
    if base.dim() != perturbation.dim() || base.resolution() != perturbation.resolution() {
        return Err(Error::ShapeMismatch(
            "A_per and C_per must share dimension and raster resolution".into(),
        ));
    }
    Ok(())
}

/// The reference periodic material `A_per` together with its perturbation
/// pattern `C_per`.
#[derive(Debug, Clone, PartialEq)]
pub struct Material {
    pub base: PeriodicTensorField,
    pub perturbation: PeriodicTensorField,
}

impl Material {
    pub fn new(base: PeriodicTensorField, perturbation: PeriodicTensorField) -> Result<Self> {
        check_pair(&base, &perturbation)?;
        let (lo, _) = base
            .pixels()
            .iter()
            .map(|t| t.symmetric_eigen_range(base.dim()))
            .fold((f64::INFINITY, 0.0), |acc, r| (acc.0.min(r.0), 0.0));
        if lo <= 0.0 {
            return Err(Error::NotCoercive { cell: None, amplitude: 0.0, eigenvalue: lo });
        }
        Ok(Self { base, perturbation })
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn resolution(&self) -> usize {
        self.base.resolution()
    }

    pub fn bounds(&self, range: AmplitudeRange) -> Result<CoercivityBounds> {
        CoercivityBounds::compute(&self.base, &self.perturbation, range)
    }

    /// Unperturbed material `(A_per, C_per)` evaluated at a uniform amplitude
    /// `s`: the periodic field `A_per + s C_per`.
    pub fn at_amplitude(&self, s: f64) -> PeriodicTensorField {
        PeriodicTensorField {
            dim: self.dim(),
            resolution: self.resolution(),
            pixels: self
                .base
                .pixels()
                .iter()
                .zip(self.perturbation.pixels())
                .map(|(a, c)| *a + *c * s)
                .collect(),
        }
    }

    /// Same material with the transposed tensors.
    pub fn transpose(&self) -> Self {
        Self { base: self.base.transpose(), perturbation: self.perturbation.transpose() }
    }
}

/// Constant background reinforced by a disk of radius `radius` centered in
/// the cell; the perturbation removes the disk.
pub fn make_inclusion_material(
    background: f64,
    contrast: f64,
    radius: f64,
    resolution: usize,
) -> Result<Material> {
    if !(radius > 0.0 && radius < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "inclusion radius {radius} must lie in (0, 0.5)"
        )));
    }
    if !(background > 0.0) || !(background + contrast > 0.0) {
        return Err(Error::NotCoercive {
            cell: None,
            amplitude: 0.0,
            eigenvalue: background.min(background + contrast),
        });
    }
    let inside = |x: Vector| x[0] * x[0] + x[1] * x[1] < radius * radius;
    let base = PeriodicTensorField::from_fn(2, resolution, |x| {
        let v = if inside(x) { background + contrast } else { background };
        Tensor::scalar(2, v)
    })?;
    let perturbation = PeriodicTensorField::from_fn(2, resolution, |x| {
        let v = if inside(x) { -contrast } else { 0.0 };
        Tensor::scalar(2, v)
    })?;
    Material::new(base, perturbation)
}

/// Two-phase laminate: `high` on the strip `x₁ ∈ [0, 1/2)` of the cell and
/// `low` elsewhere. The perturbation swaps the lamination direction, so that
/// `A_per + C_per` is the same laminate with strips `x₂ ∈ [0, 1/2)`.
pub fn make_laminate_material(low: f64, high: f64, resolution: usize) -> Result<Material> {
    if !(low > 0.0) || !(high > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "laminate phases must be positive, got {low} and {high}"
        )));
    }
    let jump = high - low;
    let strip = |v: f64| if (0.0..0.5).contains(&v) { 1.0 } else { 0.0 };
    let base = PeriodicTensorField::from_fn(2, resolution, |x| {
        Tensor::scalar(2, low + jump * strip(x[0]))
    })?;
    let perturbation = PeriodicTensorField::from_fn(2, resolution, |x| {
        Tensor::scalar(2, jump * (strip(x[1]) - strip(x[0])))
    })?;
    Material::new(base, perturbation)
}

/// One realization `A_per + Σ_k 1_{Q_k} s_k C_per` on the torus of `N^d`
/// unit cells. Cell `c = (c₁, c₂)` has linear index `c₂ N + c₁` and occupies
/// `[c₁, c₁+1) × [c₂, c₂+1)` in supercell coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedField {
    material: Material,
    cells: usize,
    amplitudes: Vec<f64>,
}

impl PerturbedField {
    pub fn material(&self) -> &Material {
        &self.material
    }

    pub fn dim(&self) -> usize {
        self.material.dim()
    }

    /// Supercell size `N`.
    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, cell: usize) -> f64 {
        self.amplitudes[cell]
    }

    /// Coefficient at a supercell point `x ∈ [0, N)^d` (wrapped periodically).
    pub fn at(&self, x: Vector) -> Tensor {
        let n = self.cells as f64;
        let wrap = |v: f64| v - (v / n).floor() * n;
        let xw = [wrap(x[0]), if self.dim() == 2 { wrap(x[1]) } else { 0.0 }];
        let cx = (xw[0].floor() as usize).min(self.cells - 1);
        let cy = if self.dim() == 2 { (xw[1].floor() as usize).min(self.cells - 1) } else { 0 };
        let local = [xw[0] - cx as f64 - 0.5, xw[1] - cy as f64 - 0.5];
        self.cell_tensor(cy * self.cells + cx, local)
    }

    /// Coefficient in cell `cell` at local coordinates `local ∈ Q`.
    #[inline]
    pub fn cell_tensor(&self, cell: usize, local: Vector) -> Tensor {
        let p = self.material.base.pixel_index(local);
        let s = self.amplitudes[cell];
        let a = self.material.base.pixels()[p];
        if s == 0.0 {
            a
        } else {
            a + self.material.perturbation.pixels()[p] * s
        }
    }
}

/// Assembles a realization from per-cell amplitudes, checking that every
/// cell stays coercive.
pub fn realize_field(material: &Material, amplitudes: Vec<f64>, cells: usize) -> Result<PerturbedField> {
    let dim = material.dim();
    if cells == 0 {
        return Err(Error::InvalidParameter("supercell size must be positive".into()));
    }
    if amplitudes.len() != cells.pow(dim as u32) {
        return Err(Error::ShapeMismatch(format!(
            "{} amplitudes for {cells}^{dim} cells",
            amplitudes.len()
        )));
    }
    // Coercivity depends only on the amplitude value; check each distinct one once.
    let mut seen: Vec<u64> = Vec::new();
    for (k, &s) in amplitudes.iter().enumerate() {
        if !s.is_finite() {
            return Err(Error::InvalidParameter(format!("amplitude {s} in cell {k}")));
        }
        let bits = s.to_bits();
        if seen.contains(&bits) {
            continue;
        }
        let worst = material
            .base
            .pixels()
            .iter()
            .zip(material.perturbation.pixels())
            .map(|(a, c)| (*a + *c * s).symmetric_eigen_range(dim).0)
            .fold(f64::INFINITY, f64::min);
        if worst <= 0.0 {
            let cell = if dim == 1 { [k, 0] } else { [k % cells, k / cells] };
            return Err(Error::NotCoercive { cell: Some(cell), amplitude: s, eigenvalue: worst });
        }
        if seen.len() < 64 {
            seen.push(bits);
        }
    }
    Ok(PerturbedField { material: material.clone(), cells, amplitudes })
}

/// Realization with every amplitude zero except those listed.
pub fn field_with_defects(material: &Material, cells: usize, defects: &[(usize, f64)]) -> Result<PerturbedField> {
    let mut amplitudes = vec![0.0; cells.pow(material.dim() as u32)];
    for &(cell, s) in defects {
        if cell >= amplitudes.len() {
            return Err(Error::InvalidParameter(format!("defect cell {cell} outside supercell")));
        }
        amplitudes[cell] = s;
    }
    realize_field(material, amplitudes, cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inclusion_values_on_and_off_disk() {
        let mat = make_inclusion_material(20.0, 100.0, 0.3, 64).unwrap();
        assert_eq!(mat.base.at([0.0, 0.0]), Tensor::scalar(2, 120.0));
        assert_eq!(mat.base.at([0.45, 0.45]), Tensor::scalar(2, 20.0));
        assert_eq!(mat.perturbation.at([0.0, 0.0]), Tensor::scalar(2, -100.0));
        assert_eq!(mat.perturbation.at([0.45, -0.45]), Tensor::ZERO);
    }

    #[test]
    fn zero_contrast_inclusion_is_identity() {
        let mat = make_inclusion_material(1.0, 0.0, 0.3, 8).unwrap();
        assert!(mat.base.pixels().iter().all(|t| *t == Tensor::identity(2)));
        assert!(mat.perturbation.is_zero());
    }

    #[test]
    fn inclusion_rejects_touching_radius_and_bad_phases() {
        assert!(make_inclusion_material(20.0, 100.0, 0.5, 16).is_err());
        assert!(make_inclusion_material(20.0, 100.0, 0.0, 16).is_err());
        assert!(matches!(
            make_inclusion_material(20.0, -30.0, 0.3, 16),
            Err(Error::NotCoercive { .. })
        ));
    }

    #[test]
    fn rasterized_disk_area_converges() {
        let area = |r: usize| {
            let mat = make_inclusion_material(20.0, 100.0, 0.3, r).unwrap();
            let on = mat.perturbation.pixels().iter().filter(|t| t.0[0][0] != 0.0).count();
            on as f64 / (r * r) as f64
        };
        let exact = core::f64::consts::PI * 0.09;
        let errs: Vec<f64> = [32, 64, 128, 256].iter().map(|&r| (area(r) - exact).abs()).collect();
        assert!(errs[3] < 2e-3, "{errs:?}");
        // O(1/R): error times R stays bounded
        for (e, r) in errs.iter().zip([32.0, 64.0, 128.0, 256.0]) {
            assert!(e * r < 1.0, "{errs:?}");
        }
    }

    #[test]
    fn laminate_strips_and_rotation() {
        let mat = make_laminate_material(5.0, 15.0, 10).unwrap();
        assert_eq!(mat.base.at([0.25, -0.3]).0[0][0], 15.0);
        assert_eq!(mat.base.at([-0.25, 0.3]).0[0][0], 5.0);
        let flipped = mat.at_amplitude(1.0);
        for p in 0..100 {
            let x = pixel_center(2, 10, p);
            let expected = mat.base.at([x[1], x[0]]);
            assert_eq!(flipped.pixels()[p], expected);
        }
    }

    #[test]
    fn equal_phase_laminate_is_constant() {
        let mat = make_laminate_material(7.0, 7.0, 10).unwrap();
        assert!(mat.base.pixels().iter().all(|t| *t == Tensor::scalar(2, 7.0)));
        assert!(mat.perturbation.is_zero());
        assert!(mat.bounds(AmplitudeRange::symmetric(1.0)).is_ok());
    }

    #[test]
    fn coercivity_bounds_match_dense_sampling() {
        let mat = make_inclusion_material(20.0, 100.0, 0.3, 16).unwrap();
        let range = AmplitudeRange::new(-0.5, 1.1).unwrap();
        let b = mat.bounds(range).unwrap();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
        for k in 0..=1000 {
            let s = range.lo + (range.hi - range.lo) * k as f64 / 1000.0;
            for p in mat.at_amplitude(s).pixels() {
                lo = lo.min(p.symmetric_eigen_range(2).0);
                hi = hi.max(p.norm(2));
            }
        }
        assert!((b.alpha - lo).abs() < 1e-9 && (b.beta - hi).abs() < 1e-9);
        assert!((b.alpha - 10.0).abs() < 1e-12 && (b.beta - 170.0).abs() < 1e-12);
        assert!(mat.bounds(AmplitudeRange::symmetric(2.0)).is_err());
    }

    #[test]
    fn realization_lookup() {
        let mat = make_inclusion_material(20.0, 100.0, 0.3, 10).unwrap();
        let zero = realize_field(&mat, vec![0.0; 9], 3).unwrap();
        assert_eq!(zero.at([1.5, 2.5]), mat.base.at([0.0, 0.0]));
        let ones = realize_field(&mat, vec![1.0; 9], 3).unwrap();
        assert_eq!(ones.at([0.5, 0.5]), Tensor::scalar(2, 20.0));
        let single = field_with_defects(&mat, 3, &[(0, 0.5)]).unwrap();
        assert_eq!(single.at([0.5, 0.5]), Tensor::scalar(2, 70.0));
        assert_eq!(single.at([1.5, 0.5]), Tensor::scalar(2, 120.0));
        // periodic wrap of the whole supercell
        assert_eq!(single.at([3.5, 3.5]), single.at([0.5, 0.5]));
        match realize_field(&mat, vec![0.0, 0.0, 0.0, 0.0, 1.5, 0.0, 0.0, 0.0, 0.0], 3) {
            Err(Error::NotCoercive { cell: Some(c), amplitude, .. }) => {
                assert_eq!(c, [1, 1]);
                assert_eq!(amplitude, 1.5);
            }
            other => panic!("{other:?}"),
        }
    }
}
