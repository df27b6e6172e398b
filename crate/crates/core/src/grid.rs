//! Regular 2D/3D sampling grids.
//!
//! Storage is row-major with the slowest axis first: `dims = [ny, nx]` in 2D
//! and `[nz, ny, nx]` in 3D, so the flat index of `(z, y, x)` is
//! `(z * ny + y) * nx + x`. Spacing is per axis, in the same order, in mm.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, shape_err, Result};

pub type C64 = Complex64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridGeom {
    dims: Vec<usize>,
    spacing_mm: Vec<f64>,
}

impl GridGeom {
    pub fn new(dims: Vec<usize>, spacing_mm: Vec<f64>) -> Result<Self> {
        if dims.len() != 2 && dims.len() != 3 {
            return Err(config_err(format!(
                "grids are 2D or 3D, got {} axes",
                dims.len()
            )));
        }
        if spacing_mm.len() != dims.len() {
            return Err(config_err(format!(
                "{} spacings given for {} axes",
                spacing_mm.len(),
                dims.len()
            )));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(config_err(format!("zero-length axis in {dims:?}")));
        }
        if spacing_mm.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(config_err(format!(
                "spacing must be positive and finite, got {spacing_mm:?}"
            )));
        }
        Ok(Self { dims, spacing_mm })
    }

    /// 2D grid with isotropic spacing.
    pub fn square(ny: usize, nx: usize, spacing_mm: f64) -> Result<Self> {
        Self::new(vec![ny, nx], vec![spacing_mm; 2])
    }

    /// The 3×3 (or 3×3×3) patch geometry used by the wavenumber estimator.
    pub fn patch(ndim: usize, spacing_mm: f64) -> Result<Self> {
        Self::new(vec![3; ndim], vec![spacing_mm; ndim])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn spacing_mm(&self) -> &[f64] {
        &self.spacing_mm
    }

    pub fn spacing_m(&self, axis: usize) -> f64 {
        self.spacing_mm[axis] * 1e-3
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn is_3d(&self) -> bool {
        self.dims.len() == 3
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn nx(&self) -> usize {
        self.dims[self.ndim() - 1]
    }

    pub fn ny(&self) -> usize {
        self.dims[self.ndim() - 2]
    }

    /// Flat-index distance between neighbours along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.dims[axis + 1..].iter().product()
    }

    pub fn coords(&self, mut idx: usize) -> Vec<usize> {
        let mut c = vec![0; self.ndim()];
        for axis in (0..self.ndim()).rev() {
            c[axis] = idx % self.dims[axis];
            idx /= self.dims[axis];
        }
        c
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&c, &d)| acc * d + c)
    }

    /// Whether `idx` has a full 3-wide neighbourhood along every axis.
    pub fn is_interior(&self, idx: usize) -> bool {
        self.coords(idx)
            .iter()
            .zip(&self.dims)
            .all(|(&c, &d)| c >= 1 && c + 1 < d)
    }

    /// Spacing agreement within a relative tolerance.
    pub fn spacing_matches(&self, other: &GridGeom, rel_tol: f64) -> bool {
        self.ndim() == other.ndim()
            && self
                .spacing_mm
                .iter()
                .zip(&other.spacing_mm)
                .all(|(a, b)| (a - b).abs() <= rel_tol * b.abs())
    }

    pub fn axis_label(&self, axis: usize) -> &'static str {
        const LABELS: [&str; 3] = ["z", "y", "x"];
        LABELS[3 - self.ndim() + axis]
    }
}

/// A field sampled on a [`GridGeom`].
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    geom: GridGeom,
    data: Vec<T>,
}

pub type ComplexGrid = Grid<C64>;
pub type RealGrid = Grid<f64>;

impl<T: Clone> Grid<T> {
    pub fn filled(geom: GridGeom, value: T) -> Self {
        let data = vec![value; geom.len()];
        Self { geom, data }
    }
}

impl<T> Grid<T> {
    pub fn from_vec(geom: GridGeom, data: Vec<T>) -> Result<Self> {
        if data.len() != geom.len() {
            return Err(shape_err(format!(
                "{} values for a grid of {} pixels",
                data.len(),
                geom.len()
            )));
        }
        Ok(Self { geom, data })
    }

    pub fn from_fn(geom: GridGeom, f: impl FnMut(usize) -> T) -> Self {
        let data = (0..geom.len()).map(f).collect();
        Self { geom, data }
    }

    pub fn geom(&self) -> &GridGeom {
        &self.geom
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            geom: self.geom.clone(),
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn same_geom<U>(&self, other: &Grid<U>) -> Result<()> {
        if self.geom != other.geom {
            return Err(shape_err(format!(
                "grid {:?} vs {:?}",
                self.geom.dims(),
                other.geom.dims()
            )));
        }
        Ok(())
    }
}

impl ComplexGrid {
    pub fn max_modulus(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn re(&self) -> RealGrid {
        self.map(|z| z.re)
    }

    pub fn im(&self) -> RealGrid {
        self.map(|z| z.im)
    }
}

/// Centered difference along `axis` (per pixel, unit spacing), one-sided on
/// the two boundary planes. Requires at least two samples along the axis.
pub fn diff_axis<T>(data: &[T], geom: &GridGeom, axis: usize) -> Vec<T>
where
    T: Copy + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let n = geom.dims()[axis];
    let stride = geom.stride(axis);
    let mut out = Vec::with_capacity(data.len());
    for idx in 0..data.len() {
        let c = (idx / stride) % n;
        let v = if c == 0 {
            data[idx + stride] - data[idx]
        } else if c == n - 1 {
            data[idx] - data[idx - stride]
        } else {
            (data[idx + stride] - data[idx - stride]) * 0.5
        };
        out.push(v);
    }
    out
}

/// Adjoint of [`diff_axis`] for real data: `<D u, v> = <u, Dᵀ v>`.
pub fn diff_axis_adjoint(v: &[f64], geom: &GridGeom, axis: usize) -> Vec<f64> {
    let n = geom.dims()[axis];
    let stride = geom.stride(axis);
    let mut out = vec![0.0; v.len()];
    for idx in 0..v.len() {
        let c = (idx / stride) % n;
        let w = v[idx];
        if c == 0 {
            out[idx + stride] += w;
            out[idx] -= w;
        } else if c == n - 1 {
            out[idx] += w;
            out[idx - stride] -= w;
        } else {
            out[idx + stride] += 0.5 * w;
            out[idx - stride] -= 0.5 * w;
        }
    }
    out
}
