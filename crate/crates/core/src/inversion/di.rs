use crate::error::{config_err, Error, Result};
use crate::grid::{ComplexGrid, Grid, GridGeom, C64};

use super::wavenumber::{interior_mask, NormalizedWavenumberMap};

/// Pixels whose modulus is below this fraction of the field maximum are
/// masked before division.
pub const DI_MAGNITUDE_FLOOR: f64 = 1e-6;

/// Algebraic Helmholtz inversion: `k² = −∇²u/u` with a 5-point (2D) or
/// 7-point (3D) Laplacian. Takes the principal root (`k′ ≥ 0`); a negative
/// `k″` is clamped to zero and the pixel is flagged. Boundary pixels and
/// pixels with `|u|` below the floor are masked.
pub fn di_baseline(wavefield: &ComplexGrid, frequency_hz: f64) -> Result<NormalizedWavenumberMap> {
    if !(frequency_hz > 0.0) {
        return Err(config_err(format!("frequency must be positive, got {frequency_hz}")));
    }
    let geom = wavefield.geom();
    let data = wavefield.data();
    let peak = wavefield.max_modulus();
    if peak == 0.0 {
        return Err(Error::Degenerate("all-zero wavefield".into()));
    }
    let omega = std::f64::consts::TAU * frequency_hz;
    let floor = DI_MAGNITUDE_FLOOR * peak;
    let n = geom.len();
    let mut mask = interior_mask(geom);
    let mut flagged = vec![false; n];
    let mut k_re = vec![0.0; n];
    let mut k_im = vec![0.0; n];
    let steps = laplacian_steps(geom);
    for i in 0..n {
        if !mask[i] {
            continue;
        }
        if data[i].norm() < floor {
            mask[i] = false;
            continue;
        }
        match di_at(data, i, &steps, omega) {
            Some((k, clamped)) => {
                k_re[i] = k.re;
                k_im[i] = k.im;
                flagged[i] = clamped;
            }
            None => mask[i] = false,
        }
    }
    Ok(NormalizedWavenumberMap {
        k_re: Grid::from_vec(geom.clone(), k_re)?,
        k_im: Grid::from_vec(geom.clone(), k_im)?,
        frequency_hz,
        direction: None,
        mask,
        flagged,
    })
}

/// `(stride, 1/h²)` per axis.
pub(crate) fn laplacian_steps(geom: &GridGeom) -> Vec<(usize, f64)> {
    (0..geom.ndim())
        .map(|a| (geom.stride(a), geom.spacing_m(a).powi(-2)))
        .collect()
}

/// Normalized DI wavenumber at an interior index. Returns the estimate and
/// whether `k″` was clamped, or `None` when the quotient is not finite.
pub(crate) fn di_at(data: &[C64], i: usize, steps: &[(usize, f64)], omega: f64) -> Option<(C64, bool)> {
    let u = data[i];
    let lap: C64 = steps
        .iter()
        .map(|&(s, w)| (data[i + s] + data[i - s] - u * 2.0) * w)
        .sum();
    let mut k = (-lap / u).sqrt();
    if !(k.re.is_finite() && k.im.is_finite()) {
        return None;
    }
    let clamped = k.im < 0.0;
    if clamped {
        k.im = 0.0;
    }
    Some((k / omega, clamped))
}

/// DI estimate at the centre of a 3×3 or 3×3×3 patch.
pub fn di_patch(patch: &ComplexGrid, omega: f64) -> Option<C64> {
    let g = patch.geom();
    let centre = g.len() / 2;
    di_at(patch.data(), centre, &laplacian_steps(g), omega).map(|(k, _)| k)
}
