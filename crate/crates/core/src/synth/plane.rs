//! Full-grid plane-wave scenes.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::grid::{ComplexGrid, Grid, GridGeom, C64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneWave {
    /// Complex amplitude as `[re, im]`.
    pub amplitude: [f64; 2],
    /// Propagation direction `[x, y, z]`; normalized on use.
    pub direction: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlaneWaveScene {
    pub dims: Vec<usize>,
    pub spacing_mm: Vec<f64>,
    pub frequency_hz: f64,
    /// Normalized complex wavenumber `[k̃′, k̃″]` in s/m.
    pub k_norm: [f64; 2],
    pub waves: Vec<PlaneWave>,
}

impl Default for PlaneWaveScene {
    fn default() -> Self {
        Self {
            dims: vec![32, 32],
            spacing_mm: vec![3.0, 3.0],
            frequency_hz: 60.0,
            k_norm: [std::f64::consts::FRAC_1_SQRT_2, 0.0],
            waves: vec![PlaneWave {
                amplitude: [1.0, 0.0],
                direction: [1.0, 0.0, 0.0],
            }],
        }
    }
}

impl PlaneWaveScene {
    pub fn geom(&self) -> Result<GridGeom> {
        GridGeom::new(self.dims.clone(), self.spacing_mm.clone())
    }

    pub fn omega(&self) -> f64 {
        std::f64::consts::TAU * self.frequency_hz
    }

    /// Superposition `Σ a_m exp(i k n̂_m·r)` with `r` in metres from the
    /// grid centre.
    pub fn render(&self) -> Result<ComplexGrid> {
        let geom = self.geom()?;
        if self.waves.is_empty() {
            return Err(config_err("plane-wave scene has no waves"));
        }
        if !(self.frequency_hz > 0.0) {
            return Err(config_err("frequency must be positive"));
        }
        let k = C64::new(self.k_norm[0], self.k_norm[1]) * self.omega();
        let dirs: Vec<[f64; 3]> = self
            .waves
            .iter()
            .map(|w| {
                let d = w.direction;
                let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                if n > 0.0 {
                    Ok([d[0] / n, d[1] / n, d[2] / n])
                } else {
                    Err(config_err("zero propagation direction"))
                }
            })
            .collect::<Result<_>>()?;
        let ndim = geom.ndim();
        Ok(Grid::from_fn(geom.clone(), |idx| {
            let c = geom.coords(idx);
            let mut r = [0.0; 3];
            for axis in 0..ndim {
                let centre = (geom.dims()[axis] as f64 - 1.0) / 2.0;
                r[ndim - 1 - axis] = (c[axis] as f64 - centre) * geom.spacing_m(axis);
            }
            self.waves
                .iter()
                .zip(&dirs)
                .map(|(w, n)| {
                    let proj = n[0] * r[0] + n[1] * r[1] + n[2] * r[2];
                    C64::new(w.amplitude[0], w.amplitude[1]) * (C64::i() * k * proj).exp()
                })
                .sum()
        }))
    }
}
