//! Phase encoding of a complex displacement into wrapped MR images.
//!
//! For offset φ_j the encoded phase is `ϕ_j = Re(U*·e^{iφ_j})` and the
//! stored image is `I_j = |A|·e^{iΦ}·e^{iϕ_j}`; wrapping happens implicitly
//! because only the complex exponential is kept.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{config_err, shape_err, Result};
use crate::grid::{ComplexGrid, Grid, C64};

/// `J` wrapped complex MR images and the phase offset of each.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseOffsetSeries {
    images: Vec<ComplexGrid>,
    offsets: Vec<f64>,
}

impl PhaseOffsetSeries {
    pub fn new(images: Vec<ComplexGrid>, offsets: Vec<f64>) -> Result<Self> {
        if images.len() < 2 {
            return Err(config_err(format!(
                "need at least 2 phase offsets, got {}",
                images.len()
            )));
        }
        if images.len() != offsets.len() {
            return Err(shape_err(format!(
                "{} images for {} offsets",
                images.len(),
                offsets.len()
            )));
        }
        for img in &images[1..] {
            images[0].same_geom(img)?;
        }
        for (i, a) in offsets.iter().enumerate() {
            for b in &offsets[i + 1..] {
                let d = (a - b).rem_euclid(TAU);
                if d < 1e-9 || TAU - d < 1e-9 {
                    return Err(config_err(format!(
                        "phase offsets {a} and {b} coincide modulo 2π"
                    )));
                }
            }
        }
        Ok(Self { images, offsets })
    }

    pub fn images(&self) -> &[ComplexGrid] {
        &self.images
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn map_images(&self, f: impl FnMut(&ComplexGrid) -> ComplexGrid) -> Result<Self> {
        Self::new(self.images.iter().map(f).collect(), self.offsets.clone())
    }
}

/// Evenly spaced offsets `2π(j−1)/J`.
pub fn even_offsets(j: usize) -> Vec<f64> {
    (0..j).map(|i| TAU * i as f64 / j as f64).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncodeConfig {
    pub offsets: Vec<f64>,
    /// Image magnitude |A|.
    pub magnitude: f64,
    /// Spatially constant background phase Φ.
    pub background_phase: f64,
    /// When set, U* is rescaled so the largest encoded phase magnitude over
    /// all pixels and offsets equals this value.
    pub phase_scale: Option<f64>,
}

impl Default for EncodeConfig {
    fn default() -> Self {
        Self {
            offsets: even_offsets(4),
            magnitude: 1.0,
            background_phase: 0.0,
            phase_scale: Some(4.0 * PI),
        }
    }
}

/// Encoded phase `Re(U·e^{iφ})`.
pub fn encoded_phase(u: C64, offset: f64) -> f64 {
    u.re * offset.cos() - u.im * offset.sin()
}

/// Returns the series and the factor that was applied to `displacement`.
pub fn encode_phase_series(
    displacement: &ComplexGrid,
    config: &EncodeConfig,
) -> Result<(PhaseOffsetSeries, f64)> {
    if config.offsets.len() < 2 {
        return Err(config_err("need at least 2 phase offsets"));
    }
    if !(config.magnitude > 0.0) {
        return Err(config_err("image magnitude must be positive"));
    }
    let scale = match config.phase_scale {
        None => 1.0,
        Some(s) if s > 0.0 => {
            let peak = displacement
                .data()
                .iter()
                .flat_map(|&u| config.offsets.iter().map(move |&o| encoded_phase(u, o).abs()))
                .fold(0.0, f64::max);
            if peak > 0.0 {
                s / peak
            } else {
                1.0
            }
        }
        Some(s) => return Err(config_err(format!("phase_scale must be positive, got {s}"))),
    };
    let images = config
        .offsets
        .iter()
        .map(|&o| {
            Grid::from_fn(displacement.geom().clone(), |i| {
                let phi = encoded_phase(displacement.data()[i] * scale, o);
                C64::from_polar(config.magnitude, config.background_phase + phi)
            })
        })
        .collect();
    Ok((PhaseOffsetSeries::new(images, config.offsets.clone())?, scale))
}
