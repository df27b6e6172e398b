use crate::error::{config_err, Error, Result};
use crate::grid::{Grid, GridGeom, RealGrid, C64};

use super::median::median_filter_3x3;
use super::wavenumber::NormalizedWavenumberMap;

/// Complex shear modulus map in Pa.
#[derive(Clone, Debug, PartialEq)]
pub struct ModulusMap {
    /// Storage modulus G′ after median filtering.
    pub storage: RealGrid,
    /// Loss modulus |G″| after median filtering.
    pub loss: RealGrid,
    /// Unfiltered signed Im(G*) before the absolute value.
    pub loss_signed: RealGrid,
    pub density: f64,
    pub mask: Vec<bool>,
    pub frequencies_hz: Vec<f64>,
    pub directions: Vec<Option<String>>,
}

impl ModulusMap {
    pub fn geom(&self) -> &GridGeom {
        self.storage.geom()
    }
}

/// `G* = ρ/(k̃′ − i·k̃″)²` for one normalized wavenumber.
pub fn modulus_from_normalized(k: C64, density: f64) -> C64 {
    density / (k.conj() * k.conj())
}

/// Average the maps pixelwise, convert to G*, take |Im| and median filter
/// each component. A pixel is valid only where every map is valid and the
/// mean k̃′ is positive.
pub fn fuse_modulus(maps: &[NormalizedWavenumberMap], density: f64) -> Result<ModulusMap> {
    let first = maps.first().ok_or_else(|| config_err("no wavenumber maps to fuse"))?;
    if !(density > 0.0) {
        return Err(config_err(format!("density must be positive, got {density}")));
    }
    let geom = first.geom().clone();
    for m in &maps[1..] {
        first.k_re.same_geom(&m.k_re)?;
    }
    let n = geom.len();
    let count = maps.len() as f64;
    let mut mask = vec![true; n];
    let mut g_re = vec![0.0; n];
    let mut g_im = vec![0.0; n];
    for i in 0..n {
        if !maps.iter().all(|m| m.mask[i]) {
            mask[i] = false;
            continue;
        }
        let kr = maps.iter().map(|m| m.k_re.data()[i]).sum::<f64>() / count;
        let ki = maps.iter().map(|m| m.k_im.data()[i]).sum::<f64>() / count;
        if !(kr > 0.0) {
            mask[i] = false;
            continue;
        }
        let g = modulus_from_normalized(C64::new(kr, ki), density);
        g_re[i] = g.re;
        g_im[i] = g.im;
    }
    if !mask.iter().any(|&v| v) {
        return Err(Error::Degenerate("no pixel is valid in every map".into()));
    }
    let storage = Grid::from_vec(geom.clone(), g_re)?;
    let loss_signed = Grid::from_vec(geom.clone(), g_im)?;
    let loss_abs = loss_signed.map(|v| v.abs());
    Ok(ModulusMap {
        storage: median_filter_3x3(&storage, Some(&mask)),
        loss: median_filter_3x3(&loss_abs, Some(&mask)),
        loss_signed,
        density,
        mask,
        frequencies_hz: maps.iter().map(|m| m.frequency_hz).collect(),
        directions: maps.iter().map(|m| m.direction.clone()).collect(),
    })
}
