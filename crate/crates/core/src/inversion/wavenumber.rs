use serde::{Deserialize, Serialize};

use crate::error::{config_err, shape_err, Result};
use crate::grid::{ComplexGrid, Grid, GridGeom, RealGrid, C64};
use crate::net::{normalize_input, TrainedModel};

/// Normalized complex wavenumber k̃ = k/ω (s/m) per pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedWavenumberMap {
    pub k_re: RealGrid,
    pub k_im: RealGrid,
    pub frequency_hz: f64,
    pub direction: Option<String>,
    pub mask: Vec<bool>,
    /// Pixels where an estimator had to clamp its result.
    pub flagged: Vec<bool>,
}

impl NormalizedWavenumberMap {
    pub fn geom(&self) -> &GridGeom {
        self.k_re.geom()
    }

    pub fn with_direction(mut self, label: impl Into<String>) -> Self {
        self.direction = Some(label.into());
        self
    }

    /// A map with the same k̃ everywhere and every pixel valid.
    pub fn uniform(geom: GridGeom, k: C64, frequency_hz: f64) -> Self {
        let n = geom.len();
        Self {
            k_re: Grid::filled(geom.clone(), k.re),
            k_im: Grid::filled(geom, k.im),
            frequency_hz,
            direction: None,
            mask: vec![true; n],
            flagged: vec![false; n],
        }
    }
}

/// Which pixels carry a full 3-wide neighbourhood on every axis.
pub(crate) fn interior_mask(geom: &GridGeom) -> Vec<bool> {
    dilated_interior_mask(geom, 1)
}

/// Which pixels have neighbours `dilation` pixels away on every axis.
fn dilated_interior_mask(geom: &GridGeom, dilation: usize) -> Vec<bool> {
    (0..geom.len())
        .map(|i| geom.coords(i).iter().zip(geom.dims()).all(|(&c, &d)| c >= dilation && c + dilation < d))
        .collect()
}

/// Offsets (in storage order) of the 3×3 or 3×3×3 neighbourhood, row-major,
/// with samples `dilation` pixels apart.
fn dilated_patch_offsets(geom: &GridGeom, dilation: usize) -> Vec<isize> {
    let nd = geom.ndim();
    let strides: Vec<isize> = (0..nd).map(|a| (geom.stride(a) * dilation) as isize).collect();
    (0..3usize.pow(nd as u32))
        .map(|k| {
            let mut rem = k;
            let mut off = 0isize;
            for a in (0..nd).rev() {
                off += ((rem % 3) as isize - 1) * strides[a];
                rem /= 3;
            }
            off
        })
        .collect()
}

/// Patches per inference call; bounds the size of the input matrices.
const CHUNK: usize = 4096;

/// Pixel step between patch samples when a model trained at spacing `s·h`
/// runs on a grid of spacing `h`. `s` must be a whole number, equal on every
/// axis, within 1%.
pub fn patch_dilation(grid: &GridGeom, model_patch: &GridGeom) -> Result<usize> {
    let ratio = model_patch.spacing_mm()[0] / grid.spacing_mm()[0];
    let s = ratio.round().max(1.0);
    let scaled = GridGeom::new(grid.dims().to_vec(), grid.spacing_mm().iter().map(|h| h * s).collect())?;
    if !scaled.spacing_matches(model_patch, 0.01) {
        return Err(config_err(format!(
            "wavefield spacing {:?} mm is not a whole fraction of the model's {:?} mm",
            grid.spacing_mm(),
            model_patch.spacing_mm()
        )));
    }
    Ok(s as usize)
}

/// Run both networks on every pixel of `wavefield` whose patch lies inside
/// the grid. Patches are dilated when the model spacing is a multiple of the
/// grid spacing.
pub fn estimate_wavenumber_map(
    model: &TrainedModel,
    wavefield: &ComplexGrid,
    frequency_hz: f64,
) -> Result<NormalizedWavenumberMap> {
    let geom = wavefield.geom();
    let pg = &model.patch_geom;
    if geom.ndim() != pg.ndim() {
        return Err(shape_err(format!(
            "model expects {}D fields, got {}D",
            pg.ndim(),
            geom.ndim()
        )));
    }
    let dilation = patch_dilation(geom, pg)?;
    if (frequency_hz - model.frequency_hz).abs() > 1e-9 * model.frequency_hz {
        return Err(config_err(format!(
            "wavefield frequency {frequency_hz} Hz differs from the model's {} Hz",
            model.frequency_hz
        )));
    }
    let field = normalize_input(wavefield)?;
    let data = field.data();
    let offsets = dilated_patch_offsets(geom, dilation);
    let mut mask = dilated_interior_mask(geom, dilation);
    let plen = offsets.len();

    let mut k_re = vec![0.0; geom.len()];
    let mut k_im = vec![0.0; geom.len()];
    let mut idxs = Vec::with_capacity(CHUNK);
    let mut buf: Vec<C64> = Vec::with_capacity(CHUNK * plen);
    let mut flush = |idxs: &mut Vec<usize>, buf: &mut Vec<C64>| -> Result<()> {
        if idxs.is_empty() {
            return Ok(());
        }
        let (r, i) = model.predict(buf.chunks_exact(plen))?;
        for (k, &idx) in idxs.iter().enumerate() {
            k_re[idx] = r[k];
            k_im[idx] = i[k];
        }
        idxs.clear();
        buf.clear();
        Ok(())
    };
    for idx in 0..geom.len() {
        if !mask[idx] {
            continue;
        }
        let start = buf.len();
        buf.extend(offsets.iter().map(|&o| data[(idx as isize + o) as usize]));
        if buf[start..].iter().all(|z| z.norm_sqr() == 0.0) {
            buf.truncate(start);
            mask[idx] = false;
            continue;
        }
        idxs.push(idx);
        if idxs.len() == CHUNK {
            flush(&mut idxs, &mut buf)?;
        }
    }
    flush(&mut idxs, &mut buf)?;
    let n = geom.len();
    Ok(NormalizedWavenumberMap {
        k_re: Grid::from_vec(geom.clone(), k_re)?,
        k_im: Grid::from_vec(geom.clone(), k_im)?,
        frequency_hz,
        direction: None,
        mask,
        flagged: vec![false; n],
    })
}

/// Summary counts of a map, handy for logs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapStats {
    pub valid: usize,
    pub flagged: usize,
    pub mean_k_re: f64,
    pub mean_k_im: f64,
}

impl NormalizedWavenumberMap {
    pub fn stats(&self) -> MapStats {
        let (mut n, mut sr, mut si) = (0usize, 0.0, 0.0);
        for i in 0..self.mask.len() {
            if self.mask[i] {
                n += 1;
                sr += self.k_re.data()[i];
                si += self.k_im.data()[i];
            }
        }
        let d = n.max(1) as f64;
        MapStats {
            valid: n,
            flagged: self.flagged.iter().filter(|&&f| f).count(),
            mean_k_re: sr / d,
            mean_k_im: si / d,
        }
    }
}
