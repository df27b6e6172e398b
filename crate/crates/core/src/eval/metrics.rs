use serde::{Deserialize, Serialize};

use crate::error::{config_err, shape_err, Error, Result};
use crate::grid::RealGrid;
use crate::synth::PhantomConfig;

/// Root mean squared difference over `mask`.
pub fn rmse(est: &RealGrid, gt: &RealGrid, mask: &[bool]) -> Result<f64> {
    est.same_geom(gt)?;
    if mask.len() != est.len() {
        return Err(shape_err("rmse mask does not match the grid"));
    }
    let (sum, n) = est
        .data()
        .iter()
        .zip(gt.data())
        .zip(mask)
        .filter(|(_, &m)| m)
        .fold((0.0, 0usize), |(s, n), ((a, b), _)| (s + (a - b) * (a - b), n + 1));
    if n == 0 {
        return Err(Error::Degenerate("rmse over an empty mask".into()));
    }
    Ok((sum / n as f64).sqrt())
}

/// Mean and population variance over `mask`.
pub fn masked_mean_var(values: &[f64], mask: &[bool]) -> Option<(f64, f64)> {
    let sel = || values.iter().zip(mask).filter(|(_, &m)| m).map(|(v, _)| *v);
    let n = sel().count();
    if n == 0 {
        return None;
    }
    let mean = sel().sum::<f64>() / n as f64;
    let var = sel().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    Some((mean, var))
}

/// `2(m_bkg − m_tumor)² / (σ²_bkg + σ²_tumor)` with population variances.
pub fn cnr(est: &RealGrid, tumor: &[bool], background: &[bool]) -> Result<f64> {
    let n = est.len();
    if tumor.len() != n || background.len() != n {
        return Err(shape_err("cnr masks do not match the grid"));
    }
    if tumor.iter().zip(background).any(|(&a, &b)| a && b) {
        return Err(config_err("tumor and background masks overlap"));
    }
    let (mt, vt) = masked_mean_var(est.data(), tumor)
        .ok_or_else(|| Error::Degenerate("empty tumor mask".into()))?;
    let (mb, vb) = masked_mean_var(est.data(), background)
        .ok_or_else(|| Error::Degenerate("empty background mask".into()))?;
    let num = 2.0 * (mb - mt) * (mb - mt);
    let den = vb + vt;
    if den == 0.0 {
        if num == 0.0 {
            return Ok(0.0);
        }
        return Err(Error::Degenerate(
            "both regions have zero variance but different means (infinite CNR)".into(),
        ));
    }
    Ok(num / den)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedMask {
    pub name: String,
    pub mask: Vec<bool>,
}

/// Named evaluation regions over one grid.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct RegionSpec {
    pub regions: Vec<NamedMask>,
}

impl RegionSpec {
    /// Background, each inclusion, and for each inclusion an annulus one
    /// radius wide just outside it that avoids every inclusion.
    pub fn from_phantom(config: &PhantomConfig) -> Result<Self> {
        let scene = config.scene()?;
        let geom = scene.labels.geom().clone();
        let mut regions: Vec<NamedMask> = scene
            .regions
            .iter()
            .enumerate()
            .map(|(i, r)| NamedMask { name: r.name.clone(), mask: scene.region_mask(i) })
            .collect();
        let h = config.spacing_mm;
        for inc in &config.inclusions {
            let mask = (0..geom.len())
                .map(|idx| {
                    let c = geom.coords(idx);
                    let dy = c[0] as f64 * h - inc.center_mm[0];
                    let dx = c[1] as f64 * h - inc.center_mm[1];
                    let r = (dy * dy + dx * dx).sqrt();
                    scene.labels.data()[idx] == 0 && r > inc.radius_mm && r <= 2.0 * inc.radius_mm
                })
                .collect();
            regions.push(NamedMask { name: format!("{}-annulus", inc.name), mask });
        }
        Ok(Self { regions })
    }

    pub fn get(&self, name: &str) -> Option<&[bool]> {
        self.regions.iter().find(|r| r.name == name).map(|r| r.mask.as_slice())
    }
}

/// Pixelwise AND of two masks.
pub fn mask_and(a: &[bool], b: &[bool]) -> Vec<bool> {
    a.iter().zip(b).map(|(&x, &y)| x && y).collect()
}
