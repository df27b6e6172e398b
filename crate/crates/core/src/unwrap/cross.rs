use crate::error::{shape_err, Result};
use crate::grid::{GridGeom, C64};
use crate::synth::PhaseOffsetSeries;

/// Phase-only ratio between images `p` and `q` (`p < q`) and the
/// coefficients that map `U′`, `U″` onto its phase.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossPair {
    pub p: usize,
    pub q: usize,
    /// `cos φ_p − cos φ_q`
    pub e: f64,
    /// `−sin φ_p + sin φ_q`
    pub f: f64,
    pub ratio: Vec<C64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossDiffSet {
    pub geom: GridGeom,
    pub pairs: Vec<CrossPair>,
    /// Pixels that take part in every norm.
    pub mask: Vec<bool>,
    /// Pixels dropped because some image had zero magnitude there.
    pub excluded: usize,
}

impl CrossDiffSet {
    pub fn active_pixels(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// `R_pq = I_p·conj(I_q)/|I_p·conj(I_q)|` for every pair. Pixels where the
/// product vanishes are removed from the mask and hold `R = 1`.
pub fn cross_phase_ratios(
    series: &PhaseOffsetSeries,
    mask: Option<&[bool]>,
) -> Result<CrossDiffSet> {
    let images = series.images();
    let geom = images[0].geom().clone();
    let n = geom.len();
    let mut mask: Vec<bool> = match mask {
        Some(m) if m.len() != n => {
            return Err(shape_err(format!("mask has {} pixels, grid has {n}", m.len())))
        }
        Some(m) => m.to_vec(),
        None => vec![true; n],
    };
    let mut excluded = 0;
    for (i, m) in mask.iter_mut().enumerate() {
        if *m && images.iter().any(|img| img.data()[i].norm() == 0.0 || !img.data()[i].is_finite()) {
            *m = false;
            excluded += 1;
        }
    }
    let offsets = series.offsets();
    let mut pairs = Vec::new();
    for p in 0..images.len() {
        for q in p + 1..images.len() {
            let ratio = images[p]
                .data()
                .iter()
                .zip(images[q].data())
                .zip(&mask)
                .map(|((a, b), &m)| {
                    if m {
                        let z = a * b.conj();
                        z / z.norm()
                    } else {
                        C64::new(1.0, 0.0)
                    }
                })
                .collect();
            pairs.push(CrossPair {
                p,
                q,
                e: offsets[p].cos() - offsets[q].cos(),
                f: -offsets[p].sin() + offsets[q].sin(),
                ratio,
            });
        }
    }
    Ok(CrossDiffSet {
        geom,
        pairs,
        mask,
        excluded,
    })
}
