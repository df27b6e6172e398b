use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::grid::ComplexGrid;
use crate::rng::{complex_gaussian, Rng};
use crate::synth::twe::noise_intensity_for_snr;

/// How much noise to add to a full field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NoiseMode {
    /// Add `b·ℂ(r)` per pixel.
    Intensity { b: f64 },
    /// Solve `b` from `SNR_dB = 10·log10(mean|u|² / b²)` over the mask.
    SnrDb { snr_db: f64 },
}

/// Add circular complex Gaussian noise. Returns the noisy field and the
/// intensity `b` that was used. The mask (if any) only restricts where the
/// signal power is measured; noise is added everywhere.
pub fn add_complex_noise(
    field: &ComplexGrid,
    mode: NoiseMode,
    mask: Option<&[bool]>,
    rng: &mut Rng,
) -> Result<(ComplexGrid, f64)> {
    let b = match mode {
        NoiseMode::Intensity { b } => b,
        NoiseMode::SnrDb { snr_db } => {
            if let Some(m) = mask {
                if m.len() != field.len() {
                    return Err(shape_err("noise mask does not match field"));
                }
            }
            let (sum, n) = field
                .data()
                .iter()
                .enumerate()
                .filter(|(i, _)| mask.is_none_or(|m| m[*i]))
                .fold((0.0, 0usize), |(s, n), (_, z)| (s + z.norm_sqr(), n + 1));
            if n == 0 || sum == 0.0 {
                return Err(Error::Degenerate(
                    "cannot set an SNR on an all-zero field".into(),
                ));
            }
            noise_intensity_for_snr(sum / n as f64, snr_db)
        }
    };
    let mut out = field.clone();
    if b > 0.0 {
        for z in out.data_mut() {
            *z += complex_gaussian(rng) * b;
        }
    }
    Ok((out, b))
}

/// Realized SNR in dB of `noisy` against the clean reference.
pub fn realized_snr_db(clean: &ComplexGrid, noisy: &ComplexGrid) -> f64 {
    let (ps, pn) = clean
        .data()
        .iter()
        .zip(noisy.data())
        .fold((0.0, 0.0), |(ps, pn), (c, n)| (ps + c.norm_sqr(), pn + (n - c).norm_sqr()));
    10.0 * (ps / pn).log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, GridGeom, C64};
    use crate::rng::stream_rng;

    fn plane_wave(n: usize) -> ComplexGrid {
        let g = GridGeom::square(n, n, 1.0).unwrap();
        Grid::from_fn(g.clone(), |i| C64::from_polar(1.0, 0.3 * g.coords(i)[1] as f64))
    }

    #[test]
    fn zero_intensity_is_identity() {
        let u = plane_wave(16);
        let (v, b) = add_complex_noise(&u, NoiseMode::Intensity { b: 0.0 }, None, &mut stream_rng(0, 0)).unwrap();
        assert_eq!(b, 0.0);
        assert_eq!(u, v);
    }

    #[test]
    fn realized_snr_close_to_target() {
        let u = plane_wave(128);
        let (v, _) = add_complex_noise(&u, NoiseMode::SnrDb { snr_db: 28.0 }, None, &mut stream_rng(1, 0)).unwrap();
        let snr = realized_snr_db(&u, &v);
        assert!((snr - 28.0).abs() < 0.5, "{snr}");
    }

    #[test]
    fn zero_db_on_unit_wave_gives_unit_b() {
        let u = plane_wave(8);
        let (_, b) = add_complex_noise(&u, NoiseMode::SnrDb { snr_db: 0.0 }, None, &mut stream_rng(1, 0)).unwrap();
        assert!((b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn snr_on_zero_field_fails() {
        let g = GridGeom::square(4, 4, 1.0).unwrap();
        let u = Grid::filled(g, C64::new(0.0, 0.0));
        let r = add_complex_noise(&u, NoiseMode::SnrDb { snr_db: 10.0 }, None, &mut stream_rng(1, 0));
        assert!(matches!(r, Err(Error::Degenerate(_))));
    }
}
