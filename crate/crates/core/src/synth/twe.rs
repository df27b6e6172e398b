//! Traveling-wave-expansion patches: random superpositions of damped plane
//! waves sharing one complex wavenumber, plus complex Gaussian noise.

use std::f64::consts::TAU;

use rand::distr::weighted::WeightedIndex;
use rand::Rng as _;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, shape_err, Error, Result};
use crate::grid::{ComplexGrid, Grid, GridGeom, C64};
use crate::rng::{complex_gaussian, Rng};

/// Relative frequencies of M = 1..=8 traveling waves per patch.
pub const WAVE_COUNT_WEIGHTS: [u32; 8] = [6, 4, 3, 2, 1, 1, 1, 1];

pub const MAX_WAVES: usize = 8;

/// Noise added to generated patches.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NoiseModel {
    /// Fixed intensity `b`: `ζ = b·ℂ`.
    Intensity { b: f64 },
    /// Per-patch SNR drawn uniformly in dB; `b` solved from the patch power.
    SnrRange { min_db: f64, max_db: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    /// Normalized real wavenumber range k̃′ (s/m).
    pub k_re_range: [f64; 2],
    /// Normalized imaginary wavenumber range k̃″ (s/m).
    pub k_im_range: [f64; 2],
    pub noise: NoiseModel,
    /// 2 or 3.
    pub ndim: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            k_re_range: [0.35, 1.35],
            k_im_range: [0.0, 0.28],
            noise: NoiseModel::Intensity { b: 0.001 },
            ndim: 2,
        }
    }
}

impl SamplingConfig {
    /// Training noise for in-vivo data, where physiological noise is larger.
    pub fn in_vivo() -> Self {
        Self {
            noise: NoiseModel::Intensity { b: 0.3 },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [a, b] = self.k_re_range;
        if !(a > 0.0 && a <= b && b.is_finite()) {
            return Err(config_err(format!(
                "k_re_range must satisfy 0 < min <= max, got {:?}",
                self.k_re_range
            )));
        }
        let [a, b] = self.k_im_range;
        if !(a >= 0.0 && a <= b && b.is_finite()) {
            return Err(config_err(format!(
                "k_im_range must satisfy 0 <= min <= max, got {:?}",
                self.k_im_range
            )));
        }
        match self.noise {
            NoiseModel::Intensity { b } if !(b >= 0.0 && b.is_finite()) => {
                return Err(config_err(format!("noise intensity must be >= 0, got {b}")))
            }
            NoiseModel::SnrRange { min_db, max_db } if !(min_db <= max_db && max_db.is_finite() && min_db.is_finite()) => {
                return Err(config_err(format!(
                    "SNR range must satisfy min <= max, got [{min_db}, {max_db}]"
                )))
            }
            _ => {}
        }
        if self.ndim != 2 && self.ndim != 3 {
            return Err(config_err(format!("ndim must be 2 or 3, got {}", self.ndim)));
        }
        Ok(())
    }
}

/// Noise level of one concrete patch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseLevel {
    Intensity(f64),
    SnrDb(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TweParams {
    pub amplitudes: Vec<C64>,
    /// Unit propagation directions as `[x, y, z]`.
    pub directions: Vec<[f64; 3]>,
    /// Normalized complex wavenumber k̃ = k/ω (s/m).
    pub k_norm: C64,
    /// Angular frequency ω (rad/s).
    pub omega: f64,
    pub noise: NoiseLevel,
}

impl TweParams {
    /// Single plane wave `a·exp(i k n̂·r)`.
    pub fn plane_wave(amplitude: C64, direction: [f64; 3], k_norm: C64, omega: f64) -> Self {
        Self {
            amplitudes: vec![amplitude],
            directions: vec![direction],
            k_norm,
            omega,
            noise: NoiseLevel::Intensity(0.0),
        }
    }

    /// Complex wavenumber k = ω·k̃ in rad/m.
    pub fn k(&self) -> C64 {
        self.k_norm * self.omega
    }

    pub fn wave_count(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.amplitudes.len();
        if m == 0 || m > MAX_WAVES || self.directions.len() != m {
            return Err(config_err(format!(
                "{m} amplitudes / {} directions (need 1..=8, equal counts)",
                self.directions.len()
            )));
        }
        for n in &self.directions {
            let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(config_err(format!("direction {n:?} is not a unit vector")));
            }
        }
        if !(self.k_norm.re > 0.0) || self.k_norm.im < 0.0 {
            return Err(config_err(format!(
                "wavenumber needs k' > 0 and k'' >= 0, got {}",
                self.k_norm
            )));
        }
        if !(self.omega > 0.0) {
            return Err(config_err("omega must be positive"));
        }
        Ok(())
    }
}

fn uniform_in(rng: &mut Rng, [lo, hi]: [f64; 2]) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Draw one set of traveling-wave parameters.
pub fn sample_twe_params(rng: &mut Rng, config: &SamplingConfig, omega: f64) -> Result<TweParams> {
    config.validate()?;
    if !(omega > 0.0) {
        return Err(config_err("omega must be positive"));
    }
    let counts = WeightedIndex::new(WAVE_COUNT_WEIGHTS).expect("static weights");
    let m = counts.sample(rng) + 1;

    let mut amplitudes = Vec::with_capacity(m);
    let mut directions = Vec::with_capacity(m);
    for _ in 0..m {
        let modulus: f64 = rng.random();
        let angle = TAU * rng.random::<f64>();
        amplitudes.push(C64::from_polar(modulus, angle));

        let theta = TAU * rng.random::<f64>();
        let dir = if config.ndim == 2 {
            [theta.cos(), theta.sin(), 0.0]
        } else {
            let z = 2.0 * rng.random::<f64>() - 1.0;
            let rho = (1.0 - z * z).sqrt();
            [rho * theta.cos(), rho * theta.sin(), z]
        };
        directions.push(dir);
    }

    let k_norm = C64::new(uniform_in(rng, config.k_re_range), uniform_in(rng, config.k_im_range));
    let noise = match config.noise {
        NoiseModel::Intensity { b } => NoiseLevel::Intensity(b),
        NoiseModel::SnrRange { min_db, max_db } => NoiseLevel::SnrDb(uniform_in(rng, [min_db, max_db])),
    };
    Ok(TweParams {
        amplitudes,
        directions,
        k_norm,
        omega,
        noise,
    })
}

/// A generated patch together with its regression targets (k̃′, k̃″).
#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    pub data: ComplexGrid,
    pub k_re: f64,
    pub k_im: f64,
}

fn check_patch_geom(geom: &GridGeom) -> Result<()> {
    if geom.dims().iter().any(|&d| d != 3) {
        return Err(shape_err(format!(
            "patches are 3x3 or 3x3x3, got {:?}",
            geom.dims()
        )));
    }
    Ok(())
}

/// Noise-free superposition `Σ a_m exp(i k n̂_m·r)` with `r` in metres from
/// the patch centre.
pub fn twe_signal(params: &TweParams, geom: &GridGeom) -> Result<ComplexGrid> {
    check_patch_geom(geom)?;
    params.validate()?;
    if !geom.is_3d() && params.directions.iter().any(|n| n[2] != 0.0) {
        return Err(shape_err("3D propagation directions on a 2D patch"));
    }
    let k = params.k();
    let ndim = geom.ndim();
    let centre = 1.0;
    Ok(Grid::from_fn(geom.clone(), |idx| {
        let c = geom.coords(idx);
        // r as [x, y, z] in metres
        let mut r = [0.0; 3];
        for axis in 0..ndim {
            r[ndim - 1 - axis] = (c[axis] as f64 - centre) * geom.spacing_m(axis);
        }
        params
            .amplitudes
            .iter()
            .zip(&params.directions)
            .map(|(a, n)| {
                let proj = n[0] * r[0] + n[1] * r[1] + n[2] * r[2];
                a * (C64::i() * k * proj).exp()
            })
            .sum()
    }))
}

/// Generate one noisy training/testing patch.
pub fn synth_patch(params: &TweParams, geom: &GridGeom, rng: &mut Rng) -> Result<Patch> {
    let mut data = twe_signal(params, geom)?;
    let b = match params.noise {
        NoiseLevel::Intensity(b) => b,
        NoiseLevel::SnrDb(snr) => {
            let power = data.data().iter().map(|z| z.norm_sqr()).sum::<f64>() / data.len() as f64;
            if power == 0.0 {
                return Err(Error::Degenerate("SNR noise requested on a zero patch".into()));
            }
            noise_intensity_for_snr(power, snr)
        }
    };
    if b > 0.0 {
        for z in data.data_mut() {
            *z += complex_gaussian(rng) * b;
        }
    }
    Ok(Patch {
        data,
        k_re: params.k_norm.re,
        k_im: params.k_norm.im,
    })
}

/// `b` such that `10·log10(power / b²) = snr_db`.
pub fn noise_intensity_for_snr(power: f64, snr_db: f64) -> f64 {
    (power / 10f64.powf(snr_db / 10.0)).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingBatch {
    pub patches: Vec<ComplexGrid>,
    pub k_re: Vec<f64>,
    pub k_im: Vec<f64>,
}

impl TrainingBatch {
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }
}

pub fn build_training_batch(
    config: &SamplingConfig,
    geom: &GridGeom,
    omega: f64,
    batch_size: usize,
    rng: &mut Rng,
) -> Result<TrainingBatch> {
    if batch_size == 0 {
        return Err(config_err("batch_size must be >= 1"));
    }
    if geom.ndim() != config.ndim {
        return Err(shape_err(format!(
            "sampling config is {}D but patch geometry is {}D",
            config.ndim,
            geom.ndim()
        )));
    }
    let mut batch = TrainingBatch {
        patches: Vec::with_capacity(batch_size),
        k_re: Vec::with_capacity(batch_size),
        k_im: Vec::with_capacity(batch_size),
    };
    for _ in 0..batch_size {
        let params = sample_twe_params(rng, config, omega)?;
        let patch = synth_patch(&params, geom, rng)?;
        batch.patches.push(patch.data);
        batch.k_re.push(patch.k_re);
        batch.k_im.push(patch.k_im);
    }
    Ok(batch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    const OMEGA: f64 = TAU * 60.0;

    #[test]
    fn wave_count_distribution_matches_ratios() {
        let mut rng = stream_rng(11, 0);
        let cfg = SamplingConfig::default();
        let n = 100_000;
        let mut counts = [0usize; 8];
        for _ in 0..n {
            counts[sample_twe_params(&mut rng, &cfg, OMEGA).unwrap().wave_count() - 1] += 1;
        }
        // Pearson chi-square against 6:4:3:2:1:1:1:1 / 19, 7 dof.
        let chi2: f64 = counts
            .iter()
            .zip(WAVE_COUNT_WEIGHTS)
            .map(|(&c, w)| {
                let e = n as f64 * w as f64 / 19.0;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        // 99th percentile of chi-square(7) is 18.475
        assert!(chi2 < 18.475, "chi2 = {chi2}, counts {counts:?}");
    }

    #[test]
    fn single_wave_probability() {
        let mut rng = stream_rng(3, 0);
        let cfg = SamplingConfig::default();
        let n = 1_000_000;
        let ones = (0..n)
            .filter(|_| sample_twe_params(&mut rng, &cfg, OMEGA).unwrap().wave_count() == 1)
            .count();
        let p = ones as f64 / n as f64;
        assert!((p - 6.0 / 19.0).abs() < 0.002, "P(M=1) = {p}");
    }

    #[test]
    fn collapsed_range_is_exact() {
        let mut rng = stream_rng(5, 0);
        let cfg = SamplingConfig {
            k_re_range: [0.7, 0.7],
            ..SamplingConfig::default()
        };
        for _ in 0..1000 {
            assert_eq!(sample_twe_params(&mut rng, &cfg, OMEGA).unwrap().k_norm.re, 0.7);
        }
    }

    #[test]
    fn inverted_or_invalid_ranges_are_rejected() {
        let mut rng = stream_rng(5, 0);
        for cfg in [
            SamplingConfig { k_re_range: [1.0, 0.5], ..Default::default() },
            SamplingConfig { k_re_range: [0.0, 0.5], ..Default::default() },
            SamplingConfig { k_im_range: [0.3, 0.1], ..Default::default() },
            SamplingConfig { ndim: 4, ..Default::default() },
        ] {
            assert!(matches!(sample_twe_params(&mut rng, &cfg, OMEGA), Err(Error::Config(_))));
        }
    }

    #[test]
    fn sphere_directions_are_centred_and_unit() {
        let mut rng = stream_rng(9, 0);
        let cfg = SamplingConfig { ndim: 3, ..Default::default() };
        let (mut sum_z, mut count) = (0.0, 0usize);
        while count < 1_000_000 {
            let p = sample_twe_params(&mut rng, &cfg, OMEGA).unwrap();
            for n in &p.directions {
                let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
                assert!((norm - 1.0).abs() < 1e-12);
                sum_z += n[2];
                count += 1;
            }
        }
        let mean = sum_z / count as f64;
        assert!(mean.abs() < 0.003, "mean z = {mean}");
    }

    #[test]
    fn plane_wave_patch_values() {
        let geom = GridGeom::patch(2, 3.0).unwrap();
        let params = TweParams::plane_wave(C64::new(1.0, 0.0), [1.0, 0.0, 0.0], C64::new(0.8, 0.0), OMEGA);
        let mut rng = stream_rng(0, 0);
        let p = synth_patch(&params, &geom, &mut rng).unwrap();
        assert_eq!(p.data.data()[4], C64::new(1.0, 0.0));
        let expected = (C64::i() * params.k().re * 3e-3).exp();
        assert!((p.data.data()[5] - expected).norm() < 1e-14);
    }

    #[test]
    fn damped_wave_modulus_decays_along_direction() {
        let geom = GridGeom::patch(2, 2.0).unwrap();
        let dir = [0.6, 0.8, 0.0];
        let params = TweParams::plane_wave(C64::from_polar(0.7, 1.0), dir, C64::new(0.9, 0.2), OMEGA);
        let signal = twe_signal(&params, &geom).unwrap();
        let k = params.k();
        for idx in 0..9 {
            let c = geom.coords(idx);
            let r = [(c[1] as f64 - 1.0) * 2e-3, (c[0] as f64 - 1.0) * 2e-3];
            let s = dir[0] * r[0] + dir[1] * r[1];
            let expected = 0.7 * (-k.im * s).exp();
            assert!((signal.data()[idx].norm() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn helmholtz_ratio_between_pixels() {
        let geom = GridGeom::patch(2, 1.5).unwrap();
        let dir = [-0.28, 0.96, 0.0];
        let dir_norm = (dir[0] * dir[0] + dir[1] * dir[1] as f64).sqrt();
        let dir = [dir[0] / dir_norm, dir[1] / dir_norm, 0.0];
        let params = TweParams::plane_wave(C64::new(0.3, -0.4), dir, C64::new(1.1, 0.15), OMEGA);
        let s = twe_signal(&params, &geom).unwrap();
        let k = params.k();
        let pos = |idx: usize| {
            let c = geom.coords(idx);
            [(c[1] as f64 - 1.0) * 1.5e-3, (c[0] as f64 - 1.0) * 1.5e-3]
        };
        for i in 0..9 {
            for j in 0..9 {
                let (ri, rj) = (pos(i), pos(j));
                let proj = dir[0] * (rj[0] - ri[0]) + dir[1] * (rj[1] - ri[1]);
                let expected = (C64::i() * k * proj).exp();
                let ratio = s.data()[j] / s.data()[i];
                assert!((ratio - expected).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn pure_noise_power_is_b_squared() {
        let geom = GridGeom::patch(2, 3.0).unwrap();
        let mut params = TweParams::plane_wave(C64::new(0.0, 0.0), [1.0, 0.0, 0.0], C64::new(0.7, 0.0), OMEGA);
        params.noise = NoiseLevel::Intensity(0.3);
        let mut rng = stream_rng(21, 0);
        let (mut sum, mut n) = (0.0, 0usize);
        while n < 1_000_000 {
            let p = synth_patch(&params, &geom, &mut rng).unwrap();
            sum += p.data.data().iter().map(|z| z.norm_sqr()).sum::<f64>();
            n += 9;
        }
        let mean = sum / n as f64;
        assert!((mean - 0.09).abs() < 0.001, "{mean}");
    }

    #[test]
    fn rejects_unsupported_patch_size() {
        let geom = GridGeom::square(5, 5, 1.0).unwrap();
        let params = TweParams::plane_wave(C64::new(1.0, 0.0), [1.0, 0.0, 0.0], C64::new(0.7, 0.0), OMEGA);
        assert!(synth_patch(&params, &geom, &mut stream_rng(0, 0)).is_err());
    }

    #[test]
    fn batch_is_deterministic_and_in_range() {
        let geom = GridGeom::patch(2, 3.0).unwrap();
        let cfg = SamplingConfig::default();
        let a = build_training_batch(&cfg, &geom, OMEGA, 500, &mut stream_rng(4, 1)).unwrap();
        let b = build_training_batch(&cfg, &geom, OMEGA, 500, &mut stream_rng(4, 1)).unwrap();
        assert_eq!(a.len(), 500);
        assert!(a.patches.iter().all(|p| p.geom().dims() == [3, 3]));
        for (pa, pb) in a.patches.iter().zip(&b.patches) {
            for (x, y) in pa.data().iter().zip(pb.data()) {
                assert_eq!(x.re.to_bits(), y.re.to_bits());
                assert_eq!(x.im.to_bits(), y.im.to_bits());
            }
        }
        assert!(a.k_re.iter().all(|&k| (0.35..=1.35).contains(&k)));
        assert!(a.k_im.iter().all(|&k| (0.0..=0.28).contains(&k)));
    }
}
