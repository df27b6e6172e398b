use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::grid::{ComplexGrid, GridGeom, C64};
use crate::inversion::di_patch;
use crate::io::table::fmt_f64;
use crate::net::TrainedModel;
use crate::rng::{stream_rng, streams};
use crate::synth::{sample_twe_params, synth_patch, NoiseLevel, NoiseModel, SamplingConfig};

/// Test-set generation and binning for mean-error surfaces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurfaceConfig {
    pub seed: u64,
    pub samples: usize,
    pub frequency_hz: f64,
    pub spacing_mm: f64,
    pub ndim: usize,
    pub k_re_range: [f64; 2],
    pub k_im_range: [f64; 2],
    /// Uniform SNR range in dB; `None` gives noiseless patches.
    pub snr_db_range: Option<[f64; 2]>,
    pub snr_bin_db: f64,
    pub k_re_bin: f64,
    pub k_im_bin: f64,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            samples: 100_000,
            frequency_hz: 60.0,
            spacing_mm: 3.0,
            ndim: 2,
            k_re_range: [0.35, 1.35],
            k_im_range: [0.0, 0.28],
            snr_db_range: Some([12.0, 38.0]),
            snr_bin_db: 4.0,
            k_re_bin: 0.1,
            k_im_bin: 0.04,
        }
    }
}

impl SurfaceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(config_err("samples must be >= 1"));
        }
        if !(self.frequency_hz > 0.0 && self.spacing_mm > 0.0) {
            return Err(config_err("frequency and spacing must be positive"));
        }
        if let Some([a, b]) = self.snr_db_range {
            if !(a <= b && a.is_finite() && b.is_finite()) {
                return Err(config_err(format!("bad SNR range [{a}, {b}]")));
            }
        }
        if !(self.snr_bin_db > 0.0 && self.k_re_bin > 0.0 && self.k_im_bin > 0.0) {
            return Err(config_err("bin widths must be positive"));
        }
        self.sampling().validate()
    }

    pub fn sampling(&self) -> SamplingConfig {
        SamplingConfig {
            k_re_range: self.k_re_range,
            k_im_range: self.k_im_range,
            noise: match self.snr_db_range {
                Some([min_db, max_db]) => NoiseModel::SnrRange { min_db, max_db },
                None => NoiseModel::Intensity { b: 0.0 },
            },
            ndim: self.ndim,
        }
    }

    pub fn patch_geom(&self) -> Result<GridGeom> {
        GridGeom::patch(self.ndim, self.spacing_mm)
    }

    pub fn omega(&self) -> f64 {
        std::f64::consts::TAU * self.frequency_hz
    }

    fn snr_axis(&self) -> BinAxis {
        match self.snr_db_range {
            Some([a, b]) => BinAxis::new(a, b, self.snr_bin_db),
            None => BinAxis { edges: vec![f64::INFINITY, f64::INFINITY] },
        }
    }
}

/// Contiguous bins `[e_i, e_{i+1})`, the last one closed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinAxis {
    pub edges: Vec<f64>,
}

impl BinAxis {
    pub fn new(lo: f64, hi: f64, width: f64) -> Self {
        let n = (((hi - lo) / width) - 1e-9).ceil().max(1.0) as usize;
        let mut edges: Vec<f64> = (0..n).map(|i| lo + width * i as f64).collect();
        edges.push(hi);
        Self { edges }
    }

    pub fn len(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, v: f64) -> usize {
        let n = self.len();
        if !v.is_finite() {
            return n - 1;
        }
        self.edges[1..n].iter().take_while(|&&e| v >= e).count()
    }
}

/// Ground truth and estimate for one test patch.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleError {
    pub snr_db: f64,
    pub k_true: C64,
    pub k_est: C64,
}

impl SampleError {
    pub fn abs_err_re(&self) -> f64 {
        (self.k_est.re - self.k_true.re).abs()
    }

    pub fn abs_err_im(&self) -> f64 {
        (self.k_est.im - self.k_true.im).abs()
    }
}

pub struct TestSet {
    pub patches: Vec<ComplexGrid>,
    pub k_true: Vec<C64>,
    pub snr_db: Vec<f64>,
    pub omega: f64,
}

pub fn generate_test_set(config: &SurfaceConfig) -> Result<TestSet> {
    config.validate()?;
    let geom = config.patch_geom()?;
    let sampling = config.sampling();
    let omega = config.omega();
    let mut rng = stream_rng(config.seed, streams::TEST_SET);
    let mut set = TestSet {
        patches: Vec::with_capacity(config.samples),
        k_true: Vec::with_capacity(config.samples),
        snr_db: Vec::with_capacity(config.samples),
        omega,
    };
    for _ in 0..config.samples {
        let params = sample_twe_params(&mut rng, &sampling, omega)?;
        let patch = synth_patch(&params, &geom, &mut rng)?;
        set.snr_db.push(match params.noise {
            NoiseLevel::SnrDb(s) => s,
            NoiseLevel::Intensity(_) => f64::INFINITY,
        });
        set.k_true.push(params.k_norm);
        set.patches.push(patch.data);
    }
    Ok(set)
}

#[derive(Clone, Copy)]
pub enum Estimator<'a> {
    Twenn(&'a TrainedModel),
    /// Direct inversion at the patch centre; a failed quotient reports 0.
    Di,
}

impl Estimator<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Twenn(_) => "twenn",
            Estimator::Di => "di",
        }
    }
}

/// Run an estimator over a test set.
pub fn evaluate(estimator: Estimator<'_>, set: &TestSet) -> Result<Vec<SampleError>> {
    let est: Vec<C64> = match estimator {
        Estimator::Twenn(model) => {
            let mut out = Vec::with_capacity(set.patches.len());
            for chunk in set.patches.chunks(4096) {
                let (r, i) = model.predict(chunk.iter().map(|p| p.data()))?;
                out.extend(r.into_iter().zip(i).map(|(a, b)| C64::new(a, b)));
            }
            out
        }
        Estimator::Di => set
            .patches
            .iter()
            .map(|p| di_patch(p, set.omega).unwrap_or(C64::new(0.0, 0.0)))
            .collect(),
    };
    Ok(set
        .k_true
        .iter()
        .zip(&set.snr_db)
        .zip(est)
        .map(|((&k_true, &snr_db), k_est)| SampleError { snr_db, k_true, k_est })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceCell {
    pub snr_bin: usize,
    pub k_bin: usize,
    pub mean_abs_error: f64,
    pub count: usize,
}

/// Mean absolute error binned over (SNR, k̃′) and (SNR, k̃″). Only cells
/// with at least one sample are listed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorSurface {
    pub snr: BinAxis,
    pub k_re: BinAxis,
    pub k_im: BinAxis,
    pub re_cells: Vec<SurfaceCell>,
    pub im_cells: Vec<SurfaceCell>,
}

fn bin_cells(
    samples: &[SampleError],
    snr: &BinAxis,
    k: &BinAxis,
    key: impl Fn(&SampleError) -> (f64, f64),
) -> Vec<SurfaceCell> {
    let nk = k.len();
    let mut sums = vec![0.0; snr.len() * nk];
    let mut counts = vec![0usize; snr.len() * nk];
    for s in samples {
        let (kv, err) = key(s);
        let c = snr.index(s.snr_db) * nk + k.index(kv);
        sums[c] += err;
        counts[c] += 1;
    }
    (0..sums.len())
        .filter(|&c| counts[c] > 0)
        .map(|c| SurfaceCell {
            snr_bin: c / nk,
            k_bin: c % nk,
            mean_abs_error: sums[c] / counts[c] as f64,
            count: counts[c],
        })
        .collect()
}

impl ErrorSurface {
    pub fn from_samples(samples: &[SampleError], config: &SurfaceConfig) -> Self {
        let snr = config.snr_axis();
        let k_re = BinAxis::new(config.k_re_range[0], config.k_re_range[1], config.k_re_bin);
        let k_im = BinAxis::new(config.k_im_range[0], config.k_im_range[1], config.k_im_bin);
        let re_cells = bin_cells(samples, &snr, &k_re, |s| (s.k_true.re, s.abs_err_re()));
        let im_cells = bin_cells(samples, &snr, &k_im, |s| (s.k_true.im, s.abs_err_im()));
        Self { snr, k_re, k_im, re_cells, im_cells }
    }

    /// Mean |k̃′ error| per SNR bin over all k̃′ bins, as (bin, mean, count).
    pub fn snr_marginal_re(&self) -> Vec<(usize, f64, usize)> {
        (0..self.snr.len())
            .filter_map(|b| {
                let (s, n) = self
                    .re_cells
                    .iter()
                    .filter(|c| c.snr_bin == b)
                    .fold((0.0, 0), |(s, n), c| (s + c.mean_abs_error * c.count as f64, n + c.count));
                (n > 0).then(|| (b, s / n as f64, n))
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "component", "snr_lo_db", "snr_hi_db", "k_lo", "k_hi", "mean_abs_error", "count",
        ])?;
        for (name, cells, axis) in [("k_re", &self.re_cells, &self.k_re), ("k_im", &self.im_cells, &self.k_im)] {
            for c in cells {
                out.write_record([
                    name.to_string(),
                    fmt_f64(self.snr.edges[c.snr_bin]),
                    fmt_f64(self.snr.edges[c.snr_bin + 1]),
                    fmt_f64(axis.edges[c.k_bin]),
                    fmt_f64(axis.edges[c.k_bin + 1]),
                    fmt_f64(c.mean_abs_error),
                    c.count.to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

pub fn write_samples_csv<W: Write>(samples: &[SampleError], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["snr_db", "k_re_true", "k_im_true", "k_re_est", "k_im_est"])?;
    for s in samples {
        out.write_record([
            fmt_f64(s.snr_db),
            fmt_f64(s.k_true.re),
            fmt_f64(s.k_true.im),
            fmt_f64(s.k_est.re),
            fmt_f64(s.k_est.im),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Build the surface for one estimator in one call.
pub fn mean_error_surface(
    estimator: Estimator<'_>,
    config: &SurfaceConfig,
) -> Result<(ErrorSurface, Vec<SampleError>)> {
    let set = generate_test_set(config)?;
    let samples = evaluate(estimator, &set)?;
    Ok((ErrorSurface::from_samples(&samples, config), samples))
}
