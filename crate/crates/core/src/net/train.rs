use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::grid::{GridGeom, C64};
use crate::rng::{stream_rng, streams};
use crate::synth::{build_training_batch, SamplingConfig};

use super::adam::{AdamConfig, AdamState};
use super::dense::{ComplexDenseNet, LAYER_WIDTHS};
use super::input::{covariance_into, normalize_slice};
use super::model::{NormalizationRecord, TrainedModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub seed: u64,
    pub steps: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            steps: 12_000,
            batch_size: 500,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.batch_size == 0 {
            return Err(config_err("steps and batch_size must be at least 1"));
        }
        self.adam.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRecord {
    pub step: usize,
    pub loss_re: f64,
    pub loss_im: f64,
}

/// Network input for a batch of raw patches: each patch is scaled to unit
/// peak modulus, then expanded to its covariance. Returns (re, im) matrices
/// of shape batch × n².
pub fn prepare_inputs<'a, I>(patches: I, patch_len: usize) -> Result<(Array2<f64>, Array2<f64>)>
where
    I: ExactSizeIterator<Item = &'a [C64]>,
{
    let batch = patches.len();
    let dim = patch_len * patch_len;
    let mut xr = Array2::zeros((batch, dim));
    let mut xi = Array2::zeros((batch, dim));
    let mut buf = Vec::with_capacity(patch_len);
    let mut cov = Vec::with_capacity(dim);
    for (n, p) in patches.enumerate() {
        buf.clear();
        buf.extend_from_slice(p);
        normalize_slice(&mut buf)?;
        covariance_into(&buf, &mut cov);
        for (j, z) in cov.iter().enumerate() {
            xr[[n, j]] = z.re;
            xi[[n, j]] = z.im;
        }
    }
    Ok((xr, xi))
}

pub fn train(
    frequency_hz: f64,
    patch_geom: &GridGeom,
    sampling: &SamplingConfig,
    config: &TrainConfig,
) -> Result<TrainedModel> {
    Ok(train_with_log(frequency_hz, patch_geom, sampling, config, |_| {})?.0)
}

/// Train the k̃′ and k̃″ networks side by side on freshly generated batches.
/// Both networks see the same batch at every step. `on_step` is called with
/// each log record as it is produced.
pub fn train_with_log(
    frequency_hz: f64,
    patch_geom: &GridGeom,
    sampling: &SamplingConfig,
    config: &TrainConfig,
    mut on_step: impl FnMut(&TrainLogRecord),
) -> Result<(TrainedModel, Vec<TrainLogRecord>)> {
    config.validate()?;
    sampling.validate()?;
    if !(frequency_hz > 0.0) {
        return Err(config_err("frequency must be positive"));
    }
    if patch_geom.ndim() != sampling.ndim || patch_geom.dims().iter().any(|&d| d != 3) {
        return Err(config_err(format!(
            "patch geometry {:?} does not match a {}D 3-pixel patch",
            patch_geom.dims(),
            sampling.ndim
        )));
    }
    let omega = std::f64::consts::TAU * frequency_hz;
    let patch_len = patch_geom.len();
    let input_dim = patch_len * patch_len;

    let mut net_re = ComplexDenseNet::random(
        input_dim,
        &LAYER_WIDTHS,
        &mut stream_rng(config.seed, streams::NET_INIT_RE),
    )?;
    let mut net_im = ComplexDenseNet::random(
        input_dim,
        &LAYER_WIDTHS,
        &mut stream_rng(config.seed, streams::NET_INIT_IM),
    )?;
    let mut adam_re = AdamState::new(net_re.param_count(), config.adam)?;
    let mut adam_im = AdamState::new(net_im.param_count(), config.adam)?;
    let mut grad = vec![0.0; net_re.param_count()];
    let mut batch_rng = stream_rng(config.seed, streams::TRAIN_BATCHES);
    let mut log = Vec::with_capacity(config.steps);

    for step in 0..config.steps {
        let batch = build_training_batch(sampling, patch_geom, omega, config.batch_size, &mut batch_rng)?;
        let (xr, xi) = prepare_inputs(batch.patches.iter().map(|p| p.data()), patch_len)?;

        let loss_re = net_re.loss_and_grad(xr.view(), xi.view(), &batch.k_re, &mut grad)?;
        if !loss_re.is_finite() {
            return Err(Error::NonFinite { stage: "training k' network", iteration: step });
        }
        adam_re.step(net_re.params_mut(), &grad)?;

        let loss_im = net_im.loss_and_grad(xr.view(), xi.view(), &batch.k_im, &mut grad)?;
        if !loss_im.is_finite() {
            return Err(Error::NonFinite { stage: "training k'' network", iteration: step });
        }
        adam_im.step(net_im.params_mut(), &grad)?;

        let rec = TrainLogRecord { step, loss_re, loss_im };
        on_step(&rec);
        log.push(rec);
    }

    let model = TrainedModel::new(
        net_re,
        net_im,
        frequency_hz,
        patch_geom.clone(),
        NormalizationRecord::default(),
        sampling.clone(),
        config.clone(),
    )?;
    Ok((model, log))
}
