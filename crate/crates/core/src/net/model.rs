use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{config_err, shape_err, FormatError, Result};
use crate::grid::{GridGeom, C64};
use crate::io::format::{read_f64s, read_header, write_f64s, write_header};
use crate::synth::SamplingConfig;

use super::dense::ComplexDenseNet;
use super::train::{prepare_inputs, TrainConfig};

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MODEL_KIND: &str = "twenn-model";

/// How raw patches are scaled before the covariance is formed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalizationRecord {
    /// Every patch is divided by its own largest modulus.
    pub per_patch_max_modulus: bool,
    /// Whole wavefields are divided by their largest modulus before patches
    /// are cut (a no-op for the network once patches are rescaled, kept so
    /// intermediate artifacts are bounded by 1).
    pub global_max_modulus: bool,
}

impl Default for NormalizationRecord {
    fn default() -> Self {
        Self {
            per_patch_max_modulus: true,
            global_max_modulus: true,
        }
    }
}

/// The k̃′ and k̃″ networks plus everything needed to apply them.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub net_re: ComplexDenseNet,
    pub net_im: ComplexDenseNet,
    pub frequency_hz: f64,
    pub patch_geom: GridGeom,
    pub normalization: NormalizationRecord,
    pub sampling: SamplingConfig,
    pub train: TrainConfig,
    /// SHA-256 over the training setup.
    pub digest: String,
}

#[derive(Serialize)]
struct DigestInput<'a> {
    frequency_hz: f64,
    patch_dims: &'a [usize],
    spacing_mm: &'a [f64],
    widths: &'a [usize],
    normalization: &'a NormalizationRecord,
    sampling: &'a SamplingConfig,
    train: &'a TrainConfig,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelHeader {
    format_version: u32,
    kind: String,
    input_dim: usize,
    widths: Vec<usize>,
    param_count: usize,
    frequency_hz: f64,
    patch_dims: Vec<usize>,
    spacing_mm: Vec<f64>,
    normalization: NormalizationRecord,
    sampling: SamplingConfig,
    train: TrainConfig,
    digest: String,
}

pub fn training_digest(
    frequency_hz: f64,
    patch_geom: &GridGeom,
    widths: &[usize],
    normalization: &NormalizationRecord,
    sampling: &SamplingConfig,
    train: &TrainConfig,
) -> Result<String> {
    let json = serde_json::to_vec(&DigestInput {
        frequency_hz,
        patch_dims: patch_geom.dims(),
        spacing_mm: patch_geom.spacing_mm(),
        widths,
        normalization,
        sampling,
        train,
    })?;
    Ok(hex::encode(Sha256::digest(&json)))
}

impl TrainedModel {
    pub fn new(
        net_re: ComplexDenseNet,
        net_im: ComplexDenseNet,
        frequency_hz: f64,
        patch_geom: GridGeom,
        normalization: NormalizationRecord,
        sampling: SamplingConfig,
        train: TrainConfig,
    ) -> Result<Self> {
        if net_re.input_dim() != net_im.input_dim() || net_re.widths() != net_im.widths() {
            return Err(shape_err("the two networks must share their shape"));
        }
        if net_re.input_dim() != patch_geom.len() * patch_geom.len() {
            return Err(shape_err(format!(
                "input dimension {} does not match a {:?} patch",
                net_re.input_dim(),
                patch_geom.dims()
            )));
        }
        if !(frequency_hz > 0.0) {
            return Err(config_err("model frequency must be positive"));
        }
        let digest = training_digest(
            frequency_hz,
            &patch_geom,
            net_re.widths(),
            &normalization,
            &sampling,
            &train,
        )?;
        Ok(Self {
            net_re,
            net_im,
            frequency_hz,
            patch_geom,
            normalization,
            sampling,
            train,
            digest,
        })
    }

    pub fn omega(&self) -> f64 {
        std::f64::consts::TAU * self.frequency_hz
    }

    /// (k̃′, k̃″) for each raw patch.
    pub fn predict<'a, I>(&self, patches: I) -> Result<(Vec<f64>, Vec<f64>)>
    where
        I: ExactSizeIterator<Item = &'a [C64]>,
    {
        let (xr, xi) = prepare_inputs(patches, self.patch_geom.len())?;
        Ok((
            self.net_re.forward_batch(xr.view(), xi.view())?,
            self.net_im.forward_batch(xr.view(), xi.view())?,
        ))
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let header = ModelHeader {
            format_version: MODEL_FORMAT_VERSION,
            kind: MODEL_KIND.into(),
            input_dim: self.net_re.input_dim(),
            widths: self.net_re.widths().to_vec(),
            param_count: self.net_re.param_count(),
            frequency_hz: self.frequency_hz,
            patch_dims: self.patch_geom.dims().to_vec(),
            spacing_mm: self.patch_geom.spacing_mm().to_vec(),
            normalization: self.normalization.clone(),
            sampling: self.sampling.clone(),
            train: self.train.clone(),
            digest: self.digest.clone(),
        };
        write_header(w, &header)?;
        write_f64s(w, self.net_re.params().iter().chain(self.net_im.params()).copied())?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: &mut R) -> Result<Self> {
        let h: ModelHeader = read_header(r)?;
        if h.format_version != MODEL_FORMAT_VERSION {
            return Err(FormatError::VersionMismatch {
                found: h.format_version,
                supported: MODEL_FORMAT_VERSION,
            }
            .into());
        }
        if h.kind != MODEL_KIND {
            return Err(FormatError::MalformedHeader(format!("expected a model file, found kind {:?}", h.kind)).into());
        }
        let probe = ComplexDenseNet::zeros(h.input_dim, &h.widths)?;
        if probe.param_count() != h.param_count {
            return Err(FormatError::MalformedHeader(format!(
                "param_count {} disagrees with the declared shape ({})",
                h.param_count,
                probe.param_count()
            ))
            .into());
        }
        let mut payload = read_f64s(r, 2 * h.param_count)?;
        let im = payload.split_off(h.param_count);
        let net_re = ComplexDenseNet::from_params(h.input_dim, &h.widths, payload)?;
        let net_im = ComplexDenseNet::from_params(h.input_dim, &h.widths, im)?;
        let geom = GridGeom::new(h.patch_dims, h.spacing_mm)?;
        let model = Self::new(net_re, net_im, h.frequency_hz, geom, h.normalization, h.sampling, h.train)?;
        if model.digest != h.digest {
            return Err(FormatError::MalformedHeader("training digest does not match the recorded setup".into()).into());
        }
        Ok(model)
    }
}
