use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::grid::{ComplexGrid, Grid, C64};
use crate::net::{AdamConfig, AdamState};
use crate::synth::PhaseOffsetSeries;

use super::cross::cross_phase_ratios;
use super::gradient::{encoding_pseudo_inverse, wrapped_phase_gradient, GradientStencil};
use super::objective::evaluate;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    #[default]
    Zero,
    /// Per-pixel least squares on the wrapped phases.
    WrappedLeastSquares,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UnwrapConfig {
    pub learning_rate: f64,
    pub lambda: f64,
    pub max_iterations: usize,
    pub init: InitMode,
    pub stencil: GradientStencil,
}

impl Default for UnwrapConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.005,
            lambda: 1000.0,
            max_iterations: 4000,
            init: InitMode::Zero,
            stencil: GradientStencil::Angle,
        }
    }
}

impl UnwrapConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(config_err("unwrap learning rate must be positive"));
        }
        if !(self.lambda >= 0.0) {
            return Err(config_err("lambda must be non-negative"));
        }
        if self.max_iterations == 0 {
            return Err(config_err("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub iteration: usize,
    pub dc1: f64,
    pub dc2: f64,
    pub total: f64,
}

#[derive(Clone, Debug)]
pub struct UnwrapOutcome {
    pub displacement: ComplexGrid,
    /// Objective before each update, plus one final row after the last.
    pub log: Vec<ConvergenceRecord>,
    pub mask: Vec<bool>,
    pub excluded_pixels: usize,
}

/// Closed-form `(HᵀH)⁻¹Hᵀϕ` per pixel with `ϕ_j = arg I_j`.
pub fn wrapped_least_squares(series: &PhaseOffsetSeries) -> Result<ComplexGrid> {
    let [pr, pi] = encoding_pseudo_inverse(series.offsets())?;
    let geom = series.images()[0].geom().clone();
    Ok(Grid::from_fn(geom, |i| {
        let mut z = C64::new(0.0, 0.0);
        for (j, img) in series.images().iter().enumerate() {
            let phi = img.data()[i].arg();
            z += C64::new(pr[j] * phi, pi[j] * phi);
        }
        z
    }))
}

pub fn unwrap(series: &PhaseOffsetSeries, config: &UnwrapConfig) -> Result<UnwrapOutcome> {
    unwrap_masked(series, config, None)
}

/// Minimize the dual data-consistency objective with ADAM.
pub fn unwrap_masked(
    series: &PhaseOffsetSeries,
    config: &UnwrapConfig,
    mask: Option<&[bool]>,
) -> Result<UnwrapOutcome> {
    config.validate()?;
    let cross = cross_phase_ratios(series, mask)?;
    let targets = wrapped_phase_gradient(series, config.stencil)?;
    let geom = cross.geom.clone();
    let n = geom.len();

    let mut params = vec![0.0; 2 * n];
    if config.init == InitMode::WrappedLeastSquares {
        let init = wrapped_least_squares(series)?;
        for (i, z) in init.data().iter().enumerate() {
            params[i] = z.re;
            params[n + i] = z.im;
        }
    }
    let mut adam = AdamState::new(2 * n, AdamConfig::with_learning_rate(config.learning_rate))?;
    let mut grad = vec![0.0; 2 * n];
    let mut log = Vec::with_capacity(config.max_iterations + 1);

    for it in 0..=config.max_iterations {
        let v = evaluate(&params, &cross, &targets, config.lambda, &mut grad);
        if !v.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                stage: "dual-dc objective",
                iteration: it,
            });
        }
        log.push(ConvergenceRecord {
            iteration: it,
            dc1: v.dc1,
            dc2: v.dc2,
            total: v.total,
        });
        if it == config.max_iterations {
            break;
        }
        adam.step(&mut params, &grad)?;
    }

    let data = (0..n).map(|i| C64::new(params[i], params[n + i])).collect();
    Ok(UnwrapOutcome {
        displacement: Grid::from_vec(geom, data)?,
        log,
        mask: cross.mask,
        excluded_pixels: cross.excluded,
    })
}

/// Subtract the masked mean of `est − truth` from `est`, component-wise.
pub fn gauge_adjust(est: &ComplexGrid, truth: &ComplexGrid, mask: &[bool]) -> Result<ComplexGrid> {
    est.same_geom(truth)?;
    let (sum, cnt) = est
        .data()
        .iter()
        .zip(truth.data())
        .zip(mask)
        .filter(|(_, &m)| m)
        .fold((C64::new(0.0, 0.0), 0usize), |(s, c), ((e, t), _)| (s + (e - t), c + 1));
    if cnt == 0 {
        return Err(Error::Degenerate("gauge mask is empty".into()));
    }
    let shift = sum / cnt as f64;
    Ok(est.map(|z| z - shift))
}
