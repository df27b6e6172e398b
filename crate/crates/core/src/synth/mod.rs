//! Synthetic wavefields and phase-encoded images.

pub mod encode;
pub mod helmholtz;
pub mod noise;
pub mod plane;
pub mod twe;

pub use encode::{encode_phase_series, encoded_phase, even_offsets, EncodeConfig, PhaseOffsetSeries};
pub use helmholtz::{
    interior_residual, solve_helmholtz_phantom, wavenumber_for_modulus, Edge, HelmholtzSolution,
    Inclusion, PhantomConfig, Region, SceneSpec, SolverConfig, Source,
};
pub use noise::{add_complex_noise, realized_snr_db, NoiseMode};
pub use plane::{PlaneWave, PlaneWaveScene};
pub use twe::{
    build_training_batch, noise_intensity_for_snr, sample_twe_params, synth_patch, twe_signal,
    NoiseLevel, NoiseModel, Patch, SamplingConfig, TrainingBatch, TweParams,
};
