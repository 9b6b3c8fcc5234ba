//! Gaussian-beam type solutions of the adjoint systems built from a terminal
//! spectrum concentrated near `xi = 1/eps`.

mod field;
mod norms;
mod profile;
mod scaling;
mod spectrum;
mod two_d;

pub use field::{
    beam_spatial_derivative, evaluate_beam, evaluate_beam_with, moving_frame_evaluate,
    moving_frame_evaluate_with, shift_to_static, time_grid, BeamField, Modifier, SamplingSet, Slice,
};
pub use norms::{required_dx, trace_norms, window_norm, NormKind, Region, TraceNorms};
pub use profile::{make_profile, BumpProfile, ProfileKind};
pub use scaling::{
    scaling_study, Quantity, QuantitySeries, ScalingConfig, ScalingReport, DEFAULT_LADDER, FIT_RESIDUAL_LIMIT,
};
pub use spectrum::{QuadratureSpec, SpectralContext, TerminalSpectrum, CONTEXT_GRID};
pub use two_d::{
    evaluate_beam_2d, scaling_study_2d, BeamField2D, BoxGrid, Quadrature2D, Region2D, Scaling2DConfig,
    Scaling2DReport, Scaling2DRow, Spectrum2D,
};

use thiserror::Error;

use crate::spectral::SpectralError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BeamError {
    #[error("eps = {eps} exceeds the admissible maximum {max_eps}")]
    Inadmissible { eps: f64, max_eps: f64 },
    #[error("grid spacing {dx} is coarser than the required {required}")]
    UnderResolved { dx: f64, required: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("{0}")]
    BadInput(String),
}
