//! Observability experiments: composite beams on `(0, L)`, both sides of each
//! observability inequality along an `eps` ladder, and the fitted decay of
//! their ratio.

mod composite;
mod geometry;
mod report;
mod two_d;

pub use composite::{composite_beam, CompositeBeam};
pub use geometry::{certificate, time_threshold, Certificate, MovingGeometry, Placement};
pub use report::{
    boundary_ratio, derivative_form_ratio, interior_ratio, moving_frame_ratio, observability_report,
    observability_unchecked, ObservabilityReport, ReportRow, Term,
};
pub use two_d::{two_d_ratio, TwoDConfig, TwoDReport, TwoDRow};

use serde::Serialize;
use thiserror::Error;

use crate::beam::{BeamError, QuadratureSpec, DEFAULT_LADDER};
use crate::exec::Execution;
use crate::params::FluidModel;
use crate::pde::{Mask, PdeError};
use crate::spectral::{SpectralError, SymbolFamily};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("horizon T = {horizon} is not below the threshold {threshold}; no admissible beam placement exists")]
    Infeasible { horizon: f64, threshold: f64 },
    #[error(transparent)]
    Beam(#[from] BeamError),
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Interior,
    Boundary,
    DerivativeForm,
    MovingFrame,
    TwoD,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::Interior, Mode::Boundary, Mode::DerivativeForm, Mode::MovingFrame, Mode::TwoD];

    pub fn name(&self) -> &'static str {
        match self {
            Mode::Interior => "interior",
            Mode::Boundary => "boundary",
            Mode::DerivativeForm => "derivative-form",
            Mode::MovingFrame => "moving-frame",
            Mode::TwoD => "two-d",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Mode::ALL.into_iter().find(|m| m.name() == s)
    }
}

/// One 1D observability experiment. `model.length`, `model.horizon` and
/// `model.bar_v` fix the domain, the horizon and the transport speed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservationConfig {
    pub mode: Mode,
    pub model: FluidModel,
    pub o1: Mask,
    pub o2: Mask,
    pub o3: Mask,
    pub x0: f64,
    pub eta: f64,
    pub ladder: Vec<f64>,
    /// Interior nodes and time steps of the correction solve.
    pub grid_n: usize,
    pub grid_m: usize,
    /// Beam time slices on `[0, T]`; `nt - 1` must divide `grid_m`.
    pub nt: usize,
    pub quadrature: QuadratureSpec,
    /// Add the boundary correction to the restricted beam.
    pub correction: bool,
    /// Boundary mode: observe at `x = 0` instead of `x = L`.
    pub observe_left: bool,
    pub geometry: Option<MovingGeometry>,
    pub exec: Execution,
}

impl ObservationConfig {
    fn base(mode: Mode) -> Self {
        ObservationConfig {
            mode,
            model: FluidModel::p_star(),
            o1: Mask::Interval(0.6, 0.9),
            o2: Mask::Everywhere,
            o3: Mask::Everywhere,
            x0: 0.3,
            eta: 0.1,
            ladder: DEFAULT_LADDER.to_vec(),
            grid_n: 128,
            grid_m: 256,
            nt: 33,
            quadrature: QuadratureSpec::default(),
            correction: true,
            observe_left: false,
            geometry: None,
            exec: Execution::default(),
        }
    }

    /// `O1 = (0.6, 0.9)`, `O2 = O3 = (0, 1)`, `x0 = 0.3`, `eta = 0.1` for the reference model.
    pub fn interior() -> Self {
        Self::base(Mode::Interior)
    }

    pub fn boundary() -> Self {
        ObservationConfig { o1: Mask::Nowhere, o2: Mask::Nowhere, o3: Mask::Nowhere, ..Self::base(Mode::Boundary) }
    }

    /// `O2 = (0.6, 0.9)`, `O3 = (0, 1)`. The derivative-form family has no correction solver.
    pub fn derivative_form() -> Self {
        ObservationConfig {
            o1: Mask::Nowhere,
            o2: Mask::Interval(0.6, 0.9),
            correction: false,
            ..Self::base(Mode::DerivativeForm)
        }
    }

    /// `L = 1`, `(l1, l2) = (0.3, 0.7)`, `bar_v = 2`, `T = 0.1`, with the beam
    /// placed by the feasibility certificate.
    pub fn moving_frame() -> Self {
        let mut c = ObservationConfig {
            model: FluidModel::p_star().with_bar_v(2.0).with_horizon(0.1),
            geometry: Some(MovingGeometry { l1: 0.3, l2: 0.7 }),
            ..Self::base(Mode::MovingFrame)
        };
        c.place().expect("the reference geometry is feasible");
        c
    }

    /// Overwrites `o1`, `x0` and `eta` from the moving-frame certificate.
    pub fn place(&mut self) -> Result<Certificate, ExperimentError> {
        let geom = self.geometry.ok_or_else(|| ExperimentError::Config("moving-frame mode needs (l1, l2)".into()))?;
        let cert = certificate(&geom, self.model.length, self.model.bar_v, self.model.horizon)?;
        self.o1 = Mask::Interval(geom.l1, geom.l2);
        self.x0 = cert.x0;
        self.eta = cert.eta;
        Ok(cert)
    }

    pub fn family(&self) -> SymbolFamily {
        match self.mode {
            Mode::DerivativeForm => SymbolFamily::DerivativeForm1D(self.model),
            _ => SymbolFamily::NonBarotropic1D(self.model),
        }
    }

    /// Interval swept by the `eta`-ball around `x(t) = x0 - bar_v (T - t)`.
    pub fn swept(&self) -> (f64, f64) {
        let travel = if self.mode == Mode::MovingFrame { self.model.bar_v * self.model.horizon } else { 0.0 };
        (self.x0 - self.eta - travel, self.x0 + self.eta)
    }

    /// Geometric and numerical preconditions, checked before any computation.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        let l = self.model.length;
        if self.mode == Mode::TwoD {
            return bad("use TwoDConfig for the two-dimensional experiment".into());
        }
        if self.ladder.len() < 4 || self.ladder.windows(2).any(|w| !(w[1] < w[0])) {
            return bad("the ladder must be strictly decreasing with at least four entries".into());
        }
        if !(self.eta > 0.0) {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        if self.nt < 3 || !self.grid_m.is_multiple_of(self.nt - 1) {
            return bad(format!("nt - 1 = {} must divide grid_m = {}", self.nt.saturating_sub(1), self.grid_m));
        }
        for (name, m) in [("o1", self.o1), ("o2", self.o2), ("o3", self.o3)] {
            if let Mask::Interval(a, b) = m {
                if !(0.0 <= a && a < b && b <= l) {
                    return bad(format!("{name} = ({a}, {b}) must lie in (0, {l})"));
                }
            }
        }
        let (lo, hi) = self.swept();
        if !(lo > 0.0 && hi < l) {
            return bad(format!("the eta-ball [{lo}, {hi}] must lie inside (0, {l})"));
        }
        if self.mode != Mode::MovingFrame && self.model.bar_v != 0.0 {
            return bad("only the moving-frame mode allows bar_v > 0".into());
        }
        let proper = |m: Mask| matches!(m, Mask::Interval(a, b) if a > 0.0 || b < l);
        let disjoint = |m: Mask| match m {
            Mask::Interval(a, b) => hi <= a || lo >= b,
            Mask::Nowhere => true,
            Mask::Everywhere => false,
        };
        match self.mode {
            Mode::Interior => {
                if !proper(self.o1) {
                    return bad("o1 must be a proper subinterval of (0, L)".into());
                }
                if !disjoint(self.o1) {
                    return bad("the eta-ball around x0 must not meet o1".into());
                }
            }
            Mode::DerivativeForm => {
                if !proper(self.o2) {
                    return bad("o2 must be a proper subinterval of (0, L)".into());
                }
                if !disjoint(self.o2) {
                    return bad("the eta-ball around x0 must not meet o2".into());
                }
                if self.correction {
                    return bad("the correction solver covers the non-barotropic system only".into());
                }
            }
            Mode::MovingFrame => {
                let geom = self.geometry.ok_or_else(|| ExperimentError::Config("moving-frame mode needs (l1, l2)".into()))?;
                if self.o1 != Mask::Interval(geom.l1, geom.l2) {
                    return bad("o1 must equal (l1, l2) in moving-frame mode".into());
                }
                if self.model.bar_v > 0.0 {
                    let threshold = time_threshold(&geom, l, self.model.bar_v)?;
                    if self.model.horizon >= threshold {
                        return Err(ExperimentError::Infeasible { horizon: self.model.horizon, threshold });
                    }
                }
                if !disjoint(self.o1) {
                    return bad(format!("the swept interval [{lo}, {hi}] must not meet (l1, l2)"));
                }
            }
            Mode::Boundary | Mode::TwoD => {}
        }
        Ok(())
    }
}
