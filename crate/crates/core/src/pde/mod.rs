//! Finite differences on `(0, L)`: the coupled forward and adjoint systems,
//! the correction problem with boundary data, and the scalar heat equation.

mod banded;
mod convergence;
mod heat;
mod system;

pub use banded::{BandedLu, BandedMatrix};
pub use convergence::{
    convergence_study, duality_residual, duality_residual_weighted, duality_study, ConvergenceRow, ConvergenceStudy,
    DualityStudy, DualityTerms, Refinement, StudyTarget,
};
pub use heat::{solve_heat, HeatStepper};
pub use system::{
    solve_adjoint, solve_correction, solve_forward, solve_system, BoundaryData, ControlInput, LinearSystem, Orientation,
    StateField, Stepper,
};

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PdeError {
    #[error("singular pivot in column {row}")]
    Singular { row: usize },
    #[error("grid needs N >= 16 and M >= 16, got N = {n}, M = {m}")]
    GridTooSmall { n: usize, m: usize },
    #[error("transport CFL number {cfl} exceeds 1")]
    Cfl { cfl: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("{0}")]
    BadInput(String),
}

/// `N` interior nodes `x_i = i dx`, `dx = L/(N+1)`, and `M` steps of `dt = T/M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid1D {
    pub n: usize,
    pub m: usize,
    pub length: f64,
    pub horizon: f64,
}

impl Grid1D {
    pub fn new(n: usize, m: usize, length: f64, horizon: f64) -> Result<Self, PdeError> {
        if n < 16 || m < 16 {
            return Err(PdeError::GridTooSmall { n, m });
        }
        if !(length > 0.0 && horizon > 0.0) {
            return Err(PdeError::BadInput("length and horizon must be positive".into()));
        }
        Ok(Grid1D { n, m, length, horizon })
    }

    pub fn dx(&self) -> f64 {
        self.length / (self.n + 1) as f64
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.m as f64
    }

    /// Nodes including both boundary points.
    pub fn nodes(&self) -> usize {
        self.n + 2
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.n + 1 {
            self.length
        } else {
            i as f64 * self.dx()
        }
    }

    pub fn t(&self, k: usize) -> f64 {
        if k == self.m {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nodes()).map(|i| self.x(i)).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.m).map(|k| self.t(k)).collect()
    }

    /// Trapezoid weights on the nodes.
    pub fn trapezoid(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.nodes()).map(|i| if i == 0 || i == self.n + 1 { 0.5 * dx } else { dx }).collect()
    }

    pub fn check_cfl(&self, speed: f64) -> Result<(), PdeError> {
        let cfl = speed.abs() * self.dt() / self.dx();
        if cfl > 1.0 {
            return Err(PdeError::Cfl { cfl });
        }
        Ok(())
    }
}

/// Where a control acts or an observation is taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Mask {
    Nowhere,
    Everywhere,
    /// The open interval `(a, b)`.
    Interval(f64, f64),
}

impl Mask {
    pub fn indicator(&self, x: f64) -> f64 {
        match *self {
            Mask::Nowhere => 0.0,
            Mask::Everywhere => 1.0,
            Mask::Interval(a, b) => {
                if a < x && x < b {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn on_grid(&self, grid: &Grid1D) -> Vec<f64> {
        grid.xs().into_iter().map(|x| self.indicator(x)).collect()
    }
}

/// Discrete `L2(0, L)` inner product with trapezoid weights.
pub fn inner(grid: &Grid1D, a: &[f64], b: &[f64]) -> f64 {
    grid.trapezoid().iter().zip(a).zip(b).map(|((w, x), y)| w * x * y).sum()
}

/// Weighted sum of the three component inner products.
pub fn z_inner(grid: &Grid1D, weights: &[f64; 3], a: &[Vec<f64>; 3], b: &[Vec<f64>; 3]) -> f64 {
    (0..3).map(|c| weights[c] * inner(grid, &a[c], &b[c])).sum()
}

pub fn z_norm(grid: &Grid1D, weights: &[f64; 3], a: &[Vec<f64>; 3]) -> f64 {
    z_inner(grid, weights, a, a).max(0.0).sqrt()
}
