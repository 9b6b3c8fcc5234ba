use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use super::composite::{composite_beam, end_values, CompositeBeam};
use super::{ExperimentError, Mode, ObservationConfig};
use crate::beam::{window_norm, Modifier, NormKind, Region, SpectralContext};
use crate::exec::map_slice;
use crate::fit::{power_fit, PowerFit};
use crate::io::{fmt_f64, CsvTable};
use crate::pde::Mask;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Term {
    pub name: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub eps: f64,
    /// `||sigma(., 0)||^2 + ||v(., 0)||^2 + ||phi(., 0)||^2` on `(0, L)`.
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// The observed pieces summing to `rhs`.
    pub terms: Vec<Term>,
    /// Composite `||sigma(., 0)||_{L2(0, L)}`.
    pub sigma0: f64,
    pub correction_sigma0: f64,
    /// `||(sigma~, v~, phi~)||^2_{L2(0,T;Z)}`.
    pub correction_spacetime: f64,
}

impl ReportRow {
    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservabilityReport {
    pub mode: Mode,
    pub rows: Vec<ReportRow>,
    pub ratio_fit: Option<PowerFit>,
    pub a1: f64,
    /// `(1/(8 pi))^2 e^{-4 a1 T}`.
    pub lhs_floor: f64,
}

impl ObservabilityReport {
    pub fn ratio_slope(&self) -> Option<f64> {
        self.ratio_fit.map(|f| f.slope)
    }

    /// Ratio at the smallest `eps` over the ratio at the largest.
    pub fn decay_factor(&self) -> f64 {
        self.rows.last().expect("non-empty").ratio / self.rows[0].ratio
    }

    pub fn min_lhs(&self) -> f64 {
        self.rows.iter().map(|r| r.lhs).fold(f64::INFINITY, f64::min)
    }

    /// Strict decrease from the second ladder entry on.
    pub fn ratio_decreasing(&self) -> bool {
        self.rows[1..].windows(2).all(|w| w[1].ratio < w[0].ratio)
    }

    pub fn term_fit(&self, name: &str) -> Option<PowerFit> {
        let eps: Vec<f64> = self.rows.iter().map(|r| r.eps).collect();
        let v: Option<Vec<f64>> = self.rows.iter().map(|r| r.term(name)).collect();
        power_fit(&eps, &v?)
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["mode", "eps", "lhs", "rhs", "ratio"]);
        for r in &self.rows {
            t.push(vec![self.mode.name().into(), fmt_f64(r.eps), fmt_f64(r.lhs), fmt_f64(r.rhs), fmt_f64(r.ratio)]);
        }
        t
    }
}

fn region(m: Mask) -> Option<Region> {
    match m {
        Mask::Nowhere => None,
        Mask::Everywhere => Some(Region::Whole),
        Mask::Interval(a, b) => Some(Region::interval(a, b)),
    }
}

fn trapezoid(ts: &[f64], ys: &[f64]) -> f64 {
    ts.windows(2).zip(ys.windows(2)).map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1])).sum()
}

/// `int_0^T |R rho theta sigma + rho^2 nu0 v_x|^2 dt` at one end of the interval.
fn boundary_flux(cfg: &ObservationConfig, beam: &CompositeBeam) -> Result<f64, ExperimentError> {
    let m = &cfg.model;
    let grid = beam.grid;
    let side = if cfg.observe_left { 0 } else { 1 };
    let plain = end_values(cfg, &beam.spectrum, &grid, Modifier::Plain)?;
    let deriv = end_values(cfg, &beam.spectrum, &grid, Modifier::SpaceDerivative)?;
    let dx = grid.dx();
    let last = grid.n + 1;
    let flux: Vec<f64> = (0..=grid.m)
        .map(|k| {
            let c = |k_: usize, i: usize| beam.correction_at(k, k_, i);
            let (sigma_c, vx_c) = if side == 1 {
                (c(0, last), (3.0 * c(1, last) - 4.0 * c(1, last - 1) + c(1, last - 2)) / (2.0 * dx))
            } else {
                (c(0, 0), (-3.0 * c(1, 0) + 4.0 * c(1, 1) - c(1, 2)) / (2.0 * dx))
            };
            let sigma: Complex64 = plain[side][0][k] + sigma_c;
            let vx: Complex64 = deriv[side][1][k] + vx_c;
            (m.r * m.bar_rho * m.bar_theta * sigma + m.bar_rho * m.bar_rho * m.nu0() * vx).norm_sqr()
        })
        .collect();
    Ok(trapezoid(&grid.times(), &flux))
}

fn row(cfg: &ObservationConfig, eps: f64) -> Result<ReportRow, ExperimentError> {
    let beam = composite_beam(eps, cfg)?;
    let f = &beam.composite;
    let h = cfg.model.horizon;
    let at0 = |k| window_norm(f, k, &Region::Whole, (0.0, 0.0), NormKind::L2Space);
    let lhs0 = [at0(0)?, at0(1)?, at0(2)?];
    let observed: &[(&'static str, usize, Mask)] = match cfg.mode {
        Mode::Interior | Mode::MovingFrame => &[("sigma_o1", 0, cfg.o1), ("v_o2", 1, cfg.o2), ("phi_o3", 2, cfg.o3)],
        Mode::DerivativeForm => &[("v_o2", 1, cfg.o2), ("phi_o3", 2, cfg.o3)],
        Mode::Boundary | Mode::TwoD => &[],
    };
    let mut terms = Vec::new();
    for &(name, k, mask) in observed {
        let value = match region(mask) {
            Some(r) => window_norm(f, k, &r, (0.0, h), NormKind::L2SpaceTime)?,
            None => 0.0,
        };
        terms.push(Term { name, value });
    }
    if cfg.mode == Mode::Boundary {
        terms.push(Term { name: "boundary_flux", value: boundary_flux(cfg, &beam)? });
    }
    let lhs: f64 = lhs0.iter().sum();
    let rhs: f64 = terms.iter().map(|t| t.value).sum();
    Ok(ReportRow {
        eps,
        lhs,
        rhs,
        ratio: rhs / lhs,
        terms,
        sigma0: lhs0[0].sqrt(),
        correction_sigma0: beam.correction_sigma0(),
        correction_spacetime: beam.correction_spacetime_z(&cfg.model.z_weights()),
    })
}

/// Runs the ladder without checking the geometry, for negative controls.
pub fn observability_unchecked(cfg: &ObservationConfig) -> Result<ObservabilityReport, ExperimentError> {
    let ctx = SpectralContext::new(cfg.family())?;
    for &e in &cfg.ladder {
        ctx.check_eps(e)?;
    }
    let rows = map_slice(cfg.exec, &cfg.ladder, |&e| row(cfg, e)).into_iter().collect::<Result<Vec<_>, _>>()?;
    let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let t = cfg.model.horizon;
    Ok(ObservabilityReport {
        mode: cfg.mode,
        ratio_fit: power_fit(&eps, &ratios),
        rows,
        a1: ctx.a1,
        lhs_floor: (1.0 / (8.0 * PI)).powi(2) * (-4.0 * ctx.a1 * t).exp(),
    })
}

pub fn observability_report(cfg: &ObservationConfig) -> Result<ObservabilityReport, ExperimentError> {
    cfg.validate()?;
    observability_unchecked(cfg)
}

fn expect_mode(cfg: &ObservationConfig, mode: Mode) -> Result<(), ExperimentError> {
    if cfg.mode != mode {
        return Err(ExperimentError::Config(format!("expected mode {}, got {}", mode.name(), cfg.mode.name())));
    }
    Ok(())
}

pub fn interior_ratio(cfg: &ObservationConfig) -> Result<ObservabilityReport, ExperimentError> {
    expect_mode(cfg, Mode::Interior)?;
    observability_report(cfg)
}

pub fn boundary_ratio(cfg: &ObservationConfig) -> Result<ObservabilityReport, ExperimentError> {
    expect_mode(cfg, Mode::Boundary)?;
    observability_report(cfg)
}

pub fn derivative_form_ratio(cfg: &ObservationConfig) -> Result<ObservabilityReport, ExperimentError> {
    expect_mode(cfg, Mode::DerivativeForm)?;
    observability_report(cfg)
}

pub fn moving_frame_ratio(cfg: &ObservationConfig) -> Result<ObservabilityReport, ExperimentError> {
    expect_mode(cfg, Mode::MovingFrame)?;
    observability_report(cfg)
}
