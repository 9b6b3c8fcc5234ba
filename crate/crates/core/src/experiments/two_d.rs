use serde::Serialize;

use super::ExperimentError;
use crate::beam::{
    evaluate_beam_2d, scaling_study_2d, time_grid, BoxGrid, Region2D, Scaling2DConfig, Scaling2DReport, SpectralContext,
    Spectrum2D,
};
use crate::exec::map_slice;
use crate::fit::{power_fit, PowerFit};
use crate::io::{fmt_f64, CsvTable};
use crate::spectral::SymbolFamily;

/// The 2D whole-plane beam observed on a box; no boundary correction is applied.
#[derive(Debug, Clone)]
pub struct TwoDConfig {
    pub scaling: Scaling2DConfig,
    /// Density observation rectangle.
    pub o1: [(f64, f64); 2],
    /// Velocity observation rectangle; `None` is the whole box.
    pub o2: Option<[(f64, f64); 2]>,
}

impl TwoDConfig {
    /// Unit constants, box `(0,1)^2`, `O1 = (0.6, 0.9)^2`, `O2` the box, `x0 = (0.3, 0.3)`.
    pub fn unit() -> Self {
        TwoDConfig {
            scaling: Scaling2DConfig::new(crate::params::BarotropicModel::unit()),
            o1: [(0.6, 0.9), (0.6, 0.9)],
            o2: None,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let s = &self.scaling;
        let bad = |m: String| Err(ExperimentError::Config(m));
        for i in 0..2 {
            let (a, b) = self.o1[i];
            if !(s.lo[i] <= a && a < b && b <= s.hi[i]) {
                return bad(format!("o1 must be a rectangle inside the box on axis {i}"));
            }
            if !(s.x0[i] - s.eta > s.lo[i] && s.x0[i] + s.eta < s.hi[i]) {
                return bad("the eta-disc around x0 must lie inside the box".into());
            }
        }
        if self.o1.iter().zip(s.lo.iter().zip(&s.hi)).all(|((a, b), (lo, hi))| a <= lo && b >= hi) {
            return bad("o1 must be a proper subset of the box".into());
        }
        // Distance from x0 to the closed rectangle.
        let d2: f64 = (0..2)
            .map(|i| {
                let (a, b) = self.o1[i];
                let c = s.x0[i].clamp(a, b);
                (s.x0[i] - c).powi(2)
            })
            .sum();
        if d2.sqrt() <= s.eta {
            return bad("the eta-disc around x0 must not meet o1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoDRow {
    pub eps: f64,
    /// `||sigma(., 0)||^2 + ||v(., 0)||^2` on the box.
    pub lhs: f64,
    pub sigma_o1: f64,
    pub v_o2: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoDReport {
    pub rows: Vec<TwoDRow>,
    pub ratio_fit: Option<PowerFit>,
    /// Whole-plane estimates on the same ladder.
    pub scaling: Scaling2DReport,
}

impl TwoDReport {
    pub fn decay_factor(&self) -> f64 {
        self.rows.last().expect("non-empty").ratio / self.rows[0].ratio
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["mode", "eps", "lhs", "rhs", "ratio"]);
        for r in &self.rows {
            t.push(vec!["two-d".into(), fmt_f64(r.eps), fmt_f64(r.lhs), fmt_f64(r.rhs), fmt_f64(r.ratio)]);
        }
        t
    }
}

pub fn two_d_ratio(cfg: &TwoDConfig) -> Result<TwoDReport, ExperimentError> {
    cfg.validate()?;
    let scaling = scaling_study_2d(&cfg.scaling)?;
    let s = &cfg.scaling;
    let ctx = SpectralContext::new(SymbolFamily::barotropic(s.model))?;
    let times = time_grid(s.horizon, s.nt);
    let o1 = Region2D::rect(cfg.o1[0], cfg.o1[1]);
    let o2 = cfg.o2.map_or_else(Region2D::whole, |r| Region2D::rect(r[0], r[1]));
    let rows = map_slice(s.exec, &s.ladder, |&eps| -> Result<TwoDRow, ExperimentError> {
        let spec = Spectrum2D::new(&ctx, eps, s.x0, s.bar_xi, s.horizon, s.quadrature)?;
        let grid = BoxGrid::resolving(&spec, s.lo, s.hi);
        let field = evaluate_beam_2d(&spec, &grid, &times, &[0, 1, 2], s.exec)?;
        let lhs = field.space_norm(0, &[0, 1, 2], &Region2D::whole());
        let sigma_o1 = field.spacetime_norm(&[0], &o1);
        let v_o2 = field.spacetime_norm(&[1, 2], &o2);
        let rhs = sigma_o1 + v_o2;
        Ok(TwoDRow { eps, lhs, sigma_o1, v_o2, rhs, ratio: rhs / lhs })
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    Ok(TwoDReport { ratio_fit: power_fit(&eps, &ratios), rows, scaling })
}
