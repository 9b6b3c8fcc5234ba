use num_complex::Complex64;

use super::{ExperimentError, Mode, ObservationConfig};
use crate::beam::{
    evaluate_beam_with, moving_frame_evaluate_with, required_dx, time_grid, BeamField, BumpProfile, Modifier,
    SamplingSet, SpectralContext, TerminalSpectrum,
};
use crate::pde::{solve_correction, z_norm, BoundaryData, Grid1D, StateField};

/// A beam restricted to `(0, L)` plus the correction that removes its boundary
/// traces. Beam values are complex; the correction is solved for the real and
/// imaginary parts separately.
#[derive(Debug, Clone)]
pub struct CompositeBeam {
    pub eps: f64,
    pub spectrum: TerminalSpectrum,
    /// The whole-line beam sampled on `[0, L]` at the slice times.
    pub restricted: BeamField,
    pub grid: Grid1D,
    /// Beam traces at `x = 0` and `x = L` on the correction grid, real and imaginary parts.
    pub traces: [BoundaryData; 2],
    pub correction: Option<[StateField; 2]>,
    /// `restricted` plus the interpolated correction.
    pub composite: BeamField,
}

impl CompositeBeam {
    /// Correction values `(re, im)` of component `k` at level `level`, node `i`.
    pub fn correction_at(&self, level: usize, k: usize, i: usize) -> Complex64 {
        match &self.correction {
            Some([re, im]) => Complex64::new(re.states[level][k][i], im.states[level][k][i]),
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// `||sigma~(., 0)||_{L2(0, L)}` on the correction grid.
    pub fn correction_sigma0(&self) -> f64 {
        self.correction_norm_at(0, &[1.0, 0.0, 0.0])
    }

    /// `||(sigma~, v~, phi~)||^2_{L2(0,T;Z)}`.
    pub fn correction_spacetime_z(&self, weights: &[f64; 3]) -> f64 {
        let g = self.grid;
        let dt = g.dt();
        (0..=g.m)
            .map(|k| {
                let w = if k == 0 || k == g.m { 0.5 * dt } else { dt };
                w * self.correction_norm_at(k, weights).powi(2)
            })
            .sum()
    }

    fn correction_norm_at(&self, level: usize, weights: &[f64; 3]) -> f64 {
        match &self.correction {
            Some([re, im]) => {
                let a = z_norm(&self.grid, weights, &re.states[level]);
                let b = z_norm(&self.grid, weights, &im.states[level]);
                a.hypot(b)
            }
            None => 0.0,
        }
    }
}

fn evaluate(
    cfg: &ObservationConfig,
    spec: &TerminalSpectrum,
    set: &SamplingSet,
    modifier: Modifier,
) -> Result<BeamField, ExperimentError> {
    let components = [0, 1, 2];
    Ok(if cfg.mode == Mode::MovingFrame {
        moving_frame_evaluate_with(spec, cfg.model.bar_v, set, &components, modifier, cfg.exec)?
    } else {
        evaluate_beam_with(spec, set, &components, modifier, cfg.exec)?
    })
}

/// Beam values at the two ends, every correction level, split into real and imaginary boundary data.
pub(super) fn end_values(
    cfg: &ObservationConfig,
    spec: &TerminalSpectrum,
    grid: &Grid1D,
    modifier: Modifier,
) -> Result<[[Vec<Complex64>; 3]; 2], ExperimentError> {
    let times = grid.times();
    let mut out: [[Vec<Complex64>; 3]; 2] = Default::default();
    for (side, x) in [0.0, grid.length].into_iter().enumerate() {
        let f = evaluate(cfg, spec, &SamplingSet::trace(x, &times), modifier)?;
        for k in 0..3 {
            out[side][k] = f.values.iter().map(|v| v[k][0]).collect();
        }
    }
    Ok(out)
}

fn split(times: Vec<f64>, ends: &[[Vec<Complex64>; 3]; 2]) -> [BoundaryData; 2] {
    let part = |f: fn(&Complex64) -> f64, side: usize| ends[side].each_ref().map(|v| v.iter().map(f).collect());
    [
        BoundaryData { times: times.clone(), left: part(|z| z.re, 0), right: part(|z| z.re, 1) },
        BoundaryData { times, left: part(|z| z.im, 0), right: part(|z| z.im, 1) },
    ]
}

/// Builds the composite solution for one `eps`. The configuration is not re-validated.
pub fn composite_beam(eps: f64, cfg: &ObservationConfig) -> Result<CompositeBeam, ExperimentError> {
    let ctx = SpectralContext::new(cfg.family())?;
    let m = &cfg.model;
    let spectrum = TerminalSpectrum::new(&ctx, eps, cfg.x0, m.horizon, BumpProfile::standard_1d(), cfg.quadrature)?;
    let grid = Grid1D::new(cfg.grid_n, cfg.grid_m, m.length, m.horizon)?;
    let times = time_grid(m.horizon, cfg.nt);
    let set = SamplingSet::uniform(0.0, m.length, required_dx(spectrum.max_xi()), &times);
    let restricted = evaluate(cfg, &spectrum, &set, Modifier::Plain)?;
    let traces = split(grid.times(), &end_values(cfg, &spectrum, &grid, Modifier::Plain)?);
    let correction = if cfg.correction {
        let [re, im] = &traces;
        Some([solve_correction(m, re, &grid)?, solve_correction(m, im, &grid)?])
    } else {
        None
    };
    let mut beam = CompositeBeam { eps, spectrum, composite: restricted.clone(), restricted, grid, traces, correction };
    if beam.correction.is_some() {
        let stride = cfg.grid_m / (cfg.nt - 1);
        let dx = grid.dx();
        let last = grid.n + 1;
        let mut composite = beam.composite.clone();
        for (s, slice) in composite.slices.iter().enumerate() {
            let level = (slice.t / grid.dt()).round() as usize;
            debug_assert_eq!(level % stride, 0);
            for m_ in 0..slice.n {
                let x = slice.x(m_);
                let j = ((x / dx).floor() as usize).min(last - 1);
                let a = ((x - grid.x(j)) / dx).clamp(0.0, 1.0);
                for k in 0..3 {
                    let c = beam.correction_at(level, k, j) * (1.0 - a) + beam.correction_at(level, k, j + 1) * a;
                    composite.values[s][k][m_] += c;
                }
            }
        }
        beam.composite = composite;
    }
    Ok(beam)
}
