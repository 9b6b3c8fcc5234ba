use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::heat::solve_heat;
use super::system::{solve_adjoint, solve_forward, ControlInput, StateField};
use super::{Grid1D, Mask, PdeError};
use crate::exec::{map_slice, Execution};
use crate::fit::{power_fit, PowerFit};
use crate::io::{fmt_f64, CsvTable};
use crate::params::FluidModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum StudyTarget {
    /// The controlled `(rho, u, theta)` system; `bar_v > 0` selects the transported variant.
    Coupled(FluidModel),
    Heat { k0: f64, length: f64, horizon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Refinement {
    /// Fixed space grid, `dt` halved per level.
    Time,
    /// Fixed `dt`, `dx` halved per level; solutions are compared on the coarsest nodes.
    Space,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub dx: f64,
    pub dt: f64,
    /// Error against the manufactured solution at `t = T`.
    pub error_l2: f64,
    /// Norm of the difference to the previous, coarser level.
    pub successive_diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub target: StudyTarget,
    pub refinement: Refinement,
    pub rows: Vec<ConvergenceRow>,
    /// Richardson estimate `log2(d_{k-1} / d_k)` from the finest three levels.
    pub order: f64,
    pub design_order: f64,
}

impl ConvergenceStudy {
    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["dx", "dt", "error_L2"]);
        for r in &self.rows {
            t.push(vec![fmt_f64(r.dx), fmt_f64(r.dt), fmt_f64(r.error_l2)]);
        }
        t
    }

    /// Richardson order for every consecutive triple of levels.
    pub fn orders(&self) -> Vec<f64> {
        let d: Vec<f64> = self.rows.iter().filter_map(|r| r.successive_diff).collect();
        d.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
    }
}

/// Smooth fields compatible with the boundary conditions of both variants:
/// `u`, `theta` vanish at both ends and `rho` at `x = 0`.
fn coupled_exact(c: usize, x: f64, t: f64, l: f64) -> [f64; 4] {
    // value, d/dt, d/dx, d2/dx2
    let k = PI / l;
    match c {
        0 => {
            let (s, co) = (0.5 * k * x).sin_cos();
            [(1.0 + t) * s, s, (1.0 + t) * 0.5 * k * co, -(1.0 + t) * 0.25 * k * k * s]
        }
        1 => {
            let (s, co) = (k * x).sin_cos();
            let e = (-t).exp();
            [e * s, -e * s, e * k * co, -e * k * k * s]
        }
        _ => {
            let (s, co) = (2.0 * k * x).sin_cos();
            [t.cos() * s, -t.sin() * s, t.cos() * 2.0 * k * co, -t.cos() * 4.0 * k * k * s]
        }
    }
}

fn coupled_forcing(m: &FluidModel, c: usize, x: f64, t: f64) -> f64 {
    let e = |c| coupled_exact(c, x, t, m.length);
    let (r, u, th) = (e(0), e(1), e(2));
    let v = m.bar_v;
    match c {
        0 => r[1] + v * r[2] + m.bar_rho * u[2],
        1 => u[1] + v * u[2] + m.r * m.bar_theta / m.bar_rho * r[2] + m.r * th[2] - m.nu0() * u[3],
        _ => th[1] + v * th[2] + m.r * m.bar_theta / m.c_v * u[2] - m.k0() * th[3],
    }
}

fn heat_exact(x: f64, t: f64, l: f64) -> [f64; 3] {
    // value, d/dt, d2/dx2
    let k = PI / l;
    let (s1, s3) = ((k * x).sin(), (3.0 * k * x).sin());
    let e = (-t).exp();
    [
        (1.0 + t * t) * s1 + 0.5 * e * s3,
        2.0 * t * s1 - 0.5 * e * s3,
        -k * k * (1.0 + t * t) * s1 - 4.5 * k * k * e * s3,
    ]
}

/// Terminal state of one manufactured run, one vector per component.
fn terminal(target: &StudyTarget, grid: &Grid1D) -> Result<Vec<Vec<f64>>, PdeError> {
    let xs = grid.xs();
    match target {
        StudyTarget::Coupled(m) => {
            let init = [0, 1, 2].map(|c| xs.iter().map(|&x| coupled_exact(c, x, 0.0, m.length)[0]).collect());
            let controls = ControlInput::from_fn(grid, [Mask::Everywhere; 3], |c, x, t| coupled_forcing(m, c, x, t));
            Ok(solve_forward(m, &init, &controls, grid)?.terminal().to_vec())
        }
        StudyTarget::Heat { k0, length, .. } => {
            let init: Vec<f64> = xs.iter().map(|&x| heat_exact(x, 0.0, *length)[0]).collect();
            let h: Vec<Vec<f64>> = grid
                .times()
                .iter()
                .map(|&t| {
                    xs.iter()
                        .map(|&x| {
                            let e = heat_exact(x, t, *length);
                            e[1] - k0 * e[2]
                        })
                        .collect()
                })
                .collect();
            let traj = solve_heat(*k0, &init, Some(&h), grid)?;
            Ok(vec![traj.last().expect("non-empty").clone()])
        }
    }
}

fn exact_terminal(target: &StudyTarget, grid: &Grid1D) -> Vec<Vec<f64>> {
    let xs = grid.xs();
    match target {
        StudyTarget::Coupled(m) => {
            (0..3).map(|c| xs.iter().map(|&x| coupled_exact(c, x, m.horizon, m.length)[0]).collect()).collect()
        }
        StudyTarget::Heat { length, horizon, .. } => {
            vec![xs.iter().map(|&x| heat_exact(x, *horizon, *length)[0]).collect()]
        }
    }
}

/// L2 norm of `a - b` on the nodes of `grid`, reading `b` with stride `stride`.
fn l2_diff(grid: &Grid1D, a: &[Vec<f64>], b: &[Vec<f64>], stride: usize) -> f64 {
    let w = grid.trapezoid();
    a.iter()
        .zip(b)
        .map(|(x, y)| (0..grid.nodes()).map(|i| w[i] * (x[i] - y[i * stride]).powi(2)).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

/// Manufactured-solution refinement over `levels` grids.
pub fn convergence_study(target: StudyTarget, refinement: Refinement, levels: usize) -> Result<ConvergenceStudy, PdeError> {
    if levels < 3 {
        return Err(PdeError::BadInput("a Richardson estimate needs at least three levels".into()));
    }
    let (length, horizon, speed) = match target {
        StudyTarget::Coupled(m) => (m.length, m.horizon, m.bar_v),
        StudyTarget::Heat { length, horizon, .. } => (length, horizon, 0.0),
    };
    let grids: Vec<Grid1D> = (0..levels)
        .map(|k| {
            let (cells, steps) = match refinement {
                Refinement::Time => {
                    let need = (speed * horizon * 64.0 / length).ceil() as usize;
                    (64, need.max(16).next_power_of_two() << k)
                }
                Refinement::Space => {
                    let cells = 32usize << k;
                    let finest = 32usize << (levels - 1);
                    // Smallest power of two step count meeting the CFL bound on the finest grid.
                    let need = (speed * horizon * finest as f64 / length).ceil() as usize;
                    (cells, need.max(64).next_power_of_two())
                }
            };
            Grid1D::new(cells - 1, steps, length, horizon)
        })
        .collect::<Result<_, _>>()?;
    let solutions: Vec<Vec<Vec<f64>>> = map_slice(Execution::default(), &grids, |g| terminal(&target, g))
        .into_iter()
        .collect::<Result<_, _>>()?;
    let coarse = grids[0];
    let mut rows = Vec::with_capacity(levels);
    for (k, (g, sol)) in grids.iter().zip(&solutions).enumerate() {
        let error_l2 = l2_diff(g, &exact_terminal(&target, g), sol, 1);
        let successive_diff = (k > 0).then(|| {
            let stride = |j: usize| match refinement {
                Refinement::Time => 1,
                Refinement::Space => 1 << j,
            };
            // Both levels read on the coarsest nodes.
            let prev: Vec<Vec<f64>> =
                solutions[k - 1].iter().map(|v| (0..coarse.nodes()).map(|i| v[i * stride(k - 1)]).collect()).collect();
            l2_diff(&coarse, &prev, sol, stride(k))
        });
        rows.push(ConvergenceRow { dx: g.dx(), dt: g.dt(), error_l2, successive_diff });
    }
    let d: Vec<f64> = rows.iter().filter_map(|r| r.successive_diff).collect();
    let order = (d[d.len() - 2] / d[d.len() - 1]).log2();
    let design_order = match (target, refinement) {
        (_, Refinement::Time) => 1.0,
        // Upwinding is the only first-order ingredient in space.
        (StudyTarget::Coupled(m), Refinement::Space) => if m.bar_v > 0.0 { 1.0 } else { 2.0 },
        (StudyTarget::Heat { .. }, Refinement::Space) => 2.0,
    };
    Ok(ConvergenceStudy { target, refinement, rows, order, design_order })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualityTerms {
    pub terminal: f64,
    pub initial: f64,
    pub control: f64,
    pub residual: f64,
}

/// `<Y(T), S(T)>_Z - <Y(0), S(0)>_Z - sum_c w_c int int F_c chi_c S_c` with trapezoid
/// rules in space and time.
pub fn duality_residual(
    forward: &StateField,
    adjoint: &StateField,
    controls: &ControlInput,
    model: &FluidModel,
) -> Result<DualityTerms, PdeError> {
    duality_residual_weighted(forward, adjoint, controls, model.z_weights())
}

pub fn duality_residual_weighted(
    forward: &StateField,
    adjoint: &StateField,
    controls: &ControlInput,
    weights: [f64; 3],
) -> Result<DualityTerms, PdeError> {
    let grid = forward.grid;
    if adjoint.grid != grid || forward.states.len() != adjoint.states.len() || controls.fields.len() != grid.m + 1 {
        return Err(PdeError::GridMismatch("forward, adjoint and controls must share one grid".into()));
    }
    let pair = |a: &[Vec<f64>; 3], b: &[Vec<f64>; 3]| super::z_inner(&grid, &weights, a, b);
    let terminal = pair(forward.terminal(), adjoint.terminal());
    let initial = pair(forward.initial(), adjoint.initial());
    let chi = controls.masks.map(|m| m.on_grid(&grid));
    let dt = grid.dt();
    let control: f64 = (0..=grid.m)
        .map(|k| {
            let f = [0, 1, 2].map(|c| controls.fields[k][c].iter().zip(&chi[c]).map(|(a, b)| a * b).collect());
            let w = if k == 0 || k == grid.m { 0.5 * dt } else { dt };
            w * pair(&f, &adjoint.states[k])
        })
        .sum();
    Ok(DualityTerms { terminal, initial, control, residual: terminal - initial - control })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityStudy {
    pub rows: Vec<(Grid1D, DualityTerms)>,
    pub fit: PowerFit,
}

fn random_modes(rng: &mut ChaCha8Rng, count: usize) -> Vec<f64> {
    (0..count).map(|j| rng.gen_range(-1.0..1.0) / (1 + j) as f64).collect()
}

/// Duality residual for seeded smooth data under simultaneous refinement of
/// `dx` and `dt`; `weights` overrides the Z weights (used for a negative control).
pub fn duality_study(
    model: &FluidModel,
    seed: u64,
    levels: usize,
    weights: Option<[f64; 3]>,
) -> Result<DualityStudy, PdeError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Sine modes for Dirichlet components, cosine modes for rho and sigma.
    let coeff: Vec<Vec<f64>> = (0..9).map(|_| random_modes(&mut rng, 4)).collect();
    let l = model.length;
    let series = move |a: &[f64], x: f64, even: bool| -> f64 {
        a.iter()
            .enumerate()
            .map(|(j, c)| {
                let k = PI * (j + 1) as f64 / l;
                c * if even { (k * x).cos() } else { (k * x).sin() }
            })
            .sum()
    };
    let masks = [Mask::Interval(0.0, 0.5 * l), Mask::Interval(0.25 * l, 0.75 * l), Mask::Interval(0.5 * l, l)];
    let weights = weights.unwrap_or(model.z_weights());
    let grids: Vec<Grid1D> =
        (0..levels).map(|k| Grid1D::new((32usize << k) - 1, 16usize << k, l, model.horizon)).collect::<Result<_, _>>()?;
    let run = |g: &Grid1D| -> Result<DualityTerms, PdeError> {
        let xs = g.xs();
        let field = |a: &Vec<f64>, even: bool| xs.iter().map(|&x| series(a, x, even)).collect::<Vec<f64>>();
        let y0 = [field(&coeff[0], true), field(&coeff[1], false), field(&coeff[2], false)];
        let st = [field(&coeff[3], true), field(&coeff[4], false), field(&coeff[5], false)];
        let controls = ControlInput::from_fn(g, masks, |c, x, t| (1.0 + t) * series(&coeff[6 + c], x, true));
        let fwd = solve_forward(model, &y0, &controls, g)?;
        let adj = solve_adjoint(model, &st, None, g)?;
        duality_residual_weighted(&fwd, &adj, &controls, weights)
    };
    let terms: Vec<DualityTerms> = map_slice(Execution::default(), &grids, run).into_iter().collect::<Result<_, _>>()?;
    let dx: Vec<f64> = grids.iter().map(|g| g.dx()).collect();
    let res: Vec<f64> = terms.iter().map(|t| t.residual.abs()).collect();
    let fit = power_fit(&dx, &res).ok_or_else(|| PdeError::BadInput("duality residuals are not fit-able".into()))?;
    Ok(DualityStudy { rows: grids.into_iter().zip(terms).collect(), fit })
}
