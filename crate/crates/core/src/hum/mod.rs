//! Penalized HUM null controls: conjugate gradient on the dual functional of the
//! fully discrete dynamics, its heat-equation specialization, and the
//! composition of subsystem controls into controls of the coupled system.

use serde::Serialize;
use thiserror::Error;

use crate::exec::{map_slice, Execution};
use crate::io::{fmt_f64, CsvTable};
use crate::params::FluidModel;
use crate::pde::{
    inner, solve_forward, z_norm, ControlInput, Grid1D, HeatStepper, LinearSystem, Mask, PdeError, Stepper,
};

pub const DEFAULT_PENALTIES: [f64; 5] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HumError {
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error("initial density has discrete mean {mean:e}; null control needs mean zero")]
    NonZeroMean { mean: f64 },
    #[error("{0}")]
    BadInput(String),
}

/// Time-discrete linear dynamics `y^n = S (y^{n-1} + dt F^n)` with an inner
/// product given by `weights` and controls restricted by `mask`.
pub trait Dynamics: Sync {
    fn len(&self) -> usize;
    fn steps(&self) -> usize;
    fn dt(&self) -> f64;
    fn weights(&self) -> &[f64];
    fn mask(&self) -> &[f64];
    fn step(&self, y: &mut [f64], forcing: Option<&[f64]>);
    /// `p <- S* p` in the weighted inner product.
    fn adjoint_step(&self, p: &mut [f64]);
}

/// The coupled finite-difference system with controls on selected components.
pub struct CoupledDynamics {
    stepper: Stepper,
    mask: Vec<f64>,
}

impl CoupledDynamics {
    pub fn new(system: LinearSystem, grid: Grid1D, masks: [Mask; 3]) -> Result<Self, PdeError> {
        let stepper = Stepper::new(system, grid)?;
        let chi = masks.map(|m| m.on_grid(&grid));
        let mask = (0..stepper.len())
            .map(|r| if stepper.dirichlet()[r] { 0.0 } else { chi[r % 3][r / 3] })
            .collect();
        Ok(CoupledDynamics { stepper, mask })
    }
}

impl Dynamics for CoupledDynamics {
    fn len(&self) -> usize {
        self.stepper.len()
    }
    fn steps(&self) -> usize {
        self.stepper.grid.m
    }
    fn dt(&self) -> f64 {
        self.stepper.grid.dt()
    }
    fn weights(&self) -> &[f64] {
        self.stepper.weights()
    }
    fn mask(&self) -> &[f64] {
        &self.mask
    }
    fn step(&self, y: &mut [f64], forcing: Option<&[f64]>) {
        self.stepper.step(y, forcing, None)
    }
    fn adjoint_step(&self, p: &mut [f64]) {
        self.stepper.adjoint_step(p)
    }
}

pub struct HeatDynamics {
    stepper: HeatStepper,
    weights: Vec<f64>,
    mask: Vec<f64>,
}

impl HeatDynamics {
    pub fn new(k0: f64, grid: Grid1D, mask: Mask) -> Result<Self, PdeError> {
        let last = grid.n + 1;
        let mask = mask.on_grid(&grid).into_iter().enumerate().map(|(i, c)| if i == 0 || i == last { 0.0 } else { c }).collect();
        Ok(HeatDynamics { stepper: HeatStepper::new(k0, grid)?, weights: grid.trapezoid(), mask })
    }
}

impl Dynamics for HeatDynamics {
    fn len(&self) -> usize {
        self.weights.len()
    }
    fn steps(&self) -> usize {
        self.stepper.grid.m
    }
    fn dt(&self) -> f64 {
        self.stepper.grid.dt()
    }
    fn weights(&self) -> &[f64] {
        &self.weights
    }
    fn mask(&self) -> &[f64] {
        &self.mask
    }
    fn step(&self, y: &mut [f64], forcing: Option<&[f64]>) {
        self.stepper.step(y, forcing)
    }
    fn adjoint_step(&self, p: &mut [f64]) {
        self.stepper.adjoint_step(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CgOptions {
    /// Stop once the residual is below `tol` times the right-hand side, in the weighted norm.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions { tol: 1e-12, max_iter: 4000 }
    }
}

/// Optimal control of one penalized problem on abstract dynamics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HumSolution {
    pub penalty: f64,
    /// `controls[n]` acts on the step landing at level `n`; `controls[0]` is zero.
    #[serde(skip)]
    pub controls: Vec<Vec<f64>>,
    /// Terminal state of an independent forward run with `controls`.
    #[serde(skip)]
    pub terminal: Vec<f64>,
    pub terminal_norm: f64,
    /// `penalty * |z|`, the terminal norm implied by the optimality system.
    pub dual_terminal_norm: f64,
    pub control_cost: f64,
    pub cg_iters: usize,
    pub converged: bool,
    /// Dual functional after each CG iteration, starting from `z = 0`.
    pub dual_history: Vec<f64>,
}

fn w_inner(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, x), y)| w * x * y).sum()
}

/// Controls `chi p^{n-1}` generated by terminal adjoint data `z`.
fn adjoint_controls<D: Dynamics>(dyn_: &D, z: &[f64]) -> Vec<Vec<f64>> {
    let m = dyn_.steps();
    let mut controls = vec![Vec::new(); m + 1];
    controls[0] = vec![0.0; dyn_.len()];
    let mut p = z.to_vec();
    for n in (1..=m).rev() {
        dyn_.adjoint_step(&mut p);
        controls[n] = p.iter().zip(dyn_.mask()).map(|(a, c)| a * c).collect();
    }
    controls
}

fn run<D: Dynamics>(dyn_: &D, y0: Option<&[f64]>, controls: Option<&[Vec<f64>]>) -> Vec<f64> {
    let mut y = y0.map_or_else(|| vec![0.0; dyn_.len()], |v| v.to_vec());
    for n in 1..=dyn_.steps() {
        dyn_.step(&mut y, controls.map(|c| c[n].as_slice()));
    }
    y
}

fn gramian<D: Dynamics>(dyn_: &D, z: &[f64]) -> Vec<f64> {
    run(dyn_, None, Some(&adjoint_controls(dyn_, z)))
}

/// Minimizes `J(z) = |chi p|^2 / 2 + penalty |z|^2 / 2 + <y_free, z>` by conjugate
/// gradient and returns the control `chi p`.
pub fn hum_solve<D: Dynamics>(dyn_: &D, y0: &[f64], penalty: f64, opts: CgOptions) -> Result<HumSolution, HumError> {
    if !(penalty > 0.0) {
        return Err(HumError::BadInput(format!("penalty must be positive, got {penalty}")));
    }
    if y0.len() != dyn_.len() {
        return Err(HumError::BadInput("initial state does not match the dynamics".into()));
    }
    let w = dyn_.weights();
    let b: Vec<f64> = run(dyn_, Some(y0), None).iter().map(|v| -v).collect();
    let b_norm = w_inner(w, &b, &b).sqrt();
    let mut z = vec![0.0; b.len()];
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = b_norm * b_norm;
    let mut history = vec![0.0];
    let mut iters = 0;
    let mut converged = b_norm == 0.0;
    while !converged && iters < opts.max_iter {
        iters += 1;
        let mut q = gramian(dyn_, &p);
        for (qi, pi) in q.iter_mut().zip(&p) {
            *qi += penalty * pi;
        }
        let alpha = rr / w_inner(w, &p, &q);
        for i in 0..z.len() {
            z[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        let rr_new = w_inner(w, &r, &r);
        let br: Vec<f64> = b.iter().zip(&r).map(|(x, y)| x + y).collect();
        history.push(-0.5 * w_inner(w, &z, &br));
        converged = rr_new.sqrt() <= opts.tol * b_norm;
        let beta = rr_new / rr;
        for i in 0..p.len() {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    let controls = adjoint_controls(dyn_, &z);
    let terminal = run(dyn_, Some(y0), Some(&controls));
    let dt = dyn_.dt();
    let cost = controls.iter().skip(1).map(|f| dt * w_inner(w, f, f)).sum::<f64>().sqrt();
    Ok(HumSolution {
        penalty,
        terminal_norm: w_inner(w, &terminal, &terminal).sqrt(),
        dual_terminal_norm: penalty * w_inner(w, &z, &z).sqrt(),
        control_cost: cost,
        cg_iters: iters,
        converged,
        dual_history: history,
        controls,
        terminal,
    })
}

/// Penalized null control of the coupled system with `f = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct HumConfig {
    pub penalty: f64,
    pub cg: CgOptions,
    /// Masks of the velocity and temperature controls.
    pub o2: Mask,
    pub o3: Mask,
    pub initial: [Vec<f64>; 3],
}

impl HumConfig {
    pub fn new(initial: [Vec<f64>; 3], penalty: f64) -> Self {
        HumConfig { penalty, cg: CgOptions::default(), o2: Mask::Everywhere, o3: Mask::Everywhere, initial }
    }

    pub fn masks(&self) -> [Mask; 3] {
        [Mask::Nowhere, self.o2, self.o3]
    }

    pub fn validate(&self, grid: &Grid1D) -> Result<(), HumError> {
        if self.initial.iter().any(|v| v.len() != grid.nodes()) {
            return Err(PdeError::GridMismatch("initial state does not match the grid".into()).into());
        }
        let mean = discrete_mean(grid, &self.initial[0]);
        if mean.abs() >= 1e-12 {
            return Err(HumError::NonZeroMean { mean });
        }
        Ok(())
    }
}

pub fn discrete_mean(grid: &Grid1D, v: &[f64]) -> f64 {
    inner(grid, v, &vec![1.0; v.len()]) / grid.length
}

/// Subtracts the discrete mean so that `discrete_mean` vanishes.
pub fn remove_mean(grid: &Grid1D, v: &mut [f64]) {
    let m = discrete_mean(grid, v);
    v.iter_mut().for_each(|x| *x -= m);
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlResult {
    /// Fields `(f, g, h)` on every time level, with the configuration masks.
    pub controls: ControlInput,
    pub solution: HumSolution,
    pub initial_norm: f64,
}

impl ControlResult {
    pub fn terminal_norm(&self) -> f64 {
        self.solution.terminal_norm
    }
    pub fn control_cost(&self) -> f64 {
        self.solution.control_cost
    }
    pub fn cg_iters(&self) -> usize {
        self.solution.cg_iters
    }
}

fn unpack_controls(grid: &Grid1D, packed: &[Vec<f64>], masks: [Mask; 3]) -> ControlInput {
    let nn = grid.nodes();
    let fields = packed.iter().map(|y| [0, 1, 2].map(|c| (0..nn).map(|i| y[3 * i + c]).collect())).collect();
    ControlInput { fields, masks }
}

fn pack(state: &[Vec<f64>; 3]) -> Vec<f64> {
    (0..state[0].len()).flat_map(|i| [state[0][i], state[1][i], state[2][i]]).collect()
}

/// Penalized HUM for `system` (the full system or its barotropic part).
pub fn penalized_hum_with(system: LinearSystem, config: &HumConfig, grid: &Grid1D) -> Result<ControlResult, HumError> {
    config.validate(grid)?;
    solve_unchecked(system, config, grid)
}

fn solve_unchecked(system: LinearSystem, config: &HumConfig, grid: &Grid1D) -> Result<ControlResult, HumError> {
    let dyn_ = CoupledDynamics::new(system, *grid, config.masks())?;
    let solution = hum_solve(&dyn_, &pack(&config.initial), config.penalty, config.cg)?;
    let controls = unpack_controls(grid, &solution.controls, config.masks());
    Ok(ControlResult { controls, solution, initial_norm: z_norm(grid, &system.weights, &config.initial) })
}

pub fn penalized_hum(config: &HumConfig, model: &FluidModel, grid: &Grid1D) -> Result<ControlResult, HumError> {
    penalized_hum_with(LinearSystem::forward(model), config, grid)
}

/// `rho0 = cos(pi x / L)`, `u0 = sin(pi x / L)`, `theta0 = sin(2 pi x / L)`, mean removed from `rho0`.
pub fn smooth_initial(grid: &Grid1D) -> [Vec<f64>; 3] {
    let k = std::f64::consts::PI / grid.length;
    let xs = grid.xs();
    let mut rho: Vec<f64> = xs.iter().map(|x| (k * x).cos()).collect();
    remove_mean(grid, &mut rho);
    [rho, xs.iter().map(|x| (k * x).sin()).collect(), xs.iter().map(|x| (2.0 * k * x).sin()).collect()]
}

/// Seeded grid-scale noise in `rho0` (mean removed), `u0 = theta0 = 0`.
pub fn rough_initial(grid: &Grid1D, seed: u64) -> [Vec<f64>; 3] {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let nn = grid.nodes();
    let mut rho: Vec<f64> = (0..nn).map(|_| rng.gen_range(-1.0..1.0)).collect();
    remove_mean(grid, &mut rho);
    [rho, vec![0.0; nn], vec![0.0; nn]]
}

/// HUM run that skips the mean-zero check; used to show that the mean cannot be controlled.
pub fn penalized_hum_any_mean(config: &HumConfig, model: &FluidModel, grid: &Grid1D) -> Result<ControlResult, HumError> {
    solve_unchecked(LinearSystem::forward(model), config, grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub penalty: f64,
    pub terminal_norm: f64,
    pub control_cost: f64,
    pub cg_iters: usize,
    pub converged: bool,
}

impl From<&HumSolution> for SweepRow {
    fn from(s: &HumSolution) -> Self {
        SweepRow {
            penalty: s.penalty,
            terminal_norm: s.terminal_norm,
            control_cost: s.control_cost,
            cg_iters: s.cg_iters,
            converged: s.converged,
        }
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> CsvTable {
    let mut t = CsvTable::new(&["penalty", "terminal_norm", "control_cost", "cg_iters"]);
    for r in rows {
        t.push(vec![fmt_f64(r.penalty), fmt_f64(r.terminal_norm), fmt_f64(r.control_cost), r.cg_iters.to_string()]);
    }
    t
}

/// Runs `config` at every penalty of `schedule`.
pub fn penalty_sweep(
    model: &FluidModel,
    config: &HumConfig,
    grid: &Grid1D,
    schedule: &[f64],
    exec: Execution,
) -> Result<Vec<SweepRow>, HumError> {
    config.validate(grid)?;
    map_slice(exec, schedule, |&penalty| {
        let c = HumConfig { penalty, ..config.clone() };
        solve_unchecked(LinearSystem::forward(model), &c, grid).map(|r| SweepRow::from(&r.solution))
    })
    .into_iter()
    .collect()
}

/// Heat-equation null controls along a penalty schedule, on the whole interval.
pub fn heat_null_control(
    theta0: &[f64],
    k0: f64,
    grid: &Grid1D,
    schedule: &[f64],
    cg: CgOptions,
    exec: Execution,
) -> Result<Vec<HumSolution>, HumError> {
    if theta0.len() != grid.nodes() {
        return Err(PdeError::GridMismatch("heat initial data does not match the grid".into()).into());
    }
    let dyn_ = HeatDynamics::new(k0, *grid, Mask::Everywhere)?;
    map_slice(exec, schedule, |&p| hum_solve(&dyn_, theta0, p, cg)).into_iter().collect()
}

/// `g = g~ + R D theta`, `h = h~ + (R theta / c_v) D u` with the centred differences
/// of the coupled scheme; `f = 0`. Inputs are indexed by time level.
pub fn compose_controls(
    g_tilde: &[Vec<f64>],
    h_tilde: &[Vec<f64>],
    u_traj: &[Vec<f64>],
    theta_traj: &[Vec<f64>],
    model: &FluidModel,
    grid: &Grid1D,
) -> Result<ControlInput, HumError> {
    let nn = grid.nodes();
    let levels = grid.m + 1;
    if [g_tilde, h_tilde, u_traj, theta_traj].iter().any(|s| s.len() != levels || s.iter().any(|v| v.len() != nn)) {
        return Err(PdeError::GridMismatch("subsystem controls and trajectories must share the grid".into()).into());
    }
    let dx = grid.dx();
    let centred = |v: &[f64], i: usize| if i == 0 || i == nn - 1 { 0.0 } else { (v[i + 1] - v[i - 1]) / (2.0 * dx) };
    let coupling = model.r * model.bar_theta / model.c_v;
    let fields = (0..levels)
        .map(|k| {
            let g = (0..nn).map(|i| g_tilde[k][i] + model.r * centred(&theta_traj[k], i)).collect();
            let h = (0..nn).map(|i| h_tilde[k][i] + coupling * centred(&u_traj[k], i)).collect();
            [vec![0.0; nn], g, h]
        })
        .collect();
    Ok(ControlInput { fields, masks: [Mask::Nowhere, Mask::Everywhere, Mask::Everywhere] })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositionResult {
    pub subsystem: ControlResult,
    pub heat: HumSolution,
    pub controls: ControlInput,
    pub initial_norm: f64,
    /// Z-norm of the full forward solve at `t = T` under the composed controls.
    pub terminal_norm: f64,
}

/// Controls the barotropic part from `(rho0, u0)` and the heat equation from
/// `theta0`, then composes them and verifies on the full system.
pub fn composed_null_control(
    model: &FluidModel,
    initial: &[Vec<f64>; 3],
    grid: &Grid1D,
    penalty: f64,
    cg: CgOptions,
) -> Result<CompositionResult, HumError> {
    let nn = grid.nodes();
    let sub_init = [initial[0].clone(), initial[1].clone(), vec![0.0; nn]];
    let config = HumConfig { cg, o3: Mask::Nowhere, ..HumConfig::new(sub_init.clone(), penalty) };
    let subsystem = penalized_hum_with(LinearSystem::barotropic_subsystem(model), &config, grid)?;
    let heat = heat_null_control(&initial[2], model.k0(), grid, &[penalty], cg, Execution::Sequential)?.remove(0);
    let sub_traj = crate::pde::solve_system(
        LinearSystem::barotropic_subsystem(model),
        grid,
        &sub_init,
        Some(&subsystem.controls),
        None,
    )?;
    let theta_traj = crate::pde::solve_heat(model.k0(), &initial[2], Some(&heat.controls), grid)?;
    let u_traj: Vec<Vec<f64>> = sub_traj.iter().map(|s| s[1].clone()).collect();
    let g_tilde: Vec<Vec<f64>> = subsystem.controls.fields.iter().map(|f| f[1].clone()).collect();
    let controls = compose_controls(&g_tilde, &heat.controls, &u_traj, &theta_traj, model, grid)?;
    let full = solve_forward(model, initial, &controls, grid)?;
    let w = model.z_weights();
    Ok(CompositionResult {
        initial_norm: z_norm(grid, &w, initial),
        terminal_norm: z_norm(grid, &w, full.terminal()),
        subsystem,
        heat,
        controls,
    })
}
