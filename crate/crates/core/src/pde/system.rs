use serde::Serialize;

use super::banded::{BandedLu, BandedMatrix};
use super::{Grid1D, Mask, PdeError};
use crate::io::{fmt_f64, CsvTable};
use crate::params::FluidModel;

/// Whether the time variable of a system runs forward (`t`) or reversed (`T - t`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Orientation {
    Forward,
    Adjoint,
}

/// `y_t = D y_xx + B y_x + F` for `y = (y0, y1, y2)`, with `y1`, `y2` Dirichlet at
/// both ends and `y0` Dirichlet where flagged. Adjoint systems are written in
/// reversed time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearSystem {
    pub diffusion: [f64; 3],
    pub advection: [[f64; 3]; 3],
    /// Inner-product weights of the three components.
    pub weights: [f64; 3],
    /// Dirichlet condition on `y0` at `x = 0` and at `x = L`.
    pub dirichlet0: [bool; 2],
    pub orientation: Orientation,
}

fn transport_matrix(m: &FluidModel) -> [[f64; 3]; 3] {
    let v = m.bar_v;
    [
        [v, m.bar_rho, 0.0],
        [m.r * m.bar_theta / m.bar_rho, v, m.r],
        [0.0, m.r * m.bar_theta / m.c_v, v],
    ]
}

impl LinearSystem {
    /// The controlled system in `(rho, u, theta)`; with `bar_v > 0`, `rho(0, t) = 0`.
    pub fn forward(m: &FluidModel) -> Self {
        LinearSystem {
            diffusion: [0.0, m.nu0(), m.k0()],
            advection: transport_matrix(m).map(|r| r.map(|x| -x)),
            weights: m.z_weights(),
            dirichlet0: [m.bar_v > 0.0, false],
            orientation: Orientation::Forward,
        }
    }

    /// The adjoint system in `(sigma, v, phi)` and reversed time; with `bar_v > 0`, `sigma(L, t) = 0`.
    pub fn adjoint(m: &FluidModel) -> Self {
        LinearSystem {
            diffusion: [0.0, m.nu0(), m.k0()],
            advection: transport_matrix(m),
            weights: m.z_weights(),
            dirichlet0: [false, m.bar_v > 0.0],
            orientation: Orientation::Adjoint,
        }
    }

    /// The `(rho, u)` system without temperature coupling; `theta` is left as a
    /// decoupled heat equation.
    pub fn barotropic_subsystem(m: &FluidModel) -> Self {
        let mut s = LinearSystem::forward(m);
        s.advection[1][2] = 0.0;
        s.advection[2][1] = 0.0;
        s
    }

    pub fn bar_v(&self) -> f64 {
        self.advection[0][0].abs()
    }

    pub fn names(&self) -> [&'static str; 3] {
        match self.orientation {
            Orientation::Forward => ["rho", "u", "theta"],
            Orientation::Adjoint => ["sigma", "v", "phi"],
        }
    }

    fn is_dirichlet(&self, grid: &Grid1D, i: usize, c: usize) -> bool {
        let edge = if i == 0 {
            Some(0)
        } else if i == grid.n + 1 {
            Some(1)
        } else {
            None
        };
        match (edge, c) {
            (None, _) => false,
            (Some(_), 1 | 2) => true,
            (Some(e), _) => self.dirichlet0[e],
        }
    }
}

fn idx(i: usize, c: usize) -> usize {
    3 * i + c
}

/// Implicit Euler for one system on one grid, with the step matrix factorized once.
#[derive(Debug, Clone)]
pub struct Stepper {
    pub system: LinearSystem,
    pub grid: Grid1D,
    lu: BandedLu,
    dirichlet: Vec<bool>,
    /// Component weight times trapezoid weight, per unknown.
    weights: Vec<f64>,
}

impl Stepper {
    pub fn new(system: LinearSystem, grid: Grid1D) -> Result<Self, PdeError> {
        grid.check_cfl(system.bar_v())?;
        let nn = grid.nodes();
        let (dx, dt) = (grid.dx(), grid.dt());
        let mut k = BandedMatrix::zeros(3 * nn, 5, 5);
        let mut dirichlet = vec![false; 3 * nn];
        for i in 0..nn {
            for c in 0..3 {
                let row = idx(i, c);
                if system.is_dirichlet(&grid, i, c) {
                    dirichlet[row] = true;
                    k.add(row, row, 1.0);
                    continue;
                }
                k.add(row, row, 1.0);
                // -dt times the discrete right-hand side.
                let mut put = |j: usize, cc: usize, v: f64| k.add(row, idx(j, cc), -dt * v);
                let interior = i > 0 && i <= grid.n;
                if interior && system.diffusion[c] != 0.0 {
                    let d = system.diffusion[c] / (dx * dx);
                    put(i - 1, c, d);
                    put(i, c, -2.0 * d);
                    put(i + 1, c, d);
                }
                for cc in 0..3 {
                    let b = system.advection[c][cc];
                    if b == 0.0 {
                        continue;
                    }
                    if !interior {
                        // One-sided difference into the domain.
                        let (a, z) = if i == 0 { (0, 1) } else { (grid.n, grid.n + 1) };
                        put(z, cc, b / dx);
                        put(a, cc, -b / dx);
                    } else if cc == c {
                        // Upwind: information travels against the sign of b.
                        if b > 0.0 {
                            put(i + 1, cc, b / dx);
                            put(i, cc, -b / dx);
                        } else {
                            put(i, cc, b / dx);
                            put(i - 1, cc, -b / dx);
                        }
                    } else {
                        put(i + 1, cc, b / (2.0 * dx));
                        put(i - 1, cc, -b / (2.0 * dx));
                    }
                }
            }
        }
        let trap = grid.trapezoid();
        let weights = (0..3 * nn).map(|r| system.weights[r % 3] * trap[r / 3]).collect();
        Ok(Stepper { system, grid, lu: k.factorize()?, dirichlet, weights })
    }

    pub fn len(&self) -> usize {
        self.dirichlet.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirichlet.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dirichlet(&self) -> &[bool] {
        &self.dirichlet
    }

    /// `y <- K^{-1} (y + dt F)` with the Dirichlet rows replaced by `bc`
    /// (`[left, right]`, each `[y0, y1, y2]`; zero when `None`).
    pub fn step(&self, y: &mut [f64], forcing: Option<&[f64]>, bc: Option<[[f64; 3]; 2]>) {
        let dt = self.grid.dt();
        if let Some(f) = forcing {
            for (a, b) in y.iter_mut().zip(f) {
                *a += dt * b;
            }
        }
        let last = self.grid.n + 1;
        let imposed = |r: usize| {
            let (i, c) = (r / 3, r % 3);
            match bc {
                Some(b) if i == 0 => b[0][c],
                Some(b) if i == last => b[1][c],
                _ => 0.0,
            }
        };
        self.set_dirichlet(y, imposed);
        self.lu.solve(y);
        // Elimination can perturb the identity rows by a few ulp.
        self.set_dirichlet(y, imposed);
    }

    fn set_dirichlet(&self, y: &mut [f64], value: impl Fn(usize) -> f64) {
        for (r, y) in y.iter_mut().enumerate().filter(|(r, _)| self.dirichlet[*r]) {
            *y = value(r);
        }
    }

    /// Adjoint of the homogeneous step `y <- K^{-1} P y` in the weighted inner
    /// product, where `P` zeroes the Dirichlet rows.
    pub fn adjoint_step(&self, p: &mut [f64]) {
        for (a, w) in p.iter_mut().zip(&self.weights) {
            *a *= w;
        }
        self.lu.solve_transpose(p);
        for ((a, w), d) in p.iter_mut().zip(&self.weights).zip(&self.dirichlet) {
            *a = if *d { 0.0 } else { *a / w };
        }
    }
}

/// Per-time states on all nodes; `states[k]` is the state at `grid.t(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    pub grid: Grid1D,
    pub orientation: Orientation,
    pub states: Vec<[Vec<f64>; 3]>,
}

pub(crate) fn pack(state: &[Vec<f64>; 3]) -> Vec<f64> {
    let nn = state[0].len();
    let mut y = vec![0.0; 3 * nn];
    for c in 0..3 {
        for i in 0..nn {
            y[idx(i, c)] = state[c][i];
        }
    }
    y
}

pub(crate) fn unpack(y: &[f64]) -> [Vec<f64>; 3] {
    let nn = y.len() / 3;
    [0, 1, 2].map(|c| (0..nn).map(|i| y[idx(i, c)]).collect())
}

impl StateField {
    pub fn terminal(&self) -> &[Vec<f64>; 3] {
        self.states.last().expect("at least one state")
    }

    pub fn initial(&self) -> &[Vec<f64>; 3] {
        &self.states[0]
    }

    pub fn to_csv(&self) -> CsvTable {
        let names = match self.orientation {
            Orientation::Forward => ["t", "x", "rho", "u", "theta"],
            Orientation::Adjoint => ["t", "x", "sigma", "v", "phi"],
        };
        let mut t = CsvTable::new(&names);
        for (k, s) in self.states.iter().enumerate() {
            for i in 0..self.grid.nodes() {
                t.push(vec![
                    fmt_f64(self.grid.t(k)),
                    fmt_f64(self.grid.x(i)),
                    fmt_f64(s[0][i]),
                    fmt_f64(s[1][i]),
                    fmt_f64(s[2][i]),
                ]);
            }
        }
        t
    }
}

/// Boundary values of the three components at `x = 0` and `x = L`, sampled in
/// time and interpolated linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub times: Vec<f64>,
    pub left: [Vec<f64>; 3],
    pub right: [Vec<f64>; 3],
}

impl BoundaryData {
    pub fn zero(times: Vec<f64>) -> Self {
        let z = vec![0.0; times.len()];
        BoundaryData { left: [z.clone(), z.clone(), z.clone()], right: [z.clone(), z.clone(), z], times }
    }

    pub fn validate(&self) -> Result<(), PdeError> {
        let n = self.times.len();
        if n < 2 || self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(PdeError::BadInput("boundary times must be increasing with at least two samples".into()));
        }
        if self.left.iter().chain(&self.right).any(|v| v.len() != n) {
            return Err(PdeError::BadInput("boundary series length differs from the time samples".into()));
        }
        Ok(())
    }

    pub fn at(&self, t: f64) -> [[f64; 3]; 2] {
        let ts = &self.times;
        let k = ts.partition_point(|&s| s <= t).clamp(1, ts.len() - 1);
        let (t0, t1) = (ts[k - 1], ts[k]);
        let a = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let lerp = |v: &Vec<f64>| v[k - 1] * (1.0 - a) + v[k] * a;
        [self.left.each_ref().map(lerp), self.right.each_ref().map(lerp)]
    }

    pub fn scaled(&self, s: f64) -> Self {
        let sc = |v: &[Vec<f64>; 3]| v.each_ref().map(|x| x.iter().map(|y| y * s).collect());
        BoundaryData { times: self.times.clone(), left: sc(&self.left), right: sc(&self.right) }
    }
}

/// Source fields on every time level, masked per component.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlInput {
    /// `fields[k][c][i]` at time `grid.t(k)`.
    pub fields: Vec<[Vec<f64>; 3]>,
    pub masks: [Mask; 3],
}

impl ControlInput {
    pub fn zero(grid: &Grid1D) -> Self {
        let z = vec![0.0; grid.nodes()];
        ControlInput { fields: vec![[z.clone(), z.clone(), z]; grid.m + 1], masks: [Mask::Nowhere; 3] }
    }

    pub fn from_fn(grid: &Grid1D, masks: [Mask; 3], f: impl Fn(usize, f64, f64) -> f64) -> Self {
        let xs = grid.xs();
        let fields = (0..=grid.m)
            .map(|k| {
                let t = grid.t(k);
                [0, 1, 2].map(|c| xs.iter().map(|&x| f(c, x, t)).collect())
            })
            .collect();
        ControlInput { fields, masks }
    }

    /// Masked forcing at time level `k`, packed.
    pub(crate) fn packed(&self, grid: &Grid1D, k: usize) -> Vec<f64> {
        let chi = self.masks.map(|m| m.on_grid(grid));
        let masked = [0, 1, 2].map(|c| self.fields[k][c].iter().zip(&chi[c]).map(|(a, b)| a * b).collect());
        pack(&masked)
    }

    fn check(&self, grid: &Grid1D) -> Result<(), PdeError> {
        if self.fields.len() != grid.m + 1 || self.fields.iter().any(|f| f.iter().any(|v| v.len() != grid.nodes())) {
            return Err(PdeError::GridMismatch("control fields do not match the grid".into()));
        }
        Ok(())
    }
}

fn check_state(grid: &Grid1D, s: &[Vec<f64>; 3]) -> Result<(), PdeError> {
    if s.iter().any(|v| v.len() != grid.nodes()) {
        return Err(PdeError::GridMismatch(format!("state needs {} nodes per component", grid.nodes())));
    }
    if s.iter().flatten().any(|x| !x.is_finite()) {
        return Err(PdeError::BadInput("state contains non-finite values".into()));
    }
    Ok(())
}

/// Marches `system` over `grid` from `start` with optional forcing and boundary
/// data. States are returned in the system's own time order.
pub fn solve_system(
    system: LinearSystem,
    grid: &Grid1D,
    start: &[Vec<f64>; 3],
    controls: Option<&ControlInput>,
    boundary: Option<&BoundaryData>,
) -> Result<Vec<[Vec<f64>; 3]>, PdeError> {
    check_state(grid, start)?;
    if let Some(c) = controls {
        c.check(grid)?;
    }
    if let Some(b) = boundary {
        b.validate()?;
    }
    let stepper = Stepper::new(system, *grid)?;
    let mut y = pack(start);
    let mut out = Vec::with_capacity(grid.m + 1);
    out.push(start.clone());
    for s in 1..=grid.m {
        // Level in physical time that this step lands on.
        let k = match system.orientation {
            Orientation::Forward => s,
            Orientation::Adjoint => grid.m - s,
        };
        let f = controls.map(|c| c.packed(grid, k));
        let bc = boundary.map(|b| b.at(grid.t(k)));
        stepper.step(&mut y, f.as_deref(), bc);
        out.push(unpack(&y));
    }
    Ok(out)
}

pub fn solve_forward(
    model: &FluidModel,
    initial: &[Vec<f64>; 3],
    controls: &ControlInput,
    grid: &Grid1D,
) -> Result<StateField, PdeError> {
    let states = solve_system(LinearSystem::forward(model), grid, initial, Some(controls), None)?;
    Ok(StateField { grid: *grid, orientation: Orientation::Forward, states })
}

/// Backward march from `terminal` at `t = T`; the result is in physical time order.
pub fn solve_adjoint(
    model: &FluidModel,
    terminal: &[Vec<f64>; 3],
    boundary: Option<&BoundaryData>,
    grid: &Grid1D,
) -> Result<StateField, PdeError> {
    let mut states = solve_system(LinearSystem::adjoint(model), grid, terminal, None, boundary)?;
    states.reverse();
    Ok(StateField { grid: *grid, orientation: Orientation::Adjoint, states })
}

/// Adjoint system with zero terminal data and boundary values equal to minus `traces`.
/// The march starts from the zero terminal slice regardless of the traces at `t = T`.
pub fn solve_correction(model: &FluidModel, traces: &BoundaryData, grid: &Grid1D) -> Result<StateField, PdeError> {
    let zero = [0, 1, 2].map(|_| vec![0.0; grid.nodes()]);
    solve_adjoint(model, &zero, Some(&traces.scaled(-1.0)), grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjoint_step_is_the_weighted_transpose() {
        let m = FluidModel::p_star().with_bar_v(0.5);
        let grid = Grid1D::new(20, 20, 1.0, 0.5).unwrap();
        let st = Stepper::new(LinearSystem::forward(&m), grid).unwrap();
        let n = st.len();
        let a: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.91).cos()).collect();
        let mut sa = a.clone();
        st.step(&mut sa, None, None);
        let mut sb = b.clone();
        st.adjoint_step(&mut sb);
        let w = st.weights();
        let lhs: f64 = (0..n).map(|i| w[i] * sa[i] * b[i]).sum();
        let rhs: f64 = (0..n).map(|i| w[i] * a[i] * sb[i]).sum();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn boundary_interpolation() {
        let mut b = BoundaryData::zero(vec![0.0, 1.0, 2.0]);
        b.left[1] = vec![0.0, 2.0, 6.0];
        assert_eq!(b.at(0.5)[0][1], 1.0);
        assert_eq!(b.at(1.5)[0][1], 4.0);
        assert_eq!(b.at(2.0)[0][1], 6.0);
    }
}
