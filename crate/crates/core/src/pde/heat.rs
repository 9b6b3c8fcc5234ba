use super::{Grid1D, PdeError};

/// Implicit Euler for `theta_t = k0 theta_xx + h` with zero Dirichlet data.
/// Vectors cover all `N + 2` nodes; the boundary entries stay zero.
#[derive(Debug, Clone)]
pub struct HeatStepper {
    pub grid: Grid1D,
    pub k0: f64,
    /// Forward-eliminated tridiagonal `(1 + 2a) - a (shifts)`: modified upper
    /// diagonal and pivots.
    upper: Vec<f64>,
    pivot: Vec<f64>,
    a: f64,
}

impl HeatStepper {
    pub fn new(k0: f64, grid: Grid1D) -> Result<Self, PdeError> {
        if !(k0 > 0.0) {
            return Err(PdeError::BadInput(format!("k0 must be positive, got {k0}")));
        }
        let a = k0 * grid.dt() / (grid.dx() * grid.dx());
        let n = grid.n;
        let mut upper = vec![0.0; n];
        let mut pivot = vec![0.0; n];
        for i in 0..n {
            let below = if i == 0 { 0.0 } else { -a * upper[i - 1] };
            pivot[i] = 1.0 + 2.0 * a - below;
            upper[i] = -a / pivot[i];
        }
        Ok(HeatStepper { grid, k0, upper, pivot, a })
    }

    fn solve(&self, y: &mut [f64]) {
        let n = self.grid.n;
        let z = &mut y[1..=n];
        z[0] /= self.pivot[0];
        for i in 1..n {
            z[i] = (z[i] + self.a * z[i - 1]) / self.pivot[i];
        }
        for i in (0..n - 1).rev() {
            z[i] -= self.upper[i] * z[i + 1];
        }
    }

    pub fn step(&self, y: &mut [f64], forcing: Option<&[f64]>) {
        let dt = self.grid.dt();
        if let Some(f) = forcing {
            for (a, b) in y.iter_mut().zip(f) {
                *a += dt * b;
            }
        }
        let last = y.len() - 1;
        y[0] = 0.0;
        y[last] = 0.0;
        self.solve(y);
    }

    /// The step matrix is symmetric and the interior weights are uniform, so the
    /// adjoint step is the same solve.
    pub fn adjoint_step(&self, p: &mut [f64]) {
        self.step(p, None);
    }
}

/// Trajectory of the heat equation; `control[k]` is the source at `grid.t(k)`.
pub fn solve_heat(k0: f64, initial: &[f64], control: Option<&[Vec<f64>]>, grid: &Grid1D) -> Result<Vec<Vec<f64>>, PdeError> {
    if initial.len() != grid.nodes() {
        return Err(PdeError::GridMismatch(format!("initial data needs {} nodes", grid.nodes())));
    }
    if let Some(c) = control {
        if c.len() != grid.m + 1 || c.iter().any(|v| v.len() != grid.nodes()) {
            return Err(PdeError::GridMismatch("heat control does not match the grid".into()));
        }
    }
    let st = HeatStepper::new(k0, *grid)?;
    let mut y = initial.to_vec();
    let mut out = vec![y.clone()];
    for k in 1..=grid.m {
        st.step(&mut y, control.map(|c| c[k].as_slice()));
        out.push(y.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_matches_residual() {
        let grid = Grid1D::new(30, 16, 1.0, 0.1).unwrap();
        let st = HeatStepper::new(4.0, grid).unwrap();
        let rhs: Vec<f64> = (0..32).map(|i| if i == 0 || i == 31 { 0.0 } else { (i as f64).sin() }).collect();
        let mut y = rhs.clone();
        st.step(&mut y, None);
        for i in 1..=30 {
            let r = (1.0 + 2.0 * st.a) * y[i] - st.a * (y[i - 1] + y[i + 1]);
            assert!((r - rhs[i]).abs() < 1e-12);
        }
    }
}
