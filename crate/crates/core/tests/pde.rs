use std::f64::consts::PI;

use proptest::prelude::*;

use lcns::params::FluidModel;
use lcns::pde::{
    duality_residual, duality_study, solve_adjoint, solve_correction, solve_forward, solve_heat, z_norm,
    BoundaryData, ControlInput, DualityStudy, Grid1D, Mask,
};

type State = [Vec<f64>; 3];

fn grid() -> Grid1D {
    Grid1D::new(31, 32, 1.0, 1.0).unwrap()
}

/// Three sine/cosine modes per component with the given coefficients.
fn state(g: &Grid1D, c: &[f64; 9]) -> State {
    let xs = g.xs();
    [0, 1, 2].map(|k| {
        xs.iter()
            .map(|&x| {
                (1..=3)
                    .map(|j| {
                        let w = PI * j as f64 * x / g.length;
                        c[3 * k + j - 1] * if k == 0 { w.cos() } else { w.sin() }
                    })
                    .sum()
            })
            .collect()
    })
}

fn controls(g: &Grid1D, amp: f64, masks: [Mask; 3]) -> ControlInput {
    ControlInput::from_fn(g, masks, |c, x, t| amp * (1.0 + c as f64) * (3.0 * x + c as f64).sin() * (1.0 + t))
}

fn combine(a: &State, b: &State, s: f64, t: f64) -> State {
    [0, 1, 2].map(|c| a[c].iter().zip(&b[c]).map(|(x, y)| s * x + t * y).collect())
}

fn max_abs(states: &[State]) -> f64 {
    states.iter().flatten().flatten().fold(0.0, |m, x| m.max(x.abs()))
}

fn max_gap(a: &[State], b: &[State]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).flat_map(|(u, v)| u.iter().zip(v).map(|(p, q)| (p - q).abs())))
        .fold(0.0, f64::max)
}

fn coeffs() -> impl Strategy<Value = [f64; 9]> {
    prop::array::uniform9(-1.0f64..1.0)
}

fn masks() -> [Mask; 3] {
    [Mask::Interval(0.1, 0.4), Mask::Interval(0.3, 0.8), Mask::Everywhere]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn forward_solver_is_linear(a in coeffs(), b in coeffs(), s in -2.0f64..2.0, t in -2.0f64..2.0, bar_v in prop_oneof![Just(0.0), Just(0.5)]) {
        let g = grid();
        let m = FluidModel::p_star().with_bar_v(bar_v);
        let (ya, yb) = (state(&g, &a), state(&g, &b));
        let (ca, cb) = (controls(&g, 1.0, masks()), controls(&g, -0.5, masks()));
        let mixed = ControlInput {
            fields: ca.fields.iter().zip(&cb.fields).map(|(x, y)| combine(x, y, s, t)).collect(),
            masks: masks(),
        };
        let fa = solve_forward(&m, &ya, &ca, &g).unwrap();
        let fb = solve_forward(&m, &yb, &cb, &g).unwrap();
        let fm = solve_forward(&m, &combine(&ya, &yb, s, t), &mixed, &g).unwrap();
        let sum: Vec<State> = fa.states.iter().zip(&fb.states).map(|(x, y)| combine(x, y, s, t)).collect();
        prop_assert!(max_gap(&fm.states, &sum) <= 1e-12 * max_abs(&sum).max(1.0));
    }

    #[test]
    fn adjoint_solver_is_linear(a in coeffs(), b in coeffs(), s in -2.0f64..2.0) {
        let g = grid();
        let m = FluidModel::p_star();
        let (ya, yb) = (state(&g, &a), state(&g, &b));
        let fa = solve_adjoint(&m, &ya, None, &g).unwrap();
        let fb = solve_adjoint(&m, &yb, None, &g).unwrap();
        let fm = solve_adjoint(&m, &combine(&ya, &yb, s, 1.0), None, &g).unwrap();
        let sum: Vec<State> = fa.states.iter().zip(&fb.states).map(|(x, y)| combine(x, y, s, 1.0)).collect();
        prop_assert!(max_gap(&fm.states, &sum) <= 1e-12 * max_abs(&sum).max(1.0));
    }

    /// Homogeneous runs dissipate the weighted energy at every step.
    #[test]
    fn energy_is_non_increasing(a in coeffs(), bar_v in prop_oneof![Just(0.0), Just(0.5)]) {
        let g = Grid1D::new(63, 64, 1.0, 1.0).unwrap();
        let m = FluidModel::p_star().with_bar_v(bar_v);
        let mut y0 = state(&g, &a);
        if bar_v > 0.0 {
            y0[0][0] = 0.0;
        }
        let f = solve_forward(&m, &y0, &ControlInput::zero(&g), &g).unwrap();
        let e: Vec<f64> = f.states.iter().map(|s| z_norm(&g, &m.z_weights(), s)).collect();
        prop_assert!(e.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)), "{e:?}");
    }

    #[test]
    fn density_mass_is_conserved(a in coeffs(), mean in -1.0f64..1.0) {
        let g = grid();
        let m = FluidModel::p_star();
        let mut y0 = state(&g, &a);
        y0[0].iter_mut().for_each(|r| *r += mean);
        let ctl = controls(&g, 1.0, [Mask::Nowhere, Mask::Everywhere, Mask::Everywhere]);
        let f = solve_forward(&m, &y0, &ctl, &g).unwrap();
        let w = g.trapezoid();
        let mass = |r: &Vec<f64>| r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        let m0 = mass(&y0[0]);
        let scale = y0[0].iter().zip(&w).map(|(a, b)| a.abs() * b).sum::<f64>();
        prop_assert!(f.states.iter().all(|s| (mass(&s[0]) - m0).abs() <= 1e-10 * scale));
    }

    #[test]
    fn heat_energy_decays(a in prop::array::uniform3(-1.0f64..1.0)) {
        let g = Grid1D::new(63, 64, 1.0, 0.2).unwrap();
        let th: Vec<f64> = g.xs().iter().map(|&x| (1..=3).map(|j| a[j - 1] * (PI * j as f64 * x).sin()).sum()).collect();
        let traj = solve_heat(4.0, &th, None, &g).unwrap();
        let norms: Vec<f64> = traj.iter().map(|v| lcns::pde::inner(&g, v, v)).collect();
        prop_assert!(norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }
}

#[test]
fn zero_data_stays_zero() {
    let g = grid();
    let m = FluidModel::p_star();
    let zero = [0, 1, 2].map(|_| vec![0.0; g.nodes()]);
    let f = solve_forward(&m, &zero, &ControlInput::zero(&g), &g).unwrap();
    assert_eq!(max_abs(&f.states), 0.0);
    let a = solve_adjoint(&m, &zero, None, &g).unwrap();
    assert_eq!(max_abs(&a.states), 0.0);
    let c = solve_correction(&m, &BoundaryData::zero(g.times()), &g).unwrap();
    assert_eq!(max_abs(&c.states), 0.0);
    let h = solve_heat(4.0, &zero[0], None, &g).unwrap();
    assert!(h.iter().flatten().all(|x| *x == 0.0));
    let d = duality_residual(&f, &a, &ControlInput::zero(&g), &m).unwrap();
    assert_eq!(d.residual, 0.0);
}

#[test]
fn constant_sigma_is_stationary() {
    let g = grid();
    let nn = g.nodes();
    let terminal = [vec![1.0; nn], vec![0.0; nn], vec![0.0; nn]];
    let a = solve_adjoint(&FluidModel::p_star(), &terminal, None, &g).unwrap();
    for s in &a.states {
        assert!(s[0].iter().all(|x| (x - 1.0).abs() < 1e-13));
        assert!(s[1].iter().chain(&s[2]).all(|x| x.abs() < 1e-13));
    }
}

/// The adjoint in reversed time, read on the mirrored grid, is the forward scheme.
#[test]
fn adjoint_is_the_mirrored_forward_scheme() {
    for bar_v in [0.0, 0.5] {
        let g = Grid1D::new(63, 64, 1.0, 0.5).unwrap();
        let m = FluidModel::p_star().with_bar_v(bar_v);
        let mut y0 = state(&g, &[0.3, -0.2, 0.1, 0.5, 0.4, -0.3, 0.2, 0.1, -0.6]);
        if bar_v > 0.0 {
            y0[0][0] = 0.0;
        }
        let mirror = |s: &State| s.clone().map(|mut v| {
            v.reverse();
            v
        });
        let fwd = solve_forward(&m, &y0, &ControlInput::zero(&g), &g).unwrap();
        let adj = solve_adjoint(&m, &mirror(&y0), None, &g).unwrap();
        let back: Vec<State> = adj.states.iter().rev().map(mirror).collect();
        assert!(max_gap(&fwd.states, &back) < 1e-10, "bar_v {bar_v}");
    }
}

#[test]
fn correction_reproduces_boundary_traces() {
    let g = grid();
    let m = FluidModel::p_star();
    let times: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
    let series = |a: f64| times.iter().map(|t| (a * t).sin() + 0.1 * a).collect::<Vec<f64>>();
    let traces = BoundaryData {
        left: [series(1.0), series(2.0), series(3.0)],
        right: [series(4.0), series(5.0), series(6.0)],
        times: times.clone(),
    };
    let c = solve_correction(&m, &traces, &g).unwrap();
    let imposed = traces.scaled(-1.0);
    let last = g.n + 1;
    for k in 0..g.m {
        let [l, r] = imposed.at(g.t(k));
        for comp in 1..3 {
            assert_eq!(c.states[k][comp][0], l[comp]);
            assert_eq!(c.states[k][comp][last], r[comp]);
        }
    }
    let doubled = solve_correction(&m, &traces.scaled(2.0), &g).unwrap();
    let twice: Vec<State> = c.states.iter().map(|s| combine(s, s, 2.0, 0.0)).collect();
    assert!(max_gap(&doubled.states, &twice) <= 1e-12 * max_abs(&twice));
}

/// Aitken extrapolation of the last three residuals.
fn limit(s: &DualityStudy) -> (f64, f64) {
    let r: Vec<f64> = s.rows.iter().map(|(_, d)| d.residual).collect();
    let [a, b, c] = [r[r.len() - 3], r[r.len() - 2], r[r.len() - 1]];
    (c - (c - b).powi(2) / (c - 2.0 * b + a), c)
}

#[test]
fn duality_residual_needs_the_right_weights() {
    let m = FluidModel::p_star();
    let right = duality_study(&m, 7, 5, None).unwrap();
    assert!(right.fit.slope >= 0.8, "{:?}", right.fit);
    let (lim, last) = limit(&right);
    assert!(lim.abs() < 0.05 * last.abs(), "{lim} vs {last}");
    // Dropping the temperature weight leaves a residual that converges to a non-zero value.
    let mut w = m.z_weights();
    w[2] = 0.0;
    let wrong = duality_study(&m, 7, 5, Some(w)).unwrap();
    let (lim, last) = limit(&wrong);
    assert!(lim.abs() > 0.5 * last.abs(), "{lim} vs {last}");
    assert!(lim.abs() > 2.0 * right.rows.last().unwrap().1.residual.abs());
}

#[test]
fn cfl_violation_is_reported() {
    let g = Grid1D::new(127, 16, 1.0, 1.0).unwrap();
    let m = FluidModel::p_star().with_bar_v(1.0);
    let zero = [0, 1, 2].map(|_| vec![0.0; g.nodes()]);
    assert!(solve_forward(&m, &zero, &ControlInput::zero(&g), &g).is_err());
}
