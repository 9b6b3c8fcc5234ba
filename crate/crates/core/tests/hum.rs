use std::f64::consts::PI;

use lcns::exec::Execution;
use lcns::hum::{
    compose_controls, composed_null_control, discrete_mean, heat_null_control, hum_solve, penalized_hum,
    penalized_hum_any_mean, penalty_sweep, rough_initial, smooth_initial, CgOptions, CoupledDynamics, HumConfig,
    HumError,
};
use lcns::params::FluidModel;
use lcns::pde::{inner, solve_forward, z_norm, Grid1D, LinearSystem, Mask};

fn grid() -> Grid1D {
    Grid1D::new(31, 64, 1.0, 1.0).unwrap()
}

#[test]
fn zero_data_needs_no_control() {
    let g = grid();
    let m = FluidModel::p_star();
    let dynamics = CoupledDynamics::new(LinearSystem::forward(&m), g, [Mask::Nowhere, Mask::Everywhere, Mask::Everywhere]).unwrap();
    let s = hum_solve(&dynamics, &vec![0.0; 3 * g.nodes()], 1e-4, CgOptions::default()).unwrap();
    assert!(s.converged);
    assert_eq!(s.cg_iters, 0);
    assert!(s.controls.iter().flatten().all(|x| *x == 0.0));
    assert_eq!(s.terminal_norm, 0.0);
}

#[test]
fn dual_is_monotone_and_matches_resimulation() {
    let g = grid();
    let m = FluidModel::p_star();
    let cfg = HumConfig::new(smooth_initial(&g), 1e-5);
    let r = penalized_hum(&cfg, &m, &g).unwrap();
    let h = &r.solution.dual_history;
    assert!(r.solution.converged);
    assert!(h.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0)), "{h:?}");
    // Independent forward run with the returned controls.
    let f = solve_forward(&m, &cfg.initial, &r.controls, &g).unwrap();
    let terminal = z_norm(&g, &m.z_weights(), f.terminal());
    assert!((terminal - r.terminal_norm()).abs() <= 1e-10 * terminal);
    assert!((r.solution.dual_terminal_norm - terminal).abs() <= 1e-8 * terminal);
    assert!(terminal < 0.05 * r.initial_norm);
}

#[test]
fn smaller_penalties_buy_smaller_terminal_states() {
    let g = grid();
    let m = FluidModel::p_star();
    let cfg = HumConfig { o2: Mask::Interval(0.6, 0.9), ..HumConfig::new(rough_initial(&g, 3), 1e-2) };
    let rows = penalty_sweep(&m, &cfg, &g, &[1e-2, 1e-3, 1e-4, 1e-5], Execution::Sequential).unwrap();
    assert!(rows.windows(2).all(|w| w[1].terminal_norm < w[0].terminal_norm && w[1].control_cost > w[0].control_cost));
    let par = penalty_sweep(&m, &cfg, &g, &[1e-2, 1e-3, 1e-4, 1e-5], Execution::Parallel).unwrap();
    assert_eq!(rows, par);
}

#[test]
fn non_zero_mean_is_refused_and_cannot_be_steered() {
    let g = grid();
    let m = FluidModel::p_star();
    let mut init = smooth_initial(&g);
    init[0].iter_mut().for_each(|r| *r += 0.5);
    let cfg = HumConfig::new(init.clone(), 1e-6);
    assert!(matches!(penalized_hum(&cfg, &m, &g), Err(HumError::NonZeroMean { .. })));
    let r = penalized_hum_any_mean(&cfg, &m, &g).unwrap();
    let f = solve_forward(&m, &init, &r.controls, &g).unwrap();
    let rho_t = &f.terminal()[0];
    let mean0 = discrete_mean(&g, &init[0]);
    assert!((discrete_mean(&g, rho_t) - mean0).abs() <= 1e-12);
    // Cauchy-Schwarz: ||rho||_{L2} >= |int rho| / sqrt(L).
    let floor = (mean0 * g.length).abs() / g.length.sqrt();
    assert!(inner(&g, rho_t, rho_t).sqrt() >= floor * (1.0 - 1e-10));
    assert!(r.terminal_norm() >= m.z_weights()[0].sqrt() * floor * (1.0 - 1e-10));
}

#[test]
fn composition_scales_with_the_data() {
    let g = grid();
    let m = FluidModel::p_star();
    let init = smooth_initial(&g);
    let twice = init.clone().map(|v| v.iter().map(|x| 2.0 * x).collect());
    let a = composed_null_control(&m, &init, &g, 1e-6, CgOptions::default()).unwrap();
    let b = composed_null_control(&m, &twice, &g, 1e-6, CgOptions::default()).unwrap();
    for (fa, fb) in a.controls.fields.iter().zip(&b.controls.fields) {
        for c in 0..3 {
            for (x, y) in fa[c].iter().zip(&fb[c]) {
                assert!((2.0 * x - y).abs() <= 1e-10 * y.abs().max(1.0));
            }
        }
    }
    assert!(a.terminal_norm < 0.05 * a.initial_norm);
    assert!((b.terminal_norm / a.terminal_norm - 2.0).abs() < 1e-8);
}

#[test]
fn composed_controls_add_the_coupling_terms() {
    let g = grid();
    let m = FluidModel::p_star();
    let nn = g.nodes();
    let levels = g.m + 1;
    let xs = g.xs();
    let zero = vec![vec![0.0; nn]; levels];
    let u: Vec<Vec<f64>> = (0..levels).map(|_| xs.iter().map(|x| x * x).collect()).collect();
    let th: Vec<Vec<f64>> = (0..levels).map(|_| xs.iter().map(|x| x * x * x).collect()).collect();
    let c = compose_controls(&zero, &zero, &u, &th, &m, &g).unwrap();
    let i = nn / 2;
    let x = xs[i];
    let dx = g.dx();
    // Centred differences are exact on quadratics and off by dx^2 on cubics.
    let g_want = m.r * (3.0 * x * x + dx * dx);
    let h_want = m.r * m.bar_theta / m.c_v * 2.0 * x;
    assert!((c.fields[3][1][i] - g_want).abs() < 1e-10);
    assert!((c.fields[3][2][i] - h_want).abs() < 1e-10);
    assert!(c.fields.iter().all(|f| f[0].iter().all(|v| *v == 0.0)));
}

#[test]
fn heat_control_on_a_short_horizon() {
    let g = Grid1D::new(63, 64, 1.0, 0.05).unwrap();
    let theta0: Vec<f64> = g.xs().iter().map(|x| (PI * x).sin()).collect();
    let norm0 = inner(&g, &theta0, &theta0).sqrt();
    let sols = heat_null_control(&theta0, 4.0, &g, &[1e-4, 1e-6, 1e-8], CgOptions::default(), Execution::Sequential).unwrap();
    let last = sols.last().unwrap();
    assert!(last.converged);
    assert!(last.terminal_norm < 1e-3 * norm0, "{}", last.terminal_norm / norm0);
    assert!(sols.windows(2).all(|w| w[1].terminal_norm < w[0].terminal_norm));
}
