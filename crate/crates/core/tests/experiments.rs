use proptest::prelude::*;

use lcns::experiments::{
    certificate, observability_report, time_threshold, ExperimentError, Mode, MovingGeometry, ObservationConfig,
    TwoDConfig,
};
use lcns::params::BarotropicModel;
use lcns::pde::Mask;
use lcns::spectral::{locate_double_root_2d, log_grid};

#[test]
fn reference_threshold_is_exact() {
    let g = MovingGeometry { l1: 0.3, l2: 0.7 };
    assert_eq!(time_threshold(&g, 1.0, 2.0).unwrap(), 0.15);
    // 0.3 / 3 rounds once, unlike 0.3 / 3.0 in floating point.
    assert_eq!(time_threshold(&g, 1.0, 3.0).unwrap(), 0.1);
    assert!(matches!(certificate(&g, 1.0, 2.0, 0.2), Err(ExperimentError::Infeasible { .. })));
    assert!(matches!(certificate(&g, 1.0, 2.0, 0.15), Err(ExperimentError::Infeasible { .. })));
    assert!(certificate(&g, 1.0, 2.0, 0.149).is_ok());
}

#[test]
fn infeasible_horizon_is_refused_before_any_numerics() {
    let mut cfg = ObservationConfig::moving_frame();
    cfg.model = cfg.model.with_horizon(0.2);
    assert!(matches!(cfg.validate(), Err(ExperimentError::Infeasible { .. })));
    assert!(matches!(cfg.place(), Err(ExperimentError::Infeasible { .. })));
}

proptest! {
    /// Every certificate keeps the swept ball inside the domain and away from (l1, l2).
    #[test]
    fn certificates_are_disjoint(l1 in 0.05f64..0.9, width in 0.02f64..0.5, bar_v in 0.1f64..5.0, frac in 0.01f64..0.99) {
        let l2 = l1 + width;
        prop_assume!(l2 < 0.98);
        let g = MovingGeometry { l1, l2 };
        let threshold = time_threshold(&g, 1.0, bar_v).unwrap();
        let horizon = frac * threshold;
        let c = certificate(&g, 1.0, bar_v, horizon).unwrap();
        let (lo, hi) = c.swept(bar_v);
        prop_assert!(lo > 0.0 && hi < 1.0);
        prop_assert!(hi <= l1 || lo >= l2);
    }
}

#[test]
fn geometry_is_validated() {
    let mut cfg = ObservationConfig::interior();
    cfg.o1 = Mask::Interval(0.0, 1.0);
    assert!(matches!(cfg.validate(), Err(ExperimentError::Config(_))));
    let mut cfg = ObservationConfig::interior();
    cfg.o1 = Mask::Interval(0.35, 0.6);
    assert!(cfg.validate().is_err());
    let mut cfg = ObservationConfig::interior();
    cfg.x0 = 0.05;
    assert!(cfg.validate().is_err());
    let mut cfg = ObservationConfig::interior();
    cfg.ladder = vec![1e-2, 5e-3, 2e-3];
    assert!(cfg.validate().is_err());
    let mut cfg = ObservationConfig::derivative_form();
    cfg.correction = true;
    assert!(cfg.validate().is_err());
    assert!(ObservationConfig::interior().validate().is_ok());
    assert!(ObservationConfig::boundary().validate().is_ok());
    assert!(ObservationConfig::derivative_form().validate().is_ok());
    assert!(ObservationConfig::moving_frame().validate().is_ok());
}

#[test]
fn two_d_geometry_is_validated() {
    assert!(TwoDConfig::unit().validate().is_ok());
    let mut c = TwoDConfig::unit();
    c.o1 = [(0.0, 1.0), (0.0, 1.0)];
    assert!(c.validate().is_err());
    let mut c = TwoDConfig::unit();
    c.o1 = [(0.2, 0.9), (0.2, 0.9)];
    assert!(c.validate().is_err());
}

/// The dilatational and bounded roots collide where `|xi|^2 = 4 b1 rho / (gamma0 + mu0)^2`.
#[test]
fn double_root_of_the_2d_symbol() {
    let radii = log_grid(0.2, 10.0, 4000);
    for m in [BarotropicModel::unit(), BarotropicModel::new(1.0, 1.0, 0.5, 3.0).unwrap()] {
        let (lo, hi) = locate_double_root_2d(&m, &radii).unwrap();
        let want = (4.0 * m.b1 * m.bar_rho).sqrt() / (m.gamma0 + m.mu0);
        assert!(lo <= want * (1.0 + 1e-12) && want <= hi * (1.0 + 1e-12), "[{lo}, {hi}] vs {want}");
    }
}

fn short(mut cfg: ObservationConfig) -> ObservationConfig {
    cfg.ladder = vec![1e-2, 5e-3, 2e-3, 1e-3];
    cfg
}

/// With no transport the moving-frame pipeline is the interior one.
#[test]
fn moving_frame_without_transport_is_interior() {
    let interior = short(ObservationConfig::interior());
    let mut moving = short(ObservationConfig::moving_frame());
    moving.model = interior.model;
    moving.geometry = Some(MovingGeometry { l1: 0.6, l2: 0.9 });
    moving.o1 = interior.o1;
    moving.x0 = interior.x0;
    moving.eta = interior.eta;
    assert_eq!(moving.mode, Mode::MovingFrame);
    let a = observability_report(&interior).unwrap();
    let b = observability_report(&moving).unwrap();
    for (r, s) in a.rows.iter().zip(&b.rows) {
        assert_eq!((r.lhs, r.rhs), (s.lhs, s.rhs));
    }
}

#[test]
fn lhs_stays_bounded_below() {
    let r = observability_report(&short(ObservationConfig::interior())).unwrap();
    assert!(r.min_lhs() >= 0.9 * r.lhs_floor);
    assert!(r.ratio_decreasing());
}
