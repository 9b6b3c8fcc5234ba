use num_complex::Complex64;
use proptest::prelude::*;

use lcns::params::{derive_constants, BarotropicModel, FluidModel, PhysicalParams};
use lcns::spectral::{
    characteristic_coefficients, characteristic_coefficients_2d, cubic_roots, delta_derivative_scan,
    eigen2d_closed_form, eigen_branches, eigenvalues, hurwitz_check, hyperbolic_eigenvalue,
    hyperbolic_eigenvector, inverse_sum_identity_residual, log_grid, vieta_residual, CubicCoefficients,
    SymbolFamily,
};

/// Weierstrass iteration on the monic cubic, started on a circle of the root bound.
fn durand_kerner(a: f64, b: f64, c: f64) -> [Complex64; 3] {
    let p = |x: Complex64| ((x + a) * x + b) * x + c;
    let r = 1.0 + a.abs().max(b.abs()).max(c.abs());
    let seed = Complex64::from_polar(1.0, 0.4);
    let mut z = [seed * r, seed.powu(2) * r, seed.powu(3) * r];
    for _ in 0..2000 {
        let mut moved = 0.0f64;
        for i in 0..3 {
            let denom: Complex64 = (0..3).filter(|&j| j != i).map(|j| z[i] - z[j]).product();
            if denom.norm() == 0.0 {
                continue;
            }
            let step = p(z[i]) / denom;
            z[i] -= step;
            moved = moved.max(step.norm());
        }
        if moved <= 1e-16 * r {
            break;
        }
    }
    z
}

fn paired(x: &[Complex64; 3], y: &[Complex64; 3]) -> f64 {
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let scale = x.iter().chain(y).map(|z| z.norm()).fold(1.0, f64::max);
    perms
        .iter()
        .map(|p| (0..3).map(|i| (x[i] - y[p[i]]).norm()).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min)
        / scale
}

/// Determinant of `lambda I - M` by cofactor expansion.
fn char_det(m: &[[Complex64; 3]; 3], lambda: Complex64) -> Complex64 {
    let a = |i: usize, j: usize| if i == j { lambda - m[i][j] } else { -m[i][j] };
    a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
        + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0))
}

fn physical() -> impl Strategy<Value = PhysicalParams> {
    (0.5f64..5.0, 0.5f64..3.0, 0.5f64..3.0, 0.5f64..3.0, 0.05f64..2.0, 0.0f64..2.0, 0.1f64..8.0).prop_map(
        |(r, bar_theta, bar_rho, c_v, mu, lambda, kappa)| PhysicalParams {
            r,
            bar_theta,
            bar_rho,
            c_v,
            mu,
            lambda,
            kappa,
            ..PhysicalParams::p_star()
        },
    )
}

fn model() -> impl Strategy<Value = FluidModel> {
    physical().prop_map(|p| FluidModel::from_physical(&p).unwrap())
}

fn wave_number() -> impl Strategy<Value = f64> {
    (-3.0f64..4.0, any::<bool>()).prop_map(|(e, neg)| if neg { -(10f64.powf(e)) } else { 10f64.powf(e) })
}

proptest! {
    #[test]
    fn closed_form_matches_durand_kerner(a in -10.0f64..10.0, b in -10.0f64..10.0, c in -10.0f64..10.0) {
        let k = CubicCoefficients::new(a, b, c);
        prop_assert!(paired(&cubic_roots(&k), &durand_kerner(a, b, c)) < 1e-8);
    }

    #[test]
    fn vieta_holds_for_random_cubics(a in -10.0f64..10.0, b in -10.0f64..10.0, c in -10.0f64..10.0) {
        let k = CubicCoefficients::new(a, b, c);
        prop_assert!(vieta_residual(&k, &cubic_roots(&k)) < 1e-8);
    }

    #[test]
    fn discriminant_identity(a in -10.0f64..10.0, b in -10.0f64..10.0, c in -10.0f64..10.0) {
        let k = CubicCoefficients::new(a, b, c);
        let lhs = k.d1 * k.d1 - 4.0 * k.d0.powi(3);
        let scale = (k.d1 * k.d1).max(4.0 * k.d0.abs().powi(3)).max(1.0);
        prop_assert!((lhs + 27.0 * k.d).abs() / scale < 1e-9);
    }

    #[test]
    fn family_roots_match_durand_kerner(m in model(), s in wave_number()) {
        let fam = SymbolFamily::NonBarotropic1D(m);
        let k = characteristic_coefficients(&fam, s);
        prop_assert!(paired(&eigenvalues(&fam, s), &durand_kerner(k.a, k.b, k.c)) < 1e-8);
    }

    #[test]
    fn spectra_are_stable(m in model(), s in wave_number()) {
        for fam in [SymbolFamily::NonBarotropic1D(m), SymbolFamily::DerivativeForm1D(m)] {
            let roots = eigenvalues(&fam, s);
            prop_assert!(roots.iter().all(|z| z.re <= 1e-10), "{roots:?}");
        }
    }

    #[test]
    fn spectra_2d_are_stable(mu0 in 0.1f64..3.0, gamma0 in 0.0f64..3.0, b1 in 0.1f64..3.0, s in wave_number(), angle in 0.0f64..6.3) {
        let model = BarotropicModel::new(1.0, mu0, gamma0, b1).unwrap();
        let fam = SymbolFamily::Barotropic2D { model, direction: [angle.cos(), angle.sin()] };
        prop_assert!(eigenvalues(&fam, s).iter().all(|z| z.re <= 1e-10));
    }

    #[test]
    fn hurwitz_margin_is_positive(m in model(), s in -50.0f64..50.0) {
        prop_assume!(s != 0.0);
        let k = characteristic_coefficients(&SymbolFamily::NonBarotropic1D(m), s);
        prop_assert!(hurwitz_check(&k).stable);
    }

    /// Both symbol matrices vanish on the computed eigenvalues, so the two forms share a spectrum.
    #[test]
    fn eigenvalues_annihilate_both_symbols(m in model(), s in -100.0f64..100.0) {
        prop_assume!(s.abs() > 1e-2);
        let roots = eigenvalues(&SymbolFamily::NonBarotropic1D(m), s);
        let scale = roots.iter().map(|z| z.norm()).fold(1.0, f64::max).powi(3);
        for fam in [SymbolFamily::NonBarotropic1D(m), SymbolFamily::DerivativeForm1D(m)] {
            let mat = fam.symbol_matrix(s);
            for r in roots {
                prop_assert!(char_det(&mat, r).norm() / scale < 1e-10);
            }
        }
        let other = eigenvalues(&SymbolFamily::DerivativeForm1D(m), s);
        prop_assert!(paired(&roots, &other) < 1e-12);
    }

    #[test]
    fn closed_form_2d_matches_cubic(mu0 in 0.1f64..3.0, gamma0 in 0.0f64..3.0, b1 in 0.1f64..3.0,
                                    x1 in -30.0f64..30.0, x2 in -30.0f64..30.0) {
        prop_assume!(x1.hypot(x2) > 1e-2);
        let model = BarotropicModel::new(1.0, mu0, gamma0, b1).unwrap();
        let k = characteristic_coefficients_2d(&model, [x1, x2]);
        let closed = eigen2d_closed_form(&model, [x1, x2]).values;
        // A double root only resolves to the square root of the rounding error.
        let tol = if k.d.abs() < 1e-6 * (k.d1 * k.d1).max(1.0) { 1e-6 } else { 1e-10 };
        prop_assert!(paired(&closed, &durand_kerner(k.a, k.b, k.c)) < tol);
    }

    #[test]
    fn constants_are_scale_invariant(p in physical(), s in 0.1f64..10.0) {
        let d = derive_constants(&p).unwrap();
        let q = PhysicalParams { mu: p.mu * s, lambda: p.lambda * s, kappa: p.kappa * s, bar_rho: p.bar_rho * s, ..p };
        let e = derive_constants(&q).unwrap();
        prop_assert!((d.nu0 - e.nu0).abs() <= 4.0 * f64::EPSILON * d.nu0);
        prop_assert!((d.k0 - e.k0).abs() <= 4.0 * f64::EPSILON * d.k0);
        let omega = p.r * p.bar_theta / d.nu0;
        prop_assert!((d.omega0 - omega).abs() <= 2.0 * f64::EPSILON * omega);
    }
}

#[test]
fn p_star_coefficients_by_hand() {
    let fam = SymbolFamily::NonBarotropic1D(FluidModel::p_star());
    let k = characteristic_coefficients(&fam, 2.0);
    assert_eq!((k.a, k.b, k.c), (20.0, 112.0, 192.0));
    let k = characteristic_coefficients(&fam, 0.0);
    assert_eq!((k.a, k.b, k.c), (0.0, 0.0, 0.0));
}

#[test]
fn double_root_example() {
    let r = cubic_roots(&CubicCoefficients::new(4.0, 5.0, 2.0));
    let want = [-1.0, -1.0, -2.0].map(|x| Complex64::new(x, 0.0));
    assert!(paired(&r, &want) < 1e-9);
}

#[test]
fn case_one_beyond_xi0() {
    let fam = SymbolFamily::NonBarotropic1D(FluidModel::p_star());
    let xi = log_grid(1e-3, 1e4, 1000);
    let table = eigen_branches(&fam, &xi).unwrap();
    let xi0 = table.xi0.expect("regime found");
    for (i, s) in xi.iter().enumerate().filter(|(_, s)| **s >= xi0) {
        assert!(table.coeffs[i].d > 0.0, "D <= 0 at {s}");
        assert!(table.values[i].iter().all(|z| z.im.abs() < 1e-9 * z.norm().max(1.0)));
    }
}

#[test]
fn case_two_with_equal_diffusivities() {
    // nu0 = k0 = 1.
    let p = PhysicalParams { kappa: 1.0, ..PhysicalParams::p_star() };
    let m = FluidModel::from_physical(&p).unwrap();
    assert_eq!(m.nu0(), m.k0());
    let fam = SymbolFamily::NonBarotropic1D(m);
    for s in [1e2, 1e3, 1e4] {
        let k = characteristic_coefficients(&fam, s);
        assert!(k.d < 0.0, "D = {} at {s}", k.d);
        let real = eigenvalues(&fam, s).iter().filter(|z| z.im.abs() <= 1e-9 * z.norm()).count();
        assert_eq!(real, 1);
    }
}

#[test]
fn parabolic_branches_scale_like_xi_squared() {
    let m = FluidModel::p_star();
    let fam = SymbolFamily::NonBarotropic1D(m);
    let s = 1e4f64;
    let mut scaled: Vec<f64> = eigenvalues(&fam, s).iter().map(|z| -z.re / (s * s)).collect();
    scaled.sort_by(f64::total_cmp);
    let mut want = [m.nu0(), m.k0()];
    want.sort_by(f64::total_cmp);
    for (got, w) in scaled[1..].iter().zip(want) {
        assert!((got - w).abs() / w < 1e-2, "{got} vs {w}");
    }
}

#[test]
fn hyperbolic_limits() {
    let fam = SymbolFamily::NonBarotropic1D(FluidModel::p_star());
    let d = hyperbolic_eigenvalue(&fam, 1e4);
    assert!((d - 3.0).norm() / 3.0 < 1e-2);
    // Brute force: of the three roots, the one nearest -omega0.
    let k = characteristic_coefficients(&fam, 1e4);
    let nearest = durand_kerner(k.a, k.b, k.c)
        .into_iter()
        .min_by(|x, y| (x + 3.0).norm().total_cmp(&(y + 3.0).norm()))
        .unwrap();
    assert!((nearest + d).norm() < 1e-6);
    let fam2 = SymbolFamily::barotropic(BarotropicModel::unit());
    let d2 = hyperbolic_eigenvalue(&fam2, 1e3);
    assert!((d2 - 0.5).norm() / 0.5 < 1e-2);
}

#[test]
fn inverse_sum_identity_on_real_roots() {
    let m = FluidModel::p_star();
    let fam = SymbolFamily::NonBarotropic1D(m);
    let mut checked = 0;
    for s in log_grid(1e-3, 1e4, 1000) {
        if characteristic_coefficients(&fam, s).d > 0.0 {
            assert!(inverse_sum_identity_residual(&m, s, &eigenvalues(&fam, s)) < 1e-8);
            checked += 1;
        }
    }
    assert!(checked > 500);
}

#[test]
fn eigenvector_coefficient_decays_like_inverse_square() {
    let fam = SymbolFamily::NonBarotropic1D(FluidModel::p_star());
    let scaled: Vec<f64> = [1e2, 1e3, 1e4]
        .iter()
        .map(|&s| {
            let v = hyperbolic_eigenvector(&fam, s, hyperbolic_eigenvalue(&fam, s)).unwrap();
            v[2].norm() * s * s
        })
        .collect();
    let (lo, hi) = scaled.iter().fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
    assert!(hi / lo < 2.0, "{scaled:?}");
}

#[test]
fn derivative_scan_is_bounded_and_non_increasing() {
    let fam = SymbolFamily::NonBarotropic1D(FluidModel::p_star());
    let table = eigen_branches(&fam, &log_grid(1e-3, 1e4, 2000)).unwrap();
    let scan = delta_derivative_scan(&table, 1e2);
    assert!(scan.len() >= 5);
    assert!(scan.iter().all(|o| o.value.is_finite()));
    assert!(scan.windows(2).all(|w| w[1].value <= w[0].value * (1.0 + 1e-6)), "{scan:?}");
}

#[test]
fn real_part_of_delta_is_non_negative() {
    let fam = SymbolFamily::NonBarotropic1D(FluidModel::p_star());
    let table = eigen_branches(&fam, &log_grid(1e-3, 1e4, 1000)).unwrap();
    assert!((0..table.len()).all(|i| table.delta(i).re >= -1e-10));
}
