use std::f64::consts::PI;

use serde::Serialize;

use crate::quadrature::CompositeRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ProfileKind {
    StandardBump,
}

/// Smooth bump of unit L2 norm: `c exp(-1/(z(1-z)))` on `(0,1)` in 1D,
/// `c exp(-1/(1-|z|^2))` on the unit disc in 2D.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BumpProfile {
    pub kind: ProfileKind,
    pub dimension: u8,
    pub normalization: f64,
    /// Composite Gauss–Legendre rule used for the normalization integral.
    pub panels: usize,
    pub order: usize,
}

const NORM_PANELS: usize = 128;
const NORM_ORDER: usize = 16;

fn raw_1d(z: f64) -> f64 {
    if z <= 0.0 || z >= 1.0 {
        0.0
    } else {
        (-1.0 / (z * (1.0 - z))).exp()
    }
}

fn raw_2d(r2: f64) -> f64 {
    if r2 >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r2)).exp()
    }
}

pub fn make_profile(kind: ProfileKind, dimension: u8) -> BumpProfile {
    assert!(dimension == 1 || dimension == 2, "dimension must be 1 or 2");
    let rule = CompositeRule::new(0.0, 1.0, NORM_PANELS, NORM_ORDER);
    let mass = match dimension {
        1 => rule.integrate(|z| raw_1d(z).powi(2)),
        // Polar coordinates: 2 pi int_0^1 r f(r^2)^2 dr.
        _ => 2.0 * PI * rule.integrate(|r| r * raw_2d(r * r).powi(2)),
    };
    BumpProfile {
        kind,
        dimension,
        normalization: 1.0 / mass.sqrt(),
        panels: NORM_PANELS,
        order: NORM_ORDER,
    }
}

impl BumpProfile {
    pub fn standard_1d() -> Self {
        make_profile(ProfileKind::StandardBump, 1)
    }

    pub fn standard_2d() -> Self {
        make_profile(ProfileKind::StandardBump, 2)
    }

    pub fn value(&self, z: f64) -> f64 {
        debug_assert_eq!(self.dimension, 1);
        self.normalization * raw_1d(z)
    }

    pub fn derivative(&self, z: f64) -> f64 {
        if z <= 0.0 || z >= 1.0 {
            return 0.0;
        }
        let q = z * (1.0 - z);
        self.value(z) * (1.0 - 2.0 * z) / (q * q)
    }

    pub fn value_2d(&self, z: [f64; 2]) -> f64 {
        debug_assert_eq!(self.dimension, 2);
        self.normalization * raw_2d(z[0] * z[0] + z[1] * z[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_norm_and_endpoints() {
        let p = BumpProfile::standard_1d();
        let fine = CompositeRule::new(0.0, 1.0, 400, 12);
        assert!((fine.integrate(|z| p.value(z).powi(2)) - 1.0).abs() < 1e-10);
        assert!(p.value(0.001) < 1e-100);
        assert_eq!(p.value(0.5), p.normalization * (-4f64).exp());
        assert_eq!(p.value(1.0), 0.0);
    }

    #[test]
    fn derivative_matches_differences() {
        let p = BumpProfile::standard_1d();
        for z in [0.2, 0.45, 0.7] {
            let h = 1e-6;
            let fd = (p.value(z + h) - p.value(z - h)) / (2.0 * h);
            assert!((fd - p.derivative(z)).abs() < 1e-6 * p.derivative(z).abs().max(1.0));
        }
    }

    #[test]
    fn disc_profile_unit_norm() {
        let p = BumpProfile::standard_2d();
        let r = CompositeRule::new(-1.0, 1.0, 64, 8);
        let mut s = 0.0;
        for (x, wx) in r.nodes.iter().zip(&r.weights) {
            for (y, wy) in r.nodes.iter().zip(&r.weights) {
                s += wx * wy * p.value_2d([*x, *y]).powi(2);
            }
        }
        assert!((s - 1.0).abs() < 1e-6, "{s}");
    }
}
