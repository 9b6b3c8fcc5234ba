use num_complex::Complex64;
use serde::Serialize;

use super::branches::BranchLabel;
use super::cubic::{cubic_roots, polish_roots};
use super::{characteristic_coefficients, SpectralError, SymbolFamily};
use crate::params::{BarotropicModel, FluidModel};

/// Eigenvalues of a symbol at one wave number, with labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenTriple {
    /// Eigenvalues of the symbol matrix, i.e. `-lambda, -mu, -delta`.
    #[serde(skip)]
    pub values: [Complex64; 3],
    pub labels: [BranchLabel; 3],
}

impl EigenTriple {
    pub fn get(&self, label: BranchLabel) -> Complex64 {
        let i = self.labels.iter().position(|l| *l == label).expect("all labels present");
        self.values[i]
    }
}

/// Closed-form roots followed by Newton polishing.
pub fn eigenvalues(family: &SymbolFamily, s: f64) -> [Complex64; 3] {
    let k = characteristic_coefficients(family, s);
    polish_roots(&k, cubic_roots(&k))
}

/// Decay rate `delta` of the bounded branch (so the symbol eigenvalue is `-delta`).
///
/// For 1D families this is the smallest-modulus root, which is the bounded branch
/// once `|xi|` is past the last crossing with a parabolic branch. For the 2D
/// family the closed form is used.
pub fn hyperbolic_eigenvalue(family: &SymbolFamily, s: f64) -> Complex64 {
    match family {
        SymbolFamily::Barotropic2D { model, .. } => {
            -eigen2d_closed_form(model, family.wave_vector(s)).get(BranchLabel::Hyperbolic)
        }
        _ => {
            let r = eigenvalues(family, s);
            let small = r
                .iter()
                .copied()
                .min_by(|x, y| x.norm().total_cmp(&y.norm()))
                .expect("three roots");
            -small
        }
    }
}

/// `d_delta = -(delta^2 - nu0 xi^2 delta + R theta xi^2) / (R rho xi^2)`.
fn d_delta(m: &FluidModel, xi: f64, delta: Complex64) -> Complex64 {
    let x2 = xi * xi;
    -(delta * delta - m.nu0() * x2 * delta + m.r * m.bar_theta * x2) / (m.r * m.bar_rho * x2)
}

/// Eigenvector with first component 1 for the eigenvalue `-delta`.
pub fn hyperbolic_eigenvector(
    family: &SymbolFamily,
    s: f64,
    delta: Complex64,
) -> Result<[Complex64; 3], SpectralError> {
    if s == 0.0 {
        return Err(SpectralError::ZeroWaveNumber);
    }
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::i();
    Ok(match family {
        SymbolFamily::NonBarotropic1D(m) => {
            [one, i * delta / (m.bar_rho * s), d_delta(m, s, delta)]
        }
        SymbolFamily::DerivativeForm1D(m) => {
            [one, delta / m.bar_rho, -i * s * d_delta(m, s, delta)]
        }
        SymbolFamily::Barotropic2D { model, .. } => {
            let [x1, x2] = family.wave_vector(s);
            let n2 = x1 * x1 + x2 * x2;
            // The symbol eigenvalue is -delta.
            let lam = -delta;
            let denom = i * (model.bar_rho * n2);
            [one, lam * x1 / denom, lam * x2 / denom]
        }
    })
}

/// Closed-form eigenvalues of the 2D symbol, ordered shear, dilatational, bounded.
pub fn eigen2d_closed_form(m: &BarotropicModel, xi: [f64; 2]) -> EigenTriple {
    let n2 = xi[0] * xi[0] + xi[1] * xi[1];
    let s = (m.mu0 + m.gamma0) * n2;
    let g = m.b1 * m.bar_rho;
    let mg = m.mu0 + m.gamma0;
    let x = Complex64::new(4.0 * g / (mg * mg * n2), 0.0);
    let root = (Complex64::new(1.0, 0.0) - x).sqrt();
    let shear = Complex64::new(-m.mu0 * n2, 0.0);
    let big = -(s / 2.0) * (1.0 + root);
    // -(s/2)(1 - sqrt(1 - x)) rewritten without cancellation.
    let small = -2.0 * g / ((m.mu0 + m.gamma0) * (1.0 + root));
    EigenTriple {
        values: [shear, big, small],
        labels: [BranchLabel::ParabolicNu, BranchLabel::ParabolicK, BranchLabel::Hyperbolic],
    }
}

/// `|1/lambda + 1/mu + 1/delta - (1/(k0 xi^2) + R b/(k0 theta xi^2) + nu0/(R theta))|`.
pub fn inverse_sum_identity_residual(m: &FluidModel, xi: f64, roots: &[Complex64; 3]) -> f64 {
    let x2 = xi * xi;
    let lhs: Complex64 = roots.iter().map(|r| -1.0 / r).sum();
    let rhs = 1.0 / (m.k0() * x2) + m.r * m.derived.b / (m.k0() * m.bar_theta * x2)
        + m.nu0() / (m.r * m.bar_theta);
    (lhs - rhs).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{frobenius, mat_vec, paired_distance};

    fn residual(family: &SymbolFamily, s: f64) -> f64 {
        let delta = hyperbolic_eigenvalue(family, s);
        let v = hyperbolic_eigenvector(family, s, delta).unwrap();
        let m = family.symbol_matrix(s);
        let mv = mat_vec(&m, &v);
        let r: f64 = mv.iter().zip(v.iter()).map(|(a, b)| (a + delta * b).norm_sqr()).sum();
        r.sqrt() / frobenius(&m)
    }

    #[test]
    fn eigenvector_residuals() {
        let m = FluidModel::p_star();
        for s in [1.0, 7.5, 1e3] {
            assert!(residual(&SymbolFamily::NonBarotropic1D(m), s) < 1e-8);
            assert!(residual(&SymbolFamily::DerivativeForm1D(m), s) < 1e-8);
        }
        let fam = SymbolFamily::Barotropic2D {
            model: BarotropicModel::unit(),
            direction: [0.6, 0.8],
        };
        assert!(residual(&fam, 5.0) < 1e-8);
    }

    #[test]
    fn closed_form_matches_cubic_2d() {
        let m = BarotropicModel::unit();
        let fam = SymbolFamily::barotropic(m);
        for s in [0.3, 1.0, 1.5, 3.0, 40.0] {
            let closed = eigen2d_closed_form(&m, [s, 0.0]).values;
            assert!(paired_distance(&closed, &eigenvalues(&fam, s)) < 1e-10 * s * s);
        }
    }

    #[test]
    fn unit_2d_special_points() {
        let m = BarotropicModel::unit();
        // |xi|^2 = 4 b1 rho / (mu0 + gamma0)^2 = 1: the square root vanishes.
        let t = eigen2d_closed_form(&m, [1.0, 0.0]);
        for v in t.values {
            assert!((v - Complex64::new(-1.0, 0.0)).norm() < 1e-14);
        }
        let t = eigen2d_closed_form(&m, [0.5, 0.0]);
        assert!(t.values[1].im.abs() > 0.1);
        assert!((t.values[1] - t.values[2].conj()).norm() < 1e-14);
    }
}
