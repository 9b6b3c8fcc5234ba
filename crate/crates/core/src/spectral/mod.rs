//! Symbols of the Fourier-transformed adjoint systems and their eigenvalues.

mod branches;
mod cubic;
mod eigen;

pub use branches::{
    delta_derivative_scan, eigen_branches, estimate_a1, laplacian_scan_2d, locate_double_root_2d,
    log_grid, BranchLabel, BranchTable, OctaveValue, DEFAULT_A1_MARGIN,
};
pub use cubic::{
    companion_roots, cubic_roots, hurwitz_check, paired_distance, polish_roots,
    scaled_paired_distance, vieta_residual, CubicCoefficients, HurwitzReport, RootCase,
    DEGENERACY_TOL, PERMUTATIONS,
};
pub use eigen::{
    eigen2d_closed_form, eigenvalues, hyperbolic_eigenvalue, hyperbolic_eigenvector,
    inverse_sum_identity_residual, EigenTriple,
};

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::params::{BarotropicModel, FluidModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("{what} did not converge")]
    NoConvergence { what: &'static str },
    #[error("the wave number must be non-zero")]
    ZeroWaveNumber,
    #[error("grid must be sorted and free of NaN")]
    BadGrid,
    #[error("ambiguous branch assignment near xi = {xi}")]
    Ambiguous { xi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FamilyTag {
    NonBarotropic1D,
    DerivativeForm1D,
    Barotropic2D,
}

impl FamilyTag {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyTag::NonBarotropic1D => "NonBarotropic1D",
            FamilyTag::DerivativeForm1D => "DerivativeForm1D",
            FamilyTag::Barotropic2D => "Barotropic2D",
        }
    }
}

/// A symbol family. The 2D family is sampled along a unit direction, so every
/// family is parametrised by a signed scalar wave number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SymbolFamily {
    NonBarotropic1D(FluidModel),
    DerivativeForm1D(FluidModel),
    Barotropic2D {
        model: BarotropicModel,
        direction: [f64; 2],
    },
}

pub type Matrix3c = [[Complex64; 3]; 3];

fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

impl SymbolFamily {
    pub fn barotropic(model: BarotropicModel) -> Self {
        SymbolFamily::Barotropic2D {
            model,
            direction: [1.0, 0.0],
        }
    }

    pub fn barotropic_model(&self) -> Option<&BarotropicModel> {
        match self {
            SymbolFamily::Barotropic2D { model, .. } => Some(model),
            _ => None,
        }
    }

    pub fn fluid_model(&self) -> Option<&FluidModel> {
        match self {
            SymbolFamily::NonBarotropic1D(m) | SymbolFamily::DerivativeForm1D(m) => Some(m),
            SymbolFamily::Barotropic2D { .. } => None,
        }
    }

    pub fn tag(&self) -> FamilyTag {
        match self {
            SymbolFamily::NonBarotropic1D(_) => FamilyTag::NonBarotropic1D,
            SymbolFamily::DerivativeForm1D(_) => FamilyTag::DerivativeForm1D,
            SymbolFamily::Barotropic2D { .. } => FamilyTag::Barotropic2D,
        }
    }

    /// Limit of the hyperbolic eigenvalue modulus at large wave numbers.
    pub fn omega0(&self) -> f64 {
        match self {
            SymbolFamily::NonBarotropic1D(m) | SymbolFamily::DerivativeForm1D(m) => m.omega0(),
            SymbolFamily::Barotropic2D { model, .. } => model.omega0_2d,
        }
    }

    /// The two diffusivities, i.e. the large-xi limits of the parabolic branches divided by xi^2.
    pub fn diffusivities(&self) -> [f64; 2] {
        match self {
            SymbolFamily::NonBarotropic1D(m) | SymbolFamily::DerivativeForm1D(m) => [m.nu0(), m.k0()],
            SymbolFamily::Barotropic2D { model, .. } => [model.mu0, model.mu0 + model.gamma0],
        }
    }

    pub fn bar_rho(&self) -> f64 {
        match self {
            SymbolFamily::NonBarotropic1D(m) | SymbolFamily::DerivativeForm1D(m) => m.bar_rho,
            SymbolFamily::Barotropic2D { model, .. } => model.bar_rho,
        }
    }

    /// Wave vector at grid parameter `s` (for 1D families the second entry is zero).
    pub fn wave_vector(&self, s: f64) -> [f64; 2] {
        match self {
            SymbolFamily::Barotropic2D { direction, .. } => [s * direction[0], s * direction[1]],
            _ => [s, 0.0],
        }
    }

    pub fn symbol_matrix(&self, s: f64) -> Matrix3c {
        let z = cx(0.0, 0.0);
        match self {
            SymbolFamily::NonBarotropic1D(m) => {
                let (xi, x2) = (s, s * s);
                [
                    [z, cx(0.0, m.bar_rho * xi), z],
                    [cx(0.0, m.r * m.bar_theta / m.bar_rho * xi), cx(-m.nu0() * x2, 0.0), cx(0.0, m.r * xi)],
                    [z, cx(0.0, m.r * m.bar_theta / m.c_v * xi), cx(-m.k0() * x2, 0.0)],
                ]
            }
            SymbolFamily::DerivativeForm1D(m) => {
                let (xi, x2) = (s, s * s);
                [
                    [z, cx(-m.bar_rho, 0.0), z],
                    [cx(m.r * m.bar_theta / m.bar_rho * x2, 0.0), cx(-m.nu0() * x2, 0.0), cx(0.0, m.r * xi)],
                    [z, cx(0.0, m.r * m.bar_theta / m.c_v * xi), cx(-m.k0() * x2, 0.0)],
                ]
            }
            SymbolFamily::Barotropic2D { model: m, .. } => {
                let [x1, x2] = self.wave_vector(s);
                let n2 = x1 * x1 + x2 * x2;
                [
                    [z, cx(0.0, m.bar_rho * x1), cx(0.0, m.bar_rho * x2)],
                    [cx(0.0, m.b1 * x1), cx(-m.mu0 * n2 - m.gamma0 * x1 * x1, 0.0), cx(-m.gamma0 * x1 * x2, 0.0)],
                    [cx(0.0, m.b1 * x2), cx(-m.gamma0 * x1 * x2, 0.0), cx(-m.mu0 * n2 - m.gamma0 * x2 * x2, 0.0)],
                ]
            }
        }
    }
}

/// Characteristic polynomial `det(x I - M(xi)) = x^3 + a x^2 + b x + c`.
pub fn characteristic_coefficients(family: &SymbolFamily, s: f64) -> CubicCoefficients {
    match family {
        SymbolFamily::NonBarotropic1D(m) | SymbolFamily::DerivativeForm1D(m) => {
            let (nu0, k0, r, th) = (m.nu0(), m.k0(), m.r, m.bar_theta);
            let x2 = s * s;
            CubicCoefficients::new(
                (nu0 + k0) * x2,
                (r * th + r * r * m.derived.b) * x2 + k0 * nu0 * x2 * x2,
                k0 * r * th * x2 * x2,
            )
        }
        SymbolFamily::Barotropic2D { model, .. } => {
            let [x1, x2] = family.wave_vector(s);
            characteristic_coefficients_2d(model, [x1, x2])
        }
    }
}

pub fn characteristic_coefficients_2d(m: &BarotropicModel, xi: [f64; 2]) -> CubicCoefficients {
    let n2 = xi[0] * xi[0] + xi[1] * xi[1];
    let g = m.b1 * m.bar_rho;
    CubicCoefficients::new(
        (2.0 * m.mu0 + m.gamma0) * n2,
        m.mu0 * (m.mu0 + m.gamma0) * n2 * n2 + g * n2,
        m.mu0 * g * n2 * n2,
    )
}

pub fn mat_vec(m: &Matrix3c, v: &[Complex64; 3]) -> [Complex64; 3] {
    let mut out = [cx(0.0, 0.0); 3];
    for (o, row) in out.iter_mut().zip(m.iter()) {
        *o = row[0] * v[0] + row[1] * v[1] + row[2] * v[2];
    }
    out
}

pub fn frobenius(m: &Matrix3c) -> f64 {
    m.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_star_coefficients() {
        let f = SymbolFamily::NonBarotropic1D(FluidModel::p_star());
        let k = characteristic_coefficients(&f, 1.0);
        assert_eq!((k.a, k.b, k.c), (5.0, 16.0, 12.0));
        let k = characteristic_coefficients(&f, 2.0);
        assert_eq!((k.a, k.b, k.c), (20.0, 112.0, 192.0));
        for fam in [f, SymbolFamily::barotropic(BarotropicModel::unit())] {
            let k = characteristic_coefficients(&fam, 0.0);
            assert_eq!((k.a, k.b, k.c), (0.0, 0.0, 0.0));
        }
    }
}
