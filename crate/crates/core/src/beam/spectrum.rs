use num_complex::Complex64;
use serde::Serialize;

use super::profile::BumpProfile;
use super::BeamError;
use crate::quadrature::CompositeRule;
use crate::spectral::{
    eigen_branches, estimate_a1, hyperbolic_eigenvalue, hyperbolic_eigenvector, log_grid, SpectralError,
    SymbolFamily, DEFAULT_A1_MARGIN,
};

/// Quantities measured once per symbol family and shared by every beam:
/// the regime threshold `xi0` and the bound `a1` on `Re delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralContext {
    #[serde(skip)]
    pub family: SymbolFamily,
    pub xi0: f64,
    pub a1: f64,
    pub omega0: f64,
}

/// Grid the context is measured on.
pub const CONTEXT_GRID: (f64, f64, usize) = (1e-3, 1e4, 1000);

impl SpectralContext {
    pub fn new(family: SymbolFamily) -> Result<Self, SpectralError> {
        let (lo, hi, n) = CONTEXT_GRID;
        let table = eigen_branches(&family, &log_grid(lo, hi, n))?;
        let xi0 = table.xi0.ok_or(SpectralError::NoConvergence { what: "large-xi regime on the context grid" })?;
        Ok(SpectralContext {
            family,
            xi0,
            a1: estimate_a1(&table, DEFAULT_A1_MARGIN),
            omega0: family.omega0(),
        })
    }

    /// Largest admissible `eps` under the gate `1/eps > 2 xi0`.
    pub fn max_eps(&self) -> f64 {
        1.0 / (2.0 * self.xi0)
    }

    pub fn check_eps(&self, eps: f64) -> Result<(), BeamError> {
        if !(eps > 0.0 && eps < self.max_eps()) {
            return Err(BeamError::Inadmissible { eps, max_eps: self.max_eps() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct QuadratureSpec {
    pub panels: usize,
    pub order: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { panels: 64, order: 8 }
    }
}

/// Terminal data `eps^{1/4} psi(sqrt(eps)(xi - 1/eps)) e^{-i x0 xi}` on a
/// Gauss–Legendre rule in profile coordinates `zeta`, with the bounded-branch
/// eigenvalue and eigenvector attached at every node.
#[derive(Debug, Clone)]
pub struct TerminalSpectrum {
    pub family: SymbolFamily,
    pub profile: BumpProfile,
    pub eps: f64,
    pub x0: f64,
    pub horizon: f64,
    pub quadrature: QuadratureSpec,
    pub zeta: Vec<f64>,
    pub weights: Vec<f64>,
    pub xi: Vec<f64>,
    /// `eps^{1/4} psi(zeta_j)`, the modulus of the terminal data.
    pub envelope: Vec<f64>,
    /// Decay rates `delta(xi_j)`.
    pub delta: Vec<Complex64>,
    pub vectors: Vec<[Complex64; 3]>,
}

impl TerminalSpectrum {
    pub fn new(
        ctx: &SpectralContext,
        eps: f64,
        x0: f64,
        horizon: f64,
        profile: BumpProfile,
        quadrature: QuadratureSpec,
    ) -> Result<Self, BeamError> {
        ctx.check_eps(eps)?;
        if ctx.family.barotropic_model().is_some() {
            return Err(BeamError::BadInput("use the 2D spectrum for the barotropic family".into()));
        }
        if quadrature.panels * quadrature.order < 64 {
            return Err(BeamError::BadInput("quadrature needs at least 64 nodes".into()));
        }
        if !(horizon > 0.0) {
            return Err(BeamError::BadInput("horizon must be positive".into()));
        }
        Self::build(ctx.family, eps, x0, horizon, profile, quadrature)
    }

    fn build(
        family: SymbolFamily,
        eps: f64,
        x0: f64,
        horizon: f64,
        profile: BumpProfile,
        quadrature: QuadratureSpec,
    ) -> Result<Self, BeamError> {
        let rule = CompositeRule::new(0.0, 1.0, quadrature.panels, quadrature.order);
        let se = eps.sqrt();
        let xi: Vec<f64> = rule.nodes.iter().map(|z| z / se + 1.0 / eps).collect();
        let envelope = rule.nodes.iter().map(|&z| eps.powf(0.25) * profile.value(z)).collect();
        let delta: Vec<Complex64> = xi.iter().map(|&x| hyperbolic_eigenvalue(&family, x)).collect();
        let vectors = xi
            .iter()
            .zip(&delta)
            .map(|(&x, &d)| hyperbolic_eigenvector(&family, x, d))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(TerminalSpectrum {
            family,
            profile,
            eps,
            x0,
            horizon,
            quadrature,
            zeta: rule.nodes,
            weights: rule.weights,
            xi,
            envelope,
            delta,
            vectors,
        })
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    /// Same data on a rule with `panels` panels.
    pub fn with_panels(&self, panels: usize) -> Result<Self, BeamError> {
        Self::build(
            self.family,
            self.eps,
            self.x0,
            self.horizon,
            self.profile,
            QuadratureSpec { panels, order: self.quadrature.order },
        )
    }

    /// Refines the rule until it has at least eight nodes per oscillation of
    /// `e^{i(x - x0) xi}` in `zeta` for `|x - x0| <= max_dist`.
    pub fn refined_for(&self, max_dist: f64) -> Result<Self, BeamError> {
        let need = (8.0 * max_dist / (2.0 * std::f64::consts::PI * self.eps.sqrt())).ceil() as usize;
        let panels = need.div_ceil(self.quadrature.order);
        if panels <= self.quadrature.panels {
            Ok(self.clone())
        } else {
            self.with_panels(panels)
        }
    }

    /// Quadrature weight in `xi`, i.e. `w_j / sqrt(eps)`.
    pub fn xi_weight(&self, j: usize) -> f64 {
        self.weights[j] / self.eps.sqrt()
    }

    pub fn sigma_hat(&self, j: usize) -> Complex64 {
        Complex64::from_polar(self.envelope[j], -self.x0 * self.xi[j])
    }

    /// `sum_j w_j |sigma_hat_j|^2 f(j)` in `xi` measure.
    pub fn spectral_sum(&self, f: impl Fn(usize) -> f64) -> f64 {
        (0..self.len()).map(|j| self.xi_weight(j) * self.envelope[j].powi(2) * f(j)).sum()
    }

    pub fn parseval_mass(&self) -> f64 {
        self.spectral_sum(|_| 1.0)
    }

    /// `int (1 + xi^2) |sigma_hat_T|^2`.
    pub fn h1_mass(&self) -> f64 {
        self.spectral_sum(|j| 1.0 + self.xi[j] * self.xi[j])
    }

    /// Whole-line `||component(., t)||^2` by Parseval.
    pub fn parseval_norm(&self, component: usize, t: f64) -> f64 {
        let s = self.horizon - t;
        self.spectral_sum(|j| self.vectors[j][component].norm_sqr() * (-2.0 * self.delta[j].re * s).exp())
            / (2.0 * std::f64::consts::PI)
    }

    /// Whole-line `||component||^2_{L2(0,T;L2)}` by Parseval, time integral in closed form.
    pub fn parseval_spacetime(&self, component: usize) -> f64 {
        let t = self.horizon;
        self.spectral_sum(|j| {
            let r = 2.0 * self.delta[j].re;
            let time = if r.abs() < 1e-12 { t } else { -(-r * t).exp_m1() / r };
            self.vectors[j][component].norm_sqr() * time
        }) / (2.0 * std::f64::consts::PI)
    }

    pub fn max_xi(&self) -> f64 {
        self.xi.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::FluidModel;

    #[test]
    fn support_and_mass() {
        let ctx = SpectralContext::new(SymbolFamily::NonBarotropic1D(FluidModel::p_star())).unwrap();
        for eps in [1e-2, 1e-3] {
            let s = TerminalSpectrum::new(&ctx, eps, 0.3, 1.0, BumpProfile::standard_1d(), QuadratureSpec::default())
                .unwrap();
            assert!((s.parseval_mass() - 1.0).abs() < 1e-6);
            let lo = s.xi.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = s.max_xi();
            assert!(lo > 1.0 / eps && hi < 1.0 / eps + 1.0 / eps.sqrt());
        }
    }

    #[test]
    fn too_large_eps_is_rejected() {
        let ctx = SpectralContext::new(SymbolFamily::NonBarotropic1D(FluidModel::p_star())).unwrap();
        let err = TerminalSpectrum::new(&ctx, 0.5, 0.0, 1.0, BumpProfile::standard_1d(), QuadratureSpec::default())
            .unwrap_err();
        match err {
            BeamError::Inadmissible { max_eps, .. } => assert!((max_eps - ctx.max_eps()).abs() < 1e-15),
            e => panic!("{e}"),
        }
    }
}
