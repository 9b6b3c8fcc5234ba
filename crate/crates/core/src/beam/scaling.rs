use serde::Serialize;

use super::field::{evaluate_beam_with, time_grid, Modifier, SamplingSet};
use super::norms::{required_dx, trace_norms, window_norm, NormKind, Region};
use super::profile::BumpProfile;
use super::spectrum::{QuadratureSpec, SpectralContext, TerminalSpectrum};
use super::BeamError;
use crate::exec::{map_slice, Execution};
use crate::fit::{power_fit, PowerFit};
use crate::io::{fmt_f64, CsvTable};
use crate::spectral::{FamilyTag, SymbolFamily};

pub const DEFAULT_LADDER: [f64; 5] = [1e-2, 5e-3, 2e-3, 1e-3, 5e-4];

/// Fits with a larger residual are flagged as non-linear in log-log scale.
pub const FIT_RESIDUAL_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// `||sigma(., 0)||^2` on the whole line.
    Sigma0Norm,
    /// `||sigma||^2` over `(0, T) x {eta <= |x - x0| <= W}`.
    SigmaOffcenter,
    /// `||v||^2_{L2(0,T;L2)}` on the whole line.
    VNorm,
    PhiNorm,
    VOffcenter,
    /// `||v(x_eval, .)||^2_{H1(0,T)}`.
    TraceV,
    TracePhi,
    /// `||v(., 0)||^2` on the whole line.
    V0Norm,
}

impl Quantity {
    pub const ALL: [Quantity; 8] = [
        Quantity::Sigma0Norm,
        Quantity::SigmaOffcenter,
        Quantity::VNorm,
        Quantity::PhiNorm,
        Quantity::VOffcenter,
        Quantity::TraceV,
        Quantity::TracePhi,
        Quantity::V0Norm,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Quantity::Sigma0Norm => "sigma0_norm",
            Quantity::SigmaOffcenter => "sigma_offcenter",
            Quantity::VNorm => "v_norm",
            Quantity::PhiNorm => "phi_norm",
            Quantity::VOffcenter => "v_offcenter",
            Quantity::TraceV => "trace_v",
            Quantity::TracePhi => "trace_phi",
            Quantity::V0Norm => "v0_norm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|q| q.name() == s)
    }
}

#[derive(Debug, Clone)]
pub struct ScalingConfig {
    pub family: SymbolFamily,
    pub ladder: Vec<f64>,
    pub x0: f64,
    pub eta: f64,
    pub horizon: f64,
    pub quantities: Vec<Quantity>,
    /// Half-width of the sampled window around `x0`.
    pub width: f64,
    /// Time slices for space-time norms.
    pub nt: usize,
    /// Time samples for trace norms.
    pub trace_nt: usize,
    /// Trace point, `x0` when `None`.
    pub x_eval: Option<f64>,
    pub quadrature: QuadratureSpec,
    pub exec: Execution,
}

impl ScalingConfig {
    pub fn new(family: SymbolFamily, quantities: &[Quantity]) -> Self {
        ScalingConfig {
            family,
            ladder: DEFAULT_LADDER.to_vec(),
            x0: 0.3,
            eta: 0.15,
            horizon: 1.0,
            quantities: quantities.to_vec(),
            width: 10.0,
            nt: 33,
            trace_nt: 257,
            x_eval: None,
            quadrature: QuadratureSpec::default(),
            exec: Execution::default(),
        }
    }

    fn validate(&self) -> Result<(), BeamError> {
        let bad = |m: &str| Err(BeamError::BadInput(m.to_string()));
        if self.ladder.len() < 4 {
            return bad("the ladder needs at least four entries");
        }
        if self.ladder.windows(2).any(|w| !(w[1] < w[0])) {
            return bad("the ladder must be strictly decreasing");
        }
        if !(self.eta > 0.0 && self.width > self.eta) {
            return bad("need 0 < eta < width");
        }
        if !(self.horizon > 0.0) {
            return bad("horizon must be positive");
        }
        if self.nt < 2 || self.trace_nt < 3 {
            return bad("too few time samples");
        }
        if self.family.tag() == FamilyTag::Barotropic2D {
            return bad("use the 2D scaling study for the barotropic family");
        }
        let traces = self.quantities.iter().any(|q| matches!(q, Quantity::TraceV | Quantity::TracePhi));
        if traces && self.family.tag() != FamilyTag::NonBarotropic1D {
            return bad("trace quantities need the non-barotropic family");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantitySeries {
    pub quantity: Quantity,
    pub values: Vec<f64>,
    /// `None` when some value is zero or non-finite.
    pub fit: Option<PowerFit>,
    pub nonlinear: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub family: FamilyTag,
    pub ladder: Vec<f64>,
    pub series: Vec<QuantitySeries>,
}

impl ScalingReport {
    pub fn get(&self, q: Quantity) -> Option<&QuantitySeries> {
        self.series.iter().find(|s| s.quantity == q)
    }

    pub fn slope(&self, q: Quantity) -> Option<f64> {
        self.get(q).and_then(|s| s.fit).map(|f| f.slope)
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["family", "eps", "quantity", "value", "slope_fit", "fit_residual"]);
        for s in &self.series {
            let (slope, res) = match s.fit {
                Some(f) => (fmt_f64(f.slope), fmt_f64(f.residual)),
                None => ("NaN".to_string(), "NaN".to_string()),
            };
            for (e, v) in self.ladder.iter().zip(&s.values) {
                t.push(vec![
                    self.family.name().to_string(),
                    fmt_f64(*e),
                    s.quantity.name().to_string(),
                    fmt_f64(*v),
                    slope.clone(),
                    res.clone(),
                ]);
            }
        }
        t
    }
}

/// Times and off-centre sampling set shared by both off-centre quantities.
fn offcenter_set(cfg: &ScalingConfig, spec: &TerminalSpectrum) -> SamplingSet {
    let times = time_grid(cfg.horizon, cfg.nt);
    let dx = required_dx(spec.max_xi());
    let mut set = SamplingSet::default();
    set.add_interval(cfg.x0 - cfg.width, cfg.x0 - cfg.eta, dx, &times);
    set.add_interval(cfg.x0 + cfg.eta, cfg.x0 + cfg.width, dx, &times);
    set
}

fn measure(cfg: &ScalingConfig, ctx: &SpectralContext, eps: f64) -> Result<Vec<f64>, BeamError> {
    let spec = TerminalSpectrum::new(ctx, eps, cfg.x0, cfg.horizon, BumpProfile::standard_1d(), cfg.quadrature)?;
    let h = cfg.horizon;
    let off: Vec<usize> = [(Quantity::SigmaOffcenter, 0), (Quantity::VOffcenter, 1)]
        .iter()
        .filter(|(q, _)| cfg.quantities.contains(q))
        .map(|&(_, k)| k)
        .collect();
    let off_field = if off.is_empty() {
        None
    } else {
        Some(evaluate_beam_with(&spec, &offcenter_set(cfg, &spec), &off, Modifier::Plain, cfg.exec)?)
    };
    let traces = if cfg.quantities.iter().any(|q| matches!(q, Quantity::TraceV | Quantity::TracePhi)) {
        Some(trace_norms(&spec, cfg.x_eval.unwrap_or(cfg.x0), cfg.trace_nt, cfg.exec)?)
    } else {
        None
    };
    cfg.quantities
        .iter()
        .map(|q| {
            Ok(match q {
                Quantity::Sigma0Norm => spec.parseval_norm(0, 0.0),
                Quantity::V0Norm => spec.parseval_norm(1, 0.0),
                Quantity::VNorm => spec.parseval_spacetime(1),
                Quantity::PhiNorm => spec.parseval_spacetime(2),
                Quantity::SigmaOffcenter | Quantity::VOffcenter => {
                    let k = if *q == Quantity::SigmaOffcenter { 0 } else { 1 };
                    let f = off_field.as_ref().expect("evaluated above");
                    window_norm(f, k, &Region::Whole, (0.0, h), NormKind::L2SpaceTime)?
                }
                Quantity::TraceV => traces.as_ref().expect("evaluated above").v_h1_sq,
                Quantity::TracePhi => traces.as_ref().expect("evaluated above").phi_h1_sq,
            })
        })
        .collect()
}

/// Measures every requested quantity along the ladder and fits `value ~ C eps^p`.
pub fn scaling_study(cfg: &ScalingConfig) -> Result<ScalingReport, BeamError> {
    cfg.validate()?;
    let ctx = SpectralContext::new(cfg.family)?;
    for &e in &cfg.ladder {
        ctx.check_eps(e)?;
    }
    let rows = map_slice(cfg.exec, &cfg.ladder, |&e| measure(cfg, &ctx, e))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let series = cfg
        .quantities
        .iter()
        .enumerate()
        .map(|(i, &quantity)| {
            let values: Vec<f64> = rows.iter().map(|r| r[i]).collect();
            let fit = power_fit(&cfg.ladder, &values);
            QuantitySeries {
                quantity,
                nonlinear: fit.is_none_or(|f| f.residual > FIT_RESIDUAL_LIMIT),
                values,
                fit,
            }
        })
        .collect();
    Ok(ScalingReport { family: cfg.family.tag(), ladder: cfg.ladder.clone(), series })
}
