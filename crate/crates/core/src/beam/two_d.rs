use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use super::field::{dot, time_grid};
use super::norms::required_dx;
use super::profile::BumpProfile;
use super::spectrum::SpectralContext;
use super::BeamError;
use crate::exec::{map_indexed, map_slice, Execution};
use crate::fit::{power_fit, PowerFit};
use crate::io::{fmt_f64, CsvTable};
use crate::params::BarotropicModel;
use crate::quadrature::CompositeRule;
use crate::spectral::{eigen2d_closed_form, BranchLabel, SymbolFamily};

use super::scaling::{DEFAULT_LADDER, FIT_RESIDUAL_LIMIT};

/// Per-axis tensor rule on `[-1, 1]`: panels and nodes per panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Quadrature2D {
    pub panels: usize,
    pub order: usize,
}

impl Default for Quadrature2D {
    fn default() -> Self {
        Quadrature2D { panels: 64, order: 4 }
    }
}

/// Terminal data `eps^{1/2} psi(sqrt(eps) xi - bar_xi/sqrt(eps)) e^{-i x0.xi}` on a
/// tensor rule over the square holding the unit disc. Nodes outside the
/// disc carry zero weight and are dropped.
#[derive(Debug, Clone)]
pub struct Spectrum2D {
    pub model: BarotropicModel,
    pub eps: f64,
    pub x0: [f64; 2],
    pub bar_xi: [f64; 2],
    pub horizon: f64,
    pub quadrature: Quadrature2D,
    /// Axis wave numbers `zeta/sqrt(eps) + bar_xi/eps`.
    pub xi1: Vec<f64>,
    pub xi2: Vec<f64>,
    /// Nodes inside the disc as `(a, b)` axis indices.
    pub nodes: Vec<(usize, usize)>,
    /// `xi`-measure weight times the terminal modulus, per node.
    pub amplitude: Vec<f64>,
    /// Decay rates, i.e. minus the bounded eigenvalue.
    pub delta: Vec<Complex64>,
    pub vectors: Vec<[Complex64; 3]>,
    /// `|sigma_hat|^2` in `xi` measure, per node.
    pub mass: Vec<f64>,
}

impl Spectrum2D {
    pub fn new(
        ctx: &SpectralContext,
        eps: f64,
        x0: [f64; 2],
        bar_xi: [f64; 2],
        horizon: f64,
        quadrature: Quadrature2D,
    ) -> Result<Self, BeamError> {
        let model = *ctx
            .family
            .barotropic_model()
            .ok_or_else(|| BeamError::BadInput("the 2D spectrum needs the barotropic family".into()))?;
        ctx.check_eps(eps)?;
        if ((bar_xi[0].powi(2) + bar_xi[1].powi(2)).sqrt() - 1.0).abs() > 1e-12 {
            return Err(BeamError::BadInput("bar_xi must be a unit vector".into()));
        }
        if !(horizon > 0.0) {
            return Err(BeamError::BadInput("horizon must be positive".into()));
        }
        if quadrature.panels * quadrature.order < 64 {
            return Err(BeamError::BadInput("quadrature needs at least 64 nodes per axis".into()));
        }
        let profile = BumpProfile::standard_2d();
        let rule = CompositeRule::new(-1.0, 1.0, quadrature.panels, quadrature.order);
        let se = eps.sqrt();
        let xi1: Vec<f64> = rule.nodes.iter().map(|z| z / se + bar_xi[0] / eps).collect();
        let xi2: Vec<f64> = rule.nodes.iter().map(|z| z / se + bar_xi[1] / eps).collect();
        let n = rule.len();
        let (mut nodes, mut amplitude, mut delta, mut vectors, mut mass) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for a in 0..n {
            for b in 0..n {
                let z = [rule.nodes[a], rule.nodes[b]];
                let psi = profile.value_2d(z);
                if psi == 0.0 {
                    continue;
                }
                let xi = [xi1[a], xi2[b]];
                let n2 = xi[0] * xi[0] + xi[1] * xi[1];
                let lam = eigen2d_closed_form(&model, xi).get(BranchLabel::Hyperbolic);
                let denom = Complex64::new(0.0, model.bar_rho * n2);
                let w = rule.weights[a] * rule.weights[b] / eps;
                let env = se * psi;
                nodes.push((a, b));
                amplitude.push(w * env);
                mass.push(w * env * env);
                delta.push(-lam);
                vectors.push([Complex64::new(1.0, 0.0), lam * xi[0] / denom, lam * xi[1] / denom]);
            }
        }
        Ok(Spectrum2D { model, eps, x0, bar_xi, horizon, quadrature, xi1, xi2, nodes, amplitude, delta, vectors, mass })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn parseval_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// `|v_hat|^2 / |sigma_hat|^2` summed over both velocity components.
    fn weight(&self, j: usize, components: &[usize]) -> f64 {
        components.iter().map(|&k| self.vectors[j][k].norm_sqr()).sum()
    }

    /// Whole-plane `sum_k ||component_k(., t)||^2` by Parseval.
    pub fn parseval_norm(&self, components: &[usize], t: f64) -> f64 {
        let s = self.horizon - t;
        (0..self.len())
            .map(|j| self.mass[j] * self.weight(j, components) * (-2.0 * self.delta[j].re * s).exp())
            .sum::<f64>()
            / (4.0 * PI * PI)
    }

    /// Whole-plane `L2(0,T;L2)` norm squared by Parseval.
    pub fn parseval_spacetime(&self, components: &[usize]) -> f64 {
        let t = self.horizon;
        (0..self.len())
            .map(|j| {
                let r = 2.0 * self.delta[j].re;
                let time = if r.abs() < 1e-12 { t } else { -(-r * t).exp_m1() / r };
                self.mass[j] * self.weight(j, components) * time
            })
            .sum::<f64>()
            / (4.0 * PI * PI)
    }

    pub fn max_abs_xi(&self) -> [f64; 2] {
        let m = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        [m(&self.xi1), m(&self.xi2)]
    }

    /// Refines the rule so each axis has eight nodes per oscillation at distance `dist[i]`.
    pub fn refined_for(&self, dist: [f64; 2]) -> Result<Self, BeamError> {
        let per_axis = |d: f64| (16.0 * d / (2.0 * PI * self.eps.sqrt())).ceil() as usize;
        let need = per_axis(dist[0]).max(per_axis(dist[1]));
        let panels = need.div_ceil(self.quadrature.order);
        if panels <= self.quadrature.panels {
            return Ok(self.clone());
        }
        let ctx = SpectralContext {
            family: SymbolFamily::barotropic(self.model),
            xi0: 0.0,
            a1: f64::NAN,
            omega0: self.model.omega0_2d,
        };
        Spectrum2D::new(&ctx, self.eps, self.x0, self.bar_xi, self.horizon, Quadrature2D { panels, ..self.quadrature })
    }
}

/// Uniform grid on a rectangle, row-major in `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxGrid {
    pub x_start: [f64; 2],
    pub dx: [f64; 2],
    pub n: [usize; 2],
}

impl BoxGrid {
    pub fn new(lo: [f64; 2], hi: [f64; 2], dx_max: [f64; 2]) -> Self {
        let mut g = BoxGrid { x_start: lo, dx: [0.0; 2], n: [0; 2] };
        for i in 0..2 {
            assert!(hi[i] > lo[i] && dx_max[i] > 0.0);
            let n = ((hi[i] - lo[i]) / dx_max[i]).ceil() as usize + 1;
            g.n[i] = n;
            g.dx[i] = (hi[i] - lo[i]) / (n - 1) as f64;
        }
        g
    }

    /// Grid resolving `spec` at eight points per wavelength on each axis.
    pub fn resolving(spec: &Spectrum2D, lo: [f64; 2], hi: [f64; 2]) -> Self {
        let m = spec.max_abs_xi();
        BoxGrid::new(lo, hi, [required_dx(m[0]), required_dx(m[1])])
    }

    pub fn coord(&self, axis: usize, m: usize) -> f64 {
        self.x_start[axis] + m as f64 * self.dx[axis]
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn trapezoid_weight(&self, axis: usize, m: usize) -> f64 {
        if m == 0 || m + 1 == self.n[axis] {
            0.5 * self.dx[axis]
        } else {
            self.dx[axis]
        }
    }
}

/// Part of a sampling box: an optional rectangle, minus an optional open disc.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Region2D {
    pub rect: Option<[(f64, f64); 2]>,
    pub exclude_disc: Option<([f64; 2], f64)>,
}

impl Region2D {
    pub fn whole() -> Self {
        Region2D::default()
    }

    pub fn rect(x: (f64, f64), y: (f64, f64)) -> Self {
        Region2D { rect: Some([x, y]), exclude_disc: None }
    }

    pub fn outside_disc(center: [f64; 2], radius: f64) -> Self {
        Region2D { rect: None, exclude_disc: Some((center, radius)) }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        if let Some([(a, b), (c, d)]) = self.rect {
            if p[0] < a || p[0] > b || p[1] < c || p[1] > d {
                return false;
            }
        }
        match self.exclude_disc {
            Some((c, r)) => (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) >= r * r,
            None => true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BeamField2D {
    pub eps: f64,
    pub grid: BoxGrid,
    pub times: Vec<f64>,
    /// `values[s][k][m0 * n1 + m1]` for time `times[s]`; unrequested components are empty.
    pub values: Vec<[Vec<Complex64>; 3]>,
}

impl BeamField2D {
    /// `sum_k ||component_k(., t_s)||^2` over `region` by the trapezoid rule.
    pub fn space_norm(&self, s: usize, components: &[usize], region: &Region2D) -> f64 {
        let g = &self.grid;
        let mut sum = 0.0;
        for m0 in 0..g.n[0] {
            let (x, w0) = (g.coord(0, m0), g.trapezoid_weight(0, m0));
            for m1 in 0..g.n[1] {
                let y = g.coord(1, m1);
                if !region.contains([x, y]) {
                    continue;
                }
                let v: f64 = components.iter().map(|&k| self.values[s][k][m0 * g.n[1] + m1].norm_sqr()).sum();
                sum += w0 * g.trapezoid_weight(1, m1) * v;
            }
        }
        sum
    }

    /// `L2(0,T)` in time of `space_norm`.
    pub fn spacetime_norm(&self, components: &[usize], region: &Region2D) -> f64 {
        let y: Vec<f64> = (0..self.times.len()).map(|s| self.space_norm(s, components, region)).collect();
        self.times.windows(2).zip(y.windows(2)).map(|(t, v)| 0.5 * (v[0] + v[1]) * (t[1] - t[0])).sum()
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["x", "y", "t", "re_sigma", "im_sigma", "re_v1", "im_v1", "re_v2", "im_v2"]);
        let g = &self.grid;
        for (s, vals) in self.values.iter().enumerate() {
            for m0 in 0..g.n[0] {
                for m1 in 0..g.n[1] {
                    let mut row = vec![fmt_f64(g.coord(0, m0)), fmt_f64(g.coord(1, m1)), fmt_f64(self.times[s])];
                    for comp in vals {
                        let z = comp.get(m0 * g.n[1] + m1).copied().unwrap_or(Complex64::new(f64::NAN, f64::NAN));
                        row.push(fmt_f64(z.re));
                        row.push(fmt_f64(z.im));
                    }
                    t.push(row);
                }
            }
        }
        t
    }
}

fn phases(xi: &[f64], x0: f64, start: f64, dx: f64, n: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    (0..n)
        .map(|m| {
            let d = start + m as f64 * dx - x0;
            xi.iter().map(|k| (d * k).sin_cos()).map(|(s, c)| (c, s)).unzip()
        })
        .collect()
}

/// First stage: `G[m1][a] = sum_b c(a, b) e^{i (y_m1 - y0) xi2_b}` for one coefficient row.
#[inline(never)]
fn stage_one(na: usize, nb: usize, coef: &[(Vec<f64>, Vec<f64>)], ph2: &(Vec<f64>, Vec<f64>)) -> (Vec<f64>, Vec<f64>) {
    debug_assert_eq!(coef.len(), na);
    coef.iter()
        .map(|(cr, ci)| {
            debug_assert_eq!(cr.len(), nb);
            let z = dot(cr, ci, &ph2.0, &ph2.1);
            (z.re, z.im)
        })
        .unzip()
}

#[inline(never)]
fn stage_two(ph1: &(Vec<f64>, Vec<f64>), g: &[(Vec<f64>, Vec<f64>)]) -> Vec<Complex64> {
    g.iter().map(|(gr, gi)| dot(&ph1.0, &ph1.1, gr, gi)).collect()
}

/// Evaluates the requested components of the 2D beam on `grid` at every time.
pub fn evaluate_beam_2d(
    spec: &Spectrum2D,
    grid: &BoxGrid,
    times: &[f64],
    components: &[usize],
    exec: Execution,
) -> Result<BeamField2D, BeamError> {
    if components.iter().any(|&k| k > 2) {
        return Err(BeamError::BadInput("component index must be 0, 1 or 2".into()));
    }
    let m = spec.max_abs_xi();
    for i in 0..2 {
        if grid.n[i] > 1 && grid.dx[i] > required_dx(m[i]) * (1.0 + 1e-12) {
            return Err(BeamError::UnderResolved { dx: grid.dx[i], required: required_dx(m[i]) });
        }
    }
    let far = |i: usize| {
        let (a, b) = (grid.x_start[i], grid.coord(i, grid.n[i] - 1));
        (a - spec.x0[i]).abs().max((b - spec.x0[i]).abs())
    };
    let spec = spec.refined_for([far(0), far(1)])?;
    let (na, nb) = (spec.xi1.len(), spec.xi2.len());
    let ph1 = phases(&spec.xi1, spec.x0[0], grid.x_start[0], grid.dx[0], grid.n[0]);
    let ph2 = phases(&spec.xi2, spec.x0[1], grid.x_start[1], grid.dx[1], grid.n[1]);
    let pref = 1.0 / (4.0 * PI * PI);
    let mut values = Vec::with_capacity(times.len());
    for &t in times {
        let mut slot: [Vec<Complex64>; 3] = Default::default();
        for &k in components {
            let mut coef = vec![(vec![0.0; nb], vec![0.0; nb]); na];
            for (j, &(a, b)) in spec.nodes.iter().enumerate() {
                let c = spec.vectors[j][k] * (spec.amplitude[j] * pref) * (-spec.delta[j] * (spec.horizon - t)).exp();
                coef[a].0[b] = c.re;
                coef[a].1[b] = c.im;
            }
            let g: Vec<(Vec<f64>, Vec<f64>)> = map_indexed(exec, grid.n[1], |m1| stage_one(na, nb, &coef, &ph2[m1]));
            let rows: Vec<Vec<Complex64>> = map_indexed(exec, grid.n[0], |m0| stage_two(&ph1[m0], &g));
            slot[k] = rows.into_iter().flatten().collect();
        }
        values.push(slot);
    }
    Ok(BeamField2D { eps: spec.eps, grid: *grid, times: times.to_vec(), values })
}

#[derive(Debug, Clone)]
pub struct Scaling2DConfig {
    pub model: BarotropicModel,
    pub ladder: Vec<f64>,
    pub x0: [f64; 2],
    pub bar_xi: [f64; 2],
    pub eta: f64,
    pub horizon: f64,
    /// Sampling box for the off-centre norm.
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub nt: usize,
    pub quadrature: Quadrature2D,
    pub exec: Execution,
}

impl Scaling2DConfig {
    pub fn new(model: BarotropicModel) -> Self {
        Scaling2DConfig {
            model,
            ladder: DEFAULT_LADDER.to_vec(),
            x0: [0.3, 0.3],
            bar_xi: [1.0, 0.0],
            eta: 0.15,
            horizon: 1.0,
            lo: [0.0, 0.0],
            hi: [1.0, 1.0],
            nt: 17,
            quadrature: Quadrature2D::default(),
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scaling2DRow {
    pub eps: f64,
    /// Whole-plane `||sigma(., 0)||^2`.
    pub sigma0_norm: f64,
    /// `||sigma||^2_{L2(0,T;L2(box minus eta-disc))}`.
    pub sigma_offcenter: f64,
    /// Whole-plane `||v||^2_{L2(0,T;L2)}`.
    pub v_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scaling2DReport {
    pub rows: Vec<Scaling2DRow>,
    pub sigma_offcenter_fit: Option<PowerFit>,
    pub v_norm_fit: Option<PowerFit>,
    pub a2: f64,
}

impl Scaling2DReport {
    pub fn nonlinear(&self) -> bool {
        [self.sigma_offcenter_fit, self.v_norm_fit]
            .iter()
            .any(|f| f.is_none_or(|f| f.residual > FIT_RESIDUAL_LIMIT))
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["family", "eps", "quantity", "value", "slope_fit", "fit_residual"]);
        let fmt = |f: Option<PowerFit>| f.map_or(("NaN".to_string(), "NaN".to_string()), |f| (fmt_f64(f.slope), fmt_f64(f.residual)));
        let sig0 = power_fit(
            &self.rows.iter().map(|r| r.eps).collect::<Vec<_>>(),
            &self.rows.iter().map(|r| r.sigma0_norm).collect::<Vec<_>>(),
        );
        let cols: [(&str, fn(&Scaling2DRow) -> f64, Option<PowerFit>); 3] = [
            ("sigma0_norm", |r| r.sigma0_norm, sig0),
            ("sigma_offcenter", |r| r.sigma_offcenter, self.sigma_offcenter_fit),
            ("v_norm", |r| r.v_norm, self.v_norm_fit),
        ];
        for (name, get, fit) in cols {
            let (s, res) = fmt(fit);
            for r in &self.rows {
                t.push(vec!["Barotropic2D".into(), fmt_f64(r.eps), name.into(), fmt_f64(get(r)), s.clone(), res.clone()]);
            }
        }
        t
    }
}

pub fn scaling_study_2d(cfg: &Scaling2DConfig) -> Result<Scaling2DReport, BeamError> {
    if cfg.ladder.len() < 4 || cfg.ladder.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(BeamError::BadInput("the ladder must be strictly decreasing with at least four entries".into()));
    }
    if cfg.nt < 2 || !(cfg.eta > 0.0) {
        return Err(BeamError::BadInput("need eta > 0 and at least two time slices".into()));
    }
    let ctx = SpectralContext::new(SymbolFamily::barotropic(cfg.model))?;
    for &e in &cfg.ladder {
        ctx.check_eps(e)?;
    }
    let times = time_grid(cfg.horizon, cfg.nt);
    let off = Region2D::outside_disc(cfg.x0, cfg.eta);
    let rows = map_slice(cfg.exec, &cfg.ladder, |&eps| {
        let spec = Spectrum2D::new(&ctx, eps, cfg.x0, cfg.bar_xi, cfg.horizon, cfg.quadrature)?;
        let grid = BoxGrid::resolving(&spec, cfg.lo, cfg.hi);
        let field = evaluate_beam_2d(&spec, &grid, &times, &[0], cfg.exec)?;
        Ok(Scaling2DRow {
            eps,
            sigma0_norm: spec.parseval_norm(&[0], 0.0),
            sigma_offcenter: field.spacetime_norm(&[0], &off),
            v_norm: spec.parseval_spacetime(&[1, 2]),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>, BeamError>>()?;
    let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let col = |f: fn(&Scaling2DRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    Ok(Scaling2DReport {
        sigma_offcenter_fit: power_fit(&eps, &col(|r| r.sigma_offcenter)),
        v_norm_fit: power_fit(&eps, &col(|r| r.v_norm)),
        rows,
        a2: ctx.a1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(eps: f64) -> Spectrum2D {
        let ctx = SpectralContext::new(SymbolFamily::barotropic(BarotropicModel::unit())).unwrap();
        Spectrum2D::new(&ctx, eps, [0.3, 0.3], [1.0, 0.0], 1.0, Quadrature2D::default()).unwrap()
    }

    #[test]
    fn unit_parseval_mass() {
        for eps in [1e-2, 1e-3] {
            assert!((spec(eps).parseval_mass() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn separable_sum_matches_direct_sum() {
        let s = spec(2e-2);
        let grid = BoxGrid::resolving(&s, [0.1, 0.1], [0.5, 0.6]);
        let f = evaluate_beam_2d(&s, &grid, &[0.25], &[0, 2], Execution::Sequential).unwrap();
        for (m0, m1) in [(0, 0), (7, 3), (grid.n[0] - 1, grid.n[1] - 1)] {
            let p = [grid.coord(0, m0), grid.coord(1, m1)];
            let direct: Complex64 = s
                .nodes
                .iter()
                .enumerate()
                .map(|(j, &(a, b))| {
                    let ph = (p[0] - s.x0[0]) * s.xi1[a] + (p[1] - s.x0[1]) * s.xi2[b];
                    s.vectors[j][2] * s.amplitude[j] * Complex64::from_polar(1.0, ph) * (-s.delta[j] * 0.75).exp()
                })
                .sum::<Complex64>()
                / (4.0 * PI * PI);
            let got = f.values[0][2][m0 * grid.n[1] + m1];
            assert!((direct - got).norm() < 1e-12 * (1.0 + direct.norm()), "{m0} {m1}");
        }
        assert!(f.values[0][1].is_empty());
    }
}
