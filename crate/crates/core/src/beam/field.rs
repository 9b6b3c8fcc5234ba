use num_complex::Complex64;

use super::spectrum::TerminalSpectrum;
use super::BeamError;
use crate::exec::{map_indexed, Execution};
use crate::io::{fmt_f64, CsvTable};
use crate::spectral::FamilyTag;

/// Points per chunk. Each chunk reseeds the phase recurrence, so results do
/// not depend on how chunks are scheduled.
const CHUNK: usize = 256;

/// A uniform spatial grid `x_start + m dx`, `m < n`, at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slice {
    pub t: f64,
    pub x_start: f64,
    pub dx: f64,
    pub n: usize,
}

impl Slice {
    pub fn x(&self, m: usize) -> f64 {
        self.x_start + m as f64 * self.dx
    }

    pub fn x_end(&self) -> f64 {
        self.x(self.n.saturating_sub(1))
    }

    pub fn point(t: f64, x: f64) -> Self {
        Slice { t, x_start: x, dx: 0.0, n: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SamplingSet {
    pub slices: Vec<Slice>,
}

/// `n` equally spaced times on `[0, horizon]`.
pub fn time_grid(horizon: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n).map(|i| horizon * i as f64 / (n - 1) as f64).collect()
}

impl SamplingSet {
    /// The interval `[a, b]` with spacing at most `dx_max`, at every time.
    pub fn uniform(a: f64, b: f64, dx_max: f64, times: &[f64]) -> Self {
        let mut s = SamplingSet::default();
        s.add_interval(a, b, dx_max, times);
        s
    }

    pub fn add_interval(&mut self, a: f64, b: f64, dx_max: f64, times: &[f64]) {
        assert!(b >= a && dx_max > 0.0);
        let n = (((b - a) / dx_max).ceil() as usize).max(1) + 1;
        let dx = (b - a) / (n - 1) as f64;
        for &t in times {
            self.slices.push(Slice { t, x_start: a, dx, n });
        }
    }

    /// A single point at each time.
    pub fn trace(x: f64, times: &[f64]) -> Self {
        SamplingSet { slices: times.iter().map(|&t| Slice::point(t, x)).collect() }
    }

    /// Farthest sample from `x0`.
    pub fn max_distance(&self, x0: f64) -> f64 {
        self.slices
            .iter()
            .map(|s| (s.x_start - x0).abs().max((s.x_end() - x0).abs()))
            .fold(0.0, f64::max)
    }
}

/// Extra factor applied to every mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modifier {
    Plain,
    /// `i xi`, giving the x-derivative.
    SpaceDerivative,
    /// `delta(xi)`, giving the t-derivative.
    TimeDerivative,
}

#[derive(Debug, Clone)]
pub struct BeamField {
    pub family: FamilyTag,
    pub eps: f64,
    pub x0: f64,
    pub horizon: f64,
    pub modifier: Modifier,
    /// Largest wave number in the spectrum, for resolution checks.
    pub max_xi: f64,
    pub slices: Vec<Slice>,
    /// `values[s][k][m]`: component `k` at point `m` of slice `s`. Components
    /// that were not requested are empty.
    pub values: Vec<[Vec<Complex64>; 3]>,
}

impl BeamField {
    /// Dump in the layout `x, t, re_sigma, im_sigma, re_v, im_v, re_phi, im_phi`.
    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["x", "t", "re_sigma", "im_sigma", "re_v", "im_v", "re_phi", "im_phi"]);
        for (s, vals) in self.slices.iter().zip(&self.values) {
            for m in 0..s.n {
                let mut row = vec![fmt_f64(s.x(m)), fmt_f64(s.t)];
                for comp in vals {
                    let z = comp.get(m).copied().unwrap_or(Complex64::new(f64::NAN, f64::NAN));
                    row.push(fmt_f64(z.re));
                    row.push(fmt_f64(z.im));
                }
                t.push(row);
            }
        }
        t
    }
}

/// Coefficients of one output row, split into real and imaginary parts.
struct Row {
    re: Vec<f64>,
    im: Vec<f64>,
}

/// `sum_j (re_j + i im_j) e^{i (x_m - x0) xi_j}` for every row and grid point.
fn kernel(xi: &[f64], x0: f64, x_start: f64, dx: f64, n: usize, rows: &[Row], exec: Execution) -> Vec<Vec<Complex64>> {
    let chunks = n.div_ceil(CHUNK);
    let step: Vec<(f64, f64)> = xi.iter().map(|&k| (dx * k).sin_cos()).collect();
    let parts = map_indexed(exec, chunks, |c| {
        let m0 = c * CHUNK;
        chunk(xi, &step, x_start + m0 as f64 * dx - x0, (m0 + CHUNK).min(n) - m0, rows)
    });
    let mut res = vec![Vec::with_capacity(n); rows.len()];
    for part in parts {
        for (r, p) in res.iter_mut().zip(part) {
            r.extend(p);
        }
    }
    res
}

/// `count` consecutive outputs starting at offset `xs` from the centre. Kept
/// out of line so both execution modes run identical code and agree bitwise.
#[inline(never)]
fn chunk(xi: &[f64], step: &[(f64, f64)], xs: f64, count: usize, rows: &[Row]) -> Vec<Vec<Complex64>> {
    let nj = xi.len();
    let mut e_re = vec![0.0; nj];
    let mut e_im = vec![0.0; nj];
    for j in 0..nj {
        let (s, co) = (xs * xi[j]).sin_cos();
        e_re[j] = co;
        e_im[j] = s;
    }
    let mut out = vec![Vec::with_capacity(count); rows.len()];
    for m in 0..count {
        if m > 0 {
            for j in 0..nj {
                let (s, co) = step[j];
                let (a, b) = (e_re[j], e_im[j]);
                e_re[j] = a * co - b * s;
                e_im[j] = a * s + b * co;
            }
        }
        for (r, o) in rows.iter().zip(out.iter_mut()) {
            o.push(dot(&r.re, &r.im, &e_re, &e_im));
        }
    }
    out
}

/// Complex dot product with four independent accumulators.
pub(super) fn dot(br: &[f64], bi: &[f64], er: &[f64], ei: &[f64]) -> Complex64 {
    let mut re = [0.0; 4];
    let mut im = [0.0; 4];
    let n4 = br.len() / 4 * 4;
    for j in (0..n4).step_by(4) {
        for l in 0..4 {
            let (a, b, c, d) = (br[j + l], bi[j + l], er[j + l], ei[j + l]);
            re[l] += a * c - b * d;
            im[l] += a * d + b * c;
        }
    }
    for j in n4..br.len() {
        re[0] += br[j] * er[j] - bi[j] * ei[j];
        im[0] += br[j] * ei[j] + bi[j] * er[j];
    }
    Complex64::new((re[0] + re[1]) + (re[2] + re[3]), (im[0] + im[1]) + (im[2] + im[3]))
}

fn row_for(spec: &TerminalSpectrum, t: f64, k: usize, modifier: Modifier) -> Row {
    let nj = spec.len();
    let mut re = Vec::with_capacity(nj);
    let mut im = Vec::with_capacity(nj);
    let pref = 1.0 / (2.0 * std::f64::consts::PI);
    for j in 0..nj {
        let d = spec.delta[j];
        let mut c = spec.vectors[j][k] * (spec.xi_weight(j) * spec.envelope[j] * pref) * (-d * (spec.horizon - t)).exp();
        c *= match modifier {
            Modifier::Plain => Complex64::new(1.0, 0.0),
            Modifier::SpaceDerivative => Complex64::new(0.0, spec.xi[j]),
            Modifier::TimeDerivative => d,
        };
        re.push(c.re);
        im.push(c.im);
    }
    Row { re, im }
}

/// Evaluates the requested components on every slice by quadrature. The rule
/// is refined first so the farthest sample is resolved.
pub fn evaluate_beam_with(
    spec: &TerminalSpectrum,
    set: &SamplingSet,
    components: &[usize],
    modifier: Modifier,
    exec: Execution,
) -> Result<BeamField, BeamError> {
    if components.iter().any(|&k| k > 2) {
        return Err(BeamError::BadInput("component index must be 0, 1 or 2".into()));
    }
    let spec = spec.refined_for(set.max_distance(spec.x0))?;
    let mut values: Vec<[Vec<Complex64>; 3]> = vec![Default::default(); set.slices.len()];
    // Slices sharing a grid share the phase recurrence.
    let mut done = vec![false; set.slices.len()];
    for s in 0..set.slices.len() {
        if done[s] {
            continue;
        }
        let g = set.slices[s];
        let group: Vec<usize> = (s..set.slices.len())
            .filter(|&i| {
                let h = set.slices[i];
                !done[i] && h.x_start.to_bits() == g.x_start.to_bits() && h.dx.to_bits() == g.dx.to_bits() && h.n == g.n
            })
            .collect();
        let mut rows = Vec::new();
        for &i in &group {
            for &k in components {
                rows.push(row_for(&spec, set.slices[i].t, k, modifier));
            }
        }
        let mut out = kernel(&spec.xi, spec.x0, g.x_start, g.dx, g.n, &rows, exec).into_iter();
        for &i in &group {
            for &k in components {
                values[i][k] = out.next().expect("one output per row");
            }
            done[i] = true;
        }
    }
    Ok(BeamField {
        family: spec.family.tag(),
        eps: spec.eps,
        x0: spec.x0,
        horizon: spec.horizon,
        modifier,
        max_xi: spec.max_xi(),
        slices: set.slices.clone(),
        values,
    })
}

pub fn evaluate_beam(spec: &TerminalSpectrum, set: &SamplingSet) -> Result<BeamField, BeamError> {
    evaluate_beam_with(spec, set, &[0, 1, 2], Modifier::Plain, Execution::default())
}

pub fn beam_spatial_derivative(spec: &TerminalSpectrum, set: &SamplingSet) -> Result<BeamField, BeamError> {
    evaluate_beam_with(spec, set, &[0, 1, 2], Modifier::SpaceDerivative, Execution::default())
}

/// Moves every slice to the static-frame points `x + bar_v (T - t)`.
pub fn shift_to_static(set: &SamplingSet, bar_v: f64, horizon: f64) -> SamplingSet {
    SamplingSet {
        slices: set
            .slices
            .iter()
            .map(|s| Slice { x_start: s.x_start + bar_v * (horizon - s.t), ..*s })
            .collect(),
    }
}

/// Beam of the transported adjoint: the static beam read at `x + bar_v (T - t)`,
/// so mass sits at `x(t) = x0 - bar_v (T - t)`. Slice positions in the result
/// are those of `set`.
pub fn moving_frame_evaluate_with(
    spec: &TerminalSpectrum,
    bar_v: f64,
    set: &SamplingSet,
    components: &[usize],
    modifier: Modifier,
    exec: Execution,
) -> Result<BeamField, BeamError> {
    if spec.family.tag() != FamilyTag::NonBarotropic1D {
        return Err(BeamError::BadInput("the moving frame applies to the non-barotropic 1D family".into()));
    }
    let shifted = shift_to_static(set, bar_v, spec.horizon);
    let mut f = evaluate_beam_with(spec, &shifted, components, modifier, exec)?;
    f.slices = set.slices.clone();
    Ok(f)
}

pub fn moving_frame_evaluate(spec: &TerminalSpectrum, bar_v: f64, set: &SamplingSet) -> Result<BeamField, BeamError> {
    moving_frame_evaluate_with(spec, bar_v, set, &[0, 1, 2], Modifier::Plain, Execution::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::{BumpProfile, QuadratureSpec, SpectralContext};
    use crate::params::FluidModel;
    use crate::spectral::SymbolFamily;

    fn spec(eps: f64) -> TerminalSpectrum {
        let ctx = SpectralContext::new(SymbolFamily::NonBarotropic1D(FluidModel::p_star())).unwrap();
        TerminalSpectrum::new(&ctx, eps, 0.3, 1.0, BumpProfile::standard_1d(), QuadratureSpec::default()).unwrap()
    }

    #[test]
    fn kernel_matches_direct_sum() {
        let s = spec(1e-2);
        let set = SamplingSet::uniform(-0.5, 1.0, 0.01, &[0.4]);
        let f = evaluate_beam(&s, &set).unwrap();
        let sl = f.slices[0];
        for m in [0, 37, 150] {
            let x = sl.x(m);
            let direct: Complex64 = (0..s.len())
                .map(|j| {
                    s.xi_weight(j) * s.sigma_hat(j) * Complex64::from_polar(1.0, x * s.xi[j])
                        * (-s.delta[j] * 0.6).exp()
                })
                .sum::<Complex64>()
                / (2.0 * std::f64::consts::PI);
            assert!((direct - f.values[0][0][m]).norm() < 1e-12, "m={m}");
        }
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let s = spec(5e-3);
        let set = SamplingSet::uniform(-1.0, 1.5, 1e-3, &[0.0, 0.5]);
        let a = evaluate_beam_with(&s, &set, &[0, 2], Modifier::Plain, Execution::Sequential).unwrap();
        let b = evaluate_beam_with(&s, &set, &[0, 2], Modifier::Plain, Execution::Parallel).unwrap();
        assert_eq!(a.values, b.values);
        assert!(a.values[0][1].is_empty());
    }
}
