use num_complex::Complex64;
use serde::Serialize;

use super::field::{evaluate_beam_with, time_grid, BeamField, Modifier, SamplingSet, Slice};
use super::spectrum::TerminalSpectrum;
use super::BeamError;
use crate::exec::Execution;
use crate::spectral::FamilyTag;

/// A union of disjoint closed intervals, or the whole sampled set.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Whole,
    Intervals(Vec<(f64, f64)>),
}

impl Region {
    pub fn interval(a: f64, b: f64) -> Self {
        Region::Intervals(vec![(a, b)])
    }

    /// `eta <= |x - x0| <= width`.
    pub fn off_center(x0: f64, eta: f64, width: f64) -> Self {
        Region::Intervals(vec![(x0 - width, x0 - eta), (x0 + eta, x0 + width)])
    }

    pub fn empty() -> Self {
        Region::Intervals(Vec::new())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NormKind {
    /// Spatial `L2` norm squared at the first slice time in the window.
    L2Space,
    /// `L2(t0, t1; L2)` norm squared, trapezoid in time.
    L2SpaceTime,
    /// `H1(t0, t1)` norm squared of a point trace, with centred differences in time.
    H1TimeTrace,
}

/// Exact integral over `[a, b]` of the piecewise-linear interpolant of `g` on the slice grid.
fn integrate_linear(s: &Slice, g: &[f64], a: f64, b: f64) -> f64 {
    if s.n < 2 {
        return 0.0;
    }
    let (lo, hi) = (a.max(s.x_start), b.min(s.x_end()));
    if hi <= lo {
        return 0.0;
    }
    let value_at = |x: f64| {
        let u = ((x - s.x_start) / s.dx).clamp(0.0, (s.n - 1) as f64);
        let m = (u.floor() as usize).min(s.n - 2);
        let f = u - m as f64;
        (g[m] * (1.0 - f) + g[m + 1] * f, m)
    };
    let (glo, mlo) = value_at(lo);
    let (ghi, mhi) = value_at(hi);
    if mlo == mhi {
        return 0.5 * (glo + ghi) * (hi - lo);
    }
    let mut sum = 0.5 * (glo + g[mlo + 1]) * (s.x(mlo + 1) - lo);
    for m in (mlo + 1)..mhi {
        sum += 0.5 * (g[m] + g[m + 1]) * s.dx;
    }
    sum + 0.5 * (g[mhi] + ghi) * (hi - s.x(mhi))
}

fn space_integral(s: &Slice, vals: &[Complex64], region: &Region) -> f64 {
    let g: Vec<f64> = vals.iter().map(|z| z.norm_sqr()).collect();
    match region {
        Region::Whole => integrate_linear(s, &g, f64::NEG_INFINITY, f64::INFINITY),
        Region::Intervals(iv) => iv.iter().map(|&(a, b)| integrate_linear(s, &g, a, b)).sum(),
    }
}

/// Distinct slice times in order, each with the indices of its slices.
fn by_time(field: &BeamField, t0: f64, t1: f64) -> Vec<(f64, Vec<usize>)> {
    let mut out: Vec<(f64, Vec<usize>)> = Vec::new();
    for (i, s) in field.slices.iter().enumerate() {
        if s.t < t0 || s.t > t1 {
            continue;
        }
        match out.iter_mut().find(|(t, _)| *t == s.t) {
            Some((_, v)) => v.push(i),
            None => out.push((s.t, vec![i])),
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

fn trapezoid(ts: &[f64], ys: &[f64]) -> f64 {
    ts.windows(2).zip(ys.windows(2)).map(|(t, y)| 0.5 * (y[0] + y[1]) * (t[1] - t[0])).sum()
}

/// Spacing needed for eight samples per wavelength at wave number `max_xi`.
pub fn required_dx(max_xi: f64) -> f64 {
    2.0 * std::f64::consts::PI / (8.0 * max_xi)
}

fn check_resolution(field: &BeamField) -> Result<(), BeamError> {
    let need = required_dx(field.max_xi);
    match field.slices.iter().find(|s| s.n > 1 && s.dx > need * (1.0 + 1e-12)) {
        Some(s) => Err(BeamError::UnderResolved { dx: s.dx, required: need }),
        None => Ok(()),
    }
}

pub fn window_norm(
    field: &BeamField,
    component: usize,
    region: &Region,
    window: (f64, f64),
    kind: NormKind,
) -> Result<f64, BeamError> {
    if field.values.iter().any(|v| v[component].is_empty()) {
        return Err(BeamError::BadInput(format!("component {component} was not evaluated")));
    }
    let groups = by_time(field, window.0, window.1);
    if groups.is_empty() {
        return Ok(0.0);
    }
    match kind {
        NormKind::L2Space | NormKind::L2SpaceTime => {
            check_resolution(field)?;
            let per_time: Vec<f64> = groups
                .iter()
                .map(|(_, idx)| {
                    idx.iter()
                        .map(|&i| space_integral(&field.slices[i], &field.values[i][component], region))
                        .sum()
                })
                .collect();
            if kind == NormKind::L2Space {
                return Ok(per_time[0]);
            }
            let ts: Vec<f64> = groups.iter().map(|g| g.0).collect();
            Ok(trapezoid(&ts, &per_time))
        }
        NormKind::H1TimeTrace => {
            let ts: Vec<f64> = groups.iter().map(|g| g.0).collect();
            let f: Vec<Complex64> = groups.iter().map(|(_, idx)| field.values[idx[0]][component][0]).collect();
            let n = f.len();
            if n < 3 {
                return Err(BeamError::BadInput("a trace needs at least three times".into()));
            }
            let df: Vec<Complex64> = (0..n)
                .map(|i| {
                    let (a, b) = if i == 0 { (0, 1) } else if i == n - 1 { (n - 2, n - 1) } else { (i - 1, i + 1) };
                    (f[b] - f[a]) / (ts[b] - ts[a])
                })
                .collect();
            let y: Vec<f64> = f.iter().zip(&df).map(|(a, b)| a.norm_sqr() + b.norm_sqr()).collect();
            Ok(trapezoid(&ts, &y))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceNorms {
    pub x_eval: f64,
    pub times: Vec<f64>,
    #[serde(skip)]
    pub v: Vec<Complex64>,
    #[serde(skip)]
    pub phi: Vec<Complex64>,
    #[serde(skip)]
    pub v_t: Vec<Complex64>,
    #[serde(skip)]
    pub phi_t: Vec<Complex64>,
    /// `||v(x_eval, .)||^2_{H1(0,T)}`
    pub v_h1_sq: f64,
    pub phi_h1_sq: f64,
}

/// Traces of `v` and `phi` at `x_eval` with spectral time derivatives.
pub fn trace_norms(spec: &TerminalSpectrum, x_eval: f64, nt: usize, exec: Execution) -> Result<TraceNorms, BeamError> {
    if spec.family.tag() != FamilyTag::NonBarotropic1D {
        return Err(BeamError::BadInput("trace norms are defined for the non-barotropic 1D family".into()));
    }
    let times = time_grid(spec.horizon, nt);
    let set = SamplingSet::trace(x_eval, &times);
    let plain = evaluate_beam_with(spec, &set, &[1, 2], Modifier::Plain, exec)?;
    let dt = evaluate_beam_with(spec, &set, &[1, 2], Modifier::TimeDerivative, exec)?;
    let col = |f: &BeamField, k: usize| f.values.iter().map(|v| v[k][0]).collect::<Vec<_>>();
    let (v, phi, v_t, phi_t) = (col(&plain, 1), col(&plain, 2), col(&dt, 1), col(&dt, 2));
    let h1 = |a: &[Complex64], b: &[Complex64]| {
        let y: Vec<f64> = a.iter().zip(b).map(|(p, q)| p.norm_sqr() + q.norm_sqr()).collect();
        trapezoid(&times, &y)
    };
    Ok(TraceNorms {
        x_eval,
        v_h1_sq: h1(&v, &v_t),
        phi_h1_sq: h1(&phi, &phi_t),
        times: times.clone(),
        v,
        phi,
        v_t,
        phi_t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_integral_is_exact_for_linear_data() {
        let s = Slice { t: 0.0, x_start: 0.0, dx: 0.1, n: 11 };
        let g: Vec<f64> = (0..11).map(|m| 2.0 * s.x(m) + 1.0).collect();
        let exact = |a: f64, b: f64| (b * b + b) - (a * a + a);
        for (a, b) in [(0.0f64, 1.0f64), (0.13, 0.87), (0.31, 0.33), (-1.0, 0.5), (0.95, 3.0)] {
            let want = exact(a.max(0.0), b.min(1.0));
            assert!((integrate_linear(&s, &g, a, b) - want).abs() < 1e-13, "{a} {b}");
        }
        assert_eq!(integrate_linear(&s, &g, 2.0, 3.0), 0.0);
    }
}
