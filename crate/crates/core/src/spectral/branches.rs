use num_complex::Complex64;
use serde::Serialize;

use super::cubic::{CubicCoefficients, PERMUTATIONS};
use super::eigen::{eigen2d_closed_form, eigenvalues};
use super::{characteristic_coefficients, SpectralError, SymbolFamily};
use crate::io::{fmt_f64, CsvTable};
use crate::params::BarotropicModel;

pub const DEFAULT_A1_MARGIN: f64 = 0.01;

/// Deepest bisection used when a tracking step moves too far.
const MAX_REFINE_DEPTH: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BranchLabel {
    /// Grows like `nu0 xi^2` (shear viscosity `mu0 |xi|^2` in 2D).
    #[serde(rename = "parabolic-nu")]
    ParabolicNu,
    /// Grows like `k0 xi^2` (`(mu0 + gamma0)|xi|^2` in 2D).
    #[serde(rename = "parabolic-k")]
    ParabolicK,
    #[serde(rename = "hyperbolic")]
    Hyperbolic,
}

impl BranchLabel {
    pub const ALL: [BranchLabel; 3] = [BranchLabel::ParabolicNu, BranchLabel::ParabolicK, BranchLabel::Hyperbolic];

    pub fn as_str(&self) -> &'static str {
        match self {
            BranchLabel::ParabolicNu => "parabolic-nu",
            BranchLabel::ParabolicK => "parabolic-k",
            BranchLabel::Hyperbolic => "hyperbolic",
        }
    }
}

/// Continuity-tracked eigenvalue branches. Column `k` of `values` always holds
/// branch `BranchLabel::ALL[k]`.
#[derive(Debug, Clone)]
pub struct BranchTable {
    pub family: SymbolFamily,
    pub xi: Vec<f64>,
    pub values: Vec<[Complex64; 3]>,
    pub coeffs: Vec<CubicCoefficients>,
    /// `values[i][k] == roots(xi[i])[permutations[i][k]]`, roots in closed-form order.
    pub permutations: Vec<[usize; 3]>,
    /// Grid intervals (their outer end) where the step had to be refined.
    pub refined_at: Vec<f64>,
    /// Smallest grid `|xi|` beyond which the roots are in the large-`|xi|` regime.
    pub xi0: Option<f64>,
}

impl BranchTable {
    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    pub fn branch(&self, label: BranchLabel) -> impl Iterator<Item = Complex64> + '_ {
        let k = BranchLabel::ALL.iter().position(|l| *l == label).expect("label");
        self.values.iter().map(move |v| v[k])
    }

    /// Decay rate `delta(xi_i)`, the negated hyperbolic eigenvalue.
    pub fn delta(&self, i: usize) -> Complex64 {
        -self.values[i][2]
    }

    pub fn to_csv(&self) -> CsvTable {
        let labels = BranchLabel::ALL.map(|l| l.as_str()).join(";");
        let mut t = CsvTable::new(&[
            "xi", "re_l1", "im_l1", "re_l2", "im_l2", "re_l3", "im_l3", "branch_labels", "D", "D0",
        ]);
        for ((xi, v), k) in self.xi.iter().zip(&self.values).zip(&self.coeffs) {
            t.push(vec![
                fmt_f64(*xi),
                fmt_f64(v[0].re),
                fmt_f64(v[0].im),
                fmt_f64(v[1].re),
                fmt_f64(v[1].im),
                fmt_f64(v[2].re),
                fmt_f64(v[2].im),
                labels.clone(),
                fmt_f64(k.d),
                fmt_f64(k.d0),
            ]);
        }
        t
    }
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

fn min_gap(v: &[Complex64; 3]) -> f64 {
    (v[0] - v[1]).norm().min((v[0] - v[2]).norm()).min((v[1] - v[2]).norm())
}

fn apply(perm: &[usize; 3], roots: &[Complex64; 3]) -> [Complex64; 3] {
    [roots[perm[0]], roots[perm[1]], roots[perm[2]]]
}

fn same_values(x: &[Complex64; 3], y: &[Complex64; 3], tol: f64) -> bool {
    (0..3).all(|k| (x[k] - y[k]).norm() <= tol)
}

fn conjugate_swap(x: &[Complex64; 3], y: &[Complex64; 3], tol: f64) -> bool {
    (0..3).all(|k| (x[k] - y[k]).norm() <= tol || (x[k] - y[k].conj()).norm() <= tol)
}

/// Best permutation of `roots` against `pred`. Near-ties between assignments
/// that only swap a conjugate pair are broken by giving the non-negative
/// imaginary part to the hyperbolic branch, then to the `k` branch.
fn best_permutation(pred: &[Complex64; 3], roots: &[Complex64; 3]) -> [usize; 3] {
    let cost = |p: &[usize; 3]| (0..3).map(|k| (pred[k] - roots[p[k]]).norm_sqr()).sum::<f64>();
    let mut scored: Vec<(f64, [usize; 3])> = PERMUTATIONS.iter().map(|p| (cost(p), *p)).collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let best = scored[0];
    let scale = pred.iter().chain(roots.iter()).map(|z| z.norm_sqr()).fold(1e-300, f64::max);
    let tol = 1e-10 * scale + 1e-9 * best.0;
    let tied: Vec<[usize; 3]> = scored
        .iter()
        .filter(|(c, _)| *c <= best.0 + tol)
        .map(|(_, p)| *p)
        .collect();
    if tied.len() == 1 {
        return best.1;
    }
    let key = |p: &[usize; 3]| {
        let v = apply(p, roots);
        (v[2].im >= 0.0, v[1].im >= 0.0)
    };
    *tied.iter().max_by_key(|p| key(p)).expect("non-empty")
}

fn predict(prev: &[Complex64; 3], prev2: Option<(&[Complex64; 3], f64)>, x_prev: f64, x: f64) -> [Complex64; 3] {
    match prev2 {
        Some((p2, x2)) if x_prev != x2 => {
            let t = (x - x_prev) / (x_prev - x2);
            [0, 1, 2].map(|k| prev[k] + (prev[k] - p2[k]) * t)
        }
        _ => *prev,
    }
}

struct StepResult {
    values: [Complex64; 3],
    smooth: bool,
}

/// Walks from `x_prev` to `x` in `2^depth` equal substeps.
fn substep_track(
    family: &SymbolFamily,
    prev: [Complex64; 3],
    prev2: Option<([Complex64; 3], f64)>,
    x_prev: f64,
    x: f64,
    depth: u32,
) -> StepResult {
    let n = 1usize << depth;
    let mut cur = prev;
    let mut cur_x = x_prev;
    let mut back = prev2;
    let mut smooth = true;
    for j in 1..=n {
        let xj = if j == n { x } else { x_prev + (x - x_prev) * j as f64 / n as f64 };
        let roots = eigenvalues(family, xj);
        let pred = predict(&cur, back.as_ref().map(|(v, xx)| (v, *xx)), cur_x, xj);
        let next = apply(&best_permutation(&pred, &roots), &roots);
        let gap = min_gap(&cur);
        if (0..3).any(|k| (next[k] - cur[k]).norm() >= gap) {
            smooth = false;
        }
        back = Some((cur, cur_x));
        cur = next;
        cur_x = xj;
    }
    StepResult { values: cur, smooth }
}

/// Labels the triple at the largest `|xi|` of a half-axis: bounded branch by
/// smallest modulus, parabolic branches by their scaled value `-root / xi^2`.
fn label_far_end(family: &SymbolFamily, xi: f64, roots: &[Complex64; 3]) -> [usize; 3] {
    if xi == 0.0 {
        return [0, 1, 2];
    }
    let h = (0..3)
        .min_by(|&i, &j| roots[i].norm().total_cmp(&roots[j].norm()))
        .expect("three roots");
    let rest: Vec<usize> = (0..3).filter(|&i| i != h).collect();
    let [dn, dk] = family.diffusivities();
    let x2 = xi * xi;
    let score = |nu: usize, k: usize| {
        (-roots[nu] / x2 - dn).norm() + (-roots[k] / x2 - dk).norm()
    };
    let (a, b) = (rest[0], rest[1]);
    let (sa, sb) = (score(a, b), score(b, a));
    let pick_ab = if (sa - sb).abs() <= 1e-12 * (sa + sb).max(1e-300) {
        roots[a].im >= roots[b].im
    } else {
        sa < sb
    };
    if pick_ab {
        [a, b, h]
    } else {
        [b, a, h]
    }
}

fn track_half(
    family: &SymbolFamily,
    xs: &[f64],
    roots: &[[Complex64; 3]],
) -> Result<(Vec<[Complex64; 3]>, Vec<f64>), SpectralError> {
    let n = xs.len();
    let mut values = vec![[Complex64::new(0.0, 0.0); 3]; n];
    let mut refined = Vec::new();
    if n == 0 {
        return Ok((values, refined));
    }
    let far = n - 1;
    values[far] = apply(&label_far_end(family, xs[far], &roots[far]), &roots[far]);
    for i in (0..far).rev() {
        let prev = values[i + 1];
        let prev2 = (i + 2 < n).then(|| (values[i + 2], xs[i + 2]));
        let direct = substep_track(family, prev, prev2, xs[i + 1], xs[i], 0);
        if direct.smooth {
            values[i] = direct.values;
            continue;
        }
        refined.push(xs[i + 1]);
        let scale = prev.iter().chain(roots[i].iter()).map(|z| z.norm()).fold(1e-300, f64::max);
        let tol = 1e-9 * scale;
        let mut last = direct.values;
        let mut accepted = None;
        for depth in 1..=MAX_REFINE_DEPTH {
            let step = substep_track(family, prev, prev2, xs[i + 1], xs[i], depth);
            if step.smooth {
                accepted = Some(step.values);
                break;
            }
            if depth == MAX_REFINE_DEPTH {
                if same_values(&step.values, &last, tol) || conjugate_swap(&step.values, &last, tol) {
                    accepted = Some(step.values);
                } else {
                    return Err(SpectralError::Ambiguous { xi: xs[i] });
                }
            }
            last = step.values;
        }
        let v = accepted.expect("set by loop");
        // Snap to the exact roots at the grid point.
        let snapped = apply(&best_permutation(&v, &roots[i]), &roots[i]);
        values[i] = snapped;
    }
    Ok((values, refined))
}

fn perm_of(values: &[Complex64; 3], roots: &[Complex64; 3]) -> [usize; 3] {
    let mut best = ([0, 1, 2], f64::INFINITY);
    for p in PERMUTATIONS {
        let c: f64 = (0..3).map(|k| (values[k] - roots[p[k]]).norm()).sum();
        if c < best.1 {
            best = (p, c);
        }
    }
    best.0
}

fn regime_holds(family: &SymbolFamily, k: &CubicCoefficients, roots: &[Complex64; 3], hyp: Complex64) -> bool {
    let [dn, dk] = family.diffusivities();
    let sign_ok = match family {
        SymbolFamily::Barotropic2D { .. } => k.d > 0.0,
        _ if dn != dk => k.d > 0.0,
        _ => k.d < 0.0,
    };
    let smallest = roots.iter().all(|r| hyp.norm() <= r.norm() * (1.0 + 1e-12));
    sign_ok && smallest
}

/// Tracks the three branches over a sorted grid.
///
/// Each half-axis is processed from its largest `|xi|` inwards, so labels are
/// fixed where the asymptotics make them unambiguous.
pub fn eigen_branches(family: &SymbolFamily, xi_grid: &[f64]) -> Result<BranchTable, SpectralError> {
    if xi_grid.iter().any(|x| !x.is_finite()) || xi_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(SpectralError::BadGrid);
    }
    let coeffs: Vec<CubicCoefficients> =
        xi_grid.iter().map(|&s| characteristic_coefficients(family, s)).collect();
    let roots: Vec<[Complex64; 3]> = xi_grid.iter().map(|&s| eigenvalues(family, s)).collect();
    let n = xi_grid.len();
    let mut values = vec![[Complex64::new(0.0, 0.0); 3]; n];
    let mut refined_at = Vec::new();

    let neg: Vec<usize> = (0..n).filter(|&i| xi_grid[i] < 0.0).rev().collect();
    let pos: Vec<usize> = (0..n).filter(|&i| xi_grid[i] > 0.0).collect();
    if let SymbolFamily::Barotropic2D { model, .. } = family {
        // The closed form labels every point, including the triple root where
        // tracking by continuation is ill-posed.
        for i in 0..n {
            let closed = eigen2d_closed_form(model, family.wave_vector(xi_grid[i])).values;
            values[i] = apply(&best_permutation(&closed, &roots[i]), &roots[i]);
        }
    }
    let tracked = if family.barotropic_model().is_some() { Vec::new() } else { vec![neg, pos] };
    for half in tracked {
        let xs: Vec<f64> = half.iter().map(|&i| xi_grid[i]).collect();
        let rs: Vec<[Complex64; 3]> = half.iter().map(|&i| roots[i]).collect();
        let (v, r) = track_half(family, &xs, &rs)?;
        for (j, &i) in half.iter().enumerate() {
            values[i] = v[j];
        }
        refined_at.extend(r);
    }
    for i in 0..n {
        if xi_grid[i] == 0.0 {
            values[i] = roots[i];
        }
    }
    let permutations = (0..n).map(|i| perm_of(&values[i], &roots[i])).collect();

    // Regime threshold, scanning |xi| downwards over the positive half-axis
    // (the characteristic data are even in xi).
    let mut order: Vec<usize> = (0..n).filter(|&i| xi_grid[i] != 0.0).collect();
    order.sort_by(|&i, &j| xi_grid[j].abs().total_cmp(&xi_grid[i].abs()));
    let mut xi0 = None;
    for &i in &order {
        if regime_holds(family, &coeffs[i], &roots[i], values[i][2]) {
            xi0 = Some(xi_grid[i].abs());
        } else {
            break;
        }
    }
    Ok(BranchTable {
        family: *family,
        xi: xi_grid.to_vec(),
        values,
        coeffs,
        permutations,
        refined_at,
        xi0,
    })
}

/// `(1 + margin) * max(max_grid Re delta, omega0)`.
pub fn estimate_a1(table: &BranchTable, margin: f64) -> f64 {
    let max_re = (0..table.len()).map(|i| table.delta(i).re).fold(f64::NEG_INFINITY, f64::max);
    (1.0 + margin) * max_re.max(table.family.omega0())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OctaveValue {
    /// Lower end `2^k` of the octave.
    pub octave_start: f64,
    pub value: f64,
}

fn group_by_octave(samples: impl Iterator<Item = (f64, f64)>) -> Vec<OctaveValue> {
    let mut out: Vec<OctaveValue> = Vec::new();
    for (x, v) in samples {
        let start = 2f64.powi(x.log2().floor() as i32);
        match out.last_mut() {
            Some(last) if last.octave_start == start => last.value = last.value.max(v),
            _ => out.push(OctaveValue { octave_start: start, value: v }),
        }
    }
    out
}

/// Per-octave maximum of `|xi d(delta)/d(xi)|` over `xi >= xi0` by centred differences.
pub fn delta_derivative_scan(table: &BranchTable, xi0: f64) -> Vec<OctaveValue> {
    let idx: Vec<usize> = (0..table.len()).filter(|&i| table.xi[i] > 0.0).collect();
    let samples = idx.windows(3).filter_map(|w| {
        let (a, m, b) = (w[0], w[1], w[2]);
        let x = table.xi[m];
        if x < xi0 {
            return None;
        }
        let d = (table.delta(b) - table.delta(a)) / (table.xi[b] - table.xi[a]);
        Some((x, (x * d).norm()))
    });
    group_by_octave(samples)
}

/// Per-octave maximum of `|xi|^2 |Laplacian delta~|` along the first axis, from a
/// five-point stencil with step `rel_step * |xi|`.
pub fn laplacian_scan_2d(model: &BarotropicModel, radii: &[f64], rel_step: f64) -> Vec<OctaveValue> {
    let delta = |x1: f64, x2: f64| -eigen2d_closed_form(model, [x1, x2]).values[2];
    let samples = radii.iter().map(|&r| {
        let h = rel_step * r;
        let lap = (delta(r + h, 0.0) + delta(r - h, 0.0) + delta(r, h) + delta(r, -h) - 4.0 * delta(r, 0.0))
            / (h * h);
        (r, r * r * lap.norm())
    });
    group_by_octave(samples)
}

/// Brackets the sign change of the discriminant of the 2D characteristic cubic,
/// i.e. where the dilatational and bounded roots collide. Returns the bracket
/// on `|xi|` as `(lo, hi)`.
pub fn locate_double_root_2d(model: &BarotropicModel, radii: &[f64]) -> Option<(f64, f64)> {
    let fam = SymbolFamily::barotropic(*model);
    let d: Vec<f64> = radii.iter().map(|&r| characteristic_coefficients(&fam, r).d).collect();
    (1..radii.len())
        .find(|&i| d[i - 1] < 0.0 && d[i] >= 0.0)
        .map(|i| (radii[i - 1], radii[i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::FluidModel;

    #[test]
    fn zero_point_is_all_zero() {
        let fam = SymbolFamily::NonBarotropic1D(FluidModel::p_star());
        let t = eigen_branches(&fam, &[-1.0, 0.0, 1.0]).unwrap();
        assert!(t.values[1].iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn crossing_is_followed_smoothly() {
        // Branch -xi^2 crosses the bounded branch 2xi^2 - 2xi sqrt(xi^2 - 3) at xi = 2.
        let fam = SymbolFamily::NonBarotropic1D(FluidModel::p_star());
        let grid = log_grid(1.8, 50.0, 200);
        let t = eigen_branches(&fam, &grid).unwrap();
        for (i, &x) in grid.iter().enumerate() {
            let exact = 2.0 * x * x - 2.0 * x * (x * x - 3.0).sqrt();
            assert!((t.delta(i).re - exact).abs() < 1e-8 * x * x, "xi={x}");
        }
    }

    #[test]
    fn octave_grouping() {
        let g = group_by_octave([(1.0, 1.0), (1.5, 3.0), (2.0, 0.5), (3.9, 0.7)].into_iter());
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].value, 3.0);
        assert_eq!(g[1].octave_start, 2.0);
    }
}
