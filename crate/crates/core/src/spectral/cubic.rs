//! Closed-form roots of monic real cubics `x^3 + a x^2 + b x + c`.

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::Serialize;

use super::SpectralError;

/// Relative threshold below which `D` (resp. `D0`) is treated as zero.
pub const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CubicCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Discriminant `18abc - 4a^3c + a^2b^2 - 4b^3 - 27c^2`.
    pub d: f64,
    pub d0: f64,
    pub d1: f64,
    #[serde(skip)]
    pub c_val: Complex64,
}

/// Which piece of the closed form produced the roots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RootCase {
    General,
    /// `D != 0`, `D0 = 0`: the square root of `D1^2` is taken as `D1`.
    VanishingD0,
    /// `D = 0`, `D0 = 0`.
    Triple,
    /// `D = 0`, `D0 != 0`.
    Double,
}

impl CubicCoefficients {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        let d = 18.0 * a * b * c - 4.0 * a.powi(3) * c + a * a * b * b - 4.0 * b.powi(3) - 27.0 * c * c;
        let d0 = a * a - 3.0 * b;
        let d1 = 2.0 * a.powi(3) - 9.0 * a * b + 27.0 * c;
        let mut coeffs = CubicCoefficients {
            a,
            b,
            c,
            d,
            d0,
            d1,
            c_val: Complex64::new(0.0, 0.0),
        };
        coeffs.c_val = match coeffs.case() {
            RootCase::VanishingD0 => Complex64::new(d1, 0.0).cbrt(),
            RootCase::General => big_c(d0, d1),
            _ => Complex64::new(0.0, 0.0),
        };
        coeffs
    }

    /// Floor of the degeneracy tests. It is 1 for root scales of at least 1 and
    /// otherwise follows the scale, so tiny cubics are not all declared degenerate.
    fn floor(&self, power: i32) -> f64 {
        self.root_scale().min(1.0).powi(power)
    }

    pub fn d_is_zero(&self) -> bool {
        self.d.abs() <= DEGENERACY_TOL * (self.d1 * self.d1).max(self.floor(6))
    }

    pub fn d0_is_zero(&self) -> bool {
        self.d0.abs() <= DEGENERACY_TOL * (self.a * self.a).max(self.floor(2))
    }

    pub fn case(&self) -> RootCase {
        match (self.d_is_zero(), self.d0_is_zero()) {
            (true, true) => RootCase::Triple,
            (true, false) => RootCase::Double,
            (false, true) => RootCase::VanishingD0,
            (false, false) => RootCase::General,
        }
    }

    /// `p(x)` and `p'(x)`.
    pub fn eval(&self, x: Complex64) -> (Complex64, Complex64) {
        let p = ((x + self.a) * x + self.b) * x + self.c;
        let dp = (3.0 * x + 2.0 * self.a) * x + self.b;
        (p, dp)
    }

    /// Largest modulus a root can have, by the Cauchy bound.
    pub fn root_scale(&self) -> f64 {
        self.a.abs().max(self.b.abs().sqrt()).max(self.c.abs().cbrt())
    }
}

/// `C = cbrt((D1 + sqrt(D1^2 - 4 D0^3)) / 2)` with principal branches.
///
/// Either sign of the square root yields the same root set (the two choices of
/// `C` multiply to `D0`), so the sign that avoids cancellation is taken.
fn big_c(d0: f64, d1: f64) -> Complex64 {
    let disc = Complex64::new(d1 * d1 - 4.0 * d0.powi(3), 0.0).sqrt();
    let plus = (d1 + disc) / 2.0;
    let minus = (d1 - disc) / 2.0;
    let pick = if plus.norm() >= minus.norm() { plus } else { minus };
    pick.cbrt()
}

fn omegas() -> [Complex64; 3] {
    let w = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
    [Complex64::new(1.0, 0.0), w, w * w]
}

/// Roots from the closed-form formula, with the degenerate cases routed by threshold.
pub fn cubic_roots(k: &CubicCoefficients) -> [Complex64; 3] {
    let (a, b, c) = (k.a, k.b, k.c);
    match k.case() {
        RootCase::Triple => [Complex64::new(-a / 3.0, 0.0); 3],
        RootCase::Double => {
            let double = (9.0 * c - a * b) / (2.0 * k.d0);
            let simple = (4.0 * a * b - 9.0 * c - a * a * a) / k.d0;
            [
                Complex64::new(double, 0.0),
                Complex64::new(double, 0.0),
                Complex64::new(simple, 0.0),
            ]
        }
        RootCase::General | RootCase::VanishingD0 => {
            let cc = k.c_val;
            let mut out = [Complex64::new(0.0, 0.0); 3];
            for (root, w) in out.iter_mut().zip(omegas()) {
                let wc = w * cc;
                *root = -(a + wc + k.d0 / wc) / 3.0;
            }
            out
        }
    }
}

/// Newton-polishes each root; when two roots coincide the pair is recomputed by
/// deflating the third one and solving the remaining quadratic.
pub fn polish_roots(k: &CubicCoefficients, roots: [Complex64; 3]) -> [Complex64; 3] {
    let mut out = roots.map(|r| newton(k, r));
    let scale = k.root_scale().max(1e-300);
    for (i, j, m) in [(0, 1, 2), (0, 2, 1), (1, 2, 0)] {
        if (out[i] - out[j]).norm() <= 1e-7 * scale && (out[i] - out[m]).norm() > 1e-5 * scale {
            let [p, q] = deflated_pair(k, out[m]);
            out[i] = newton(k, p);
            out[j] = newton(k, q);
            break;
        }
    }
    out
}

fn newton(k: &CubicCoefficients, mut x: Complex64) -> Complex64 {
    let (mut p, _) = k.eval(x);
    for _ in 0..6 {
        let (_, dp) = k.eval(x);
        if dp.norm() == 0.0 || p.norm() == 0.0 {
            break;
        }
        let next = x - p / dp;
        let (pn, _) = k.eval(next);
        if !(pn.norm() < p.norm()) {
            break;
        }
        x = next;
        p = pn;
    }
    x
}

/// Remaining two roots once `r` is known: `x^2 + (a + r) x + (b + r (a + r))`.
fn deflated_pair(k: &CubicCoefficients, r: Complex64) -> [Complex64; 2] {
    let p = k.a + r;
    let q = k.b + r * p;
    let disc = (p * p - 4.0 * q).sqrt();
    let s = if (p.conj() * disc).re >= 0.0 { disc } else { -disc };
    let big = -(p + s) / 2.0;
    if big.norm() == 0.0 {
        return [big, big];
    }
    [big, q / big]
}

/// Oracle: eigenvalues of the (rescaled) companion matrix, Newton-polished.
pub fn companion_roots(k: &CubicCoefficients) -> Result<[Complex64; 3], SpectralError> {
    let s = k.root_scale();
    if s == 0.0 {
        return Ok([Complex64::new(0.0, 0.0); 3]);
    }
    // Roots x = s y with y^3 + (a/s) y^2 + (b/s^2) y + c/s^3 = 0.
    let (a, b, c) = (k.a / s, k.b / (s * s), k.c / (s * s * s));
    let m = Matrix3::new(-a, -b, -c, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0);
    let schur = nalgebra::Schur::try_new(m, 1e-15, 10_000)
        .ok_or(SpectralError::NoConvergence { what: "companion Schur iteration" })?;
    let eig = schur.complex_eigenvalues();
    let mut out = [Complex64::new(0.0, 0.0); 3];
    for (o, e) in out.iter_mut().zip(eig.iter()) {
        *o = newton(k, Complex64::new(e.re * s, e.im * s));
    }
    Ok(out)
}

/// Smallest, over the six pairings, of the largest root-to-root distance.
pub fn paired_distance(x: &[Complex64; 3], y: &[Complex64; 3]) -> f64 {
    PERMUTATIONS
        .iter()
        .map(|p| (0..3).map(|i| (x[i] - y[p[i]]).norm()).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min)
}

/// The paired distance measured against the root scale `max(1, max |root|)`.
pub fn scaled_paired_distance(x: &[Complex64; 3], y: &[Complex64; 3]) -> f64 {
    let scale = x.iter().chain(y.iter()).map(|r| r.norm()).fold(1.0, f64::max);
    paired_distance(x, y) / scale
}

pub const PERMUTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Relative Vieta residual of a root triple.
pub fn vieta_residual(k: &CubicCoefficients, r: &[Complex64; 3]) -> f64 {
    let sum = r[0] + r[1] + r[2];
    let pair = r[0] * r[1] + r[0] * r[2] + r[1] * r[2];
    let prod = r[0] * r[1] * r[2];
    let rel = |got: Complex64, want: f64, scale: f64| (got - want).norm() / scale.max(1e-300);
    let s = k.root_scale().max(1.0);
    rel(sum, -k.a, k.a.abs().max(s))
        .max(rel(pair, k.b, k.b.abs().max(s * s)))
        .max(rel(prod, -k.c, k.c.abs().max(s * s * s)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HurwitzReport {
    pub stable: bool,
    /// `a b - c`
    pub margin: f64,
}

/// Routh–Hurwitz test for a monic cubic: `a, b, c > 0` and `a b > c`.
pub fn hurwitz_check(k: &CubicCoefficients) -> HurwitzReport {
    let margin = k.a * k.b - k.c;
    HurwitzReport {
        stable: k.a > 0.0 && k.b > 0.0 && k.c > 0.0 && margin > 0.0,
        margin,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn factored_example() {
        let k = CubicCoefficients::new(5.0, 16.0, 12.0);
        let s2 = 2.0 * 2f64.sqrt();
        let want = [c(-1.0, 0.0), c(-2.0, s2), c(-2.0, -s2)];
        assert!(paired_distance(&cubic_roots(&k), &want) < 1e-12);
        assert!(paired_distance(&companion_roots(&k).unwrap(), &want) < 1e-12);
    }

    #[test]
    fn zero_cubic() {
        let k = CubicCoefficients::new(0.0, 0.0, 0.0);
        assert_eq!(k.case(), RootCase::Triple);
        assert_eq!(cubic_roots(&k), [c(0.0, 0.0); 3]);
        assert_eq!(companion_roots(&k).unwrap(), [c(0.0, 0.0); 3]);
    }

    #[test]
    fn double_root_case() {
        let k = CubicCoefficients::new(4.0, 5.0, 2.0);
        assert_eq!(k.case(), RootCase::Double);
        let want = [c(-1.0, 0.0), c(-1.0, 0.0), c(-2.0, 0.0)];
        assert!(paired_distance(&cubic_roots(&k), &want) < 1e-14);
    }

    #[test]
    fn triple_root_uses_a_over_three() {
        // (x + 2)^3
        let k = CubicCoefficients::new(6.0, 12.0, 8.0);
        assert_eq!(k.case(), RootCase::Triple);
        assert_eq!(cubic_roots(&k), [c(-2.0, 0.0); 3]);
    }

    #[test]
    fn vanishing_d0_branch() {
        // (x + 1)^3 - 1 has D0 = 0 and D != 0.
        let k = CubicCoefficients::new(3.0, 3.0, 0.0);
        assert_eq!(k.case(), RootCase::VanishingD0);
        let r = cubic_roots(&k);
        let h = 3f64.sqrt() / 2.0;
        let want = [c(0.0, 0.0), c(-1.5, h), c(-1.5, -h)];
        assert!(paired_distance(&r, &want) < 1e-12);
        // D1 < 0 as well: (x - 1)^3 + 8 = x^3 - 3x^2 + 3x + 7
        let k = CubicCoefficients::new(-3.0, 3.0, 7.0);
        assert_eq!(k.case(), RootCase::VanishingD0);
        let r = polish_roots(&k, cubic_roots(&k));
        assert!(vieta_residual(&k, &r) < 1e-14);
    }

    #[test]
    fn discriminant_identity() {
        for (a, b, cc) in [(5.0, 16.0, 12.0), (20.0, 112.0, 192.0), (-3.0, 0.5, 7.0)] {
            let k = CubicCoefficients::new(a, b, cc);
            let lhs = k.d1 * k.d1 - 4.0 * k.d0.powi(3);
            assert!((lhs + 27.0 * k.d).abs() <= 1e-9 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn polish_splits_collapsed_pair() {
        // (x + 1)(x + 1 + 1e-7)(x + 3): closed form routes to the double root.
        let e = 1e-7;
        let (r1, r2, r3) = (-1.0, -1.0 - e, -3.0);
        let a = -(r1 + r2 + r3);
        let b = r1 * r2 + r1 * r3 + r2 * r3;
        let cc = -r1 * r2 * r3;
        let k = CubicCoefficients::new(a, b, cc);
        let r = polish_roots(&k, cubic_roots(&k));
        let want = [c(r1, 0.0), c(r2, 0.0), c(r3, 0.0)];
        // Conditioning limits a 1e-7 gap to about 1e-9 accuracy.
        assert!(paired_distance(&r, &want) < 1e-8, "{r:?}");
        assert!((r[0] - r[1]).norm() > 5e-8);
    }

    #[test]
    fn small_scale_is_not_degenerate() {
        // (x + 1e-3)(x + 2e-3)(x + 4e-3): D is about 1e-17 but the roots are distinct.
        let k = CubicCoefficients::new(7e-3, 1.4e-5, 8e-9);
        assert_eq!(k.case(), RootCase::General);
        let want = [c(-1e-3, 0.0), c(-2e-3, 0.0), c(-4e-3, 0.0)];
        assert!(paired_distance(&cubic_roots(&k), &want) < 1e-15);
    }

    #[test]
    fn hurwitz_examples() {
        let h = hurwitz_check(&CubicCoefficients::new(5.0, 16.0, 12.0));
        assert!(h.stable);
        assert_eq!(h.margin, 68.0);
        assert!(!hurwitz_check(&CubicCoefficients::new(0.0, 0.0, 0.0)).stable);
    }
}
