//! Log-log least-squares fits.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerFit {
    /// Exponent `p` in `value ~ C eps^p`.
    pub slope: f64,
    /// `log10 C`.
    pub intercept: f64,
    /// Root-mean-square residual of the fit, in decades.
    pub residual: f64,
}

/// Least-squares line through `(log10 x, log10 y)`. `None` with fewer than two
/// usable points or non-positive data.
pub fn power_fit(x: &[f64], y: &[f64]) -> Option<PowerFit> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    if x.iter().chain(y).any(|v| !(v.is_finite() && *v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.log10()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.log10()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    Some(PowerFit {
        slope,
        intercept,
        residual: (ss / n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let x = [1e-2, 5e-3, 2e-3, 1e-3];
        let y: Vec<f64> = x.iter().map(|e: &f64| 3.0 * e.powf(1.5)).collect();
        let f = power_fit(&x, &y).unwrap();
        assert!((f.slope - 1.5).abs() < 1e-12);
        assert!((f.intercept - 3f64.log10()).abs() < 1e-12);
        assert!(f.residual < 1e-12);
    }

    #[test]
    fn rejects_non_positive() {
        assert!(power_fit(&[1.0, 2.0], &[0.0, 1.0]).is_none());
    }
}
