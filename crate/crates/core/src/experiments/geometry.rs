use num_rational::Ratio;
use serde::Serialize;

use super::ExperimentError;

/// The density control region `(l1, l2)` of the transported system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MovingGeometry {
    pub l1: f64,
    pub l2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Placement {
    /// The swept ball stays in `(0, l1)`.
    Left,
    /// The swept ball stays in `(l2, L)`.
    Right,
}

/// A beam centre and radius whose ball, transported over `[0, T]`, avoids `(l1, l2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Certificate {
    pub x0: f64,
    pub eta: f64,
    pub placement: Placement,
    pub threshold: f64,
    pub horizon: f64,
}

impl Certificate {
    /// The interval covered by `x(t) +- eta`, `x(t) = x0 - bar_v (T - t)`.
    pub fn swept(&self, bar_v: f64) -> (f64, f64) {
        (self.x0 - self.eta - bar_v * self.horizon, self.x0 + self.eta)
    }
}

/// Exact value of the shortest decimal that round-trips to `x`.
fn decimal(x: f64) -> Result<Ratio<i128>, ExperimentError> {
    let bad = || ExperimentError::Config(format!("{x} has no exact decimal form"));
    let s = format!("{x:e}");
    let (mant, exp) = s.split_once('e').ok_or_else(bad)?;
    let exp: i32 = exp.parse().map_err(|_| bad())?;
    let (neg, mant) = mant.strip_prefix('-').map_or((false, mant), |m| (true, m));
    let (int, frac) = mant.split_once('.').unwrap_or((mant, ""));
    let digits: i128 = format!("{int}{frac}").parse().map_err(|_| bad())?;
    let shift = exp - frac.len() as i32;
    if shift.abs() > 30 {
        return Err(bad());
    }
    let p = 10i128.pow(shift.unsigned_abs());
    let r = if shift >= 0 { Ratio::from_integer(digits * p) } else { Ratio::new(digits, p) };
    Ok(if neg { -r } else { r })
}

fn check(geom: &MovingGeometry, length: f64, bar_v: f64) -> Result<(), ExperimentError> {
    if !(0.0 < geom.l1 && geom.l1 < geom.l2 && geom.l2 < length) {
        return Err(ExperimentError::Config(format!(
            "need 0 < l1 < l2 < L, got l1 = {}, l2 = {}, L = {length}",
            geom.l1, geom.l2
        )));
    }
    if !(bar_v > 0.0) {
        return Err(ExperimentError::Config("the time threshold needs bar_v > 0".into()));
    }
    Ok(())
}

/// `max(l1, L - l2) / bar_v`, evaluated in exact rational arithmetic on the
/// decimal forms of the inputs and rounded once.
pub fn time_threshold(geom: &MovingGeometry, length: f64, bar_v: f64) -> Result<f64, ExperimentError> {
    check(geom, length, bar_v)?;
    let l1 = decimal(geom.l1)?;
    let right = decimal(length)? - decimal(geom.l2)?;
    let t = l1.max(right) / decimal(bar_v)?;
    Ok(*t.numer() as f64 / *t.denom() as f64)
}

/// Places the ball in whichever gap leaves the larger margin `gap - bar_v T`,
/// with `eta` a quarter of that margin and the swept interval centred in the gap.
pub fn certificate(geom: &MovingGeometry, length: f64, bar_v: f64, horizon: f64) -> Result<Certificate, ExperimentError> {
    let threshold = time_threshold(geom, length, bar_v)?;
    if !(horizon > 0.0) {
        return Err(ExperimentError::Config("horizon must be positive".into()));
    }
    if horizon >= threshold {
        return Err(ExperimentError::Infeasible { horizon, threshold });
    }
    let travel = bar_v * horizon;
    let left = geom.l1 - travel;
    let right = length - geom.l2 - travel;
    let (placement, margin, start) = if left >= right {
        (Placement::Left, left, 0.0)
    } else {
        (Placement::Right, right, geom.l2)
    };
    let eta = margin / 4.0;
    let x0 = start + travel + margin / 2.0;
    Ok(Certificate { x0, eta, placement, threshold, horizon })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_forms() {
        assert_eq!(decimal(0.3).unwrap(), Ratio::new(3, 10));
        assert_eq!(decimal(2.0).unwrap(), Ratio::from_integer(2));
        assert_eq!(decimal(-1.25e-3).unwrap(), Ratio::new(-1, 800));
        assert_eq!(decimal(1e5).unwrap(), Ratio::from_integer(100_000));
    }
}
