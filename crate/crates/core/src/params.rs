//! Physical parameters and the derived constants used everywhere else.
//!
//! A 1D model is described by `FluidModel`, which can be built either from the
//! primitive fluid constants (`PhysicalParams`) or directly from the derived
//! constants `(nu0, k0, b)` together with `R`, `bar_theta` and `bar_rho`.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamsError {
    #[error("{pointer}: {reason}")]
    Invalid { pointer: String, reason: String },
}

impl ParamsError {
    pub fn invalid(pointer: impl Into<String>, reason: impl Into<String>) -> Self {
        ParamsError::Invalid {
            pointer: pointer.into(),
            reason: reason.into(),
        }
    }

    /// JSON pointer of the offending field.
    pub fn pointer(&self) -> &str {
        match self {
            ParamsError::Invalid { pointer, .. } => pointer,
        }
    }
}

/// Primitive constants of the 1D non-barotropic fluid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    #[serde(rename = "R")]
    pub r: f64,
    pub bar_theta: f64,
    pub bar_rho: f64,
    pub c_v: f64,
    pub mu: f64,
    pub lambda: f64,
    pub kappa: f64,
    #[serde(default)]
    pub bar_v: f64,
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
}

/// Derived constants of the 1D system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub nu0: f64,
    pub k0: f64,
    pub b: f64,
    pub omega0: f64,
}

fn positive(value: f64, name: &str) -> Result<(), ParamsError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ParamsError::invalid(
            format!("/{name}"),
            format!("must be a finite positive number, got {value}"),
        ))
    }
}

fn finite(value: f64, name: &str) -> Result<(), ParamsError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ParamsError::invalid(format!("/{name}"), "must be finite"))
    }
}

impl PhysicalParams {
    /// Canonical test set with `nu0 = 1, k0 = 4, b = 1, R = 3`.
    pub fn p_star() -> Self {
        PhysicalParams {
            r: 3.0,
            bar_theta: 1.0,
            bar_rho: 1.0,
            c_v: 1.0,
            mu: 0.25,
            lambda: 0.5,
            kappa: 4.0,
            bar_v: 0.0,
            length: 1.0,
            horizon: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        positive(self.r, "R")?;
        positive(self.bar_theta, "bar_theta")?;
        positive(self.bar_rho, "bar_rho")?;
        positive(self.c_v, "c_v")?;
        positive(self.mu, "mu")?;
        finite(self.lambda, "lambda")?;
        positive(self.kappa, "kappa")?;
        if !(self.bar_v.is_finite() && self.bar_v >= 0.0) {
            return Err(ParamsError::invalid("/bar_v", "must be finite and non-negative"));
        }
        positive(self.length, "L")?;
        positive(self.horizon, "T")?;
        if !(self.lambda + 2.0 * self.mu > 0.0) {
            return Err(ParamsError::invalid("/lambda", "lambda + 2 mu must be positive"));
        }
        Ok(())
    }
}

pub fn derive_constants(p: &PhysicalParams) -> Result<DerivedConstants, ParamsError> {
    p.validate()?;
    let nu0 = (p.lambda + 2.0 * p.mu) / p.bar_rho;
    let k0 = p.kappa / (p.bar_rho * p.c_v);
    let b = p.bar_theta / p.c_v;
    let omega0 = p.r * p.bar_theta / nu0;
    Ok(DerivedConstants { nu0, k0, b, omega0 })
}

/// Everything the 1D solvers and symbols need.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidModel {
    #[serde(rename = "R")]
    pub r: f64,
    pub bar_theta: f64,
    pub bar_rho: f64,
    pub c_v: f64,
    pub derived: DerivedConstants,
    pub bar_v: f64,
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
}

impl FluidModel {
    pub fn from_physical(p: &PhysicalParams) -> Result<Self, ParamsError> {
        let derived = derive_constants(p)?;
        Ok(FluidModel {
            r: p.r,
            bar_theta: p.bar_theta,
            bar_rho: p.bar_rho,
            c_v: p.c_v,
            derived,
            bar_v: p.bar_v,
            length: p.length,
            horizon: p.horizon,
        })
    }

    /// Builds the model from derived constants; `c_v` is recovered as `bar_theta / b`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_derived(
        r: f64,
        bar_theta: f64,
        bar_rho: f64,
        nu0: f64,
        k0: f64,
        b: f64,
        bar_v: f64,
        length: f64,
        horizon: f64,
    ) -> Result<Self, ParamsError> {
        positive(r, "R")?;
        positive(bar_theta, "bar_theta")?;
        positive(bar_rho, "bar_rho")?;
        positive(nu0, "nu0")?;
        positive(k0, "k0")?;
        positive(b, "b")?;
        positive(length, "L")?;
        positive(horizon, "T")?;
        if !(bar_v.is_finite() && bar_v >= 0.0) {
            return Err(ParamsError::invalid("/bar_v", "must be finite and non-negative"));
        }
        Ok(FluidModel {
            r,
            bar_theta,
            bar_rho,
            c_v: bar_theta / b,
            derived: DerivedConstants {
                nu0,
                k0,
                b,
                omega0: r * bar_theta / nu0,
            },
            bar_v,
            length,
            horizon,
        })
    }

    pub fn p_star() -> Self {
        FluidModel::from_physical(&PhysicalParams::p_star()).expect("P* is valid")
    }

    pub fn nu0(&self) -> f64 {
        self.derived.nu0
    }

    pub fn k0(&self) -> f64 {
        self.derived.k0
    }

    pub fn omega0(&self) -> f64 {
        self.derived.omega0
    }

    /// Weights `(R bar_theta, bar_rho^2, bar_rho^2 c_v / bar_theta)` of the Z inner product.
    pub fn z_weights(&self) -> [f64; 3] {
        let rr = self.bar_rho * self.bar_rho;
        [self.r * self.bar_theta, rr, rr * self.c_v / self.bar_theta]
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_bar_v(mut self, bar_v: f64) -> Self {
        self.bar_v = bar_v;
        self
    }

    pub fn with_length(mut self, length: f64) -> Self {
        self.length = length;
        self
    }
}

/// Primitive constants of the 2D barotropic fluid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams2D {
    pub bar_rho: f64,
    pub mu: f64,
    pub lambda: f64,
    pub a: f64,
    pub gamma_exp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarotropicModel {
    pub bar_rho: f64,
    pub mu0: f64,
    pub gamma0: f64,
    pub b1: f64,
    pub omega0_2d: f64,
}

pub fn derive_constants_2d(p: &PhysicalParams2D) -> Result<BarotropicModel, ParamsError> {
    positive(p.bar_rho, "bar_rho")?;
    positive(p.mu, "mu")?;
    finite(p.lambda, "lambda")?;
    positive(p.a, "a")?;
    if !(p.gamma_exp.is_finite() && p.gamma_exp >= 1.0) {
        return Err(ParamsError::invalid("/gamma_exp", "must be at least 1"));
    }
    if !(p.lambda + p.mu >= 0.0) {
        return Err(ParamsError::invalid("/lambda", "lambda + mu must be non-negative"));
    }
    let mu0 = p.mu / p.bar_rho;
    let gamma0 = (p.lambda + p.mu) / p.bar_rho;
    let b1 = p.a * p.gamma_exp * p.bar_rho.powf(p.gamma_exp - 2.0);
    BarotropicModel::new(p.bar_rho, mu0, gamma0, b1)
}

impl BarotropicModel {
    pub fn new(bar_rho: f64, mu0: f64, gamma0: f64, b1: f64) -> Result<Self, ParamsError> {
        positive(bar_rho, "bar_rho")?;
        positive(mu0, "mu0")?;
        if !(gamma0.is_finite() && gamma0 >= 0.0) {
            return Err(ParamsError::invalid("/gamma0", "must be non-negative"));
        }
        positive(b1, "b1")?;
        Ok(BarotropicModel {
            bar_rho,
            mu0,
            gamma0,
            b1,
            omega0_2d: b1 * bar_rho / (mu0 + gamma0),
        })
    }

    /// `mu0 = gamma0 = b1 = bar_rho = 1`.
    pub fn unit() -> Self {
        BarotropicModel::new(1.0, 1.0, 1.0, 1.0).expect("unit constants are valid")
    }
}

fn field(obj: &Map<String, Value>, key: &str, prefix: &str) -> Result<Option<f64>, ParamsError> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_f64()
            .map(Some)
            .ok_or_else(|| ParamsError::invalid(format!("{prefix}/{key}"), "expected a number")),
    }
}

fn required(obj: &Map<String, Value>, key: &str, prefix: &str) -> Result<f64, ParamsError> {
    field(obj, key, prefix)?
        .ok_or_else(|| ParamsError::invalid(format!("{prefix}/{key}"), "missing required field"))
}

fn prefixed(err: ParamsError, prefix: &str) -> ParamsError {
    match err {
        ParamsError::Invalid { pointer, reason } if !pointer.starts_with(prefix) => {
            ParamsError::Invalid {
                pointer: format!("{prefix}{pointer}"),
                reason,
            }
        }
        other => other,
    }
}

/// Reads a 1D `params` section. `prefix` is the JSON pointer of the section.
///
/// Primitive constants (`mu`, `lambda`, `kappa`, `c_v`) win over derived ones
/// (`nu0`, `k0`, `b`) when both are present.
pub fn model_from_json(value: &Value, prefix: &str) -> Result<FluidModel, ParamsError> {
    let obj = value
        .as_object()
        .ok_or_else(|| ParamsError::invalid(prefix, "expected an object"))?;
    let r = required(obj, "R", prefix)?;
    let bar_theta = required(obj, "bar_theta", prefix)?;
    let bar_rho = required(obj, "bar_rho", prefix)?;
    let bar_v = field(obj, "bar_v", prefix)?.unwrap_or(0.0);
    let length = field(obj, "L", prefix)?.unwrap_or(1.0);
    let horizon = field(obj, "T", prefix)?.unwrap_or(1.0);
    let primitive = ["mu", "lambda", "kappa", "c_v"]
        .iter()
        .any(|k| obj.get(*k).is_some_and(|v| !v.is_null()));
    let model = if primitive {
        let p = PhysicalParams {
            r,
            bar_theta,
            bar_rho,
            c_v: required(obj, "c_v", prefix)?,
            mu: required(obj, "mu", prefix)?,
            lambda: required(obj, "lambda", prefix)?,
            kappa: required(obj, "kappa", prefix)?,
            bar_v,
            length,
            horizon,
        };
        FluidModel::from_physical(&p)
    } else {
        FluidModel::from_derived(
            r,
            bar_theta,
            bar_rho,
            required(obj, "nu0", prefix)?,
            required(obj, "k0", prefix)?,
            required(obj, "b", prefix)?,
            bar_v,
            length,
            horizon,
        )
    };
    model.map_err(|e| prefixed(e, prefix))
}

/// Reads a 2D `params` section, primitive (`mu`, `lambda`, `a`, `gamma_exp`) or derived (`mu0`, `gamma0`, `b1`).
pub fn barotropic_from_json(value: &Value, prefix: &str) -> Result<BarotropicModel, ParamsError> {
    let obj = value
        .as_object()
        .ok_or_else(|| ParamsError::invalid(prefix, "expected an object"))?;
    let bar_rho = required(obj, "bar_rho", prefix)?;
    let primitive = ["mu", "lambda", "a", "gamma_exp"]
        .iter()
        .any(|k| obj.get(*k).is_some_and(|v| !v.is_null()));
    let model = if primitive {
        derive_constants_2d(&PhysicalParams2D {
            bar_rho,
            mu: required(obj, "mu", prefix)?,
            lambda: required(obj, "lambda", prefix)?,
            a: required(obj, "a", prefix)?,
            gamma_exp: required(obj, "gamma_exp", prefix)?,
        })
    } else {
        BarotropicModel::new(
            bar_rho,
            required(obj, "mu0", prefix)?,
            required(obj, "gamma0", prefix)?,
            required(obj, "b1", prefix)?,
        )
    };
    model.map_err(|e| prefixed(e, prefix))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn p_star_constants() {
        let d = derive_constants(&PhysicalParams::p_star()).unwrap();
        assert_eq!((d.nu0, d.k0, d.b, d.omega0), (1.0, 4.0, 1.0, 3.0));
    }

    #[test]
    fn unit_k0() {
        let p = PhysicalParams {
            r: 2.0,
            bar_theta: 0.7,
            bar_rho: 1.0,
            c_v: 1.0,
            mu: 0.3,
            lambda: 0.1,
            kappa: 1.0,
            bar_v: 0.0,
            length: 1.0,
            horizon: 1.0,
        };
        assert_eq!(derive_constants(&p).unwrap().k0, 1.0);
    }

    #[test]
    fn two_d_constants() {
        let m = derive_constants_2d(&PhysicalParams2D {
            bar_rho: 1.0,
            mu: 1.0,
            lambda: 0.0,
            a: 0.5,
            gamma_exp: 2.0,
        })
        .unwrap();
        assert_eq!((m.mu0, m.gamma0, m.b1, m.omega0_2d), (1.0, 1.0, 1.0, 0.5));
    }

    #[test]
    fn rejects_bad_fields() {
        let mut p = PhysicalParams::p_star();
        p.bar_rho = 0.0;
        assert_eq!(derive_constants(&p).unwrap_err().pointer(), "/bar_rho");
        let mut p = PhysicalParams::p_star();
        p.lambda = -0.6;
        assert_eq!(derive_constants(&p).unwrap_err().pointer(), "/lambda");
    }

    #[test]
    fn json_missing_field_names_pointer() {
        let v = json!({"R": 3, "bar_theta": 1, "c_v": 1, "mu": 0.25, "lambda": 0.5, "kappa": 4});
        let err = model_from_json(&v, "/params").unwrap_err();
        assert_eq!(err.pointer(), "/params/bar_rho");
    }

    #[test]
    fn json_derived_and_primitive_agree() {
        let derived = json!({"R": 3, "bar_theta": 1, "bar_rho": 1, "nu0": 1, "k0": 4, "b": 1});
        let primitive = json!({"R": 3, "bar_theta": 1, "bar_rho": 1, "c_v": 1, "mu": 0.25,
            "lambda": 0.5, "kappa": 4, "nu0": 99});
        let a = model_from_json(&derived, "/params").unwrap();
        let b = model_from_json(&primitive, "/params").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn json_invalid_value_is_prefixed() {
        let v = json!({"R": 3, "bar_theta": 1, "bar_rho": -1, "nu0": 1, "k0": 4, "b": 1});
        assert_eq!(model_from_json(&v, "/params").unwrap_err().pointer(), "/params/bar_rho");
        let v = json!({"R": "three", "bar_theta": 1, "bar_rho": 1});
        assert_eq!(model_from_json(&v, "/params").unwrap_err().pointer(), "/params/R");
    }
}
