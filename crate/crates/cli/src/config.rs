//! JSON run configurations: loading, `--set` overrides and schema-checked access.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::path::Path;

use serde_json::{Map, Value};
use thiserror::Error;

use lcns::params::ParamsError;
use lcns::pde::Mask;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{pointer}: {reason}")]
pub struct SchemaError {
    pub pointer: String,
    pub reason: String,
}

impl SchemaError {
    pub fn new(pointer: impl Into<String>, reason: impl Into<String>) -> Self {
        SchemaError { pointer: pointer.into(), reason: reason.into() }
    }

    /// `/params/bar_rho` as `params.bar_rho`.
    pub fn dotted(&self) -> String {
        self.pointer.trim_start_matches('/').replace('/', ".")
    }
}

impl From<ParamsError> for SchemaError {
    fn from(e: ParamsError) -> Self {
        let ParamsError::Invalid { pointer, reason } = e;
        SchemaError { pointer, reason }
    }
}

pub fn load(path: Option<&Path>) -> Result<Value, SchemaError> {
    let Some(path) = path else {
        return Ok(Value::Object(Map::new()));
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| SchemaError::new("", format!("cannot read {}: {e}", path.display())))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| SchemaError::new("", format!("invalid JSON: {e}")))?;
    if !value.is_object() {
        return Err(SchemaError::new("", "the configuration must be a JSON object"));
    }
    Ok(value)
}

/// Applies `a.b.c=value`. The value is parsed as JSON and falls back to a string.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<(), SchemaError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| SchemaError::new("", format!("override `{spec}` is not of the form key=value")))?;
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(SchemaError::new("", format!("override key `{key}` has an empty segment")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let mut pointer = String::new();
    for part in &parts[..parts.len() - 1] {
        pointer.push('/');
        pointer.push_str(part);
        let obj = node
            .as_object_mut()
            .ok_or_else(|| SchemaError::new(pointer.clone(), "cannot override inside a non-object"))?;
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    node.as_object_mut()
        .ok_or_else(|| SchemaError::new(pointer, "cannot override inside a non-object"))?
        .insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// A JSON object read field by field. Keys that are never read are reported by
/// [`Section::finish`].
pub struct Section<'a> {
    obj: &'a Map<String, Value>,
    pointer: String,
    used: RefCell<BTreeSet<String>>,
}

impl<'a> Section<'a> {
    pub fn root(value: &'a Value) -> Result<Self, SchemaError> {
        Self::new(value, String::new())
    }

    fn new(value: &'a Value, pointer: String) -> Result<Self, SchemaError> {
        let obj = value.as_object().ok_or_else(|| SchemaError::new(pointer.clone(), "expected an object"))?;
        Ok(Section { obj, pointer, used: RefCell::new(BTreeSet::new()) })
    }

    pub fn pointer_of(&self, key: &str) -> String {
        format!("{}/{key}", self.pointer)
    }

    pub fn error(&self, key: &str, reason: impl Into<String>) -> SchemaError {
        SchemaError::new(self.pointer_of(key), reason)
    }

    /// The raw value; `null` counts as absent.
    pub fn raw(&self, key: &str) -> Option<&'a Value> {
        self.used.borrow_mut().insert(key.to_string());
        self.obj.get(key).filter(|v| !v.is_null())
    }

    pub fn section(&self, key: &str) -> Result<Option<Section<'a>>, SchemaError> {
        self.raw(key).map(|v| Section::new(v, self.pointer_of(key))).transpose()
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, SchemaError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .as_f64()
                .filter(|x| x.is_finite())
                .ok_or_else(|| self.error(key, "expected a finite number")),
        }
    }

    pub fn positive_or(&self, key: &str, default: f64) -> Result<f64, SchemaError> {
        let x = self.f64_or(key, default)?;
        if x > 0.0 {
            Ok(x)
        } else {
            Err(self.error(key, format!("must be positive, got {x}")))
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, SchemaError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .as_u64()
                .map(|n| n as usize)
                .ok_or_else(|| self.error(key, "expected a non-negative integer")),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, SchemaError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.as_u64().ok_or_else(|| self.error(key, "expected a non-negative integer")),
        }
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, SchemaError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.as_bool().ok_or_else(|| self.error(key, "expected a boolean")),
        }
    }

    /// One of `choices`, by name.
    pub fn choice<T: Copy>(&self, key: &str, default: T, choices: &[(&str, T)]) -> Result<T, SchemaError> {
        let Some(v) = self.raw(key) else { return Ok(default) };
        let names: Vec<&str> = choices.iter().map(|c| c.0).collect();
        v.as_str()
            .and_then(|s| choices.iter().find(|c| c.0 == s))
            .map(|c| c.1)
            .ok_or_else(|| self.error(key, format!("expected one of {}", names.join(", "))))
    }

    pub fn f64_list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, SchemaError> {
        let Some(v) = self.raw(key) else { return Ok(default.to_vec()) };
        let arr = v.as_array().ok_or_else(|| self.error(key, "expected an array of numbers"))?;
        arr.iter()
            .enumerate()
            .map(|(i, x)| {
                x.as_f64()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| SchemaError::new(format!("{}/{i}", self.pointer_of(key)), "expected a finite number"))
            })
            .collect()
    }

    pub fn pair_or(&self, key: &str, default: [f64; 2]) -> Result<[f64; 2], SchemaError> {
        let v = self.f64_list_or(key, &default)?;
        v.try_into().map_err(|_| self.error(key, "expected two numbers"))
    }

    /// A strictly decreasing list of at least four positive values.
    pub fn ladder_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, SchemaError> {
        let v = self.f64_list_or(key, default)?;
        if v.len() < 4 || v.iter().any(|x| *x <= 0.0) || v.windows(2).any(|w| w[1] >= w[0]) {
            return Err(self.error(key, "expected at least four positive, strictly decreasing values"));
        }
        Ok(v)
    }

    /// `[a, b]`, `"everywhere"` or `"nowhere"`.
    pub fn mask_or(&self, key: &str, default: Mask) -> Result<Mask, SchemaError> {
        let Some(v) = self.raw(key) else { return Ok(default) };
        match v {
            Value::String(s) if s == "everywhere" => Ok(Mask::Everywhere),
            Value::String(s) if s == "nowhere" => Ok(Mask::Nowhere),
            Value::Array(a) => match a.as_slice() {
                [x, y] => match (x.as_f64(), y.as_f64()) {
                    (Some(a), Some(b)) if a < b => Ok(Mask::Interval(a, b)),
                    _ => Err(self.error(key, "expected an interval [a, b] with a < b")),
                },
                _ => Err(self.error(key, "expected an interval [a, b]")),
            },
            _ => Err(self.error(key, "expected [a, b], \"everywhere\" or \"nowhere\"")),
        }
    }

    /// `[[x_lo, x_hi], [y_lo, y_hi]]`.
    pub fn rect_or(&self, key: &str, default: Option<[(f64, f64); 2]>) -> Result<Option<[(f64, f64); 2]>, SchemaError> {
        let Some(v) = self.raw(key) else { return Ok(default) };
        let bad = || self.error(key, "expected [[x_lo, x_hi], [y_lo, y_hi]]");
        let rows = v.as_array().filter(|a| a.len() == 2).ok_or_else(bad)?;
        let mut out = [(0.0, 0.0); 2];
        for (slot, row) in out.iter_mut().zip(rows) {
            let r = row.as_array().filter(|a| a.len() == 2).ok_or_else(bad)?;
            match (r[0].as_f64(), r[1].as_f64()) {
                (Some(a), Some(b)) if a < b => *slot = (a, b),
                _ => return Err(bad()),
            }
        }
        Ok(Some(out))
    }

    /// Rejects keys that were never read.
    pub fn finish(self) -> Result<(), SchemaError> {
        let used = self.used.borrow();
        match self.obj.keys().find(|k| !used.contains(*k)) {
            Some(k) => Err(self.error(k, "unknown field")),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn overrides_create_nested_objects() {
        let mut v = json!({});
        apply_override(&mut v, "params.T=0.5").unwrap();
        apply_override(&mut v, "mode=boundary").unwrap();
        apply_override(&mut v, "ladder=[1,0.5]").unwrap();
        assert_eq!(v, json!({"params": {"T": 0.5}, "mode": "boundary", "ladder": [1, 0.5]}));
        assert!(apply_override(&mut v, "novalue").is_err());
        assert!(apply_override(&mut v, "mode.x=1").is_err());
    }

    #[test]
    fn unknown_fields_are_reported() {
        let v = json!({"x0": 0.3, "typo": 1});
        let s = Section::root(&v).unwrap();
        assert_eq!(s.f64_or("x0", 0.0).unwrap(), 0.3);
        assert_eq!(s.finish().unwrap_err().pointer, "/typo");
    }

    #[test]
    fn masks_and_ladders() {
        let v = json!({"o1": [0.6, 0.9], "o2": "everywhere", "bad": [0.9, 0.6], "ladder": [1, 2, 3, 4]});
        let s = Section::root(&v).unwrap();
        assert_eq!(s.mask_or("o1", Mask::Nowhere).unwrap(), Mask::Interval(0.6, 0.9));
        assert_eq!(s.mask_or("o2", Mask::Nowhere).unwrap(), Mask::Everywhere);
        assert_eq!(s.mask_or("o3", Mask::Nowhere).unwrap(), Mask::Nowhere);
        assert!(s.mask_or("bad", Mask::Nowhere).is_err());
        assert_eq!(s.ladder_or("ladder", &[]).unwrap_err().pointer, "/ladder");
    }
}
