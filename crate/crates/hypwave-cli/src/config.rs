use crate::catalog::Entry;
use hypwave::constcoeff::ConstCoeffError;
use hypwave::diag::DiagError;
use hypwave::dissipative::DissipativeError;
use hypwave::floquet::FloquetError;
use hypwave::geometry::GeometryError;
use hypwave::models::{ModelError, Profile};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

macro_rules! classify {
    ($ty:ty, $($pat:pat),+) => {
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                match e {
                    $($pat)|+ => CliError::Validation(e.to_string()),
                    _ => CliError::Numerical(e.to_string()),
                }
            }
        }
    };
}

classify!(ModelError, ModelError::Invalid(_), ModelError::SupportError(_));
classify!(DiagError, DiagError::InvalidSystem(_), DiagError::ZeroFrequency);
classify!(FloquetError, FloquetError::Invalid(_), FloquetError::SequenceError(_));
classify!(DissipativeError, DissipativeError::Invalid(_), DissipativeError::InvalidSystem(_));
classify!(ConstCoeffError, ConstCoeffError::InvalidOperator(_), ConstCoeffError::InvalidClass(_));
classify!(GeometryError, GeometryError::Invalid(_), GeometryError::InvalidSurface(_), GeometryError::InsufficientRange);

/// Contents of a `run` config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default)]
    pub parameters: Map<String, Value>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub output: Option<String>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
    }
}

/// Typed view of the `parameters` map, checked against a catalog entry.
pub struct Params<'a> {
    map: &'a Map<String, Value>,
    experiment: &'static str,
}

impl<'a> Params<'a> {
    pub fn new(map: &'a Map<String, Value>, entry: &Entry) -> Result<Self> {
        for key in entry.required {
            if !map.contains_key(*key) {
                return Err(invalid(format!("missing required parameter `{key}` for experiment `{}`", entry.name)));
            }
        }
        for key in map.keys() {
            if !entry.required.contains(&key.as_str()) && !entry.optional.contains(&key.as_str()) {
                return Err(invalid(format!("unknown parameter `{key}` for experiment `{}`", entry.name)));
            }
        }
        Ok(Self { map, experiment: entry.name })
    }

    fn get(&self, key: &str) -> Result<&'a Value> {
        self.map.get(key).ok_or_else(|| invalid(format!("missing required parameter `{key}` for experiment `{}`", self.experiment)))
    }

    fn bad(&self, key: &str, want: &str) -> CliError {
        invalid(format!("parameter `{key}` of `{}` must be {want}", self.experiment))
    }

    pub fn has(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        self.get(key)?.as_f64().filter(|v| v.is_finite()).ok_or_else(|| self.bad(key, "a finite number"))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        if self.has(key) { self.f64(key) } else { Ok(default) }
    }

    pub fn positive_or(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.f64_or(key, default)?;
        if v > 0.0 { Ok(v) } else { Err(self.bad(key, "positive")) }
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        self.get(key)?.as_u64().map(|v| v as usize).ok_or_else(|| self.bad(key, "a nonnegative integer"))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        if self.has(key) { self.usize(key) } else { Ok(default) }
    }

    pub fn str(&self, key: &str) -> Result<&'a str> {
        self.get(key)?.as_str().ok_or_else(|| self.bad(key, "a string"))
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        let arr = self.get(key)?.as_array().ok_or_else(|| self.bad(key, "an array of numbers"))?;
        arr.iter().map(|v| v.as_f64().filter(|x| x.is_finite()).ok_or_else(|| self.bad(key, "an array of finite numbers"))).collect()
    }

    pub fn f64_list_or(&self, key: &str, default: Vec<f64>) -> Result<Vec<f64>> {
        if self.has(key) { self.f64_list(key) } else { Ok(default) }
    }

    /// Strictly increasing positive sample times.
    pub fn times_or(&self, key: &str, default: Vec<f64>) -> Result<Vec<f64>> {
        let ts = self.f64_list_or(key, default)?;
        if ts.is_empty() || ts[0] <= 0.0 || ts.windows(2).any(|w| w[1] <= w[0]) {
            return Err(self.bad(key, "a nonempty increasing list of positive times"));
        }
        Ok(ts)
    }

    pub fn profile_or(&self, key: &str, default: Profile) -> Result<Profile> {
        let Some(v) = self.map.get(key) else { return Ok(default) };
        let want = "\"zero\" or an object {\"type\": \"gaussian\", \"width\"} / {\"type\": \"annulus\", \"lo\", \"hi\"}";
        let kind = v.as_str().or_else(|| v.get("type").and_then(Value::as_str)).ok_or_else(|| self.bad(key, want))?;
        let num = |name: &str| v.get(name).and_then(Value::as_f64).ok_or_else(|| self.bad(key, want));
        match kind {
            "zero" => Ok(Profile::Zero),
            "gaussian" => {
                let width = num("width")?;
                if width > 0.0 { Ok(Profile::Gaussian { width }) } else { Err(self.bad(key, "a Gaussian with positive width")) }
            }
            "annulus" => {
                let (lo, hi) = (num("lo")?, num("hi")?);
                if 0.0 <= lo && lo < hi { Ok(Profile::Annulus { lo, hi }) } else { Err(self.bad(key, "an annulus with 0 ≤ lo < hi")) }
            }
            _ => Err(self.bad(key, want)),
        }
    }

    pub fn raw(&self, key: &str) -> Option<&'a Value> {
        self.map.get(key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::CATALOG;
    use proptest::prelude::*;

    fn full(entry: &Entry) -> Map<String, Value> {
        entry.required.iter().map(|k| (k.to_string(), Value::from(1.0))).collect()
    }

    #[test]
    fn missing_mu_is_named() {
        let entry = crate::catalog::find("scattering").unwrap();
        let err = Params::new(&Map::new(), entry).err().unwrap();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("`mu`"));
    }

    #[test]
    fn unknown_key_rejected() {
        let entry = crate::catalog::find("floquet-scan").unwrap();
        let mut m = full(entry);
        m.insert("epsilon".into(), Value::from(0.3));
        assert!(Params::new(&m, entry).err().unwrap().to_string().contains("`epsilon`"));
    }

    #[test]
    fn library_errors_are_classified() {
        assert_eq!(CliError::from(FloquetError::Invalid("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(FloquetError::NoInstability).exit_code(), 3);
        assert_eq!(CliError::from(GeometryError::QuadratureFailure { t: 1.0, last_reliable: None }).exit_code(), 3);
        assert_eq!(CliError::from(GeometryError::InvalidSurface("x".into())).exit_code(), 2);
    }

    #[test]
    fn profiles_parse() {
        let entry = crate::catalog::find("diffusion").unwrap();
        let mut m = full(entry);
        m.insert("u0".into(), serde_json::json!({"type": "annulus", "lo": 1.0, "hi": 2.0}));
        m.insert("u1".into(), serde_json::json!({"type": "gaussian", "width": -1.0}));
        let p = Params::new(&m, entry).unwrap();
        assert_eq!(p.profile_or("u0", Profile::Zero).unwrap(), Profile::Annulus { lo: 1.0, hi: 2.0 });
        assert_eq!(p.profile_or("u1", Profile::Zero).err().unwrap().exit_code(), 2);
        assert_eq!(p.profile_or("absent", Profile::Zero).unwrap(), Profile::Zero);
    }

    proptest! {
        #[test]
        fn dropping_a_required_key_names_it(idx in 0usize..12, drop in 0usize..8) {
            let entry = &CATALOG[idx];
            let mut m = full(entry);
            let key = entry.required[drop % entry.required.len()];
            m.remove(key);
            let err = Params::new(&m, entry).err().unwrap();
            prop_assert_eq!(err.exit_code(), 2);
            let named = format!("`{}`", key);
            prop_assert!(err.to_string().contains(&named));
        }

        #[test]
        fn times_must_increase(ts in proptest::collection::vec(-1.0f64..10.0, 1..8)) {
            let entry = crate::catalog::find("diffusion").unwrap();
            let mut m = full(entry);
            m.insert("times".into(), Value::from(ts.clone()));
            let ok = ts[0] > 0.0 && ts.windows(2).all(|w| w[1] > w[0]);
            prop_assert_eq!(Params::new(&m, entry).unwrap().times_or("times", vec![]).is_ok(), ok);
        }
    }
}
