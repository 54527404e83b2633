//! Run configuration: flat `key = value` files and vector literals.

use std::collections::BTreeMap;
use std::str::FromStr;

use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::CVec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("config line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("config line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {message}")]
    InvalidValue { key: String, message: String },
    #[error("vector file line {line}: {message}")]
    Vector { line: usize, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

/// Keys accepted in a config file; each mirrors a command-line flag.
pub const KEYS: [&str; 13] = [
    "trials",
    "seed",
    "workers",
    "noise",
    "sigma",
    "s",
    "gamma",
    "alpha",
    "states",
    "format",
    "output",
    "check",
    "full-scale",
];

/// Parsed `key = value` pairs. Blank lines and `#` comments are ignored.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: k + 1,
                text: raw.to_string(),
            })?;
            let key = key.trim().replace('_', "-");
            if !KEYS.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey(key));
            }
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(ConfigError::Duplicate { line: k + 1, key });
            }
        }
        Ok(Self { values })
    }

    pub fn load(path: &str) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Typed lookup; `Ok(None)` when the key is absent.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse::<T>().map_err(|e| ConfigError::InvalidValue {
                    key: key.to_string(),
                    message: e.to_string(),
                })
            })
            .transpose()
    }

    pub fn flag(&self, key: &str) -> Result<bool, ConfigError> {
        match self.raw(key) {
            None => Ok(false),
            Some("true" | "yes" | "1") => Ok(true),
            Some("false" | "no" | "0") => Ok(false),
            Some(other) => Err(ConfigError::InvalidValue {
                key: key.to_string(),
                message: format!("expected true or false, got `{other}`"),
            }),
        }
    }
}

/// Parses `1,0` or `0.6, 0.8i` or `1+1i,0` into a vector of complex
/// components.
pub fn parse_components(text: &str) -> Result<CVec, String> {
    let comps = text
        .split(',')
        .map(|t| {
            let t = t.trim();
            Complex64::from_str(t).map_err(|_| format!("cannot parse `{t}` as a complex number"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if comps.is_empty() {
        return Err("empty vector".into());
    }
    Ok(CVec::new(comps))
}

/// Parses a state vector and rescales it to unit norm.
pub fn parse_state(text: &str) -> Result<CVec, String> {
    let v = parse_components(text)?;
    let n = v.norm();
    if !(n.is_finite() && n > 0.0) {
        return Err("state vector must be nonzero and finite".into());
    }
    Ok(v.normalized())
}

/// Reads complex vectors written one component per line as `re,im`, with
/// vectors separated by blank lines. `#` starts a comment.
pub fn parse_vectors(text: &str) -> Result<Vec<CVec>, ConfigError> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            if raw.trim().is_empty() && !cur.is_empty() {
                out.push(CVec::new(std::mem::take(&mut cur)));
            }
            continue;
        }
        let parts: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        let err = |message: String| ConfigError::Vector { line: k + 1, message };
        if parts.len() != 2 {
            return Err(err(format!("expected `re,im`, got `{line}`")));
        }
        let re: f64 = parts[0]
            .parse()
            .map_err(|_| err(format!("bad real part `{}`", parts[0])))?;
        let im: f64 = parts[1]
            .parse()
            .map_err(|_| err(format!("bad imaginary part `{}`", parts[1])))?;
        if !(re.is_finite() && im.is_finite()) {
            return Err(err("components must be finite".into()));
        }
        cur.push(Complex64::new(re, im));
    }
    if !cur.is_empty() {
        out.push(CVec::new(cur));
    }
    if out.is_empty() {
        return Err(ConfigError::Vector {
            line: 0,
            message: "no vectors found".into(),
        });
    }
    Ok(out)
}

pub fn load_vectors(path: &str) -> Result<Vec<CVec>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.to_string(),
        message: e.to_string(),
    })?;
    parse_vectors(&text)
}
