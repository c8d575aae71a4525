//! Merged `key=value` parameters (config file first, flags override) with
//! typed accessors. Every value read is recorded so the report lists the
//! parameters actually used, defaults included.

use std::sync::Mutex;
use std::collections::BTreeMap;
use std::path::Path;

use shl_core::bounds::Horizon;

use crate::CliError;

#[derive(Debug, Default)]
pub struct Params {
    raw: BTreeMap<String, String>,
    used: Mutex<BTreeMap<String, String>>,
}

impl Params {
    pub fn from_pairs<I, K, V>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        Self {
            raw: pairs.into_iter().map(|(k, v)| (k.into(), v.into())).collect(),
            used: Mutex::default(),
        }
    }

    /// Reads `key=value` lines; `#` starts a comment.
    pub fn parse_file_contents(text: &str, origin: &Path) -> Result<BTreeMap<String, String>, CliError> {
        let mut out = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::Config(format!(
                    "{}:{}: expected key=value",
                    origin.display(),
                    lineno + 1
                )));
            };
            out.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(out)
    }

    pub fn insert(&mut self, key: &str, value: String) {
        self.raw.insert(key.to_string(), value);
    }

    pub fn take(&mut self, key: &str) -> Option<String> {
        self.raw.remove(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &String> {
        self.raw.keys()
    }

    pub fn resolved(&self) -> BTreeMap<String, String> {
        self.used.lock().expect("params lock").clone()
    }

    fn lookup(&self, key: &str, default: Option<&str>) -> Result<String, CliError> {
        let v = match (self.raw.get(key), default) {
            (Some(v), _) => v.clone(),
            (None, Some(d)) => d.to_string(),
            (None, None) => return Err(CliError::Config(format!("missing required parameter `{key}`"))),
        };
        self.used.lock().expect("params lock").insert(key.to_string(), v.clone());
        Ok(v)
    }

    pub fn has(&self, key: &str) -> bool {
        self.raw.contains_key(key)
    }

    pub fn string(&self, key: &str, default: Option<&str>) -> Result<String, CliError> {
        self.lookup(key, default)
    }

    pub fn f64(&self, key: &str, default: Option<&str>) -> Result<f64, CliError> {
        parse_f64(key, &self.lookup(key, default)?)
    }

    pub fn f64_list(&self, key: &str, default: Option<&str>) -> Result<Vec<f64>, CliError> {
        split(&self.lookup(key, default)?).map(|s| parse_f64(key, s)).collect()
    }

    pub fn u64(&self, key: &str, default: Option<&str>) -> Result<u64, CliError> {
        parse_u64(key, &self.lookup(key, default)?)
    }

    pub fn u64_list(&self, key: &str, default: Option<&str>) -> Result<Vec<u64>, CliError> {
        split(&self.lookup(key, default)?).map(|s| parse_u64(key, s)).collect()
    }

    pub fn usize(&self, key: &str, default: Option<&str>) -> Result<usize, CliError> {
        Ok(self.u64(key, default)? as usize)
    }

    pub fn bool(&self, key: &str, default: Option<&str>) -> Result<bool, CliError> {
        match self.lookup(key, default)?.to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            other => Err(CliError::Config(format!("invalid value for `{key}`: `{other}` is not a boolean"))),
        }
    }

    pub fn string_list(&self, key: &str, default: Option<&str>) -> Result<Vec<String>, CliError> {
        Ok(split(&self.lookup(key, default)?).map(str::to_string).collect())
    }

    pub fn horizon_list(&self, key: &str, default: Option<&str>) -> Result<Vec<Horizon>, CliError> {
        split(&self.lookup(key, default)?)
            .map(|s| {
                s.parse::<Horizon>()
                    .map_err(|e| CliError::Config(format!("invalid value for `{key}`: {e}")))
            })
            .collect()
    }
}

fn split(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty())
}

fn parse_f64(key: &str, s: &str) -> Result<f64, CliError> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("invalid value for `{key}`: `{s}` is not a number")))?;
    if v.is_nan() {
        return Err(CliError::Config(format!("invalid value for `{key}`: NaN")));
    }
    Ok(v)
}

fn parse_u64(key: &str, s: &str) -> Result<u64, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Config(format!("invalid value for `{key}`: `{s}` is not a nonnegative integer")))
}
