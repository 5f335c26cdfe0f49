use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::CliError;
use crate::manifest::fnv1a64;

/// Flat key-value parameter set. Sources are merged in order: config file
/// first, then `--set` overrides, then any sweep value. Keys are kept sorted
/// so the digest and the manifest dump are independent of input order.
#[derive(Debug, Clone, Default)]
pub struct Params {
    map: BTreeMap<String, String>,
}

impl Params {
    pub fn from_sources(config: Option<&Path>, sets: &[String]) -> Result<Self, CliError> {
        let mut params = Params::default();
        if let Some(path) = config {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = split_pair(line).ok_or_else(|| {
                    CliError::Usage(format!(
                        "{}:{}: expected `key = value`, got {line:?}",
                        path.display(),
                        lineno + 1
                    ))
                })?;
                params.map.insert(key, value);
            }
        }
        for spec in sets {
            let (key, value) = split_pair(spec)
                .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {spec:?}")))?;
            params.map.insert(key, value);
        }
        Ok(params)
    }

    pub fn insert(&mut self, key: &str, value: String) {
        self.map.insert(key.to_string(), value);
    }

    /// FNV-1a digest of the canonical `key=value` listing; identical
    /// effective parameters hash identically regardless of source layout.
    pub fn digest(&self) -> String {
        let mut canon = String::new();
        for (k, v) in &self.map {
            let _ = writeln!(canon, "{k}={v}");
        }
        format!("{:016x}", fnv1a64(canon.as_bytes()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &String)> {
        self.map.iter()
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str, CliError> {
        self.get(key)
            .ok_or_else(|| CliError::Usage(format!("missing required parameter `{key}`")))
    }

    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        parse_f64(key, self.require(key)?)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.get(key) {
            Some(raw) => parse_f64(key, raw),
            None => Ok(default),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, CliError> {
        match self.get(key) {
            Some(raw) => raw
                .parse()
                .map_err(|_| CliError::Usage(format!("parameter `{key}`: expected a non-negative integer, got {raw:?}"))),
            None => Ok(default),
        }
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, CliError> {
        match self.get(key) {
            Some("true") | Some("1") | Some("yes") => Ok(true),
            Some("false") | Some("0") | Some("no") => Ok(false),
            Some(raw) => Err(CliError::Usage(format!(
                "parameter `{key}`: expected true/false, got {raw:?}"
            ))),
            None => Ok(default),
        }
    }

    pub fn str_or(&self, key: &str, default: &str) -> String {
        self.get(key).unwrap_or(default).to_string()
    }

    /// Comma-separated list of floats.
    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        let raw = self.require(key)?;
        raw.split(',')
            .map(|s| parse_f64(key, s.trim()))
            .collect()
    }

    pub fn f64_list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, CliError> {
        if self.get(key).is_some() {
            self.f64_list(key)
        } else {
            Ok(default.to_vec())
        }
    }
}

fn split_pair(s: &str) -> Option<(String, String)> {
    let (k, v) = s.split_once('=')?;
    let k = k.trim();
    if k.is_empty() {
        return None;
    }
    Some((k.to_string(), v.trim().to_string()))
}

fn parse_f64(key: &str, raw: &str) -> Result<f64, CliError> {
    raw.parse()
        .map_err(|_| CliError::Usage(format!("parameter `{key}`: expected a number, got {raw:?}")))
}

/// Parsed `--sweep KEY=START:STEP:END` specification, end-inclusive.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub key: String,
    pub values: Vec<f64>,
}

impl Sweep {
    pub fn parse(spec: &str) -> Result<Self, CliError> {
        let bad = || CliError::Usage(format!("--sweep expects KEY=START:STEP:END, got {spec:?}"));
        let (key, range) = spec.split_once('=').ok_or_else(bad)?;
        let key = key.trim();
        if key.is_empty() {
            return Err(bad());
        }
        let parts: Vec<&str> = range.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|s| s.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        let (start, step, end) = (nums[0], nums[1], nums[2]);
        if !(step > 0.0) || end < start {
            return Err(CliError::Usage(format!(
                "--sweep needs a positive step and END >= START, got {spec:?}"
            )));
        }
        let mut values = Vec::new();
        let mut k = 0usize;
        loop {
            let v = start + step * k as f64;
            // Half-step slack keeps the endpoint despite rounding.
            if v > end + 0.5 * step {
                break;
            }
            values.push(v.min(end));
            k += 1;
        }
        Ok(Sweep {
            key: key.to_string(),
            values,
        })
    }

    /// Directory label for one sweep value (`p=2.5`).
    pub fn label(&self, value: f64) -> String {
        format!("{}={}", self.key, fmt_trim(value))
    }
}

/// Shortest round-trip decimal for a sweep value; keeps directory names tidy.
pub fn fmt_trim(v: f64) -> String {
    format!("{v}")
}
