//! Key-value config files merged with command-line overrides.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;
use serde_json::Value;

use crate::CliError;

/// Canonical config key for a flag or file key.
pub fn canonical(key: &str) -> String {
    match key {
        "n" => "N".into(),
        "omega" => "omega_over_kappa".into(),
        "t_final" | "t-final" => "T".into(),
        other => other.replace('-', "_"),
    }
}

/// Resolves each setting from, in order, the command line, the config file
/// and the built-in default, and records what was used.
#[derive(Debug, Default)]
pub struct Resolver {
    file: BTreeMap<String, String>,
    used: BTreeSet<String>,
    resolved: BTreeMap<String, Value>,
}

impl Resolver {
    pub fn from_file(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                Self::parse(&text)
            }
        }
    }

    /// `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut file = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", i + 1)))?;
            let key = canonical(k.trim());
            if file.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(CliError::Usage(format!("config line {}: duplicate key '{key}'", i + 1)));
            }
        }
        Ok(Self {
            file,
            ..Self::default()
        })
    }

    pub fn optional<T>(&mut self, key: &str, cli: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr + Serialize,
        T::Err: Display,
    {
        self.used.insert(key.to_string());
        let value = match cli {
            Some(v) => Some(v),
            None => match self.file.get(key) {
                Some(text) => Some(
                    text.parse::<T>()
                        .map_err(|e| CliError::Usage(format!("config key '{key}': {e}")))?,
                ),
                None => None,
            },
        };
        if let Some(v) = &value {
            let json = serde_json::to_value(v).map_err(|e| CliError::Usage(e.to_string()))?;
            self.resolved.insert(key.to_string(), json);
        }
        Ok(value)
    }

    pub fn value<T>(&mut self, key: &str, cli: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr + Serialize,
        T::Err: Display,
    {
        match self.optional(key, cli)? {
            Some(v) => Ok(v),
            None => {
                let json = serde_json::to_value(&default).map_err(|e| CliError::Usage(e.to_string()))?;
                self.resolved.insert(key.to_string(), json);
                Ok(default)
            }
        }
    }

    /// Records a derived value that has no flag of its own.
    pub fn record(&mut self, key: &str, value: impl Serialize) {
        if let Ok(v) = serde_json::to_value(value) {
            self.resolved.insert(key.to_string(), v);
        }
    }

    /// The resolved settings. Config-file keys that no setting read are an
    /// error.
    pub fn finish(self) -> Result<BTreeMap<String, Value>, CliError> {
        let unknown: Vec<&String> = self.file.keys().filter(|k| !self.used.contains(*k)).collect();
        if !unknown.is_empty() {
            let list: Vec<&str> = unknown.iter().map(|s| s.as_str()).collect();
            return Err(CliError::Usage(format!("unused config keys: {}", list.join(", "))));
        }
        Ok(self.resolved)
    }
}

fn tidy(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// Real grid given as `start:stop:step` (inclusive) or `a,b,c`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct FloatList(pub Vec<f64>);

impl FromStr for FloatList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let parse = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("'{t}' is not a number"));
        if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            if parts.len() != 3 {
                return Err(format!("range '{s}' must be start:stop:step"));
            }
            let (a, b, h) = (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?);
            if !(h > 0.0) || b < a {
                return Err(format!("range '{s}' needs start <= stop and a positive step"));
            }
            let count = ((b - a) / h + 1e-9).floor() as usize + 1;
            Ok(Self((0..count).map(|i| tidy(a + i as f64 * h)).collect()))
        } else {
            let v = s.split(',').map(parse).collect::<Result<Vec<_>, _>>()?;
            if v.is_empty() {
                return Err("empty list".into());
            }
            Ok(Self(v))
        }
    }
}

/// Comma-separated list of positive integers.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct SizeList(pub Vec<usize>);

impl FromStr for SizeList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let v = s
            .split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|_| format!("'{t}' is not a non-negative integer")))
            .collect::<Result<Vec<_>, _>>()?;
        if v.is_empty() || v.contains(&0) {
            return Err("list must hold positive integers".into());
        }
        Ok(Self(v))
    }
}
