//! Flat `key = value` configuration files.
//!
//! ```text
//! # comment
//! problem = phase_retrieval
//! eta = 5e-4            # trailing comments are allowed
//! monitor.apcg.tau = 500
//! sweep.betas = 0, 0.3, 0.5, 0.7, 0.9
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

/// Every key the harness understands; anything else is a config error.
pub const KNOWN_KEYS: &[&str] = &[
    "problem",
    "seed",
    "n",
    "d",
    "batch",
    "dataset",
    "eta",
    "beta",
    "r",
    "t_thred",
    "iterations",
    "w0",
    "monitor.defaults",
    "monitor.stride",
    "monitor.eps",
    "monitor.apag",
    "monitor.apag.min_grad",
    "monitor.apcg",
    "monitor.apcg.tau",
    "monitor.apcg.k",
    "monitor.apcg.saddle_only",
    "monitor.grace",
    "monitor.cnc",
    "monitor.hessian",
    "escape.f_threshold",
    "escape.rel_dist",
    "output.stride",
    "sweep.betas",
    "sweep.seeds",
    "sweep.statistic",
    "plan.L",
    "plan.rho",
    "plan.sigma2",
    "plan.c_m",
    "plan.c_prime",
    "plan.c_h",
    "plan.gamma",
    "plan.delta",
    "plan.eps",
    "plan.beta",
    "plan.delta_f",
    "plan.c_T",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub msg: String,
}

impl ConfigError {
    pub fn new(line: Option<usize>, msg: impl Into<String>) -> Self {
        Self { line, msg: msg.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError { line: Some(l), msg } => write!(f, "line {l}: {msg}"),
            ConfigError { line: None, msg } => f.write_str(msg),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, (usize, String)>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::new(Some(lineno), format!("expected 'key = value', got '{line}'")))?;
            let (key, value) = (key.trim(), value.trim());
            if !KNOWN_KEYS.contains(&key) {
                return Err(ConfigError::new(Some(lineno), format!("unknown key '{key}'")));
            }
            if value.is_empty() {
                return Err(ConfigError::new(Some(lineno), format!("'{key}' has no value")));
            }
            if let Some((first, _)) = entries.insert(key.to_string(), (lineno, value.to_string())) {
                return Err(ConfigError::new(Some(lineno), format!("'{key}' already set on line {first}")));
            }
        }
        Ok(Self { entries })
    }

    /// Sets a value programmatically, as if it had appeared in the file.
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), (0, value.into()));
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    pub fn line_of(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|(l, _)| *l).filter(|&l| l > 0)
    }

    pub fn error(&self, key: &str, msg: impl fmt::Display) -> ConfigError {
        ConfigError::new(self.line_of(key), format!("{key}: {msg}"))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| self.error(key, format!("cannot parse '{v}'"))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some("true" | "on" | "yes" | "1") => Ok(Some(true)),
            Some("false" | "off" | "no" | "0") => Ok(Some(false)),
            Some(v) => Err(self.error(key, format!("expected true or false, got '{v}'"))),
        }
    }

    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|item| {
                    let item = item.trim();
                    item.parse().map_err(|_| self.error(key, format!("cannot parse list item '{item}'")))
                })
                .collect::<Result<Vec<T>, _>>()
                .map(Some),
        }
    }
}
