//! Flat `key = value` configuration file, consulted after flags and
//! `GENIUS_*` environment variables.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::ValueEnum;

use crate::Failure;

pub const DEFAULT_CONFIG_FILE: &str = "genius.toml";

/// Keys a config file may set; each mirrors the long flag of the same name.
const KEYS: &[&str] = &[
    "window",
    "rules",
    "store",
    "scenarios",
    "embedder",
    "embedder_endpoint",
    "embedder_dim",
    "combiner",
    "combiner_endpoint",
    "combiner_prompt",
    "vision",
    "vision_endpoint",
    "vision_map",
    "vision_prompt",
    "workers",
    "n",
    "format",
    "z_threshold",
    "host",
    "port",
    "cors_origin",
];

#[derive(Debug, Default)]
pub struct Config {
    source: Option<PathBuf>,
    values: BTreeMap<String, String>,
}

impl Config {
    /// Reads `explicit`, or `./genius.toml` when present, or nothing.
    pub fn load(explicit: Option<&Path>) -> Result<Self, Failure> {
        let path = match explicit {
            Some(p) => p.to_path_buf(),
            None => {
                let p = PathBuf::from(DEFAULT_CONFIG_FILE);
                if !p.is_file() {
                    return Ok(Self::default());
                }
                p
            }
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    fn parse(text: &str, path: PathBuf) -> Result<Self, Failure> {
        let table: toml::Table = text
            .parse()
            .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        let mut values = BTreeMap::new();
        for (key, value) in table {
            if !KEYS.contains(&key.as_str()) {
                return Err(Failure::Usage(format!(
                    "{}: unknown key {key:?}",
                    path.display()
                )));
            }
            let text = match value {
                toml::Value::String(s) => s,
                toml::Value::Integer(i) => i.to_string(),
                toml::Value::Float(f) => f.to_string(),
                toml::Value::Boolean(b) => b.to_string(),
                other => {
                    return Err(Failure::Usage(format!(
                        "{}: {key} must be a plain value, got {}",
                        path.display(),
                        other.type_str()
                    )))
                }
            };
            values.insert(key, text);
        }
        Ok(Self {
            source: Some(path),
            values,
        })
    }

    fn invalid(&self, key: &str, reason: impl Display) -> Failure {
        let file = self
            .source
            .as_ref()
            .map_or_else(String::new, |p| format!("{}: ", p.display()));
        Failure::Usage(format!("{file}{key}: {reason}"))
    }

    /// `flag` if given, else the parsed config value, else `None`.
    pub fn pick<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, Failure>
    where
        T: FromStr,
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.values
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| self.invalid(key, e)))
            .transpose()
    }

    pub fn pick_or<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, Failure>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.pick(flag, key)?.unwrap_or(default))
    }

    /// Like [`pick`](Self::pick) but fails when no source provides a value.
    pub fn require<T>(&self, flag: Option<T>, key: &str) -> Result<T, Failure>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.pick(flag, key)?.ok_or_else(|| {
            Failure::Usage(format!(
                "--{} is required (flag, GENIUS_{} or {DEFAULT_CONFIG_FILE})",
                key.replace('_', "-"),
                key.to_ascii_uppercase()
            ))
        })
    }

    pub fn pick_enum<T: ValueEnum>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, Failure> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.values.get(key) {
            Some(v) => T::from_str(v, true).map_err(|e| self.invalid(key, e)),
            None => Ok(default),
        }
    }

    /// Comma-separated list from the config, when the flag list is empty.
    pub fn pick_list(&self, flag: Vec<String>, key: &str) -> Vec<String> {
        if !flag.is_empty() {
            return flag;
        }
        self.values
            .get(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            })
            .unwrap_or_default()
    }
}
