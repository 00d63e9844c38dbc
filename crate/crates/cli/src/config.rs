//! Flat `key = value` experiment configs.
//!
//! One assignment per line, `#` starts a comment, blank lines are ignored.
//! Keys are case-sensitive and may appear once. Every key must be in the
//! allowed set for the subcommand and kind; anything else is rejected before
//! a single replica runs.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", i + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(CliError::Config(format!("line {}: bad key `{key}`", i + 1)));
            }
            if value.is_empty() {
                return Err(CliError::Config(format!("line {}: `{key}` has no value", i + 1)));
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(CliError::Config(format!("line {}: duplicate key `{key}`", i + 1)));
            }
        }
        Ok(Self { entries })
    }

    pub fn from_map(entries: BTreeMap<String, String>) -> Self {
        Self { entries }
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    /// Fails on the first key not in `allowed`, listing what is accepted.
    pub fn check_keys(&self, context: &str, allowed: &[&str]) -> Result<()> {
        match self.entries.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(CliError::Config(format!(
                "unknown key `{k}` for {context}; accepted keys: {}",
                allowed.join(", ")
            ))),
            None => Ok(()),
        }
    }

    pub fn str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.str(key).map(|v| parse_value(key, v)).transpose()
    }

    pub fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>> {
        let raw = self
            .str(key)
            .ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))?;
        raw.split(',').map(|v| parse_value(key, v.trim())).collect()
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        match self.str(key) {
            None | Some("false") => Ok(false),
            Some("true") => Ok(true),
            Some(v) => Err(CliError::Config(format!("`{key}` must be true or false, got `{v}`"))),
        }
    }

    /// Law of `A` as `value:prob, value:prob, ...`, or a bare value for a
    /// point mass.
    pub fn law(&self, key: &str) -> Result<Vec<(f64, f64)>> {
        let raw = self
            .str(key)
            .ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))?;
        raw.split(',')
            .map(|atom| match atom.split_once(':') {
                Some((v, p)) => Ok((parse_value(key, v.trim())?, parse_value(key, p.trim())?)),
                None => Ok((parse_value(key, atom.trim())?, 1.0)),
            })
            .collect()
    }
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| CliError::Config(format!("cannot parse `{v}` for key `{key}`")))
}
