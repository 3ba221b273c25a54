//! Flat `key=value` configuration merged with command-line flags.
//!
//! Precedence, highest first: flag, `PMPL_SEED` (for `seed` only), config
//! file, built-in default.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use pmpl_core::{Error, Result};

pub const SEED_ENV: &str = "PMPL_SEED";

#[derive(Clone, Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

pub fn parse_config(text: &str, allowed: &[&str]) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("config line {}: expected key=value", i + 1)))?;
        let k = k.trim().trim_start_matches("--").to_string();
        if !allowed.contains(&k.as_str()) {
            return Err(Error::Argument(format!("config line {}: unknown key {k:?}", i + 1)));
        }
        out.insert(k, v.trim().to_string());
    }
    Ok(out)
}

impl Settings {
    /// Merges the layers. `flags` holds only flags given on the command line.
    pub fn build(
        config: Option<&Path>,
        allowed: &[&str],
        env_seed: Option<String>,
        flags: Vec<(&str, Option<String>)>,
    ) -> Result<Self> {
        let mut values = match config {
            Some(p) => parse_config(&fs::read_to_string(p)?, allowed)?,
            None => BTreeMap::new(),
        };
        if let Some(s) = env_seed {
            values.insert("seed".into(), s);
        }
        for (k, v) in flags {
            if let Some(v) = v {
                values.insert(k.to_string(), v);
            }
        }
        Ok(Settings { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| Error::Argument(format!("--{key} {v:?}: {e}"))),
        }
    }

    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.parse(key)?.unwrap_or(default))
    }
}
