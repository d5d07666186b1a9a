//! Declarative run settings. A TOML file may set any flag, either at the top
//! level or inside a table named after the subcommand; the table wins over
//! the top level and command-line flags win over both.
//!
//! ```toml
//! corpus = "data/corpus.jsonl"
//! seed = 42
//!
//! [generate]
//! strategy = "clip-nest-alt"
//! balance = "balanced"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{Context, Result};

/// A problem with flags or settings. Exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Default)]
pub struct Settings {
    top: toml::Table,
    section: toml::Table,
}

impl Settings {
    pub fn load(path: Option<&Path>, subcommand: &str) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut top: toml::Table = text.parse().map_err(|e| usage(format!("config {}: {e}", path.display())))?;
        let section = match top.remove(subcommand) {
            Some(toml::Value::Table(t)) => t,
            Some(_) => return Err(usage(format!("config key `{subcommand}` must be a table"))),
            None => toml::Table::new(),
        };
        Ok(Self { top, section })
    }

    fn value(&self, key: &str) -> Option<&toml::Value> {
        let alt = key.replace('-', "_");
        [&self.section, &self.top].into_iter().find_map(|t| t.get(key).or_else(|| t.get(&alt)))
    }

    fn string(&self, key: &str) -> Result<Option<String>> {
        match self.value(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s.clone())),
            Some(toml::Value::Integer(i)) => Ok(Some(i.to_string())),
            Some(toml::Value::Boolean(b)) => Ok(Some(b.to_string())),
            Some(other) => Err(usage(format!("config key `{key}`: expected a scalar, got {}", other.type_str()))),
        }
    }

    /// The flag if given, else the file value, parsed with `FromStr`.
    pub fn get<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.string(key)?.map(|s| s.parse::<T>().map_err(|e| usage(format!("config key `{key}`: {e}")))).transpose()
    }

    pub fn require<T>(&self, flag: Option<T>, key: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        self.get(flag, key)?.ok_or_else(|| usage(format!("missing --{key}")))
    }

    pub fn path(&self, flag: Option<PathBuf>, key: &str) -> Result<Option<PathBuf>> {
        self.get(flag, key)
    }

    pub fn require_path(&self, flag: Option<PathBuf>, key: &str) -> Result<PathBuf> {
        self.require(flag, key)
    }

    /// Repeatable flags: the command line replaces the file list.
    pub fn paths(&self, flags: Vec<PathBuf>, key: &str) -> Result<Vec<PathBuf>> {
        if !flags.is_empty() {
            return Ok(flags);
        }
        match self.value(key) {
            None => Ok(Vec::new()),
            Some(toml::Value::String(s)) => Ok(vec![PathBuf::from(s)]),
            Some(toml::Value::Array(items)) => items
                .iter()
                .map(|v| {
                    v.as_str().map(PathBuf::from).ok_or_else(|| usage(format!("config key `{key}`: expected strings")))
                })
                .collect(),
            Some(other) => Err(usage(format!("config key `{key}`: expected a list, got {}", other.type_str()))),
        }
    }
}

/// Parses with the core's `FromStr`, reporting failures as usage errors.
pub fn parse<T>(s: &str, what: &str) -> Result<T>
where
    T: FromStr,
    T::Err: fmt::Display,
{
    s.parse().map_err(|e| usage(format!("{what}: {e}")))
}
