//! `key = value` run configuration.
//!
//! One setting per line, `#` starts a comment, blank lines are ignored.
//! Every key must be consumed by the command reading the file; leftovers are
//! reported as errors so typos never silently fall back to defaults.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug)]
pub struct RunConfig {
    /// key -> (value, 1-based line)
    entries: BTreeMap<String, (String, usize)>,
    /// directory relative paths are resolved against
    base_dir: PathBuf,
    used: RefCell<BTreeSet<String>>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                reason: format!("expected 'key = value', got '{content}'"),
            })?;
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::Config {
                    line,
                    reason: format!("bad key '{key}'"),
                });
            }
            if let Some((_, first)) = entries.insert(key.to_string(), (value.trim().to_string(), line)) {
                return Err(Error::Config {
                    line,
                    reason: format!("duplicate key '{key}' (first set on line {first})"),
                });
            }
        }
        Ok(RunConfig {
            entries,
            base_dir: PathBuf::from("."),
            used: RefCell::new(BTreeSet::new()),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    fn raw(&self, key: &str) -> Option<&(String, usize)> {
        self.used.borrow_mut().insert(key.to_string());
        self.entries.get(key)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => v.parse().map(Some).map_err(|e| Error::Config {
                line: *line,
                reason: format!("bad value '{v}' for '{key}': {e}"),
            }),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?.ok_or_else(|| Error::Config {
            line: 0,
            reason: format!("missing required key '{key}'"),
        })
    }

    /// `true`/`false`, `yes`/`no`, `1`/`0`.
    pub fn flag(&self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some((v, line)) => match v.as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(Error::Config {
                    line: *line,
                    reason: format!("'{key}' must be true or false, got '{v}'"),
                }),
            },
        }
    }

    /// Comma-separated list; empty when absent.
    pub fn list(&self, key: &str) -> Vec<String> {
        self.raw(key)
            .map(|(v, _)| v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
            .unwrap_or_default()
    }

    /// Path resolved against the config file's directory.
    pub fn path(&self, key: &str) -> Result<Option<PathBuf>> {
        Ok(self.raw(key).map(|(v, _)| self.base_dir.join(v)))
    }

    pub fn require_path(&self, key: &str) -> Result<PathBuf> {
        self.path(key)?.ok_or_else(|| Error::Config {
            line: 0,
            reason: format!("missing required key '{key}'"),
        })
    }

    /// Fails on the first key nobody asked for.
    pub fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        match self.entries.iter().find(|(k, _)| !used.contains(*k)) {
            Some((k, (_, line))) => Err(Error::Config {
                line: *line,
                reason: format!("unknown key '{k}'"),
            }),
            None => Ok(()),
        }
    }
}
