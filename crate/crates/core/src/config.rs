//! Line-oriented `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys may repeat; list
//! keys (`junk_pattern`, `name_stop`) collect every occurrence, scalar keys
//! take the last one.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct KeyValueFile {
    path: PathBuf,
    entries: Vec<Entry>,
}

#[derive(Debug, Clone)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

impl KeyValueFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(path, &text)
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::parse(path, idx + 1, "expected `key = value`"));
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::parse(path, idx + 1, "empty key"));
            }
            entries.push(Entry {
                key: key.to_string(),
                value: value.trim().to_string(),
                line: idx + 1,
            });
        }
        Ok(KeyValueFile {
            path: path.to_path_buf(),
            entries,
        })
    }

    /// Last value given for `key`.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|e| e.key == key)
            .map(|e| e.value.as_str())
    }

    /// Every value given for `key`, in file order.
    pub fn get_all(&self, key: &str) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|e| e.key == key)
            .map(|e| e.value.as_str())
            .collect()
    }

    pub fn parse_value<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        let Some(entry) = self.entries.iter().rev().find(|e| e.key == key) else {
            return Ok(None);
        };
        entry.value.parse().map(Some).map_err(|e| {
            Error::parse(
                &self.path,
                entry.line,
                format!("bad value for `{key}`: {e}"),
            )
        })
    }

    /// Fails on the first key not in `known`.
    pub fn check_keys(&self, known: &[&str]) -> Result<()> {
        match self
            .entries
            .iter()
            .find(|e| !known.contains(&e.key.as_str()))
        {
            Some(e) => Err(Error::parse(
                &self.path,
                e.line,
                format!("unknown key `{}`", e.key),
            )),
            None => Ok(()),
        }
    }
}
