//! Key-value configuration text: the dialect used by scene configs and
//! tracker configs.
//!
//! One `key = value` pair per line; blank lines and lines starting with `#`
//! are ignored; keys are word-like (`[A-Za-z0-9_.]`), values are free text
//! up to the end of line. Duplicate keys are an error (they are invariably
//! typos). Emission preserves insertion order, so parse → emit is a
//! fixpoint on well-formed input modulo comments and spacing.

use super::{FormatError};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

/// An ordered key-value document with typed, line-aware accessors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    /// (key, value, 1-based source line — 0 for programmatic entries).
    entries: Vec<(String, String, usize)>,
    index: BTreeMap<String, usize>,
}

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses a document, rejecting malformed lines and duplicate keys.
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let mut kv = KeyValues::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(FormatError::parse(
                    i + 1,
                    format!("expected 'key = value', got {line:?}"),
                ));
            };
            let key = key.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.') {
                return Err(FormatError::parse(i + 1, format!("bad key {key:?}")));
            }
            if kv.index.contains_key(key) {
                return Err(FormatError::parse(i + 1, format!("duplicate key '{key}'")));
            }
            kv.insert_at(key, value.trim(), i + 1);
        }
        Ok(kv)
    }

    fn insert_at(&mut self, key: &str, value: &str, line: usize) {
        self.index.insert(key.to_string(), self.entries.len());
        self.entries.push((key.to_string(), value.to_string(), line));
    }

    /// Appends (or overwrites) a key with a string value.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        match self.index.get(key) {
            Some(&i) => self.entries[i].1 = value.to_string(),
            None => self.insert_at(key, &value.to_string(), 0),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.index.get(key).map(|&i| self.entries[i].1.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _, _)| k.as_str())
    }

    /// Typed lookup: `Ok(None)` when absent, parse failures name the line.
    pub fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, FormatError>
    where
        T::Err: std::fmt::Display,
    {
        let Some(&i) = self.index.get(key) else {
            return Ok(None);
        };
        let (_, value, line) = &self.entries[i];
        value.parse().map(Some).map_err(|e| {
            FormatError::parse(*line, format!("key '{key}': cannot parse {value:?}: {e}"))
        })
    }

    /// Typed lookup of a required key.
    pub fn require<T: FromStr>(&self, key: &str) -> Result<T, FormatError>
    where
        T::Err: std::fmt::Display,
    {
        self.opt(key)?
            .ok_or_else(|| FormatError::MissingKey(key.to_string()))
    }

    /// Typed lookup with a default for absent keys.
    pub fn opt_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, FormatError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.opt(key)?.unwrap_or(default))
    }

    /// A comma-separated list value, parsed element-wise.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, FormatError>
    where
        T::Err: std::fmt::Display,
    {
        let Some(&i) = self.index.get(key) else {
            return Ok(None);
        };
        let (_, value, line) = &self.entries[i];
        value
            .split(',')
            .map(|s| {
                s.trim().parse().map_err(|e| {
                    FormatError::parse(
                        *line,
                        format!("key '{key}': cannot parse element {:?}: {e}", s.trim()),
                    )
                })
            })
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }

    /// Serializes in insertion order, one pair per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v, _) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}
