//! Scenario configuration: TOML with sections, flattened to `section.key`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use sha2::{Digest, Sha256};
use toml::Value;

use crate::error::{Error, Result};

fn config_error(path: impl Into<String>, msg: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        msg: msg.into(),
    }
}

/// Flat `section.key → value` map. Keys introduced by a file or an override
/// are remembered as explicit.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, Value>,
    explicit: BTreeSet<String>,
}

impl Config {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| config_error(origin, e.message().to_string()))?;
        let mut entries = BTreeMap::new();
        flatten("", table, &mut entries)?;
        Ok(Self {
            entries,
            explicit: BTreeSet::new(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_error(path.display().to_string(), e.to_string()))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.get(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn is_explicit(&self, key: &str) -> bool {
        self.explicit.contains(key)
    }

    /// Replaces `key` unconditionally; used for derived values.
    pub fn insert(&mut self, key: &str, value: Value) {
        self.entries.insert(key.to_string(), value);
    }

    /// Applies every entry of `other`. Keys must already exist here and keep
    /// their type (integers may fill float fields).
    pub fn overlay(&mut self, other: &Config) -> Result<()> {
        for (k, v) in &other.entries {
            self.assign(k, v.clone())?;
        }
        Ok(())
    }

    /// Applies a `key=value` override; the value is read as a TOML literal and
    /// falls back to a bare string.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| config_error(assignment, "override must have the form key=value"))?;
        let key = key.trim();
        let raw = raw.trim();
        let value = format!("v = {raw}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(raw.to_string()));
        self.assign(key, value)
    }

    fn assign(&mut self, key: &str, value: Value) -> Result<()> {
        let current = self.entries.get(key).ok_or_else(|| config_error(key, "unknown key"))?;
        let value = match (current, value) {
            (Value::Float(_), Value::Integer(i)) => Value::Float(i as f64),
            (c, v) if c.same_type(&v) => v,
            (c, v) => {
                return Err(config_error(
                    key,
                    format!("expected {}, got {}", c.type_str(), v.type_str()),
                ))
            }
        };
        self.entries.insert(key.to_string(), value);
        self.explicit.insert(key.to_string());
        Ok(())
    }

    /// One `key = value` line per entry in key order.
    pub fn canonical(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        format!("{:x}", Sha256::digest(self.canonical().as_bytes()))
    }

    fn value(&self, key: &str) -> Result<&Value> {
        self.entries.get(key).ok_or_else(|| config_error(key, "missing key"))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        match self.value(key)? {
            Value::Float(x) if x.is_finite() => Ok(*x),
            Value::Integer(i) => Ok(*i as f64),
            v => Err(config_error(key, format!("expected a finite number, got {v}"))),
        }
    }

    pub fn i64(&self, key: &str) -> Result<i64> {
        match self.value(key)? {
            Value::Integer(i) => Ok(*i),
            v => Err(config_error(key, format!("expected an integer, got {v}"))),
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        let i = self.i64(key)?;
        usize::try_from(i).map_err(|_| config_error(key, format!("expected a non-negative integer, got {i}")))
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        let i = self.i64(key)?;
        u64::try_from(i).map_err(|_| config_error(key, format!("expected a non-negative integer, got {i}")))
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        match self.value(key)? {
            Value::Boolean(b) => Ok(*b),
            v => Err(config_error(key, format!("expected a boolean, got {v}"))),
        }
    }

    pub fn str(&self, key: &str) -> Result<&str> {
        match self.value(key)? {
            Value::String(s) => Ok(s),
            v => Err(config_error(key, format!("expected a string, got {v}"))),
        }
    }

    pub fn usize_list(&self, key: &str) -> Result<Vec<usize>> {
        let Value::Array(items) = self.value(key)? else {
            return Err(config_error(key, "expected an array of integers"));
        };
        items
            .iter()
            .enumerate()
            .map(|(k, v)| match v {
                Value::Integer(i) if *i >= 0 => Ok(*i as usize),
                _ => Err(config_error(format!("{key}[{k}]"), format!("expected a non-negative integer, got {v}"))),
            })
            .collect()
    }

    /// Error helper carrying this key's path.
    pub fn invalid(&self, key: &str, msg: impl Into<String>) -> Error {
        config_error(key, msg)
    }
}

fn flatten(prefix: &str, table: toml::Table, out: &mut BTreeMap<String, Value>) -> Result<()> {
    for (k, v) in table {
        let key = if prefix.is_empty() { k } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out)?,
            Value::Datetime(_) => return Err(config_error(key, "datetimes are not supported")),
            v => {
                out.insert(key, v);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "[model]\nsites = 16\nbeta = 1.0\npreset = \"integrable\"\n[bins]\ncounts = [1, 8]\n";

    #[test]
    fn flattens_sections() {
        let c = Config::parse(BASE, "base").unwrap();
        assert_eq!(c.usize("model.sites").unwrap(), 16);
        assert_eq!(c.str("model.preset").unwrap(), "integrable");
        assert_eq!(c.usize_list("bins.counts").unwrap(), vec![1, 8]);
    }

    #[test]
    fn overrides_are_typed() {
        let mut c = Config::parse(BASE, "base").unwrap();
        c.set("model.beta=2").unwrap();
        assert_eq!(c.get("model.beta"), Some(&Value::Float(2.0)));
        c.set("model.preset=non_integrable").unwrap();
        assert_eq!(c.str("model.preset").unwrap(), "non_integrable");
        assert!(c.is_explicit("model.preset"));
        match c.set("model.sites=1.5") {
            Err(Error::Config { path, .. }) => assert_eq!(path, "model.sites"),
            other => panic!("{other:?}"),
        }
        match c.set("model.site=3") {
            Err(Error::Config { path, .. }) => assert_eq!(path, "model.site"),
            other => panic!("{other:?}"),
        }
        assert!(c.set("no_equals").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = Config::parse(BASE, "a").unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.set("model.sites=8").unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn negative_integers_rejected_for_counts() {
        let mut c = Config::parse(BASE, "base").unwrap();
        c.set("model.sites=-3").unwrap();
        assert!(c.usize("model.sites").is_err());
    }
}
