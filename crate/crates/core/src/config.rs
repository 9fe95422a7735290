//! Flat `key=value` configuration files.
//!
//! One key per line, `#` starts a comment, blank lines are ignored. Keys are
//! consumed by the reader that understands them; whatever is left over when
//! [`KvConfig::finish`] is called is reported as an unknown key.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct KvConfig {
    entries: BTreeMap<String, (usize, String)>,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {line_no}: expected key=value, got `{line}`"))
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::config(format!("line {line_no}: empty key")));
            }
            if entries
                .insert(key.to_string(), (line_no, value.trim().to_string()))
                .is_some()
            {
                return Err(Error::config(format!("line {line_no}: duplicate key `{key}`")));
            }
        }
        Ok(Self { entries })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// Removes and returns the raw value for `key`.
    pub fn take_str(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|(_, v)| v)
    }

    pub fn require_str(&mut self, key: &str) -> Result<String> {
        self.take_str(key)
            .ok_or_else(|| Error::config(format!("missing required key `{key}`")))
    }

    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, v)) => v.parse::<T>().map(Some).map_err(|_| {
                Error::config(format!("line {line}: cannot parse value `{v}` for key `{key}`"))
            }),
        }
    }

    pub fn take_or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        Ok(self.take(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&mut self, key: &str) -> Result<T> {
        self.take(key)?
            .ok_or_else(|| Error::config(format!("missing required key `{key}`")))
    }

    /// Comma-separated list of values.
    pub fn take_list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, v)) => parse_list(&v)
                .map(Some)
                .map_err(|_| Error::config(format!("line {line}: bad list `{v}` for key `{key}`"))),
        }
    }

    pub fn require_list<T: FromStr>(&mut self, key: &str) -> Result<Vec<T>> {
        self.take_list(key)?
            .ok_or_else(|| Error::config(format!("missing required key `{key}`")))
    }

    pub fn take_bool(&mut self, key: &str) -> Result<Option<bool>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, v)) => match v.as_str() {
                "true" | "yes" | "1" => Ok(Some(true)),
                "false" | "no" | "0" => Ok(Some(false)),
                _ => Err(Error::config(format!(
                    "line {line}: expected boolean for key `{key}`, got `{v}`"
                ))),
            },
        }
    }

    /// Fails if any key was never consumed.
    pub fn finish(self) -> Result<()> {
        match self.entries.iter().next() {
            None => Ok(()),
            Some((key, (line, _))) => Err(Error::config(format!("line {line}: unknown key `{key}`"))),
        }
    }
}

pub(crate) fn parse_list<T: FromStr>(text: &str) -> std::result::Result<Vec<T>, ()> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| ()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_lists() {
        let mut cfg = KvConfig::parse("# header\nn = 5 # trailing\ngrid=0.1, 0.3\n\n").unwrap();
        assert_eq!(cfg.require::<usize>("n").unwrap(), 5);
        assert_eq!(cfg.require_list::<f64>("grid").unwrap(), vec![0.1, 0.3]);
        cfg.finish().unwrap();
    }

    #[test]
    fn unknown_key_is_named() {
        let cfg = KvConfig::parse("known=1\nmystery=2\n").unwrap();
        let mut cfg2 = cfg.clone();
        cfg2.take_str("known");
        let err = cfg2.finish().unwrap_err().to_string();
        assert!(err.contains("mystery"), "{err}");
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(KvConfig::parse("just a line").is_err());
        assert!(KvConfig::parse("a=1\na=2").is_err());
        let mut cfg = KvConfig::parse("n=abc").unwrap();
        assert!(cfg.take::<usize>("n").is_err());
    }
}
