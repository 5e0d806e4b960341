//! Flat `key = value` configuration text.
//!
//! Blank lines and `#` comments are ignored. Lists are comma separated.
//! Every value remembers the line it came from so that validation errors
//! can point at it.

use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::str::FromStr;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::Parse { line, msg: format!("expected `key = value`, got `{content}`") });
            };
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::Parse { line, msg: "empty key".into() });
            }
            if let Some((prev, _)) = entries.insert(key.clone(), (line, value.trim().to_string())) {
                return Err(Error::Parse { line, msg: format!("duplicate key `{key}` (first set on line {prev})") });
            }
        }
        Ok(Self { entries })
    }

    pub fn insert(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), (0, value.into()));
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    /// Line on which `key` was set (0 when inserted programmatically).
    pub fn line(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |(l, _)| *l)
    }

    pub fn error(&self, key: &str, msg: impl Into<String>) -> Error {
        Error::Parse { line: self.line(key), msg: format!("`{key}`: {}", msg.into()) }
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Parse { line: *line, msg: format!("`{key}`: cannot parse `{v}`") }),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .ok_or_else(|| Error::Parse { line: 0, msg: format!("missing required key `{key}`") })
    }

    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        let Some((line, v)) = self.entries.get(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|_| Error::Parse { line: *line, msg: format!("`{key}`: cannot parse list item `{s}`") })
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_values_lists_and_comments() {
        let kv = KeyValues::parse("# header\npreset = uniform\nS=2 # inline\n\nN = 8, 12,16\n").unwrap();
        assert_eq!(kv.raw("preset"), Some("uniform"));
        assert_eq!(kv.get::<usize>("S").unwrap(), Some(2));
        assert_eq!(kv.get_list::<usize>("N").unwrap(), Some(vec![8, 12, 16]));
        assert_eq!(kv.line("N"), 5);
        assert_eq!(kv.get::<f64>("beta").unwrap(), None);
    }

    #[test]
    fn reports_line_numbers() {
        let err = KeyValues::parse("a = 1\nbogus line\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let kv = KeyValues::parse("a = 1\nb = x\n").unwrap();
        let err = kv.get::<f64>("b").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(matches!(KeyValues::parse("a=1\na=2").unwrap_err(), Error::Parse { line: 2, .. }));
    }
}
