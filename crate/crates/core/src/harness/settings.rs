use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Flat `key = value` settings shared by config files and CLI flags.
///
/// Keys are the long flag names without dashes; `_` and `-` are
/// interchangeable. Blank lines and lines starting with `#` are ignored.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    entries: BTreeMap<String, String>,
    source: Option<PathBuf>,
}

fn normalize(key: &str) -> String {
    key.trim().trim_start_matches("--").replace('_', "-")
}

fn parse_value<T>(key: &str, v: &str) -> Result<T>
where
    T: FromStr,
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| {
        let e = e.to_string();
        // library parse errors already carry their category prefix
        let e = e.strip_prefix("usage error: ").unwrap_or(&e).to_string();
        Error::Usage(format!("invalid value '{v}' for '{}': {e}", normalize(key)))
    })
}

impl Settings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str, source: Option<&Path>) -> Result<Self> {
        let mut out = Settings {
            entries: BTreeMap::new(),
            source: source.map(Path::to_path_buf),
        };
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Parse {
                    path: out.source.clone().unwrap_or_default(),
                    line: idx as u64 + 1,
                    message: format!("expected key = value, found '{line}'"),
                });
            };
            out.entries.insert(normalize(k), v.trim().to_string());
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, Some(path))
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(normalize(key), value.into());
    }

    /// Entries of `other` replace ours.
    pub fn merge(&mut self, other: &Settings) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(&normalize(key))
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(&normalize(key)).map(String::as_str)
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        self.raw(key).map(|v| parse_value(key, v)).transpose()
    }

    pub fn require<T>(&self, key: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        self.get(key)?
            .ok_or_else(|| Error::Usage(format!("missing required setting '{}'", normalize(key))))
    }

    pub fn list<T>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        self.raw(key)
            .map(|v| v.split(',').map(|x| parse_value(key, x.trim())).collect())
            .transpose()
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        match self.raw(key) {
            None => Ok(false),
            Some("true" | "yes" | "1" | "on" | "") => Ok(true),
            Some("false" | "no" | "0" | "off") => Ok(false),
            Some(v) => Err(Error::Usage(format!("invalid boolean '{v}' for '{}'", normalize(key)))),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// `key=value` pairs in key order, for provenance headers.
    pub fn render(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_override() {
        let mut s = Settings::parse("# comment\nn = 4000\nd_grid=1,2, 5\nmethod=haar\n", None).unwrap();
        assert_eq!(s.require::<usize>("n").unwrap(), 4000);
        assert_eq!(s.list::<f64>("d-grid").unwrap(), Some(vec![1.0, 2.0, 5.0]));
        let mut flags = Settings::new();
        flags.set("--method", "srht");
        s.merge(&flags);
        assert_eq!(s.raw("method"), Some("srht"));
        assert!(s.get::<usize>("p").unwrap().is_none());
        assert!(matches!(s.require::<usize>("p"), Err(Error::Usage(_))));
        assert!(matches!(s.get::<usize>("method"), Err(Error::Usage(_))));
    }

    #[test]
    fn bad_line_reports_position() {
        match Settings::parse("n=1\nnonsense\n", Some(Path::new("x.cfg"))) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }
}
