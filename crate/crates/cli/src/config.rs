//! Run configuration: optional `key = value` file, overridden by flags.
//!
//! Keys are the long flag names (`batch-size`, `lr0`, ...). Blank lines and
//! lines starting with `#` are ignored. Every resolved value is recorded so
//! it can be written into output metadata.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Display};
use std::path::Path;
use std::str::FromStr;

use addernet::Error;

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, Error> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("config line {}: expected key=value", lineno + 1)))?;
        let k = k.trim().to_string();
        if k.is_empty() {
            return Err(Error::InvalidArgument(format!("config line {}: empty key", lineno + 1)));
        }
        if map.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(Error::InvalidArgument(format!("config key '{k}' given twice")));
        }
    }
    Ok(map)
}

#[derive(Debug, Default)]
pub struct Resolver {
    file: BTreeMap<String, String>,
    used: BTreeSet<String>,
    resolved: Vec<(String, String)>,
}

impl Resolver {
    pub fn new(path: Option<&Path>) -> Result<Self, Error> {
        let file = match path {
            Some(p) => parse_config(&std::fs::read_to_string(p)?)?,
            None => BTreeMap::new(),
        };
        Ok(Resolver {
            file,
            ..Default::default()
        })
    }

    pub fn from_map(file: BTreeMap<String, String>) -> Self {
        Resolver {
            file,
            ..Default::default()
        }
    }

    fn from_file<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, Error>
    where
        T::Err: Display,
    {
        let Some(text) = self.file.get(key) else {
            return Ok(None);
        };
        self.used.insert(key.to_string());
        text.parse()
            .map(Some)
            .map_err(|e| Error::InvalidArgument(format!("config key '{key}' = '{text}': {e}")))
    }

    /// Flag, else file, else `default`.
    pub fn value<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, Error>
    where
        T::Err: Display,
    {
        let from_file = self.from_file(key)?;
        let v = flag.or(from_file).unwrap_or(default);
        self.resolved.push((key.to_string(), v.to_string()));
        Ok(v)
    }

    /// Like [`Resolver::value`] with no default; the literal `none` in the
    /// file means unset.
    pub fn optional<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, Error>
    where
        T::Err: Display,
    {
        let from_file = match self.file.get(key).map(String::as_str) {
            Some("none") => {
                self.used.insert(key.to_string());
                None
            }
            _ => self.from_file(key)?,
        };
        let v = flag.or(from_file);
        self.resolved.push((
            key.to_string(),
            v.as_ref().map_or_else(|| "none".to_string(), ToString::to_string),
        ));
        Ok(v)
    }

    /// Records a derived value that has no flag of its own.
    pub fn note(&mut self, key: &str, value: impl Display) {
        self.resolved.push((key.to_string(), value.to_string()));
    }

    /// Resolved settings in resolution order; unknown file keys are an error.
    pub fn finish(self) -> Result<Vec<(String, String)>, Error> {
        let unknown: Vec<&String> = self.file.keys().filter(|k| !self.used.contains(*k)).collect();
        if !unknown.is_empty() {
            let names: Vec<&str> = unknown.iter().map(|s| s.as_str()).collect();
            return Err(Error::InvalidArgument(format!("unknown config keys: {}", names.join(", "))));
        }
        Ok(self.resolved)
    }
}

/// Comma-separated list; the empty string is the empty list.
#[derive(Clone, Debug, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(List(Vec::new()));
        }
        s.split(',')
            .map(|part| part.trim().parse::<T>().map_err(|e| format!("'{}': {e}", part.trim())))
            .collect::<Result<_, _>>()
            .map(List)
    }
}

impl<T: Display> Display for List<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}
