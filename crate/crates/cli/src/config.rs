//! INI run configuration with `[problem]`, `[method]` and `[run]` sections.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;

use crate::CliError;

/// One section as an ordered key-value map.
#[derive(Debug, Clone, Default)]
pub struct Section {
    name: String,
    values: BTreeMap<String, String>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(key.to_string(), value.into());
    }

    fn invalid(&self, key: &str, reason: impl std::fmt::Display) -> CliError {
        CliError::Config(format!("[{}] {key}: {reason}", self.name))
    }

    pub fn require(&self, key: &str) -> Result<&str, CliError> {
        self.get(key).ok_or_else(|| self.invalid(key, "missing"))
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|e| self.invalid(key, format!("'{v}': {e}"))))
            .transpose()
    }

    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    /// Comma-separated list of numbers.
    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        let Some(raw) = self.get(key) else { return Ok(None) };
        raw.split(',')
            .map(|t| {
                let t = t.trim();
                match t.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(self.invalid(key, format!("'{t}' is not a finite number"))),
                }
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    /// A list of length `n`, broadcasting a single value.
    pub fn list_of(&self, key: &str, n: usize) -> Result<Option<Vec<f64>>, CliError> {
        match self.list(key)? {
            None => Ok(None),
            Some(v) if v.len() == 1 => Ok(Some(vec![v[0]; n])),
            Some(v) if v.len() == n => Ok(Some(v)),
            Some(v) => Err(self.invalid(key, format!("expected {n} values, found {}", v.len()))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Config {
    pub problem: Section,
    pub method: Section,
    pub run: Section,
    /// Directory of the config file; relative paths resolve against it.
    pub base: PathBuf,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: PathBuf) -> Result<Self, CliError> {
        let ini = Ini::load_from_str(text).map_err(|e| CliError::Config(format!("malformed config: {e}")))?;
        let mut sections: BTreeMap<String, Section> = ["problem", "method", "run"]
            .into_iter()
            .map(|n| {
                (
                    n.to_string(),
                    Section {
                        name: n.to_string(),
                        values: BTreeMap::new(),
                    },
                )
            })
            .collect();
        for (name, props) in ini.iter() {
            let Some(name) = name else {
                if props.iter().next().is_some() {
                    return Err(CliError::Config("settings must appear inside a section".into()));
                }
                continue;
            };
            let section = sections
                .get_mut(name)
                .ok_or_else(|| CliError::Config(format!("unknown section [{name}]")))?;
            for (k, v) in props.iter() {
                section.values.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        Ok(Self {
            problem: sections.remove("problem").unwrap(),
            method: sections.remove("method").unwrap(),
            run: sections.remove("run").unwrap(),
            base,
        })
    }

    pub fn resolve(&self, path: &str) -> PathBuf {
        let p = Path::new(path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }
}
