//! `key=value` configuration files. Keys are long option names without the
//! leading dashes; a value given on the command line always wins.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use crate::{CliError, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Config {
    values: HashMap<String, String>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Blank lines and lines starting with `#` are skipped.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut values = HashMap::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| CliError::Parse {
                path: source.to_string(),
                line: k as u64 + 1,
                message: format!("expected key=value, got {line:?}"),
            })?;
            values.insert(key.trim().trim_start_matches("--").to_string(), value.trim().to_string());
        }
        Ok(Self { values })
    }

    fn lookup<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| CliError::Validation(format!("config value {key}={raw}: {e}"))),
        }
    }

    /// The flag if given, else the config entry, else `None`.
    pub fn value<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.lookup(key),
        }
    }

    pub fn or<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.value(flag, key)?.unwrap_or(default))
    }

    pub fn required<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.value(flag, key)?
            .ok_or_else(|| CliError::Validation(format!("missing --{key} (give it as a flag or in the config file)")))
    }

    /// A switch is on if set on the command line or set to `true` in the file.
    pub fn switch(&self, flag: bool, key: &str) -> Result<bool> {
        Ok(flag || self.lookup::<bool>(key)?.unwrap_or(false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_is_flag_then_file_then_default() {
        let c = Config::parse("# rates\nalpha = 0.5\n\nseed=7\nsegment-by-month=true\n", "test").unwrap();
        assert_eq!(c.or(Some(0.1), "alpha", 1.0).unwrap(), 0.1);
        assert_eq!(c.or(None, "alpha", 1.0).unwrap(), 0.5);
        assert_eq!(c.or(None, "beta", 1.0).unwrap(), 1.0);
        assert_eq!(c.required::<u64>(None, "seed").unwrap(), 7);
        assert!(c.required::<u64>(None, "population").is_err());
        assert!(c.switch(false, "segment-by-month").unwrap());
        assert!(!c.switch(false, "other").unwrap());
    }

    #[test]
    fn malformed_lines_report_their_number() {
        match Config::parse("a=1\nnonsense\n", "cfg") {
            Err(CliError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let c = Config::parse("seed=abc", "cfg").unwrap();
        assert!(c.required::<u64>(None, "seed").is_err());
    }
}
