//! Flat `key=value` configuration files.
//!
//! One setting per line, `#` starts a comment, keys use the long flag names
//! without the leading dashes (`sigma1 = 0.05`, `k-alpha = 1`). Command-line
//! flags take precedence. Keys that the running subcommand does not read are
//! rejected.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

#[derive(Debug, Default)]
pub struct ConfigFile {
    entries: BTreeMap<String, (usize, String)>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value", i + 1)))?;
            let key = key.trim().replace('_', "-");
            if entries.insert(key.clone(), (i + 1, value.trim().to_string())).is_some() {
                return Err(CliError::Usage(format!("config line {}: duplicate key `{key}`", i + 1)));
            }
        }
        Ok(Self { entries })
    }

    /// Takes `key` out of the file, parsed as `T`.
    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, value)) => value
                .parse()
                .map(Some)
                .map_err(|e| CliError::Usage(format!("config line {line}: bad value for `{key}`: {e}"))),
        }
    }

    /// The command-line value if given, else the file value, else `default`.
    /// The file entry is consumed either way.
    pub fn resolve<T: FromStr>(&mut self, key: &str, cli: Option<T>, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let file = self.take(key)?;
        Ok(cli.or(file).unwrap_or(default))
    }

    /// As [`resolve`](Self::resolve) with no default.
    pub fn resolve_opt<T: FromStr>(&mut self, key: &str, cli: Option<T>) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let file = self.take(key)?;
        Ok(cli.or(file))
    }

    /// Fails if any key was not consumed.
    pub fn finish(self) -> Result<(), CliError> {
        match self.entries.into_iter().next() {
            None => Ok(()),
            Some((key, (line, _))) => Err(CliError::Usage(format!(
                "config line {line}: unknown key `{key}` for this subcommand"
            ))),
        }
    }
}
