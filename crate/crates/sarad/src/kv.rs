//! Plain-text key=value files: one `key = value` pair per line, `#`
//! comments, blank lines ignored. Keys may repeat; order is kept.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{io_err, CliError, Result};

#[derive(Debug, Clone)]
pub struct KeyValueFile {
    path: PathBuf,
    entries: Vec<(String, String, usize)>,
}

impl KeyValueFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::parse(path, &text)
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| CliError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            entries.push((key.trim().to_string(), value.trim().to_string(), i + 1));
        }
        Ok(Self {
            path: path.to_path_buf(),
            entries,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Last value for the key, so later lines override earlier ones.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _, _)| k == key)
            .map(|(_, v, _)| v.as_str())
    }

    /// Every occurrence of the key, in file order, with line numbers.
    pub fn all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = (&'a str, usize)> {
        self.entries
            .iter()
            .filter(move |(k, _, _)| k == key)
            .map(|(_, v, line)| (v.as_str(), *line))
    }

    pub fn keys(&self) -> impl Iterator<Item = (&str, usize)> {
        self.entries.iter().map(|(k, _, line)| (k.as_str(), *line))
    }

    /// Value for a required key, or an error naming the file.
    pub fn require(&self, key: &str) -> Result<&str> {
        self.require_at(key).map(|(value, _)| value)
    }

    /// Required value plus the line it came from, for error reporting.
    pub fn require_at(&self, key: &str) -> Result<(&str, usize)> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _, _)| k == key)
            .map(|(_, v, line)| (v.as_str(), *line))
            .ok_or_else(|| CliError::Format {
                path: self.path.clone(),
                message: format!("missing required key `{key}`"),
            })
    }

    pub fn parse_err(&self, line: usize, message: impl Into<String>) -> CliError {
        CliError::Parse {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }
}

/// Parses one whitespace-separated field, naming the key on failure.
pub fn parse_field<T: FromStr>(file: &KeyValueFile, line: usize, key: &str, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse()
        .map_err(|e| file.parse_err(line, format!("{key}: bad value `{raw}`: {e}")))
}
