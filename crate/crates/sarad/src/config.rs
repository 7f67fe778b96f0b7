//! Flag resolution. Every option can come from three places, in order of
//! precedence: the command line, a `key = value` config file, and the
//! built-in default. Config keys may be scoped to a subcommand
//! (`detect.window = 9`) or bare (`window = 9`); scoped keys win. One
//! config file can serve several subcommands, so unrecognized keys are
//! ignored rather than rejected.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::parser::ValueSource;
use clap::ArgMatches;

use crate::error::{CliError, Result};
use crate::kv::KeyValueFile;

pub struct FileConfig {
    file: Option<KeyValueFile>,
}

impl FileConfig {
    pub fn none() -> Self {
        Self { file: None }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self {
            file: Some(KeyValueFile::read(path)?),
        })
    }

    fn lookup(&self, scope: &str, flag: &str) -> Option<(&str, usize, &Path)> {
        let file = self.file.as_ref()?;
        let scoped = format!("{scope}.{flag}");
        for key in [scoped.as_str(), flag] {
            if let Ok((value, line)) = file.require_at(key) {
                return Some((value, line, file.path()));
            }
        }
        None
    }
}

enum Source {
    Cli,
    File(PathBuf, usize),
    Default,
}

pub struct Resolver<'a> {
    matches: &'a ArgMatches,
    file: &'a FileConfig,
    scope: &'a str,
}

impl<'a> Resolver<'a> {
    pub fn new(matches: &'a ArgMatches, file: &'a FileConfig, scope: &'a str) -> Self {
        Self {
            matches,
            file,
            scope,
        }
    }

    /// True when the flag was given on the command line itself.
    pub fn was_set(&self, flag: &str) -> bool {
        self.matches.value_source(flag) == Some(ValueSource::CommandLine)
    }

    /// True when the value came from the command line or the config
    /// file rather than the built-in default.
    pub fn configured(&self, flag: &str) -> bool {
        !matches!(self.resolve(flag).1, Source::Default)
    }

    fn resolve(&self, flag: &str) -> (String, Source) {
        let cli = self
            .matches
            .get_one::<String>(flag)
            .expect("flags always have defaults");
        if self.was_set(flag) {
            return (cli.clone(), Source::Cli);
        }
        if let Some((value, line, path)) = self.file.lookup(self.scope, flag) {
            return (value.to_string(), Source::File(path.to_path_buf(), line));
        }
        (cli.clone(), Source::Default)
    }

    pub fn raw(&self, flag: &str) -> String {
        self.resolve(flag).0
    }

    pub fn get<T: FromStr>(&self, flag: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let (raw, source) = self.resolve(flag);
        raw.parse().map_err(|e| match source {
            Source::File(path, line) => CliError::Parse {
                path,
                line,
                message: format!("{flag}: bad value `{raw}`: {e}"),
            },
            _ => CliError::Usage(format!("--{flag}: bad value `{raw}`: {e}")),
        })
    }

    /// Paths resolve against the output directory unless absolute, so a
    /// rerun can name artifacts without repeating the directory.
    pub fn path_in(&self, flag: &str, out: &Path) -> PathBuf {
        resolve_path(out, &self.raw(flag))
    }

    /// Like [`path_in`](Self::path_in) but an empty value means "not given".
    pub fn opt_path_in(&self, flag: &str, out: &Path) -> Option<PathBuf> {
        let raw = self.raw(flag);
        if raw.is_empty() {
            None
        } else {
            Some(resolve_path(out, &raw))
        }
    }
}

pub fn resolve_path(out: &Path, raw: &str) -> PathBuf {
    let path = Path::new(raw);
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        out.join(path)
    }
}
