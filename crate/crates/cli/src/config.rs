//! Flat `key = value` settings merged from a preset, a file and flags.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("{origin}:{}: expected `key = value`", i + 1))
            })?;
            let k = k.trim();
            if k.is_empty() {
                return Err(CliError::Usage(format!("{origin}:{}: empty key", i + 1)));
            }
            values.insert(k.to_string(), v.trim().to_string());
        }
        Ok(Config { values })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| {
            CliError::Core(hyperdetect::Error::Io {
                path: path.to_path_buf(),
                source,
            })
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Entries of `other` override ours.
    pub fn merge(&mut self, other: Config) {
        self.values.extend(other.values);
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    /// Rejects keys the command does not understand.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<(), CliError> {
        let allowed: BTreeSet<&str> = allowed.iter().copied().collect();
        let unknown: Vec<&str> = self
            .values
            .keys()
            .map(String::as_str)
            .filter(|k| !allowed.contains(k))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(CliError::Usage(format!("unknown config keys: {}", unknown.join(", "))))
        }
    }

    pub fn str(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn required(&self, key: &str) -> Result<&str, CliError> {
        self.str(key)
            .ok_or_else(|| CliError::Usage(format!("missing required setting `{key}`")))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.str(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| CliError::Usage(format!("bad value `{v}` for `{key}`: {e}"))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn floats(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        match self.str(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .map_err(|e| CliError::Usage(format!("bad number `{p}` in `{key}`: {e}")))
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
        }
    }

    /// Sorted `key = value` lines.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

/// Settings pinned by a named preset for one subcommand.
pub fn preset(name: &str, command: &str) -> Result<Config, CliError> {
    let text = match (name, command) {
        ("paper-main", "generate") => {
            "pixels = 8000\nbands = 826\ndecimate = 3\nendmember_count = 3\nnonlinear_fraction = 0.5\n\
             family = gbm\neta_d = 0.5\nnoise_variance = 0.001\nabundance = fixed\nalpha = 0.6,0.4,0.1\n\
             width = 100\nheight = 80\n"
        }
        ("paper-main", "detect") => "pfa = 0.05\n",
        ("paper-main", "pipeline") => "pfa = 0.01\n",
        ("paper-main", "extract") => "method = iterative\nendmember_count = 3\n",
        ("paper-roc", "generate") => {
            "pixels = 2000\nbands = 100\nendmember_count = 3\nnonlinear_fraction = 0.5\nfamily = gbm\n\
             eta_d = 0.5\nsnr_db = 21\nabundance = fixed\nalpha = 0.6,0.4,0.1\n"
        }
        ("paper-roc", "detect") => "pfa = 0.1\n",
        ("paper-roc", "pipeline") => "pfa = 0.01\n",
        ("paper-extract", "generate") => {
            "pixels = 2000\nbands = 826\ndecimate = 3\nendmember_count = 3\nnonlinear_fraction = 0.5\n\
             family = gbm\neta_d = 0.5\nsnr_db = 21\nabundance = uniform\n"
        }
        ("paper-extract", "extract") => {
            "method = iterative\nendmember_count = 3\npfa = 0.05\nmax_iterations = 10\n\
             epsilon = 0.05\nrelax = 0.9\n"
        }
        ("paper-main" | "paper-roc" | "paper-extract", _) => "",
        _ => return Err(CliError::Usage(format!("unknown preset `{name}`"))),
    };
    Config::parse(text, name)
}
