//! `key=value` config files and flag > file > default resolution.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{CliError, Result};

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::input(format!("line {}: expected key=value", i + 1)))?;
        let k = k.trim().replace('-', "_");
        if out.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(CliError::input(format!("line {}: duplicate key `{k}`", i + 1)));
        }
    }
    Ok(out)
}

/// Resolves settings and remembers every resolved value for the manifest.
#[derive(Debug, Default)]
pub struct Resolver {
    file: BTreeMap<String, String>,
    used: Vec<String>,
    resolved: BTreeMap<String, String>,
}

impl Resolver {
    pub fn new(config: Option<&Path>) -> Result<Self> {
        let file = match config {
            Some(p) => parse_config(&std::fs::read_to_string(p).map_err(|e| CliError::input(e).at(p))?)
                .map_err(|e| e.at(p))?,
            None => BTreeMap::new(),
        };
        Ok(Resolver {
            file,
            ..Default::default()
        })
    }

    fn file_value<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        self.used.push(key.to_string());
        match self.file.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| CliError::input(format!("config key `{key}`: {e}"))),
        }
    }

    pub fn get<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        let file = self.file_value(key)?;
        let v = flag.or(file).unwrap_or(default);
        self.resolved.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    pub fn path(&mut self, key: &str, flag: Option<PathBuf>) -> Result<Option<PathBuf>> {
        self.used.push(key.to_string());
        let v = flag.or_else(|| self.file.get(key).map(PathBuf::from));
        if let Some(p) = &v {
            self.resolved.insert(key.to_string(), p.display().to_string());
        }
        Ok(v)
    }

    pub fn required_path(&mut self, key: &str, flag: Option<PathBuf>) -> Result<PathBuf> {
        self.path(key, flag)?
            .ok_or_else(|| CliError::Usage(format!("missing required option --{}", key.replace('_', "-"))))
    }

    /// Like `required_path` but left out of the manifest, so reruns into
    /// different directories record the same settings.
    pub fn out_dir(&mut self, flag: Option<PathBuf>) -> Result<PathBuf> {
        self.used.push("out".to_string());
        flag.or_else(|| self.file.get("out").map(PathBuf::from))
            .ok_or_else(|| CliError::Usage("missing required option --out".into()))
    }

    /// Rejects config keys the subcommand does not understand.
    pub fn finish(self) -> Result<BTreeMap<String, String>> {
        if let Some(k) = self.file.keys().find(|k| !self.used.contains(k)) {
            return Err(CliError::input(format!("unknown config key `{k}`")));
        }
        Ok(self.resolved)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_beat_defaults() {
        let mut r = Resolver {
            file: parse_config("# run\niterations = 50\nalpha=2\n").unwrap(),
            ..Default::default()
        };
        assert_eq!(r.get("iterations", Some(7usize), 1).unwrap(), 7);
        assert_eq!(r.get("alpha", None, 1.0f64).unwrap(), 2.0);
        assert_eq!(r.get("seed", None, 9u64).unwrap(), 9);
        let m = r.finish().unwrap();
        assert_eq!(m["iterations"], "7");
        assert_eq!(m["alpha"], "2");
    }

    #[test]
    fn bad_lines_and_unknown_keys_are_rejected() {
        assert!(parse_config("iterations").is_err());
        assert!(parse_config("a=1\na=2").is_err());
        let r = Resolver {
            file: parse_config("colour=red").unwrap(),
            ..Default::default()
        };
        assert!(r.finish().is_err());
    }

    #[test]
    fn dashes_in_keys_are_normalized() {
        let m = parse_config("chib-samples=10").unwrap();
        assert_eq!(m["chib_samples"], "10");
    }
}
