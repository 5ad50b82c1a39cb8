//! Resolution of run settings: flags, then `--config` file, then defaults.

use std::collections::BTreeSet;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use emflow::config::{parse_key_values, write_key_values};

use crate::files::read_text;

/// A setting a command understands, with its documented default.
#[derive(Debug, Clone, Copy)]
pub struct Key {
    pub name: &'static str,
    pub default: &'static str,
}

pub const fn key(name: &'static str, default: &'static str) -> Key {
    Key { name, default }
}

/// Keys written to manifests that are not settings. `input` is honoured when
/// no inputs are given on the command line; the others are ignored.
const RECORD_KEYS: [&str; 4] = ["command", "input", "produced", "duration_secs"];

#[derive(Debug, Clone)]
pub struct Settings {
    command: &'static str,
    values: Vec<(&'static str, String)>,
    config_inputs: Vec<PathBuf>,
}

impl Settings {
    /// `flags` holds the values given on the command line (None = not given).
    pub fn resolve(
        command: &'static str,
        schema: &[Key],
        config: Option<&Path>,
        flags: Vec<(&'static str, Option<String>)>,
    ) -> Result<Self> {
        let mut values: Vec<(&'static str, String)> = schema.iter().map(|k| (k.name, k.default.to_string())).collect();
        let mut config_inputs = Vec::new();
        if let Some(path) = config {
            let text = read_text(path)?;
            let pairs = parse_key_values(&text).with_context(|| format!("{}", path.display()))?;
            let mut seen = BTreeSet::new();
            for (k, v) in pairs {
                match k.as_str() {
                    "command" if v != command => {
                        bail!("{}: written by `{v}`, not `{command}`", path.display())
                    }
                    "input" => config_inputs.push(PathBuf::from(v)),
                    k if RECORD_KEYS.contains(&k) => {}
                    _ => {
                        let slot = values
                            .iter_mut()
                            .find(|(name, _)| *name == k)
                            .ok_or_else(|| anyhow!("{}: unknown setting `{k}` for {command}", path.display()))?;
                        if !seen.insert(k.clone()) {
                            bail!("{}: `{k}` given twice", path.display());
                        }
                        slot.1 = v;
                    }
                }
            }
        }
        for (name, value) in flags {
            if let Some(v) = value {
                let slot = values
                    .iter_mut()
                    .find(|(n, _)| *n == name)
                    .unwrap_or_else(|| panic!("flag `{name}` missing from the {command} schema"));
                slot.1 = v;
            }
        }
        Ok(Self {
            command,
            values,
            config_inputs,
        })
    }

    pub fn raw(&self, name: &str) -> &str {
        self.values
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| v.as_str())
            .unwrap_or_else(|| panic!("`{name}` missing from the {} schema", self.command))
    }

    pub fn get<T: FromStr>(&self, name: &str) -> Result<T>
    where
        T::Err: Display,
    {
        let raw = self.raw(name);
        raw.parse().map_err(|e| anyhow!("invalid value `{raw}` for {name}: {e}"))
    }

    /// Empty string means "not set".
    pub fn get_opt<T: FromStr>(&self, name: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        if self.raw(name).is_empty() {
            Ok(None)
        } else {
            self.get(name).map(Some)
        }
    }

    pub fn set(&mut self, name: &str, value: String) {
        if let Some(slot) = self.values.iter_mut().find(|(n, _)| *n == name) {
            slot.1 = value;
        }
    }

    /// Inputs from the command line, or else the ones recorded in the config.
    pub fn inputs(&self, cli: &[PathBuf]) -> Result<Vec<PathBuf>> {
        let inputs = if cli.is_empty() { self.config_inputs.clone() } else { cli.to_vec() };
        if inputs.is_empty() {
            bail!("no input files given");
        }
        Ok(inputs)
    }

    pub fn manifest(&self, inputs: &[PathBuf], produced: &[PathBuf], duration_secs: f64) -> String {
        let mut pairs: Vec<(&str, String)> = vec![("command", self.command.to_string())];
        pairs.extend(self.values.iter().map(|(k, v)| (*k, v.clone())));
        pairs.extend(inputs.iter().map(|p| ("input", p.display().to_string())));
        pairs.extend(produced.iter().map(|p| ("produced", p.display().to_string())));
        pairs.push(("duration_secs", format!("{duration_secs:.6}")));
        write_key_values(pairs)
    }
}

/// Parses `WxH`.
pub fn parse_dims(s: &str) -> Result<(usize, usize)> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| anyhow!("expected WxH, got `{s}`"))?;
    let w: usize = w.trim().parse().map_err(|_| anyhow!("bad width in `{s}`"))?;
    let h: usize = h.trim().parse().map_err(|_| anyhow!("bad height in `{s}`"))?;
    if w == 0 || h == 0 {
        bail!("dimensions must be positive, got `{s}`");
    }
    Ok((w, h))
}

pub fn opt_string<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(ToString::to_string)
}
