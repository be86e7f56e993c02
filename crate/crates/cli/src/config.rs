//! Config-file merging and run manifests.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Bad flags or config; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// The `[name]` table of a TOML config file, or an empty table.
pub fn load_section(path: Option<&Path>, name: &str) -> Result<toml::Table> {
    let Some(path) = path else {
        return Ok(toml::Table::new());
    };
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let mut doc: toml::Table = text.parse().map_err(|e| usage(format!("{}: {e}", path.display())))?;
    match doc.remove(name) {
        None => Ok(toml::Table::new()),
        Some(toml::Value::Table(t)) => Ok(t),
        Some(_) => Err(usage(format!("{}: [{name}] must be a table", path.display()))),
    }
}

fn to_table(value: &impl Serialize) -> Result<toml::Table> {
    match toml::Value::try_from(value).context("serializing settings")? {
        toml::Value::Table(t) => Ok(t),
        _ => unreachable!("settings serialize as tables"),
    }
}

/// Layers `base`, then the config section, then the flags that were set.
pub fn resolve<T>(base: toml::Table, section: toml::Table, flags: &impl Serialize) -> Result<T>
where
    T: DeserializeOwned + Serialize,
{
    let mut merged = base;
    merged.extend(section);
    merged.extend(to_table(flags)?);
    let keys: Vec<String> = merged.keys().cloned().collect();
    let value: T = toml::Value::Table(merged)
        .try_into()
        .map_err(|e: toml::de::Error| usage(e.message().to_string()))?;
    let known = to_table(&value)?;
    if let Some(k) = keys.iter().find(|k| !known.contains_key(*k)) {
        return Err(usage(format!("unknown setting `{k}`")));
    }
    Ok(value)
}

pub fn defaults_of(value: &impl Serialize) -> Result<toml::Table> {
    to_table(value)
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub seeds: BTreeMap<String, u64>,
    pub artifacts: BTreeMap<String, PathBuf>,
    pub config: toml::Table,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: &impl Serialize) -> Result<Self> {
        Ok(Self {
            tool: "spikeflag".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            seeds: BTreeMap::new(),
            artifacts: BTreeMap::new(),
            config: to_table(config)?,
        })
    }

    pub fn seed(mut self, name: &str, seed: u64) -> Self {
        self.seeds.insert(name.into(), seed);
        self
    }

    pub fn artifact(mut self, name: &str, path: &Path) -> Self {
        self.artifacts.insert(name.into(), path.to_path_buf());
        self
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        let text = toml::to_string(self).context("serializing run manifest")?;
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }
}

/// `out.ext` -> `out.ext.manifest.toml`
pub fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.toml");
    PathBuf::from(s)
}
