//! Config files, flag overlays and output helpers shared by the verbs.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

/// A config problem the user can fix: bad keys, bad values, missing inputs.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

/// Output format of the main tabular artifact.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize, clap::ValueEnum,
)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

fn set_path(target: &mut Map<String, Value>, key: &str, value: Value) {
    match key.split_once('.') {
        None => {
            target.insert(key.to_string(), value);
        }
        Some((head, rest)) => {
            let slot = target
                .entry(head.to_string())
                .or_insert_with(|| Value::Object(Map::new()));
            if !slot.is_object() {
                *slot = Value::Object(Map::new());
            }
            set_path(slot.as_object_mut().unwrap(), rest, value);
        }
    }
}

/// Merge non-null flag values over the config file (or the defaults) and
/// deserialize the result. Flag keys may be dotted paths into nested
/// objects.
pub fn resolve<C, F>(file: Option<&Path>, flags: &F) -> Result<C>
where
    C: DeserializeOwned + Serialize + Default,
    F: Serialize,
{
    let mut base = match file {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str::<Value>(&text)
                .map_err(|e| config_error(format!("config {}: {e}", path.display())))?
        }
        None => serde_json::to_value(C::default())?,
    };
    let Value::Object(map) = &mut base else {
        return Err(config_error("config file must hold a JSON object"));
    };
    if let Value::Object(overrides) = serde_json::to_value(flags)? {
        for (k, v) in overrides {
            if !v.is_null() {
                set_path(map, &k, v);
            }
        }
    }
    serde_json::from_value(base).map_err(|e| config_error(format!("invalid config: {e}")))
}

pub struct Output {
    pub dir: PathBuf,
}

impl Output {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn text(&self, name: &str, text: &str) -> Result<PathBuf> {
        let path = self.path(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    /// Write rows of already formatted cells.
    pub fn csv(&self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<PathBuf> {
        let path = self.path(name);
        let mut w =
            csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(path)
    }

    /// Echo the resolved config so the run can be repeated with `--config`.
    pub fn effective_config<C: Serialize>(&self, cfg: &C) -> Result<PathBuf> {
        self.json("effective_config.json", cfg)
    }
}

pub fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

pub fn num(v: f64) -> String {
    v.to_string()
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn require<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| config_error(format!("missing required input `{what}`")))
}
