//! Optional key=value config files mirroring the command-line flags.
//! Precedence: explicit flag, then config file, then built-in default.

use anyhow::{bail, Result};
use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    map: HashMap<String, String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)?;
        let mut map = HashMap::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!("{}:{}: expected key=value, got {raw:?}", path.display(), ln + 1);
            };
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(FileConfig { map })
    }

    pub fn resolve<T: FromStr + Clone>(&self, cli: Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = cli {
            return Ok(v);
        }
        match self.map.get(key) {
            Some(raw) => match raw.parse() {
                Ok(v) => Ok(v),
                Err(e) => bail!("config key {key}: {e}"),
            },
            None => Ok(default),
        }
    }
}
