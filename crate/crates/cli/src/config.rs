use std::path::{Path, PathBuf};

use levelforge_core::render::RenderMode;
use levelforge_core::{Error, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Declarative run configuration. Command-line flags take precedence over
/// values read from the file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub mapping: Option<PathBuf>,
    pub table: Option<PathBuf>,
    pub archive: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub metric_sets: Option<PathBuf>,
    pub render: Option<RenderMode>,
    pub scale: Option<u32>,
    /// Overrides of training hyperparameters.
    pub train: toml::Table,
    /// Overrides of the network architecture.
    pub network: toml::Table,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::in_file(path.display().to_string(), Error::Schema(e.to_string())))?;
        // relative paths resolve against the config file's directory
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.out,
            &mut cfg.corpus,
            &mut cfg.mapping,
            &mut cfg.table,
            &mut cfg.archive,
            &mut cfg.checkpoint,
            &mut cfg.metric_sets,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Applies the keys of `overrides` on top of `base`, rejecting keys the
/// target type does not have.
pub fn merge<T: Serialize + DeserializeOwned>(base: &T, overrides: &toml::Table, what: &str) -> Result<T> {
    let mut value = serde_json::to_value(base)?;
    let obj = value.as_object_mut().expect("configs serialize to objects");
    for (k, v) in overrides {
        if !obj.contains_key(k) {
            return Err(Error::InvalidArgument(format!("unknown {what} setting {k:?}")));
        }
        obj.insert(k.clone(), serde_json::to_value(v)?);
    }
    serde_json::from_value(value).map_err(|e| Error::InvalidArgument(format!("{what} settings: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use levelforge_core::vae::TrainConfig;

    #[test]
    fn merge_overrides_known_keys() {
        let t: toml::Table = toml::from_str("epochs = 7\nlearning_rate = 0.5").unwrap();
        let c = merge(&TrainConfig::default(), &t, "train").unwrap();
        assert_eq!(c.epochs, 7);
        assert_eq!(c.learning_rate, 0.5);
        assert_eq!(c.batch_size, 32);
        let bad: toml::Table = toml::from_str("epoch = 7").unwrap();
        assert!(merge(&TrainConfig::default(), &bad, "train").is_err());
    }
}
