//! Versioned JSON checkpoints: parameters, bin boundaries, vocabularies and
//! a config echo.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::data::{io_err, DataError};
use crate::encoder::Model;
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "taxo-induct-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub train_config: TrainConfig,
    /// Free-form settings of the run that produced the model (resource paths etc.).
    pub echo: serde_json::Value,
    pub model: Model,
}

fn parse_err(path: &Path, msg: String) -> Error {
    Error::Data(DataError::Parse {
        file: path.to_path_buf(),
        line: 0,
        msg,
    })
}

impl Checkpoint {
    pub fn new(model: Model, train_config: TrainConfig, echo: serde_json::Value) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            train_config,
            echo,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::State(format!("serializing checkpoint: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
        fs::write(path, self.to_json()?).map_err(|e| io_err(path, e))?;
        Ok(())
    }

    /// Rejects files whose format tag or version differ from this build's.
    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| parse_err(path, e.to_string()))?;
        let format = value.get("format").and_then(|v| v.as_str()).unwrap_or("");
        if format != CHECKPOINT_FORMAT {
            return Err(Error::Version(format!(
                "{}: format '{format}', expected '{CHECKPOINT_FORMAT}'",
                path.display()
            )));
        }
        let version = value.get("version").and_then(|v| v.as_u64());
        if version != Some(u64::from(CHECKPOINT_VERSION)) {
            return Err(Error::Version(format!(
                "{}: version {version:?}, expected {CHECKPOINT_VERSION}",
                path.display()
            )));
        }
        serde_json::from_value(value).map_err(|e| parse_err(path, e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::from_json(&text, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<Checkpoint> {
        Checkpoint::from_json(text, Path::new("ck.json"))
    }

    #[test]
    fn newer_version_is_a_version_error() {
        let err = load(&format!(r#"{{"format": "{CHECKPOINT_FORMAT}", "version": 2}}"#)).unwrap_err();
        assert!(
            matches!(&err, Error::Version(m) if m.contains("version Some(2)")),
            "{err}"
        );
    }

    #[test]
    fn foreign_format_is_a_version_error() {
        let err = load(r#"{"format": "something-else", "version": 1}"#).unwrap_err();
        assert!(matches!(err, Error::Version(_)));
    }

    #[test]
    fn right_tag_with_bad_body_is_a_parse_error() {
        let err = load(&format!(
            r#"{{"format": "{CHECKPOINT_FORMAT}", "version": {CHECKPOINT_VERSION}}}"#
        ))
        .unwrap_err();
        assert!(matches!(err, Error::Data(DataError::Parse { .. })), "{err}");
        assert!(matches!(load("{not json").unwrap_err(), Error::Data(_)));
    }
}
