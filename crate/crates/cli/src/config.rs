//! Run configuration files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use taxo_induct::data::{
    load_candidates, load_embeddings, load_paths, load_split, load_taxonomy_dir, Dataset, DEFAULT_PATH_CAP,
};
use taxo_induct::trainer::TrainConfig;

use crate::CliError;

/// Resource locations plus training settings. Relative paths resolve
/// against the directory holding the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub taxonomy_dir: PathBuf,
    pub embeddings: PathBuf,
    pub paths: PathBuf,
    pub candidates: PathBuf,
    pub split: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default = "default_path_cap")]
    pub path_cap: usize,
    #[serde(default)]
    pub train: TrainConfig,
}

fn default_path_cap() -> usize {
    DEFAULT_PATH_CAP
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in cfg.resource_paths_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    fn resource_paths_mut(&mut self) -> [&mut PathBuf; 5] {
        [
            &mut self.taxonomy_dir,
            &mut self.embeddings,
            &mut self.paths,
            &mut self.candidates,
            &mut self.split,
        ]
    }

    /// Every resource must exist and the training settings must be sane.
    pub fn validate(&self) -> Result<(), CliError> {
        let checks = [
            ("taxonomy_dir", &self.taxonomy_dir, true),
            ("embeddings", &self.embeddings, false),
            ("paths", &self.paths, false),
            ("candidates", &self.candidates, false),
            ("split", &self.split, false),
        ];
        for (key, path, dir) in checks {
            let ok = if dir { path.is_dir() } else { path.is_file() };
            if !ok {
                return Err(CliError::Config(format!(
                    "{key}: '{}' does not exist or is not a {}",
                    path.display(),
                    if dir { "directory" } else { "file" }
                )));
            }
        }
        self.train
            .validate()
            .map_err(|e| CliError::Config(format!("train: {e}")))
    }

    pub fn load_dataset(&self) -> Result<Dataset, CliError> {
        let dataset = Dataset {
            taxonomies: load_taxonomy_dir(&self.taxonomy_dir)?,
            embeddings: load_embeddings(&self.embeddings, self.train.model.word_dim)?,
            paths: load_paths(&self.paths, self.path_cap)?,
            candidates: load_candidates(&self.candidates)?,
            split: load_split(&self.split)?,
        };
        dataset.check_split()?;
        Ok(dataset)
    }
}
