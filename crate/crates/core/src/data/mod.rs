//! Loading, validating and writing external resources.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

mod candidates;
mod embeddings;
mod paths;
mod split;
pub mod synthetic;
mod taxonomy_file;

pub use candidates::{load_candidates, CandidateTable};
pub use embeddings::{load_embeddings, CoverageReport, EmbeddingTable, DEFAULT_WORD_DIM};
pub use paths::{load_paths, parse_path, Direction, PathCorpus, PathEdge, PathRecord, DEFAULT_PATH_CAP};
pub use split::{load_split, DatasetSplit, SplitName};
pub use synthetic::{gen_synthetic, SplitSpec, SyntheticConfig};
pub use taxonomy_file::{load_taxonomy_dir, load_taxonomy_file, normalize_surface, write_taxonomy, TaxonomyFile};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{}:{line}: {msg}", file.display())]
    Parse { file: PathBuf, line: usize, msg: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Argument(String),
}

pub(crate) fn io_err(path: &Path, source: std::io::Error) -> DataError {
    DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub const TAXONOMY_SUBDIR: &str = "taxonomies";
pub const EMBEDDINGS_FILE: &str = "embeddings.txt";
pub const PATHS_FILE: &str = "paths.tsv";
pub const CANDIDATES_FILE: &str = "candidates.tsv";
pub const SPLIT_FILE: &str = "split.tsv";

/// Every resource needed for training and evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub taxonomies: Vec<TaxonomyFile>,
    pub embeddings: EmbeddingTable,
    pub paths: PathCorpus,
    pub candidates: CandidateTable,
    pub split: DatasetSplit,
}

impl Dataset {
    /// Relative file name to contents, in the on-disk layout.
    pub fn to_files(&self) -> BTreeMap<String, String> {
        let mut files = BTreeMap::new();
        for t in &self.taxonomies {
            files.insert(format!("{TAXONOMY_SUBDIR}/{}.tsv", t.name), t.to_tsv());
        }
        files.insert(EMBEDDINGS_FILE.to_string(), self.embeddings.to_text());
        files.insert(PATHS_FILE.to_string(), self.paths.to_tsv());
        files.insert(CANDIDATES_FILE.to_string(), self.candidates.to_tsv());
        files.insert(SPLIT_FILE.to_string(), self.split.to_tsv());
        files
    }

    pub fn write_dir(&self, dir: &Path) -> Result<(), DataError> {
        fs::create_dir_all(dir.join(TAXONOMY_SUBDIR)).map_err(|e| io_err(dir, e))?;
        for (name, text) in self.to_files() {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        }
        Ok(())
    }

    /// Reads a directory written by [`Dataset::write_dir`].
    pub fn load_dir(dir: &Path, word_dim: usize, path_cap: usize) -> Result<Self, DataError> {
        let dataset = Dataset {
            taxonomies: load_taxonomy_dir(&dir.join(TAXONOMY_SUBDIR))?,
            embeddings: load_embeddings(&dir.join(EMBEDDINGS_FILE), word_dim)?,
            paths: load_paths(&dir.join(PATHS_FILE), path_cap)?,
            candidates: load_candidates(&dir.join(CANDIDATES_FILE))?,
            split: load_split(&dir.join(SPLIT_FILE))?,
        };
        dataset.check_split()?;
        Ok(dataset)
    }

    /// Every split name must refer to a loaded taxonomy.
    pub fn check_split(&self) -> Result<(), DataError> {
        for name in self
            .split
            .train
            .iter()
            .chain(&self.split.validation)
            .chain(&self.split.test)
        {
            if self.taxonomy(name).is_none() {
                return Err(DataError::Argument(format!("split names unknown taxonomy '{name}'")));
            }
        }
        Ok(())
    }

    pub fn taxonomy(&self, name: &str) -> Option<&TaxonomyFile> {
        self.taxonomies.iter().find(|t| t.name == name)
    }

    pub fn split_taxonomies(&self, which: SplitName) -> Vec<&TaxonomyFile> {
        self.split
            .names(which)
            .iter()
            .filter_map(|n| self.taxonomy(n))
            .collect()
    }
}
