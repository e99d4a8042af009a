//! Train/validation/test assignment: `name<TAB>{train|validation|test}`.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{io_err, DataError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Validation,
    Test,
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitName::Train => "train",
            SplitName::Validation => "validation",
            SplitName::Test => "test",
        })
    }
}

impl FromStr for SplitName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(SplitName::Train),
            "validation" => Ok(SplitName::Validation),
            "test" => Ok(SplitName::Test),
            other => Err(format!("unknown split '{other}'")),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

impl DatasetSplit {
    /// Seeded shuffle, then `round(0.7n)` train, `round(0.15n)` validation,
    /// the rest test.
    pub fn proportional(names: &[String], seed: u64) -> Self {
        let mut shuffled = names.to_vec();
        shuffled.sort();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n = names.len();
        let n_train = (0.70 * n as f64).round() as usize;
        let n_val = ((0.15 * n as f64).round() as usize).min(n - n_train);
        let test = shuffled.split_off(n_train + n_val);
        let validation = shuffled.split_off(n_train);
        DatasetSplit {
            train: shuffled,
            validation,
            test,
        }
    }

    pub fn names(&self, which: SplitName) -> &[String] {
        match which {
            SplitName::Train => &self.train,
            SplitName::Validation => &self.validation,
            SplitName::Test => &self.test,
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let mut seen = BTreeSet::new();
        for name in self.train.iter().chain(&self.validation).chain(&self.test) {
            if !seen.insert(name) {
                return Err(DataError::Argument(format!("taxonomy '{name}' is in two splits")));
            }
        }
        Ok(())
    }

    pub fn parse(text: &str, file: &Path) -> Result<Self, DataError> {
        let mut split = DatasetSplit::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| DataError::Parse {
                file: file.to_path_buf(),
                line: i + 1,
                msg,
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 {
                return Err(err(format!("expected 2 tab-separated fields, got {}", fields.len())));
            }
            let which: SplitName = fields[1].trim().parse().map_err(err)?;
            let name = fields[0].to_string();
            match which {
                SplitName::Train => split.train.push(name),
                SplitName::Validation => split.validation.push(name),
                SplitName::Test => split.test.push(name),
            }
        }
        split.validate().map_err(|e| DataError::Parse {
            file: file.to_path_buf(),
            line: 0,
            msg: e.to_string(),
        })?;
        Ok(split)
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for which in [SplitName::Train, SplitName::Validation, SplitName::Test] {
            for name in self.names(which) {
                s.push_str(&format!("{name}\t{which}\n"));
            }
        }
        s
    }
}

pub fn load_split(path: &Path) -> Result<DatasetSplit, DataError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    DatasetSplit::parse(&text, path)
}
