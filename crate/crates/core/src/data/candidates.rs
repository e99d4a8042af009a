//! Hypernym candidate table: `hypo<TAB>hyper<TAB>freq`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use super::taxonomy_file::normalize_surface;
use super::{io_err, DataError};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CandidateTable {
    entries: BTreeMap<(String, String), u64>,
    max_out: HashMap<String, u64>,
    hyponyms: HashMap<String, BTreeSet<String>>,
}

impl CandidateTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: impl IntoIterator<Item = ((String, String), u64)>) -> Self {
        let mut t = Self::new();
        for ((x, y), f) in entries {
            t.add(x, y, f);
        }
        t
    }

    /// Adds `freq` to the `(hypo, hyper)` count.
    pub fn add(&mut self, hypo: impl Into<String>, hyper: impl Into<String>, freq: u64) {
        let (hypo, hyper) = (hypo.into(), hyper.into());
        let total = {
            let e = self.entries.entry((hypo.clone(), hyper.clone())).or_insert(0);
            *e += freq;
            *e
        };
        let m = self.max_out.entry(hypo.clone()).or_insert(0);
        *m = (*m).max(total);
        self.hyponyms.entry(hyper).or_default().insert(hypo);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn freq(&self, hypo: &str, hyper: &str) -> u64 {
        self.entries
            .get(&(hypo.to_string(), hyper.to_string()))
            .copied()
            .unwrap_or(0)
    }

    pub fn contains(&self, hypo: &str, hyper: &str) -> bool {
        self.entries.contains_key(&(hypo.to_string(), hyper.to_string()))
    }

    /// `max_k freq(hypo, k)`; 0 when `hypo` has no candidates.
    pub fn max_freq_from(&self, hypo: &str) -> u64 {
        self.max_out.get(hypo).copied().unwrap_or(0)
    }

    /// Number of distinct `h` with `(h, hyper)` in the table.
    pub fn distinct_hyponyms(&self, hyper: &str) -> usize {
        self.hyponyms.get(hyper).map_or(0, BTreeSet::len)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(String, String), &u64)> {
        self.entries.iter()
    }

    pub fn parse(text: &str, file: &Path) -> Result<Self, DataError> {
        let mut t = Self::new();
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
            if fields.len() != 3 {
                return Err(err(format!("expected 3 tab-separated fields, got {}", fields.len())));
            }
            let freq: u64 = fields[2]
                .trim()
                .parse()
                .map_err(|e| err(format!("bad frequency '{}': {e}", fields[2])))?;
            let (x, y) = (normalize_surface(fields[0]), normalize_surface(fields[1]));
            if x.is_empty() || y.is_empty() {
                return Err(err("empty term".into()));
            }
            t.add(x, y, freq);
        }
        Ok(t)
    }

    pub fn to_tsv(&self) -> String {
        self.entries
            .iter()
            .map(|((x, y), f)| format!("{x}\t{y}\t{f}\n"))
            .collect()
    }
}

pub fn load_candidates(path: &Path) -> Result<CandidateTable, DataError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    CandidateTable::parse(&text, path)
}
