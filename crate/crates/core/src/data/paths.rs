//! Dependency-path corpus: `x<TAB>y<TAB>path<TAB>count`, where `path` is
//! edges joined by `_` and each edge is `lemma/POS/dep/dir`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::taxonomy_file::normalize_surface;
use super::{io_err, DataError};

pub const DEFAULT_PATH_CAP: usize = 200;

/// Edge direction relative to the two terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    /// `<`
    TowardX,
    /// `>`
    TowardY,
    /// `^`
    RootUp,
    /// `V`
    RootDown,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::TowardX,
        Direction::TowardY,
        Direction::RootUp,
        Direction::RootDown,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn symbol(self) -> char {
        match self {
            Direction::TowardX => '<',
            Direction::TowardY => '>',
            Direction::RootUp => '^',
            Direction::RootDown => 'V',
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        match s {
            "<" => Some(Direction::TowardX),
            ">" => Some(Direction::TowardY),
            "^" => Some(Direction::RootUp),
            "V" => Some(Direction::RootDown),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PathEdge {
    pub lemma: String,
    pub pos: String,
    pub dep: String,
    pub dir: Direction,
}

impl fmt::Display for PathEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}/{}", self.lemma, self.pos, self.dep, self.dir.symbol())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathRecord {
    pub x: String,
    pub y: String,
    pub edges: Vec<PathEdge>,
    pub count: u64,
}

impl PathRecord {
    pub fn path_string(&self) -> String {
        self.edges.iter().map(ToString::to_string).collect::<Vec<_>>().join("_")
    }
}

/// Parses `lemma/POS/dep/dir` tokens joined by `_`.
pub fn parse_path(s: &str) -> Result<Vec<PathEdge>, String> {
    if s.is_empty() {
        return Err("empty path".into());
    }
    s.split('_')
        .map(|tok| {
            let mut parts = tok.rsplitn(4, '/');
            let dir = parts.next();
            let dep = parts.next();
            let pos = parts.next();
            let lemma = parts.next();
            match (lemma, pos, dep, dir) {
                (Some(l), Some(p), Some(d), Some(dir)) if !l.is_empty() && !p.is_empty() && !d.is_empty() => {
                    let dir =
                        Direction::from_symbol(dir).ok_or_else(|| format!("bad direction '{dir}' in edge '{tok}'"))?;
                    Ok(PathEdge {
                        lemma: l.to_string(),
                        pos: p.to_string(),
                        dep: d.to_string(),
                        dir,
                    })
                }
                _ => Err(format!("malformed edge '{tok}'")),
            }
        })
        .collect()
}

/// Paths grouped by ordered term pair.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PathCorpus {
    pairs: BTreeMap<(String, String), Vec<PathRecord>>,
}

impl PathCorpus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Paths for `(x, y)`; empty when the pair never co-occurs.
    pub fn get(&self, x: &str, y: &str) -> &[PathRecord] {
        self.pairs
            .get(&(x.to_string(), y.to_string()))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn records(&self) -> impl Iterator<Item = &PathRecord> {
        self.pairs.values().flatten()
    }

    /// Groups records by pair, merges repeated paths by summing counts, and
    /// keeps the `cap` most frequent per pair (ties keep input order).
    pub fn from_records(records: impl IntoIterator<Item = PathRecord>, cap: usize) -> Self {
        let mut grouped: BTreeMap<(String, String), Vec<PathRecord>> = BTreeMap::new();
        let mut positions: HashMap<(String, String, String), usize> = HashMap::new();
        for r in records {
            let key = (r.x.clone(), r.y.clone());
            let list = grouped.entry(key).or_default();
            let pkey = (r.x.clone(), r.y.clone(), r.path_string());
            match positions.get(&pkey) {
                Some(&i) => list[i].count += r.count,
                None => {
                    positions.insert(pkey, list.len());
                    list.push(r);
                }
            }
        }
        for list in grouped.values_mut() {
            list.sort_by_key(|r| std::cmp::Reverse(r.count));
            list.truncate(cap);
        }
        PathCorpus { pairs: grouped }
    }

    pub fn parse<R: BufRead>(reader: R, cap: usize, file: &Path) -> Result<Self, DataError> {
        let mut records = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| io_err(file, e))?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| DataError::Parse {
                file: file.to_path_buf(),
                line: i + 1,
                msg,
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(err(format!("expected 4 tab-separated fields, got {}", fields.len())));
            }
            let edges = parse_path(fields[2]).map_err(err)?;
            let count: u64 = fields[3]
                .trim()
                .parse()
                .map_err(|e| err(format!("bad count '{}': {e}", fields[3])))?;
            if count == 0 {
                return Err(err("count must be at least 1".into()));
            }
            records.push(PathRecord {
                x: normalize_surface(fields[0]),
                y: normalize_surface(fields[1]),
                edges,
                count,
            });
        }
        Ok(Self::from_records(records, cap))
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for r in self.records() {
            s.push_str(&format!("{}\t{}\t{}\t{}\n", r.x, r.y, r.path_string(), r.count));
        }
        s
    }
}

pub fn load_paths(path: &Path, cap: usize) -> Result<PathCorpus, DataError> {
    let f = fs::File::open(path).map_err(|e| io_err(path, e))?;
    PathCorpus::parse(BufReader::new(f), cap, path)
}
