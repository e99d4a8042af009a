use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use crate::taxo::{Taxonomy, Term, TermId};

use super::{io_err, DataError};

/// Lowercases and collapses internal whitespace.
pub fn normalize_surface(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// A gold taxonomy as read from disk: `(hyponym, hypernym)` surface pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaxonomyFile {
    pub name: String,
    pub edges: Vec<(String, String)>,
    /// Normalized surfaces whose original spelling had an uppercase letter.
    pub capitalized: BTreeSet<String>,
}

impl TaxonomyFile {
    /// Builds a file from already-normalized edges and validates it.
    pub fn new(name: impl Into<String>, edges: Vec<(String, String)>) -> Result<Self, DataError> {
        let name = name.into();
        let mut text = String::new();
        for (c, p) in &edges {
            text.push_str(c);
            text.push('\t');
            text.push_str(p);
            text.push('\n');
        }
        Self::parse(&name, Path::new(&name), &text)
    }

    /// Parses `hyponym<TAB>hypernym` lines. Blank lines and `#` comments are skipped.
    pub fn parse(name: &str, file: &Path, text: &str) -> Result<Self, DataError> {
        let err = |line: usize, msg: String| DataError::Parse {
            file: file.to_path_buf(),
            line,
            msg,
        };
        let mut edges: Vec<(String, String)> = Vec::new();
        let mut capitalized = BTreeSet::new();
        let mut parent: HashMap<String, String> = HashMap::new();
        let mut seen_edges: BTreeSet<(String, String)> = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 {
                return Err(err(
                    line_no,
                    format!("expected 2 tab-separated fields, got {}", fields.len()),
                ));
            }
            let child = normalize_surface(fields[0]);
            let par = normalize_surface(fields[1]);
            if child.is_empty() || par.is_empty() {
                return Err(err(line_no, "empty term".into()));
            }
            for (raw_term, norm) in [(fields[0], &child), (fields[1], &par)] {
                if raw_term.chars().any(char::is_uppercase) {
                    capitalized.insert(norm.clone());
                }
            }
            if child == par {
                return Err(err(line_no, format!("cycle: '{child}' is its own hypernym")));
            }
            if !seen_edges.insert((child.clone(), par.clone())) {
                return Err(err(line_no, format!("duplicate edge '{child}' -> '{par}'")));
            }
            if let Some(old) = parent.get(&child) {
                return Err(err(line_no, format!("'{child}' already has hypernym '{old}'")));
            }
            // Adding child -> par closes a cycle iff child is an ancestor of par.
            let mut cur = par.as_str();
            let mut steps = 0;
            while let Some(p) = parent.get(cur) {
                if p == &child {
                    return Err(err(line_no, format!("cycle through '{child}'")));
                }
                cur = p;
                steps += 1;
                if steps > parent.len() {
                    break;
                }
            }
            if cur == child {
                return Err(err(line_no, format!("cycle through '{child}'")));
            }
            parent.insert(child.clone(), par.clone());
            edges.push((child, par));
        }
        if edges.is_empty() {
            return Err(err(0, "no edges".into()));
        }
        let nodes: BTreeSet<&str> = edges.iter().flat_map(|(c, p)| [c.as_str(), p.as_str()]).collect();
        let roots: Vec<&str> = nodes.iter().copied().filter(|n| !parent.contains_key(*n)).collect();
        if roots.len() != 1 {
            return Err(err(0, format!("expected exactly one root, found {roots:?}")));
        }
        Ok(TaxonomyFile {
            name: name.to_string(),
            edges,
            capitalized,
        })
    }

    /// The term never listed as a hyponym.
    pub fn root(&self) -> &str {
        let children: BTreeSet<&str> = self.edges.iter().map(|(c, _)| c.as_str()).collect();
        self.edges
            .iter()
            .map(|(_, p)| p.as_str())
            .find(|p| !children.contains(p))
            .expect("validated tree has a root")
    }

    /// Terms in order of first appearance, with dense ids.
    pub fn terms(&self) -> Vec<Term> {
        let mut order: Vec<&str> = Vec::new();
        let mut seen = BTreeSet::new();
        for (c, p) in &self.edges {
            for t in [c, p] {
                if seen.insert(t.as_str()) {
                    order.push(t);
                }
            }
        }
        order
            .into_iter()
            .enumerate()
            .map(|(id, s)| Term {
                id,
                surface: s.to_string(),
                capitalized: self.capitalized.contains(s),
            })
            .collect()
    }

    /// Terms plus the gold tree over their ids.
    pub fn to_taxonomy(&self) -> (Vec<Term>, Taxonomy) {
        let terms = self.terms();
        let index: HashMap<&str, TermId> = terms.iter().map(|t| (t.surface.as_str(), t.id)).collect();
        let edges: Vec<(TermId, TermId)> = self
            .edges
            .iter()
            .map(|(c, p)| (index[c.as_str()], index[p.as_str()]))
            .collect();
        let tree = Taxonomy::from_edges(&edges).expect("validated at parse time");
        (terms, tree)
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for (c, p) in &self.edges {
            s.push_str(c);
            s.push('\t');
            s.push_str(p);
            s.push('\n');
        }
        s
    }
}

pub fn load_taxonomy_file(path: &Path) -> Result<TaxonomyFile, DataError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    TaxonomyFile::parse(&name, path, &text)
}

/// Loads every `*.tsv` file in `dir`, sorted by file name.
pub fn load_taxonomy_dir(dir: &Path) -> Result<Vec<TaxonomyFile>, DataError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "tsv"))
        .collect();
    files.sort();
    files.iter().map(|p| load_taxonomy_file(p)).collect()
}

/// Writes `<dir>/<name>.tsv`.
pub fn write_taxonomy(dir: &Path, taxonomy: &TaxonomyFile) -> Result<PathBuf, DataError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join(format!("{}.tsv", taxonomy.name));
    fs::write(&path, taxonomy.to_tsv()).map_err(|e| io_err(&path, e))?;
    Ok(path)
}
