//! GloVe-style text embeddings: `token f1 ... f_dim` per line.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::{io_err, DataError};

pub const DEFAULT_WORD_DIM: usize = 50;

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

/// Which terms had at least one token with a vector.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CoverageReport {
    pub total: usize,
    pub covered: usize,
    pub missing: Vec<String>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<f64>) -> Result<(), DataError> {
        if vector.len() != self.dim {
            return Err(DataError::Argument(format!(
                "vector of length {} in a table of dim {}",
                vector.len(),
                self.dim
            )));
        }
        self.vectors.insert(token.into(), vector);
        Ok(())
    }

    /// Exact token first, then its lowercase form.
    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors
            .get(token)
            .or_else(|| self.vectors.get(&token.to_lowercase()))
            .map(Vec::as_slice)
    }

    /// Mean of the vectors of the phrase's tokens that are present; zero
    /// vector (and `false`) when none is.
    pub fn phrase_vector(&self, surface: &str) -> (Vec<f64>, bool) {
        let mut sum = vec![0.0; self.dim];
        let mut n = 0usize;
        for tok in surface.split_whitespace() {
            if let Some(v) = self.get(tok) {
                sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
                n += 1;
            }
        }
        if n > 0 {
            sum.iter_mut().for_each(|s| *s /= n as f64);
        }
        (sum, n > 0)
    }

    pub fn coverage<'a>(&self, surfaces: impl IntoIterator<Item = &'a str>) -> CoverageReport {
        let mut report = CoverageReport::default();
        for s in surfaces {
            report.total += 1;
            if self.phrase_vector(s).1 {
                report.covered += 1;
            } else {
                report.missing.push(s.to_string());
            }
        }
        report
    }

    pub fn parse<R: BufRead>(reader: R, dim: usize, file: &Path) -> Result<Self, DataError> {
        let mut table = EmbeddingTable::new(dim);
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| io_err(file, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let token = parts.next().expect("non-empty line");
            let values: Vec<&str> = parts.collect();
            let err = |msg: String| DataError::Parse {
                file: file.to_path_buf(),
                line: i + 1,
                msg,
            };
            if values.len() != dim {
                return Err(err(format!(
                    "expected {dim} values after the token, got {}",
                    values.len()
                )));
            }
            let vector = values
                .iter()
                .map(|v| v.parse::<f64>().map_err(|e| err(format!("bad float '{v}': {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            table.vectors.insert(token.to_string(), vector);
        }
        Ok(table)
    }

    pub fn to_text(&self) -> String {
        let mut tokens: Vec<&String> = self.vectors.keys().collect();
        tokens.sort();
        let mut s = String::new();
        for t in tokens {
            s.push_str(t);
            for v in &self.vectors[t] {
                write!(s, " {v}").expect("string write");
            }
            s.push('\n');
        }
        s
    }
}

pub fn load_embeddings(path: &Path, dim: usize) -> Result<EmbeddingTable, DataError> {
    let f = fs::File::open(path).map_err(|e| io_err(path, e))?;
    EmbeddingTable::parse(BufReader::new(f), dim, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> EmbeddingTable {
        let text = "water 1 2 3\nfilter 3 4 5\n";
        EmbeddingTable::parse(text.as_bytes(), 3, Path::new("e.txt")).unwrap()
    }

    #[test]
    fn phrase_is_token_mean() {
        let (v, covered) = table().phrase_vector("water filter");
        assert!(covered);
        assert_eq!(v, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn unknown_is_zero_and_reported() {
        let t = table();
        assert_eq!(t.phrase_vector("unknownium"), (vec![0.0; 3], false));
        let report = t.coverage(["water", "unknownium"]);
        assert_eq!(report.covered, 1);
        assert_eq!(report.missing, vec!["unknownium".to_string()]);
    }

    #[test]
    fn case_falls_back_to_lowercase() {
        assert_eq!(table().get("Water"), Some(&[1.0, 2.0, 3.0][..]));
    }

    #[test]
    fn wrong_column_count_names_line() {
        let text = "a 1 2 3\nb 1 2\n";
        match EmbeddingTable::parse(text.as_bytes(), 3, Path::new("e.txt")) {
            Err(DataError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fifty_dim_line() {
        let line = format!("dog {}\n", vec!["0.1"; 50].join(" "));
        let t = EmbeddingTable::parse(line.as_bytes(), 50, Path::new("e.txt")).unwrap();
        assert_eq!(t.get("dog").unwrap().len(), 50);
    }
}
