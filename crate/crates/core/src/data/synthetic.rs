//! Seeded synthetic taxonomies with consistent paths, candidates and embeddings.
//!
//! Trees have height four. A child's surface usually extends its parent's
//! ("filter" -> "water filter"); a configurable fraction gets an unrelated
//! fresh word instead, which string features cannot resolve.
//! Paths follow hypernym and coordination patterns, candidates follow the
//! gold edges with frequency growing with the hypernym's subtree size, and
//! word vectors carry a noisy generality direction.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::paths::{Direction, PathCorpus, PathEdge, PathRecord};
use super::{CandidateTable, DataError, Dataset, DatasetSplit, EmbeddingTable, TaxonomyFile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitSpec {
    /// 70/15/15 by rounding.
    Proportional,
    /// Exact train/validation/test counts; must sum to the taxonomy count.
    Counts(usize, usize, usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_taxonomies: usize,
    /// Node count range `(lo, hi]`.
    pub size_range: (usize, usize),
    pub seed: u64,
    /// Share of non-root terms whose surface does not extend the parent's.
    pub uncued_fraction: f64,
    pub word_dim: usize,
    /// Share of tokens left out of the embedding table.
    pub oov_fraction: f64,
    pub edge_path_prob: f64,
    pub ancestor_path_prob: f64,
    pub sibling_path_prob: f64,
    pub noise_path_prob: f64,
    pub edge_candidate_prob: f64,
    pub ancestor_candidate_prob: f64,
    pub noise_candidate_prob: f64,
    pub split: SplitSpec,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_taxonomies: 60,
            size_range: (10, 15),
            seed: 0,
            uncued_fraction: 0.3,
            word_dim: 50,
            oov_fraction: 0.1,
            edge_path_prob: 0.6,
            ancestor_path_prob: 0.25,
            sibling_path_prob: 0.3,
            noise_path_prob: 0.03,
            edge_candidate_prob: 0.85,
            ancestor_candidate_prob: 0.4,
            noise_candidate_prob: 0.1,
            split: SplitSpec::Proportional,
        }
    }
}

const HEIGHT: usize = 4;
const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";
const FILLERS: &[&str] = &[
    "use", "find", "make", "see", "call", "know", "large", "small", "new", "old", "place", "time", "keep", "show",
    "part", "kind",
];

type Pattern = &'static [(&'static str, &'static str, &'static str, Direction)];

use Direction::{RootDown as Dn, RootUp as Up, TowardX as Tx, TowardY as Ty};

const HYPERNYM_PATTERNS: &[Pattern] = &[
    &[
        ("X", "NOUN", "nsubj", Ty),
        ("be", "VERB", "ROOT", Up),
        ("Y", "NOUN", "attr", Tx),
    ],
    &[
        ("X", "NOUN", "pobj", Tx),
        ("as", "ADP", "prep", Tx),
        ("such", "ADJ", "amod", Ty),
        ("Y", "NOUN", "ROOT", Up),
    ],
    &[
        ("X", "NOUN", "ROOT", Up),
        ("other", "ADJ", "amod", Dn),
        ("Y", "NOUN", "conj", Ty),
    ],
    &[
        ("X", "NOUN", "dobj", Tx),
        ("include", "VERB", "relcl", Tx),
        ("Y", "NOUN", "ROOT", Up),
    ],
];

const COORDINATION_PATTERNS: &[Pattern] = &[
    &[
        ("X", "NOUN", "ROOT", Up),
        ("and", "CCONJ", "cc", Dn),
        ("Y", "NOUN", "conj", Ty),
    ],
    &[
        ("X", "NOUN", "ROOT", Up),
        ("or", "CCONJ", "cc", Dn),
        ("Y", "NOUN", "conj", Ty),
    ],
];

fn pattern_edges(p: Pattern) -> Vec<PathEdge> {
    p.iter()
        .map(|&(lemma, pos, dep, dir)| PathEdge {
            lemma: lemma.to_string(),
            pos: pos.to_string(),
            dep: dep.to_string(),
            dir,
        })
        .collect()
}

/// The same path read from the other end.
fn reversed(edges: &[PathEdge]) -> Vec<PathEdge> {
    edges
        .iter()
        .rev()
        .map(|e| PathEdge {
            lemma: match e.lemma.as_str() {
                "X" => "Y".to_string(),
                "Y" => "X".to_string(),
                l => l.to_string(),
            },
            dir: match e.dir {
                Tx => Ty,
                Ty => Tx,
                Up => Dn,
                Dn => Up,
            },
            ..e.clone()
        })
        .collect()
}

struct WordSource {
    used: HashSet<String>,
}

impl WordSource {
    fn fresh(&mut self, rng: &mut ChaCha8Rng) -> String {
        loop {
            let syllables = rng.gen_range(2..=3);
            let mut w = String::new();
            for _ in 0..syllables {
                w.push(CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char);
                w.push(VOWELS[rng.gen_range(0..VOWELS.len())] as char);
            }
            if rng.gen_bool(0.5) {
                w.push(CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char);
            }
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }
}

struct Node {
    tokens: Vec<String>,
    depth: usize,
    parent: Option<usize>,
}

impl Node {
    fn surface(&self) -> String {
        self.tokens.join(" ")
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect::<Vec<f64>>()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    v.into_iter().map(|x| x / n).collect()
}

fn round6(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| (x * 1e6).round() / 1e6).collect()
}

fn validate(config: &SyntheticConfig) -> Result<(), DataError> {
    let (lo, hi) = config.size_range;
    if lo < 10 || hi > 50 || lo >= hi {
        return Err(DataError::Argument(format!(
            "size range ({lo}, {hi}] must lie within (10, 50]"
        )));
    }
    if config.n_taxonomies == 0 {
        return Err(DataError::Argument("need at least one taxonomy".into()));
    }
    if config.word_dim == 0 {
        return Err(DataError::Argument("word_dim must be positive".into()));
    }
    let probs = [
        config.uncued_fraction,
        config.oov_fraction,
        config.edge_path_prob,
        config.ancestor_path_prob,
        config.sibling_path_prob,
        config.noise_path_prob,
        config.edge_candidate_prob,
        config.ancestor_candidate_prob,
        config.noise_candidate_prob,
    ];
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(DataError::Argument("probabilities must lie in [0, 1]".into()));
    }
    if let SplitSpec::Counts(a, b, c) = config.split {
        if a + b + c != config.n_taxonomies {
            return Err(DataError::Argument(format!(
                "split counts {a}+{b}+{c} do not sum to {}",
                config.n_taxonomies
            )));
        }
    }
    Ok(())
}

fn build_tree(rng: &mut ChaCha8Rng, words: &mut WordSource, size: usize, uncued: f64) -> Vec<Node> {
    let mut nodes = vec![Node {
        tokens: vec![words.fresh(rng)],
        depth: 0,
        parent: None,
    }];
    let mut add_child = |nodes: &mut Vec<Node>, parent: usize, rng: &mut ChaCha8Rng| {
        let tokens = if rng.gen_bool(uncued) {
            vec![words.fresh(rng)]
        } else {
            let mut t = vec![words.fresh(rng)];
            t.extend(nodes[parent].tokens.iter().cloned());
            t
        };
        let depth = nodes[parent].depth + 1;
        nodes.push(Node {
            tokens,
            depth,
            parent: Some(parent),
        });
    };
    for d in 1..HEIGHT {
        add_child(&mut nodes, d - 1, rng);
    }
    while nodes.len() < size {
        let open: Vec<usize> = (0..nodes.len()).filter(|&i| nodes[i].depth < HEIGHT - 1).collect();
        let parent = *open.choose(rng).expect("root is always open");
        add_child(&mut nodes, parent, rng);
    }
    nodes
}

fn ancestors(nodes: &[Node], i: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut cur = nodes[i].parent;
    while let Some(p) = cur {
        out.push(p);
        cur = nodes[p].parent;
    }
    out
}

fn subtree_sizes(nodes: &[Node]) -> Vec<usize> {
    let mut sizes = vec![1; nodes.len()];
    // Children are always created after their parents.
    for i in (1..nodes.len()).rev() {
        let p = nodes[i].parent.expect("non-root");
        sizes[p] += sizes[i];
    }
    sizes
}

/// Generates a complete dataset. Identical configs give identical datasets.
pub fn gen_synthetic(config: &SyntheticConfig) -> Result<Dataset, DataError> {
    validate(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut words = WordSource { used: HashSet::new() };
    for f in FILLERS {
        words.used.insert(f.to_string());
    }
    let dim = config.word_dim;
    let generality_dir = unit(gaussian_vec(&mut rng, dim, 1.0));

    let mut taxonomies = Vec::with_capacity(config.n_taxonomies);
    let mut records: Vec<PathRecord> = Vec::new();
    let mut candidates = CandidateTable::new();
    let mut token_vectors: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let (lo, hi) = config.size_range;

    for t in 0..config.n_taxonomies {
        let size = rng.gen_range(lo + 1..=hi);
        let nodes = build_tree(&mut rng, &mut words, size, config.uncued_fraction);
        let surfaces: Vec<String> = nodes.iter().map(Node::surface).collect();
        let name = format!("syn{t:04}");
        let edges: Vec<(String, String)> = nodes
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, n)| (surfaces[i].clone(), surfaces[n.parent.expect("non-root")].clone()))
            .collect();
        taxonomies.push(TaxonomyFile::new(name, edges)?);

        // Word vectors: generality direction scaled by depth, a shared topic,
        // similarity to the parent's head word, and noise.
        let topic = unit(gaussian_vec(&mut rng, dim, 1.0));
        for node in &nodes {
            let token = &node.tokens[0];
            let level = 1.5 - node.depth as f64;
            let mut v = gaussian_vec(&mut rng, dim, 0.3);
            for k in 0..dim {
                v[k] += 0.8 * level * generality_dir[k] + 0.6 * topic[k];
            }
            if node.tokens.len() == 1 {
                if let Some(p) = node.parent {
                    if let Some(pv) = token_vectors.get(nodes[p].tokens.last().expect("non-empty")) {
                        for k in 0..dim {
                            v[k] += 0.5 * pv[k];
                        }
                    }
                }
            }
            token_vectors.insert(token.clone(), round6(v));
        }

        let sizes = subtree_sizes(&nodes);
        let is_leaf: Vec<bool> = (0..nodes.len())
            .map(|i| !nodes.iter().any(|n| n.parent == Some(i)))
            .collect();
        let inner: Vec<usize> = (0..nodes.len()).filter(|&i| !is_leaf[i]).collect();

        let mut add_path = |rng: &mut ChaCha8Rng, x: usize, y: usize, edges: Vec<PathEdge>, max_count: u64| {
            let count = rng.gen_range(1..=max_count);
            records.push(PathRecord {
                x: surfaces[x].clone(),
                y: surfaces[y].clone(),
                edges: edges.clone(),
                count,
            });
            records.push(PathRecord {
                x: surfaces[y].clone(),
                y: surfaces[x].clone(),
                edges: reversed(&edges),
                count,
            });
        };

        for i in 1..nodes.len() {
            let p = nodes[i].parent.expect("non-root");
            if rng.gen_bool(config.edge_path_prob) {
                let k = rng.gen_range(1..=3);
                let mut pats: Vec<Pattern> = HYPERNYM_PATTERNS.to_vec();
                pats.shuffle(&mut rng);
                for pat in pats.into_iter().take(k) {
                    add_path(&mut rng, i, p, pattern_edges(pat), 10);
                }
            }
            for &a in ancestors(&nodes, i).iter().skip(1) {
                if rng.gen_bool(config.ancestor_path_prob) {
                    let pat = *HYPERNYM_PATTERNS.choose(&mut rng).expect("non-empty");
                    add_path(&mut rng, i, a, pattern_edges(pat), 3);
                }
            }
            for (j, sib) in nodes.iter().enumerate().skip(i + 1) {
                if sib.parent == Some(p) && rng.gen_bool(config.sibling_path_prob) {
                    let pat = *COORDINATION_PATTERNS.choose(&mut rng).expect("non-empty");
                    add_path(&mut rng, i, j, pattern_edges(pat), 5);
                }
            }
        }
        for x in 0..nodes.len() {
            for y in (x + 1)..nodes.len() {
                if rng.gen_bool(config.noise_path_prob) {
                    let len = rng.gen_range(1..=2);
                    let mut edges = vec![PathEdge {
                        lemma: "X".into(),
                        pos: "NOUN".into(),
                        dep: "nsubj".into(),
                        dir: Ty,
                    }];
                    for _ in 0..len {
                        edges.push(PathEdge {
                            lemma: FILLERS.choose(&mut rng).expect("non-empty").to_string(),
                            pos: "VERB".into(),
                            dep: "ROOT".into(),
                            dir: Up,
                        });
                    }
                    edges.push(PathEdge {
                        lemma: "Y".into(),
                        pos: "NOUN".into(),
                        dep: "dobj".into(),
                        dir: Tx,
                    });
                    add_path(&mut rng, x, y, edges, 2);
                }
            }
        }

        // Candidates. The root always keeps its first child edge so its
        // generality is positive; noise never targets a leaf.
        for i in 1..nodes.len() {
            let p = nodes[i].parent.expect("non-root");
            if i == 1 || rng.gen_bool(config.edge_candidate_prob) {
                let freq = 1 + sizes[p] as u64 + rng.gen_range(0..=3);
                candidates.add(surfaces[i].clone(), surfaces[p].clone(), freq);
            }
            for &a in ancestors(&nodes, i).iter().skip(1) {
                if rng.gen_bool(config.ancestor_candidate_prob) {
                    let freq = rng.gen_range(1..=(sizes[a] as u64 / 3).max(1));
                    candidates.add(surfaces[i].clone(), surfaces[a].clone(), freq);
                }
            }
            if rng.gen_bool(config.noise_candidate_prob) {
                let y = *inner.choose(&mut rng).expect("root is inner");
                if y != i {
                    candidates.add(surfaces[i].clone(), surfaces[y].clone(), rng.gen_range(1..=2));
                }
            }
        }
    }

    let mut embeddings = EmbeddingTable::new(dim);
    for (token, v) in token_vectors {
        if !rng.gen_bool(config.oov_fraction) {
            embeddings.insert(token, v)?;
        }
    }

    let names: Vec<String> = taxonomies.iter().map(|t| t.name.clone()).collect();
    let split = match config.split {
        SplitSpec::Proportional => DatasetSplit::proportional(&names, config.seed),
        SplitSpec::Counts(a, b, _) => {
            let mut shuffled = names.clone();
            shuffled.shuffle(&mut rng);
            let test = shuffled.split_off(a + b);
            let validation = shuffled.split_off(a);
            DatasetSplit {
                train: shuffled,
                validation,
                test,
            }
        }
    };

    Ok(Dataset {
        taxonomies,
        embeddings,
        paths: PathCorpus::from_records(records, super::DEFAULT_PATH_CAP),
        candidates,
        split,
    })
}

/// Every token used by any term surface in the dataset.
pub fn vocabulary(dataset: &Dataset) -> BTreeSet<String> {
    dataset
        .taxonomies
        .iter()
        .flat_map(|t| t.edges.iter().flat_map(|(c, p)| [c.clone(), p.clone()]))
        .flat_map(|s| s.split_whitespace().map(str::to_string).collect::<Vec<_>>())
        .collect()
}
