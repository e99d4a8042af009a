//! Term-pair representations: dependency edges are embedded, run through an
//! LSTM, pooled by path frequency and concatenated with word vectors and
//! feature embeddings. The same module owns the two-layer scoring head.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{NodeId, ParamId, ParamStore, Tape, Tensor};
use crate::data::{CandidateTable, Direction, EmbeddingTable, PathCorpus, PathEdge};
use crate::features::{raw_features, FeatureBinner, FeatureConfig, FeatureEmbedding};
use crate::taxo::{Taxonomy, Term, TermId};
use crate::{Error, Result};

/// Stand-in id for the RE-mode virtual root. It only ever appears as a hypernym.
pub const VIRTUAL_ROOT: TermId = usize::MAX;

pub const UNK: &str = "<unk>";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub lemma_dim: usize,
    pub pos_dim: usize,
    pub dep_dim: usize,
    pub dir_dim: usize,
    /// LSTM hidden size, which is also the pooled path length.
    pub path_dim: usize,
    pub word_dim: usize,
    /// Hidden units of the scoring head.
    pub hidden_dim: usize,
    /// Fine-tune word vectors instead of keeping them fixed.
    pub train_word_vectors: bool,
    pub features: FeatureConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            lemma_dim: 50,
            pos_dim: 4,
            dep_dim: 5,
            dir_dim: 1,
            path_dim: 60,
            word_dim: 50,
            hidden_dim: 100,
            train_word_vectors: false,
            features: FeatureConfig::default(),
        }
    }
}

impl ModelConfig {
    pub fn edge_dim(&self) -> usize {
        self.lemma_dim + self.pos_dim + self.dep_dim + self.dir_dim
    }

    /// `dim(R) = d_path + 2 d_word + d_feat`.
    pub fn representation_dim(&self) -> usize {
        self.path_dim + 2 * self.word_dim + self.features.output_dim()
    }
}

/// Index tables for path-edge components. Row 0 of each is the unknown entry.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PathVocab {
    pub lemmas: BTreeMap<String, usize>,
    pub pos: BTreeMap<String, usize>,
    pub deps: BTreeMap<String, usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EncodedEdge {
    pub lemma: usize,
    pub pos: usize,
    pub dep: usize,
    pub dir: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncodedPath {
    pub edges: Vec<EncodedEdge>,
    pub count: f64,
}

fn index_table(items: BTreeSet<&str>) -> BTreeMap<String, usize> {
    std::iter::once(UNK)
        .chain(items)
        .enumerate()
        .map(|(i, s)| (s.to_string(), i))
        .collect()
}

impl PathVocab {
    pub fn build<'a>(edges: impl IntoIterator<Item = &'a PathEdge>) -> Self {
        let mut lemmas = BTreeSet::new();
        let mut pos = BTreeSet::new();
        let mut deps = BTreeSet::new();
        for e in edges {
            lemmas.insert(e.lemma.as_str());
            pos.insert(e.pos.as_str());
            deps.insert(e.dep.as_str());
        }
        PathVocab {
            lemmas: index_table(lemmas),
            pos: index_table(pos),
            deps: index_table(deps),
        }
    }

    pub fn from_corpus(corpus: &PathCorpus) -> Self {
        Self::build(corpus.records().flat_map(|r| r.edges.iter()))
    }

    /// Unseen components map to row 0.
    pub fn encode(&self, e: &PathEdge) -> EncodedEdge {
        let get = |t: &BTreeMap<String, usize>, k: &str| t.get(k).copied().unwrap_or(0);
        EncodedEdge {
            lemma: get(&self.lemmas, &e.lemma),
            pos: get(&self.pos, &e.pos),
            dep: get(&self.deps, &e.dep),
            dir: e.dir.index(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub lemma: ParamId,
    pub pos: ParamId,
    pub dep: ParamId,
    pub dir: ParamId,
    pub lstm_w: ParamId,
    pub lstm_b: ParamId,
    pub empty_path: ParamId,
    pub root_word: ParamId,
    /// Trainable token table, present only when word vectors are fine-tuned.
    pub words: Option<ParamId>,
    pub features: FeatureEmbedding,
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

/// Encoder, feature tables and scoring head with their parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Model {
    pub config: ModelConfig,
    pub vocab: PathVocab,
    pub binner: FeatureBinner,
    /// Token rows of the trainable word table.
    pub word_vocab: BTreeMap<String, usize>,
    pub params: ModelParams,
    pub store: ParamStore,
}

fn glorot(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

impl Model {
    /// Fresh parameters. Lemma rows start from `embeddings` where the lemma
    /// has a vector and the dims agree.
    pub fn new(
        config: ModelConfig,
        vocab: PathVocab,
        binner: FeatureBinner,
        embeddings: &EmbeddingTable,
        word_tokens: &BTreeSet<String>,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if !binner.is_fitted() && config.features.surface | config.features.fg {
            return Err(Error::State(
                "feature bins must be fitted before building a model".into(),
            ));
        }
        if embeddings.dim() != config.word_dim {
            return Err(Error::Argument(format!(
                "embedding dim {} does not match word_dim {}",
                embeddings.dim(),
                config.word_dim
            )));
        }
        let mut store = ParamStore::new();
        let c = &config;
        let mut lemma = Tensor::uniform(vec![vocab.lemmas.len(), c.lemma_dim], 0.5, rng);
        if c.lemma_dim == embeddings.dim() {
            for (l, &row) in &vocab.lemmas {
                if let Some(v) = embeddings.get(l) {
                    lemma.data[row * c.lemma_dim..(row + 1) * c.lemma_dim].copy_from_slice(v);
                }
            }
        }
        let lemma = store.add("path.lemma", lemma);
        let pos = store.add("path.pos", Tensor::uniform(vec![vocab.pos.len(), c.pos_dim], 0.5, rng));
        let dep = store.add("path.dep", Tensor::uniform(vec![vocab.deps.len(), c.dep_dim], 0.5, rng));
        let dir = store.add(
            "path.dir",
            Tensor::uniform(vec![Direction::ALL.len(), c.dir_dim], 0.5, rng),
        );
        let in_dim = c.edge_dim() + c.path_dim;
        let lstm_w = store.add(
            "lstm.w",
            Tensor::uniform(vec![4 * c.path_dim, in_dim], glorot(in_dim, c.path_dim), rng),
        );
        let lstm_b = store.add("lstm.b", Tensor::zeros(vec![4 * c.path_dim]));
        let empty_path = store.add("path.empty", Tensor::uniform(vec![c.path_dim], 0.1, rng));
        let root_word = store.add("word.root", Tensor::uniform(vec![c.word_dim], 0.1, rng));

        let mut word_vocab = BTreeMap::new();
        let words = if c.train_word_vectors {
            let known: Vec<(&String, &[f64])> = word_tokens
                .iter()
                .filter_map(|t| embeddings.get(t).map(|v| (t, v)))
                .collect();
            let mut table = Vec::with_capacity(known.len() * c.word_dim);
            for (i, (t, v)) in known.iter().enumerate() {
                word_vocab.insert((*t).clone(), i);
                table.extend_from_slice(v);
            }
            let rows = known.len().max(1);
            table.resize(rows * c.word_dim, 0.0);
            Some(store.add("word.table", Tensor::new(vec![rows, c.word_dim], table)?))
        } else {
            None
        };

        let features = FeatureEmbedding::new(&mut store, &c.features, &binner, rng);
        let r = c.representation_dim();
        let w1 = store.add(
            "head.w1",
            Tensor::uniform(vec![c.hidden_dim, r], glorot(r, c.hidden_dim), rng),
        );
        let b1 = store.add("head.b1", Tensor::zeros(vec![c.hidden_dim]));
        let w2 = store.add(
            "head.w2",
            Tensor::uniform(vec![1, c.hidden_dim], glorot(c.hidden_dim, 1), rng),
        );
        let b2 = store.add("head.b2", Tensor::zeros(vec![1]));
        Ok(Model {
            config,
            vocab,
            binner,
            word_vocab,
            params: ModelParams {
                lemma,
                pos,
                dep,
                dir,
                lstm_w,
                lstm_b,
                empty_path,
                root_word,
                words,
                features,
                w1,
                b1,
                w2,
                b2,
            },
            store,
        })
    }

    /// `V_e = [V_lemma, V_pos, V_dep, V_dir]`.
    pub fn encode_edge(&self, tape: &mut Tape, e: &EncodedEdge) -> Result<NodeId> {
        let p = &self.params;
        let parts = [
            tape.embedding_lookup(p.lemma, e.lemma)?,
            tape.embedding_lookup(p.pos, e.pos)?,
            tape.embedding_lookup(p.dep, e.dep)?,
            tape.embedding_lookup(p.dir, e.dir)?,
        ];
        Ok(tape.concat(&parts)?)
    }

    /// Final LSTM hidden state over the edge sequence, from a zero state.
    pub fn encode_path(&self, tape: &mut Tape, edges: &[EncodedEdge]) -> Result<NodeId> {
        if edges.is_empty() {
            return Err(Error::Argument("cannot encode an empty path".into()));
        }
        let h = self.config.path_dim;
        let w = tape.param(self.params.lstm_w);
        let b = tape.param(self.params.lstm_b);
        let mut state = tape.constant(Tensor::zeros(vec![2 * h]));
        for e in edges {
            let x = self.encode_edge(tape, e)?;
            state = tape.lstm_step(w, b, x, state)?;
        }
        Ok(tape.slice(state, 0, h)?)
    }

    /// `Σ c_p O_p / Σ c_p`, or the learned empty path when there are none.
    pub fn pool_paths(&self, tape: &mut Tape, encoded: &[(NodeId, f64)]) -> Result<NodeId> {
        if encoded.is_empty() {
            return Ok(tape.param(self.params.empty_path));
        }
        Ok(tape.weighted_mean(encoded)?)
    }

    fn word_node(&self, tape: &mut Tape, word: &TermWord) -> Result<NodeId> {
        match self.params.words {
            Some(table) if !word.rows.is_empty() => {
                let rows = word
                    .rows
                    .iter()
                    .map(|&r| Ok((tape.embedding_lookup(table, r)?, 1.0)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(tape.weighted_mean(&rows)?)
            }
            Some(_) => Ok(tape.constant(Tensor::zeros(vec![self.config.word_dim]))),
            None => Ok(tape.constant(Tensor::vector(word.frozen.clone()))),
        }
    }

    /// `R_xy = [P(x, y), V_x, V_y, V_F(x, y)]`. `y` may be [`VIRTUAL_ROOT`].
    pub fn pair_representation(
        &self,
        tape: &mut Tape,
        prep: &PreparedTaxonomy,
        x: TermId,
        y: TermId,
        cache: &mut RepresentationCache,
    ) -> Result<NodeId> {
        if x == VIRTUAL_ROOT || x == y {
            return Err(Error::Argument(format!("invalid term pair ({x}, {y})")));
        }
        if let Some(&n) = cache.pairs.get(&(x, y)) {
            return Ok(n);
        }
        let no_bins;
        let (paths, bins): (&[EncodedPath], &[usize]) = if y == VIRTUAL_ROOT {
            no_bins = vec![0; self.params.features.kinds.len()];
            (&[], &no_bins)
        } else {
            let d = prep.pair(x, y);
            (&d.paths, &d.bins)
        };
        let mut encoded = Vec::with_capacity(paths.len());
        for p in paths {
            let node = match cache.paths.get(&p.edges) {
                Some(&n) => n,
                None => {
                    let n = self.encode_path(tape, &p.edges)?;
                    if cache.enabled {
                        cache.paths.insert(p.edges.clone(), n);
                    }
                    n
                }
            };
            encoded.push((node, p.count));
        }
        let pooled = self.pool_paths(tape, &encoded)?;
        let vx = self.word_node(tape, &prep.words[x])?;
        let vy = if y == VIRTUAL_ROOT {
            tape.param(self.params.root_word)
        } else {
            self.word_node(tape, &prep.words[y])?
        };
        let mut parts = vec![pooled, vx, vy];
        if let Some(f) = self.params.features.embed(tape, bins)? {
            parts.push(f);
        }
        let r = tape.concat(&parts)?;
        if cache.enabled {
            cache.pairs.insert((x, y), r);
        }
        Ok(r)
    }

    /// `W2 ReLU(W1 R + b1) + b2` as a scalar node.
    pub fn head(&self, tape: &mut Tape, rep: NodeId) -> Result<NodeId> {
        let p = &self.params;
        let w1 = tape.param(p.w1);
        let b1 = tape.param(p.b1);
        let w2 = tape.param(p.w2);
        let b2 = tape.param(p.b2);
        let z = tape.matmul(w1, rep)?;
        let z = tape.add(z, b1)?;
        let h = tape.relu(z);
        let o = tape.matmul(w2, h)?;
        let o = tape.add(o, b2)?;
        Ok(tape.pick(o, 0)?)
    }

    /// Score of "x is-a y", cached like representations.
    pub fn pair_logit(
        &self,
        tape: &mut Tape,
        prep: &PreparedTaxonomy,
        x: TermId,
        y: TermId,
        cache: &mut RepresentationCache,
    ) -> Result<NodeId> {
        if let Some(&n) = cache.logits.get(&(x, y)) {
            return Ok(n);
        }
        let rep = self.pair_representation(tape, prep, x, y, cache)?;
        let logit = self.head(tape, rep)?;
        if cache.enabled {
            cache.logits.insert((x, y), logit);
        }
        Ok(logit)
    }

    /// Word vector inputs of one term.
    pub fn term_word(&self, surface: &str, embeddings: &EmbeddingTable) -> TermWord {
        TermWord {
            frozen: embeddings.phrase_vector(surface).0,
            rows: surface
                .split_whitespace()
                .filter_map(|t| {
                    self.word_vocab
                        .get(t)
                        .or_else(|| self.word_vocab.get(&t.to_lowercase()))
                        .copied()
                })
                .collect(),
        }
    }

    /// Precomputes words, encoded paths, feature bins and candidate pairs
    /// for one vocabulary.
    pub fn prepare(
        &self,
        name: &str,
        terms: Vec<Term>,
        gold: Option<Taxonomy>,
        resources: &Resources,
    ) -> Result<PreparedTaxonomy> {
        for (i, t) in terms.iter().enumerate() {
            if t.id != i {
                return Err(Error::Argument(format!(
                    "term ids must be dense, found {} at {i}",
                    t.id
                )));
            }
        }
        let kinds = &self.params.features.kinds;
        let n = terms.len();
        let words = terms
            .iter()
            .map(|t| self.term_word(&t.surface, resources.embeddings))
            .collect();
        let mut pairs = Vec::with_capacity(n * n);
        let mut candidates = BTreeSet::new();
        for x in &terms {
            for y in &terms {
                if x.id == y.id {
                    pairs.push(PairData::default());
                    continue;
                }
                let paths = resources
                    .paths
                    .get(&x.surface, &y.surface)
                    .iter()
                    .map(|r| EncodedPath {
                        edges: r.edges.iter().map(|e| self.vocab.encode(e)).collect(),
                        count: r.count as f64,
                    })
                    .collect();
                let raw = raw_features(x, y, resources.candidates, self.config.features.suffix_cap);
                let bins = self.binner.bins_for(&raw, kinds)?;
                if resources.candidates.contains(&x.surface, &y.surface) {
                    candidates.insert((x.id, y.id));
                }
                pairs.push(PairData { paths, bins });
            }
        }
        Ok(PreparedTaxonomy {
            name: name.to_string(),
            terms,
            gold,
            words,
            pairs,
            candidates,
        })
    }
}

/// Borrowed external resources.
#[derive(Clone, Copy)]
pub struct Resources<'a> {
    pub embeddings: &'a EmbeddingTable,
    pub paths: &'a PathCorpus,
    pub candidates: &'a CandidateTable,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TermWord {
    /// Token-mean of the pre-trained vectors (zero if none are known).
    pub frozen: Vec<f64>,
    /// Rows in the trainable word table.
    pub rows: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PairData {
    pub paths: Vec<EncodedPath>,
    pub bins: Vec<usize>,
}

/// A vocabulary with everything the encoder needs precomputed.
#[derive(Clone, Debug)]
pub struct PreparedTaxonomy {
    pub name: String,
    pub terms: Vec<Term>,
    pub gold: Option<Taxonomy>,
    pub words: Vec<TermWord>,
    pairs: Vec<PairData>,
    /// `(x, y)` pairs listed in the candidate table.
    pub candidates: BTreeSet<(TermId, TermId)>,
}

impl PreparedTaxonomy {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn pair(&self, x: TermId, y: TermId) -> &PairData {
        &self.pairs[x * self.terms.len() + y]
    }

    pub fn term_ids(&self) -> Vec<TermId> {
        (0..self.terms.len()).collect()
    }
}

/// Per-tape memo of path encodings, pair representations and pair logits.
/// Entries refer to nodes of one tape and must be dropped with it.
#[derive(Debug, Default)]
pub struct RepresentationCache {
    pub enabled: bool,
    paths: HashMap<Vec<EncodedEdge>, NodeId>,
    pairs: HashMap<(TermId, TermId), NodeId>,
    logits: HashMap<(TermId, TermId), NodeId>,
}

impl RepresentationCache {
    pub fn new(enabled: bool) -> Self {
        RepresentationCache {
            enabled,
            ..Self::default()
        }
    }

    pub fn clear(&mut self) {
        self.paths.clear();
        self.pairs.clear();
        self.logits.clear();
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::parse_path;
    use crate::features::FeatureBinner;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_model(features: FeatureConfig) -> Model {
        let corpus_edges = parse_path("X/NOUN/nsubj/>_be/VERB/ROOT/^_Y/NOUN/attr/<").unwrap();
        let vocab = PathVocab::build(corpus_edges.iter());
        let mut emb = EmbeddingTable::new(50);
        emb.insert("be", vec![0.25; 50]).unwrap();
        let cfg = ModelConfig {
            features,
            ..ModelConfig::default()
        };
        let binner = FeatureBinner::fit(8, &[[0.0; 9], [1.0; 9]]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        Model::new(cfg, vocab, binner, &emb, &BTreeSet::new(), &mut rng).unwrap()
    }

    #[test]
    fn edge_vector_layout() {
        let m = small_model(FeatureConfig::default());
        let mut tape = Tape::new(&m.store);
        let e = EncodedEdge {
            lemma: 1,
            pos: 1,
            dep: 1,
            dir: 0,
        };
        let f = EncodedEdge { dir: 3, ..e };
        let a = m.encode_edge(&mut tape, &e).unwrap();
        let b = m.encode_edge(&mut tape, &f).unwrap();
        let (va, vb) = (tape.value(a).data.clone(), tape.value(b).data.clone());
        assert_eq!(va.len(), 60);
        assert_eq!(va[..59], vb[..59]);
        assert_ne!(va[59], vb[59]);
    }

    #[test]
    fn lemma_rows_start_from_word_vectors() {
        let m = small_model(FeatureConfig::default());
        let row = m.vocab.lemmas["be"];
        let t = m.store.value(m.params.lemma);
        assert_eq!(&t.data[row * 50..(row + 1) * 50], &[0.25; 50][..]);
        let unknown = PathEdge {
            lemma: "zzz".into(),
            pos: "NOUN".into(),
            dep: "nsubj".into(),
            dir: Direction::TowardX,
        };
        assert_eq!(m.vocab.encode(&unknown).lemma, 0);
    }

    #[test]
    fn path_output_length_is_hidden_size() {
        let m = small_model(FeatureConfig::default());
        let mut tape = Tape::new(&m.store);
        let e = EncodedEdge {
            lemma: 1,
            pos: 1,
            dep: 1,
            dir: 0,
        };
        for len in 1..4 {
            let out = m.encode_path(&mut tape, &vec![e; len]).unwrap();
            assert_eq!(tape.value(out).len(), 60);
        }
        assert!(m.encode_path(&mut tape, &[]).is_err());
    }

    #[test]
    fn pooling_single_and_empty() {
        let m = small_model(FeatureConfig::default());
        let mut tape = Tape::new(&m.store);
        let e = EncodedEdge {
            lemma: 1,
            pos: 1,
            dep: 1,
            dir: 0,
        };
        let o = m.encode_path(&mut tape, &[e]).unwrap();
        let p = m.pool_paths(&mut tape, &[(o, 7.0)]).unwrap();
        assert_eq!(tape.value(p).data, tape.value(o).data);
        let empty = m.pool_paths(&mut tape, &[]).unwrap();
        assert_eq!(tape.value(empty).data, m.store.value(m.params.empty_path).data);
    }

    #[test]
    fn representation_dims() {
        let cfg = ModelConfig::default();
        assert_eq!(cfg.representation_dim(), 60 + 100 + 70);
        let none = ModelConfig {
            features: FeatureConfig {
                surface: false,
                fg: false,
                ..FeatureConfig::default()
            },
            ..ModelConfig::default()
        };
        assert_eq!(none.representation_dim(), 160);
    }
}
