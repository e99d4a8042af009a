#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use taxo_induct::autodiff::{ParamId, Tape};
use taxo_induct::data::{
    gen_synthetic, CandidateTable, Dataset, EmbeddingTable, PathCorpus, SplitSpec, SyntheticConfig, TaxonomyFile,
    DEFAULT_PATH_CAP,
};
use taxo_induct::encoder::{Model, ModelConfig, PreparedTaxonomy, RepresentationCache, Resources};
use taxo_induct::env::{Mode, Restriction};
use taxo_induct::features::FeatureConfig;
use taxo_induct::taxo::TermId;
use taxo_induct::trainer::{build_model, prepare_files, reinforce_loss, run_episode, surface_tokens, Chooser};

/// Owned resources plus a model and its prepared taxonomies.
pub struct Fixture {
    pub embeddings: EmbeddingTable,
    pub paths: PathCorpus,
    pub candidates: CandidateTable,
    pub files: Vec<TaxonomyFile>,
    pub model: Model,
    pub preps: Vec<PreparedTaxonomy>,
}

impl Fixture {
    pub fn resources(&self) -> Resources<'_> {
        Resources {
            embeddings: &self.embeddings,
            paths: &self.paths,
            candidates: &self.candidates,
        }
    }
}

fn build(
    embeddings: EmbeddingTable,
    paths: PathCorpus,
    candidates: CandidateTable,
    files: Vec<TaxonomyFile>,
    config: &ModelConfig,
    seed: u64,
) -> Fixture {
    let res = Resources {
        embeddings: &embeddings,
        paths: &paths,
        candidates: &candidates,
    };
    let refs: Vec<&TaxonomyFile> = files.iter().collect();
    let model = build_model(config, &res, &refs, &surface_tokens(refs.iter().copied()), seed).unwrap();
    let preps = prepare_files(&model, &refs, &res).unwrap();
    Fixture {
        embeddings,
        paths,
        candidates,
        files,
        model,
        preps,
    }
}

const TINY_PATHS: &str = "\
cat\tanimal\tX/NOUN/nsubj/>_be/VERB/ROOT/^_Y/NOUN/attr/<\t4
cat\tanimal\tX/NOUN/pobj/<_such/ADJ/amod/^_Y/NOUN/dobj/>\t1
dog\tanimal\tX/NOUN/nsubj/>_be/VERB/ROOT/^_Y/NOUN/attr/<\t2
cat\tdog\tX/NOUN/conj/>_and/CCONJ/cc/^_Y/NOUN/conj/<\t3
dog\tcat\tX/NOUN/conj/>_and/CCONJ/cc/^_Y/NOUN/conj/<\t1
";

const TINY_CANDIDATES: &str = "cat\tanimal\t5\ndog\tanimal\t3\ncat\tdog\t1\n";

/// A three-term taxonomy `{cat, dog} is-a animal` with random word vectors.
pub fn tiny(config: &ModelConfig, seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut embeddings = EmbeddingTable::new(config.word_dim);
    for w in ["cat", "dog", "animal", "be", "such", "and"] {
        let v = (0..config.word_dim).map(|_| rng.gen_range(-0.5..0.5)).collect();
        embeddings.insert(w, v).unwrap();
    }
    let paths = PathCorpus::parse(TINY_PATHS.as_bytes(), DEFAULT_PATH_CAP, Path::new("tiny")).unwrap();
    let candidates = CandidateTable::parse(TINY_CANDIDATES, Path::new("tiny")).unwrap();
    let file = TaxonomyFile::new(
        "tiny",
        vec![("cat".into(), "animal".into()), ("dog".into(), "animal".into())],
    )
    .unwrap();
    build(embeddings, paths, candidates, vec![file], config, seed)
}

pub fn synthetic_dataset(seed: u64, n: usize, size: (usize, usize), split: SplitSpec) -> Dataset {
    gen_synthetic(&SyntheticConfig {
        n_taxonomies: n,
        size_range: size,
        seed,
        split,
        ..SyntheticConfig::default()
    })
    .unwrap()
}

/// Model and preparations over every taxonomy of a synthetic dataset.
pub fn synthetic(seed: u64, n: usize, config: &ModelConfig) -> Fixture {
    let ds = synthetic_dataset(seed, n, (10, 15), SplitSpec::Proportional);
    build(ds.embeddings, ds.paths, ds.candidates, ds.taxonomies, config, seed)
}

pub fn features(surface: bool, fg: bool) -> ModelConfig {
    ModelConfig {
        features: FeatureConfig {
            surface,
            fg,
            ..FeatureConfig::default()
        },
        ..ModelConfig::default()
    }
}

/// Best total weight over every arborescence rooted at `root`, by trying
/// all parent assignments.
pub fn brute_force_arborescence(n: usize, weights: &BTreeMap<(TermId, TermId), f64>, root: TermId) -> f64 {
    let others: Vec<usize> = (0..n).filter(|&v| v != root).collect();
    let mut parent = vec![0usize; n];
    let mut best = f64::NEG_INFINITY;
    let total = (n as u64).pow(others.len() as u32);
    for code in 0..total {
        let mut c = code;
        let mut ok = true;
        for &v in &others {
            parent[v] = (c % n as u64) as usize;
            c /= n as u64;
            if parent[v] == v {
                ok = false;
            }
        }
        if !ok {
            continue;
        }
        let acyclic = others.iter().all(|&start| {
            let mut v = start;
            for _ in 0..n {
                if v == root {
                    return true;
                }
                v = parent[v];
            }
            v == root
        });
        if !acyclic {
            continue;
        }
        let w: f64 = others.iter().map(|&v| weights[&(v, parent[v])]).sum();
        best = best.max(w);
    }
    best
}

/// Complete digraph weights on `n` nodes.
pub fn random_weights(n: usize, rng: &mut ChaCha8Rng) -> BTreeMap<(TermId, TermId), f64> {
    let mut w = BTreeMap::new();
    for c in 0..n {
        for p in 0..n {
            if c != p {
                w.insert((c, p), rng.gen_range(-1.0..1.0));
            }
        }
    }
    w
}

/// REINFORCE loss of a fixed action sequence under the model's current parameters.
pub fn replay_loss(model: &Model, prep: &PreparedTaxonomy, mode: Mode, root: Option<TermId>, actions: &[usize]) -> f64 {
    let mut tape = Tape::new(&model.store);
    let mut cache = RepresentationCache::new(true);
    let t = run_episode(
        &mut tape,
        model,
        prep,
        mode,
        Restriction::None,
        root,
        Chooser::Replay(actions),
        &mut cache,
    )
    .unwrap();
    let loss = reinforce_loss(&mut tape, &[t], 0.4, 0.05).unwrap();
    tape.scalar(loss)
}

/// Per-tensor comparison of the analytic directional derivative with a
/// central difference along a random unit direction.
pub struct TensorCheck {
    pub name: String,
    pub analytic: f64,
    pub numeric: f64,
}

impl TensorCheck {
    /// `|a - n| / max(|a|, |n|)`; both below `1e-7` count as agreeing zeros.
    pub fn relative_error(&self) -> f64 {
        let scale = self.analytic.abs().max(self.numeric.abs());
        if scale < 1e-7 {
            0.0
        } else {
            (self.analytic - self.numeric).abs() / scale
        }
    }
}

pub fn gradient_check(fixture: &mut Fixture, mode: Mode, seed: u64, h: f64) -> Vec<TensorCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prep = fixture.preps[0].clone();
    let root = match mode {
        Mode::Nr => Some(rng.gen_range(0..prep.len())),
        Mode::Re => None,
    };
    let (actions, grads) = {
        let model = &fixture.model;
        let mut tape = Tape::new(&model.store);
        let mut cache = RepresentationCache::new(true);
        let t = run_episode(
            &mut tape,
            model,
            &prep,
            mode,
            Restriction::None,
            root,
            Chooser::Sample(&mut rng),
            &mut cache,
        )
        .unwrap();
        let loss = reinforce_loss(&mut tape, std::slice::from_ref(&t), 0.4, 0.05).unwrap();
        (t.action_indices.clone(), tape.backward(loss).unwrap())
    };
    let ids: Vec<(ParamId, String)> = fixture.model.store.iter().map(|p| (p.id, p.name.clone())).collect();
    let mut checks = Vec::new();
    for (id, name) in ids {
        let len = fixture.model.store.value(id).len();
        let mut dir: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        dir.iter_mut().for_each(|d| *d /= norm);
        let g = grads.dense(&fixture.model.store, id);
        let analytic: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        let original = fixture.model.store.value(id).data.clone();
        let mut eval_at = |sign: f64| {
            let p = fixture.model.store.get_mut(id);
            for ((v, o), d) in p.value.data.iter_mut().zip(&original).zip(&dir) {
                *v = o + sign * h * d;
            }
            replay_loss(&fixture.model, &prep, mode, root, &actions)
        };
        let plus = eval_at(1.0);
        let minus = eval_at(-1.0);
        fixture.model.store.get_mut(id).value.data.copy_from_slice(&original);
        checks.push(TensorCheck {
            name,
            analytic,
            numeric: (plus - minus) / (2.0 * h),
        });
    }
    checks
}
