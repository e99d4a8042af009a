//! Pairwise hypernym classifier for the two-phase baseline: the policy's
//! pair representation and scoring head, trained with binary cross-entropy
//! on "x is-a y" labels, whose probabilities weight a maximum arborescence.

use std::collections::{BTreeMap, BTreeSet};

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Adam, NodeId, Tape};
use crate::encoder::{Model, ModelConfig, PreparedTaxonomy, RepresentationCache};
use crate::taxo::{evaluate as evaluate_tree, two_phase_baseline, BaselineConfig, MetricReport, Taxonomy, TermId};
use crate::{Error, Result};

/// Which gold pairs count as positive examples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Positives {
    /// Every (descendant, ancestor) pair.
    Ancestor,
    /// Direct (child, parent) edges only.
    Edge,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairwiseConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub positives: Positives,
    pub baseline: BaselineConfig,
    pub model: ModelConfig,
}

impl Default for PairwiseConfig {
    fn default() -> Self {
        PairwiseConfig {
            epochs: 20,
            lr: 1e-3,
            seed: 0,
            positives: Positives::Ancestor,
            baseline: BaselineConfig::default(),
            model: ModelConfig::default(),
        }
    }
}

fn positives(gold: &Taxonomy, which: Positives) -> Result<BTreeSet<(TermId, TermId)>> {
    Ok(match which {
        Positives::Ancestor => gold.ancestor_closure()?,
        Positives::Edge => gold.edge_set(),
    })
}

/// Mean binary cross-entropy over all ordered pairs of one taxonomy.
pub fn pair_loss(tape: &mut Tape, model: &Model, prep: &PreparedTaxonomy, which: Positives) -> Result<NodeId> {
    let gold = prep
        .gold
        .as_ref()
        .ok_or_else(|| Error::Argument(format!("'{}' has no gold tree", prep.name)))?;
    let pos = positives(gold, which)?;
    let mut cache = RepresentationCache::new(true);
    let n = prep.len();
    let count = (n * (n - 1)) as f64;
    let mut terms = Vec::with_capacity(n * n);
    for x in 0..n {
        for y in 0..n {
            if x == y {
                continue;
            }
            let z = model.pair_logit(tape, prep, x, y, &mut cache)?;
            let signed = if pos.contains(&(x, y)) { z } else { tape.scale(z, -1.0) };
            terms.push((tape.log_sigmoid(signed), -1.0 / count));
        }
    }
    Ok(tape.linear_combination(&terms)?)
}

/// `sigmoid(logit)` for every ordered pair.
pub fn pair_scores(model: &Model, prep: &PreparedTaxonomy) -> Result<BTreeMap<(TermId, TermId), f64>> {
    let mut tape = Tape::new(&model.store);
    let mut cache = RepresentationCache::new(true);
    let mut scores = BTreeMap::new();
    for x in 0..prep.len() {
        for y in 0..prep.len() {
            if x != y {
                let z = model.pair_logit(&mut tape, prep, x, y, &mut cache)?;
                scores.insert((x, y), 1.0 / (1.0 + (-tape.scalar(z)).exp()));
            }
        }
    }
    Ok(scores)
}

pub fn baseline_tree(model: &Model, prep: &PreparedTaxonomy, config: &BaselineConfig) -> Result<Taxonomy> {
    let scores = pair_scores(model, prep)?;
    Ok(two_phase_baseline(&scores, &prep.term_ids(), config)?)
}

pub fn evaluate_baseline(model: &Model, preps: &[PreparedTaxonomy], config: &BaselineConfig) -> Result<MetricReport> {
    let mut reports = Vec::with_capacity(preps.len());
    for prep in preps {
        let gold = prep
            .gold
            .as_ref()
            .ok_or_else(|| Error::Argument(format!("'{}' has no gold tree", prep.name)))?;
        reports.push(evaluate_tree(&baseline_tree(model, prep, config)?, gold)?);
    }
    Ok(MetricReport::macro_average(&reports))
}

pub struct PairwiseReport {
    pub best: Model,
    pub best_epoch: usize,
    /// Validation Edge-F1 of the MST trees per epoch.
    pub validation_f1: Vec<f64>,
}

/// One Adam step per training taxonomy; keeps the epoch whose MST trees
/// score the best validation Edge-F1.
pub fn train_pairwise(
    config: &PairwiseConfig,
    mut model: Model,
    train: &[PreparedTaxonomy],
    validation: &[PreparedTaxonomy],
) -> Result<PairwiseReport> {
    if train.is_empty() {
        return Err(Error::Argument("no training taxonomies".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(config.lr);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best: Option<(f64, usize, Model)> = None;
    let mut validation_f1 = Vec::new();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let grads = {
                let mut tape = Tape::new(&model.store);
                let loss = pair_loss(&mut tape, &model, &train[i], config.positives)?;
                let v = tape.scalar(loss);
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("pairwise loss {v} on '{}'", train[i].name)));
                }
                tape.backward(loss)?
            };
            model.store.accumulate(&grads);
            adam.step(&mut model.store);
        }
        if !validation.is_empty() {
            let f = evaluate_baseline(&model, validation, &config.baseline)?.edge_f1;
            info!("pairwise epoch {epoch}: validation F1_e {f:.4}");
            validation_f1.push(f);
            if best.as_ref().is_none_or(|(b, _, _)| f > *b) {
                best = Some((f, epoch, model.clone()));
            }
        }
    }
    let (best_epoch, best) = match best {
        Some((_, e, m)) => (e, m),
        None => (config.epochs, model),
    };
    Ok(PairwiseReport {
        best,
        best_epoch,
        validation_f1,
    })
}
