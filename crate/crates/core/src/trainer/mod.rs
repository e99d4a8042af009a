//! REINFORCE training, greedy induction and evaluation.

use std::collections::BTreeSet;

use log::{debug, error, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Adam, NodeId, Tape, Tensor};
use crate::data::{normalize_surface, TaxonomyFile};
use crate::encoder::{Model, ModelConfig, PathVocab, PreparedTaxonomy, RepresentationCache, Resources};
use crate::env::{Action, Env, Mode, Restriction};
use crate::features::{raw_features, FeatureBinner};
use crate::policy::{greedy_action, sample_action, score};
use crate::taxo::{evaluate as evaluate_tree, MetricReport, Taxonomy, TermId};
use crate::{Error, Result};

mod checkpoint;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub rollouts: usize,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub mode: Mode,
    pub restriction: Restriction,
    pub baseline_decay: f64,
    pub baseline_target: BaselineTarget,
    /// Validate every this many epochs (0 disables validation).
    pub eval_every: usize,
    /// Reuse pair representations within an episode's tape.
    pub cache: bool,
    /// NR inference: try every initial root and keep the most likely tree.
    pub nr_root_sweep: bool,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.4,
            rollouts: 10,
            lr: 1e-3,
            epochs: 10,
            seed: 0,
            mode: Mode::Nr,
            restriction: Restriction::None,
            baseline_decay: 0.95,
            baseline_target: BaselineTarget::StepReturn,
            eval_every: 1,
            cache: true,
            nr_root_sweep: false,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Argument(format!("gamma {} is outside [0, 1]", self.gamma)));
        }
        if self.rollouts == 0 {
            return Err(Error::Argument("rollouts must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Argument(format!("learning rate {} must be positive", self.lr)));
        }
        if !(0.0..1.0).contains(&self.baseline_decay) {
            return Err(Error::Argument("baseline_decay must lie in [0, 1)".into()));
        }
        if self.model.features.bins < 2 {
            return Err(Error::Argument("need at least two feature bins".into()));
        }
        Ok(())
    }
}

/// `v_i = r_i + γ v_{i+1}`.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut v = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for i in (0..rewards.len()).rev() {
        acc = rewards[i] + gamma * acc;
        v[i] = acc;
    }
    v
}

/// What the moving-average baseline tracks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineTarget {
    /// Mean undiscounted return of the rollouts.
    EpisodeReturn,
    /// Mean discounted return `v_t` over all steps of the rollouts.
    StepReturn,
}

/// Exponential moving average of rollout returns.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub value: Option<f64>,
    pub decay: f64,
}

impl Baseline {
    pub fn new(decay: f64) -> Self {
        Baseline { value: None, decay }
    }

    /// Current value; 0 before the first update.
    pub fn get(&self) -> f64 {
        self.value.unwrap_or(0.0)
    }

    /// The first observation initializes the average.
    pub fn update(&mut self, mean_return: f64) {
        self.value = Some(match self.value {
            None => mean_return,
            Some(b) => self.decay * b + (1.0 - self.decay) * mean_return,
        });
    }
}

/// How actions are chosen during an episode.
pub enum Chooser<'r> {
    Sample(&'r mut ChaCha8Rng),
    Greedy,
    /// Fixed action indices, one per step.
    Replay(&'r [usize]),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub initial_root: Option<TermId>,
    pub actions: Vec<Action>,
    pub action_indices: Vec<usize>,
    pub log_probs: Vec<NodeId>,
    pub log_prob_values: Vec<f64>,
    pub rewards: Vec<f64>,
    pub tree: Taxonomy,
    pub unattached: Vec<TermId>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_prob_values.iter().sum()
    }
}

/// Uniform initial root for NR mode.
pub fn draw_root(prep: &PreparedTaxonomy, rng: &mut ChaCha8Rng) -> TermId {
    use rand::Rng;
    rng.gen_range(0..prep.len())
}

/// Plays one episode on `tape`. Representations go through `cache`; the
/// caller decides when to clear it.
#[allow(clippy::too_many_arguments)]
pub fn run_episode(
    tape: &mut Tape,
    model: &Model,
    prep: &PreparedTaxonomy,
    mode: Mode,
    restriction: Restriction,
    nr_root: Option<TermId>,
    mut chooser: Chooser,
    cache: &mut RepresentationCache,
) -> Result<Trajectory> {
    let vocab = prep.term_ids();
    let mut env = Env::reset_with_root(&vocab, mode, restriction, prep.gold.as_ref(), &prep.candidates, nr_root)?;
    let mut traj = Trajectory {
        initial_root: env.tree().root(),
        actions: Vec::new(),
        action_indices: Vec::new(),
        log_probs: Vec::new(),
        log_prob_values: Vec::new(),
        rewards: Vec::new(),
        tree: Taxonomy::new(),
        unattached: Vec::new(),
    };
    while !env.is_done() {
        let out = score(tape, model, prep, &env, cache)?;
        let (i, lp) = match &mut chooser {
            Chooser::Sample(rng) => sample_action(tape, &out, *rng)?,
            Chooser::Greedy => {
                let i = greedy_action(&out.probs);
                (i, tape.pick(out.log_probs, i)?)
            }
            Chooser::Replay(idx) => {
                let i = *idx
                    .get(traj.len())
                    .ok_or_else(|| Error::Argument(format!("replay ran out of actions at step {}", traj.len())))?;
                if i >= out.actions.len() {
                    return Err(Error::Argument(format!("replayed action {i} is not legal")));
                }
                (i, tape.pick(out.log_probs, i)?)
            }
        };
        let action = out.actions[i];
        let outcome = env.step(action)?;
        traj.actions.push(action);
        traj.action_indices.push(i);
        traj.log_prob_values.push(tape.scalar(lp));
        traj.log_probs.push(lp);
        traj.rewards.push(outcome.reward);
    }
    traj.tree = env.tree().clone();
    traj.unattached = env.unattached();
    Ok(traj)
}

/// `-(1/K) Σ_k Σ_t log π(a_t) (v_t - b)` over `K` trajectories on one tape.
pub fn reinforce_loss(tape: &mut Tape, trajectories: &[Trajectory], gamma: f64, baseline: f64) -> Result<NodeId> {
    if trajectories.is_empty() {
        return Err(Error::Argument("need at least one trajectory".into()));
    }
    let k = trajectories.len() as f64;
    let mut terms = Vec::new();
    for t in trajectories {
        let v = discounted_returns(&t.rewards, gamma);
        for (&lp, vt) in t.log_probs.iter().zip(v) {
            terms.push((lp, -(vt - baseline) / k));
        }
    }
    if terms.is_empty() {
        return Ok(tape.constant(Tensor::scalar(0.0)));
    }
    Ok(tape.linear_combination(&terms)?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateStats {
    pub loss: f64,
    pub mean_return: f64,
}

/// K sampled rollouts, one backward pass, one Adam step, one baseline update.
pub fn reinforce_update(
    model: &mut Model,
    adam: &mut Adam,
    baseline: &mut Baseline,
    prep: &PreparedTaxonomy,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateStats> {
    let (grads, stats, target) = {
        let mut tape = Tape::new(&model.store);
        let mut cache = RepresentationCache::new(config.cache);
        let mut trajectories = Vec::with_capacity(config.rollouts);
        for _ in 0..config.rollouts {
            let root = match config.mode {
                Mode::Nr => Some(draw_root(prep, rng)),
                Mode::Re => None,
            };
            trajectories.push(run_episode(
                &mut tape,
                model,
                prep,
                config.mode,
                config.restriction,
                root,
                Chooser::Sample(rng),
                &mut cache,
            )?);
        }
        let loss = reinforce_loss(&mut tape, &trajectories, config.gamma, baseline.get())?;
        let loss_value = tape.scalar(loss);
        if !loss_value.is_finite() {
            for (k, t) in trajectories.iter().enumerate() {
                error!(
                    "rollout {k} on {}: rewards {:?}, log-probs {:?}",
                    prep.name, t.rewards, t.log_prob_values
                );
            }
            return Err(Error::NonFinite(format!(
                "loss {loss_value} on '{}' (baseline {})",
                prep.name,
                baseline.get()
            )));
        }
        let grads = tape.backward(loss)?;
        let mean_return = trajectories.iter().map(Trajectory::total_reward).sum::<f64>() / trajectories.len() as f64;
        let target = match config.baseline_target {
            BaselineTarget::EpisodeReturn => mean_return,
            BaselineTarget::StepReturn => {
                let v: Vec<f64> = trajectories
                    .iter()
                    .flat_map(|t| discounted_returns(&t.rewards, config.gamma))
                    .collect();
                if v.is_empty() {
                    0.0
                } else {
                    v.iter().sum::<f64>() / v.len() as f64
                }
            }
        };
        (
            grads,
            UpdateStats {
                loss: loss_value,
                mean_return,
            },
            target,
        )
    };
    model.store.accumulate(&grads);
    adam.step(&mut model.store);
    baseline.update(target);
    Ok(stats)
}

/// Greedy induction. NR mode starts from `nr_root`, or sweeps all roots and
/// keeps the most likely tree when `sweep` is set.
pub fn induce(
    model: &Model,
    prep: &PreparedTaxonomy,
    mode: Mode,
    restriction: Restriction,
    nr_root: Option<TermId>,
    sweep: bool,
) -> Result<Trajectory> {
    let roots: Vec<Option<TermId>> = match mode {
        Mode::Re => vec![None],
        Mode::Nr if sweep => prep.term_ids().into_iter().map(Some).collect(),
        Mode::Nr => {
            vec![Some(nr_root.ok_or_else(|| {
                Error::Argument("NR induction needs an initial root".into())
            })?)]
        }
    };
    let mut best: Option<Trajectory> = None;
    for root in roots {
        let mut tape = Tape::new(&model.store);
        let mut cache = RepresentationCache::new(true);
        let t = run_episode(
            &mut tape,
            model,
            prep,
            mode,
            restriction,
            root,
            Chooser::Greedy,
            &mut cache,
        )?;
        if best.as_ref().is_none_or(|b| t.log_likelihood() > b.log_likelihood()) {
            best = Some(t);
        }
    }
    Ok(best.expect("at least one root"))
}

/// Deterministic per-taxonomy generator for evaluation roots.
pub fn eval_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// Greedy induction on every taxonomy, metrics macro-averaged.
pub fn evaluate(
    model: &Model,
    preps: &[PreparedTaxonomy],
    mode: Mode,
    restriction: Restriction,
    seed: u64,
    sweep: bool,
) -> Result<MetricReport> {
    let mut reports = Vec::with_capacity(preps.len());
    for (i, prep) in preps.iter().enumerate() {
        let gold = prep
            .gold
            .as_ref()
            .ok_or_else(|| Error::Argument(format!("'{}' has no gold tree", prep.name)))?;
        let root = match mode {
            Mode::Nr => Some(draw_root(prep, &mut eval_rng(seed, i))),
            Mode::Re => None,
        };
        let t = induce(model, prep, mode, restriction, root, sweep)?;
        reports.push(evaluate_tree(&t.tree, gold)?);
    }
    Ok(MetricReport::macro_average(&reports))
}

/// Partial and full induction scores on candidate-restricted data.
pub fn evaluate_restricted(
    model: &Model,
    preps: &[PreparedTaxonomy],
    mode: Mode,
    seed: u64,
) -> Result<(MetricReport, MetricReport)> {
    Ok((
        evaluate(model, preps, mode, Restriction::Partial, seed, false)?,
        evaluate(model, preps, mode, Restriction::Full, seed, false)?,
    ))
}

/// One metric-log line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub epoch: usize,
    pub split: String,
    pub report: MetricReport,
}

impl LogRow {
    pub fn to_tsv(&self) -> String {
        let r = &self.report;
        format!(
            "{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\n",
            self.epoch,
            self.split,
            r.ancestor_precision,
            r.ancestor_recall,
            r.ancestor_f1,
            r.edge_precision,
            r.edge_recall,
            r.edge_f1
        )
    }
}

pub const LOG_HEADER: &str = "epoch\tsplit\tPa\tRa\tF1a\tPe\tRe\tF1e\n";

pub struct TrainReport {
    /// Parameters with the best validation Edge-F1 (the last epoch without validation).
    pub best: Model,
    pub best_epoch: usize,
    pub log: Vec<LogRow>,
    pub test: Option<MetricReport>,
}

impl TrainReport {
    pub fn log_tsv(&self) -> String {
        std::iter::once(LOG_HEADER.to_string())
            .chain(self.log.iter().map(LogRow::to_tsv))
            .collect()
    }
}

/// Shuffled REINFORCE passes over `train`, greedy validation each
/// `eval_every` epochs, best-by-Edge-F1 selection and a final test pass.
pub fn train(
    config: &TrainConfig,
    mut model: Model,
    train: &[PreparedTaxonomy],
    validation: &[PreparedTaxonomy],
    test: &[PreparedTaxonomy],
) -> Result<TrainReport> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Argument("no training taxonomies".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(config.lr);
    let mut baseline = Baseline::new(config.baseline_decay);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = Vec::new();
    let mut best: Option<(f64, usize, Model)> = None;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let s = reinforce_update(&mut model, &mut adam, &mut baseline, &train[i], config, &mut rng)?;
            total += s.mean_return;
        }
        debug!("epoch {epoch}: mean return {:.4}", total / train.len() as f64);
        let validate = config.eval_every > 0 && !validation.is_empty() && epoch % config.eval_every == 0;
        if validate {
            let r = evaluate(
                &model,
                validation,
                config.mode,
                config.restriction,
                config.seed,
                config.nr_root_sweep,
            )?;
            info!("epoch {epoch} validation {r}");
            log.push(LogRow {
                epoch,
                split: "validation".into(),
                report: r,
            });
            if best.as_ref().is_none_or(|(f, _, _)| r.edge_f1 > *f) {
                best = Some((r.edge_f1, epoch, model.clone()));
            }
        }
    }
    let (best_epoch, best) = match best {
        Some((_, e, m)) => (e, m),
        None => (config.epochs, model),
    };
    let test_report = if test.is_empty() {
        None
    } else if config.restriction == Restriction::None {
        let r = evaluate(
            &best,
            test,
            config.mode,
            config.restriction,
            config.seed,
            config.nr_root_sweep,
        )?;
        info!("test (epoch {best_epoch}) {r}");
        log.push(LogRow {
            epoch: best_epoch,
            split: "test".into(),
            report: r,
        });
        Some(r)
    } else {
        let mut picked = None;
        for restriction in [Restriction::Partial, Restriction::Full] {
            let r = evaluate(&best, test, config.mode, restriction, config.seed, config.nr_root_sweep)?;
            let split = format!("test-{restriction}");
            info!("{split} (epoch {best_epoch}) {r}");
            log.push(LogRow {
                epoch: best_epoch,
                split,
                report: r,
            });
            if restriction == config.restriction {
                picked = Some(r);
            }
        }
        picked
    };
    Ok(TrainReport {
        best,
        best_epoch,
        log,
        test: test_report,
    })
}

/// All tokens of all term surfaces.
pub fn surface_tokens<'a>(files: impl IntoIterator<Item = &'a TaxonomyFile>) -> BTreeSet<String> {
    files
        .into_iter()
        .flat_map(|f| f.terms())
        .flat_map(|t| {
            normalize_surface(&t.surface)
                .split(' ')
                .map(str::to_string)
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Fits feature bins on all ordered pairs of the training taxonomies,
/// indexes the path vocabulary, and initializes parameters.
pub fn build_model(
    config: &ModelConfig,
    resources: &Resources,
    train: &[&TaxonomyFile],
    word_tokens: &BTreeSet<String>,
    seed: u64,
) -> Result<Model> {
    let mut samples = Vec::new();
    for tf in train {
        let terms = tf.terms();
        for x in &terms {
            for y in &terms {
                if x.id != y.id {
                    samples.push(raw_features(x, y, resources.candidates, config.features.suffix_cap));
                }
            }
        }
    }
    let binner = FeatureBinner::fit(config.features.bins, &samples);
    let vocab = PathVocab::from_corpus(resources.paths);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Model::new(
        config.clone(),
        vocab,
        binner,
        resources.embeddings,
        word_tokens,
        &mut rng,
    )
}

/// Gold tree plus precomputed inputs of one taxonomy file.
pub fn prepare_file(model: &Model, file: &TaxonomyFile, resources: &Resources) -> Result<PreparedTaxonomy> {
    let (terms, gold) = file.to_taxonomy();
    model.prepare(&file.name, terms, Some(gold), resources)
}

pub fn prepare_files(model: &Model, files: &[&TaxonomyFile], resources: &Resources) -> Result<Vec<PreparedTaxonomy>> {
    files.iter().map(|f| prepare_file(model, f, resources)).collect()
}
