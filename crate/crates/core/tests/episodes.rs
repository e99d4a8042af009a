mod common;

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use taxo_induct::autodiff::Tape;
use taxo_induct::encoder::{Model, ModelConfig, PreparedTaxonomy, RepresentationCache, VIRTUAL_ROOT};
use taxo_induct::env::{Action, Env, Mode, Restriction};
use taxo_induct::taxo::{evaluate, Taxonomy, TermId};
use taxo_induct::trainer::{induce, reinforce_loss, run_episode, Chooser, Trajectory};

use common::{features, synthetic, tiny};

/// Gold-consistent action sequence. NR episodes starting below the gold root
/// first climb to it with new-root actions.
fn gold_actions(gold: &Taxonomy, mode: Mode, start: Option<TermId>) -> Vec<Action> {
    let root = gold.root().unwrap();
    let mut actions = Vec::new();
    let mut placed = Vec::new();
    match start {
        Some(s) => {
            placed.push(s);
            let mut v = s;
            while let Some(p) = gold.parent_of(v) {
                actions.push(Action::NewRoot(p));
                placed.push(p);
                v = p;
            }
        }
        None => {
            assert_eq!(mode, Mode::Re);
            actions.push(Action::Attach {
                child: root,
                parent: VIRTUAL_ROOT,
            });
            placed.push(root);
        }
    }
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        for c in gold.children_of(v) {
            if !placed.contains(&c) {
                actions.push(Action::Attach { child: c, parent: v });
            }
            queue.push_back(c);
        }
    }
    actions
}

/// Indices of `actions` within each successive legal action list.
fn action_indices(prep: &PreparedTaxonomy, mode: Mode, start: Option<TermId>, actions: &[Action]) -> Vec<usize> {
    let vocab = prep.term_ids();
    let mut env = Env::reset_with_root(
        &vocab,
        mode,
        Restriction::None,
        prep.gold.as_ref(),
        &prep.candidates,
        start,
    )
    .unwrap();
    actions
        .iter()
        .map(|a| {
            let i = env.legal_actions().unwrap().iter().position(|b| b == a).unwrap();
            env.step(*a).unwrap();
            i
        })
        .collect()
}

fn replay(model: &Model, prep: &PreparedTaxonomy, mode: Mode, start: Option<TermId>, idx: &[usize]) -> Trajectory {
    let mut tape = Tape::new(&model.store);
    let mut cache = RepresentationCache::new(true);
    run_episode(
        &mut tape,
        model,
        prep,
        mode,
        Restriction::None,
        start,
        Chooser::Replay(idx),
        &mut cache,
    )
    .unwrap()
}

#[test]
fn gold_replay_earns_full_reward_and_beats_untrained_policy() {
    let fixture = synthetic(3, 4, &features(true, true));
    let mut untrained = Vec::new();
    for prep in &fixture.preps {
        let gold = prep.gold.as_ref().unwrap();
        let leaf = *gold.nodes().iter().find(|&&v| gold.children_of(v).is_empty()).unwrap();
        for (mode, start) in [(Mode::Re, None), (Mode::Nr, gold.root()), (Mode::Nr, Some(leaf))] {
            let actions = gold_actions(gold, mode, start);
            let idx = action_indices(prep, mode, start, &actions);
            let t = replay(&fixture.model, prep, mode, start, &idx);
            assert_eq!(t.tree.edge_set(), gold.edge_set());
            assert!((t.total_reward() - 1.0).abs() < 1e-12);
            assert_eq!(evaluate(&t.tree, gold).unwrap().edge_f1, 1.0);
        }
        let greedy = induce(&fixture.model, prep, Mode::Re, Restriction::None, None, false).unwrap();
        untrained.push(evaluate(&greedy.tree, gold).unwrap().edge_f1);
    }
    assert!(
        untrained.iter().all(|&f| f < 1.0),
        "untrained greedy F1_e {untrained:?}"
    );
}

fn sampled(model: &Model, prep: &PreparedTaxonomy, tape: &mut Tape, seed: u64) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cache = RepresentationCache::new(true);
    run_episode(
        tape,
        model,
        prep,
        Mode::Re,
        Restriction::None,
        None,
        Chooser::Sample(&mut rng),
        &mut cache,
    )
    .unwrap()
}

#[test]
fn rollout_order_does_not_change_the_loss() {
    let fixture = tiny(&ModelConfig::default(), 1);
    let model = &fixture.model;
    let prep = &fixture.preps[0];
    let mut tape = Tape::new(&model.store);
    let a = sampled(model, prep, &mut tape, 1);
    let b = sampled(model, prep, &mut tape, 2);
    let c = sampled(model, prep, &mut tape, 3);
    let x = reinforce_loss(&mut tape, &[a.clone(), b.clone(), c.clone()], 0.4, 0.2).unwrap();
    let y = reinforce_loss(&mut tape, &[c, a, b], 0.4, 0.2).unwrap();
    let (x, y) = (tape.scalar(x), tape.scalar(y));
    assert!((x - y).abs() <= 1e-14 * x.abs().max(1.0), "{x} vs {y}");
}

#[test]
fn zero_advantage_gives_zero_gradient() {
    let fixture = tiny(&features(true, true), 2);
    let model = &fixture.model;
    let prep = &fixture.preps[0];
    let mut tape = Tape::new(&model.store);
    let mut t = sampled(model, prep, &mut tape, 7);
    t.rewards.iter_mut().for_each(|r| *r = 0.3);
    let loss = reinforce_loss(&mut tape, &[t], 0.0, 0.3).unwrap();
    assert_eq!(tape.scalar(loss), 0.0);
    let grads = tape.backward(loss).unwrap();
    for p in model.store.iter() {
        assert!(grads.dense(&model.store, p.id).iter().all(|&g| g == 0.0), "{}", p.name);
    }
}

/// Log-likelihood of a fixed trajectory after one gradient-descent step on a
/// loss whose advantage is `advantage` at every step.
fn likelihood_after_step(advantage: f64) -> (f64, f64) {
    let mut fixture = tiny(&features(true, true), 4);
    let prep = fixture.preps[0].clone();
    let (before, idx, grads) = {
        let model = &fixture.model;
        let mut tape = Tape::new(&model.store);
        let mut t = sampled(model, &prep, &mut tape, 11);
        let baseline = 0.1;
        t.rewards.iter_mut().for_each(|r| *r = baseline + advantage);
        let loss = reinforce_loss(&mut tape, std::slice::from_ref(&t), 0.0, baseline).unwrap();
        (
            t.log_likelihood(),
            t.action_indices.clone(),
            tape.backward(loss).unwrap(),
        )
    };
    let ids: Vec<_> = fixture.model.store.iter().map(|p| p.id).collect();
    for id in ids {
        let g = grads.dense(&fixture.model.store, id);
        for (v, g) in fixture.model.store.get_mut(id).value.data.iter_mut().zip(g) {
            *v -= 1e-3 * g;
        }
    }
    let after = replay(&fixture.model, &prep, Mode::Re, None, &idx).log_likelihood();
    (before, after)
}

#[test]
fn advantage_sign_sets_likelihood_direction() {
    let (before, after) = likelihood_after_step(1.0);
    assert!(after > before, "positive advantage: {before} -> {after}");
    let (before, after) = likelihood_after_step(-1.0);
    assert!(after < before, "negative advantage: {before} -> {after}");
}
