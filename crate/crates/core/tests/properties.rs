mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use taxo_induct::autodiff::{Tape, Tensor};
use taxo_induct::data::CandidateTable;
use taxo_induct::encoder::ModelConfig;
use taxo_induct::env::{Env, Mode, Restriction};
use taxo_induct::features::{freq_diff, generality_diff};
use taxo_induct::taxo::{evaluate, max_arborescence, total_weight, MetricReport, Taxonomy, TermId};

use common::{brute_force_arborescence, random_weights, tiny};

/// A random tree over `0..n`: node order is shuffled, then each node after
/// the first picks an earlier node as parent.
fn tree_strategy(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Taxonomy> {
    (n, any::<u64>()).prop_map(|(n, seed)| random_tree(n, seed))
}

fn random_tree(n: usize, seed: u64) -> Taxonomy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<TermId> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let edges: Vec<_> = (1..n).map(|i| (order[i], order[rng.gen_range(0..i)])).collect();
    Taxonomy::from_edges(&edges).unwrap()
}

fn in_unit(r: &MetricReport) -> bool {
    r.as_array().iter().all(|v| (0.0..=1.0).contains(v))
}

proptest! {
    #[test]
    fn metrics_are_bounded(n in 2usize..12, a in any::<u64>(), b in any::<u64>()) {
        let r = evaluate(&random_tree(n, a), &random_tree(n, b)).unwrap();
        prop_assert!(in_unit(&r));
        for (p, rec, f) in [
            (r.ancestor_precision, r.ancestor_recall, r.ancestor_f1),
            (r.edge_precision, r.edge_recall, r.edge_f1),
        ] {
            prop_assert!(f <= p.max(rec) + 1e-12);
            prop_assert!(f >= p.min(rec) - 1e-12 || f == 0.0);
        }
    }

    #[test]
    fn tree_against_itself_is_perfect(t in tree_strategy(2..=14)) {
        prop_assert_eq!(evaluate(&t, &t).unwrap(), MetricReport::perfect());
    }

    #[test]
    fn same_vocabulary_trees_have_equal_edge_precision_and_recall(n in 2usize..12, a in any::<u64>(), b in any::<u64>()) {
        let r = evaluate(&random_tree(n, a), &random_tree(n, b)).unwrap();
        prop_assert!((r.edge_precision - r.edge_recall).abs() < 1e-12);
    }

    #[test]
    fn arborescence_matches_brute_force(n in 2usize..=6, root_pick in any::<usize>(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_weights(n, &mut rng);
        let root = root_pick % n;
        let tree = max_arborescence(n, &w, root).unwrap();
        prop_assert_eq!(tree.root(), Some(root));
        prop_assert_eq!(tree.len(), n);
        prop_assert!((total_weight(&tree, &w) - brute_force_arborescence(n, &w, root)).abs() < 1e-9);
    }

    #[test]
    fn frequency_and_generality_are_antisymmetric(
        entries in prop::collection::vec((0usize..5, 0usize..5, 1u64..50), 0..15),
        x in 0usize..5,
        y in 0usize..5,
    ) {
        let names = ["cat", "dog", "animal", "pet", "fish"];
        let table = CandidateTable::from_entries(
            entries
                .into_iter()
                .filter(|(a, b, _)| a != b)
                .map(|(a, b, f)| ((names[a].to_string(), names[b].to_string()), f)),
        );
        let (x, y) = (names[x], names[y]);
        prop_assert_eq!(freq_diff(x, y, &table), -freq_diff(y, x, &table));
        prop_assert_eq!(generality_diff(x, y, &table), -generality_diff(y, x, &table));
        prop_assert!(freq_diff(x, y, &table).abs() <= 1.0);
    }

    #[test]
    fn path_pooling_ignores_order(
        items in prop::collection::vec((prop::collection::vec(-2.0f64..2.0, 4), 1.0f64..20.0), 1..6),
        seed in any::<u64>(),
    ) {
        let fixture = tiny(&ModelConfig::default(), 0);
        let model = &fixture.model;
        let mut tape = Tape::new(&model.store);
        let nodes: Vec<_> = items
            .iter()
            .map(|(v, c)| (tape.constant(Tensor::vector(v.clone())), *c))
            .collect();
        let mut shuffled = nodes.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.gen_range(0..=i));
        }
        let a = model.pool_paths(&mut tape, &nodes).unwrap();
        let b = model.pool_paths(&mut tape, &shuffled).unwrap();
        for (u, v) in tape.value(a).data.iter().zip(&tape.value(b).data) {
            prop_assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn episodes_conserve_terms_and_telescope(
        gold in tree_strategy(2..=12),
        nr in any::<bool>(),
        restriction in prop::sample::select(vec![Restriction::None, Restriction::Partial, Restriction::Full]),
        candidate_seed in any::<u64>(),
        seed in any::<u64>(),
    ) {
        let mode = if nr { Mode::Nr } else { Mode::Re };
        let vocab: Vec<TermId> = gold.nodes().iter().copied().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(candidate_seed);
        let candidates: BTreeSet<(TermId, TermId)> = vocab
            .iter()
            .flat_map(|&a| vocab.iter().map(move |&b| (a, b)))
            .filter(|(a, b)| a != b && rng.gen_bool(0.3))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut env = Env::reset(&vocab, mode, restriction, Some(&gold), &candidates, &mut rng).unwrap();
        let initial = env.initial_size();
        prop_assert_eq!(initial, vocab.len());
        let mut total = 0.0;
        while !env.is_done() {
            let legal = env.legal_actions().unwrap();
            prop_assert!(!legal.is_empty());
            let a = legal[rng.gen_range(0..legal.len())];
            total += env.step(a).unwrap().reward;
            prop_assert_eq!(env.remaining().len() + env.tree().len(), initial);
            env.tree().validate().unwrap();
        }
        prop_assert!((total - env.edge_f1()).abs() < 1e-12);
        if restriction != Restriction::Partial {
            prop_assert!(env.unattached().is_empty());
            let f1 = evaluate(env.tree(), &gold).unwrap().edge_f1;
            prop_assert!((total - f1).abs() < 1e-12);
        }
    }
}
