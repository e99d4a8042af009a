//! Softmax policy over the legal actions of an [`Env`].

use rand::Rng;

use crate::autodiff::{Axis, NodeId, Tape};
use crate::encoder::{Model, PreparedTaxonomy, RepresentationCache};
use crate::env::{Action, Env};
use crate::{Error, Result};

/// Scored action set of one state.
#[derive(Clone, Debug)]
pub struct PolicyOutput {
    pub actions: Vec<Action>,
    /// Log-probabilities, one per action, as a tape node.
    pub log_probs: NodeId,
    pub probs: Vec<f64>,
}

/// `log softmax` of the head's logits over the legal actions, each row being
/// the representation of the action's `(hyponym, hypernym)` pair.
pub fn score(
    tape: &mut Tape,
    model: &Model,
    prep: &PreparedTaxonomy,
    env: &Env,
    cache: &mut RepresentationCache,
) -> Result<PolicyOutput> {
    let actions = env.legal_actions()?;
    if actions.is_empty() {
        return Err(Error::State("no legal actions to score".into()));
    }
    let root = env.tree().root();
    let logits = actions
        .iter()
        .map(|a| {
            let (x, y) = a.pair(root);
            model.pair_logit(tape, prep, x, y, cache)
        })
        .collect::<Result<Vec<_>>>()?;
    let stacked = tape.concat(&logits)?;
    let log_probs = tape.log_softmax(stacked, Axis::Rows)?;
    let probs = tape.value(log_probs).data.iter().map(|l| l.exp()).collect();
    Ok(PolicyOutput {
        actions,
        log_probs,
        probs,
    })
}

/// Inverse-CDF draw from `probs`.
pub fn sample_index(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Samples an action; returns its index and log-probability node.
pub fn sample_action(tape: &mut Tape, out: &PolicyOutput, rng: &mut impl Rng) -> Result<(usize, NodeId)> {
    let i = sample_index(&out.probs, rng);
    Ok((i, tape.pick(out.log_probs, i)?))
}

/// Argmax, lowest index on ties.
pub fn greedy_action(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn greedy_ties_and_argmax() {
        assert_eq!(greedy_action(&[0.2, 0.5, 0.3]), 1);
        assert_eq!(greedy_action(&[0.5, 0.5]), 0);
    }

    #[test]
    fn degenerate_distribution() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(sample_index(&[1.0], &mut rng), 0);
        }
    }

    #[test]
    fn empirical_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let ones = (0..n).filter(|_| sample_index(&[0.25, 0.75], &mut rng) == 1).count();
        assert!((ones as f64 / n as f64 - 0.75).abs() < 0.01);
    }
}
