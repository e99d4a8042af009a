//! The taxonomy construction process as an episodic environment.
//!
//! Each step takes one remaining term and either attaches it below a term
//! already on the tree or (NR mode) places it above the current root. The
//! reward is the change in Edge-F1 against the gold tree.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::VIRTUAL_ROOT;
use crate::taxo::{prf, Taxonomy, TermId};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Learned virtual root; the first action picks the real root.
    #[serde(rename = "RE")]
    Re,
    /// Random initial root; new-root actions may grow the tree upwards.
    #[serde(rename = "NR")]
    Nr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Restriction {
    None,
    /// Only candidate pairs; stop when none is left.
    Partial,
    /// Only candidate pairs while any exist, then everything.
    Full,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Re => "RE",
            Mode::Nr => "NR",
        })
    }
}

impl fmt::Display for Restriction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Restriction::None => "none",
            Restriction::Partial => "partial",
            Restriction::Full => "full",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "RE" => Ok(Mode::Re),
            "NR" => Ok(Mode::Nr),
            _ => Err(format!("unknown mode '{s}' (expected RE or NR)")),
        }
    }
}

impl std::str::FromStr for Restriction {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Restriction::None),
            "partial" => Ok(Restriction::Partial),
            "full" => Ok(Restriction::Full),
            _ => Err(format!("unknown restriction '{s}' (expected none, partial or full)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    /// `child` becomes a hyponym of `parent`; `parent` may be [`VIRTUAL_ROOT`].
    Attach { child: TermId, parent: TermId },
    /// `term` becomes the parent of the current root.
    NewRoot(TermId),
}

impl Action {
    /// The scored `(hyponym, hypernym)` pair. A new-root action reads as
    /// "current root is-a term".
    pub fn pair(self, root: Option<TermId>) -> (TermId, TermId) {
        match self {
            Action::Attach { child, parent } => (child, parent),
            Action::NewRoot(t) => (root.expect("new-root actions need a root"), t),
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Attach { child, parent } if *parent == VIRTUAL_ROOT => {
                write!(f, "attach {child} -> <root>")
            }
            Action::Attach { child, parent } => write!(f, "attach {child} -> {parent}"),
            Action::NewRoot(t) => write!(f, "new root {t}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub done: bool,
}

/// Edge-F1 of a partial tree: precision over its real edges, recall over all gold edges.
pub fn partial_edge_f1(tree: &Taxonomy, gold: &Taxonomy) -> f64 {
    let shared = tree.edges().filter(|&(c, p)| gold.parent_of(c) == Some(p)).count();
    prf(shared, tree.edge_count(), gold.edge_count()).2
}

/// One episode in progress.
#[derive(Clone, Debug)]
pub struct Env<'a> {
    remaining: BTreeSet<TermId>,
    tree: Taxonomy,
    step: usize,
    initial: usize,
    mode: Mode,
    restriction: Restriction,
    gold: Option<&'a Taxonomy>,
    candidates: &'a BTreeSet<(TermId, TermId)>,
    f1: f64,
    stalled: bool,
}

impl<'a> Env<'a> {
    /// Starts an episode. NR mode draws the initial root uniformly.
    pub fn reset(
        vocab: &[TermId],
        mode: Mode,
        restriction: Restriction,
        gold: Option<&'a Taxonomy>,
        candidates: &'a BTreeSet<(TermId, TermId)>,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let root = match mode {
            Mode::Nr if !vocab.is_empty() => Some(vocab[rng.gen_range(0..vocab.len())]),
            _ => None,
        };
        Self::reset_with_root(vocab, mode, restriction, gold, candidates, root)
    }

    /// Like [`Env::reset`] with a chosen NR root.
    pub fn reset_with_root(
        vocab: &[TermId],
        mode: Mode,
        restriction: Restriction,
        gold: Option<&'a Taxonomy>,
        candidates: &'a BTreeSet<(TermId, TermId)>,
        nr_root: Option<TermId>,
    ) -> Result<Self> {
        let remaining: BTreeSet<TermId> = vocab.iter().copied().collect();
        if remaining.len() < 2 {
            return Err(Error::Argument("an episode needs at least two terms".into()));
        }
        if remaining.len() != vocab.len() || remaining.contains(&VIRTUAL_ROOT) {
            return Err(Error::Argument("vocabulary has duplicate or reserved ids".into()));
        }
        let mut env = Env {
            initial: remaining.len(),
            remaining,
            tree: Taxonomy::new(),
            step: 0,
            mode,
            restriction,
            gold,
            candidates,
            f1: 0.0,
            stalled: false,
        };
        match mode {
            Mode::Re => env.tree = Taxonomy::with_virtual_root(),
            Mode::Nr => {
                let r = nr_root.ok_or_else(|| Error::Argument("NR mode needs an initial root".into()))?;
                if !env.remaining.remove(&r) {
                    return Err(Error::Argument(format!("initial root {r} is not in the vocabulary")));
                }
                env.tree = Taxonomy::singleton(r);
            }
        }
        env.refresh_stall()?;
        Ok(env)
    }

    fn refresh_stall(&mut self) -> Result<()> {
        if !self.remaining.is_empty() && self.restriction == Restriction::Partial {
            self.stalled = self.legal_actions()?.is_empty();
        }
        Ok(())
    }

    pub fn remaining(&self) -> &BTreeSet<TermId> {
        &self.remaining
    }

    pub fn tree(&self) -> &Taxonomy {
        &self.tree
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn initial_size(&self) -> usize {
        self.initial
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn restriction(&self) -> Restriction {
        self.restriction
    }

    /// Current Edge-F1 against gold (0 without gold).
    pub fn edge_f1(&self) -> f64 {
        self.f1
    }

    /// No terms left, or a partial-induction episode ran out of candidates.
    pub fn is_done(&self) -> bool {
        self.remaining.is_empty() || self.stalled
    }

    fn unrestricted(&self) -> Vec<Action> {
        let mut actions = Vec::new();
        if self.tree.is_empty() {
            for &x in &self.remaining {
                actions.push(Action::Attach {
                    child: x,
                    parent: VIRTUAL_ROOT,
                });
            }
            return actions;
        }
        for &x in &self.remaining {
            for &y in self.tree.nodes() {
                actions.push(Action::Attach { child: x, parent: y });
            }
        }
        if self.mode == Mode::Nr {
            actions.extend(self.remaining.iter().map(|&x| Action::NewRoot(x)));
        }
        actions
    }

    /// Legal actions in a fixed order: attachments by `(child, parent)`,
    /// then new-root actions by term.
    pub fn legal_actions(&self) -> Result<Vec<Action>> {
        if self.is_done() {
            return Err(Error::State("episode is over".into()));
        }
        let all = self.unrestricted();
        if self.restriction == Restriction::None || self.tree.is_empty() {
            return Ok(all);
        }
        let root = self.tree.root();
        let restricted: Vec<Action> = all
            .iter()
            .copied()
            .filter(|a| self.candidates.contains(&a.pair(root)))
            .collect();
        if restricted.is_empty() && self.restriction == Restriction::Full {
            Ok(all)
        } else {
            Ok(restricted)
        }
    }

    /// Applies `action` and returns the Edge-F1 change. A partial episode
    /// whose next action set is empty is marked done.
    pub fn step(&mut self, action: Action) -> Result<StepOutcome> {
        let legal = self.legal_actions()?;
        if !legal.contains(&action) {
            return Err(Error::Argument(format!("illegal action: {action}")));
        }
        match action {
            Action::Attach { child, parent } if parent == VIRTUAL_ROOT => self.tree.set_root(child)?,
            Action::Attach { child, parent } => self.tree.attach(child, parent)?,
            Action::NewRoot(t) => self.tree.promote_root(t)?,
        }
        let x = match action {
            Action::Attach { child, .. } => child,
            Action::NewRoot(t) => t,
        };
        self.remaining.remove(&x);
        self.step += 1;
        let reward = match self.gold {
            Some(g) => {
                let f1 = partial_edge_f1(&self.tree, g);
                let r = f1 - self.f1;
                self.f1 = f1;
                r
            }
            None => 0.0,
        };
        self.refresh_stall()?;
        Ok(StepOutcome {
            reward,
            done: self.is_done(),
        })
    }

    /// Terms never placed on the tree.
    pub fn unattached(&self) -> Vec<TermId> {
        self.remaining.iter().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn none() -> BTreeSet<(TermId, TermId)> {
        BTreeSet::new()
    }

    #[test]
    fn episode_lengths() {
        let c = none();
        let vocab: Vec<TermId> = (0..8).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for mode in [Mode::Re, Mode::Nr] {
            let mut env = Env::reset(&vocab, mode, Restriction::None, None, &c, &mut rng).unwrap();
            let mut steps = 0;
            while !env.is_done() {
                let a = env.legal_actions().unwrap()[0];
                env.step(a).unwrap();
                steps += 1;
            }
            assert_eq!(steps, if mode == Mode::Re { 8 } else { 7 });
            env.tree().validate().unwrap();
        }
    }

    #[test]
    fn nr_action_count() {
        let c = none();
        let vocab: Vec<TermId> = (0..8).collect();
        let mut env = Env::reset_with_root(&vocab, Mode::Nr, Restriction::None, None, &c, Some(0)).unwrap();
        for x in 1..5 {
            env.step(Action::Attach { child: x, parent: 0 }).unwrap();
        }
        assert_eq!(env.legal_actions().unwrap().len(), 3 * 5 + 3);
    }

    #[test]
    fn first_correct_edge_reward() {
        let gold = Taxonomy::from_edges(&(1..8).map(|i| (i, 0)).collect::<Vec<_>>()).unwrap();
        let c = none();
        let vocab: Vec<TermId> = (0..8).collect();
        let mut env = Env::reset_with_root(&vocab, Mode::Nr, Restriction::None, Some(&gold), &c, Some(0)).unwrap();
        let out = env.step(Action::Attach { child: 3, parent: 0 }).unwrap();
        assert!((out.reward - 0.25).abs() < 1e-15);
        let wrong = env.step(Action::Attach { child: 4, parent: 3 }).unwrap();
        assert!(wrong.reward < 0.0);
    }

    #[test]
    fn partial_stops_and_full_restores() {
        let c: BTreeSet<(TermId, TermId)> = [(1, 0)].into_iter().collect();
        let vocab: Vec<TermId> = (0..4).collect();
        let mut p = Env::reset_with_root(&vocab, Mode::Nr, Restriction::Partial, None, &c, Some(0)).unwrap();
        assert_eq!(p.legal_actions().unwrap(), vec![Action::Attach { child: 1, parent: 0 }]);
        let out = p.step(Action::Attach { child: 1, parent: 0 }).unwrap();
        assert!(out.done);
        assert_eq!(p.unattached(), vec![2, 3]);
        let mut f = Env::reset_with_root(&vocab, Mode::Nr, Restriction::Full, None, &c, Some(0)).unwrap();
        f.step(Action::Attach { child: 1, parent: 0 }).unwrap();
        assert_eq!(f.legal_actions().unwrap().len(), 2 * 2 + 2);
    }

    #[test]
    fn illegal_actions_rejected() {
        let c = none();
        let vocab: Vec<TermId> = (0..3).collect();
        let mut env = Env::reset_with_root(&vocab, Mode::Nr, Restriction::None, None, &c, Some(0)).unwrap();
        assert!(env.step(Action::Attach { child: 0, parent: 1 }).is_err());
        assert!(env.step(Action::Attach { child: 1, parent: 2 }).is_err());
        let mut re = Env::reset(
            &vocab,
            Mode::Re,
            Restriction::None,
            None,
            &c,
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        re.step(Action::Attach {
            child: 2,
            parent: VIRTUAL_ROOT,
        })
        .unwrap();
        assert!(re
            .step(Action::Attach {
                child: 1,
                parent: VIRTUAL_ROOT
            })
            .is_err());
        assert!(Env::reset(
            &[0],
            Mode::Re,
            Restriction::None,
            None,
            &c,
            &mut ChaCha8Rng::seed_from_u64(0)
        )
        .is_err());
    }

    #[test]
    fn same_seed_same_nr_root() {
        let c = none();
        let vocab: Vec<TermId> = (0..20).collect();
        let a = Env::reset(
            &vocab,
            Mode::Nr,
            Restriction::None,
            None,
            &c,
            &mut ChaCha8Rng::seed_from_u64(9),
        )
        .unwrap();
        let b = Env::reset(
            &vocab,
            Mode::Nr,
            Restriction::None,
            None,
            &c,
            &mut ChaCha8Rng::seed_from_u64(9),
        )
        .unwrap();
        assert_eq!(a.tree().root(), b.tree().root());
    }
}
