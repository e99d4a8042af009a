//! Rooted taxonomy trees over dense term ids.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::TaxoError;

/// Dense per-dataset term index.
pub type TermId = usize;

/// A vocabulary entry.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    pub id: TermId,
    /// Lowercased, whitespace-normalized surface form.
    pub surface: String,
    /// Whether the surface was written with an uppercase letter before normalization.
    #[serde(default)]
    pub capitalized: bool,
}

impl Term {
    pub fn new(id: TermId, surface: impl Into<String>) -> Self {
        Term {
            id,
            surface: surface.into(),
            capitalized: false,
        }
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.surface.split_whitespace()
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.surface)
    }
}

/// A rooted tree of is-a edges, child (hyponym) to parent (hypernym).
///
/// When `has_virtual_root` is set, the real root hangs below an implicit
/// virtual node. That node never appears in `nodes` and its incident edge
/// is not counted anywhere.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taxonomy {
    nodes: BTreeSet<TermId>,
    parent: BTreeMap<TermId, TermId>,
    root: Option<TermId>,
    has_virtual_root: bool,
}

impl Taxonomy {
    /// An empty tree.
    pub fn new() -> Self {
        Self::default()
    }

    /// An empty tree anchored on a virtual root.
    pub fn with_virtual_root() -> Self {
        Taxonomy {
            has_virtual_root: true,
            ..Self::default()
        }
    }

    /// A single-node tree.
    pub fn singleton(root: TermId) -> Self {
        let mut t = Self::new();
        t.nodes.insert(root);
        t.root = Some(root);
        t
    }

    /// Builds and validates a tree from `(child, parent)` edges.
    ///
    /// An edge list that is empty yields an empty tree; use [`Taxonomy::singleton`]
    /// for one-node trees.
    pub fn from_edges(edges: &[(TermId, TermId)]) -> Result<Self, TaxoError> {
        let mut t = Self::new();
        for &(child, parent) in edges {
            if child == parent {
                return Err(TaxoError::Cycle(child));
            }
            if t.parent.insert(child, parent).is_some() {
                return Err(TaxoError::MultipleParents(child));
            }
            t.nodes.insert(child);
            t.nodes.insert(parent);
        }
        let roots: Vec<TermId> = t.nodes.iter().copied().filter(|n| !t.parent.contains_key(n)).collect();
        match roots.as_slice() {
            [] if t.nodes.is_empty() => {}
            [] => {
                let start = *t.nodes.iter().next().expect("non-empty");
                return Err(TaxoError::Cycle(start));
            }
            [r] => t.root = Some(*r),
            _ => return Err(TaxoError::MultipleRoots(roots)),
        }
        t.validate()?;
        Ok(t)
    }

    pub fn has_virtual_root(&self) -> bool {
        self.has_virtual_root
    }

    pub fn root(&self) -> Option<TermId> {
        self.root
    }

    pub fn nodes(&self) -> &BTreeSet<TermId> {
        &self.nodes
    }

    /// Number of real nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: TermId) -> bool {
        self.nodes.contains(&id)
    }

    pub fn parent_of(&self, id: TermId) -> Option<TermId> {
        self.parent.get(&id).copied()
    }

    /// Real `(child, parent)` edges in child order.
    pub fn edges(&self) -> impl Iterator<Item = (TermId, TermId)> + '_ {
        self.parent.iter().map(|(&c, &p)| (c, p))
    }

    pub fn edge_count(&self) -> usize {
        self.parent.len()
    }

    pub fn edge_set(&self) -> BTreeSet<(TermId, TermId)> {
        self.edges().collect()
    }

    pub fn children_of(&self, id: TermId) -> Vec<TermId> {
        self.edges().filter(|&(_, p)| p == id).map(|(c, _)| c).collect()
    }

    /// Places the first node. Fails if the tree already has one.
    pub fn set_root(&mut self, id: TermId) -> Result<(), TaxoError> {
        if self.root.is_some() {
            return Err(TaxoError::RootAlreadySet);
        }
        self.nodes.insert(id);
        self.root = Some(id);
        Ok(())
    }

    /// Adds `child` as a new leaf below `parent`.
    pub fn attach(&mut self, child: TermId, parent: TermId) -> Result<(), TaxoError> {
        if self.nodes.contains(&child) {
            return Err(TaxoError::AlreadyPresent(child));
        }
        if !self.nodes.contains(&parent) {
            return Err(TaxoError::UnknownNode(parent));
        }
        self.nodes.insert(child);
        self.parent.insert(child, parent);
        Ok(())
    }

    /// Makes `new_root` the parent of the current root.
    pub fn promote_root(&mut self, new_root: TermId) -> Result<(), TaxoError> {
        let old = self.root.ok_or(TaxoError::Empty)?;
        if self.nodes.contains(&new_root) {
            return Err(TaxoError::AlreadyPresent(new_root));
        }
        self.nodes.insert(new_root);
        self.parent.insert(old, new_root);
        self.root = Some(new_root);
        Ok(())
    }

    /// Checks the single-tree invariants.
    pub fn validate(&self) -> Result<(), TaxoError> {
        if self.nodes.is_empty() {
            return if self.parent.is_empty() && self.root.is_none() {
                Ok(())
            } else {
                Err(TaxoError::Empty)
            };
        }
        let root = self.root.ok_or(TaxoError::Empty)?;
        if self.parent.contains_key(&root) {
            return Err(TaxoError::Cycle(root));
        }
        let roots: Vec<TermId> = self
            .nodes
            .iter()
            .copied()
            .filter(|n| !self.parent.contains_key(n))
            .collect();
        if roots.len() != 1 {
            return Err(TaxoError::MultipleRoots(roots));
        }
        for (&c, &p) in &self.parent {
            if !self.nodes.contains(&c) {
                return Err(TaxoError::UnknownNode(c));
            }
            if !self.nodes.contains(&p) {
                return Err(TaxoError::UnknownNode(p));
            }
        }
        // Every walk upward must reach the root within |nodes| steps.
        for &n in &self.nodes {
            let mut cur = n;
            let mut steps = 0;
            while let Some(&p) = self.parent.get(&cur) {
                cur = p;
                steps += 1;
                if steps > self.nodes.len() {
                    return Err(TaxoError::Cycle(n));
                }
            }
            if cur != root {
                return Err(TaxoError::MultipleRoots(vec![root, cur]));
            }
        }
        Ok(())
    }

    /// All `(descendant, proper ancestor)` pairs.
    pub fn ancestor_closure(&self) -> Result<BTreeSet<(TermId, TermId)>, TaxoError> {
        self.validate()?;
        let mut out = BTreeSet::new();
        for &n in &self.nodes {
            let mut cur = n;
            while let Some(&p) = self.parent.get(&cur) {
                out.insert((n, p));
                cur = p;
            }
        }
        Ok(out)
    }

    /// Depth of each node below the root (root = 0).
    pub fn depths(&self) -> BTreeMap<TermId, usize> {
        self.nodes
            .iter()
            .map(|&n| {
                let mut d = 0;
                let mut cur = n;
                while let Some(&p) = self.parent.get(&cur) {
                    d += 1;
                    cur = p;
                }
                (n, d)
            })
            .collect()
    }

    /// Number of nodes on the longest root-to-leaf path.
    pub fn height(&self) -> usize {
        self.depths().values().map(|d| d + 1).max().unwrap_or(0)
    }
}
