//! Ancestor and edge precision/recall/F1.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{TaxoError, Taxonomy, TermId};

/// Precision, recall and F1 for both ancestor (is-a closure) and direct-edge comparisons.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub ancestor_precision: f64,
    pub ancestor_recall: f64,
    pub ancestor_f1: f64,
    pub edge_precision: f64,
    pub edge_recall: f64,
    pub edge_f1: f64,
}

impl MetricReport {
    pub fn perfect() -> Self {
        MetricReport {
            ancestor_precision: 1.0,
            ancestor_recall: 1.0,
            ancestor_f1: 1.0,
            edge_precision: 1.0,
            edge_recall: 1.0,
            edge_f1: 1.0,
        }
    }

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.ancestor_precision,
            self.ancestor_recall,
            self.ancestor_f1,
            self.edge_precision,
            self.edge_recall,
            self.edge_f1,
        ]
    }

    fn from_array(a: [f64; 6]) -> Self {
        MetricReport {
            ancestor_precision: a[0],
            ancestor_recall: a[1],
            ancestor_f1: a[2],
            edge_precision: a[3],
            edge_recall: a[4],
            edge_f1: a[5],
        }
    }

    /// Unweighted mean over reports; the empty mean is all zeros.
    pub fn macro_average(reports: &[MetricReport]) -> MetricReport {
        if reports.is_empty() {
            return MetricReport::default();
        }
        let mut acc = [0.0; 6];
        for r in reports {
            for (a, v) in acc.iter_mut().zip(r.as_array()) {
                *a += v;
            }
        }
        let n = reports.len() as f64;
        MetricReport::from_array(acc.map(|a| a / n))
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "P_a={:.4} R_a={:.4} F1_a={:.4} P_e={:.4} R_e={:.4} F1_e={:.4}",
            self.ancestor_precision,
            self.ancestor_recall,
            self.ancestor_f1,
            self.edge_precision,
            self.edge_recall,
            self.edge_f1
        )
    }
}

/// Harmonic mean, 0 when both inputs are 0. Equal inputs are returned unchanged.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision == recall {
        precision
    } else if precision + recall <= 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// `(precision, recall, f1)` from overlap counts. Empty denominators give 0.
pub fn prf(shared: usize, predicted: usize, gold: usize) -> (f64, f64, f64) {
    let p = if predicted == 0 {
        0.0
    } else {
        shared as f64 / predicted as f64
    };
    let r = if gold == 0 { 0.0 } else { shared as f64 / gold as f64 };
    (p, r, f1(p, r))
}

fn overlap(a: &BTreeSet<(TermId, TermId)>, b: &BTreeSet<(TermId, TermId)>) -> usize {
    a.intersection(b).count()
}

/// Compares a predicted tree against a gold tree. Virtual-root edges never count.
pub fn evaluate(predicted: &Taxonomy, gold: &Taxonomy) -> Result<MetricReport, TaxoError> {
    if gold.is_empty() {
        return Err(TaxoError::EmptyGold);
    }
    let pred_anc = predicted.ancestor_closure()?;
    let gold_anc = gold.ancestor_closure()?;
    let (pa, ra, fa) = prf(overlap(&pred_anc, &gold_anc), pred_anc.len(), gold_anc.len());

    let pred_edges = predicted.edge_set();
    let gold_edges = gold.edge_set();
    let (pe, re, fe) = prf(overlap(&pred_edges, &gold_edges), pred_edges.len(), gold_edges.len());
    Ok(MetricReport {
        ancestor_precision: pa,
        ancestor_recall: ra,
        ancestor_f1: fa,
        edge_precision: pe,
        edge_recall: re,
        edge_f1: fe,
    })
}
