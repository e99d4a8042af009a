//! Pair features: surface-string cues, candidate frequency and generality,
//! quantile binning and learned bin embeddings.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{NodeId, ParamId, ParamStore, Tape, Tensor};
use crate::data::{normalize_surface, CandidateTable};
use crate::taxo::Term;
use crate::{Error, Result};

pub const DEFAULT_BINS: usize = 8;
pub const DEFAULT_FEATURE_DIM: usize = 10;
pub const DEFAULT_SUFFIX_CAP: usize = 7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureKind {
    CapX,
    CapY,
    EndsWith,
    Contains,
    SuffixMatch,
    LcsRatio,
    LengthDiff,
    FreqDiff,
    GeneralityDiff,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 9] = [
        FeatureKind::CapX,
        FeatureKind::CapY,
        FeatureKind::EndsWith,
        FeatureKind::Contains,
        FeatureKind::SuffixMatch,
        FeatureKind::LcsRatio,
        FeatureKind::LengthDiff,
        FeatureKind::FreqDiff,
        FeatureKind::GeneralityDiff,
    ];

    pub fn is_boolean(self) -> bool {
        matches!(
            self,
            FeatureKind::CapX | FeatureKind::CapY | FeatureKind::EndsWith | FeatureKind::Contains
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::CapX => "cap_x",
            FeatureKind::CapY => "cap_y",
            FeatureKind::EndsWith => "ends_with",
            FeatureKind::Contains => "contains",
            FeatureKind::SuffixMatch => "suffix_match",
            FeatureKind::LcsRatio => "lcs_ratio",
            FeatureKind::LengthDiff => "length_diff",
            FeatureKind::FreqDiff => "freq_diff",
            FeatureKind::GeneralityDiff => "generality_diff",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    /// Surface-string features.
    pub surface: bool,
    /// Frequency and generality features.
    pub fg: bool,
    pub bins: usize,
    pub dim: usize,
    pub suffix_cap: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            surface: true,
            fg: false,
            bins: DEFAULT_BINS,
            dim: DEFAULT_FEATURE_DIM,
            suffix_cap: DEFAULT_SUFFIX_CAP,
        }
    }
}

impl FeatureConfig {
    pub fn active(&self) -> Vec<FeatureKind> {
        FeatureKind::ALL
            .into_iter()
            .filter(|k| match k {
                FeatureKind::FreqDiff | FeatureKind::GeneralityDiff => self.fg,
                _ => self.surface,
            })
            .collect()
    }

    /// Length of the concatenated feature embedding.
    pub fn output_dim(&self) -> usize {
        self.active().len() * self.dim
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceFeatures {
    pub cap_x: bool,
    pub cap_y: bool,
    pub ends_with: bool,
    pub contains: bool,
    pub suffix_match: usize,
    pub lcs_ratio: f64,
    pub length_diff: i64,
}

fn longest_common_substring(a: &[char], b: &[char]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut best = 0;
    for &ca in a {
        let mut cur = vec![0usize; b.len() + 1];
        for (j, &cb) in b.iter().enumerate() {
            if ca == cb {
                cur[j + 1] = prev[j] + 1;
                best = best.max(cur[j + 1]);
            }
        }
        prev = cur;
    }
    best
}

/// Surface cues for "x is-a y". `ends_with` and `contains` compare whole tokens.
pub fn surface_features(x: &Term, y: &Term, suffix_cap: usize) -> SurfaceFeatures {
    let xs = normalize_surface(&x.surface);
    let ys = normalize_surface(&y.surface);
    let xt: Vec<&str> = xs.split(' ').collect();
    let yt: Vec<&str> = ys.split(' ').collect();
    let ends_with = xt.len() >= yt.len() && xt[xt.len() - yt.len()..] == yt[..];
    let contains = xt.len() >= yt.len() && xt.windows(yt.len()).any(|w| w == yt.as_slice());
    let xc: Vec<char> = xs.chars().collect();
    let yc: Vec<char> = ys.chars().collect();
    let suffix_match = xc
        .iter()
        .rev()
        .zip(yc.iter().rev())
        .take_while(|(a, b)| a == b)
        .count()
        .min(suffix_cap);
    let longest = xc.len().max(yc.len());
    let lcs_ratio = if longest == 0 {
        0.0
    } else {
        longest_common_substring(&xc, &yc) as f64 / longest as f64
    };
    SurfaceFeatures {
        cap_x: x.capitalized,
        cap_y: y.capitalized,
        ends_with,
        contains,
        suffix_match,
        lcs_ratio,
        length_diff: xt.len() as i64 - yt.len() as i64,
    }
}

fn freq_n(x: &str, y: &str, table: &CandidateTable) -> f64 {
    let max = table.max_freq_from(x);
    if max == 0 {
        0.0
    } else {
        table.freq(x, y) as f64 / max as f64
    }
}

/// `freq_n(x, y) - freq_n(y, x)`.
pub fn freq_diff(x: &str, y: &str, table: &CandidateTable) -> f64 {
    freq_n(x, y, table) - freq_n(y, x, table)
}

/// `ln(1 + #distinct hyponyms of t)`.
pub fn generality(t: &str, table: &CandidateTable) -> f64 {
    (table.distinct_hyponyms(t) as f64).ln_1p()
}

/// `g(y) - g(x)`.
pub fn generality_diff(x: &str, y: &str, table: &CandidateTable) -> f64 {
    generality(y, table) - generality(x, table)
}

/// Raw values of every feature kind, booleans as 0/1.
pub fn raw_features(x: &Term, y: &Term, table: &CandidateTable, suffix_cap: usize) -> [f64; 9] {
    let s = surface_features(x, y, suffix_cap);
    let b = |v: bool| if v { 1.0 } else { 0.0 };
    [
        b(s.cap_x),
        b(s.cap_y),
        b(s.ends_with),
        b(s.contains),
        s.suffix_match as f64,
        s.lcs_ratio,
        s.length_diff as f64,
        freq_diff(&x.surface, &y.surface, table),
        generality_diff(&x.surface, &y.surface, table),
    ]
}

/// Per-feature bin boundaries. Booleans always use two bins; scalars use
/// quantile cut points fitted once on training pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureBinner {
    pub bins: usize,
    /// Sorted, deduplicated cut points per scalar kind (indexed like
    /// [`FeatureKind::ALL`]); `None` until fitted.
    pub boundaries: Option<Vec<Vec<f64>>>,
}

impl FeatureBinner {
    pub fn unfitted(bins: usize) -> Self {
        FeatureBinner { bins, boundaries: None }
    }

    pub fn is_fitted(&self) -> bool {
        self.boundaries.is_some()
    }

    /// Cut points at the `k/B` quantiles, `k = 1..B`.
    pub fn fit(bins: usize, samples: &[[f64; 9]]) -> Self {
        let boundaries = (0..FeatureKind::ALL.len())
            .map(|f| {
                if FeatureKind::ALL[f].is_boolean() || samples.is_empty() {
                    return Vec::new();
                }
                let mut v: Vec<f64> = samples.iter().map(|s| s[f]).collect();
                v.sort_by(f64::total_cmp);
                let n = v.len();
                let mut cuts: Vec<f64> = (1..bins).map(|k| v[(k * n / bins).min(n - 1)]).collect();
                cuts.dedup();
                cuts.retain(|&c| c > v[0]);
                cuts
            })
            .collect();
        FeatureBinner {
            bins,
            boundaries: Some(boundaries),
        }
    }

    pub fn bin_count(&self, kind: FeatureKind) -> usize {
        if kind.is_boolean() {
            2
        } else {
            self.bins
        }
    }

    /// Bin of `value`: the number of cut points at or below it.
    pub fn bin(&self, kind: FeatureKind, value: f64) -> Result<usize> {
        if kind.is_boolean() {
            return Ok(usize::from(value > 0.5));
        }
        let b = self
            .boundaries
            .as_ref()
            .ok_or_else(|| Error::State("feature bins are not fitted".into()))?;
        let cuts = &b[kind as usize];
        Ok(cuts.partition_point(|&c| c <= value).min(self.bins - 1))
    }

    pub fn bins_for(&self, raw: &[f64; 9], kinds: &[FeatureKind]) -> Result<Vec<usize>> {
        kinds.iter().map(|&k| self.bin(k, raw[k as usize])).collect()
    }
}

/// One learned table per active feature, `bin_count × dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureEmbedding {
    pub kinds: Vec<FeatureKind>,
    pub tables: Vec<ParamId>,
    pub dim: usize,
}

impl FeatureEmbedding {
    pub fn new(store: &mut ParamStore, config: &FeatureConfig, binner: &FeatureBinner, rng: &mut impl Rng) -> Self {
        let kinds = config.active();
        let tables = kinds
            .iter()
            .map(|&k| {
                let shape = vec![binner.bin_count(k), config.dim];
                store.add(format!("feat.{}", k.name()), Tensor::uniform(shape, 0.1, rng))
            })
            .collect();
        FeatureEmbedding {
            kinds,
            tables,
            dim: config.dim,
        }
    }

    pub fn output_dim(&self) -> usize {
        self.kinds.len() * self.dim
    }

    /// Concatenated bin embeddings; `None` when no feature is active.
    pub fn embed(&self, tape: &mut Tape, bins: &[usize]) -> Result<Option<NodeId>> {
        if bins.len() != self.tables.len() {
            return Err(Error::Argument(format!(
                "{} bins for {} features",
                bins.len(),
                self.tables.len()
            )));
        }
        if bins.is_empty() {
            return Ok(None);
        }
        let parts = self
            .tables
            .iter()
            .zip(bins)
            .map(|(&t, &b)| tape.embedding_lookup(t, b))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Some(tape.concat(&parts)?))
    }
}
