//! Recommendation trust from credible neighbours, with a global-reputation
//! fallback when no neighbour qualifies.

use alloc::vec::Vec;

use crate::credibility::CredibilityScores;
use crate::graph::TrustGraph;
use crate::{Error, Result};

/// Credibility threshold used when none is configured.
pub const DEFAULT_THRESHOLD: f64 = 0.5;
/// Reputation of an object nobody has rated.
pub const UNRATED_PRIOR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecommendationConfig {
    pub threshold: f64,
    /// Keep at most this many recommenders (highest credibility first).
    pub max_k: Option<usize>,
}

impl Default for RecommendationConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            max_k: None,
        }
    }
}

/// Recommenders admitted for one `(trustor, trustee)` query. Members are
/// dense node indices in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct RecommenderSet {
    pub members: Vec<usize>,
    pub threshold: f64,
    pub is_global_fallback: bool,
    pub global_raters: usize,
}

/// Neighbours `k` of the trustor (edge `trustor -> k`) that also rate the
/// trustee (edge `k -> trustee`) and whose credibility is at least the
/// threshold.
pub fn select_credible(
    g: &TrustGraph,
    scores: &CredibilityScores,
    trustor: usize,
    trustee: usize,
    cfg: &RecommendationConfig,
) -> RecommenderSet {
    let mut members: Vec<usize> = g
        .out_edges(trustor)
        .map(|(k, _)| k)
        .filter(|&k| k != trustee && g.edge_index(k, trustee).is_some())
        .filter(|&k| scores.credibility[k] >= cfg.threshold)
        .collect();
    if let Some(cap) = cfg.max_k {
        if members.len() > cap {
            members.sort_by(|&a, &b| scores.credibility[b].total_cmp(&scores.credibility[a]).then(a.cmp(&b)));
            members.truncate(cap);
            members.sort_unstable();
        }
    }
    RecommenderSet {
        is_global_fallback: members.is_empty(),
        members,
        threshold: cfg.threshold,
        global_raters: g.in_degree(trustee),
    }
}

/// Mean over recommenders `k` of `DTM(trustor, k) · DTM(k, trustee)`.
pub fn rtm_local(g: &TrustGraph, set: &RecommenderSet, trustor: usize, trustee: usize) -> Result<f64> {
    if set.members.is_empty() {
        return Err(Error::UseGlobalFallback);
    }
    let mut sum = 0.0;
    for &k in &set.members {
        let first = g.dtm(trustor, k).ok_or(Error::InvalidParameter(alloc::format!(
            "recommender {} is not a neighbour of the trustor",
            g.id(k)
        )))?;
        let second = g.dtm(k, trustee).ok_or(Error::InvalidParameter(alloc::format!(
            "recommender {} has not rated the trustee",
            g.id(k)
        )))?;
        sum += first * second;
    }
    Ok(sum / set.members.len() as f64)
}

/// Mean direct trust the trustee receives from everyone who rated it, or the
/// uninformative prior when nobody has.
pub fn rtm_global(g: &TrustGraph, trustee: usize) -> f64 {
    let raters = g.in_degree(trustee);
    if raters == 0 {
        return UNRATED_PRIOR;
    }
    g.in_edges(trustee).map(|(_, dtm)| dtm).sum::<f64>() / raters as f64
}

/// Local recommendation when the set is non-empty, global otherwise.
pub fn rtm(g: &TrustGraph, set: &RecommenderSet, trustor: usize, trustee: usize) -> Result<f64> {
    if set.is_global_fallback {
        Ok(rtm_global(g, trustee))
    } else {
        rtm_local(g, set, trustor, trustee)
    }
}
