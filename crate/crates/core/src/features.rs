//! Five-metric feature rows for labelled object pairs.

use alloc::vec::Vec;

use crate::credibility::CredibilityScores;
use crate::direct::dtm;
use crate::graph::{ObjectId, TrustGraph};
use crate::ingest::TrustLabel;
use crate::kge::{similarity, EmbeddingTable, Similarity};
use crate::recommendation::{rtm, select_credible, RecommendationConfig};
use crate::{Error, Result};

pub const N_FEATURES: usize = 5;
pub const FEATURE_NAMES: [&str; N_FEATURES] = ["dtm", "reliability", "benevolence", "rtm", "cdor"];

/// `⟨DTM, R(trustee), B(trustee), RTM, C-DoR⟩` plus the ground truth for
/// one ordered pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustSample {
    pub trustor: ObjectId,
    pub trustee: ObjectId,
    pub features: [f64; N_FEATURES],
    pub label: TrustLabel,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FeatureDiagnostics {
    /// Pairs whose recommendation came from the trustee's global reputation.
    pub global_fallbacks: usize,
    /// Pairs with no direct edge (direct trust set to the 0.5 prior).
    pub missing_edges: usize,
    /// Pairs where either object has no embedding.
    pub missing_embeddings: usize,
    pub zero_norm_embeddings: usize,
}

#[derive(Debug, Clone)]
pub struct FeatureSet {
    pub samples: Vec<TrustSample>,
    pub diagnostics: FeatureDiagnostics,
}

/// Builds one sample per labelled pair, in input order.
///
/// Without an embedding table every degree of relationship is 0.
pub fn build_features(
    g: &TrustGraph,
    scores: &CredibilityScores,
    table: Option<&EmbeddingTable>,
    pairs: &[(ObjectId, ObjectId, TrustLabel)],
    rec: &RecommendationConfig,
) -> Result<FeatureSet> {
    if scores.len() != g.node_count() {
        return Err(Error::ShapeMismatch(alloc::format!(
            "scores cover {} objects, graph has {}",
            scores.len(),
            g.node_count()
        )));
    }
    let mut diagnostics = FeatureDiagnostics::default();
    let mut samples = Vec::with_capacity(pairs.len());
    for &(trustor, trustee, label) in pairs {
        let (Some(i), Some(j)) = (g.index_of(trustor), g.index_of(trustee)) else {
            return Err(Error::MissingScores { trustor, trustee });
        };
        let direct = g.dtm(i, j).unwrap_or_else(|| {
            diagnostics.missing_edges += 1;
            dtm(0.0, 0.0)
        });
        let set = select_credible(g, scores, i, j, rec);
        if set.is_global_fallback {
            diagnostics.global_fallbacks += 1;
        }
        let recommendation = rtm(g, &set, i, j)?;
        let cdor = match table.map_or(Similarity::Missing, |t| similarity(t, trustor, trustee)) {
            Similarity::Missing => {
                diagnostics.missing_embeddings += 1;
                0.0
            }
            Similarity::ZeroNorm => {
                diagnostics.zero_norm_embeddings += 1;
                0.0
            }
            Similarity::Value(v) => v,
        };
        samples.push(TrustSample {
            trustor,
            trustee,
            features: [
                direct,
                scores.reliability[j],
                scores.benevolence[j],
                recommendation,
                cdor,
            ],
            label,
        });
    }
    Ok(FeatureSet { samples, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::credibility::solve_credibility;
    use crate::graph::{Relation, RelationKG, RelationTriple};

    fn graph() -> TrustGraph {
        TrustGraph::from_parts(
            [ObjectId(9)],
            [(0, 1, 0.8), (1, 2, 0.9), (0, 2, 0.7), (3, 2, 0.1)].map(|(u, v, w)| (ObjectId(u), ObjectId(v), w)),
        )
        .unwrap()
    }

    #[test]
    fn shapes_fallback_and_missing_embeddings() {
        let g = graph();
        let scores = solve_credibility(&g, 1e-9, 500).unwrap();
        let kg = RelationKG::from_triples([RelationTriple::new(0, Relation::Clor, 1)]).0;
        let table = EmbeddingTable::init(&kg, 4, 1);
        let pairs = [
            (ObjectId(0), ObjectId(2), TrustLabel::Trustworthy),
            (ObjectId(3), ObjectId(2), TrustLabel::Untrustworthy),
            (ObjectId(0), ObjectId(1), TrustLabel::Neutral),
        ];
        let cfg = RecommendationConfig {
            threshold: 0.0,
            max_k: None,
        };
        let set = build_features(&g, &scores, Some(&table), &pairs, &cfg).unwrap();
        assert_eq!(set.samples.len(), 3);
        assert!(set.samples.iter().all(|s| s.features.len() == N_FEATURES));
        // 0 -> 2 goes through recommender 1; 3 -> 2 and 0 -> 1 have none.
        assert!((set.samples[0].features[3] - 0.72).abs() < 1e-12);
        assert_eq!(set.diagnostics.global_fallbacks, 2);
        let global = (0.9 + 0.7 + 0.1) / 3.0;
        assert!((set.samples[1].features[3] - global).abs() < 1e-12);
        // Object 2 and 3 have no embedding.
        assert_eq!(set.samples[0].features[4], 0.0);
        assert_eq!(set.diagnostics.missing_embeddings, 2);
        assert_ne!(set.samples[2].features[4], 0.0);
        assert_eq!(set.samples[0].features[1], scores.reliability[2]);
        assert_eq!(set.samples[0].features[2], scores.benevolence[2]);
    }

    #[test]
    fn unknown_object_is_an_error() {
        let g = graph();
        let scores = solve_credibility(&g, 1e-9, 500).unwrap();
        let pairs = [(ObjectId(0), ObjectId(77), TrustLabel::Neutral)];
        let err = build_features(&g, &scores, None, &pairs, &Default::default()).unwrap_err();
        assert_eq!(
            err,
            Error::MissingScores {
                trustor: ObjectId(0),
                trustee: ObjectId(77)
            }
        );
    }

    #[test]
    fn unrated_pair_gets_prior() {
        let g = graph();
        let scores = solve_credibility(&g, 1e-9, 500).unwrap();
        let pairs = [(ObjectId(9), ObjectId(0), TrustLabel::Neutral)];
        let set = build_features(&g, &scores, None, &pairs, &Default::default()).unwrap();
        assert_eq!(set.samples[0].features[0], 0.5);
        assert_eq!(set.diagnostics.missing_edges, 1);
    }
}
