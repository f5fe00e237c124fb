//! Text formats read back exactly what was written.

use std::path::Path;

use proptest::prelude::*;
use trust_siot::artifact::{model_tsv, read_model_str};
use trust_siot::formats::{
    features_tsv, graph_tsv, interactions_tsv, read_features_str, read_graph_str, read_interactions_str,
    read_scores_str, scores_csv,
};
use trust_siot_core::classifier::MlpModel;
use trust_siot_core::credibility::solve_credibility;
use trust_siot_core::features::TrustSample;
use trust_siot_core::graph::{InteractionRecord, Outcome};
use trust_siot_core::{Direction, ObjectId, TrustGraph, TrustLabel};

fn graph() -> impl Strategy<Value = TrustGraph> {
    (2usize..12)
        .prop_flat_map(|n| {
            let ids = proptest::sample::subsequence((0u64..1_000).collect::<Vec<_>>(), n);
            let edges = proptest::collection::vec((0..n, 0..n, 0.0f64..=1.0), 0..40);
            (ids, edges)
        })
        .prop_map(|(ids, edges)| {
            let mut seen = std::collections::BTreeSet::new();
            let edges: Vec<_> = edges
                .into_iter()
                .filter(|&(s, t, _)| s != t && seen.insert((s, t)))
                .map(|(s, t, w)| (ObjectId(ids[s]), ObjectId(ids[t]), w))
                .collect();
            TrustGraph::from_parts(ids.into_iter().map(ObjectId), edges).unwrap()
        })
}

proptest! {
    #[test]
    fn graph_round_trip(g in graph()) {
        let back = read_graph_str(Path::new("g"), &graph_tsv(&g)).unwrap();
        prop_assert_eq!(back.ids(), g.ids());
        prop_assert_eq!(back.edges(), g.edges());
        for &id in g.ids() {
            prop_assert_eq!(back.neighbors(id, Direction::Out).unwrap(), g.neighbors(id, Direction::Out).unwrap());
            prop_assert_eq!(back.neighbors(id, Direction::In).unwrap(), g.neighbors(id, Direction::In).unwrap());
        }
    }

    #[test]
    fn scores_round_trip(g in graph()) {
        let s = solve_credibility(&g, 1e-6, 200).unwrap();
        let back = read_scores_str(Path::new("s"), &scores_csv(&g, &s), &g).unwrap();
        prop_assert_eq!(back.reliability, s.reliability);
        prop_assert_eq!(back.benevolence, s.benevolence);
        prop_assert_eq!(back.credibility, s.credibility);
    }

    #[test]
    fn features_round_trip(rows in proptest::collection::vec((0u64..50, 0u64..50, proptest::array::uniform5(0.0f64..=1.0), 0usize..3), 1..30)) {
        let samples: Vec<TrustSample> = rows
            .into_iter()
            .map(|(a, b, features, l)| TrustSample {
                trustor: ObjectId(a),
                trustee: ObjectId(b),
                features,
                label: TrustLabel::from_index(l).unwrap(),
            })
            .collect();
        prop_assert_eq!(read_features_str(Path::new("f"), &features_tsv(&samples)).unwrap(), samples);
    }

    #[test]
    fn interactions_round_trip(rows in proptest::collection::vec((0u64..50, 0u64..50, 0u64..10_000, any::<bool>()), 0..30)) {
        let records: Vec<InteractionRecord> = rows
            .into_iter()
            .map(|(a, b, t, ok)| InteractionRecord::new(a, b, t, if ok { Outcome::Positive } else { Outcome::Negative }))
            .collect();
        prop_assert_eq!(read_interactions_str(Path::new("i"), &interactions_tsv(&records)).unwrap(), records);
    }

    #[test]
    fn model_round_trip(h in 1usize..20, l2 in 0.0f64..0.1, seed in any::<u64>()) {
        let m = MlpModel::init(h, l2, seed);
        prop_assert_eq!(read_model_str(Path::new("m"), &model_tsv(&m)).unwrap(), m);
    }
}
