//! Seeded test instances shared by the integration tests and the
//! acceptance report.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trust_siot_core::classifier::{loss_and_grad, MlpModel};
use trust_siot_core::features::TrustSample;
use trust_siot_core::graph::{ObjectId, Relation, RelationKG, RelationTriple};
use trust_siot_core::kge::{batch_loss_and_grad, encode, negative_samples, EmbeddingTable, EncodedTriple, TrainConfig};
use trust_siot_core::{TrustGraph, TrustLabel};

pub const FD_STEP: f64 = 1e-6;
pub const GRAD_TOLERANCE: f64 = 1e-4;

/// Relative error with a floor on the denominator so that gradients that
/// are zero up to rounding compare absolutely.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Worst gradient disagreement and where it happened.
#[derive(Debug, Clone, Default)]
pub struct GradCheck {
    pub worst: f64,
    pub at: String,
}

impl GradCheck {
    fn record(&mut self, e: f64, at: impl FnOnce() -> String) {
        if e > self.worst || self.at.is_empty() {
            self.worst = self.worst.max(e);
            self.at = at();
        }
    }
}

pub fn random_kge_instance(seed: u64) -> (EmbeddingTable, Vec<EncodedTriple>, Vec<Vec<EncodedTriple>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_entities = 6;
    let triples: Vec<RelationTriple> = (0..8)
        .map(|_| {
            let h = rng.gen_range(0..n_entities);
            let mut t = rng.gen_range(0..n_entities);
            if t == h {
                t = (t + 1) % n_entities;
            }
            RelationTriple::new(h, Relation::ALL[rng.gen_range(0..3)], t)
        })
        .collect();
    let kg = RelationKG::from_triples(triples).0;
    let mut table = EmbeddingTable::init(&kg, 4, seed);
    // Move away from the init so every parameter block matters.
    for v in table
        .entity_vecs
        .iter_mut()
        .chain(&mut table.entity_bias)
        .chain(&mut table.relation_angles)
    {
        *v += rng.gen_range(-0.4..0.4);
    }
    for a in &mut table.relation_alpha {
        *a = rng.gen_range(0.5..1.5);
    }
    let positives = encode(&kg);
    let mut sampler = ChaCha8Rng::seed_from_u64(seed + 1000);
    let negatives = positives
        .iter()
        .map(|&p| negative_samples(p, kg.n_entities(), 2, &mut sampler).unwrap())
        .collect();
    (table, positives, negatives)
}

fn kge_blocks(t: &mut EmbeddingTable) -> [&mut Vec<f64>; 4] {
    [
        &mut t.entity_vecs,
        &mut t.entity_bias,
        &mut t.relation_angles,
        &mut t.relation_alpha,
    ]
}

/// Checks every parameter of the d = 4 instances built from `seeds`.
pub fn kge_gradient_check(seeds: std::ops::Range<u64>) -> GradCheck {
    let mut check = GradCheck::default();
    for seed in seeds {
        let (table, pos, neg) = random_kge_instance(seed);
        let (_, mut grad) = batch_loss_and_grad(&table, &pos, &neg);
        let analytic: Vec<Vec<f64>> = kge_blocks(&mut grad).iter().map(|b| b.to_vec()).collect();
        for (block, analytic_block) in analytic.iter().enumerate() {
            for (i, &a) in analytic_block.iter().enumerate() {
                let mut plus = table.clone();
                kge_blocks(&mut plus)[block][i] += FD_STEP;
                let mut minus = table.clone();
                kge_blocks(&mut minus)[block][i] -= FD_STEP;
                let numeric = (batch_loss_and_grad(&plus, &pos, &neg).0 - batch_loss_and_grad(&minus, &pos, &neg).0)
                    / (2.0 * FD_STEP);
                check.record(rel_err(a, numeric), || {
                    format!("seed {seed} block {block} index {i}: analytic {a} numeric {numeric}")
                });
            }
        }
    }
    check
}

pub fn random_mlp_instance(seed: u64) -> (MlpModel, Vec<TrustSample>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hidden = rng.gen_range(2..7);
    let mut model = MlpModel::init(hidden, 0.01, seed);
    for b in model.hidden_bias.iter_mut().chain(&mut model.output_bias) {
        *b = rng.gen_range(-0.3..0.3);
    }
    let mut samples = Vec::new();
    while samples.len() < 12 {
        let features: [f64; 5] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let label = TrustLabel::from_index(rng.gen_range(0..3)).unwrap();
        // Finite differences are meaningless across a ReLU kink, so keep
        // every hidden pre-activation well away from zero.
        let near_kink = (0..hidden).any(|j| {
            let pre: f64 = model.hidden_bias[j]
                + (0..5)
                    .map(|i| features[i] * model.hidden_weights[i * hidden + j])
                    .sum::<f64>();
            pre.abs() < 1e-3
        });
        if !near_kink {
            let i = samples.len() as u64;
            samples.push(TrustSample {
                trustor: ObjectId(i),
                trustee: ObjectId(i + 1),
                features,
                label,
            });
        }
    }
    (model, samples)
}

fn mlp_blocks(m: &mut MlpModel) -> [&mut Vec<f64>; 4] {
    [
        &mut m.hidden_weights,
        &mut m.hidden_bias,
        &mut m.output_weights,
        &mut m.output_bias,
    ]
}

pub fn mlp_gradient_check(seeds: std::ops::Range<u64>) -> GradCheck {
    let mut check = GradCheck::default();
    for seed in seeds {
        let (model, samples) = random_mlp_instance(seed);
        let refs: Vec<&TrustSample> = samples.iter().collect();
        let (_, mut grad) = loss_and_grad(&model, &refs);
        let analytic: Vec<Vec<f64>> = mlp_blocks(&mut grad).iter().map(|b| b.to_vec()).collect();
        for (block, analytic_block) in analytic.iter().enumerate() {
            for (i, &a) in analytic_block.iter().enumerate() {
                let mut plus = model.clone();
                mlp_blocks(&mut plus)[block][i] += FD_STEP;
                let mut minus = model.clone();
                mlp_blocks(&mut minus)[block][i] -= FD_STEP;
                let numeric = (loss_and_grad(&plus, &refs).0 - loss_and_grad(&minus, &refs).0) / (2.0 * FD_STEP);
                check.record(rel_err(a, numeric), || {
                    format!("seed {seed} block {block} index {i}: analytic {a} numeric {numeric}")
                });
            }
        }
    }
    check
}

/// 20 entities, 3 relation types, 60 distinct triples.
pub fn toy_kg() -> RelationKG {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut triples = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    while triples.len() < 60 {
        let h: u64 = rng.gen_range(0..20);
        let t: u64 = rng.gen_range(0..20);
        let r = rng.gen_range(0..3usize);
        if h != t && seen.insert((h, r, t)) {
            triples.push(RelationTriple::new(h, Relation::ALL[r], t));
        }
    }
    let (kg, dups, loops) = RelationKG::from_triples(triples);
    assert_eq!((dups, loops), (0, 0));
    assert_eq!((kg.n_entities(), kg.n_relations(), kg.n_triples()), (20, 3, 60));
    kg
}

pub fn toy_kge_config() -> TrainConfig {
    TrainConfig {
        dim: 8,
        epochs: 60,
        batch_size: 16,
        learning_rate: 1e-2,
        neg_samples: 2,
        seed: 3,
    }
}

/// Mean of the first and of the last ten entries of a loss trace.
pub fn head_tail_means(trace: &[f64]) -> (f64, f64) {
    let k = 10.min(trace.len());
    let head = trace[..k].iter().sum::<f64>() / k as f64;
    let tail = trace[trace.len() - k..].iter().sum::<f64>() / k as f64;
    (head, tail)
}

/// 50 samples whose class is fixed by the first feature, with a margin
/// between classes.
pub fn separable_samples() -> Vec<TrustSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    (0..50)
        .map(|i| {
            let class = i % 3;
            let centre = [0.15, 0.5, 0.85][class];
            let mut features: [f64; 5] = std::array::from_fn(|_| rng.gen_range(0.0..1.0));
            features[0] = centre + rng.gen_range(-0.08..0.08);
            TrustSample {
                trustor: ObjectId(i as u64),
                trustee: ObjectId(i as u64 + 100),
                features,
                label: TrustLabel::from_index(class).unwrap(),
            }
        })
        .collect()
}

pub fn random_edges(rng: &mut ChaCha8Rng, n: usize, density: f64) -> Vec<(usize, usize, f64)> {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.gen_bool(density) {
                edges.push((u, v, rng.gen_range(0.0..1.0)));
            }
        }
    }
    edges
}

pub fn graph_from(n: usize, edges: &[(usize, usize, f64)]) -> TrustGraph {
    TrustGraph::from_parts(
        (0..n as u64).map(ObjectId),
        edges
            .iter()
            .map(|&(u, v, w)| (ObjectId(u as u64), ObjectId(v as u64), w)),
    )
    .unwrap()
}

/// Trustor 0, recommenders 1 and 2, trustee 3, with hand-computable
/// recommendation trust of 0.61 (both recommenders) and 0.72 (only 1).
pub fn recommendation_example() -> TrustGraph {
    TrustGraph::from_parts(
        (0..4).map(ObjectId),
        [(0, 1, 0.8), (1, 3, 0.9), (0, 2, 1.0), (2, 3, 0.5)].map(|(u, v, w)| (ObjectId(u), ObjectId(v), w)),
    )
    .unwrap()
}
