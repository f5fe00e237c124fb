//! RotL knowledge-graph embeddings and the degree-of-relationship feature.
//!
//! A triple `(h, r, t)` scores
//!
//! ```text
//! f = −φ(‖Rot(r)·h ⊕α t‖) + b_h + b_t,   φ(x) = x·eˣ,   x ⊕α y = α(x + y) / (1 + x·y)
//! ```
//!
//! where `Rot(r)` applies one Givens rotation per coordinate pair
//! `(2k, 2k+1)` and `⊕α` acts elementwise. Training minimises binary
//! cross-entropy with uniformly corrupted negatives using Adam; gradients are
//! analytic. The cosine similarity of two learned entity vectors is the
//! degree-of-relationship feature.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::graph::{ObjectId, Relation, RelationKG};
use crate::math::{dot, exp, norm, sigmoid, sin_cos, softplus, sqrt};
use crate::optim::{Adam, AdamConfig};
use crate::rng::{stream, Stream, StreamRng};
use crate::{Error, Result};

/// Denominators of `⊕α` with magnitude below this get it added.
const DENOM_GUARD: f64 = 1e-9;
/// Scores are clamped to this magnitude before the sigmoid.
const LOGIT_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub neg_samples: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            epochs: 100,
            batch_size: 256,
            learning_rate: 1e-3,
            neg_samples: 2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || !self.dim.is_multiple_of(2) {
            return Err(Error::InvalidParameter(alloc::format!(
                "embedding dim must be even and positive, got {}",
                self.dim
            )));
        }
        if self.batch_size == 0 || self.neg_samples == 0 {
            return Err(Error::InvalidParameter(
                "batch size and negative samples must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidParameter(alloc::format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Learned parameters. Entity `i` is `entities[i]`, its vector is
/// `entity_vecs[i*dim..(i+1)*dim]`; relation `j` has `dim/2` rotation angles
/// at `relation_angles[j*dim/2..]` and addition scale `relation_alpha[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub dim: usize,
    pub entities: Vec<ObjectId>,
    pub relations: Vec<Relation>,
    pub entity_vecs: Vec<f64>,
    pub entity_bias: Vec<f64>,
    pub relation_angles: Vec<f64>,
    pub relation_alpha: Vec<f64>,
}

impl EmbeddingTable {
    /// Checks that every block matches `dim` and the entity/relation lists,
    /// and that entity and relation lists are strictly ascending.
    pub fn validate(&self) -> Result<()> {
        let (ne, nr, d) = (self.entities.len(), self.relations.len(), self.dim);
        if d == 0 || d % 2 != 0 {
            return Err(Error::ShapeMismatch(alloc::format!("odd or zero dimension {d}")));
        }
        let shapes = [
            ("entity vectors", self.entity_vecs.len(), ne * d),
            ("entity biases", self.entity_bias.len(), ne),
            ("relation angles", self.relation_angles.len(), nr * d / 2),
            ("relation alphas", self.relation_alpha.len(), nr),
        ];
        for (what, got, want) in shapes {
            if got != want {
                return Err(Error::ShapeMismatch(alloc::format!(
                    "{what}: {got} values, expected {want}"
                )));
            }
        }
        if !self.entities.windows(2).all(|w| w[0] < w[1]) || !self.relations.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::ShapeMismatch(
                "entity and relation lists must be sorted and unique".into(),
            ));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !(finite(&self.entity_vecs)
            && finite(&self.entity_bias)
            && finite(&self.relation_angles)
            && finite(&self.relation_alpha))
        {
            return Err(Error::ShapeMismatch("non-finite parameter".into()));
        }
        Ok(())
    }

    pub fn entity_index(&self, id: ObjectId) -> Option<usize> {
        self.entities.binary_search(&id).ok()
    }

    pub fn relation_index(&self, r: Relation) -> Option<usize> {
        self.relations.binary_search(&r).ok()
    }

    pub fn entity(&self, i: usize) -> &[f64] {
        &self.entity_vecs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vector(&self, id: ObjectId) -> Option<&[f64]> {
        self.entity_index(id).map(|i| self.entity(i))
    }

    pub fn angles(&self, j: usize) -> &[f64] {
        let half = self.dim / 2;
        &self.relation_angles[j * half..(j + 1) * half]
    }

    /// Seeded initialisation: vectors uniform in `±0.5/√d`, angles uniform in
    /// `±π`, α = 1, biases 0.
    pub fn init(kg: &RelationKG, dim: usize, seed: u64) -> Self {
        let mut rng = stream(seed, Stream::KgeInit);
        let bound = 0.5 / sqrt(dim as f64);
        let ne = kg.n_entities();
        let nr = kg.n_relations();
        let entity_vecs = (0..ne * dim).map(|_| rng.gen_range(-bound..=bound)).collect();
        let relation_angles = (0..nr * dim / 2)
            .map(|_| rng.gen_range(-core::f64::consts::PI..=core::f64::consts::PI))
            .collect();
        Self {
            dim,
            entities: kg.entities().to_vec(),
            relations: kg.relations().to_vec(),
            entity_vecs,
            entity_bias: vec![0.0; ne],
            relation_angles,
            relation_alpha: vec![1.0; nr],
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            dim: self.dim,
            entities: Vec::new(),
            relations: Vec::new(),
            entity_vecs: vec![0.0; self.entity_vecs.len()],
            entity_bias: vec![0.0; self.entity_bias.len()],
            relation_angles: vec![0.0; self.relation_angles.len()],
            relation_alpha: vec![0.0; self.relation_alpha.len()],
        }
    }

    /// Score of an encoded triple.
    pub fn score(&self, t: EncodedTriple) -> f64 {
        rotl_score(
            self.entity(t.head),
            self.angles(t.relation),
            self.entity(t.tail),
            self.relation_alpha[t.relation],
            self.entity_bias[t.head],
            self.entity_bias[t.tail],
        )
    }
}

/// A triple addressed by entity and relation indices of an [`EmbeddingTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EncodedTriple {
    pub head: usize,
    pub relation: usize,
    pub tail: usize,
}

pub fn encode(kg: &RelationKG) -> Vec<EncodedTriple> {
    kg.triples()
        .iter()
        .map(|t| EncodedTriple {
            head: kg.entity_index(t.head).expect("kg indexes its own entities"),
            relation: kg.relation_index(t.relation).expect("kg indexes its own relations"),
            tail: kg.entity_index(t.tail).expect("kg indexes its own entities"),
        })
        .collect()
}

/// Applies the blockwise Givens rotation to `v`.
pub fn rotate(v: &[f64], angles: &[f64], out: &mut [f64]) {
    for (k, &theta) in angles.iter().enumerate() {
        let (s, c) = sin_cos(theta);
        let (x, y) = (v[2 * k], v[2 * k + 1]);
        out[2 * k] = c * x - s * y;
        out[2 * k + 1] = s * x + c * y;
    }
}

fn guarded(den: f64) -> f64 {
    if den.abs() < DENOM_GUARD {
        den + DENOM_GUARD
    } else {
        den
    }
}

/// Elementwise `α(x + y) / (1 + x·y)`.
pub fn oplus(x: &[f64], y: &[f64], alpha: f64, out: &mut [f64]) {
    for ((o, &a), &b) in out.iter_mut().zip(x).zip(y) {
        *o = alpha * (a + b) / guarded(1.0 + a * b);
    }
}

fn phi(x: f64) -> f64 {
    x * exp(x)
}

pub fn rotl_score(head: &[f64], angles: &[f64], tail: &[f64], alpha: f64, head_bias: f64, tail_bias: f64) -> f64 {
    let d = head.len();
    let mut u = vec![0.0; d];
    rotate(head, angles, &mut u);
    let mut z = vec![0.0; d];
    oplus(&u, tail, alpha, &mut z);
    -phi(norm(&z)) + head_bias + tail_bias
}

/// Adds `upstream · ∂f/∂θ` for one triple to `grad`.
fn accumulate_score_grad(table: &EmbeddingTable, t: EncodedTriple, upstream: f64, grad: &mut EmbeddingTable) {
    if upstream == 0.0 {
        return;
    }
    let d = table.dim;
    let head = table.entity(t.head);
    let tail = table.entity(t.tail);
    let angles = table.angles(t.relation);
    let alpha = table.relation_alpha[t.relation];

    let mut u = vec![0.0; d];
    rotate(head, angles, &mut u);
    let mut z = vec![0.0; d];
    let mut den = vec![0.0; d];
    for i in 0..d {
        den[i] = guarded(1.0 + u[i] * tail[i]);
        z[i] = alpha * (u[i] + tail[i]) / den[i];
    }
    let n = norm(&z);

    grad.entity_bias[t.head] += upstream;
    grad.entity_bias[t.tail] += upstream;
    if n == 0.0 {
        // Subgradient 0 for the norm at the origin.
        return;
    }
    let df_dn = -exp(n) * (1.0 + n);
    let mut g_u = vec![0.0; d];
    let mut g_alpha = 0.0;
    for i in 0..d {
        let g_z = upstream * df_dn * z[i] / n;
        let s = u[i] + tail[i];
        let den2 = den[i] * den[i];
        g_alpha += g_z * s / den[i];
        g_u[i] = g_z * alpha * (den[i] - s * tail[i]) / den2;
        grad.entity_vecs[t.tail * d + i] += g_z * alpha * (den[i] - s * u[i]) / den2;
    }
    grad.relation_alpha[t.relation] += g_alpha;
    let half = d / 2;
    for k in 0..half {
        let (s, c) = sin_cos(angles[k]);
        let (gu0, gu1) = (g_u[2 * k], g_u[2 * k + 1]);
        grad.entity_vecs[t.head * d + 2 * k] += c * gu0 + s * gu1;
        grad.entity_vecs[t.head * d + 2 * k + 1] += -s * gu0 + c * gu1;
        grad.relation_angles[t.relation * half + k] += -gu0 * u[2 * k + 1] + gu1 * u[2 * k];
    }
}

/// `k` corrupted copies of `triple`: each replaces the head or the tail (fair
/// coin) with a uniformly drawn different entity.
pub fn negative_samples(
    triple: EncodedTriple,
    n_entities: usize,
    k: usize,
    rng: &mut StreamRng,
) -> Result<Vec<EncodedTriple>> {
    if n_entities < 2 {
        return Err(Error::TooFewEntities(n_entities));
    }
    Ok((0..k)
        .map(|_| {
            let corrupt_head = rng.gen_bool(0.5);
            let original = if corrupt_head { triple.head } else { triple.tail };
            let mut e = rng.gen_range(0..n_entities - 1);
            if e >= original {
                e += 1;
            }
            let mut c = triple;
            if corrupt_head {
                c.head = e;
            } else {
                c.tail = e;
            }
            c
        })
        .collect())
}

fn clamp_logit(x: f64) -> f64 {
    x.clamp(-LOGIT_CLAMP, LOGIT_CLAMP)
}

/// Mean binary cross-entropy per positive triple:
/// `−(1/n) Σ [log σ(f⁺) + Σ log(1 − σ(f⁻))]`, with scores clamped to ±30.
pub fn kge_loss(positive_scores: &[f64], negative_scores: &[f64]) -> f64 {
    if positive_scores.is_empty() {
        return 0.0;
    }
    let pos: f64 = positive_scores.iter().map(|&f| softplus(-clamp_logit(f))).sum();
    let neg: f64 = negative_scores.iter().map(|&f| softplus(clamp_logit(f))).sum();
    (pos + neg) / positive_scores.len() as f64
}

fn dlogit(f: f64, positive: bool) -> f64 {
    if f.abs() > LOGIT_CLAMP {
        return 0.0;
    }
    if positive {
        sigmoid(f) - 1.0
    } else {
        sigmoid(f)
    }
}

/// Loss of a batch and its gradient with respect to every table parameter.
/// `negatives[i]` are the corruptions of `positives[i]`.
pub fn batch_loss_and_grad(
    table: &EmbeddingTable,
    positives: &[EncodedTriple],
    negatives: &[Vec<EncodedTriple>],
) -> (f64, EmbeddingTable) {
    let mut grad = table.zeros_like();
    let n = positives.len().max(1) as f64;
    let mut pos_scores = Vec::with_capacity(positives.len());
    let mut neg_scores = Vec::new();
    for (p, negs) in positives.iter().zip(negatives) {
        let f = table.score(*p);
        pos_scores.push(f);
        accumulate_score_grad(table, *p, dlogit(f, true) / n, &mut grad);
        for q in negs {
            let f = table.score(*q);
            neg_scores.push(f);
            accumulate_score_grad(table, *q, dlogit(f, false) / n, &mut grad);
        }
    }
    (kge_loss(&pos_scores, &neg_scores), grad)
}

#[derive(Debug, Clone)]
pub struct TrainedEmbeddings {
    pub table: EmbeddingTable,
    /// Mean loss per positive triple for each epoch.
    pub loss_trace: Vec<f64>,
}

/// Minibatch Adam over all RotL parameters. Deterministic given `cfg.seed`.
pub fn train_kge(kg: &RelationKG, cfg: &TrainConfig) -> Result<TrainedEmbeddings> {
    cfg.validate()?;
    if kg.is_empty() {
        return Err(Error::EmptyInput("knowledge graph"));
    }
    let mut table = EmbeddingTable::init(kg, cfg.dim, cfg.seed);
    if cfg.epochs == 0 {
        return Ok(TrainedEmbeddings {
            table,
            loss_trace: Vec::new(),
        });
    }
    let n_entities = kg.n_entities();
    if n_entities < 2 {
        return Err(Error::TooFewEntities(n_entities));
    }
    let adam_cfg = AdamConfig::with_learning_rate(cfg.learning_rate);
    let mut opt_vecs = Adam::new(table.entity_vecs.len(), adam_cfg);
    let mut opt_bias = Adam::new(table.entity_bias.len(), adam_cfg);
    let mut opt_angles = Adam::new(table.relation_angles.len(), adam_cfg);
    let mut opt_alpha = Adam::new(table.relation_alpha.len(), adam_cfg);

    let mut rng = stream(cfg.seed, Stream::KgeSampling);
    let mut triples = encode(kg);
    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        triples.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in triples.chunks(cfg.batch_size) {
            let negatives = batch
                .iter()
                .map(|&t| negative_samples(t, n_entities, cfg.neg_samples, &mut rng))
                .collect::<Result<Vec<_>>>()?;
            let (loss, grad) = batch_loss_and_grad(&table, batch, &negatives);
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            total += loss * batch.len() as f64;
            opt_vecs.step(&mut table.entity_vecs, &grad.entity_vecs);
            opt_bias.step(&mut table.entity_bias, &grad.entity_bias);
            opt_angles.step(&mut table.relation_angles, &grad.relation_angles);
            opt_alpha.step(&mut table.relation_alpha, &grad.relation_alpha);
        }
        loss_trace.push(total / triples.len() as f64);
    }
    Ok(TrainedEmbeddings { table, loss_trace })
}

/// Cosine similarity, or `None` when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Outcome of a degree-of-relationship lookup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Similarity {
    Value(f64),
    /// At least one object has no embedding.
    Missing,
    /// At least one embedding is the zero vector.
    ZeroNorm,
}

impl Similarity {
    /// The feature value: the cosine, or 0 (neutral) when undefined.
    pub fn value(self) -> f64 {
        match self {
            Similarity::Value(v) => v,
            Similarity::Missing | Similarity::ZeroNorm => 0.0,
        }
    }
}

pub fn similarity(table: &EmbeddingTable, a: ObjectId, b: ObjectId) -> Similarity {
    match (table.vector(a), table.vector(b)) {
        (Some(x), Some(y)) => cosine(x, y).map_or(Similarity::ZeroNorm, Similarity::Value),
        _ => Similarity::Missing,
    }
}

/// Degree of relationship between two objects in [−1, 1].
pub fn cdor(table: &EmbeddingTable, a: ObjectId, b: ObjectId) -> f64 {
    similarity(table, a, b).value()
}
