//! End-to-end experiment over in-memory data: merge, direct trust,
//! credibility, embeddings, features, model selection and evaluation.
//!
//! Randomness comes from `ExperimentConfig::seed` through the named streams
//! in [`crate::rng`], so identical inputs give identical results.

use alloc::string::String;
use alloc::vec::Vec;

use crate::classifier::{train_mlp, MlpConfig, MlpModel};
use crate::credibility::{solve_credibility, CredibilityScores, DEFAULT_EPSILON, DEFAULT_MAX_ITER};
use crate::direct::{compute_all_dtm, DecayParams, DtmRule};
use crate::features::{build_features, FeatureDiagnostics, TrustSample};
use crate::graph::{build_graph, BuiltGraph, InteractionRecord, ObjectId, RelationKG, RelationTriple, TrustGraph};
use crate::ingest::{
    dedupe_ratings, label_pairs, merge_siot_relations, ratings_to_interactions, LabelThresholds, MergeConfig,
    RawRating, TrustLabel,
};
use crate::kge::{train_kge, TrainConfig, TrainedEmbeddings};
use crate::metrics::{evaluate, kfold_split, report_from_labels, train_test_split, EvalReport};
use crate::recommendation::RecommendationConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub lambda: f64,
    /// Window boundary; defaults to the midpoint of the observed time range.
    pub t0: Option<u64>,
    /// Decay horizon; defaults to the observed time span.
    pub horizon: Option<f64>,
    /// Evaluation time; defaults to the latest timestamp.
    pub now: Option<u64>,
    pub dtm_rule: DtmRule,
    pub epsilon: f64,
    pub max_iter: usize,
    pub recommendation: RecommendationConfig,
    pub kge: TrainConfig,
    pub mlp: MlpConfig,
    /// Hidden sizes tried by cross-validated grid search. A single entry
    /// skips the search.
    pub hidden_grid: Vec<usize>,
    pub train_fraction: f64,
    pub k_folds: usize,
    pub positive_threshold: f64,
    pub labels: LabelThresholds,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            t0: None,
            horizon: None,
            now: None,
            dtm_rule: DtmRule::Laplace,
            epsilon: DEFAULT_EPSILON,
            max_iter: DEFAULT_MAX_ITER,
            recommendation: RecommendationConfig::default(),
            kge: TrainConfig::default(),
            mlp: MlpConfig::default(),
            hidden_grid: alloc::vec![8, 16, 32],
            train_fraction: 0.8,
            k_folds: 5,
            positive_threshold: 0.5,
            labels: LabelThresholds::default(),
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    /// Copies the run seed into the stage configs.
    pub fn seeded(mut self) -> Self {
        self.kge.seed = self.seed;
        self.mlp.seed = self.seed;
        self
    }
}

/// A merged dataset ready for the trust stages.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub interactions: Vec<InteractionRecord>,
    pub kg: RelationKG,
    pub labels: Vec<(ObjectId, ObjectId, TrustLabel)>,
    /// `(siot_object, rating_object)`; empty when no relations were merged.
    pub mapping: Vec<(ObjectId, ObjectId)>,
    pub duplicate_ratings: usize,
}

/// Turns deduplicated ratings into interactions with labels and merges
/// the SIoT relations when any are given.
pub fn prepare_dataset(
    ratings: &[RawRating],
    siot_triples: &[RelationTriple],
    cfg: &ExperimentConfig,
) -> Result<Dataset> {
    if ratings.is_empty() {
        return Err(Error::NoRatings);
    }
    let (ratings, duplicate_ratings) = dedupe_ratings(ratings);
    let ratings: Vec<RawRating> = ratings.into_iter().filter(|r| r.rater != r.rated).collect();
    let labels = label_pairs(&ratings, &cfg.labels)?
        .into_iter()
        .map(|((a, b), l)| (a, b, l))
        .collect();
    let (interactions, kg, mapping) = if siot_triples.is_empty() {
        (
            ratings_to_interactions(&ratings, cfg.positive_threshold),
            RelationKG::default(),
            Vec::new(),
        )
    } else {
        let merged = merge_siot_relations(
            &ratings,
            siot_triples,
            &MergeConfig {
                seed: cfg.seed,
                positive_threshold: cfg.positive_threshold,
            },
        )?;
        (merged.interactions, merged.kg, merged.mapping)
    };
    Ok(Dataset {
        interactions,
        kg,
        labels,
        mapping,
        duplicate_ratings,
    })
}

/// Weighted graph and credibility scores.
#[derive(Debug, Clone)]
pub struct TrustState {
    pub built: BuiltGraph,
    pub graph: TrustGraph,
    pub decay: DecayParams,
    pub now: u64,
    pub scores: CredibilityScores,
}

pub fn decay_for(built: &BuiltGraph, cfg: &ExperimentConfig) -> (DecayParams, u64) {
    let (first, last) = built.log.time_range().unwrap_or((0, 0));
    let mut p = DecayParams::for_time_range(first, last, cfg.lambda);
    if let Some(t0) = cfg.t0 {
        p.t0 = t0;
    }
    if let Some(h) = cfg.horizon {
        p.horizon = h;
    }
    (p, cfg.now.unwrap_or(last))
}

pub fn compute_trust(
    interactions: &[InteractionRecord],
    kg: &RelationKG,
    cfg: &ExperimentConfig,
) -> Result<TrustState> {
    let built = build_graph(interactions, kg.triples());
    let (decay, now) = decay_for(&built, cfg);
    let graph = compute_all_dtm(&built.graph, &built.log, &decay, now, cfg.dtm_rule)?;
    let scores = solve_credibility(&graph, cfg.epsilon, cfg.max_iter)?;
    Ok(TrustState {
        built,
        graph,
        decay,
        now,
        scores,
    })
}

/// Trains embeddings when the knowledge graph can support it.
pub fn train_embeddings(kg: &RelationKG, cfg: &ExperimentConfig) -> Result<Option<TrainedEmbeddings>> {
    if kg.is_empty() || kg.n_entities() < 2 {
        return Ok(None);
    }
    train_kge(kg, &cfg.kge).map(Some)
}

/// Validation micro-F1 of one hidden size, averaged over folds.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub hidden_size: usize,
    pub mean_f1: f64,
    pub folds_used: usize,
}

/// K-fold grid search over hidden sizes on `train`. Folds whose training
/// part has a single class are skipped. Ties keep the earlier grid entry.
pub fn grid_search_hidden(
    train: &[TrustSample],
    grid: &[usize],
    k: usize,
    base: &MlpConfig,
    seed: u64,
) -> Result<(usize, Vec<GridPoint>)> {
    match grid {
        [] => return Err(Error::InvalidParameter("empty hidden-size grid".into())),
        [only] => return Ok((*only, Vec::new())),
        _ => {}
    }
    let folds = kfold_split(train.len(), k, seed)?;
    let mut points = Vec::with_capacity(grid.len());
    for &hidden_size in grid {
        let cfg = MlpConfig { hidden_size, ..*base };
        let (mut sum, mut used) = (0.0, 0);
        for fold in &folds {
            let fit: Vec<TrustSample> = fold.train.iter().map(|&i| train[i]).collect();
            let held: Vec<TrustSample> = fold.validation.iter().map(|&i| train[i]).collect();
            let model = match train_mlp(&fit, &cfg) {
                Ok(t) => t.model,
                Err(Error::DegenerateLabels) => continue,
                Err(e) => return Err(e),
            };
            sum += evaluate(&model, &held)?.f1_micro;
            used += 1;
        }
        if used == 0 {
            return Err(Error::DegenerateLabels);
        }
        points.push(GridPoint {
            hidden_size,
            mean_f1: sum / used as f64,
            folds_used: used,
        });
    }
    let best = points
        .iter()
        .fold(&points[0], |best, p| if p.mean_f1 > best.mean_f1 { p } else { best })
        .hidden_size;
    Ok((best, points))
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub report: EvalReport,
    pub model: MlpModel,
    pub hidden_size: usize,
    pub grid: Vec<GridPoint>,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub loss_trace: Vec<f64>,
}

/// Splits, selects the hidden size by cross-validation, retrains on the
/// whole training part and evaluates on the held-out part.
pub fn fit_and_evaluate(samples: &[TrustSample], train_fraction: f64, cfg: &ExperimentConfig) -> Result<FitOutcome> {
    if samples.len() < 2 {
        return Err(Error::EmptyInput("labelled samples"));
    }
    let (train_idx, test_idx) = train_test_split(samples.len(), train_fraction, cfg.seed)?;
    let train: Vec<TrustSample> = train_idx.iter().map(|&i| samples[i]).collect();
    let test: Vec<TrustSample> = test_idx.iter().map(|&i| samples[i]).collect();
    let k = cfg.k_folds.min(train.len());
    let (hidden_size, grid) = grid_search_hidden(&train, &cfg.hidden_grid, k, &cfg.mlp, cfg.seed)?;
    let trained = train_mlp(&train, &MlpConfig { hidden_size, ..cfg.mlp })?;
    let report = evaluate(&trained.model, &test)?;
    Ok(FitOutcome {
        report,
        model: trained.model,
        hidden_size,
        grid,
        train_indices: train_idx,
        test_indices: test_idx,
        loss_trace: trained.loss_trace,
    })
}

/// Everything a pipeline run produces.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub dataset: Dataset,
    pub trust: TrustState,
    pub embeddings: Option<TrainedEmbeddings>,
    pub samples: Vec<TrustSample>,
    pub feature_diagnostics: FeatureDiagnostics,
    pub fit: FitOutcome,
}

/// Trust metrics and features for a prepared dataset.
pub fn featurize(
    dataset: &Dataset,
    cfg: &ExperimentConfig,
) -> Result<(
    TrustState,
    Option<TrainedEmbeddings>,
    Vec<TrustSample>,
    FeatureDiagnostics,
)> {
    let trust = compute_trust(&dataset.interactions, &dataset.kg, cfg)?;
    let embeddings = train_embeddings(&dataset.kg, cfg)?;
    let set = build_features(
        &trust.graph,
        &trust.scores,
        embeddings.as_ref().map(|e| &e.table),
        &dataset.labels,
        &cfg.recommendation,
    )?;
    Ok((trust, embeddings, set.samples, set.diagnostics))
}

pub fn run_pipeline(
    ratings: &[RawRating],
    siot_triples: &[RelationTriple],
    cfg: &ExperimentConfig,
) -> Result<PipelineRun> {
    let dataset = prepare_dataset(ratings, siot_triples, cfg)?;
    let (trust, embeddings, samples, feature_diagnostics) = featurize(&dataset, cfg)?;
    let fit = fit_and_evaluate(&samples, cfg.train_fraction, cfg)?;
    Ok(PipelineRun {
        dataset,
        trust,
        embeddings,
        samples,
        feature_diagnostics,
        fit,
    })
}

/// One row of a sweep: the axis value and either a report or the reason
/// the value was skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub result: core::result::Result<EvalReport, String>,
}

/// Re-fits the classifier at each training fraction on shared features.
pub fn sweep_train_fraction(samples: &[TrustSample], values: &[f64], cfg: &ExperimentConfig) -> Vec<SweepRow> {
    values
        .iter()
        .map(|&value| SweepRow {
            value,
            result: fit_and_evaluate(samples, value, cfg)
                .map(|f| f.report)
                .map_err(|e| alloc::format!("{e}")),
        })
        .collect()
}

/// Interaction count of each sample's pair in `trust`'s log.
pub fn pair_interaction_counts(samples: &[TrustSample], trust: &TrustState) -> Vec<usize> {
    samples
        .iter()
        .map(|s| {
            let g = &trust.built.graph;
            match (g.index_of(s.trustor), g.index_of(s.trustee)) {
                (Some(i), Some(j)) => g.edge_index(i, j).map_or(0, |e| trust.built.log.edge_records(e).len()),
                _ => 0,
            }
        })
        .collect()
}

/// Buckets pairs by interaction-count quantile. `values` are ascending
/// upper quantiles in (0, 1]; row `q` covers pairs whose count lies above
/// the previous value's quantile and at or below `q`'s. Each bucket is
/// split, trained and evaluated on its own.
pub fn sweep_interactions(
    samples: &[TrustSample],
    counts: &[usize],
    values: &[f64],
    cfg: &ExperimentConfig,
) -> Vec<SweepRow> {
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    let quantile = |q: f64| -> usize {
        if sorted.is_empty() {
            return 0;
        }
        let rank = libm::ceil(q * sorted.len() as f64) as usize;
        sorted[rank.clamp(1, sorted.len()) - 1]
    };
    let mut prev: Option<f64> = None;
    values
        .iter()
        .map(|&value| {
            if !(value > 0.0 && value <= 1.0) || prev.is_some_and(|p| value <= p) {
                return SweepRow {
                    value,
                    result: Err(alloc::format!("quantile {value} must be in (0,1] and ascending")),
                };
            }
            let lower = prev.map(quantile);
            let upper = quantile(value);
            prev = Some(value);
            let bucket: Vec<TrustSample> = samples
                .iter()
                .zip(counts)
                .filter(|(_, &c)| c <= upper && lower.is_none_or(|l| c > l))
                .map(|(s, _)| *s)
                .collect();
            SweepRow {
                value,
                result: fit_and_evaluate(&bucket, cfg.train_fraction, cfg)
                    .map(|f| f.report)
                    .map_err(|e| alloc::format!("bucket of {} pairs: {e}", bucket.len())),
            }
        })
        .collect()
}

/// Scores the hand-weighted aggregate as a classifier on `samples`.
pub fn evaluate_weighted(samples: &[TrustSample], weights: &[f64; 5], cuts: &LabelThresholds) -> Result<EvalReport> {
    let predicted = samples
        .iter()
        .map(|s| crate::classifier::weighted_label(&s.features, weights, cuts))
        .collect::<Result<Vec<_>>>()?;
    let truth: Vec<TrustLabel> = samples.iter().map(|s| s.label).collect();
    report_from_labels(&truth, &predicted)
}
