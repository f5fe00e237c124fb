//! Pipeline stages over an output directory.
//!
//! Each stage reads the artifacts of earlier stages from the directory and
//! writes its own, so any stage can be rerun alone. [`pipeline`] chains
//! them in memory and also writes the run manifest.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use log::{info, warn};
use trust_siot_core::classifier::MlpModel;
use trust_siot_core::credibility::{solve_credibility, CredibilityScores};
use trust_siot_core::direct::{compute_all_dtm, DecayParams};
use trust_siot_core::experiment::{
    decay_for, evaluate_weighted, fit_and_evaluate, pair_interaction_counts, prepare_dataset, sweep_interactions,
    sweep_train_fraction, train_embeddings, Dataset, FitOutcome, SweepRow, TrustState,
};
use trust_siot_core::features::{build_features, FeatureDiagnostics, TrustSample};
use trust_siot_core::graph::{build_graph, BuiltGraph, InteractionRecord};
use trust_siot_core::ingest::AdvogatoLevel;
use trust_siot_core::kge::{EmbeddingTable, TrainedEmbeddings};
use trust_siot_core::metrics::{evaluate, train_test_split, EvalReport};
use trust_siot_core::synthetic::{generate, SyntheticConfig};
use trust_siot_core::{RelationKG, RelationTriple, TrustGraph};

use crate::artifact::{self, RunManifest};
use crate::config::RunConfig;
use crate::dataset::{self, DatasetManifest, LoadedDataset, RatingFormat};
use crate::error::{InStage, Stage, StageResult};
use crate::formats::{self, write_text};

/// File names inside an output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

macro_rules! artifact_paths {
    ($($name:ident => $file:literal),* $(,)?) => {
        impl Layout {
            $(pub fn $name(&self) -> PathBuf { self.root.join($file) })*
        }
    };
}

artifact_paths! {
    interactions => "interactions.tsv",
    kg => "kg.tsv",
    labels => "labels.tsv",
    mapping => "mapping.tsv",
    names => "names.tsv",
    graph => "graph.tsv",
    scores => "scores.csv",
    embeddings => "embeddings.tsv",
    relations => "relations.tsv",
    kge_loss => "kge_loss.csv",
    features => "features.tsv",
    model => "model.tsv",
    mlp_loss => "mlp_loss.csv",
    metrics => "metrics.csv",
    run_manifest => "manifest.txt",
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn sweep(&self, axis: SweepAxis) -> PathBuf {
        self.root.join(format!("sweep_{}.csv", axis.as_str()))
    }
}

fn write(stage: Stage, path: &Path, text: &str) -> StageResult<()> {
    write_text(path, text).in_stage(stage)
}

fn manifest_for(cfg: &RunConfig, stage: Stage) -> StageResult<DatasetManifest> {
    let path = cfg
        .dataset
        .as_deref()
        .ok_or_else(|| anyhow!("no dataset manifest configured (set `dataset`)"))
        .in_stage(stage)?;
    DatasetManifest::read(path).in_stage(stage)
}

/// Name used in metric tables.
pub fn dataset_name(cfg: &RunConfig) -> String {
    if let Some(n) = &cfg.name {
        return n.clone();
    }
    cfg.dataset
        .as_deref()
        .and_then(|p| DatasetManifest::read(p).ok())
        .map_or_else(|| "dataset".to_string(), |m| m.name)
}

#[derive(Debug)]
pub struct Ingested {
    pub loaded: LoadedDataset,
    pub dataset: Dataset,
}

/// Loads the dataset with its relations merged in, then writes the
/// interaction log alongside the relabelled knowledge graph and labels.
pub fn ingest(cfg: &RunConfig, out: &Layout) -> StageResult<Ingested> {
    let s = Stage::Ingest;
    let manifest = manifest_for(cfg, s)?;
    let loaded = dataset::load(&manifest).in_stage(s)?;
    let dataset = prepare_dataset(&loaded.ratings.ratings, &loaded.triples, &cfg.seeded()).in_stage(s)?;
    if dataset.duplicate_ratings > 0 {
        warn!(
            "{} duplicate rating(s): the last value of each pair was kept",
            dataset.duplicate_ratings
        );
    }
    write(
        s,
        &out.interactions(),
        &formats::interactions_tsv(&dataset.interactions),
    )?;
    write(s, &out.kg(), &formats::triples_tsv(dataset.kg.triples()))?;
    write(s, &out.labels(), &formats::labels_tsv(&dataset.labels))?;
    write(s, &out.mapping(), &formats::mapping_tsv(&dataset.mapping))?;
    if !loaded.ratings.names.is_empty() {
        write(s, &out.names(), &formats::names_tsv(&loaded.ratings.names))?;
    }
    info!(
        "ingest: {} interactions, {} labelled pairs, {} relation triples",
        dataset.interactions.len(),
        dataset.labels.len(),
        dataset.kg.n_triples()
    );
    Ok(Ingested { loaded, dataset })
}

fn read_kg(stage: Stage, out: &Layout) -> StageResult<RelationKG> {
    let (triples, diag) = formats::load_triples(&out.kg()).in_stage(stage)?;
    if diag.bad_lines > 0 {
        return Err(anyhow!("{}: {} malformed line(s)", out.kg().display(), diag.bad_lines)).in_stage(stage);
    }
    Ok(RelationKG::from_triples(triples).0)
}

/// Direct trust of every interacting pair, before credibility is known.
pub fn dtm_from(
    cfg: &RunConfig,
    interactions: &[InteractionRecord],
    triples: &[RelationTriple],
) -> StageResult<(TrustGraph, BuiltGraph, DecayParams, u64)> {
    let e = cfg.seeded();
    let built = build_graph(interactions, triples);
    let (decay, now) = decay_for(&built, &e);
    let graph = compute_all_dtm(&built.graph, &built.log, &decay, now, e.dtm_rule).in_stage(Stage::Dtm)?;
    info!(
        "dtm: {} objects, {} edges, t0 {}, horizon {}, now {now}",
        graph.node_count(),
        graph.edge_count(),
        decay.t0,
        decay.horizon
    );
    Ok((graph, built, decay, now))
}

pub fn dtm(cfg: &RunConfig, out: &Layout) -> StageResult<TrustGraph> {
    let s = Stage::Dtm;
    let interactions = formats::read_interactions(&out.interactions()).in_stage(s)?;
    let kg = read_kg(s, out)?;
    let (graph, ..) = dtm_from(cfg, &interactions, kg.triples())?;
    write(s, &out.graph(), &formats::graph_tsv(&graph))?;
    Ok(graph)
}

pub fn credibility_of(cfg: &RunConfig, graph: &TrustGraph) -> StageResult<CredibilityScores> {
    let e = &cfg.experiment;
    let scores = solve_credibility(graph, e.epsilon, e.max_iter).in_stage(Stage::Credibility)?;
    if scores.converged {
        info!("credibility: converged after {} iterations", scores.iterations);
    } else {
        warn!("credibility: not converged after {} iterations", scores.iterations);
    }
    Ok(scores)
}

pub fn credibility(cfg: &RunConfig, out: &Layout) -> StageResult<CredibilityScores> {
    let s = Stage::Credibility;
    let graph = formats::read_graph(&out.graph()).in_stage(s)?;
    let scores = credibility_of(cfg, &graph)?;
    write(s, &out.scores(), &formats::scores_csv(&graph, &scores))?;
    Ok(scores)
}

pub fn kge_of(cfg: &RunConfig, kg: &RelationKG) -> StageResult<Option<TrainedEmbeddings>> {
    let trained = train_embeddings(kg, &cfg.seeded()).in_stage(Stage::KgeTrain)?;
    match &trained {
        Some(t) => info!(
            "kge-train: {} entities, final loss {:.6}",
            t.table.entities.len(),
            t.loss_trace.last().copied().unwrap_or(f64::NAN)
        ),
        None => warn!("kge-train: knowledge graph too small to embed; degree of relationship will be 0"),
    }
    Ok(trained)
}

fn write_kge(out: &Layout, trained: &Option<TrainedEmbeddings>) -> StageResult<()> {
    let s = Stage::KgeTrain;
    if let Some(t) = trained {
        artifact::write_embeddings(&out.embeddings(), &out.relations(), &t.table).in_stage(s)?;
        write(s, &out.kge_loss(), &formats::loss_csv(&t.loss_trace))?;
    } else {
        // Stale tables from an earlier run must not leak into features.
        for p in [out.embeddings(), out.relations(), out.kge_loss()] {
            if p.exists() {
                std::fs::remove_file(&p)
                    .with_context(|| format!("removing {}", p.display()))
                    .in_stage(s)?;
            }
        }
    }
    Ok(())
}

pub fn kge_train(cfg: &RunConfig, out: &Layout) -> StageResult<Option<TrainedEmbeddings>> {
    let kg = read_kg(Stage::KgeTrain, out)?;
    let trained = kge_of(cfg, &kg)?;
    write_kge(out, &trained)?;
    Ok(trained)
}

pub fn features_of(
    cfg: &RunConfig,
    graph: &TrustGraph,
    scores: &CredibilityScores,
    table: Option<&EmbeddingTable>,
    labels: &[(
        trust_siot_core::ObjectId,
        trust_siot_core::ObjectId,
        trust_siot_core::TrustLabel,
    )],
) -> StageResult<(Vec<TrustSample>, FeatureDiagnostics)> {
    let set = build_features(graph, scores, table, labels, &cfg.experiment.recommendation).in_stage(Stage::Features)?;
    let d = set.diagnostics;
    info!(
        "features: {} samples, {} global fallbacks, {} missing edges, {} missing embeddings",
        set.samples.len(),
        d.global_fallbacks,
        d.missing_edges,
        d.missing_embeddings
    );
    Ok((set.samples, d))
}

/// Reads the embedding table when the kge stage produced one.
fn read_table(stage: Stage, out: &Layout) -> StageResult<Option<EmbeddingTable>> {
    if !out.embeddings().exists() {
        return Ok(None);
    }
    artifact::read_embeddings(&out.embeddings(), &out.relations())
        .map(Some)
        .in_stage(stage)
}

pub fn features(cfg: &RunConfig, out: &Layout) -> StageResult<Vec<TrustSample>> {
    let s = Stage::Features;
    let graph = formats::read_graph(&out.graph()).in_stage(s)?;
    let scores = formats::read_scores(&out.scores(), &graph).in_stage(s)?;
    let table = read_table(s, out)?;
    let labels = formats::read_labels(&out.labels()).in_stage(s)?;
    let (samples, _) = features_of(cfg, &graph, &scores, table.as_ref(), &labels)?;
    write(s, &out.features(), &formats::features_tsv(&samples))?;
    Ok(samples)
}

pub fn train_on(cfg: &RunConfig, samples: &[TrustSample]) -> StageResult<FitOutcome> {
    let e = cfg.seeded();
    let fit = fit_and_evaluate(samples, e.train_fraction, &e).in_stage(Stage::Train)?;
    for p in &fit.grid {
        info!(
            "grid: hidden {} mean validation F1 {:.4} over {} folds",
            p.hidden_size, p.mean_f1, p.folds_used
        );
    }
    info!(
        "train: hidden size {}, {} epochs",
        fit.hidden_size,
        fit.loss_trace.len()
    );
    Ok(fit)
}

fn write_model(out: &Layout, fit: &FitOutcome) -> StageResult<()> {
    write(Stage::Train, &out.model(), &artifact::model_tsv(&fit.model))?;
    write(Stage::Train, &out.mlp_loss(), &formats::loss_csv(&fit.loss_trace))
}

/// Splits the features, selects the hidden size by cross-validation and
/// writes the model trained on the training part.
pub fn train(cfg: &RunConfig, out: &Layout) -> StageResult<FitOutcome> {
    let samples = formats::read_features(&out.features()).in_stage(Stage::Train)?;
    let fit = train_on(cfg, &samples)?;
    write_model(out, &fit)?;
    Ok(fit)
}

fn metrics_text(cfg: &RunConfig, report: &EvalReport, baseline: Option<&EvalReport>) -> String {
    let name = dataset_name(cfg);
    let frac = cfg.experiment.train_fraction;
    let weighted = format!("{name}/weighted");
    let mut rows = vec![(name.as_str(), frac, report)];
    if let Some(b) = baseline {
        rows.push((weighted.as_str(), frac, b));
    }
    formats::metrics_csv(rows)
}

fn baseline(cfg: &RunConfig, test: &[TrustSample]) -> StageResult<Option<EvalReport>> {
    cfg.weights
        .map(|w| evaluate_weighted(test, &w, &cfg.experiment.labels))
        .transpose()
        .in_stage(Stage::Evaluate)
}

/// Scores `model` on the held-out part of the split `train` used.
pub fn evaluate_on(
    cfg: &RunConfig,
    model: &MlpModel,
    samples: &[TrustSample],
) -> StageResult<(EvalReport, Option<EvalReport>)> {
    let s = Stage::Evaluate;
    let e = &cfg.experiment;
    let (_, test_idx) = train_test_split(samples.len(), e.train_fraction, e.seed).in_stage(s)?;
    let test: Vec<TrustSample> = test_idx.iter().map(|&i| samples[i]).collect();
    let report = evaluate(model, &test).in_stage(s)?;
    Ok((report, baseline(cfg, &test)?))
}

pub fn evaluate_stage(cfg: &RunConfig, out: &Layout) -> StageResult<EvalReport> {
    let s = Stage::Evaluate;
    let model = artifact::read_model(&out.model()).in_stage(s)?;
    let samples = formats::read_features(&out.features()).in_stage(s)?;
    let (report, base) = evaluate_on(cfg, &model, &samples)?;
    write(s, &out.metrics(), &metrics_text(cfg, &report, base.as_ref()))?;
    info!(
        "evaluate: F1 {:.4}, MAE {:.4}, MSE {:.4} on {} pairs",
        report.f1_micro, report.mae, report.mse, report.n_test
    );
    Ok(report)
}

/// Everything up to the feature rows, kept in memory.
#[derive(Debug)]
pub struct Featurized {
    pub ingested: Ingested,
    pub trust: TrustState,
    pub embeddings: Option<TrainedEmbeddings>,
    pub samples: Vec<TrustSample>,
    pub feature_diagnostics: FeatureDiagnostics,
}

/// Runs ingest through features, writing every intermediate artifact.
pub fn featurize(cfg: &RunConfig, out: &Layout) -> StageResult<Featurized> {
    let ingested = ingest(cfg, out)?;
    let d = &ingested.dataset;
    let (graph, built, decay, now) = dtm_from(cfg, &d.interactions, d.kg.triples())?;
    write(Stage::Dtm, &out.graph(), &formats::graph_tsv(&graph))?;
    let scores = credibility_of(cfg, &graph)?;
    let trust = TrustState {
        built,
        graph: graph.clone(),
        decay,
        now,
        scores,
    };
    write(
        Stage::Credibility,
        &out.scores(),
        &formats::scores_csv(&graph, &trust.scores),
    )?;
    let embeddings = kge_of(cfg, &d.kg)?;
    write_kge(out, &embeddings)?;
    let (samples, feature_diagnostics) = features_of(
        cfg,
        &graph,
        &trust.scores,
        embeddings.as_ref().map(|t| &t.table),
        &d.labels,
    )?;
    write(Stage::Features, &out.features(), &formats::features_tsv(&samples))?;
    Ok(Featurized {
        ingested,
        trust,
        embeddings,
        samples,
        feature_diagnostics,
    })
}

#[derive(Debug)]
pub struct PipelineOutput {
    pub featurized: Featurized,
    pub fit: FitOutcome,
    pub report: EvalReport,
    pub baseline: Option<EvalReport>,
    pub manifest: RunManifest,
}

/// Every stage in order, followed by the run manifest.
pub fn pipeline(cfg: &RunConfig, out: &Layout) -> StageResult<PipelineOutput> {
    let featurized = featurize(cfg, out)?;
    let fit = train_on(cfg, &featurized.samples)?;
    write_model(out, &fit)?;
    let (report, base) = evaluate_on(cfg, &fit.model, &featurized.samples)?;
    write(
        Stage::Evaluate,
        &out.metrics(),
        &metrics_text(cfg, &report, base.as_ref()),
    )?;
    info!(
        "pipeline: F1 {:.4}, MAE {:.4}, MSE {:.4} on {} pairs",
        report.f1_micro, report.mae, report.mse, report.n_test
    );
    let manifest = run_manifest(cfg, out, &featurized, &fit, &report).in_stage(Stage::Evaluate)?;
    write(Stage::Evaluate, &out.run_manifest(), &manifest.render())?;
    Ok(PipelineOutput {
        featurized,
        fit,
        report,
        baseline: base,
        manifest,
    })
}

fn run_manifest(
    cfg: &RunConfig,
    out: &Layout,
    f: &Featurized,
    fit: &FitOutcome,
    report: &EvalReport,
) -> anyhow::Result<RunManifest> {
    let mut m = RunManifest::default();
    for (k, v) in cfg.entries() {
        m.set(format!("config.{k}"), v);
    }
    let data = &f.ingested.loaded;
    m.set("dataset.name", &data.manifest.name);
    m.set("dataset.format", data.manifest.format.as_str());
    m.hash_file("input.ratings", &data.manifest.ratings)?;
    if let Some(t) = &data.manifest.triples {
        m.hash_file("input.triples", t)?;
    }
    let rd = &data.ratings.diagnostics;
    m.set("diagnostics.rating_lines", rd.lines);
    m.set("diagnostics.rating_bad_lines", rd.bad_lines);
    m.set("diagnostics.triple_bad_lines", data.triple_diagnostics.bad_lines);
    m.set("diagnostics.duplicate_ratings", f.ingested.dataset.duplicate_ratings);
    let bd = &f.trust.built.diagnostics;
    m.set("diagnostics.self_loop_interactions", bd.self_loop_interactions);
    m.set("diagnostics.duplicate_triples", bd.duplicate_triples);
    m.set("diagnostics.self_loop_triples", bd.self_loop_triples);
    let fd = &f.feature_diagnostics;
    m.set("diagnostics.global_fallbacks", fd.global_fallbacks);
    m.set("diagnostics.missing_edges", fd.missing_edges);
    m.set("diagnostics.missing_embeddings", fd.missing_embeddings);
    m.set("diagnostics.zero_norm_embeddings", fd.zero_norm_embeddings);
    m.set("result.decay.t0", f.trust.decay.t0);
    m.set("result.decay.horizon", f.trust.decay.horizon);
    m.set("result.decay.now", f.trust.now);
    m.set("result.credibility.iterations", f.trust.scores.iterations);
    m.set("result.credibility.converged", f.trust.scores.converged);
    m.set("result.objects", f.trust.graph.node_count());
    m.set("result.edges", f.trust.graph.edge_count());
    m.set("result.samples", f.samples.len());
    m.set("result.hidden_size", fit.hidden_size);
    m.set("result.f1", format!("{:.6}", report.f1_micro));
    m.set("result.mae", format!("{:.6}", report.mae));
    m.set("result.mse", format!("{:.6}", report.mse));
    m.set("result.n_test", report.n_test);
    let mut artifacts = vec![
        ("interactions", out.interactions()),
        ("kg", out.kg()),
        ("labels", out.labels()),
        ("graph", out.graph()),
        ("scores", out.scores()),
        ("features", out.features()),
        ("model", out.model()),
        ("metrics", out.metrics()),
    ];
    if f.embeddings.is_some() {
        artifacts.push(("embeddings", out.embeddings()));
        artifacts.push(("relations", out.relations()));
    }
    for (name, path) in artifacts {
        m.hash_file(&format!("artifact.{name}"), &path)?;
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    TrainFraction,
    Interactions,
}

impl std::str::FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train_fraction" => Ok(Self::TrainFraction),
            "interactions" => Ok(Self::Interactions),
            other => Err(format!(
                "unknown sweep axis `{other}` (expected train_fraction or interactions)"
            )),
        }
    }
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::TrainFraction => "train_fraction",
            Self::Interactions => "interactions",
        }
    }
}

pub const SWEEP_HEADER: &str = "dataset,axis,value,train_frac,f1,mae,mse,n_test,status";

pub fn sweep_csv(name: &str, axis: SweepAxis, train_fraction: f64, rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for row in rows {
        let frac = match axis {
            SweepAxis::TrainFraction => row.value,
            SweepAxis::Interactions => train_fraction,
        };
        match &row.result {
            Ok(r) => out.push_str(&format!(
                "{name},{},{},{frac},{:.6},{:.6},{:.6},{},ok\n",
                axis.as_str(),
                row.value,
                r.f1_micro,
                r.mae,
                r.mse,
                r.n_test
            )),
            // Commas would break the row, so reasons are sanitised.
            Err(why) => out.push_str(&format!(
                "{name},{},{},{frac},,,,,skipped: {}\n",
                axis.as_str(),
                row.value,
                why.replace(',', ";")
            )),
        }
    }
    out
}

/// Features are computed once; the classifier is refit for every value.
/// Rows come back in input order, with invalid values as skipped rows.
pub fn sweep(cfg: &RunConfig, out: &Layout, axis: SweepAxis, values: &[f64]) -> StageResult<Vec<SweepRow>> {
    let s = Stage::Sweep;
    if values.is_empty() {
        return Err(anyhow!("no sweep values given")).in_stage(s);
    }
    let f = featurize(cfg, out)?;
    let e = cfg.seeded();
    let rows = match axis {
        SweepAxis::TrainFraction => sweep_train_fraction(&f.samples, values, &e),
        SweepAxis::Interactions => {
            let counts = pair_interaction_counts(&f.samples, &f.trust);
            sweep_interactions(&f.samples, &counts, values, &e)
        }
    };
    for row in &rows {
        if let Err(why) = &row.result {
            warn!("sweep {} = {}: skipped: {why}", axis.as_str(), row.value);
        }
    }
    let name = dataset_name(cfg);
    write(s, &out.sweep(axis), &sweep_csv(&name, axis, e.train_fraction, &rows))?;
    if axis == SweepAxis::TrainFraction {
        let ok: Vec<(&str, f64, &EvalReport)> = rows
            .iter()
            .filter_map(|r| r.result.as_ref().ok().map(|rep| (name.as_str(), r.value, rep)))
            .collect();
        write(s, &out.metrics(), &formats::metrics_csv(ok))?;
    }
    Ok(rows)
}

/// Writes a synthetic certification dataset (`ratings.tsv`, `triples.tsv`)
/// and a manifest pointing at both. Returns the manifest path.
pub fn synth(cfg: &SyntheticConfig, dir: &Path, name: &str) -> StageResult<PathBuf> {
    let s = Stage::Synth;
    let data = generate(cfg);
    let mut ratings = String::from("# rater\trated\tlevel\ttime\n");
    for r in &data.ratings {
        let level = AdvogatoLevel::ALL
            .into_iter()
            .find(|l| l.value() == r.value)
            .ok_or_else(|| anyhow!("generated rating {} is not a certification level", r.value))
            .in_stage(s)?;
        let time = r.time.map_or_else(String::new, |t| format!("\t{t}"));
        ratings.push_str(&format!("{}\t{}\t{}{time}\n", r.rater.0, r.rated.0, level.as_str()));
    }
    write(s, &dir.join("ratings.tsv"), &ratings)?;
    write(s, &dir.join("triples.tsv"), &formats::triples_tsv(&data.triples))?;
    let manifest = DatasetManifest {
        name: name.to_string(),
        ratings: "ratings.tsv".into(),
        triples: Some("triples.tsv".into()),
        format: RatingFormat::Advogato,
    };
    let path = dir.join("dataset.txt");
    write(s, &path, &manifest.render())?;
    info!(
        "synth: {} ratings, {} relation triples in {}",
        data.ratings.len(),
        data.triples.len(),
        dir.display()
    );
    Ok(path)
}
