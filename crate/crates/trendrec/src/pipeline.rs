//! End-to-end stages over in-memory data: preparation, social context,
//! training and evaluation.

use std::collections::{BTreeMap, BTreeSet};

use trendrec_core::corpus::{filter_active_users, remove_free_items, Catalog, EmbeddingTable, MessageSet, Purchase, Timestamp};
use trendrec_core::eval::{
    build_tasks, evaluate, increments, prevpop_scorer, Increments,
    MetricsReport, ModelScorer, RandomScorer, RecommendationTask, CANDIDATES,
};
use trendrec_core::model::{init_params, Fusion, ModelConfig, ModelParams};
use trendrec_core::segment::{AvailabilityIndex, Segment, SegmentIndex};
use trendrec_core::train::{build_positive_instances, sample_negatives, train, Features, Instance, TrainConfig};
use trendrec_core::trend::{
    build_segment_context, candidate_words, emergence_series, emerging_words, EmergenceParams, FrequencyTable, HourlyEmbeddings,
    SegmentContext,
};

use crate::error::{Error, Result};

/// Offsets from the master seed for each stage.
pub mod seed_offset {
    pub const SYNTH: u64 = 0;
    pub const NEGATIVES: u64 = 1;
    pub const TASKS: u64 = 2;
    pub const INIT: u64 = 3;
    pub const SHUFFLE: u64 = 4;
    pub const RANDOM: u64 = 5;
}

/// Raw inputs of a run.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub messages: MessageSet,
    pub catalog: Catalog,
    pub purchases: Vec<Purchase>,
    pub word_vectors: EmbeddingTable,
    pub user_embeddings: EmbeddingTable,
    pub item_embeddings: EmbeddingTable,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrepConfig {
    pub min_purchases: usize,
    pub test_days: u64,
    pub n_candidates: usize,
    pub k: usize,
    pub neg_ratio: usize,
}

impl Default for PrepConfig {
    fn default() -> Self {
        PrepConfig {
            min_purchases: 5,
            test_days: 14,
            n_candidates: CANDIDATES,
            k: 24,
            neg_ratio: 4,
        }
    }
}

/// Emergence flags of every candidate word and the resulting hourly
/// embeddings.
#[derive(Clone, Debug)]
pub struct TrendOutput {
    /// Hour of the first flag in each series.
    pub start: Timestamp,
    pub flags: Vec<(String, Vec<bool>)>,
    pub hourly: HourlyEmbeddings,
}

/// Runs emergence detection over words that have a vector.
pub fn run_trend(
    messages: &MessageSet,
    vectors: &EmbeddingTable,
    params: EmergenceParams,
    stopwords: &BTreeSet<String>,
) -> TrendOutput {
    let vocab: BTreeSet<String> = vectors.iter().map(|(k, _)| k.to_string()).collect();
    let table = FrequencyTable::build(messages, Some(&vocab));
    let words = candidate_words(&table, vectors, stopwords);
    let emerging = emerging_words(&table, &words, params);
    let flags = words
        .iter()
        .map(|w| (w.clone(), emergence_series(table.series(w), params)))
        .collect();
    TrendOutput {
        start: table.start(),
        flags,
        hourly: HourlyEmbeddings::from_emerging(&emerging, vectors),
    }
}

/// Everything the training and evaluation stages consume.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub catalog: Catalog,
    pub purchases: Vec<Purchase>,
    pub train_instances: Vec<Instance>,
    pub tasks: Vec<RecommendationTask>,
    pub contexts: BTreeMap<Timestamp, SegmentContext>,
    pub split_anchor: Timestamp,
}

pub fn prepare(corpus: &Corpus, config: &PrepConfig, hourly: &HourlyEmbeddings, seed: u64) -> Result<Prepared> {
    let active = filter_active_users(&corpus.purchases, config.min_purchases);
    let (catalog, purchases) = remove_free_items(&corpus.catalog, &active);
    let (Some(first), Some(last)) = (purchases.iter().map(|p| p.time).min(), purchases.iter().map(|p| p.time).max()) else {
        return Err(Error::Pipeline("no purchases left after filtering".into()));
    };
    let segments = SegmentIndex::build(first, last.plus(1));
    let split = last.plus(1).checked_minus(config.test_days * 24).unwrap_or(first);
    let split_anchor = Segment::containing(split).map_or(split, |s| s.next().anchor);
    let (train_log, test_log): (Vec<Purchase>, Vec<Purchase>) = purchases
        .iter()
        .cloned()
        .partition(|p| Segment::containing(p.time).is_some_and(|s| s.anchor < split_anchor));

    let availability = AvailabilityIndex::new(&catalog, segments.segments());
    let positives = build_positive_instances(&train_log);
    let train_instances = sample_negatives(&positives, &catalog, &availability, config.neg_ratio, seed + seed_offset::NEGATIVES)?;
    let test_positives = build_positive_instances(&test_log);
    let tasks = build_tasks(&test_positives, &catalog, &availability, config.n_candidates, seed + seed_offset::TASKS)?;

    let mut contexts = BTreeMap::new();
    for seg in segments.segments() {
        contexts.insert(seg.anchor, build_segment_context(hourly, seg.anchor, config.k)?);
    }
    Ok(Prepared {
        catalog,
        purchases,
        train_instances,
        tasks,
        contexts,
        split_anchor,
    })
}

#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub fusion: Fusion,
    pub config: ModelConfig,
    pub params: ModelParams,
    pub loss_curve: Vec<f64>,
}

pub fn features<'a>(corpus: &'a Corpus, prepared: &'a Prepared) -> Features<'a> {
    Features {
        users: &corpus.user_embeddings,
        items: &corpus.item_embeddings,
        contexts: &prepared.contexts,
    }
}

pub fn train_model(
    corpus: &Corpus,
    prepared: &Prepared,
    base: &ModelConfig,
    fusion: Fusion,
    train_config: &TrainConfig,
    seed: u64,
) -> Result<TrainedModel> {
    let config = ModelConfig { fusion, ..base.clone() };
    let params = init_params(&config, seed + seed_offset::INIT)?;
    let tc = TrainConfig {
        seed: seed + seed_offset::SHUFFLE,
        ..train_config.clone()
    };
    let outcome = train(params, &prepared.train_instances, &features(corpus, prepared), &config, &tc)?;
    Ok(TrainedModel {
        fusion,
        config,
        params: outcome.params,
        loss_curve: outcome.loss_curve,
    })
}

pub fn evaluate_model(corpus: &Corpus, prepared: &Prepared, model: &TrainedModel) -> Result<MetricsReport> {
    let mut scorer = ModelScorer::new(&model.params, &model.config, features(corpus, prepared));
    Ok(evaluate(&prepared.tasks, &mut scorer)?)
}

pub fn evaluate_prevpop(prepared: &Prepared) -> Result<MetricsReport> {
    Ok(evaluate(&prepared.tasks, &mut prevpop_scorer(&prepared.purchases))?)
}

pub fn evaluate_random(prepared: &Prepared, seed: u64) -> Result<MetricsReport> {
    Ok(evaluate(&prepared.tasks, &mut RandomScorer::new(seed + seed_offset::RANDOM))?)
}

/// Metric reports keyed by model name, plus increments of each fused
/// model over the no-fusion model.
#[derive(Clone, Debug)]
pub struct Comparison {
    pub metrics: Vec<(String, MetricsReport)>,
    pub increments: Vec<Increments>,
}

pub fn compare(metrics: Vec<(String, MetricsReport)>) -> Result<Comparison> {
    let base = metrics.iter().find(|(n, _)| n == Fusion::None.as_str()).cloned();
    let mut incs = Vec::new();
    if let Some((base_name, base)) = base {
        for (name, report) in &metrics {
            if name == Fusion::Average.as_str() || name == Fusion::Iste.as_str() {
                incs.push(increments(&base_name, &base, name, report)?);
            }
        }
    }
    Ok(Comparison { metrics, increments: incs })
}
