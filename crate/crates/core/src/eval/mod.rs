//! Ranking evaluation, baselines and lagged correlation analysis.
//!
//! Each task pairs one purchased item with 399 items sampled from the same
//! segment's availability. Scores rank candidates in descending order with
//! ties broken by ascending item id; HR@K and NDCG@K follow from the rank of
//! the purchased item.

mod report;
mod stats;

pub use report::{increments, IncrementRow, Increments};
pub use stats::{
    lagged_correlation, pearson, student_t_two_sided, regularized_incomplete_beta, CorrelationReport,
    LagCorrelation,
};

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::{Catalog, Message, Purchase, Timestamp};
use crate::model::{FastScorer, ModelConfig, ModelParams, PreparedItem};
use crate::rng::SeededRng;
use crate::segment::{AvailabilityIndex, Segment};
use crate::train::{Features, Instance};
use crate::trend::FrequencyTable;
use crate::{Error, Result};

pub const CUTOFFS: [usize; 5] = [1, 2, 3, 5, 10];
pub const CANDIDATES: usize = 400;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecommendationTask {
    pub user: String,
    pub anchor: Timestamp,
    pub true_item: String,
    /// Candidate ids in ascending order, including `true_item`.
    pub candidates: Vec<String>,
}

/// One task per positive, with `n_candidates - 1` negatives drawn uniformly
/// without replacement from the segment's other available items.
pub fn build_tasks(
    positives: &[Instance],
    catalog: &Catalog,
    availability: &AvailabilityIndex,
    n_candidates: usize,
    seed: u64,
) -> Result<Vec<RecommendationTask>> {
    let mut rng = SeededRng::new(seed);
    positives
        .iter()
        .map(|pos| {
            let Some(true_index) = catalog.index_of(&pos.item) else {
                return Err(Error::MissingEmbedding {
                    kind: "catalog item",
                    key: pos.item.clone(),
                });
            };
            let pool: Vec<usize> = availability
                .available(pos.anchor)
                .iter()
                .copied()
                .filter(|&i| i != true_index)
                .collect();
            let needed = n_candidates.saturating_sub(1);
            if pool.len() < needed {
                return Err(Error::InsufficientItems {
                    anchor: pos.anchor.0,
                    available: pool.len() + 1,
                    required: n_candidates,
                });
            }
            let mut chosen: Vec<usize> = rng.sample_indices(pool.len(), needed).into_iter().map(|j| pool[j]).collect();
            chosen.push(true_index);
            chosen.sort_unstable();
            Ok(RecommendationTask {
                user: pos.user.clone(),
                anchor: pos.anchor,
                true_item: pos.item.clone(),
                candidates: chosen.into_iter().map(|i| catalog.get(i).id.clone()).collect(),
            })
        })
        .collect()
}

/// Scores every candidate of a task, in candidate order.
pub trait Scorer {
    fn score_task(&mut self, task: &RecommendationTask) -> Result<Vec<f64>>;
}

/// Adapts a per-item function `(user, anchor, item) -> score`.
pub struct PointScorer<F>(pub F);

impl<F: FnMut(&str, Timestamp, &str) -> f64> Scorer for PointScorer<F> {
    fn score_task(&mut self, task: &RecommendationTask) -> Result<Vec<f64>> {
        Ok(task
            .candidates
            .iter()
            .map(|item| (self.0)(&task.user, task.anchor, item))
            .collect())
    }
}

/// Independent uniform scores.
pub struct RandomScorer(SeededRng);

impl RandomScorer {
    pub fn new(seed: u64) -> Self {
        RandomScorer(SeededRng::new(seed))
    }
}

impl Scorer for RandomScorer {
    fn score_task(&mut self, task: &RecommendationTask) -> Result<Vec<f64>> {
        Ok(task.candidates.iter().map(|_| self.0.uniform()).collect())
    }
}

/// Sales count of each item in the segment preceding the task's anchor.
#[derive(Clone, Debug, Default)]
pub struct PrevPopScorer {
    sales: BTreeMap<Timestamp, BTreeMap<String, u32>>,
}

pub fn prevpop_scorer(purchases: &[Purchase]) -> PrevPopScorer {
    let mut sales: BTreeMap<Timestamp, BTreeMap<String, u32>> = BTreeMap::new();
    for p in purchases {
        if let Some(seg) = Segment::containing(p.time) {
            *sales.entry(seg.anchor).or_default().entry(p.item.clone()).or_insert(0) += 1;
        }
    }
    PrevPopScorer { sales }
}

impl PrevPopScorer {
    /// Sales in the segment before the one containing `anchor`; zero for
    /// items that did not sell then.
    pub fn score(&self, anchor: Timestamp, item: &str) -> f64 {
        Segment::containing(anchor)
            .and_then(|s| s.previous())
            .and_then(|prev| self.sales.get(&prev.anchor))
            .and_then(|counts| counts.get(item))
            .map_or(0.0, |&c| c as f64)
    }
}

impl Scorer for PrevPopScorer {
    fn score_task(&mut self, task: &RecommendationTask) -> Result<Vec<f64>> {
        Ok(task.candidates.iter().map(|item| self.score(task.anchor, item)).collect())
    }
}

/// Trained model scoring with per-item caches.
pub struct ModelScorer<'a> {
    scorer: FastScorer<'a>,
    features: Features<'a>,
    config: &'a ModelConfig,
    items: BTreeMap<String, PreparedItem>,
}

impl<'a> ModelScorer<'a> {
    pub fn new(params: &'a ModelParams, config: &'a ModelConfig, features: Features<'a>) -> Self {
        ModelScorer {
            scorer: FastScorer::new(params, config),
            features,
            config,
            items: BTreeMap::new(),
        }
    }
}

impl Scorer for ModelScorer<'_> {
    fn score_task(&mut self, task: &RecommendationTask) -> Result<Vec<f64>> {
        let user = self.scorer.prepare_user(self.features.user(&task.user)?);
        let social = self.features.social(task.anchor, self.config)?;
        let mut out = Vec::with_capacity(task.candidates.len());
        for id in &task.candidates {
            if !self.items.contains_key(id) {
                let prepared = self.scorer.prepare_item(self.features.item(id)?);
                self.items.insert(id.clone(), prepared);
            }
            out.push(self.scorer.score(&user, &self.items[id], social));
        }
        Ok(out)
    }
}

/// 1-based rank of the true item under descending score, ties by id.
pub fn rank_of_true(task: &RecommendationTask, scores: &[f64]) -> Result<usize> {
    if scores.len() != task.candidates.len() {
        return Err(Error::ShapeMismatch {
            op: "score_task",
            left: alloc::vec![task.candidates.len()],
            right: alloc::vec![scores.len()],
        });
    }
    if let Some(bad) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFiniteScore {
            item: task.candidates[bad].clone(),
        });
    }
    let pos = task
        .candidates
        .iter()
        .position(|c| *c == task.true_item)
        .ok_or(Error::MismatchedTasks)?;
    let (s, id) = (scores[pos], &task.true_item);
    let ahead = task
        .candidates
        .iter()
        .zip(scores)
        .filter(|(c, &x)| x > s || (x == s && *c < id))
        .count();
    Ok(ahead + 1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub cutoffs: Vec<usize>,
    /// Percentages.
    pub hr: Vec<f64>,
    pub ndcg: Vec<f64>,
    pub n_tasks: usize,
    /// Identifies the task set, so reports over different tasks are not compared.
    pub task_digest: u64,
}

/// Discounted gain of a hit at 1-based `rank`.
pub fn ndcg_at_rank(rank: usize) -> f64 {
    1.0 / libm::log2(rank as f64 + 1.0)
}

fn fold_bytes(h: u64, bytes: &[u8]) -> u64 {
    bytes.chunks(8).fold(h, |h, c| {
        let mut w = [0u8; 8];
        w[..c.len()].copy_from_slice(c);
        crate::rng::hash_words(&[h, u64::from_le_bytes(w), c.len() as u64])
    })
}

pub fn task_digest(tasks: &[RecommendationTask]) -> u64 {
    tasks.iter().fold(0, |h, t| {
        let h = fold_bytes(crate::rng::hash_words(&[h, t.anchor.0]), t.user.as_bytes());
        let h = fold_bytes(h, t.true_item.as_bytes());
        t.candidates.iter().fold(h, |h, c| fold_bytes(h, c.as_bytes()))
    })
}

/// Aggregates ranks, one per task, into a report.
pub fn metrics_from_ranks(ranks: &[usize], cutoffs: &[usize], task_digest: u64) -> MetricsReport {
    let n = ranks.len();
    let mut hits = alloc::vec![0usize; cutoffs.len()];
    let mut gain = alloc::vec![0.0; cutoffs.len()];
    for &rank in ranks {
        for (c, &k) in cutoffs.iter().enumerate() {
            if rank <= k {
                hits[c] += 1;
                gain[c] += ndcg_at_rank(rank);
            }
        }
    }
    let denom = n.max(1) as f64;
    MetricsReport {
        cutoffs: cutoffs.to_vec(),
        hr: hits.iter().map(|&h| h as f64 / denom * 100.0).collect(),
        ndcg: gain.iter().map(|g| g / denom).collect(),
        n_tasks: n,
        task_digest,
    }
}

/// HR@K and NDCG@K at `cutoffs` over all tasks.
pub fn evaluate_at(tasks: &[RecommendationTask], scorer: &mut dyn Scorer, cutoffs: &[usize]) -> Result<MetricsReport> {
    let ranks = tasks
        .iter()
        .map(|task| rank_of_true(task, &scorer.score_task(task)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(metrics_from_ranks(&ranks, cutoffs, task_digest(tasks)))
}

/// [`evaluate_at`] with K in {1, 2, 3, 5, 10}.
pub fn evaluate(tasks: &[RecommendationTask], scorer: &mut dyn Scorer) -> Result<MetricsReport> {
    evaluate_at(tasks, scorer, &CUTOFFS)
}

/// Lagged correlation between a word's normalized message frequency and the
/// normalized sales frequency of items containing it, over the hours spanned
/// by `purchases`.
pub fn word_sales_correlation(
    messages: &[Message],
    purchases: &[Purchase],
    catalog: &Catalog,
    word: &str,
    lags: &[usize],
) -> Result<CorrelationReport> {
    let (Some(first), Some(last)) = (purchases.iter().map(|p| p.time).min(), purchases.iter().map(|p| p.time).max()) else {
        return Err(Error::SeriesTooShort { len: 0, required: 3 });
    };
    let end = last.plus(1);
    let social = FrequencyTable::build_in_range(messages, None, first, end).normalized_series(word);
    let sales = FrequencyTable::from_sales(purchases, catalog, first, end).normalized_series(word);
    lagged_correlation(&social, &sales, lags)
}
