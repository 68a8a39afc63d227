//! Time-aware training instances, negative sampling and the training loop.
//!
//! A positive instance `(u, t, i)` says user `u` bought item `i` inside the
//! segment anchored at `t`. Negatives pair the same `(u, t)` with items that
//! were on sale in that window and that `u` did not buy there. The loop
//! minimizes mean binary cross-entropy with Adam over shuffled mini-batches.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::autodiff::{adam_step, AdamState, Tape};
use crate::corpus::{Catalog, EmbeddingTable, Purchase, Timestamp};
use crate::model::{forward, ModelConfig, ModelParams, ParamVars, PredictionInput, Social};
use crate::rng::SeededRng;
use crate::segment::{AvailabilityIndex, Segment};
use crate::trend::SegmentContext;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Instance {
    pub user: String,
    pub anchor: Timestamp,
    pub item: String,
    pub label: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub neg_ratio: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            lr: 0.001,
            neg_ratio: 4,
            batch_size: 256,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig(format!("invalid training config {self:?}")));
        }
        Ok(())
    }
}

/// One positive per distinct `(user, anchor, item)`, sorted.
pub fn build_positive_instances(purchases: &[Purchase]) -> Vec<Instance> {
    let set: BTreeSet<Instance> = purchases
        .iter()
        .filter_map(|p| {
            Segment::containing(p.time).map(|s| Instance {
                user: p.user.clone(),
                anchor: s.anchor,
                item: p.item.clone(),
                label: true,
            })
        })
        .collect();
    set.into_iter().collect()
}

/// Each positive followed by `ratio` negatives for the same `(user, anchor)`,
/// drawn uniformly without replacement from items available in the window
/// and not bought by the user there.
pub fn sample_negatives(
    positives: &[Instance],
    catalog: &Catalog,
    availability: &AvailabilityIndex,
    ratio: usize,
    seed: u64,
) -> Result<Vec<Instance>> {
    let mut bought: BTreeMap<(&str, Timestamp), BTreeSet<&str>> = BTreeMap::new();
    for p in positives {
        bought.entry((&p.user, p.anchor)).or_default().insert(&p.item);
    }
    let mut rng = SeededRng::new(seed);
    let mut out = Vec::with_capacity(positives.len() * (ratio + 1));
    let mut pool: BTreeMap<(&str, Timestamp), Vec<usize>> = BTreeMap::new();
    for p in positives {
        out.push(p.clone());
        if ratio == 0 {
            continue;
        }
        let key = (p.user.as_str(), p.anchor);
        let candidates = pool.entry(key).or_insert_with(|| {
            let own = &bought[&key];
            availability
                .available(p.anchor)
                .iter()
                .copied()
                .filter(|&i| !own.contains(catalog.get(i).id.as_str()))
                .collect()
        });
        if candidates.len() < ratio {
            return Err(Error::InsufficientItems {
                anchor: p.anchor.0,
                available: candidates.len(),
                required: ratio,
            });
        }
        for j in rng.sample_indices(candidates.len(), ratio) {
            out.push(Instance {
                user: p.user.clone(),
                anchor: p.anchor,
                item: catalog.get(candidates[j]).id.clone(),
                label: false,
            });
        }
    }
    Ok(out)
}

/// Embedding lookups and social context for training or scoring.
#[derive(Copy, Clone, Debug)]
pub struct Features<'a> {
    pub users: &'a EmbeddingTable,
    pub items: &'a EmbeddingTable,
    pub contexts: &'a BTreeMap<Timestamp, SegmentContext>,
}

impl<'a> Features<'a> {
    pub fn user(&self, id: &str) -> Result<&'a [f64]> {
        self.users.get(id).ok_or_else(|| Error::MissingEmbedding {
            kind: "user",
            key: id.into(),
        })
    }

    pub fn item(&self, id: &str) -> Result<&'a [f64]> {
        self.items.get(id).ok_or_else(|| Error::MissingEmbedding {
            kind: "item",
            key: id.into(),
        })
    }

    /// Social input at `anchor` in the form `config.fusion` expects.
    pub fn social(&self, anchor: Timestamp, config: &ModelConfig) -> Result<Social<'a>> {
        use crate::model::Fusion;
        if config.fusion == Fusion::None {
            return Ok(Social::None);
        }
        let ctx = self
            .contexts
            .get(&anchor)
            .ok_or(Error::MissingContext { anchor: anchor.0 })?;
        Ok(match config.fusion {
            Fusion::Average => Social::Average(&ctx.s_avg),
            _ => Social::Keys(&ctx.keys),
        })
    }

    pub fn input(&self, user: &str, item: &str, anchor: Timestamp, config: &ModelConfig) -> Result<PredictionInput<'a>> {
        Ok(PredictionInput {
            user: self.user(user)?,
            item: self.item(item)?,
            social: self.social(anchor, config)?,
        })
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ModelParams,
    /// Mean per-instance loss of each epoch.
    pub loss_curve: Vec<f64>,
}

/// Mean loss of `params` over `instances` without updating anything.
pub fn mean_loss(
    params: &ModelParams,
    instances: &[Instance],
    features: &Features<'_>,
    config: &ModelConfig,
) -> Result<f64> {
    let mut total = 0.0;
    for inst in instances {
        let input = features.input(&inst.user, &inst.item, inst.anchor, config)?;
        let y = crate::model::predict(&input, params, config)?;
        let p = y.clamp(crate::autodiff::BCE_CLAMP, 1.0 - crate::autodiff::BCE_CLAMP);
        total -= if inst.label { libm::log(p) } else { libm::log(1.0 - p) };
    }
    Ok(total / instances.len().max(1) as f64)
}

/// Adam over shuffled mini-batches. Shuffling is reseeded each epoch from
/// `train.seed`, so identical inputs give bitwise-identical results.
pub fn train(
    mut params: ModelParams,
    instances: &[Instance],
    features: &Features<'_>,
    config: &ModelConfig,
    train: &TrainConfig,
) -> Result<TrainOutcome> {
    train.validate()?;
    config.validate()?;
    let resolved: Vec<(PredictionInput<'_>, f64)> = instances
        .iter()
        .map(|inst| {
            let input = features.input(&inst.user, &inst.item, inst.anchor, config)?;
            Ok((input, if inst.label { 1.0 } else { 0.0 }))
        })
        .collect::<Result<_>>()?;
    let names = params.tensor_names();
    let mut states: Vec<AdamState> = params.tensors().iter().map(|t| AdamState::new(t.len())).collect();
    let master = SeededRng::new(train.seed);
    let mut order: Vec<usize> = (0..resolved.len()).collect();
    let mut loss_curve = Vec::with_capacity(train.epochs);

    for epoch in 0..train.epochs {
        let mut rng = master.derive(epoch as u64);
        order.sort_unstable();
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(train.batch_size) {
            let (batch_loss, grads) = {
                let mut tape = Tape::new();
                let vars = ParamVars::register(&mut tape, &params);
                let mut losses = Vec::with_capacity(batch.len());
                for &i in batch {
                    let (input, label) = &resolved[i];
                    let y = forward(&mut tape, &vars, input, config)?;
                    losses.push(tape.bce_loss(y, *label)?);
                }
                let all = tape.concat(&losses)?;
                let loss = tape.mean(all);
                let grads = tape.backward(loss)?;
                let per_tensor: Vec<Vec<f64>> = vars
                    .vars()
                    .iter()
                    .zip(params.tensors())
                    .map(|(&v, t)| grads.get_or_zeros(v, t.len()))
                    .collect();
                (tape.scalar(loss), per_tensor)
            };
            epoch_loss += batch_loss * batch.len() as f64;
            if let Some(bad) = grads.iter().position(|g| g.iter().any(|x| !x.is_finite())) {
                return Err(Error::NonFiniteGradient { param: names[bad].clone() });
            }
            for ((tensor, grad), state) in params.tensors_mut().into_iter().zip(&grads).zip(&mut states) {
                adam_step(tensor.data_mut(), grad, state, train.lr)?;
            }
        }
        loss_curve.push(epoch_loss / resolved.len().max(1) as f64);
    }
    Ok(TrainOutcome { params, loss_curve })
}
