//! Synthetic corpus with a planted social-to-sales link.
//!
//! Signal words surge in the message stream at random hours. `lag_hours`
//! after a surge, items whose description contains the word become more
//! likely to be bought, with the boost decaying geometrically over
//! `boost_window_hours`. Outside those windows purchases follow a latent
//! user-item affinity. With `surge_strength = 1` purchases ignore surges.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::{Catalog, EmbeddingTable, Item, Message, MessageSet, Purchase, PurchaseLog, Timestamp};
use crate::rng::SeededRng;
use crate::{Error, Result};

/// Relative message volume of a surge over its first hours.
const SURGE_PROFILE: [f64; 3] = [1.0, 0.4, 0.1];

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_items: usize,
    pub n_days: usize,
    pub n_signal_words: usize,
    pub lag_hours: u64,
    /// Purchase-weight multiplier at the peak of a boost.
    pub surge_strength: f64,
    /// Messages per daytime hour.
    pub background_message_rate: f64,
    pub seed: u64,
    pub word_dim: usize,
    pub emb_dim: usize,
    pub latent_dim: usize,
    pub n_background_words: usize,
    pub n_filler_words: usize,
    pub surges_per_word_per_day: f64,
    /// Extra messages carrying the word in a surge's first hour.
    pub surge_messages: f64,
    pub boost_window_hours: u64,
    /// Boost after the first boosted hour, relative to the peak.
    pub boost_tail: f64,
    pub boost_decay_hours: f64,
    pub purchases_per_user: f64,
    /// Scale of the latent affinity in purchase weights.
    pub preference_sharpness: f64,
    pub signal_item_fraction: f64,
    pub free_item_fraction: f64,
    /// No purchases before this hour.
    pub warmup_hours: u64,
    pub avail_min_days: u64,
    pub avail_max_days: u64,
    /// Scale of the description term in item embeddings.
    pub description_weight: f64,
    pub embedding_noise: f64,
    pub signal_vector_norm: f64,
    pub background_vector_norm: f64,
    /// Chance that a background message mentions one vocabulary word.
    pub background_mention_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_users: 300,
            n_items: 3600,
            n_days: 60,
            n_signal_words: 20,
            lag_hours: 3,
            surge_strength: 60.0,
            background_message_rate: 40.0,
            seed: 0,
            word_dim: 50,
            emb_dim: 200,
            latent_dim: 8,
            n_background_words: 80,
            n_filler_words: 400,
            surges_per_word_per_day: 1.5,
            surge_messages: 15.0,
            boost_window_hours: 24,
            boost_tail: 0.3,
            boost_decay_hours: 8.0,
            purchases_per_user: 12.0,
            preference_sharpness: 2.0,
            signal_item_fraction: 0.25,
            free_item_fraction: 0.02,
            warmup_hours: 96,
            avail_min_days: 7,
            avail_max_days: 14,
            description_weight: 1.0,
            embedding_noise: 0.02,
            signal_vector_norm: 3.0,
            background_vector_norm: 0.5,
            background_mention_rate: 0.05,
        }
    }
}

impl SynthConfig {
    pub fn total_hours(&self) -> u64 {
        self.n_days as u64 * 24
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(1..=6).contains(&self.lag_hours) {
            return bad(format!("lag_hours {} outside 1..=6", self.lag_hours));
        }
        let counts = [
            ("n_users", self.n_users),
            ("n_items", self.n_items),
            ("n_days", self.n_days),
            ("n_signal_words", self.n_signal_words),
            ("word_dim", self.word_dim),
            ("emb_dim", self.emb_dim),
            ("latent_dim", self.latent_dim),
            ("n_background_words", self.n_background_words),
            ("n_filler_words", self.n_filler_words),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return bad(format!("{name} must be positive"));
        }
        if self.n_background_words < 4 {
            return bad("n_background_words must be at least 4".into());
        }
        let rates_ok = self.surge_strength >= 1.0 && self.background_message_rate > 0.0 && self.purchases_per_user > 0.0;
        if !rates_ok {
            return bad("surge_strength >= 1 and positive rates required".into());
        }
        if self.avail_min_days == 0 || self.avail_min_days > self.avail_max_days {
            return bad("invalid availability range".into());
        }
        let n_signal_items = libm::round(self.signal_item_fraction * self.n_items as f64) as usize;
        if n_signal_items < self.n_signal_words {
            return bad(format!(
                "{n_signal_items} signal items cannot cover {} signal words",
                self.n_signal_words
            ));
        }
        if self.warmup_hours >= self.total_hours() {
            return bad("warmup covers the whole timeline".into());
        }
        for (name, p) in [
            ("signal_item_fraction", self.signal_item_fraction),
            ("free_item_fraction", self.free_item_fraction),
            ("background_mention_rate", self.background_mention_rate),
            ("boost_tail", self.boost_tail),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be in [0, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroundTruth {
    pub signal_words: Vec<String>,
    pub surges: BTreeMap<String, Vec<Timestamp>>,
    /// Signal words in each item's description.
    pub item_signals: BTreeMap<String, Vec<String>>,
    pub user_prefs: BTreeMap<String, Vec<f64>>,
    pub item_prefs: BTreeMap<String, Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct SynthBundle {
    pub messages: MessageSet,
    pub catalog: Catalog,
    pub purchases: PurchaseLog,
    pub word_vectors: EmbeddingTable,
    pub user_embeddings: EmbeddingTable,
    pub item_embeddings: EmbeddingTable,
    pub truth: GroundTruth,
}

fn signal_word(i: usize) -> String {
    format!("sig{i:02}")
}

fn background_word(i: usize) -> String {
    format!("w{i:03}")
}

fn filler_word(i: usize) -> String {
    format!("f{i:03}")
}

fn gaussian(rng: &mut SeededRng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.normal()).collect()
}

/// `rows x cols` Gaussian matrix, row-major.
fn projection(rng: &mut SeededRng, rows: usize, cols: usize) -> Vec<f64> {
    gaussian(rng, rows * cols, 1.0 / libm::sqrt(cols as f64))
}

fn project(m: &[f64], x: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(m.chunks_exact(x.len())) {
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

fn word_vectors(config: &SynthConfig, rng: &mut SeededRng) -> EmbeddingTable {
    let d = config.word_dim;
    let mut table = EmbeddingTable::new(d);
    for i in 0..config.n_signal_words {
        let norm = config.signal_vector_norm;
        let mut v = gaussian(rng, d, 0.05 * norm);
        if config.n_signal_words <= d {
            v[i] += norm;
        } else {
            let dir = gaussian(rng, d, norm / libm::sqrt(d as f64));
            v.iter_mut().zip(dir).for_each(|(a, b)| *a += b);
        }
        table.insert(&signal_word(i), &v);
    }
    for i in 0..config.n_background_words {
        table.insert(&background_word(i), &gaussian(rng, d, config.background_vector_norm / libm::sqrt(d as f64)));
    }
    table
}

fn surge_schedule(config: &SynthConfig, rng: &mut SeededRng) -> Vec<Vec<u64>> {
    let p = (config.surges_per_word_per_day / 24.0).min(1.0);
    (0..config.n_signal_words)
        .map(|_| (0..config.total_hours()).filter(|_| rng.bernoulli(p)).collect())
        .collect()
}

/// Halved overnight so the three daily segments carry similar volume.
fn purchase_diurnal(hour: u64) -> f64 {
    if (10..22).contains(&(hour % 24)) {
        1.0
    } else {
        0.5
    }
}

fn messages(config: &SynthConfig, surges: &[Vec<u64>], rng: &mut SeededRng) -> MessageSet {
    let hours = config.total_hours();
    let mut surge_volume = vec![vec![0.0; config.n_signal_words]; hours as usize];
    for (w, starts) in surges.iter().enumerate() {
        for &s in starts {
            for (j, &v) in SURGE_PROFILE.iter().enumerate() {
                if let Some(slot) = surge_volume.get_mut(s as usize + j) {
                    slot[w] += v * config.surge_messages;
                }
            }
        }
    }
    let mut out = Vec::new();
    let filler = |rng: &mut SeededRng, tokens: &mut Vec<String>| {
        for _ in 0..2 + rng.below(4) {
            tokens.push(filler_word(rng.below(config.n_filler_words)));
        }
    };
    for h in 0..hours {
        let mut batch: Vec<Vec<String>> = Vec::new();
        for _ in 0..rng.poisson(config.background_message_rate) {
            let mut tokens = Vec::new();
            filler(rng, &mut tokens);
            if rng.bernoulli(config.background_mention_rate) {
                tokens.push(background_word(rng.below(config.n_background_words)));
            }
            if rng.bernoulli(0.02) {
                tokens.push(signal_word(rng.below(config.n_signal_words)));
            }
            batch.push(tokens);
        }
        for (w, &volume) in surge_volume[h as usize].iter().enumerate() {
            if volume > 0.0 {
                for _ in 0..rng.poisson(volume) {
                    let mut tokens = vec![signal_word(w)];
                    filler(rng, &mut tokens);
                    batch.push(tokens);
                }
            }
        }
        rng.shuffle(&mut batch);
        for tokens in batch {
            out.push(Message {
                id: format!("m{:07}", out.len()),
                time: Timestamp(h),
                tokens,
            });
        }
    }
    out
}

struct ItemDraft {
    item: Item,
    latent: Vec<f64>,
    signal: Option<usize>,
}

fn items(config: &SynthConfig, rng: &mut SeededRng) -> Vec<ItemDraft> {
    let lead = config.avail_max_days * 24;
    let span = config.total_hours() + lead;
    let mut ids: Vec<usize> = (0..config.n_items).collect();
    rng.shuffle(&mut ids);
    let n_signal = libm::round(config.signal_item_fraction * config.n_items as f64) as usize;
    let mut signal_slots: Vec<usize> = rng.sample_indices(config.n_items, n_signal.min(config.n_items));
    signal_slots.sort_unstable();
    (0..config.n_items)
        .map(|n| {
            let start = (n as u64 * span / config.n_items as u64 + rng.below(6) as u64).saturating_sub(lead);
            let days = config.avail_min_days + rng.below((config.avail_max_days - config.avail_min_days + 1) as usize) as u64;
            let mut tokens: Vec<String> = rng
                .sample_indices(config.n_background_words, 4)
                .into_iter()
                .map(background_word)
                .collect();
            let signal = signal_slots
                .binary_search(&n)
                .ok()
                .map(|rank| rank % config.n_signal_words);
            if let Some(w) = signal {
                let at = rng.below(tokens.len() + 1);
                tokens.insert(at, signal_word(w));
            }
            let price = if rng.bernoulli(config.free_item_fraction) {
                0.0
            } else {
                libm::round(rng.range_f64(5.0, 100.0) * 100.0) / 100.0
            };
            ItemDraft {
                item: Item {
                    id: format!("i{:05}", ids[n]),
                    tokens,
                    price,
                    avail_start: Timestamp(start),
                    avail_end: Timestamp(start + days * 24),
                },
                latent: gaussian(rng, config.latent_dim, 1.0),
                signal,
            }
        })
        .collect()
}

/// Boost of a signal word at hour `h` in `[0, 1]`, given its surge hours:
/// full strength `lag_hours` after a surge, then a decaying tail.
pub fn boost_profile(config: &SynthConfig, surges: &[u64], h: u64) -> f64 {
    let decay = libm::exp(-1.0 / config.boost_decay_hours);
    let total: f64 = surges
        .iter()
        .filter_map(|&s| {
            let j = h.checked_sub(s + config.lag_hours)?;
            (j < config.boost_window_hours).then(|| match j {
                0 => 1.0,
                _ => config.boost_tail * libm::pow(decay, (j - 1) as f64),
            })
        })
        .sum();
    total.min(1.0)
}

fn purchases(
    config: &SynthConfig,
    drafts: &[ItemDraft],
    user_latent: &[Vec<f64>],
    surges: &[Vec<u64>],
    rng: &mut SeededRng,
) -> PurchaseLog {
    let hours = config.warmup_hours..config.total_hours();
    let weight_sum: f64 = hours.clone().map(purchase_diurnal).sum();
    let total = config.purchases_per_user * config.n_users as f64;
    let activity: Vec<f64> = (0..config.n_users).map(|_| rng.range_f64(0.5, 1.5)).collect();
    let scale = config.preference_sharpness / libm::sqrt(config.latent_dim as f64);
    let mut out = Vec::new();
    for h in hours {
        let n = rng.poisson(total * purchase_diurnal(h) / weight_sum);
        if n == 0 {
            continue;
        }
        let available: Vec<usize> = (0..drafts.len())
            .filter(|&i| drafts[i].item.available_at(Timestamp(h)))
            .collect();
        if available.is_empty() {
            continue;
        }
        let boost: Vec<f64> = surges
            .iter()
            .map(|s| 1.0 + (config.surge_strength - 1.0) * boost_profile(config, s, h))
            .collect();
        for _ in 0..n {
            let u = rng.weighted_index(&activity).expect("positive activity");
            let weights: Vec<f64> = available
                .iter()
                .map(|&i| {
                    let d = &drafts[i];
                    let affinity: f64 = user_latent[u].iter().zip(&d.latent).map(|(a, b)| a * b).sum();
                    libm::exp(scale * affinity) * d.signal.map_or(1.0, |w| boost[w])
                })
                .collect();
            let pick = available[rng.weighted_index(&weights).expect("positive weights")];
            out.push(Purchase {
                user: format!("u{u:04}"),
                item: drafts[pick].item.id.clone(),
                time: Timestamp(h),
            });
        }
    }
    out
}

/// Builds a full bundle; identical configs give identical bundles.
pub fn generate(config: &SynthConfig) -> Result<SynthBundle> {
    config.validate()?;
    let root = SeededRng::new(config.seed);
    let word_vectors = word_vectors(config, &mut root.derive(1));
    let surges = surge_schedule(config, &mut root.derive(2));
    let messages = messages(config, &surges, &mut root.derive(3));
    let drafts = items(config, &mut root.derive(4));

    let mut rng = root.derive(5);
    let user_latent: Vec<Vec<f64>> = (0..config.n_users).map(|_| gaussian(&mut rng, config.latent_dim, 1.0)).collect();
    let purchases = purchases(config, &drafts, &user_latent, &surges, &mut root.derive(6));

    let mut rng = root.derive(7);
    let user_map = projection(&mut rng, config.emb_dim, config.latent_dim);
    let item_map = projection(&mut rng, config.emb_dim, config.latent_dim);
    let word_map = projection(&mut rng, config.emb_dim, config.word_dim);
    let mut user_embeddings = EmbeddingTable::new(config.emb_dim);
    for (u, latent) in user_latent.iter().enumerate() {
        let mut v = gaussian(&mut rng, config.emb_dim, config.embedding_noise);
        project(&user_map, latent, &mut v);
        user_embeddings.insert(&format!("u{u:04}"), &v);
    }
    let mut item_embeddings = EmbeddingTable::new(config.emb_dim);
    for d in &drafts {
        let mut v = gaussian(&mut rng, config.emb_dim, config.embedding_noise);
        project(&item_map, &d.latent, &mut v);
        let mut description = vec![0.0; config.word_dim];
        for token in &d.item.tokens {
            if let Some(w) = word_vectors.get(token) {
                description.iter_mut().zip(w).for_each(|(a, b)| *a += config.description_weight * b);
            }
        }
        project(&word_map, &description, &mut v);
        item_embeddings.insert(&d.item.id, &v);
    }

    let signal_words: Vec<String> = (0..config.n_signal_words).map(signal_word).collect();
    let truth = GroundTruth {
        surges: signal_words
            .iter()
            .zip(&surges)
            .map(|(w, s)| (w.clone(), s.iter().map(|&h| Timestamp(h)).collect()))
            .collect(),
        item_signals: drafts
            .iter()
            .map(|d| (d.item.id.clone(), d.signal.map(signal_word).into_iter().collect()))
            .collect(),
        item_prefs: drafts.iter().map(|d| (d.item.id.clone(), d.latent.clone())).collect(),
        user_prefs: user_latent
            .iter()
            .enumerate()
            .map(|(u, v)| (format!("u{u:04}"), v.clone()))
            .collect(),
        signal_words,
    };
    Ok(SynthBundle {
        messages,
        catalog: Catalog::new(drafts.into_iter().map(|d| d.item)),
        purchases,
        word_vectors,
        user_embeddings,
        item_embeddings,
        truth,
    })
}
