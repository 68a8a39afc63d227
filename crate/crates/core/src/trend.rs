//! Hourly word frequencies, emergence detection and social embeddings.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::{Catalog, EmbeddingTable, Message, Purchase, Timestamp};
use crate::segment::Segment;
use crate::Result;

/// Per-word, per-hour counts of messages containing the word, over a dense
/// hour range `[start, start + n_hours)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyTable {
    start: Timestamp,
    n_hours: usize,
    words: Vec<String>,
    index: BTreeMap<String, usize>,
    /// Word-major, `words.len() * n_hours`.
    counts: Vec<u32>,
    hour_totals: Vec<u64>,
}

impl FrequencyTable {
    /// Counts, for every hour, the messages that contain each word at least
    /// once. Restricted to `vocab` when given. The hour range spans the
    /// earliest to the latest message.
    pub fn build(messages: &[Message], vocab: Option<&BTreeSet<String>>) -> Self {
        let range = messages
            .iter()
            .map(|m| m.time)
            .fold(None, |acc: Option<(Timestamp, Timestamp)>, t| match acc {
                None => Some((t, t)),
                Some((lo, hi)) => Some((lo.min(t), hi.max(t))),
            });
        match range {
            None => Self::build_in_range(messages, vocab, Timestamp(0), Timestamp(0)),
            Some((lo, hi)) => Self::build_in_range(messages, vocab, lo, hi.plus(1)),
        }
    }

    /// As [`FrequencyTable::build`] but over an explicit `[start, end)`;
    /// messages outside the range are ignored.
    pub fn build_in_range(
        messages: &[Message],
        vocab: Option<&BTreeSet<String>>,
        start: Timestamp,
        end: Timestamp,
    ) -> Self {
        let n_hours = end.0.saturating_sub(start.0) as usize;
        let in_range = |m: &&Message| m.time >= start && m.time < end;
        let mut word_set: BTreeSet<&str> = BTreeSet::new();
        for m in messages.iter().filter(in_range) {
            for tok in &m.tokens {
                if vocab.is_none_or(|v| v.contains(tok)) {
                    word_set.insert(tok);
                }
            }
        }
        let words: Vec<String> = word_set.into_iter().map(str::to_string).collect();
        let index: BTreeMap<String, usize> = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        let mut counts = vec![0u32; words.len() * n_hours];
        let mut hour_totals = vec![0u64; n_hours];
        let mut seen: BTreeSet<usize> = BTreeSet::new();
        for m in messages.iter().filter(in_range) {
            let h = (m.time.0 - start.0) as usize;
            seen.clear();
            seen.extend(m.tokens.iter().filter_map(|t| index.get(t).copied()));
            for &w in &seen {
                counts[w * n_hours + h] += 1;
                hour_totals[h] += 1;
            }
        }
        FrequencyTable {
            start,
            n_hours,
            words,
            index,
            counts,
            hour_totals,
        }
    }

    /// Treats each purchase as a message carrying its item's description
    /// tokens, so sales of items containing a word become that word's count.
    pub fn from_sales(purchases: &[Purchase], catalog: &Catalog, start: Timestamp, end: Timestamp) -> Self {
        let pseudo: Vec<Message> = purchases
            .iter()
            .filter_map(|p| {
                catalog.by_id(&p.item).map(|item| Message {
                    id: String::new(),
                    time: p.time,
                    tokens: item.tokens.clone(),
                })
            })
            .collect();
        Self::build_in_range(&pseudo, None, start, end)
    }

    pub fn start(&self) -> Timestamp {
        self.start
    }

    pub fn end(&self) -> Timestamp {
        self.start.plus(self.n_hours as u64)
    }

    pub fn n_hours(&self) -> usize {
        self.n_hours
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    fn offset(&self, hour: Timestamp) -> Option<usize> {
        let h = hour.0.checked_sub(self.start.0)? as usize;
        (h < self.n_hours).then_some(h)
    }

    pub fn count(&self, word: &str, hour: Timestamp) -> u32 {
        match (self.index.get(word), self.offset(hour)) {
            (Some(&w), Some(h)) => self.counts[w * self.n_hours + h],
            _ => 0,
        }
    }

    /// Sum of all word counts in `hour`.
    pub fn hour_total(&self, hour: Timestamp) -> u64 {
        self.offset(hour).map_or(0, |h| self.hour_totals[h])
    }

    /// Hourly counts of `word` over the table's range (all zero if unknown).
    pub fn series(&self, word: &str) -> &[u32] {
        match self.index.get(word) {
            Some(&w) => &self.counts[w * self.n_hours..(w + 1) * self.n_hours],
            None => &[],
        }
    }

    /// Normalized frequency of `word` over every hour of the range.
    pub fn normalized_series(&self, word: &str) -> Vec<f64> {
        (0..self.n_hours)
            .map(|h| normalized_frequency(self, word, self.start.plus(h as u64)))
            .collect()
    }
}

/// `count(word, hour) / Σ_d count(d, hour)`; zero when the hour is empty.
pub fn normalized_frequency(table: &FrequencyTable, word: &str, hour: Timestamp) -> f64 {
    let total = table.hour_total(hour);
    if total == 0 {
        return 0.0;
    }
    table.count(word, hour) as f64 / total as f64
}

/// Foreground and background window lengths in hours.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct EmergenceParams {
    fp: usize,
    bp: usize,
}

impl EmergenceParams {
    pub fn new(fp: usize, bp: usize) -> Result<Self> {
        if fp < 2 || bp < 2 {
            return Err(crate::Error::InvalidConfig(alloc::format!(
                "emergence windows must be at least 2 hours (fp={fp}, bp={bp})"
            )));
        }
        Ok(EmergenceParams { fp, bp })
    }

    pub fn foreground(&self) -> usize {
        self.fp
    }

    pub fn background(&self) -> usize {
        self.bp
    }
}

impl Default for EmergenceParams {
    fn default() -> Self {
        EmergenceParams { fp: 24, bp: 72 }
    }
}

fn at(series: &[u32], idx: isize) -> u64 {
    if idx < 0 {
        0
    } else {
        series.get(idx as usize).copied().unwrap_or(0) as u64
    }
}

/// Emergence flag of a word at hour offset `t` of `series`; hours outside
/// the series count as zero.
///
/// With `F_fp = f[t-fp .. t-1]` and `F_bp = f[t-fp-bp .. t-fp-1]`, a word
/// emerges when its last foreground hour exceeds the foreground mean, or when
/// the last background hour exceeded the background mean and the foreground
/// mean exceeds the background mean. All comparisons are strict and done on
/// exact integer cross-products.
pub fn detect_emergence(series: &[u32], t: usize, params: EmergenceParams) -> bool {
    let t = t as isize;
    let (fp, bp) = (params.fp as isize, params.bp as isize);
    let sum_fp: u64 = (t - fp..t).map(|h| at(series, h)).sum();
    let sum_bp: u64 = (t - fp - bp..t - fp).map(|h| at(series, h)).sum();
    decide(
        at(series, t - 1),
        at(series, t - fp - 1),
        sum_fp,
        sum_bp,
        params,
    )
}

fn decide(last_fp: u64, last_bp: u64, sum_fp: u64, sum_bp: u64, params: EmergenceParams) -> bool {
    let (fp, bp) = (params.fp as u128, params.bp as u128);
    let (last_fp, last_bp) = (last_fp as u128, last_bp as u128);
    let (sum_fp, sum_bp) = (sum_fp as u128, sum_bp as u128);
    let inc_fp = last_fp * fp > sum_fp;
    let inc_bp = last_bp * bp > sum_bp;
    let fp_above_bp = sum_fp * bp > sum_bp * fp;
    inc_fp || (inc_bp && fp_above_bp)
}

/// Emergence flags for every hour offset of `series`, using running window
/// sums. Agrees exactly with [`detect_emergence`] at every offset.
pub fn emergence_series(series: &[u32], params: EmergenceParams) -> Vec<bool> {
    let n = series.len();
    // prefix[i] = sum of series[..i]
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0u64);
    for &c in series {
        prefix.push(prefix.last().unwrap() + c as u64);
    }
    let psum = |lo: isize, hi: isize| -> u64 {
        let clamp = |i: isize| i.clamp(0, n as isize) as usize;
        prefix[clamp(hi)] - prefix[clamp(lo)]
    };
    let (fp, bp) = (params.fp as isize, params.bp as isize);
    (0..n as isize)
        .map(|t| {
            decide(
                at(series, t - 1),
                at(series, t - fp - 1),
                psum(t - fp, t),
                psum(t - fp - bp, t - fp),
                params,
            )
        })
        .collect()
}

/// Words eligible for emergence: those in the table that have a vector and
/// are not stopwords.
pub fn candidate_words(
    table: &FrequencyTable,
    vectors: &EmbeddingTable,
    stopwords: &BTreeSet<String>,
) -> Vec<String> {
    table
        .words()
        .iter()
        .filter(|w| vectors.contains(w) && !stopwords.contains(*w))
        .cloned()
        .collect()
}

/// Emerging words by hour, for every hour of the table's range.
pub fn emerging_words(
    table: &FrequencyTable,
    words: &[String],
    params: EmergenceParams,
) -> BTreeMap<Timestamp, Vec<String>> {
    let mut by_hour: BTreeMap<Timestamp, Vec<String>> = BTreeMap::new();
    for word in words {
        let flags = emergence_series(table.series(word), params);
        for (h, _) in flags.iter().enumerate().filter(|(_, &e)| e) {
            by_hour
                .entry(table.start().plus(h as u64))
                .or_default()
                .push(word.clone());
        }
    }
    by_hour
}

#[derive(Clone, Debug, PartialEq)]
pub struct HourEmbedding {
    pub hour: Timestamp,
    pub vector: Vec<f64>,
    /// Number of emerging words that had a vector.
    pub n_words: usize,
}

/// Mean vector of the emerging words found in `vectors`; words without a
/// vector are skipped and an empty set gives the zero vector.
pub fn hourly_embedding<'a>(
    hour: Timestamp,
    words: impl IntoIterator<Item = &'a str>,
    vectors: &EmbeddingTable,
) -> HourEmbedding {
    let mut sum = vec![0.0; vectors.dim()];
    let mut n_words = 0;
    for word in words {
        if let Some(v) = vectors.get(word) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            n_words += 1;
        }
    }
    if n_words > 0 {
        let inv = 1.0 / n_words as f64;
        sum.iter_mut().for_each(|s| *s *= inv);
    }
    HourEmbedding {
        hour,
        vector: sum,
        n_words,
    }
}

/// Hourly social embeddings; hours without an entry read as zero vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct HourlyEmbeddings {
    dim: usize,
    by_hour: BTreeMap<Timestamp, Vec<f64>>,
    zero: Vec<f64>,
}

impl HourlyEmbeddings {
    pub fn new(dim: usize) -> Self {
        HourlyEmbeddings {
            dim,
            by_hour: BTreeMap::new(),
            zero: vec![0.0; dim],
        }
    }

    /// Hourly embeddings for every hour with at least one emerging word.
    pub fn from_emerging(
        emerging: &BTreeMap<Timestamp, Vec<String>>,
        vectors: &EmbeddingTable,
    ) -> Self {
        let mut out = HourlyEmbeddings::new(vectors.dim());
        for (&hour, words) in emerging {
            let e = hourly_embedding(hour, words.iter().map(String::as_str), vectors);
            if e.n_words > 0 {
                out.insert(hour, e.vector);
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn insert(&mut self, hour: Timestamp, vector: Vec<f64>) {
        assert_eq!(vector.len(), self.dim);
        self.by_hour.insert(hour, vector);
    }

    pub fn get(&self, hour: Timestamp) -> &[f64] {
        self.by_hour.get(&hour).unwrap_or(&self.zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Timestamp, &[f64])> {
        self.by_hour.iter().map(|(t, v)| (*t, v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.by_hour.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_hour.is_empty()
    }
}

/// Social background at a segment anchor.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentContext {
    pub t: Timestamp,
    /// Mean hourly embedding over the segment preceding `t`.
    pub s_avg: Vec<f64>,
    /// `k x dim`, row-major, hours `t-k .. t-1` in chronological order.
    pub keys: Vec<f64>,
    pub k: usize,
}

impl SegmentContext {
    pub fn key(&self, j: usize) -> &[f64] {
        let d = self.s_avg.len();
        &self.keys[j * d..(j + 1) * d]
    }
}

/// Builds the context at anchor `t` from the `k` preceding hours and the
/// previous segment. Hours before the epoch read as zero vectors.
pub fn build_segment_context(
    hourly: &HourlyEmbeddings,
    t: Timestamp,
    k: usize,
) -> Result<SegmentContext> {
    let segment = Segment::anchored_at(t)?;
    let d = hourly.dim();
    let mut keys = Vec::with_capacity(k * d);
    for back in (1..=k as u64).rev() {
        match t.checked_minus(back) {
            Some(h) => keys.extend_from_slice(hourly.get(h)),
            None => keys.extend(core::iter::repeat_n(0.0, d)),
        }
    }
    let mut s_avg = vec![0.0; d];
    if let Some(prev) = segment.previous() {
        for h in prev.hours() {
            for (s, x) in s_avg.iter_mut().zip(hourly.get(h)) {
                *s += x;
            }
        }
        let inv = 1.0 / prev.len as f64;
        s_avg.iter_mut().for_each(|s| *s *= inv);
    }
    Ok(SegmentContext { t, s_avg, keys, k })
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use alloc::format;
    use proptest::prelude::*;

    fn msg(t: u64, tokens: &[&str]) -> Message {
        Message {
            id: format!("m{t}"),
            time: Timestamp(t),
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Straight from the definition, with floating means.
    fn emergence_oracle(series: &[u32], t: usize, fp: usize, bp: usize) -> bool {
        let f = |h: isize| -> f64 {
            if h < 0 || h as usize >= series.len() {
                0.0
            } else {
                series[h as usize] as f64
            }
        };
        let t = t as isize;
        let (fpi, bpi) = (fp as isize, bp as isize);
        let mean_fp = (t - fpi..t).map(f).sum::<f64>() / fp as f64;
        let mean_bp = (t - fpi - bpi..t - fpi).map(f).sum::<f64>() / bp as f64;
        let inc_fp = f(t - 1) > mean_fp;
        let inc_bp = f(t - fpi - 1) > mean_bp;
        inc_fp || (inc_bp && mean_fp > mean_bp)
    }

    #[test]
    fn counts_containment_not_multiplicity() {
        let table = FrequencyTable::build(&[msg(0, &["a", "a", "b"])], None);
        assert_eq!(table.count("a", Timestamp(0)), 1);
        assert_eq!(table.count("b", Timestamp(0)), 1);
        assert_eq!(table.hour_total(Timestamp(0)), 2);
        assert!(FrequencyTable::build(&[], None).is_empty());
    }

    #[test]
    fn counts_match_message_scan() {
        let mut rng = SeededRng::new(42);
        let vocab: Vec<String> = (0..30).map(|i| format!("w{i}")).collect();
        let messages: Vec<Message> = (0..1000)
            .map(|i| {
                let n = 1 + rng.below(6);
                let toks: Vec<String> = (0..n).map(|_| vocab[rng.below(30)].clone()).collect();
                Message {
                    id: format!("{i}"),
                    time: Timestamp(100 + rng.below(48) as u64),
                    tokens: toks,
                }
            })
            .collect();
        let table = FrequencyTable::build(&messages, None);
        for w in &vocab {
            for h in 100..148 {
                let expected = messages
                    .iter()
                    .filter(|m| m.time.0 == h && m.tokens.contains(w))
                    .count() as u32;
                assert_eq!(table.count(w, Timestamp(h)), expected);
            }
        }
        for h in 100..148 {
            let total: u64 = vocab.iter().map(|w| table.count(w, Timestamp(h)) as u64).sum();
            assert_eq!(table.hour_total(Timestamp(h)), total);
        }
    }

    #[test]
    fn vocab_restricts_counts() {
        let vocab: BTreeSet<String> = ["a".to_string()].into_iter().collect();
        let table = FrequencyTable::build(&[msg(0, &["a", "b"])], Some(&vocab));
        assert_eq!(table.count("b", Timestamp(0)), 0);
        assert_eq!(table.hour_total(Timestamp(0)), 1);
    }

    #[test]
    fn normalized_frequency_cases() {
        let mut messages = Vec::new();
        for i in 0..100 {
            messages.push(msg(5, if i < 5 { &["x"] } else { &["y"] }));
        }
        messages.push(msg(7, &["y"]));
        let table = FrequencyTable::build(&messages, None);
        assert_eq!(normalized_frequency(&table, "x", Timestamp(5)), 0.05);
        assert_eq!(normalized_frequency(&table, "x", Timestamp(7)), 0.0);
        assert_eq!(normalized_frequency(&table, "x", Timestamp(6)), 0.0);
    }

    #[test]
    fn all_zero_series_never_emerges() {
        let p = EmergenceParams::new(3, 4).unwrap();
        let series = [0u32; 20];
        assert!((0..20).all(|t| !detect_emergence(&series, t, p)));
    }

    #[test]
    fn last_foreground_spike_emerges() {
        let p = EmergenceParams::new(3, 4).unwrap();
        // F_fp = [1, 1, 5] directly before t = 10; background is large.
        let mut series = [9u32; 10];
        series[7] = 1;
        series[8] = 1;
        series[9] = 5;
        assert!(detect_emergence(&series, 10, p));
    }

    #[test]
    fn window_params_reject_short_windows() {
        assert!(EmergenceParams::new(1, 5).is_err());
        assert!(EmergenceParams::new(5, 1).is_err());
    }

    #[test]
    fn emergence_matches_oracle_on_random_series() {
        let mut rng = SeededRng::new(9);
        for _ in 0..1000 {
            let fp = 2 + rng.below(6);
            let bp = 2 + rng.below(10);
            let len = 1 + rng.below(40);
            let series: Vec<u32> = (0..len).map(|_| rng.below(5) as u32).collect();
            let p = EmergenceParams::new(fp, bp).unwrap();
            let fast = emergence_series(&series, p);
            for t in 0..=len {
                let want = emergence_oracle(&series, t, fp, bp);
                assert_eq!(detect_emergence(&series, t, p), want);
                if t < len {
                    assert_eq!(fast[t], want);
                }
            }
        }
    }

    #[test]
    fn hourly_embedding_cases() {
        let mut vectors = EmbeddingTable::new(2);
        vectors.insert("a", &[1.0, 0.0]);
        vectors.insert("b", &[0.0, 1.0]);
        let e = hourly_embedding(Timestamp(3), ["a", "b"], &vectors);
        assert_eq!(e.vector, vec![0.5, 0.5]);
        assert_eq!(e.n_words, 2);
        let empty = hourly_embedding(Timestamp(3), [], &vectors);
        assert_eq!(empty.vector, vec![0.0, 0.0]);
        assert_eq!(empty.n_words, 0);
        let one = hourly_embedding(Timestamp(3), ["a", "zzz"], &vectors);
        assert_eq!(one.vector, vec![1.0, 0.0]);
        assert_eq!(one.n_words, 1);
    }

    #[test]
    fn segment_context_constant_vectors() {
        let mut hourly = HourlyEmbeddings::new(2);
        for h in 0..200 {
            hourly.insert(Timestamp(h), vec![0.25, -1.5]);
        }
        let ctx = build_segment_context(&hourly, Timestamp(24 * 5 + 10), 24).unwrap();
        assert_eq!(ctx.s_avg, vec![0.25, -1.5]);
        assert!((0..24).all(|j| ctx.key(j) == [0.25, -1.5]));
    }

    #[test]
    fn segment_context_keys_are_chronological() {
        let t = Timestamp(24 * 2 + 16);
        let mut hourly = HourlyEmbeddings::new(2);
        hourly.insert(Timestamp(t.0 - 2), vec![1.0, 0.0]);
        hourly.insert(Timestamp(t.0 - 1), vec![0.0, 1.0]);
        let ctx = build_segment_context(&hourly, t, 2).unwrap();
        assert_eq!(ctx.keys, vec![1.0, 0.0, 0.0, 1.0]);
        assert!(build_segment_context(&hourly, Timestamp(t.0 + 1), 2).is_err());
    }

    #[test]
    fn segment_average_matches_previous_segment_scan() {
        let mut rng = SeededRng::new(17);
        let mut hourly = HourlyEmbeddings::new(3);
        for h in 0..24 * 6 {
            if rng.bernoulli(0.7) {
                hourly.insert(Timestamp(h), (0..3).map(|_| rng.normal()).collect());
            }
        }
        for day in 2..5u64 {
            for (anchor, prev) in [(10u64, (-2i64, 12u64)), (16, (10, 6)), (22, (16, 6))] {
                let t = Timestamp(day * 24 + anchor);
                let ctx = build_segment_context(&hourly, t, 24).unwrap();
                let first = (day * 24) as i64 + prev.0;
                for c in 0..3 {
                    let mean = (0..prev.1)
                        .map(|o| hourly.get(Timestamp((first + o as i64) as u64))[c])
                        .sum::<f64>()
                        / prev.1 as f64;
                    assert!((ctx.s_avg[c] - mean).abs() < 1e-12);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn normalized_frequencies_sum_to_one(
            raw in proptest::collection::vec((0u64..5, proptest::collection::vec(0u8..8, 1..5)), 1..40)
        ) {
            let messages: Vec<Message> = raw
                .iter()
                .map(|(t, toks)| Message {
                    id: String::new(),
                    time: Timestamp(*t),
                    tokens: toks.iter().map(|w| format!("w{w}")).collect(),
                })
                .collect();
            let table = FrequencyTable::build(&messages, None);
            for h in 0..5 {
                let t = Timestamp(h);
                if table.hour_total(t) > 0 {
                    let s: f64 = table.words().iter().map(|w| normalized_frequency(&table, w, t)).sum();
                    prop_assert!((s - 1.0).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn emergence_is_invariant_to_scaling(
            series in proptest::collection::vec(0u32..20, 1..60),
            scale in 1u32..50,
            fp in 2usize..8,
            bp in 2usize..12,
        ) {
            let p = EmergenceParams::new(fp, bp).unwrap();
            let scaled: Vec<u32> = series.iter().map(|c| c * scale).collect();
            prop_assert_eq!(emergence_series(&series, p), emergence_series(&scaled, p));
        }

        #[test]
        fn hourly_embedding_stays_in_bounding_box(
            vecs in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 4), 1..8)
        ) {
            let mut table = EmbeddingTable::new(4);
            let names: Vec<String> = (0..vecs.len()).map(|i| format!("w{i}")).collect();
            for (n, v) in names.iter().zip(&vecs) {
                table.insert(n, v);
            }
            let e = hourly_embedding(Timestamp(0), names.iter().map(String::as_str), &table);
            for c in 0..4 {
                let lo = vecs.iter().map(|v| v[c]).fold(f64::INFINITY, f64::min);
                let hi = vecs.iter().map(|v| v[c]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(e.vector[c] >= lo - 1e-12 && e.vector[c] <= hi + 1e-12);
            }
        }

        #[test]
        fn emergence_is_time_translation_equivariant(
            raw in proptest::collection::vec((0u64..60, 0u8..3), 1..80),
            shift in 0u64..500,
        ) {
            let build = |offset: u64| {
                let messages: Vec<Message> = raw
                    .iter()
                    .map(|(t, w)| Message {
                        id: String::new(),
                        time: Timestamp(t + offset),
                        tokens: alloc::vec![format!("w{w}")],
                    })
                    .collect();
                let table = FrequencyTable::build(&messages, None);
                let words = table.words().to_vec();
                emerging_words(&table, &words, EmergenceParams::new(3, 5).unwrap())
            };
            let base = build(0);
            let shifted = build(shift);
            let moved: BTreeMap<Timestamp, Vec<String>> =
                base.into_iter().map(|(t, w)| (t.plus(shift), w)).collect();
            prop_assert_eq!(moved, shifted);
        }
    }
}
