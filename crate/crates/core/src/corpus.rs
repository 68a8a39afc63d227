//! Corpus records, embedding tables and the data-preparation filters.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

/// Whole hours since a fixed UTC epoch.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub const fn hours(self) -> u64 {
        self.0
    }

    /// Hour of day, `t mod 24`.
    pub const fn hour_of_day(self) -> u64 {
        self.0 % 24
    }

    pub const fn day(self) -> u64 {
        self.0 / 24
    }

    pub const fn plus(self, hours: u64) -> Self {
        Timestamp(self.0 + hours)
    }

    pub fn checked_minus(self, hours: u64) -> Option<Self> {
        self.0.checked_sub(hours).map(Timestamp)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Message {
    pub id: String,
    pub time: Timestamp,
    pub tokens: Vec<String>,
}

pub type MessageSet = Vec<Message>;

#[derive(Clone, Debug, PartialEq)]
pub struct Item {
    pub id: String,
    pub tokens: Vec<String>,
    pub price: f64,
    pub avail_start: Timestamp,
    /// Exclusive.
    pub avail_end: Timestamp,
}

impl Item {
    pub fn available_at(&self, t: Timestamp) -> bool {
        self.avail_start <= t && t < self.avail_end
    }

    /// True if the availability window intersects `[start, end)`.
    pub fn available_during(&self, start: Timestamp, end: Timestamp) -> bool {
        self.avail_start < end && start < self.avail_end
    }

    pub fn is_free(&self) -> bool {
        self.price == 0.0
    }
}

/// Items ordered by id; an item's index is its rank in id order, so index
/// order doubles as the id tie-break order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Catalog {
    items: Vec<Item>,
    index: BTreeMap<String, usize>,
}

impl Catalog {
    /// Builds a catalog; later duplicates of an id replace earlier ones.
    pub fn new(items: impl IntoIterator<Item = Item>) -> Self {
        let mut by_id: BTreeMap<String, Item> = BTreeMap::new();
        for item in items {
            by_id.insert(item.id.clone(), item);
        }
        let items: Vec<Item> = by_id.into_values().collect();
        let index = items
            .iter()
            .enumerate()
            .map(|(i, item)| (item.id.clone(), i))
            .collect();
        Catalog { items, index }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn get(&self, index: usize) -> &Item {
        &self.items[index]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn by_id(&self, id: &str) -> Option<&Item> {
        self.index_of(id).map(|i| &self.items[i])
    }

    /// Indices of items whose availability intersects `[start, end)`.
    pub fn available_during(&self, start: Timestamp, end: Timestamp) -> Vec<usize> {
        self.items
            .iter()
            .enumerate()
            .filter(|(_, item)| item.available_during(start, end))
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Purchase {
    pub user: String,
    pub item: String,
    pub time: Timestamp,
}

pub type PurchaseLog = Vec<Purchase>;

/// Keeps the purchases of users with at least `min_count` purchases.
pub fn filter_active_users(purchases: &[Purchase], min_count: usize) -> PurchaseLog {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for p in purchases {
        *counts.entry(p.user.as_str()).or_default() += 1;
    }
    purchases
        .iter()
        .filter(|p| counts[p.user.as_str()] >= min_count)
        .cloned()
        .collect()
}

/// Drops zero-price items from the catalog and every purchase of them, as
/// well as purchases whose item is not in the catalog at all.
pub fn remove_free_items(catalog: &Catalog, purchases: &[Purchase]) -> (Catalog, PurchaseLog) {
    let kept = Catalog::new(catalog.items().iter().filter(|i| !i.is_free()).cloned());
    let log = purchases
        .iter()
        .filter(|p| kept.index_of(&p.item).is_some())
        .cloned()
        .collect();
    (kept, log)
}

/// Dense table of equal-length vectors keyed by string, in insertion order.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    keys: Vec<String>,
    data: Vec<f64>,
    index: BTreeMap<String, usize>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            keys: Vec::new(),
            data: Vec::new(),
            index: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Inserts or replaces `key`. Returns `true` if an entry was replaced.
    ///
    /// Panics if `vector.len() != dim`.
    pub fn insert(&mut self, key: &str, vector: &[f64]) -> bool {
        assert_eq!(vector.len(), self.dim, "embedding length mismatch for {key}");
        match self.index.get(key) {
            Some(&row) => {
                self.data[row * self.dim..(row + 1) * self.dim].copy_from_slice(vector);
                true
            }
            None => {
                self.index.insert(key.to_string(), self.keys.len());
                self.keys.push(key.to_string());
                self.data.extend_from_slice(vector);
                false
            }
        }
    }

    pub fn get(&self, key: &str) -> Option<&[f64]> {
        self.index.get(key).map(|&row| self.row(row))
    }

    pub fn contains(&self, key: &str) -> bool {
        self.index.contains_key(key)
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.keys
            .iter()
            .enumerate()
            .map(move |(row, k)| (k.as_str(), self.row(row)))
    }
}

/// Splits raw text into tokens.
pub trait Tokenizer {
    fn tokenize(&self, text: &str) -> Vec<String>;
}

/// Splits on Unicode whitespace; the default for pre-tokenized input.
#[derive(Clone, Copy, Debug, Default)]
pub struct WhitespaceTokenizer;

impl Tokenizer for WhitespaceTokenizer {
    fn tokenize(&self, text: &str) -> Vec<String> {
        text.split_whitespace().map(str::to_string).collect()
    }
}

/// Keeps only tokens from an allowlist (e.g. a noun list produced by an
/// external tagger).
#[derive(Clone, Debug)]
pub struct AllowlistFilter<T> {
    inner: T,
    allowed: BTreeSet<String>,
}

impl<T: Tokenizer> AllowlistFilter<T> {
    pub fn new(inner: T, allowed: impl IntoIterator<Item = String>) -> Self {
        AllowlistFilter {
            inner,
            allowed: allowed.into_iter().collect(),
        }
    }
}

impl<T: Tokenizer> Tokenizer for AllowlistFilter<T> {
    fn tokenize(&self, text: &str) -> Vec<String> {
        self.inner
            .tokenize(text)
            .into_iter()
            .filter(|t| self.allowed.contains(t))
            .collect()
    }
}
