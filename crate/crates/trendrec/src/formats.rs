//! Line-oriented text formats for corpora, embeddings and reports.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! `f64` written here reads back bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use trendrec_core::corpus::{Catalog, EmbeddingTable, Item, Message, Purchase, Timestamp, Tokenizer, WhitespaceTokenizer};
use trendrec_core::eval::{CorrelationReport, MetricsReport};
use trendrec_core::synth::GroundTruth;
use trendrec_core::trend::{FrequencyTable, HourlyEmbeddings};

use crate::error::{Error, Result};

/// Non-blank `(line number, text)` pairs of a file.
fn lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if !line.trim().is_empty() {
            out.push((i + 1, line.to_string()));
        }
    }
    Ok(out)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// Splits into at most `max` tab-separated fields, requiring at least `min`.
fn fields<'a>(path: &Path, line: usize, text: &'a str, min: usize, max: usize) -> Result<Vec<&'a str>> {
    let parts: Vec<&str> = text.splitn(max, '\t').collect();
    if parts.len() < min {
        return Err(Error::parse(path, line, format!("expected {max} tab-separated fields, found {}", parts.len())));
    }
    Ok(parts)
}

fn parse_hour(path: &Path, line: usize, s: &str, what: &str) -> Result<Timestamp> {
    s.trim()
        .parse::<u64>()
        .map(Timestamp)
        .map_err(|_| Error::parse(path, line, format!("{what} {s:?} is not a whole number of hours")))
}

fn parse_f64(path: &Path, line: usize, s: &str, what: &str) -> Result<f64> {
    match s.trim().parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(Error::parse(path, line, format!("{what} {s:?} is not a finite number"))),
    }
}

fn join_tokens(tokens: &[String]) -> String {
    tokens.join(" ")
}

pub fn load_messages(path: &Path) -> Result<Vec<Message>> {
    load_messages_with(path, &WhitespaceTokenizer)
}

/// `id <TAB> hour <TAB> text`, with the text split by `tokenizer`. A missing
/// text field means no tokens.
pub fn load_messages_with(path: &Path, tokenizer: &dyn Tokenizer) -> Result<Vec<Message>> {
    lines(path)?
        .into_iter()
        .map(|(n, text)| {
            let parts = fields(path, n, &text, 2, 3)?;
            Ok(Message {
                id: parts[0].to_string(),
                time: parse_hour(path, n, parts[1], "time")?,
                tokens: parts.get(2).map_or_else(Vec::new, |t| tokenizer.tokenize(t)),
            })
        })
        .collect()
}

pub fn write_messages(path: &Path, messages: &[Message]) -> Result<()> {
    let mut s = String::new();
    for m in messages {
        let _ = writeln!(s, "{}\t{}\t{}", m.id, m.time.0, join_tokens(&m.tokens));
    }
    write_text(path, &s)
}

/// `user <TAB> item <TAB> hour`. With a catalog, every purchase must name a
/// catalog item and fall inside its availability window.
pub fn load_purchases(path: &Path, catalog: Option<&Catalog>) -> Result<Vec<Purchase>> {
    lines(path)?
        .into_iter()
        .map(|(n, text)| {
            let parts: Vec<&str> = text.split('\t').collect();
            if parts.len() != 3 {
                return Err(Error::parse(path, n, format!("expected 3 tab-separated fields, found {}", parts.len())));
            }
            let p = Purchase {
                user: parts[0].to_string(),
                item: parts[1].to_string(),
                time: parse_hour(path, n, parts[2], "time")?,
            };
            if let Some(catalog) = catalog {
                let item = catalog
                    .by_id(&p.item)
                    .ok_or_else(|| Error::parse(path, n, format!("item {:?} is not in the catalog", p.item)))?;
                if !item.available_at(p.time) {
                    return Err(Error::parse(
                        path,
                        n,
                        format!("item {:?} is not available at hour {}", p.item, p.time.0),
                    ));
                }
            }
            Ok(p)
        })
        .collect()
}

pub fn write_purchases(path: &Path, purchases: &[Purchase]) -> Result<()> {
    let mut s = String::new();
    for p in purchases {
        let _ = writeln!(s, "{}\t{}\t{}", p.user, p.item, p.time.0);
    }
    write_text(path, &s)
}

/// `item <TAB> price <TAB> avail_start <TAB> avail_end <TAB> tokens`.
pub fn load_catalog(path: &Path) -> Result<Catalog> {
    let items = lines(path)?
        .into_iter()
        .map(|(n, text)| {
            let parts = fields(path, n, &text, 4, 5)?;
            let price = parse_f64(path, n, parts[1], "price")?;
            if price < 0.0 {
                return Err(Error::parse(path, n, format!("negative price {price}")));
            }
            let avail_start = parse_hour(path, n, parts[2], "avail_start")?;
            let avail_end = parse_hour(path, n, parts[3], "avail_end")?;
            if avail_end < avail_start {
                return Err(Error::parse(path, n, "availability ends before it starts"));
            }
            Ok(Item {
                id: parts[0].to_string(),
                price,
                avail_start,
                avail_end,
                tokens: parts.get(4).map_or_else(Vec::new, |t| WhitespaceTokenizer.tokenize(t)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Catalog::new(items))
}

pub fn write_catalog(path: &Path, catalog: &Catalog) -> Result<()> {
    let mut s = String::new();
    for i in catalog.items() {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}",
            i.id,
            i.price,
            i.avail_start.0,
            i.avail_end.0,
            join_tokens(&i.tokens)
        );
    }
    write_text(path, &s)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoadedEmbeddings {
    pub table: EmbeddingTable,
    /// Rows whose key repeated an earlier row; the last one wins.
    pub duplicates: usize,
}

fn parse_embeddings(path: &Path, allow_empty: bool) -> Result<LoadedEmbeddings> {
    let all = lines(path)?;
    let Some(((hn, header), rows)) = all.split_first() else {
        return Err(Error::parse(path, 1, "missing `<count> <dim>` header"));
    };
    let head: Vec<&str> = header.split_whitespace().collect();
    let (count, dim) = match head.as_slice() {
        [c, d] => match (c.parse::<usize>(), d.parse::<usize>()) {
            (Ok(c), Ok(d)) if d > 0 => (c, d),
            _ => return Err(Error::parse(path, *hn, format!("bad header {header:?}"))),
        },
        _ => return Err(Error::parse(path, *hn, format!("bad header {header:?}, expected `<count> <dim>`"))),
    };
    if rows.len() != count {
        return Err(Error::parse(
            path,
            *hn,
            format!("header declares {count} rows, file has {}", rows.len()),
        ));
    }
    if count == 0 && !allow_empty {
        return Err(Error::parse(path, *hn, "embedding table is empty"));
    }
    let mut table = EmbeddingTable::new(dim);
    let mut duplicates = 0;
    let mut vector = Vec::with_capacity(dim);
    for (n, text) in rows {
        let mut parts = text.split_whitespace();
        let key = parts.next().expect("non-blank line");
        vector.clear();
        for p in parts {
            vector.push(parse_f64(path, *n, p, "component")?);
        }
        if vector.len() != dim {
            return Err(Error::parse(
                path,
                *n,
                format!("row {key:?} has {} values, header dim is {dim}", vector.len()),
            ));
        }
        duplicates += table.insert(key, &vector) as usize;
    }
    Ok(LoadedEmbeddings { table, duplicates })
}

/// `<count> <dim>` header, then `key v1 .. v_dim` rows.
pub fn load_embeddings(path: &Path) -> Result<LoadedEmbeddings> {
    parse_embeddings(path, false)
}

fn write_vectors<'a>(path: &Path, dim: usize, rows: impl ExactSizeIterator<Item = (String, &'a [f64])>) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "{} {}", rows.len(), dim);
    for (key, v) in rows {
        s.push_str(&key);
        for x in v {
            let _ = write!(s, " {x}");
        }
        s.push('\n');
    }
    write_text(path, &s)
}

pub fn write_embeddings(path: &Path, table: &EmbeddingTable) -> Result<()> {
    let rows: Vec<(String, &[f64])> = table.iter().map(|(k, v)| (k.to_string(), v)).collect();
    write_vectors(path, table.dim(), rows.into_iter())
}

/// Hourly social embeddings in the embeddings format, keyed by hour. Unlike
/// word tables these may be empty when nothing ever emerged.
pub fn load_hourly(path: &Path) -> Result<HourlyEmbeddings> {
    let loaded = parse_embeddings(path, true)?;
    let mut out = HourlyEmbeddings::new(loaded.table.dim());
    for (key, v) in loaded.table.iter() {
        let hour = key
            .parse::<u64>()
            .map_err(|_| Error::parse(path, 0, format!("hour key {key:?} is not a whole number")))?;
        out.insert(Timestamp(hour), v.to_vec());
    }
    Ok(out)
}

pub fn write_hourly(path: &Path, hourly: &HourlyEmbeddings) -> Result<()> {
    let rows: Vec<(String, &[f64])> = hourly.iter().map(|(t, v)| (t.0.to_string(), v)).collect();
    write_vectors(path, hourly.dim(), rows.into_iter())
}

/// `word <TAB> hour <TAB> 0|1` for every word and hour of the table.
pub fn write_emergence(path: &Path, start: Timestamp, flags: &[(String, Vec<bool>)]) -> Result<()> {
    let mut s = String::new();
    for (word, series) in flags {
        for (h, &e) in series.iter().enumerate() {
            let _ = writeln!(s, "{word}\t{}\t{}", start.0 + h as u64, e as u8);
        }
    }
    write_text(path, &s)
}

pub fn write_loss(path: &Path, curve: &[f64]) -> Result<()> {
    let mut s = String::from("epoch,mean_loss\n");
    for (e, l) in curve.iter().enumerate() {
        let _ = writeln!(s, "{},{l}", e + 1);
    }
    write_text(path, &s)
}

pub fn read_loss(path: &Path) -> Result<Vec<f64>> {
    lines(path)?
        .into_iter()
        .skip(1)
        .map(|(n, t)| {
            let (_, loss) = t.split_once(',').ok_or_else(|| Error::parse(path, n, "expected `epoch,mean_loss`"))?;
            parse_f64(path, n, loss, "loss")
        })
        .collect()
}

/// `model,K,HR,NDCG`, one row per model and cutoff.
pub fn metrics_csv(reports: &[(String, MetricsReport)]) -> String {
    let mut s = String::from("model,K,HR,NDCG\n");
    for (name, r) in reports {
        for (i, k) in r.cutoffs.iter().enumerate() {
            let _ = writeln!(s, "{name},{k},{},{}", r.hr[i], r.ndcg[i]);
        }
    }
    s
}

/// Parses [`metrics_csv`] output into `(model, K, HR, NDCG)` rows.
pub fn read_metrics(path: &Path) -> Result<Vec<(String, usize, f64, f64)>> {
    lines(path)?
        .into_iter()
        .skip(1)
        .map(|(n, t)| {
            let parts: Vec<&str> = t.split(',').collect();
            if parts.len() != 4 {
                return Err(Error::parse(path, n, "expected `model,K,HR,NDCG`"));
            }
            let k = parts[1].parse().map_err(|_| Error::parse(path, n, "bad K"))?;
            Ok((parts[0].to_string(), k, parse_f64(path, n, parts[2], "HR")?, parse_f64(path, n, parts[3], "NDCG")?))
        })
        .collect()
}

/// `lag,r,p,significant`; undefined values are left empty.
pub fn correlation_csv(report: &CorrelationReport) -> String {
    let mut s = String::from("lag,r,p,significant\n");
    let opt = |x: Option<f64>| x.map_or_else(String::new, |v| v.to_string());
    for row in &report.rows {
        let _ = writeln!(s, "{},{},{},{}", row.lag, opt(row.r), opt(row.p), row.significant);
    }
    s
}

/// Per-day normalized frequency of `word` in messages and in sales.
pub fn daily_plot_csv(word: &str, social: &FrequencyTable, sales: &FrequencyTable) -> String {
    let daily = |t: &FrequencyTable| {
        let mut days: std::collections::BTreeMap<u64, (u64, u64)> = Default::default();
        let series = t.series(word);
        for h in 0..t.n_hours() {
            let hour = t.start().plus(h as u64);
            let e = days.entry(hour.day()).or_default();
            e.0 += series.get(h).copied().unwrap_or(0) as u64;
            e.1 += t.hour_total(hour);
        }
        days
    };
    let (a, b) = (daily(social), daily(sales));
    let mut all: Vec<u64> = a.keys().chain(b.keys()).copied().collect();
    all.sort_unstable();
    all.dedup();
    let ratio = |m: &std::collections::BTreeMap<u64, (u64, u64)>, d: u64| match m.get(&d) {
        Some(&(c, tot)) if tot > 0 => c as f64 / tot as f64,
        _ => 0.0,
    };
    let mut s = String::from("day,social,sales\n");
    for d in all {
        let _ = writeln!(s, "{d},{},{}", ratio(&a, d), ratio(&b, d));
    }
    s
}

/// `surge`, `item` and `user` records of the planted structure.
pub fn ground_truth_tsv(truth: &GroundTruth) -> String {
    let mut s = String::new();
    for (word, hours) in &truth.surges {
        let hs: Vec<String> = hours.iter().map(|t| t.0.to_string()).collect();
        let _ = writeln!(s, "surge\t{word}\t{}", hs.join(" "));
    }
    for (item, words) in &truth.item_signals {
        if !words.is_empty() {
            let _ = writeln!(s, "item\t{item}\t{}", words.join(" "));
        }
    }
    for (user, pref) in &truth.user_prefs {
        let v: Vec<String> = pref.iter().map(f64::to_string).collect();
        let _ = writeln!(s, "user\t{user}\t{}", v.join(" "));
    }
    s
}
