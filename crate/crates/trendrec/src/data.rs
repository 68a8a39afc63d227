//! Corpus bundle directories.

use std::path::{Path, PathBuf};

use trendrec_core::synth::SynthBundle;

use crate::error::Result;
use crate::formats::{self, LoadedEmbeddings};
use crate::pipeline::Corpus;

pub const MESSAGES: &str = "messages.tsv";
pub const PURCHASES: &str = "purchases.tsv";
pub const CATALOG: &str = "catalog.tsv";
pub const WORD_VECTORS: &str = "word_vectors.txt";
pub const USER_EMBEDDINGS: &str = "user_embeddings.txt";
pub const ITEM_EMBEDDINGS: &str = "item_embeddings.txt";
pub const GROUND_TRUTH: &str = "ground_truth.tsv";

/// Warnings raised while loading a bundle; empty for well-formed input.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoadReport {
    pub warnings: Vec<String>,
}

fn embeddings(path: &Path, report: &mut LoadReport) -> Result<LoadedEmbeddings> {
    let loaded = formats::load_embeddings(path)?;
    if loaded.duplicates > 0 {
        report
            .warnings
            .push(format!("{}: {} duplicate keys, last occurrence kept", path.display(), loaded.duplicates));
    }
    Ok(loaded)
}

pub fn load_corpus(dir: &Path) -> Result<(Corpus, LoadReport)> {
    let p = |name: &str| -> PathBuf { dir.join(name) };
    let mut report = LoadReport::default();
    let catalog = formats::load_catalog(&p(CATALOG))?;
    let purchases = formats::load_purchases(&p(PURCHASES), Some(&catalog))?;
    let corpus = Corpus {
        messages: formats::load_messages(&p(MESSAGES))?,
        purchases,
        catalog,
        word_vectors: embeddings(&p(WORD_VECTORS), &mut report)?.table,
        user_embeddings: embeddings(&p(USER_EMBEDDINGS), &mut report)?.table,
        item_embeddings: embeddings(&p(ITEM_EMBEDDINGS), &mut report)?.table,
    };
    for w in &report.warnings {
        log::warn!("{w}");
    }
    Ok((corpus, report))
}

pub fn save_bundle(dir: &Path, bundle: &SynthBundle) -> Result<()> {
    let p = |name: &str| dir.join(name);
    formats::write_messages(&p(MESSAGES), &bundle.messages)?;
    formats::write_purchases(&p(PURCHASES), &bundle.purchases)?;
    formats::write_catalog(&p(CATALOG), &bundle.catalog)?;
    formats::write_embeddings(&p(WORD_VECTORS), &bundle.word_vectors)?;
    formats::write_embeddings(&p(USER_EMBEDDINGS), &bundle.user_embeddings)?;
    formats::write_embeddings(&p(ITEM_EMBEDDINGS), &bundle.item_embeddings)?;
    formats::write_text(&p(GROUND_TRUTH), &formats::ground_truth_tsv(&bundle.truth))
}

impl From<SynthBundle> for Corpus {
    fn from(b: SynthBundle) -> Self {
        Corpus {
            messages: b.messages,
            catalog: b.catalog,
            purchases: b.purchases,
            word_vectors: b.word_vectors,
            user_embeddings: b.user_embeddings,
            item_embeddings: b.item_embeddings,
        }
    }
}
