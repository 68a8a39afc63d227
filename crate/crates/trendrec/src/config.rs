//! Run configuration: `[section]` headers and `key = value` lines, `#`
//! comments. Unknown sections and keys are rejected.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use trendrec_core::model::{Fusion, ModelConfig};
use trendrec_core::synth::SynthConfig;
use trendrec_core::train::TrainConfig;
use trendrec_core::trend::EmergenceParams;

use crate::error::{Error, Result};
use crate::pipeline::PrepConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct TrendConfig {
    pub fp: usize,
    pub bp: usize,
    /// One word per line; none by default.
    pub stopwords: Option<PathBuf>,
}

impl TrendConfig {
    pub fn params(&self) -> Result<EmergenceParams> {
        Ok(EmergenceParams::new(self.fp, self.bp)?)
    }
}

impl Default for TrendConfig {
    fn default() -> Self {
        let p = EmergenceParams::default();
        TrendConfig {
            fp: p.foreground(),
            bp: p.background(),
            stopwords: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelateConfig {
    pub word: String,
    pub lags: Vec<usize>,
}

impl Default for CorrelateConfig {
    fn default() -> Self {
        CorrelateConfig {
            word: "sig00".into(),
            lags: (1..=6).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Master seed; stages add fixed offsets.
    pub seed: u64,
    pub synth: SynthConfig,
    pub trend: TrendConfig,
    pub prep: PrepConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub correlate: CorrelateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            synth: SynthConfig::default(),
            trend: TrendConfig::default(),
            prep: PrepConfig::default(),
            // With a linear head the segment average shifts every candidate
            // of a task by the same amount, so runs default to the hidden layer.
            model: ModelConfig {
                deep_head: true,
                ..ModelConfig::default()
            },
            train: TrainConfig::default(),
            correlate: CorrelateConfig::default(),
        }
    }
}

fn parse<T: FromStr>(section: &str, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("[{section}] {key}: cannot parse {value:?}")))
}

fn parse_list(section: &str, key: &str, value: &str) -> Result<Vec<usize>> {
    value.split(',').map(|v| parse(section, key, v.trim())).collect()
}

fn list(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = RunConfig::default();
        config.apply_text(&text)?;
        Ok(config)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got {raw:?}", i + 1)))?;
            self.set(&section, key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Applies `section.key=value`.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (path, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {assignment:?} is not `section.key=value`")))?;
        let (section, key) = path
            .split_once('.')
            .ok_or_else(|| Error::Config(format!("override {assignment:?} is not `section.key=value`")))?;
        self.set(section.trim(), key.trim(), value.trim())
    }

    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let unknown = || Error::UnknownKey {
            section: section.to_string(),
            key: key.to_string(),
        };
        macro_rules! p {
            () => {
                parse(section, key, value)?
            };
        }
        match section {
            "run" => match key {
                "seed" => self.seed = p!(),
                _ => return Err(unknown()),
            },
            "synth" => {
                let s = &mut self.synth;
                match key {
                    "n_users" => s.n_users = p!(),
                    "n_items" => s.n_items = p!(),
                    "n_days" => s.n_days = p!(),
                    "n_signal_words" => s.n_signal_words = p!(),
                    "lag_hours" => s.lag_hours = p!(),
                    "surge_strength" => s.surge_strength = p!(),
                    "background_message_rate" => s.background_message_rate = p!(),
                    "word_dim" => s.word_dim = p!(),
                    "emb_dim" => s.emb_dim = p!(),
                    "latent_dim" => s.latent_dim = p!(),
                    "n_background_words" => s.n_background_words = p!(),
                    "n_filler_words" => s.n_filler_words = p!(),
                    "surges_per_word_per_day" => s.surges_per_word_per_day = p!(),
                    "surge_messages" => s.surge_messages = p!(),
                    "boost_window_hours" => s.boost_window_hours = p!(),
                    "boost_tail" => s.boost_tail = p!(),
                    "boost_decay_hours" => s.boost_decay_hours = p!(),
                    "purchases_per_user" => s.purchases_per_user = p!(),
                    "preference_sharpness" => s.preference_sharpness = p!(),
                    "signal_item_fraction" => s.signal_item_fraction = p!(),
                    "free_item_fraction" => s.free_item_fraction = p!(),
                    "warmup_hours" => s.warmup_hours = p!(),
                    "avail_min_days" => s.avail_min_days = p!(),
                    "avail_max_days" => s.avail_max_days = p!(),
                    "description_weight" => s.description_weight = p!(),
                    "embedding_noise" => s.embedding_noise = p!(),
                    "signal_vector_norm" => s.signal_vector_norm = p!(),
                    "background_vector_norm" => s.background_vector_norm = p!(),
                    "background_mention_rate" => s.background_mention_rate = p!(),
                    _ => return Err(unknown()),
                }
            }
            "trend" => match key {
                "fp" => self.trend.fp = p!(),
                "bp" => self.trend.bp = p!(),
                "stopwords" => self.trend.stopwords = (!value.is_empty()).then(|| PathBuf::from(value)),
                _ => return Err(unknown()),
            },
            "prep" => match key {
                "min_purchases" => self.prep.min_purchases = p!(),
                "test_days" => self.prep.test_days = p!(),
                "n_candidates" => self.prep.n_candidates = p!(),
                _ => return Err(unknown()),
            },
            "model" => {
                let m = &mut self.model;
                match key {
                    "fusion" => {
                        m.fusion = value
                            .parse::<Fusion>()
                            .map_err(|_| Error::Config(format!("[model] fusion: unknown mode {value:?}")))?
                    }
                    "emb_dim" => m.emb_dim = p!(),
                    "gmf_dim" => m.gmf_dim = p!(),
                    "mlp_layers" => m.mlp_layers = parse_list(section, key, value)?,
                    "social_dim" => m.social_dim = p!(),
                    "k" => m.k = p!(),
                    "deep_head" => m.deep_head = p!(),
                    "head_hidden" => m.head_hidden = p!(),
                    _ => return Err(unknown()),
                }
            }
            "train" => {
                let t = &mut self.train;
                match key {
                    "epochs" => t.epochs = p!(),
                    "lr" => t.lr = p!(),
                    "neg_ratio" => t.neg_ratio = p!(),
                    "batch_size" => t.batch_size = p!(),
                    _ => return Err(unknown()),
                }
            }
            "correlate" => match key {
                "word" => self.correlate.word = value.to_string(),
                "lags" => self.correlate.lags = parse_list(section, key, value)?,
                _ => return Err(unknown()),
            },
            _ => return Err(unknown()),
        }
        Ok(())
    }

    /// Checks every section and keeps shared values consistent.
    pub fn validate(&mut self) -> Result<()> {
        self.prep.k = self.model.k;
        self.prep.neg_ratio = self.train.neg_ratio;
        self.synth.validate()?;
        self.trend.params()?;
        self.model.validate()?;
        self.train.validate()?;
        if self.correlate.lags.is_empty() || self.correlate.lags.contains(&0) {
            return Err(Error::Config("[correlate] lags must be positive".into()));
        }
        Ok(())
    }

    /// Every key with its resolved value, in a form [`RunConfig::apply_text`] reads back.
    pub fn to_text(&self) -> String {
        let s = &self.synth;
        let m = &self.model;
        let t = &self.train;
        let mut out = String::new();
        let _ = writeln!(out, "[run]\nseed = {}\n", self.seed);
        let _ = writeln!(
            out,
            "[synth]\nn_users = {}\nn_items = {}\nn_days = {}\nn_signal_words = {}\nlag_hours = {}\n\
             surge_strength = {}\nbackground_message_rate = {}\nword_dim = {}\nemb_dim = {}\n\
             latent_dim = {}\nn_background_words = {}\nn_filler_words = {}\nsurges_per_word_per_day = {}\n\
             surge_messages = {}\nboost_window_hours = {}\nboost_tail = {}\nboost_decay_hours = {}\n\
             purchases_per_user = {}\npreference_sharpness = {}\nsignal_item_fraction = {}\n\
             free_item_fraction = {}\nwarmup_hours = {}\navail_min_days = {}\navail_max_days = {}\n\
             description_weight = {}\nembedding_noise = {}\nsignal_vector_norm = {}\n\
             background_vector_norm = {}\nbackground_mention_rate = {}\n",
            s.n_users,
            s.n_items,
            s.n_days,
            s.n_signal_words,
            s.lag_hours,
            s.surge_strength,
            s.background_message_rate,
            s.word_dim,
            s.emb_dim,
            s.latent_dim,
            s.n_background_words,
            s.n_filler_words,
            s.surges_per_word_per_day,
            s.surge_messages,
            s.boost_window_hours,
            s.boost_tail,
            s.boost_decay_hours,
            s.purchases_per_user,
            s.preference_sharpness,
            s.signal_item_fraction,
            s.free_item_fraction,
            s.warmup_hours,
            s.avail_min_days,
            s.avail_max_days,
            s.description_weight,
            s.embedding_noise,
            s.signal_vector_norm,
            s.background_vector_norm,
            s.background_mention_rate,
        );
        let stop = self.trend.stopwords.as_ref().map_or(String::new(), |p| p.display().to_string());
        let _ = writeln!(out, "[trend]\nfp = {}\nbp = {}\nstopwords = {stop}\n", self.trend.fp, self.trend.bp);
        let _ = writeln!(
            out,
            "[prep]\nmin_purchases = {}\ntest_days = {}\nn_candidates = {}\n",
            self.prep.min_purchases, self.prep.test_days, self.prep.n_candidates
        );
        let _ = writeln!(
            out,
            "[model]\nfusion = {}\nemb_dim = {}\ngmf_dim = {}\nmlp_layers = {}\nsocial_dim = {}\nk = {}\n\
             deep_head = {}\nhead_hidden = {}\n",
            m.fusion,
            m.emb_dim,
            m.gmf_dim,
            list(&m.mlp_layers),
            m.social_dim,
            m.k,
            m.deep_head,
            m.head_hidden
        );
        let _ = writeln!(
            out,
            "[train]\nepochs = {}\nlr = {}\nneg_ratio = {}\nbatch_size = {}\n",
            t.epochs, t.lr, t.neg_ratio, t.batch_size
        );
        let _ = write!(
            out,
            "[correlate]\nword = {}\nlags = {}\n",
            self.correlate.word,
            list(&self.correlate.lags)
        );
        out
    }
}
