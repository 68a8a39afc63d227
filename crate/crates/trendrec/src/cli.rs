//! Command-line front end.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use trendrec_core::eval::{word_sales_correlation, MetricsReport};
use trendrec_core::model::{Fusion, ModelConfig};
use trendrec_core::synth::generate;
use trendrec_core::trend::{FrequencyTable, HourlyEmbeddings};

use crate::checkpoint;
use crate::config::RunConfig;
use crate::data::{self, load_corpus, save_bundle};
use crate::error::{Error, Result};
use crate::formats;
use crate::pipeline::{
    compare, evaluate_model, evaluate_prevpop, evaluate_random, prepare, run_trend, seed_offset, train_model, Corpus,
    Prepared, TrainedModel,
};

pub const VERSION: &str = env!("TRENDREC_VERSION");
pub const CONFIG_ECHO: &str = "config.resolved";
pub const VERSION_FILE: &str = "VERSION";

#[derive(Debug, Parser)]
#[command(name = "trendrec", version = VERSION, about = "Social-trend fused cold-start recommendation")]
pub struct Cli {
    /// Run configuration file (`[section]` / `key = value`).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one config value, e.g. `--set train.epochs=5`. Repeatable.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus bundle.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
    /// Detect emerging words and write hourly social embeddings.
    Trend {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model.
    Train(TrainArgs),
    /// Evaluate checkpoints and the baselines.
    Eval {
        #[arg(long)]
        data: PathBuf,
        /// Hourly embeddings from `trend`; recomputed when absent.
        #[arg(long)]
        hourly: Option<PathBuf>,
        #[arg(long = "checkpoint", required = true)]
        checkpoints: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Lagged correlation between a word's messages and its items' sales.
    Correlate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        word: Option<String>,
        /// Comma-separated lags in hours.
        #[arg(long, value_delimiter = ',')]
        lags: Option<Vec<usize>>,
        /// Also write a per-day frequency table.
        #[arg(long)]
        daily_plot: bool,
    },
    /// All stages on one seed, comparing every fusion mode and the baselines.
    Pipeline {
        /// Existing bundle; a synthetic one is generated when absent.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub hourly: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub fusion: Option<Fusion>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long = "neg-ratio")]
    pub neg_ratio: Option<usize>,
    #[arg(long = "batch")]
    pub batch: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
}

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::UnknownKey { .. } | Error::Config(_) => 2,
        _ => 1,
    }
}

pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for o in &cli.overrides {
        config.apply_override(o)?;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    match &cli.command {
        Command::Train(a) => {
            if let Some(f) = a.fusion {
                config.model.fusion = f;
            }
            if let Some(v) = a.epochs {
                config.train.epochs = v;
            }
            if let Some(v) = a.lr {
                config.train.lr = v;
            }
            if let Some(v) = a.neg_ratio {
                config.train.neg_ratio = v;
            }
            if let Some(v) = a.batch {
                config.train.batch_size = v;
            }
            if let Some(v) = a.k {
                config.model.k = v;
            }
        }
        Command::Correlate { word, lags, .. } => {
            if let Some(w) = word {
                config.correlate.word = w.clone();
            }
            if let Some(l) = lags {
                config.correlate.lags = l.clone();
            }
        }
        Command::Pipeline { epochs: Some(e), .. } => config.train.epochs = *e,
        _ => {}
    }
    config.validate()?;
    Ok(config)
}

/// Writes the resolved config and the build version next to the artifacts.
fn echo(out: &Path, config: &RunConfig) -> Result<()> {
    formats::write_text(&out.join(CONFIG_ECHO), &config.to_text())?;
    formats::write_text(&out.join(VERSION_FILE), &format!("{VERSION}\n"))
}

fn stopwords(config: &RunConfig) -> Result<BTreeSet<String>> {
    let Some(path) = &config.trend.stopwords else {
        return Ok(BTreeSet::new());
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.split_whitespace().map(str::to_string).collect())
}

fn hourly_for(corpus: &Corpus, config: &RunConfig, path: Option<&Path>) -> Result<HourlyEmbeddings> {
    match path {
        Some(p) => formats::load_hourly(p),
        None => Ok(run_trend(&corpus.messages, &corpus.word_vectors, config.trend.params()?, &stopwords(config)?).hourly),
    }
}

fn check_dims(corpus: &Corpus, model: &ModelConfig, hourly: &HourlyEmbeddings) -> Result<()> {
    for (name, dim) in [("user", corpus.user_embeddings.dim()), ("item", corpus.item_embeddings.dim())] {
        if dim != model.emb_dim {
            return Err(Error::Config(format!(
                "{name} embeddings have dim {dim}, [model] emb_dim is {}",
                model.emb_dim
            )));
        }
    }
    if model.fusion.uses_social() && hourly.dim() != model.social_dim {
        return Err(Error::Config(format!(
            "social embeddings have dim {}, [model] social_dim is {}",
            hourly.dim(),
            model.social_dim
        )));
    }
    Ok(())
}

fn prepared(corpus: &Corpus, config: &RunConfig, hourly: &HourlyEmbeddings) -> Result<Prepared> {
    prepare(corpus, &config.prep, hourly, config.seed)
}

fn synth_stage(config: &RunConfig, out: &Path) -> Result<Corpus> {
    let synth = trendrec_core::synth::SynthConfig {
        seed: config.seed + seed_offset::SYNTH,
        ..config.synth.clone()
    };
    let bundle = generate(&synth)?;
    save_bundle(out, &bundle)?;
    log::info!(
        "synth: {} messages, {} purchases, {} items",
        bundle.messages.len(),
        bundle.purchases.len(),
        bundle.catalog.len()
    );
    Ok(bundle.into())
}

fn trend_stage(corpus: &Corpus, config: &RunConfig, out: &Path) -> Result<HourlyEmbeddings> {
    let t = run_trend(&corpus.messages, &corpus.word_vectors, config.trend.params()?, &stopwords(config)?);
    formats::write_emergence(&out.join("emergence.tsv"), t.start, &t.flags)?;
    formats::write_hourly(&out.join("hourly_vec.txt"), &t.hourly)?;
    log::info!("trend: {} words, {} hours with emerging words", t.flags.len(), t.hourly.len());
    Ok(t.hourly)
}

fn train_stage(
    corpus: &Corpus,
    prep: &Prepared,
    config: &RunConfig,
    fusion: Fusion,
    checkpoint_path: &Path,
    loss_path: &Path,
) -> Result<TrainedModel> {
    let started = Instant::now();
    let model = train_model(corpus, prep, &config.model, fusion, &config.train, config.seed)?;
    checkpoint::save(checkpoint_path, &model.config, &model.params)?;
    formats::write_loss(loss_path, &model.loss_curve)?;
    log::info!(
        "train {fusion}: {} instances, loss {:.4} -> {:.4} in {:.1}s",
        prep.train_instances.len(),
        model.loss_curve.first().copied().unwrap_or(f64::NAN),
        model.loss_curve.last().copied().unwrap_or(f64::NAN),
        started.elapsed().as_secs_f64()
    );
    Ok(model)
}

fn baselines(prep: &Prepared, config: &RunConfig) -> Result<Vec<(String, MetricsReport)>> {
    Ok(vec![
        ("prevpop".to_string(), evaluate_prevpop(prep)?),
        ("random".to_string(), evaluate_random(prep, config.seed)?),
    ])
}

fn write_reports(out: &Path, metrics: Vec<(String, MetricsReport)>) -> Result<()> {
    formats::write_text(&out.join("metrics.csv"), &formats::metrics_csv(&metrics))?;
    let comparison = compare(metrics)?;
    let mut inc = String::new();
    for (i, table) in comparison.increments.iter().enumerate() {
        let csv = table.to_csv();
        inc.push_str(if i == 0 { &csv } else { csv.split_once('\n').map_or("", |(_, rest)| rest) });
    }
    if !inc.is_empty() {
        formats::write_text(&out.join("increments.csv"), &inc)?;
    }
    Ok(())
}

fn correlate_stage(corpus: &Corpus, config: &RunConfig, out: &Path, daily: bool) -> Result<()> {
    let word = &config.correlate.word;
    let report = word_sales_correlation(&corpus.messages, &corpus.purchases, &corpus.catalog, word, &config.correlate.lags)?;
    formats::write_text(&out.join("correlation.csv"), &formats::correlation_csv(&report))?;
    if daily {
        let (first, end) = match (
            corpus.purchases.iter().map(|p| p.time).min(),
            corpus.purchases.iter().map(|p| p.time).max(),
        ) {
            (Some(a), Some(b)) => (a, b.plus(1)),
            _ => return Err(Error::Pipeline("no purchases to plot".into())),
        };
        let social = FrequencyTable::build_in_range(&corpus.messages, None, first, end);
        let sales = FrequencyTable::from_sales(&corpus.purchases, &corpus.catalog, first, end);
        formats::write_text(&out.join("daily.csv"), &formats::daily_plot_csv(word, &social, &sales))?;
    }
    if let Some(best) = report.best() {
        log::info!("correlate {word}: best lag {} (r={:?}, significant={})", best.lag, best.r, best.significant);
    }
    Ok(())
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "no such file")))
    }
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    let config = resolve_config(cli)?;
    let started = Instant::now();
    match &cli.command {
        Command::Synth { out } => {
            synth_stage(&config, out)?;
            echo(out, &config)?;
        }
        Command::Trend { data, out } => {
            let (corpus, _) = load_corpus(data)?;
            trend_stage(&corpus, &config, out)?;
            echo(out, &config)?;
        }
        Command::Train(args) => {
            let (corpus, _) = load_corpus(&args.data)?;
            let hourly = hourly_for(&corpus, &config, args.hourly.as_deref())?;
            check_dims(&corpus, &config.model, &hourly)?;
            let prep = prepared(&corpus, &config, &hourly)?;
            let (ckpt, loss) = (args.out.join("model.ckpt"), args.out.join("loss.csv"));
            train_stage(&corpus, &prep, &config, config.model.fusion, &ckpt, &loss)?;
            echo(&args.out, &config)?;
        }
        Command::Eval { data, hourly, checkpoints, out } => {
            for c in checkpoints {
                require(c)?;
            }
            let (corpus, _) = load_corpus(data)?;
            let hourly = hourly_for(&corpus, &config, hourly.as_deref())?;
            let prep = prepared(&corpus, &config, &hourly)?;
            let mut metrics = Vec::new();
            for path in checkpoints {
                let (model_config, params) = checkpoint::load(path)?;
                check_dims(&corpus, &model_config, &hourly)?;
                let model = TrainedModel {
                    fusion: model_config.fusion,
                    config: model_config,
                    params,
                    loss_curve: Vec::new(),
                };
                metrics.push((model.fusion.to_string(), evaluate_model(&corpus, &prep, &model)?));
            }
            metrics.extend(baselines(&prep, &config)?);
            write_reports(out, metrics)?;
            echo(out, &config)?;
        }
        Command::Correlate { data, out, daily_plot, .. } => {
            let (corpus, _) = load_corpus(data)?;
            correlate_stage(&corpus, &config, out, *daily_plot)?;
            echo(out, &config)?;
        }
        Command::Pipeline { data, out, .. } => {
            let corpus = match data {
                Some(dir) => load_corpus(dir)?.0,
                None => synth_stage(&config, &out.join("data"))?,
            };
            let hourly = trend_stage(&corpus, &config, &out.join("trend"))?;
            let prep = prepared(&corpus, &config, &hourly)?;
            let models_dir = out.join("models");
            let mut metrics = Vec::new();
            for fusion in Fusion::ALL {
                let model_config = ModelConfig { fusion, ..config.model.clone() };
                check_dims(&corpus, &model_config, &hourly)?;
                let ckpt = models_dir.join(format!("{fusion}.ckpt"));
                let loss = models_dir.join(format!("{fusion}-loss.csv"));
                let model = train_stage(&corpus, &prep, &config, fusion, &ckpt, &loss)?;
                metrics.push((fusion.to_string(), evaluate_model(&corpus, &prep, &model)?));
            }
            metrics.extend(baselines(&prep, &config)?);
            formats::write_text(&out.join("report.txt"), &report_table(&metrics))?;
            write_reports(out, metrics)?;
            correlate_stage(&corpus, &config, out, false)?;
            echo(out, &config)?;
            for dir in [out.join("trend"), models_dir] {
                echo(&dir, &config)?;
            }
            if data.is_none() {
                echo(&out.join("data"), &config)?;
            }
        }
    }
    log::info!("done in {:.1}s", started.elapsed().as_secs_f64());
    Ok(())
}

/// Models as rows, HR@K and NDCG@K as columns.
pub fn report_table(metrics: &[(String, MetricsReport)]) -> String {
    let Some((_, first)) = metrics.first() else {
        return String::new();
    };
    let mut s = format!("{:<10}", "model");
    for k in &first.cutoffs {
        s.push_str(&format!(" {:>8}", format!("HR@{k}")));
    }
    for k in &first.cutoffs {
        s.push_str(&format!(" {:>8}", format!("NDCG@{k}")));
    }
    s.push('\n');
    for (name, r) in metrics {
        s.push_str(&format!("{name:<10}"));
        for v in &r.hr {
            s.push_str(&format!(" {v:>8.2}"));
        }
        for v in &r.ndcg {
            s.push_str(&format!(" {v:>8.4}"));
        }
        s.push('\n');
    }
    s
}

pub use data::GROUND_TRUTH;
