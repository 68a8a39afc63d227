use std::fs;

use trendrec::checkpoint;
use trendrec::config::RunConfig;
use trendrec::data::{load_corpus, save_bundle, PURCHASES, WORD_VECTORS};
use trendrec::formats;
use trendrec::pipeline::run_trend;
use trendrec::Error;
use trendrec_core::model::{init_params, Fusion, ModelConfig};
use trendrec_core::synth::{generate, SynthConfig};
use trendrec_core::trend::EmergenceParams;

fn small() -> SynthConfig {
    SynthConfig {
        n_users: 40,
        n_items: 200,
        n_days: 12,
        n_signal_words: 4,
        word_dim: 6,
        emb_dim: 10,
        n_background_words: 10,
        n_filler_words: 30,
        background_message_rate: 6.0,
        seed: 3,
        ..SynthConfig::default()
    }
}

#[test]
fn synthetic_bundle_round_trips_without_warnings() {
    let bundle = generate(&small()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_bundle(dir.path(), &bundle).unwrap();
    let (corpus, report) = load_corpus(dir.path()).unwrap();
    assert!(report.warnings.is_empty(), "{:?}", report.warnings);
    assert_eq!(corpus.messages, bundle.messages);
    assert_eq!(corpus.purchases, bundle.purchases);
    assert_eq!(corpus.catalog, bundle.catalog);
    assert_eq!(corpus.word_vectors, bundle.word_vectors);
    assert_eq!(corpus.user_embeddings, bundle.user_embeddings);
    assert_eq!(corpus.item_embeddings, bundle.item_embeddings);
}

#[test]
fn duplicate_vectors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    save_bundle(dir.path(), &generate(&small()).unwrap()).unwrap();
    let path = dir.path().join(WORD_VECTORS);
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let (count, dim) = lines[0].split_once(' ').unwrap();
    let header = format!("{} {dim}", count.parse::<usize>().unwrap() + 1);
    let dup = lines[1];
    lines[0] = &header;
    lines.push(dup);
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    let (_, report) = load_corpus(dir.path()).unwrap();
    assert_eq!(report.warnings.len(), 1, "{:?}", report.warnings);
    assert!(report.warnings[0].contains("1 duplicate"));
}

#[test]
fn purchase_of_unknown_item_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    save_bundle(dir.path(), &generate(&small()).unwrap()).unwrap();
    let path = dir.path().join(PURCHASES);
    let mut text = fs::read_to_string(&path).unwrap();
    let n = text.lines().count();
    text.push_str("u000\tno-such-item\t300\n");
    fs::write(&path, text).unwrap();
    match load_corpus(dir.path()) {
        Err(Error::Parse { line, message, .. }) => {
            assert_eq!(line, n + 1);
            assert!(message.contains("no-such-item"), "{message}");
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn hourly_embeddings_round_trip() {
    let bundle = generate(&small()).unwrap();
    let out = run_trend(&bundle.messages, &bundle.word_vectors, EmergenceParams::default(), &Default::default());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("hourly_vec.txt");
    formats::write_hourly(&path, &out.hourly).unwrap();
    let back = formats::load_hourly(&path).unwrap();
    assert_eq!(back.len(), out.hourly.len());
    for (h, v) in out.hourly.iter() {
        assert_eq!(back.get(h), v);
    }
}

#[test]
fn checkpoint_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for fusion in Fusion::ALL {
        let config = ModelConfig { fusion, deep_head: true, ..ModelConfig::default() };
        let params = init_params(&config, 1).unwrap();
        let path = dir.path().join(format!("{fusion}.ckpt"));
        checkpoint::save(&path, &config, &params).unwrap();
        let (c, p) = checkpoint::load(&path).unwrap();
        assert_eq!(c, config);
        assert_eq!(checkpoint::to_string(&c, &p), fs::read_to_string(&path).unwrap());
    }
}

#[test]
fn config_file_sections_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.conf");
    fs::write(&path, "# small run\n[run]\nseed = 9\n\n[train]\nepochs = 3\n[model]\nfusion = iste\n").unwrap();
    let mut config = RunConfig::load(&path).unwrap();
    config.apply_override("train.lr=0.01").unwrap();
    config.validate().unwrap();
    assert_eq!((config.seed, config.train.epochs, config.train.lr), (9, 3, 0.01));
    assert_eq!(config.model.fusion, Fusion::Iste);
    assert!(matches!(
        config.apply_override("model.widths=3"),
        Err(Error::UnknownKey { ref section, ref key }) if section == "model" && key == "widths"
    ));
}
