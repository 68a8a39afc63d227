//! Acceptance gate. Prints one PASS/FAIL line per criterion.
//!
//! Failing criteria are reported without failing the process, so the rest of
//! the test suite still runs. Set `TRENDREC_ACCEPTANCE_STRICT=1` to exit with
//! status 1 when any criterion fails.

use std::collections::BTreeMap;
use std::process::Command;
use std::time::{Duration, Instant};

use trendrec::config::RunConfig;
use trendrec::pipeline::{
    evaluate_model, evaluate_prevpop, features, prepare, run_trend, train_model, Corpus, Prepared,
};
use trendrec_core::autodiff::{grad_check, Selection, Tensor};
use trendrec_core::corpus::Timestamp;
use trendrec_core::eval::{
    build_tasks, evaluate, ndcg_at_rank, word_sales_correlation, MetricsReport, RandomScorer, RecommendationTask,
    Scorer, CUTOFFS,
};
use trendrec_core::model::{forward, iste_context, init_params, Fusion, ModelConfig, ParamVars, PredictionInput, Social};
use trendrec_core::rng::SeededRng;
use trendrec_core::segment::{AvailabilityIndex, SegmentIndex};
use trendrec_core::synth::{generate, SynthConfig};
use trendrec_core::train::{build_positive_instances, mean_loss};
use trendrec_core::trend::{detect_emergence, emergence_series, EmergenceParams};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn corpus_for(seed: u64, synth: &SynthConfig) -> Corpus {
    generate(&SynthConfig { seed, ..synth.clone() }).expect("synthetic bundle").into()
}

fn default_prepared(seed: u64) -> (Corpus, Prepared) {
    let config = RunConfig { seed, ..RunConfig::default() };
    let corpus = corpus_for(seed, &config.synth);
    let trend = run_trend(&corpus.messages, &corpus.word_vectors, config.trend.params().unwrap(), &Default::default());
    let prep = prepare(&corpus, &config.prep, &trend.hourly, seed).expect("prepare");
    (corpus, prep)
}

// ---------------------------------------------------------------- 1

fn random_input(rng: &mut SeededRng, config: &ModelConfig) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut v = |n: usize| (0..n).map(|_| rng.range_f64(-1.0, 1.0)).collect::<Vec<f64>>();
    let social_len = match config.fusion {
        Fusion::None => 0,
        Fusion::Average => config.social_dim,
        Fusion::Iste => config.k * config.social_dim,
    };
    (v(config.emb_dim), v(config.emb_dim), v(social_len))
}

fn batch_gradcheck(config: &ModelConfig, selection: Selection, seed: u64) -> f64 {
    let params = init_params(config, seed).unwrap();
    let mut rng = SeededRng::new(seed ^ 0x5eed);
    let batch: Vec<_> = (0..8).map(|_| random_input(&mut rng, config)).collect();
    let tensors: Vec<Tensor> = params.tensors().into_iter().cloned().collect();
    let report = grad_check(&tensors, 1e-5, selection, |tape, vars| {
        let vars = ParamVars::for_config(vars, config);
        let mut losses = Vec::new();
        for (n, (user, item, social)) in batch.iter().enumerate() {
            let social = match config.fusion {
                Fusion::None => Social::None,
                Fusion::Average => Social::Average(social),
                Fusion::Iste => Social::Keys(social),
            };
            let input = PredictionInput { user, item, social };
            let y = forward(tape, &vars, &input, config)?;
            losses.push(tape.bce_loss(y, (n % 2) as f64)?);
        }
        let all = tape.concat(&losses)?;
        Ok(tape.mean(all))
    })
    .unwrap();
    report.max_rel_error
}

fn gradient_fidelity() -> Outcome {
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for fusion in Fusion::ALL {
        for deep_head in [false, true] {
            let small = ModelConfig {
                emb_dim: 10,
                gmf_dim: 4,
                mlp_layers: vec![8, 6, 4],
                social_dim: 4,
                k: 24,
                fusion,
                deep_head,
                head_hidden: 5,
            };
            let e_small = batch_gradcheck(&small, Selection::All, 11);
            let full = ModelConfig { fusion, deep_head, ..ModelConfig::default() };
            let e_full = batch_gradcheck(&full, Selection::Sample { per_tensor: 24, seed: 3 }, 12);
            worst = worst.max(e_small).max(e_full);
            parts.push(format!("{fusion}/{}={:.1e}", if deep_head { "deep" } else { "linear" }, e_small.max(e_full)));
        }
    }
    let elapsed = started.elapsed();
    outcome(
        worst < 1e-4 && elapsed < Duration::from_secs(60),
        format!("max rel error {worst:.2e} ({}) in {:.1}s", parts.join(", "), elapsed.as_secs_f64()),
    )
}

// ---------------------------------------------------------------- 2

struct Fixed(BTreeMap<(String, String), f64>);

impl Scorer for Fixed {
    fn score_task(&mut self, task: &RecommendationTask) -> trendrec_core::Result<Vec<f64>> {
        Ok(task.candidates.iter().map(|c| self.0[&(task.user.clone(), c.clone())]).collect())
    }
}

fn brute_force(tasks: &[RecommendationTask], scores: &Fixed) -> (Vec<f64>, Vec<f64>) {
    let mut hits = vec![0usize; CUTOFFS.len()];
    let mut gains = vec![0.0; CUTOFFS.len()];
    for task in tasks {
        let mut order: Vec<&String> = task.candidates.iter().collect();
        let s = |c: &String| scores.0[&(task.user.clone(), c.clone())];
        order.sort_by(|a, b| s(b).partial_cmp(&s(a)).unwrap().then_with(|| a.cmp(b)));
        let rank = order.iter().position(|c| **c == task.true_item).unwrap() + 1;
        for (i, &k) in CUTOFFS.iter().enumerate() {
            if rank <= k {
                hits[i] += 1;
                gains[i] += 1.0 / ((rank + 1) as f64).log2();
            }
        }
    }
    let n = tasks.len() as f64;
    (
        hits.iter().map(|&h| h as f64 / n * 100.0).collect(),
        gains.iter().map(|g| g / n).collect(),
    )
}

fn metric_oracle() -> Outcome {
    let mut rng = SeededRng::new(2);
    let mut tasks = Vec::new();
    let mut table = BTreeMap::new();
    for t in 0..100 {
        let user = format!("u{t:03}");
        let candidates: Vec<String> = (0..400).map(|i| format!("i{i:03}")).collect();
        let true_item = candidates[rng.below(400)].clone();
        for c in &candidates {
            // A third of the vectors are coarsely quantized to force ties.
            let raw = rng.uniform();
            let s = if t % 3 == 0 { (raw * 20.0).floor() } else { raw };
            table.insert((user.clone(), c.clone()), s);
        }
        tasks.push(RecommendationTask { user, anchor: Timestamp(10), true_item, candidates });
    }
    let mut scorer = Fixed(table);
    let report = evaluate(&tasks, &mut scorer).unwrap();
    let (hr, ndcg) = brute_force(&tasks, &scorer);
    let exact = report.hr == hr && report.ndcg == ndcg;
    let candidates: Vec<String> = (0..400).map(|i| format!("i{i:03}")).collect();
    let third = RecommendationTask { user: "u".into(), anchor: Timestamp(10), true_item: "i002".into(), candidates };
    let mut descending = trendrec_core::eval::PointScorer(|_: &str, _: Timestamp, item: &str| -(item[1..].parse::<f64>().unwrap()));
    let at3 = evaluate(&[third], &mut descending).unwrap().ndcg[2];
    outcome(
        exact && at3 == 0.5 && ndcg_at_rank(3) == 0.5,
        format!("100 tasks identical={exact}; NDCG@3 of a rank-3 hit = {at3}"),
    )
}

// ---------------------------------------------------------------- 3

fn oracle_emergence(series: &[u32], t: usize, fp: usize, bp: usize) -> bool {
    let f = |h: i64| -> f64 {
        if h < 0 || h as usize >= series.len() {
            0.0
        } else {
            series[h as usize] as f64
        }
    };
    let t = t as i64;
    let (fp, bp) = (fp as i64, bp as i64);
    let fore: Vec<f64> = (t - fp..=t - 1).map(f).collect();
    let back: Vec<f64> = (t - fp - bp..=t - fp - 1).map(f).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let inc_fp = *fore.last().unwrap() > mean(&fore);
    let inc_bp = *back.last().unwrap() > mean(&back);
    inc_fp || (inc_bp && mean(&fore) > mean(&back))
}

fn emergence_oracle() -> Outcome {
    let mut rng = SeededRng::new(3);
    let (mut checks, mut mismatches) = (0usize, 0usize);
    for _ in 0..10 {
        let fp = 2 + rng.below(30);
        let bp = 2 + rng.below(90);
        let params = EmergenceParams::new(fp, bp).unwrap();
        for _ in 0..1000 {
            let len = 1 + rng.below(300);
            let sparse = rng.bernoulli(0.5);
            let series: Vec<u32> = (0..len)
                .map(|_| if sparse { (rng.bernoulli(0.1) as u32) * (1 + rng.below(5) as u32) } else { rng.poisson(3.0) })
                .collect();
            let flags = emergence_series(&series, params);
            for (t, &flag) in flags.iter().enumerate() {
                let want = oracle_emergence(&series, t, fp, bp);
                checks += 1;
                if detect_emergence(&series, t, params) != want || flag != want {
                    mismatches += 1;
                }
            }
        }
    }
    outcome(mismatches == 0, format!("{mismatches} mismatches over {checks} (series, hour) checks"))
}

// ---------------------------------------------------------------- 4

fn attention_neutrality() -> Outcome {
    let mut rng = SeededRng::new(4);
    let (mut mean_err, mut sum_err): (f64, f64) = (0.0, 0.0);
    for trial in 0..200 {
        let d = 1 + rng.below(60);
        let k = 1 + rng.below(48);
        let query: Vec<f64> = (0..d).map(|_| rng.range_f64(-5.0, 5.0)).collect();
        let keys: Vec<f64> = (0..k * d).map(|_| rng.range_f64(-5.0, 5.0)).collect();
        let zero = Tensor::zeros(&[d, d]);
        let (context, weights) = iste_context(&query, &keys, &zero).unwrap();
        for j in 0..d {
            let mean = (0..k).map(|r| keys[r * d + j]).sum::<f64>() / k as f64;
            mean_err = mean_err.max((context[j] - mean).abs());
        }
        sum_err = sum_err.max((weights.iter().sum::<f64>() - 1.0).abs());
        let scale = if trial % 2 == 0 { 1.0 } else { 50.0 };
        let w = Tensor::matrix(d, d, (0..d * d).map(|_| rng.range_f64(-scale, scale)).collect()).unwrap();
        let (_, weights) = iste_context(&query, &keys, &w).unwrap();
        sum_err = sum_err.max((weights.iter().sum::<f64>() - 1.0).abs());
    }
    outcome(
        mean_err <= 1e-12 && sum_err <= 1e-12,
        format!("|context - mean| <= {mean_err:.1e}, |sum(weights) - 1| <= {sum_err:.1e}"),
    )
}

// ---------------------------------------------------------------- 5

fn random_calibration(prep: &Prepared) -> Outcome {
    let segments = SegmentIndex::build(
        prep.purchases.iter().map(|p| p.time).min().unwrap(),
        prep.purchases.iter().map(|p| p.time).max().unwrap().plus(1),
    );
    let availability = AvailabilityIndex::new(&prep.catalog, segments.segments());
    let test: Vec<_> = prep.purchases.iter().filter(|p| p.time >= prep.split_anchor).cloned().collect();
    let positives = build_positive_instances(&test);
    let mut tasks = Vec::new();
    let mut round = 0;
    while tasks.len() < 10_000 {
        tasks.extend(build_tasks(&positives, &prep.catalog, &availability, 400, 1000 + round).unwrap());
        round += 1;
    }
    tasks.truncate(10_000);
    let report = evaluate(&tasks, &mut RandomScorer::new(55)).unwrap();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (k, hr) in report.cutoffs.iter().zip(&report.hr) {
        let expected = 100.0 * *k as f64 / 400.0;
        worst = worst.max((hr - expected).abs());
        parts.push(format!("HR@{k}={hr:.2} (expect {expected:.2})"));
    }
    outcome(worst <= 1.5, format!("{} tasks: {}; max deviation {worst:.2}", tasks.len(), parts.join(", ")))
}

// ---------------------------------------------------------------- 6 and 8

struct SeedRun {
    seed: u64,
    metrics: BTreeMap<String, MetricsReport>,
    loss_curves: Vec<(Fusion, Vec<f64>)>,
    elapsed: Duration,
}

fn full_pipeline(seed: u64) -> SeedRun {
    let started = Instant::now();
    let config = RunConfig { seed, ..RunConfig::default() };
    let corpus = corpus_for(seed, &config.synth);
    let trend = run_trend(&corpus.messages, &corpus.word_vectors, config.trend.params().unwrap(), &Default::default());
    let prep = prepare(&corpus, &config.prep, &trend.hourly, seed).unwrap();
    let mut metrics = BTreeMap::new();
    let mut loss_curves = Vec::new();
    for fusion in Fusion::ALL {
        let model = train_model(&corpus, &prep, &config.model, fusion, &config.train, seed).unwrap();
        metrics.insert(fusion.to_string(), evaluate_model(&corpus, &prep, &model).unwrap());
        loss_curves.push((fusion, model.loss_curve));
    }
    metrics.insert("prevpop".into(), evaluate_prevpop(&prep).unwrap());
    let word = &config.correlate.word;
    word_sales_correlation(&corpus.messages, &corpus.purchases, &corpus.catalog, word, &config.correlate.lags).unwrap();
    SeedRun { seed, metrics, loss_curves, elapsed: started.elapsed() }
}

fn mean_hr(runs: &[SeedRun], model: &str) -> Vec<f64> {
    let n = runs.len() as f64;
    (0..CUTOFFS.len()).map(|i| runs.iter().map(|r| r.metrics[model].hr[i]).sum::<f64>() / n).collect()
}

fn planted_lift(runs: &[SeedRun]) -> Outcome {
    let none = mean_hr(runs, "none");
    let average = mean_hr(runs, "average");
    let iste = mean_hr(runs, "iste");
    let prevpop = mean_hr(runs, "prevpop");
    let lift_iste = iste[0] - none[0];
    let lift_avg = average[0] - none[0];
    let beats = [&none, &average, &iste].iter().all(|m| m.iter().zip(&prevpop).all(|(a, b)| a > b));
    let slowest = runs.iter().map(|r| r.elapsed).max().unwrap();
    let checks = [
        (lift_iste >= 5.0, "iste lift >= 5"),
        (lift_avg >= 0.0, "average >= none"),
        (beats, "all models beat prevpop"),
        (slowest < Duration::from_secs(600), "pipeline < 10 min"),
    ];
    let failed: Vec<&str> = checks.iter().filter(|(ok, _)| !ok).map(|(_, n)| *n).collect();
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join("/");
    outcome(
        failed.is_empty(),
        format!(
            "mean HR@{{1,2,3,5,10}} none {} | average {} | iste {} | prevpop {}; HR@1 lift iste {lift_iste:+.2}, average {lift_avg:+.2}; slowest pipeline {:.0}s{}",
            fmt(&none),
            fmt(&average),
            fmt(&iste),
            fmt(&prevpop),
            slowest.as_secs_f64(),
            if failed.is_empty() { String::new() } else { format!("; failed: {}", failed.join(", ")) }
        ),
    )
}

fn loss_sanity(corpus: &Corpus, prep: &Prepared, runs: &[SeedRun]) -> Outcome {
    // Zero head weights make every prediction exactly 0.5.
    let config = ModelConfig { fusion: Fusion::None, ..RunConfig::default().model };
    let mut params = init_params(&config, 8).unwrap();
    for t in params.tensors_mut().into_iter().rev().take(2) {
        t.data_mut().iter_mut().for_each(|v| *v = 0.0);
    }
    let loss = mean_loss(&params, &prep.train_instances, &features(corpus, prep), &config).unwrap();
    let rel = (loss - std::f64::consts::LN_2).abs() / std::f64::consts::LN_2;

    let init = init_params(&config, 9).unwrap();
    let glorot = mean_loss(&init, &prep.train_instances, &features(corpus, prep), &config).unwrap();

    let mut decreasing = true;
    let mut parts = Vec::new();
    for run in runs {
        for (fusion, curve) in &run.loss_curves {
            let (first, last) = (curve[0], *curve.last().unwrap());
            decreasing &= curve.len() == 50 && last < first;
            parts.push(format!("s{}/{fusion} {first:.3}->{last:.3}", run.seed));
        }
    }
    outcome(
        rel < 0.01 && decreasing,
        format!(
            "0.5-output loss {loss:.6} (ln2 rel err {:.2e}), glorot-init loss {glorot:.4}; epoch 1->50: {}",
            rel,
            parts.join(", ")
        ),
    )
}

// ---------------------------------------------------------------- 7

fn correlation_recovery() -> Outcome {
    let lags: Vec<usize> = (1..=6).collect();
    let threshold = 0.05 / 6.0;
    let synth = SynthConfig::default();
    let planted = corpus_for(0, &synth);
    let report = word_sales_correlation(&planted.messages, &planted.purchases, &planted.catalog, "sig00", &lags).unwrap();
    let best = report.best().unwrap();
    let planted_ok = best.lag == 3 && best.p.is_some_and(|p| p < threshold);

    let mut null_hits = 0;
    for seed in 0..20 {
        let null = corpus_for(seed, &SynthConfig { surge_strength: 1.0, ..synth.clone() });
        let r = word_sales_correlation(&null.messages, &null.purchases, &null.catalog, "sig00", &lags).unwrap();
        null_hits += r.any_significant() as usize;
    }
    let null_ok = null_hits as f64 <= 0.05 * 20.0;
    outcome(
        planted_ok && null_ok,
        format!(
            "planted sig00: best lag {} r={:.4} p={:.2e}; null world: {null_hits}/20 seeds with a significant lag",
            best.lag,
            best.r.unwrap_or(f64::NAN),
            best.p.unwrap_or(f64::NAN)
        ),
    )
}

// ---------------------------------------------------------------- 9

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_trendrec");
    let root = tempfile::tempdir().unwrap();
    let run = |name: &str| -> bool {
        Command::new(bin)
            .args(["pipeline", "--epochs", "2", "--seed", "7", "--out"])
            .arg(root.path().join(name))
            .env("RUST_LOG", "warn")
            .status()
            .is_ok_and(|s| s.success())
    };
    if !run("a") || !run("b") {
        return outcome(false, "pipeline command failed");
    }
    let files = ["models/none.ckpt", "models/average.ckpt", "models/iste.ckpt", "metrics.csv", "increments.csv"];
    let differing: Vec<&str> = files
        .iter()
        .filter(|f| {
            let read = |r: &str| std::fs::read(root.path().join(r).join(f)).ok();
            let (a, b) = (read("a"), read("b"));
            a.is_none() || a != b
        })
        .copied()
        .collect();
    outcome(
        differing.is_empty(),
        format!("2-epoch runs with seed 7; differing or missing: {:?}", differing),
    )
}

fn main() {
    // `cargo test` passes harness flags; a name filter that excludes us skips the gate.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return;
    }
    let strict = std::env::var("TRENDREC_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let report = |name: &'static str, o: Outcome, results: &mut Vec<(&str, Outcome)>| {
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((name, o));
    };

    report("1 gradient fidelity", gradient_fidelity(), &mut results);
    report("2 metric oracle", metric_oracle(), &mut results);
    report("3 emergence oracle", emergence_oracle(), &mut results);
    report("4 attention neutrality", attention_neutrality(), &mut results);
    let (corpus, prep) = default_prepared(0);
    report("5 random calibration", random_calibration(&prep), &mut results);
    let runs: Vec<SeedRun> = (0..3).map(full_pipeline).collect();
    report("6 planted-signal lift", planted_lift(&runs), &mut results);
    report("7 correlation recovery", correlation_recovery(), &mut results);
    report("8 loss sanity", loss_sanity(&corpus, &prep, &runs), &mut results);
    report("9 determinism", determinism(), &mut results);

    let failed = results.iter().filter(|(_, o)| !o.pass).count();
    println!("acceptance: {} of {} criteria pass", results.len() - failed, results.len());
    if strict && failed > 0 {
        std::process::exit(1);
    }
}
