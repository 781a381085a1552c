//! Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Criterion 8 needs the GUM treebank split by genre; point
//! `STACKTAG_GUM_CONFIG` at a pipeline config whose target genre is `reddit`.

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stacktag::corpus::{Corpus, Sentence, Token};
use stacktag::ensemble::{self, GbdtParams, MetaModel};
use stacktag::eval::{evaluate, Confusion, EvalResult, Tally};
use stacktag::kb::load_kb;
use stacktag::pipeline::{self, artifacts, PipelineConfig};
use stacktag::synthetic::{self, RuleTagger};
use stacktag::tagger::{self, Tagger, TaggerModel, TaggerParams};
use stacktag::Error;

const ORACLE_CORPORA: usize = 1000;
const ORACLE_BUDGET: Duration = Duration::from_secs(30);
const CONVERGENCE_BUDGET: Duration = Duration::from_secs(10);
const STACKING_BUDGET: Duration = Duration::from_secs(60);
const GUM_BUDGET: Duration = Duration::from_secs(15 * 60);
const VOTE_CEILING: f64 = 0.40;
const STACKING_FLOOR: f64 = 0.95;
const NOISE_TOLERANCE_POINTS: f64 = 1.0;
const INFORMATIVE_DROP_POINTS: f64 = 20.0;
const KB_GAIN_POINTS: f64 = 10.0;
const ABLATION_TRAIN_SENTENCES: usize = 600;

type Criterion = (&'static str, fn() -> Verdict);

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn check(cond: bool, detail: String) -> Verdict {
    if cond {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn accuracy(gold: &Corpus, pred: &[Vec<String>]) -> f64 {
    let r = evaluate(gold, pred, &HashSet::new()).expect("shapes match");
    r.per_token()
}

// 1 -------------------------------------------------------------------------

/// Reference scorer: one pass per quantity, no shared state with `evaluate`.
fn naive_evaluate(gold: &Corpus, pred: &[Vec<String>], vocab: &HashSet<String>) -> EvalResult {
    let mut token_count = 0;
    let mut correct = 0;
    for (s, p) in gold.sentences.iter().zip(pred) {
        for (t, q) in s.tokens.iter().zip(p) {
            token_count += 1;
            if t.tag == *q {
                correct += 1;
            }
        }
    }
    let mut perfect = 0;
    for (s, p) in gold.sentences.iter().zip(pred) {
        let mut all = true;
        for (t, q) in s.tokens.iter().zip(p) {
            if t.tag != *q {
                all = false;
            }
        }
        if all {
            perfect += 1;
        }
    }
    let mut known = Tally::default();
    let mut unknown = Tally::default();
    for (s, p) in gold.sentences.iter().zip(pred) {
        for (t, q) in s.tokens.iter().zip(p) {
            let bucket = if vocab.contains(&t.form) { &mut known } else { &mut unknown };
            bucket.count += 1;
            if t.tag == *q {
                bucket.correct += 1;
            }
        }
    }
    let mut pairs: Vec<(String, String)> = Vec::new();
    for (s, p) in gold.sentences.iter().zip(pred) {
        for (t, q) in s.tokens.iter().zip(p) {
            if t.tag != *q {
                pairs.push((t.tag.clone(), q.clone()));
            }
        }
    }
    let mut distinct = pairs.clone();
    distinct.sort();
    distinct.dedup();
    let mut confusions: Vec<Confusion> = distinct
        .into_iter()
        .map(|(g, q)| {
            let count = pairs.iter().filter(|(a, b)| *a == g && *b == q).count();
            Confusion { gold: g, pred: q, count }
        })
        .collect();
    // bubble sort: count desc, then (gold, pred)
    let n = confusions.len();
    for i in 0..n {
        for j in 0..n - 1 - i {
            let a = &confusions[j];
            let b = &confusions[j + 1];
            let swap = b.count > a.count
                || (b.count == a.count && (b.gold.as_str(), b.pred.as_str()) < (a.gold.as_str(), a.pred.as_str()));
            if swap {
                confusions.swap(j, j + 1);
            }
        }
    }
    EvalResult {
        token_count,
        correct,
        sentence_count: gold.sentences.len(),
        perfect_sentences: perfect,
        known,
        unknown,
        confusions,
    }
}

fn random_case(rng: &mut ChaCha8Rng) -> (Corpus, Vec<Vec<String>>, HashSet<String>) {
    let n_tags = rng.gen_range(2..=15);
    let tags: Vec<String> = (0..n_tags).map(|i| format!("T{i}")).collect();
    let forms: Vec<String> = (0..40).map(|i| format!("w{i}")).collect();
    let n_sent = rng.gen_range(1..=20);
    // skew toward the gold tag so some sentences come out perfect
    let hit_rate: f64 = rng.gen_range(0.0..=1.0);
    let mut sentences = Vec::new();
    let mut pred = Vec::new();
    for s in 0..n_sent {
        let len = rng.gen_range(1..=30);
        let mut tokens = Vec::new();
        let mut p = Vec::new();
        for _ in 0..len {
            let gold = tags.choose(rng).unwrap().clone();
            let guess = if rng.gen_bool(hit_rate) { gold.clone() } else { tags.choose(rng).unwrap().clone() };
            tokens.push(Token::new(forms.choose(rng).unwrap().clone(), gold));
            p.push(guess);
        }
        sentences.push(Sentence::new("d", format!("s{s}"), tokens));
        pred.push(p);
    }
    let vocab = forms.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect();
    (Corpus::new("random", sentences), pred, vocab)
}

fn metric_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..ORACLE_CORPORA {
        let (gold, pred, vocab) = random_case(&mut rng);
        let got = evaluate(&gold, &pred, &vocab).expect("valid shapes");
        let want = naive_evaluate(&gold, &pred, &vocab);
        if got != want {
            return Verdict::Fail(format!("corpus {i}: {got:?} != {want:?}"));
        }
    }
    let t = start.elapsed();
    check(
        t < ORACLE_BUDGET,
        format!("{ORACLE_CORPORA} random corpora identical to reference in {t:.2?}"),
    )
}

// 2 -------------------------------------------------------------------------

fn hand_fixtures() -> Verdict {
    let gold = Corpus::new(
        "fixture",
        vec![
            Sentence::from_pairs("d", "1", &[("I", "PRP"), ("love", "VBP"), ("it", "PRP")]),
            Sentence::from_pairs("d", "2", &[("the", "DT"), ("cat", "NN"), ("sleeps", "VBZ")]),
        ],
    );
    let pred = vec![
        vec!["PRP".to_string(), "VBP".into(), "PRP".into()],
        vec!["DT".to_string(), "NN".into(), "NNS".into()],
    ];
    let vocab: HashSet<String> = ["I", "love", "cat"].iter().map(|s| s.to_string()).collect();
    let r = evaluate(&gold, &pred, &vocab).unwrap();
    let fractions = r.correct * 6 == 5 * r.token_count && r.perfect_sentences * 2 == r.sentence_count;
    let identity = r.known.count + r.unknown.count == r.token_count
        && r.known.correct + r.unknown.correct == r.correct
        && (r.known.count, r.known.correct, r.unknown.count, r.unknown.correct) == (3, 3, 3, 2);

    let conf_gold = Corpus::new(
        "c",
        vec![Sentence::from_pairs("d", "1", &[("Bob", "NNP"), ("Ann", "NNP"), ("love", "VBP"), ("x", "NN")])],
    );
    let conf_pred = vec![vec!["NN".to_string(), "NN".into(), "VB".into(), "NN".into()]];
    let c = evaluate(&conf_gold, &conf_pred, &HashSet::new()).unwrap().confusions;
    let pairs: Vec<(&str, &str, usize)> = c.iter().map(|c| (c.gold.as_str(), c.pred.as_str(), c.count)).collect();
    let confusions = pairs == [("NNP", "NN", 2), ("VBP", "VB", 1)];
    check(
        fractions && identity && confusions,
        format!(
            "per_token {}/{}, full_sentence {}/{}, known {}/{} + unknown {}/{}, confusions {pairs:?}",
            r.correct,
            r.token_count,
            r.perfect_sentences,
            r.sentence_count,
            r.known.correct,
            r.known.count,
            r.unknown.correct,
            r.unknown.count
        ),
    )
}

// 3 -------------------------------------------------------------------------

fn perceptron_convergence() -> Verdict {
    let start = Instant::now();
    let corpus = synthetic::separable_corpus(500, 11);
    let gold = corpus.gold_tags();
    let mut first_perfect = None;
    for epochs in 1..=5 {
        let m = tagger::train(&corpus, TaggerParams { epochs, seed: 1 }).unwrap();
        let pred = tagger::predict_corpus(&m, &corpus);
        if pred == gold {
            first_perfect = Some(epochs);
            break;
        }
    }
    let t = start.elapsed();
    match first_perfect {
        Some(e) => check(
            t < CONVERGENCE_BUDGET,
            format!("100% training accuracy after {e} epoch(s), {t:.2?}"),
        ),
        None => Verdict::Fail(format!("not separable-perfect within 5 epochs ({t:.2?})")),
    }
}

// 4 -------------------------------------------------------------------------

fn stacking_beats_voting() -> Verdict {
    let start = Instant::now();
    let (tags, experts) = synthetic::disjoint_experts();
    let train = synthetic::uniform_corpus("train", &tags, 300, 10, 5);
    let test = synthetic::uniform_corpus("test", &tags, 200, 10, 6);
    let models: Vec<&dyn Tagger> = experts.iter().map(|m| m as &dyn Tagger).collect();
    let set = ensemble::build_instances(&models, None, &train).unwrap();
    let meta = ensemble::train_meta(&set, &GbdtParams::default()).unwrap();
    let stacked = accuracy(&test, &meta.predict(&models, None, &test).unwrap());
    let vote = accuracy(&test, &ensemble::majority_vote(&models, &test).unwrap());
    let t = start.elapsed();
    check(
        vote <= VOTE_CEILING && stacked >= STACKING_FLOOR && t < STACKING_BUDGET,
        format!("meta {stacked:.4} vs vote {vote:.4} in {t:.2?}"),
    )
}

// 5 -------------------------------------------------------------------------

fn ablation_sanity() -> Verdict {
    let tags = ["A", "B", "C", "D", "E", "F", "G", "H"];
    let mut noise_a = Vec::new();
    let mut noise_b = Vec::new();
    let mut informative_drop = Vec::new();
    for seed in [1u64, 2, 3] {
        let train = synthetic::uniform_corpus("train", &tags, ABLATION_TRAIN_SENTENCES, 10, 100 + seed);
        let test = synthetic::uniform_corpus("test", &tags, 200, 10, 200 + seed);
        let oracle = RuleTagger::noisy_oracle("informative", &tags, 0.85, seed);
        let na = RuleTagger::noise("noise-a", &tags, seed);
        let nb = RuleTagger::noise("noise-b", &tags, seed + 10);
        let models: Vec<&dyn Tagger> = vec![&oracle, &na, &nb];
        let params = GbdtParams { seed, ..GbdtParams::default() };
        let report = ensemble::ablate(&models, None, &train, &test, &params).unwrap();
        let full = report.full().result.per_token() * 100.0;
        let without = |m: &str| report.without(m).unwrap().result.per_token() * 100.0;
        noise_a.push((without("noise-a") - full).abs());
        noise_b.push((without("noise-b") - full).abs());
        informative_drop.push(full - without("informative"));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (noise, drop) = (mean(&noise_a).max(mean(&noise_b)), mean(&informative_drop));
    check(
        noise <= NOISE_TOLERANCE_POINTS && drop >= INFORMATIVE_DROP_POINTS,
        format!("mean |change| without a noise model at most {noise:.2} pts, mean drop without informative model {drop:.2} pts"),
    )
}

// 6 -------------------------------------------------------------------------

fn kb_effect() -> Verdict {
    let (train, kb_text, blind) = synthetic::gazetteer_task(400, 1);
    let (test, _, _) = synthetic::gazetteer_task(200, 2);
    let kb = load_kb(&kb_text).unwrap();
    let models: Vec<&dyn Tagger> = vec![&blind];
    let affected = |pred: &[Vec<String>]| {
        let (mut n, mut ok) = (0usize, 0usize);
        for (s, p) in test.sentences.iter().zip(pred) {
            for (t, q) in s.tokens.iter().zip(p) {
                if t.tag == "NN" || t.tag == "NNP" {
                    n += 1;
                    ok += usize::from(t.tag == *q);
                }
            }
        }
        100.0 * ok as f64 / n as f64
    };
    let run = |kb: Option<&stacktag::KnowledgeBase>| {
        let set = ensemble::build_instances(&models, kb, &train).unwrap();
        let meta = ensemble::train_meta(&set, &GbdtParams::default()).unwrap();
        affected(&meta.predict(&models, kb, &test).unwrap())
    };
    let (with, without) = (run(Some(&kb)), run(None));
    check(
        with - without >= KB_GAIN_POINTS,
        format!("NN/NNP accuracy with gazetteer {with:.2}% vs without {without:.2}%"),
    )
}

// 7 -------------------------------------------------------------------------

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let config_path = pipeline::write_smoke_fixture(tmp.path()).unwrap();
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let mut config = PipelineConfig::from_file(&config_path).unwrap();
        config.output_dir = tmp.path().join(run);
        if let Err(e) = pipeline::run_pipeline(&config) {
            return Verdict::Fail(format!("pipeline failed: {e}"));
        }
        outputs.push(config.output_dir);
    }
    let mut files: Vec<String> = artifacts::REPORTS.iter().map(|s| s.to_string()).collect();
    files.push(artifacts::META_MODEL.into());
    files.push(format!("{}/{}", artifacts::DATA_DIR, artifacts::PREDICTIONS));
    let differing: Vec<&String> = files
        .iter()
        .filter(|f| fs::read(outputs[0].join(f)).ok() != fs::read(outputs[1].join(f)).ok())
        .collect();
    check(
        differing.is_empty(),
        format!("{} report files compared, differing: {differing:?}", files.len()),
    )
}

// 8 -------------------------------------------------------------------------

fn gum() -> Verdict {
    let Some(path) = std::env::var_os("STACKTAG_GUM_CONFIG") else {
        return Verdict::Skip("STACKTAG_GUM_CONFIG not set; GUM corpus not available".into());
    };
    let start = Instant::now();
    let config = match PipelineConfig::from_file(Path::new(&path)) {
        Ok(c) => c,
        Err(e) => return Verdict::Fail(format!("config: {e}")),
    };
    let summary = match pipeline::run_pipeline(&config) {
        Ok(s) => s,
        Err(e) => return Verdict::Fail(e.to_string()),
    };
    let t = start.elapsed();
    let Some((best_name, best)) = summary.best_non_target(&config.target_genre) else {
        return Verdict::Fail("no non-target single model".into());
    };
    let ens = &summary.ensemble;
    // exact rational comparison on the shared test set
    let holds = ens.correct * best.token_count >= best.correct * ens.token_count;
    check(
        holds && t < GUM_BUDGET,
        format!(
            "ensemble {:.2} vs best single non-target `{best_name}` {:.2} in {t:.0?}",
            100.0 * ens.per_token(),
            100.0 * best.per_token()
        ),
    )
}

// 9 -------------------------------------------------------------------------

fn serialization() -> Verdict {
    let train = synthetic::genre_corpus("news", 6, 5, 3);
    let other = synthetic::genre_corpus("forum", 6, 5, 3);
    let test = synthetic::genre_corpus("forum", 3, 5, 9);
    let a = tagger::train(&train, TaggerParams { epochs: 3, seed: 1 }).unwrap();
    let b = tagger::train(&other.clone().with_genre("forum-model"), TaggerParams { epochs: 3, seed: 1 }).unwrap();
    let kb = load_kb("Sam\tPerson\nParis\tPlace\n").unwrap();

    let tmp = tempfile::tempdir().unwrap();
    let pa = tmp.path().join("a.model");
    tagger::save_model(&a, &pa).unwrap();
    let a2 = tagger::load_model(&pa).unwrap();
    let base_same = tagger::predict_corpus(&a, &test) == tagger::predict_corpus(&a2, &test) && a2 == a;

    let models: Vec<&dyn Tagger> = vec![&a, &b];
    let set = ensemble::build_instances(&models, Some(&kb), &other).unwrap();
    let meta = ensemble::train_meta(&set, &GbdtParams { rounds: 10, ..GbdtParams::default() }).unwrap();
    let pm = tmp.path().join("meta.model");
    ensemble::save_meta(&meta, &pm).unwrap();
    let meta2 = ensemble::load_meta(&pm).unwrap();
    let meta_same =
        meta.predict(&models, Some(&kb), &test).unwrap() == meta2.predict(&models, Some(&kb), &test).unwrap();

    let mut bad_version = a.to_bytes();
    bad_version[8..12].copy_from_slice(&2u32.to_le_bytes());
    let mut bad_meta_version = meta.to_bytes();
    bad_meta_version[8..12].copy_from_slice(&7u32.to_le_bytes());
    let versions = matches!(TaggerModel::from_bytes(&bad_version), Err(Error::UnsupportedVersion { .. }))
        && matches!(MetaModel::from_bytes(&bad_meta_version), Err(Error::UnsupportedVersion { .. }));

    // every truncation and a spread of single-byte corruptions must return, not panic
    let bytes = meta.to_bytes();
    let outcome = std::panic::catch_unwind(|| {
        let mut errors = 0;
        for cut in 0..bytes.len() {
            errors += usize::from(MetaModel::from_bytes(&bytes[..cut]).is_err());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..2000 {
            let mut b = bytes.clone();
            let i = rng.gen_range(0..b.len());
            b[i] = rng.gen();
            let _ = MetaModel::from_bytes(&b);
        }
        let tb = a.to_bytes();
        for cut in (0..tb.len()).step_by(7) {
            errors += usize::from(TaggerModel::from_bytes(&tb[..cut]).is_err());
        }
        errors == bytes.len() + tb.len().div_ceil(7)
    });
    let robust = matches!(outcome, Ok(true));
    check(
        base_same && meta_same && versions && robust,
        format!("base round-trip {base_same}, meta round-trip {meta_same}, version errors {versions}, no panics on corrupt input {robust}"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("metric oracle equivalence", metric_oracle),
        ("hand-counted fixtures", hand_fixtures),
        ("perceptron separable convergence", perceptron_convergence),
        ("stacking beats voting", stacking_beats_voting),
        ("ablation sanity", ablation_sanity),
        ("gazetteer feature effect", kb_effect),
        ("determinism", determinism),
        ("GUM ensemble vs best single model", gum),
        ("serialization round-trips", serialization),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let verdict = std::panic::catch_unwind(f).unwrap_or_else(|_| Verdict::Fail("panicked".into()));
        let (tag, detail) = match verdict {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Verdict::Skip(d) => ("SKIP", d),
        };
        println!("[{tag}] {}. {name}: {detail}", i + 1);
    }
    println!("acceptance: {} criteria, {failed} failed", criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
