use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn stacktag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stacktag"))
        .args(args)
        .env_remove("STACKTAG_OUTPUT_DIR")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = stacktag(args);
    assert!(
        out.status.success(),
        "stacktag {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixture(dir: &Path) -> PathBuf {
    PathBuf::from(ok(&["fixture", "--dir", s(dir)]).trim())
}

const REPORTS: &[&str] = &[
    "splits.tsv",
    "comparison.tsv",
    "confusions.tsv",
    "ablation.tsv",
    "errors.tsv",
    "error_categories.tsv",
    "data/ensemble.test.conllu",
];

#[test]
fn subcommands_compose_to_the_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let config = fixture(dir);
    let piped = dir.join("piped");
    ok(&["run", "--config", s(&config), "--output-dir", s(&piped)]);

    let step = dir.join("step");
    let models = step.join("models");
    let data = step.join("data");
    let model = |name: &str| models.join(format!("{name}.model")).to_str().unwrap().to_string();
    let out = ["--output-dir", s(&step)];
    let input = |name: &str| dir.join(format!("{name}.conllu")).to_str().unwrap().to_string();
    let train = data.join("forum.train.conllu");
    let test = data.join("forum.test.conllu");
    let kb = dir.join("entities.tsv");

    ok(&[&["split", "--input", &input("forum"), "--genre", "forum", "--unit", "document"][..],
        &["--train", "6", "--dev", "2", "--test", "4", "--seed", "3"], &out]
        .concat());
    for g in ["fiction", "news"] {
        ok(&[&["train-base", "--input", &input(g), "--epochs", "5", "--seed", "1"][..], &out].concat());
    }
    ok(&[&["train-base", "--input", s(&train), "--genre", "forum", "--epochs", "5"][..], &out].concat());
    ok(&[
        &["train-base", "--genre", "multiple-genres", "--epochs", "5"][..],
        &["--input", s(&train), "--input", &input("fiction"), "--input", &input("news")],
        &out,
    ]
    .concat());
    ok(&[
        &["train-base", "--genre", "multiple-genres-no-forum", "--epochs", "5"][..],
        &["--input", &input("fiction"), "--input", &input("news")],
        &out,
    ]
    .concat());

    let base = ["--base", &model("fiction"), "--base", &model("news")];
    let meta_args = ["--rounds", "20", "--max-depth", "3", "--learning-rate", "0.3", "--seed", "1"];
    ok(&[&["train-ensemble", "--train", s(&train), "--kb", s(&kb)][..], &base, &meta_args, &out].concat());
    ok(&[&["ablate", "--train", s(&train), "--test", s(&test), "--kb", s(&kb)][..], &base, &meta_args, &out].concat());
    let meta = step.join("meta.model");
    ok(&[
        &["report", "--meta", s(&meta), "--train", s(&train), "--test", s(&test), "--kb", s(&kb)][..],
        &base,
        &["--extra", &model("forum"), "--extra", &model("multiple-genres")],
        &["--extra", &model("multiple-genres-no-forum")],
        &out,
    ]
    .concat());

    for r in REPORTS {
        let a = fs::read(piped.join(r)).unwrap();
        let b = fs::read(step.join(r)).unwrap_or_else(|e| panic!("{r}: {e}"));
        assert!(a == b, "{r} differs between `run` and the subcommand sequence");
    }
    for m in ["fiction", "news", "forum", "multiple-genres", "multiple-genres-no-forum"] {
        let rel = format!("models/{m}.model");
        assert_eq!(fs::read(piped.join(&rel)).unwrap(), fs::read(step.join(&rel)).unwrap(), "{rel}");
    }
    assert_eq!(fs::read(piped.join("meta.model")).unwrap(), fs::read(meta).unwrap());
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let config = fixture(tmp.path());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ok(&["run", "--config", s(&config), "--output-dir", s(&a), "--jobs", "1"]);
    ok(&["run", "--config", s(&config), "--output-dir", s(&b), "--jobs", "4"]);
    for r in REPORTS.iter().chain(&["sizes.tsv"]) {
        assert_eq!(fs::read(a.join(r)).unwrap(), fs::read(b.join(r)).unwrap(), "{r}");
    }
    let status = fs::read_to_string(a.join("status.json")).unwrap();
    assert!(status.contains("\"ok\""));
}

#[test]
fn output_dir_falls_back_to_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let config = fixture(tmp.path());
    let text = fs::read_to_string(&config).unwrap().replace("output_dir = \"out\"\n", "");
    fs::write(&config, text).unwrap();
    let env_dir = tmp.path().join("from-env");
    let out = Command::new(env!("CARGO_BIN_EXE_stacktag"))
        .args(["run", "--config", s(&config), "--no-kb"])
        .env("STACKTAG_OUTPUT_DIR", &env_dir)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(env_dir.join("comparison.tsv").is_file());
}

#[test]
fn unknown_target_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let config = fixture(tmp.path());
    let text = fs::read_to_string(&config).unwrap().replace("target_genre = \"forum\"", "target_genre = \"wiki\"");
    fs::write(&config, text).unwrap();
    let out = stacktag(&["run", "--config", s(&config)]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("validate") && err.contains("wiki"), "{err}");
    let status = fs::read_to_string(tmp.path().join("out/status.json")).unwrap();
    assert!(status.contains("\"failed\"") && status.contains("\"validate\""));
    assert!(!tmp.path().join("out/models").exists());
}

#[test]
fn external_predictions_evaluate_like_the_model() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fixture(dir);
    let out = ["--output-dir", s(dir)];
    let news = dir.join("news.conllu");
    let forum = dir.join("forum.conllu");
    ok(&[&["train-base", "--input", s(&news), "--epochs", "3"][..], &out].concat());
    let model = dir.join("models/news.model");

    // a third-party tool writing its tags straight into XPOS
    let tagged = dir.join("tagged.conllu");
    ok(&["predict", "--model", s(&model), "--input", s(&forum), "--output", s(&tagged)]);
    let third_party: String = fs::read_to_string(&tagged)
        .unwrap()
        .lines()
        .map(|l| {
            let cols: Vec<&str> = l.split('\t').collect();
            if cols.len() == 10 {
                let pred = cols[9].strip_prefix("PredXPOS=").unwrap();
                format!("{}\t{}\t_\t_\t{pred}\t_\t_\t_\t_\t_\n", cols[0], cols[1])
            } else if l.starts_with('#') {
                String::new()
            } else {
                format!("{l}\n")
            }
        })
        .collect();
    let ext = dir.join("external.conllu");
    fs::write(&ext, third_party).unwrap();
    let imported = dir.join("imported.conllu");
    ok(&["predict", "--external", s(&ext), "--input", s(&forum), "--output", s(&imported)]);
    assert_eq!(fs::read(&tagged).unwrap(), fs::read(&imported).unwrap());

    let table = ok(&[
        &["evaluate", "--gold", s(&forum), "--model", s(&model)][..],
        &["--predictions", &format!("tool={}", s(&imported)), "--vocab", s(&news)],
        &out,
    ]
    .concat());
    let rows: Vec<Vec<&str>> = table.lines().skip(1).map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][1..], rows[1][1..]);
}

#[test]
fn misaligned_external_output_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fixture(dir);
    let ext = dir.join("ext.conllu");
    fs::write(&ext, "1\tnothing\t_\t_\tNN\t_\t_\t_\t_\t_\n").unwrap();
    let out = stacktag(&[
        "predict",
        "--external",
        s(&ext),
        "--input",
        s(&dir.join("news.conllu")),
        "--output",
        s(&dir.join("x.conllu")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("sentences"));
}

#[test]
fn corrupt_model_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fixture(dir);
    let bad = dir.join("bad.model");
    fs::write(&bad, b"STKTAGR\0\x63\0\0\0rest").unwrap();
    let out = stacktag(&["predict", "--model", s(&bad), "--input", s(&dir.join("news.conllu")), "--output", "-"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("version") && !err.contains("panicked"), "{err}");
}

#[test]
fn kb_stats_counts_types() {
    let tmp = tempfile::tempdir().unwrap();
    let kb = tmp.path().join("kb.tsv");
    fs::write(&kb, "Paris\tPlace\nSam\tPerson\nAmazon\tOrganization,Place\n").unwrap();
    let out = ok(&["kb", "stats", "--kb", s(&kb)]);
    assert_eq!(out, "entries\t3\nOrganization\t1\nPerson\t1\nPlace\t2\n");
}

#[test]
fn by_genre_splits_on_document_ids() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("gum.conllu");
    fs::write(
        &input,
        "# newdoc id = GUM_reddit_one\n# sent_id = a\n1\thi\t_\t_\tUH\t_\t_\t_\t_\t_\n\n\
         # newdoc id = GUM_news_two\n# sent_id = b\n1\tnews\t_\t_\tNN\t_\t_\t_\t_\t_\n2\t.\t_\t_\t.\t_\t_\t_\t_\t_\n\n",
    )
    .unwrap();
    let out = ok(&["by-genre", "--input", s(&input), "--output-dir", s(tmp.path())]);
    assert_eq!(out, "news\t2\t1\nreddit\t1\t1\n");
    let reddit = fs::read_to_string(tmp.path().join("reddit.conllu")).unwrap();
    assert!(reddit.contains("GUM_reddit_one") && !reddit.contains("GUM_news_two"));
}
