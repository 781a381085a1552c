//! End-to-end orchestration: ingest genre corpora, split the target genre,
//! train one base tagger per genre, stack them, evaluate and ablate.
//!
//! Configuration is a TOML file:
//!
//! ```toml
//! [pipeline]
//! target_genre = "reddit"
//! output_dir = "out"          # optional, relative to the config file
//! kb_path = "entities.tsv"    # optional
//! use_kb = true
//! include_target_base = false
//! combined_models = true      # also train the all-genres / all-but-target models
//! jobs = 4
//! permissive = false          # substitute X-UNK for missing XPOS
//!
//! [genres]
//! reddit = "data/reddit.conllu"
//! news = "data/news.conllu"
//!
//! [split]
//! unit = "document"
//! train = 5727
//! dev = 2489
//! test = 2966
//! seed = 1
//!
//! [base]
//! epochs = 10
//! seed = 1
//!
//! [meta]
//! rounds = 100
//! max_depth = 3
//! learning_rate = 0.3
//! seed = 1
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{self, concat, parse_conllu_with, vocabulary, Corpus, ParseOptions, SplitSpec};
use crate::ensemble::{self, GbdtParams};
use crate::error::{Error, Result};
use crate::eval::{self, EvalResult};
use crate::kb::{self, KnowledgeBase};
use crate::tagger::{self, Tagger, TaggerModel, TaggerParams};

/// Environment variable consulted for the output directory when neither the
/// config nor the command line sets one.
pub const OUTPUT_DIR_ENV: &str = "STACKTAG_OUTPUT_DIR";

pub const ENSEMBLE_NAME: &str = "ensemble";
pub const VOTE_NAME: &str = "majority-vote";
pub const COMBINED_NAME: &str = "multiple-genres";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    pipeline: RawPipeline,
    genres: BTreeMap<String, PathBuf>,
    split: RawSplit,
    #[serde(default)]
    base: RawBase,
    #[serde(default)]
    meta: RawMeta,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPipeline {
    target_genre: String,
    output_dir: Option<PathBuf>,
    kb_path: Option<PathBuf>,
    #[serde(default = "yes")]
    use_kb: bool,
    #[serde(default)]
    include_target_base: bool,
    #[serde(default = "yes")]
    combined_models: bool,
    #[serde(default)]
    jobs: Option<usize>,
    #[serde(default)]
    permissive: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSplit {
    #[serde(default = "default_unit")]
    unit: String,
    train: usize,
    dev: usize,
    test: usize,
    #[serde(default = "one")]
    seed: u64,
}

fn default_unit() -> String {
    "document".into()
}

fn one() -> u64 {
    1
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBase {
    epochs: Option<u32>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeta {
    rounds: Option<u32>,
    max_depth: Option<u32>,
    learning_rate: Option<f64>,
    seed: Option<u64>,
    lambda: Option<f64>,
    min_child_weight: Option<f64>,
    subsample: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub genre_paths: BTreeMap<String, PathBuf>,
    pub target_genre: String,
    pub split: SplitSpec,
    pub kb_path: Option<PathBuf>,
    pub base_params: TaggerParams,
    pub meta_params: GbdtParams,
    pub output_dir: PathBuf,
    pub include_target_base: bool,
    pub use_kb: bool,
    pub combined_models: bool,
    pub jobs: usize,
    pub permissive: bool,
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub no_kb: bool,
    pub include_target_base: bool,
    pub output_dir: Option<PathBuf>,
    pub jobs: Option<usize>,
}

impl PipelineConfig {
    /// Parses a config; relative paths are resolved against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base_dir.join(p) };
        let defaults_meta = GbdtParams::default();
        let defaults_base = TaggerParams::default();
        let output_dir = match raw.pipeline.output_dir {
            Some(p) => resolve(p),
            None => std::env::var_os(OUTPUT_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| base_dir.join("stacktag-out")),
        };
        Ok(PipelineConfig {
            genre_paths: raw.genres.into_iter().map(|(g, p)| (g, resolve(p))).collect(),
            target_genre: raw.pipeline.target_genre,
            split: SplitSpec {
                unit: raw.split.unit.parse()?,
                sizes: [raw.split.train, raw.split.dev, raw.split.test],
                seed: raw.split.seed,
            },
            kb_path: raw.pipeline.kb_path.map(resolve),
            base_params: TaggerParams {
                epochs: raw.base.epochs.unwrap_or(defaults_base.epochs),
                seed: raw.base.seed.unwrap_or(defaults_base.seed),
            },
            meta_params: GbdtParams {
                rounds: raw.meta.rounds.unwrap_or(defaults_meta.rounds),
                max_depth: raw.meta.max_depth.unwrap_or(defaults_meta.max_depth),
                learning_rate: raw.meta.learning_rate.unwrap_or(defaults_meta.learning_rate),
                seed: raw.meta.seed.unwrap_or(defaults_meta.seed),
                lambda: raw.meta.lambda.unwrap_or(defaults_meta.lambda),
                min_child_weight: raw.meta.min_child_weight.unwrap_or(defaults_meta.min_child_weight),
                subsample: raw.meta.subsample.unwrap_or(defaults_meta.subsample),
            },
            output_dir,
            include_target_base: raw.pipeline.include_target_base,
            use_kb: raw.pipeline.use_kb,
            combined_models: raw.pipeline.combined_models,
            jobs: raw.pipeline.jobs.unwrap_or(1).max(1),
            permissive: raw.pipeline.permissive,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        PipelineConfig::from_toml(&text, dir)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.split.seed = seed;
            self.base_params.seed = seed;
            self.meta_params.seed = seed;
        }
        if o.no_kb {
            self.use_kb = false;
        }
        if o.include_target_base {
            self.include_target_base = true;
        }
        if let Some(dir) = &o.output_dir {
            self.output_dir = dir.clone();
        }
        if let Some(j) = o.jobs {
            self.jobs = j.max(1);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.genre_paths.contains_key(&self.target_genre) {
            return Err(Error::Config(format!(
                "target genre `{}` is not among the configured genres {:?}",
                self.target_genre,
                self.genre_paths.keys().collect::<Vec<_>>()
            )));
        }
        for reserved in [ENSEMBLE_NAME, VOTE_NAME, COMBINED_NAME] {
            if self.genre_paths.contains_key(reserved) {
                return Err(Error::Config(format!("`{reserved}` is a reserved model name")));
            }
        }
        for (g, p) in &self.genre_paths {
            if g.is_empty() || g.contains(['/', '\\', '\t']) {
                return Err(Error::Config(format!("invalid genre name `{g}`")));
            }
            if !p.is_file() {
                return Err(Error::Config(format!("corpus for `{g}` not found: {}", p.display())));
            }
        }
        if let Some(kb) = &self.kb_path {
            if self.use_kb && !kb.is_file() {
                return Err(Error::Config(format!("gazetteer not found: {}", kb.display())));
            }
        }
        if self.split.sizes.iter().sum::<usize>() == 0 {
            return Err(Error::Config("split targets are all zero".into()));
        }
        let base_count = self.genre_paths.len() - 1 + usize::from(self.include_target_base);
        if base_count == 0 {
            return Err(Error::Config("no base models: configure at least one non-target genre".into()));
        }
        Ok(())
    }

    fn combined_without_target(&self) -> String {
        format!("{COMBINED_NAME}-no-{}", self.target_genre)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Validate,
    Ingest,
    Split,
    TrainBase,
    Ensemble,
    Evaluate,
    Ablate,
    Report,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Validate => "validate",
            Stage::Ingest => "ingest",
            Stage::Split => "split",
            Stage::TrainBase => "train-base",
            Stage::Ensemble => "ensemble",
            Stage::Evaluate => "evaluate",
            Stage::Ablate => "ablate",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug)]
pub struct PipelineError {
    pub stage: Stage,
    pub source: Error,
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage `{}` failed: {}", self.stage, self.source)
    }
}

impl std::error::Error for PipelineError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

#[derive(Debug, Serialize)]
struct Status<'a> {
    status: &'a str,
    stage: Option<&'a str>,
    error: Option<String>,
    artifacts: Vec<String>,
}

/// File names of every report the pipeline writes, relative to the output dir.
pub mod artifacts {
    pub const MANIFEST: &str = "splits.tsv";
    pub const SIZES: &str = "sizes.tsv";
    pub const COMPARISON: &str = "comparison.tsv";
    pub const CONFUSIONS: &str = "confusions.tsv";
    pub const ABLATION: &str = "ablation.tsv";
    pub const ERRORS: &str = "errors.tsv";
    pub const CATEGORIES: &str = "error_categories.tsv";
    pub const META_MODEL: &str = "meta.model";
    pub const STATUS: &str = "status.json";
    pub const MODELS_DIR: &str = "models";
    pub const DATA_DIR: &str = "data";
    pub const PREDICTIONS: &str = "ensemble.test.conllu";

    /// Reports that must be byte-identical across reruns with the same seeds.
    pub const REPORTS: &[&str] = &[MANIFEST, SIZES, COMPARISON, CONFUSIONS, ABLATION, ERRORS, CATEGORIES];
}

#[derive(Debug, Clone)]
pub struct PipelineSummary {
    pub output_dir: PathBuf,
    pub artifacts: Vec<PathBuf>,
    pub single_models: BTreeMap<String, EvalResult>,
    pub ensemble: EvalResult,
    pub majority_vote: EvalResult,
    pub ablation: ensemble::AblationReport,
}

impl PipelineSummary {
    /// Best per-token result among single models not trained on the target genre.
    pub fn best_non_target(&self, target: &str) -> Option<(&str, &EvalResult)> {
        self.single_models
            .iter()
            .filter(|(name, _)| name.as_str() != target && !name.starts_with(COMBINED_NAME))
            .max_by(|(na, a), (nb, b)| a.cmp_per_token(b).then_with(|| nb.cmp(na)))
            .map(|(n, r)| (n.as_str(), r))
    }
}

struct Writer {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Writer {
    fn write(&mut self, rel: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents)?;
        self.written.push(path);
        Ok(())
    }
}

fn at(stage: Stage) -> impl FnOnce(Error) -> PipelineError {
    move |source| PipelineError { stage, source }
}

/// Runs every stage and writes `status.json` whether or not a stage fails.
pub fn run_pipeline(config: &PipelineConfig) -> std::result::Result<PipelineSummary, PipelineError> {
    let outcome = run_stages(config);
    let status = match &outcome {
        Ok(summary) => Status {
            status: "ok",
            stage: None,
            error: None,
            artifacts: summary
                .artifacts
                .iter()
                .map(|p| p.strip_prefix(&config.output_dir).unwrap_or(p).display().to_string())
                .collect(),
        },
        Err(e) => Status {
            status: "failed",
            stage: Some(e.stage.as_str()),
            error: Some(e.source.to_string()),
            artifacts: Vec::new(),
        },
    };
    let json = serde_json::to_string_pretty(&status).expect("status serializes");
    let status_path = config.output_dir.join(artifacts::STATUS);
    let written = fs::create_dir_all(&config.output_dir).and_then(|_| fs::write(&status_path, json + "\n"));
    match (outcome, written) {
        (Ok(s), Ok(())) => Ok(s),
        (Ok(_), Err(e)) => Err(PipelineError {
            stage: Stage::Report,
            source: e.into(),
        }),
        (Err(e), _) => Err(e),
    }
}

fn run_stages(config: &PipelineConfig) -> std::result::Result<PipelineSummary, PipelineError> {
    config.validate().map_err(at(Stage::Validate))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| PipelineError {
            stage: Stage::Validate,
            source: Error::Config(e.to_string()),
        })?;
    pool.install(|| run_in_pool(config))
}

fn run_in_pool(config: &PipelineConfig) -> std::result::Result<PipelineSummary, PipelineError> {
    let mut out = Writer {
        dir: config.output_dir.clone(),
        written: Vec::new(),
    };
    let target = config.target_genre.as_str();
    let opts = ParseOptions {
        permissive: config.permissive,
    };

    // ingest
    let corpora: BTreeMap<String, Corpus> = config
        .genre_paths
        .par_iter()
        .map(|(g, p)| -> Result<(String, Corpus)> {
            let text = fs::read_to_string(p)?;
            let parsed = parse_conllu_with(&text, g, opts).map_err(|e| {
                Error::Invalid(format!("{}: {e}", p.display()))
            })?;
            Ok((g.clone(), parsed.corpus))
        })
        .collect::<Result<_>>()
        .map_err(at(Stage::Ingest))?;
    let kb: Option<KnowledgeBase> = match (&config.kb_path, config.use_kb) {
        (Some(p), true) => Some(
            fs::read_to_string(p)
                .map_err(Error::from)
                .and_then(|t| kb::load_kb(&t))
                .map_err(at(Stage::Ingest))?,
        ),
        _ => None,
    };

    // split
    let splits = corpus::make_splits(&corpora[target], &config.split).map_err(at(Stage::Split))?;
    let others: Vec<&Corpus> = corpora.values().filter(|c| c.genre != target).collect();
    let write_split = |out: &mut Writer| -> Result<()> {
        out.write(artifacts::MANIFEST, splits.manifest.to_tsv())?;
        for name in corpus::SplitName::ALL {
            let rel = format!("{}/{target}.{name}.conllu", artifacts::DATA_DIR);
            out.write(&rel, corpus::write_conllu(splits.get(name), None)?)?;
        }
        Ok(())
    };
    write_split(&mut out).map_err(at(Stage::Split))?;

    // training sets: every other genre whole, the target's train split, and
    // optionally the concatenations
    let mut training: Vec<Corpus> = others.iter().map(|c| (*c).clone()).collect();
    training.push(splits.train.clone());
    if config.combined_models && !others.is_empty() {
        let with: Vec<&Corpus> = std::iter::once(&splits.train).chain(others.iter().copied()).collect();
        training.push(concat(&with, COMBINED_NAME).map_err(at(Stage::TrainBase))?);
        training.push(concat(&others, &config.combined_without_target()).map_err(at(Stage::TrainBase))?);
    }

    let mut sizes = String::from("corpus\ttokens\tsentences\n");
    for c in &training {
        let label = if c.genre == target { format!("{target}.train") } else { c.genre.clone() };
        sizes.push_str(&format!("{label}\t{}\t{}\n", c.token_count(), c.sentence_count()));
        log::info!("training set {label}: {} tokens, {} sentences", c.token_count(), c.sentence_count());
    }
    for name in [corpus::SplitName::Dev, corpus::SplitName::Test] {
        let c = splits.get(name);
        sizes.push_str(&format!("{target}.{name}\t{}\t{}\n", c.token_count(), c.sentence_count()));
        log::info!("{target}.{name}: {} tokens, {} sentences", c.token_count(), c.sentence_count());
    }
    out.write(artifacts::SIZES, sizes).map_err(at(Stage::Split))?;

    let models: Vec<TaggerModel> = training
        .par_iter()
        .map(|c| {
            log::info!("training base tagger `{}`", c.genre);
            tagger::train(c, config.base_params)
        })
        .collect::<Result<_>>()
        .map_err(at(Stage::TrainBase))?;
    for m in &models {
        out.write(&format!("{}/{}.model", artifacts::MODELS_DIR, m.genre()), m.to_bytes())
            .map_err(at(Stage::TrainBase))?;
    }

    // ensemble over single-genre models
    let base: Vec<&dyn Tagger> = models
        .iter()
        .filter(|m| {
            let g = m.genre();
            !g.starts_with(COMBINED_NAME) && (g != target || config.include_target_base)
        })
        .map(|m| m as &dyn Tagger)
        .collect();
    let set = ensemble::build_instances(&base, kb.as_ref(), &splits.train).map_err(at(Stage::Ensemble))?;
    let meta = ensemble::train_meta(&set, &config.meta_params).map_err(at(Stage::Ensemble))?;
    out.write(artifacts::META_MODEL, meta.to_bytes()).map_err(at(Stage::Ensemble))?;

    // evaluate
    let test = &splits.test;
    let singles: Vec<&TaggerModel> = models.iter().collect();
    let evaluation = evaluate_models(&singles, &base, &meta, kb.as_ref(), &splits.train, test)
        .map_err(at(Stage::Evaluate))?;

    // ablation
    let ablation = if base.len() >= 2 {
        ensemble::ablate(&base, kb.as_ref(), &splits.train, test, &config.meta_params)
            .map_err(at(Stage::Ablate))?
    } else {
        log::warn!("ablation skipped: only one base model");
        ensemble::AblationReport {
            rows: vec![ensemble::AblationRow {
                removed: None,
                result: evaluation.ensemble.clone(),
            }],
        }
    };

    // reports
    let report = (|| -> Result<()> {
        out.write(artifacts::ABLATION, ablation.to_tsv())?;
        out.written
            .extend(write_reports(&config.output_dir, &evaluation, test)?);
        Ok(())
    })();
    report.map_err(at(Stage::Report))?;

    Ok(PipelineSummary {
        output_dir: config.output_dir.clone(),
        artifacts: out.written,
        single_models: evaluation.single,
        ensemble: evaluation.ensemble,
        majority_vote: evaluation.majority_vote,
        ablation,
    })
}

/// Scores of every single model, the stacked ensemble and the vote baseline
/// on one test corpus.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub single: BTreeMap<String, EvalResult>,
    pub ensemble: EvalResult,
    pub ensemble_pred: Vec<Vec<String>>,
    pub majority_vote: EvalResult,
}

/// Each single model is scored against its own training vocabulary; the
/// ensemble and the vote against the meta-training vocabulary plus every
/// base model's.
pub fn evaluate_models(
    singles: &[&TaggerModel],
    base: &[&dyn Tagger],
    meta: &ensemble::MetaModel,
    kb: Option<&KnowledgeBase>,
    meta_train: &Corpus,
    test: &Corpus,
) -> Result<Evaluation> {
    let mut single = BTreeMap::new();
    for m in singles {
        let pred = tagger::predict_corpus(*m, test);
        single.insert(m.genre().to_string(), eval::evaluate(test, &pred, m.train_vocab())?);
    }
    let mut known: HashSet<String> = vocabulary(meta_train);
    for m in base {
        known.extend(m.vocabulary().into_iter().flatten().cloned());
    }
    let ensemble_pred = meta.predict(base, kb, test)?;
    let ensemble = eval::evaluate(test, &ensemble_pred, &known)?;
    let vote_pred = ensemble::majority_vote(base, test)?;
    let majority_vote = eval::evaluate(test, &vote_pred, &known)?;
    Ok(Evaluation {
        single,
        ensemble,
        ensemble_pred,
        majority_vote,
    })
}

/// Writes the comparison, confusion, error and prediction reports into `dir`.
pub fn write_reports(dir: &Path, evaluation: &Evaluation, test: &Corpus) -> Result<Vec<PathBuf>> {
    let mut out = Writer {
        dir: dir.to_path_buf(),
        written: Vec::new(),
    };
    let mut table = evaluation.single.clone();
    table.insert(ENSEMBLE_NAME.to_string(), evaluation.ensemble.clone());
    table.insert(VOTE_NAME.to_string(), evaluation.majority_vote.clone());
    let pred = &evaluation.ensemble_pred;
    out.write(artifacts::COMPARISON, eval::compare_models(&table)?)?;
    out.write(artifacts::CONFUSIONS, eval::confusion_tsv(&table, 20))?;
    out.write(artifacts::ERRORS, eval::error_dump(test, pred)?)?;
    out.write(
        artifacts::CATEGORIES,
        eval::category_tsv(&eval::categorize_errors(test, pred)?),
    )?;
    out.write(
        &format!("{}/{}", artifacts::DATA_DIR, artifacts::PREDICTIONS),
        corpus::write_conllu(test, Some(pred))?,
    )?;
    Ok(out.written)
}

/// Writes a small self-contained fixture (three toy genres, a gazetteer and a
/// config) into `dir` and returns the config path.
pub fn write_smoke_fixture(dir: &Path) -> Result<PathBuf> {
    use crate::synthetic::genre_corpus;
    fs::create_dir_all(dir)?;
    for (genre, docs) in [("forum", 12), ("news", 8), ("fiction", 8)] {
        let c = genre_corpus(genre, docs, 6, 7);
        fs::write(dir.join(format!("{genre}.conllu")), corpus::write_conllu(&c, None)?)?;
    }
    fs::write(dir.join("entities.tsv"), "Austin\tPlace\nBoo\tPerson\nParis\tPlace\nSam\tPerson\nReddit\tOrganization\n")?;
    let config = "\
[pipeline]
target_genre = \"forum\"
output_dir = \"out\"
kb_path = \"entities.tsv\"

[genres]
forum = \"forum.conllu\"
news = \"news.conllu\"
fiction = \"fiction.conllu\"

[split]
unit = \"document\"
train = 6
dev = 2
test = 4
seed = 3

[base]
epochs = 5
seed = 1

[meta]
rounds = 20
max_depth = 3
learning_rate = 0.3
seed = 1
";
    let path = dir.join("pipeline.toml");
    fs::write(&path, config)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SplitUnit;

    #[test]
    fn parses_config_with_defaults() {
        let text = "[pipeline]\ntarget_genre = \"r\"\n[genres]\nr = \"r.conllu\"\nn = \"/abs/n.conllu\"\n[split]\ntrain = 3\ndev = 1\ntest = 1\n";
        let c = PipelineConfig::from_toml(text, Path::new("/cfg")).unwrap();
        assert_eq!(c.genre_paths["r"], PathBuf::from("/cfg/r.conllu"));
        assert_eq!(c.genre_paths["n"], PathBuf::from("/abs/n.conllu"));
        assert_eq!(c.base_params, TaggerParams::default());
        assert_eq!(c.meta_params, GbdtParams::default());
        assert_eq!(c.split.unit, SplitUnit::Document);
        assert!(c.use_kb && !c.include_target_base && c.combined_models);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "[pipeline]\ntarget_genre = \"r\"\nbogus = 1\n[genres]\n[split]\ntrain = 1\ndev = 0\ntest = 0\n";
        assert!(matches!(PipelineConfig::from_toml(text, Path::new(".")), Err(Error::Config(_))));
    }

    #[test]
    fn overrides_apply() {
        let text = "[pipeline]\ntarget_genre = \"r\"\n[genres]\nr = \"r.conllu\"\n[split]\ntrain = 3\ndev = 1\ntest = 1\n";
        let mut c = PipelineConfig::from_toml(text, Path::new(".")).unwrap();
        c.apply(&Overrides {
            seed: Some(42),
            no_kb: true,
            include_target_base: true,
            output_dir: Some("elsewhere".into()),
            jobs: Some(3),
        });
        assert_eq!((c.split.seed, c.base_params.seed, c.meta_params.seed), (42, 42, 42));
        assert!(!c.use_kb && c.include_target_base);
        assert_eq!(c.output_dir, PathBuf::from("elsewhere"));
        assert_eq!(c.jobs, 3);
    }

    #[test]
    fn unknown_target_fails_validation_before_training() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = write_smoke_fixture(dir.path()).unwrap();
        let mut cfg = PipelineConfig::from_file(&cfg_path).unwrap();
        cfg.target_genre = "nope".into();
        let err = run_pipeline(&cfg).unwrap_err();
        assert_eq!(err.stage, Stage::Validate);
        let status = fs::read_to_string(cfg.output_dir.join(artifacts::STATUS)).unwrap();
        assert!(status.contains("\"failed\"") && status.contains("\"validate\""));
        assert!(!cfg.output_dir.join(artifacts::MODELS_DIR).exists());
    }

    #[test]
    fn parse_failures_name_the_ingest_stage() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = write_smoke_fixture(dir.path()).unwrap();
        fs::write(dir.path().join("news.conllu"), "1\tbroken\n").unwrap();
        let cfg = PipelineConfig::from_file(&cfg_path).unwrap();
        let err = run_pipeline(&cfg).unwrap_err();
        assert_eq!(err.stage, Stage::Ingest);
        assert!(err.to_string().contains("news.conllu"));
    }
}
