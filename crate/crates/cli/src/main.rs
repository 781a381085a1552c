use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};

use stacktag::corpus::{self, parse_conllu_with, ParseOptions, SplitName, SplitSpec, SplitUnit};
use stacktag::ensemble::{self, GbdtParams};
use stacktag::eval;
use stacktag::kb::{self, KnowledgeBase};
use stacktag::pipeline::{self, artifacts, Overrides, PipelineConfig, OUTPUT_DIR_ENV};
use stacktag::tagger::{self, Tagger, TaggerModel, TaggerParams};
use stacktag::Corpus;

#[derive(Parser, Debug)]
#[command(name = "stacktag", version, about = "Cross-genre POS tagging with a stacked ensemble")]
struct Cli {
    /// Pipeline configuration (TOML); required by `run`
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for splitting, base training and meta training
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Ignore the gazetteer even if one is configured
    #[arg(long, global = true)]
    no_kb: bool,

    /// Also stack the base model trained on the target genre's train split
    #[arg(long, global = true)]
    include_target_base: bool,

    /// Output directory; defaults to $STACKTAG_OUTPUT_DIR
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,

    /// Worker threads
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Read `_` XPOS as a placeholder tag instead of failing
    #[arg(long, global = true)]
    permissive: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every stage from a config file
    Run,
    /// Split a corpus into train/dev/test by document or sentence
    Split(SplitArgs),
    /// Train one base tagger on a CoNLL-U corpus
    TrainBase(TrainBaseArgs),
    /// Tag a corpus, or import a third-party tagger's output
    Predict(PredictArgs),
    /// Train the meta-learner on base-model outputs
    TrainEnsemble(EnsembleArgs),
    /// Score models or prediction files against gold annotations
    Evaluate(EvaluateArgs),
    /// Retrain the ensemble without each base model in turn
    Ablate(AblateArgs),
    /// Gazetteer utilities
    Kb {
        #[command(subcommand)]
        command: KbCommand,
    },
    /// Write comparison, confusion and error reports for a trained ensemble
    Report(ReportArgs),
    /// Split corpora into one file per genre, read from document ids
    ByGenre {
        #[arg(long, required = true)]
        input: Vec<PathBuf>,
        /// Regex over the document id; the first capture group is the genre
        #[arg(long, default_value = "^GUM_([a-z]+)_")]
        pattern: String,
    },
    /// Write a small synthetic three-genre fixture with a config
    Fixture {
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum KbCommand {
    /// Entry count and entries per type
    Stats {
        #[arg(long)]
        kb: PathBuf,
    },
}

#[derive(Args, Debug)]
struct SplitArgs {
    #[arg(long)]
    input: PathBuf,
    /// Genre label; defaults to the file stem
    #[arg(long)]
    genre: Option<String>,
    #[arg(long, default_value = "document")]
    unit: SplitUnit,
    #[arg(long)]
    train: usize,
    #[arg(long)]
    dev: usize,
    #[arg(long)]
    test: usize,
}

#[derive(Args, Debug)]
struct TrainBaseArgs {
    /// Training corpus; repeat to train on the concatenation
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    /// Model name; defaults to the file stem of a single input
    #[arg(long)]
    genre: Option<String>,
    #[arg(long, default_value_t = TaggerParams::default().epochs)]
    epochs: u32,
    /// Model file; defaults to models/<genre>.model under the output dir
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// Corpus to tag (gold XPOS is kept, predictions go to MISC)
    #[arg(long)]
    input: PathBuf,
    #[arg(long, conflicts_with_all = ["external", "meta"])]
    model: Option<PathBuf>,
    /// Third-party output aligned with --input sentence by sentence; tags are
    /// read from MISC PredXPOS= when present, XPOS otherwise
    #[arg(long, conflicts_with = "meta")]
    external: Option<PathBuf>,
    /// Stacked model; requires --base for each of its base models
    #[arg(long)]
    meta: Option<PathBuf>,
    #[arg(long)]
    base: Vec<PathBuf>,
    #[arg(long)]
    kb: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct MetaArgs {
    #[arg(long, default_value_t = GbdtParams::default().rounds)]
    rounds: u32,
    #[arg(long, default_value_t = GbdtParams::default().max_depth)]
    max_depth: u32,
    #[arg(long, default_value_t = GbdtParams::default().learning_rate)]
    learning_rate: f64,
}

#[derive(Args, Debug)]
struct EnsembleArgs {
    #[arg(long, required = true)]
    base: Vec<PathBuf>,
    /// Meta-training corpus
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    kb: Option<PathBuf>,
    #[command(flatten)]
    meta: MetaArgs,
    /// Defaults to meta.model under the output dir
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    gold: PathBuf,
    /// Base model to run on the gold corpus
    #[arg(long)]
    model: Vec<PathBuf>,
    /// NAME=FILE prediction CoNLL-U (PredXPOS in MISC)
    #[arg(long, value_parser = parse_named)]
    predictions: Vec<(String, PathBuf)>,
    /// Training corpus defining known tokens for --predictions
    #[arg(long)]
    vocab: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[arg(long, required = true)]
    base: Vec<PathBuf>,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    kb: Option<PathBuf>,
    #[command(flatten)]
    meta: MetaArgs,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Base models stacked by --meta
    #[arg(long, required = true)]
    base: Vec<PathBuf>,
    /// Further single models to list in the comparison
    #[arg(long)]
    extra: Vec<PathBuf>,
    #[arg(long)]
    meta: PathBuf,
    /// Meta-training corpus, for the ensemble's known vocabulary
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    kb: Option<PathBuf>,
}

fn parse_named(s: &str) -> std::result::Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((n, p)) if !n.is_empty() && !p.is_empty() => Ok((n.to_string(), PathBuf::from(p))),
        _ => Err(format!("expected NAME=FILE, got `{s}`")),
    }
}

impl Cli {
    fn out_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    fn parse_opts(&self) -> ParseOptions {
        ParseOptions {
            permissive: self.permissive,
        }
    }

    fn read_corpus(&self, path: &Path, genre: &str) -> Result<Corpus> {
        Ok(self.read_parsed(path, genre)?.corpus)
    }

    fn read_parsed(&self, path: &Path, genre: &str) -> Result<corpus::ParsedFile> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        parse_conllu_with(&text, genre, self.parse_opts()).with_context(|| format!("parsing {}", path.display()))
    }

    fn read_kb(&self, path: Option<&Path>) -> Result<Option<KnowledgeBase>> {
        match path {
            Some(p) if !self.no_kb => {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Ok(Some(kb::load_kb(&text).with_context(|| format!("parsing {}", p.display()))?))
            }
            _ => Ok(None),
        }
    }

    fn meta_params(&self, m: &MetaArgs) -> GbdtParams {
        GbdtParams {
            rounds: m.rounds,
            max_depth: m.max_depth,
            learning_rate: m.learning_rate,
            seed: self.seed(),
            ..GbdtParams::default()
        }
    }
}

fn file_stem(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .with_context(|| format!("cannot derive a name from {}", path.display()))
}

fn load_models(paths: &[PathBuf]) -> Result<Vec<TaggerModel>> {
    paths
        .iter()
        .map(|p| tagger::load_model(p).with_context(|| format!("loading {}", p.display())))
        .collect()
}

fn as_taggers(models: &[TaggerModel]) -> Vec<&dyn Tagger> {
    models.iter().map(|m| m as &dyn Tagger).collect()
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global()?;
    }
    match &cli.command {
        Command::Run => {
            let path = cli.config.as_ref().context("`run` requires --config")?;
            let mut config = PipelineConfig::from_file(path).with_context(|| format!("loading {}", path.display()))?;
            config.apply(&Overrides {
                seed: cli.seed,
                no_kb: cli.no_kb,
                include_target_base: cli.include_target_base,
                output_dir: cli.output_dir.clone(),
                jobs: cli.jobs,
            });
            if cli.permissive {
                config.permissive = true;
            }
            let summary = pipeline::run_pipeline(&config)?;
            let target = config.target_genre.as_str();
            println!(
                "ensemble per-token {}  majority-vote {}",
                eval::percent(summary.ensemble.correct, summary.ensemble.token_count),
                eval::percent(summary.majority_vote.correct, summary.majority_vote.token_count),
            );
            if let Some((name, best)) = summary.best_non_target(target) {
                println!("best single non-target model `{name}` {}", eval::percent(best.correct, best.token_count));
            }
            println!("reports in {}", summary.output_dir.display());
        }
        Command::Split(a) => {
            let genre = match &a.genre {
                Some(g) => g.clone(),
                None => file_stem(&a.input)?,
            };
            let c = cli.read_corpus(&a.input, &genre)?;
            let spec = SplitSpec {
                unit: a.unit,
                sizes: [a.train, a.dev, a.test],
                seed: cli.seed(),
            };
            let splits = corpus::make_splits(&c, &spec)?;
            let out = cli.out_dir();
            write(&out.join(artifacts::MANIFEST), splits.manifest.to_tsv())?;
            for name in SplitName::ALL {
                let part = splits.get(name);
                log::info!("{genre}.{name}: {} tokens, {} sentences", part.token_count(), part.sentence_count());
                let rel = format!("{}/{genre}.{name}.conllu", artifacts::DATA_DIR);
                write(&out.join(rel), corpus::write_conllu(part, None)?)?;
            }
        }
        Command::TrainBase(a) => {
            let genre = match (&a.genre, a.input.as_slice()) {
                (Some(g), _) => g.clone(),
                (None, [single]) => file_stem(single)?,
                (None, _) => bail!("--genre is required with several --input files"),
            };
            let parts = a
                .input
                .iter()
                .map(|p| cli.read_corpus(p, &genre))
                .collect::<Result<Vec<_>>>()?;
            let c = corpus::concat(&parts.iter().collect::<Vec<_>>(), &genre)?;
            log::info!("training `{genre}` on {} tokens, {} sentences", c.token_count(), c.sentence_count());
            let model = tagger::train(
                &c,
                TaggerParams {
                    epochs: a.epochs,
                    seed: cli.seed(),
                },
            )?;
            let path = a
                .output
                .clone()
                .unwrap_or_else(|| cli.out_dir().join(artifacts::MODELS_DIR).join(format!("{genre}.model")));
            write(&path, model.to_bytes())?;
        }
        Command::Predict(a) => {
            let parsed = cli.read_parsed(&a.input, "input")?;
            let gold = parsed.corpus;
            let pred = if let Some(m) = &a.model {
                let model = tagger::load_model(m).with_context(|| format!("loading {}", m.display()))?;
                tagger::predict_corpus(&model, &gold)
            } else if let Some(ext) = &a.external {
                import_external(&gold, ext)?
            } else if let Some(meta_path) = &a.meta {
                let meta = ensemble::load_meta(meta_path).with_context(|| format!("loading {}", meta_path.display()))?;
                let models = load_models(&a.base)?;
                let kb = cli.read_kb(a.kb.as_deref())?;
                meta.predict(&as_taggers(&models), kb.as_ref(), &gold)?
            } else {
                bail!("one of --model, --external or --meta is required");
            };
            write(&a.output, corpus::write_conllu(&gold, Some(&pred))?)?;
        }
        Command::TrainEnsemble(a) => {
            let models = load_models(&a.base)?;
            let train = cli.read_corpus(&a.train, &train_genre(&a.train)?)?;
            let kb = cli.read_kb(a.kb.as_deref())?;
            let set = ensemble::build_instances(&as_taggers(&models), kb.as_ref(), &train)?;
            log::info!(
                "meta-training on {} instances, {} features",
                set.instances.len(),
                set.layout.total_len()
            );
            let meta = ensemble::train_meta(&set, &cli.meta_params(&a.meta))?;
            let path = a.output.clone().unwrap_or_else(|| cli.out_dir().join(artifacts::META_MODEL));
            write(&path, meta.to_bytes())?;
        }
        Command::Evaluate(a) => {
            let gold = cli.read_corpus(&a.gold, "gold")?;
            let mut results = BTreeMap::new();
            for m in load_models(&a.model)? {
                let pred = tagger::predict_corpus(&m, &gold);
                results.insert(m.genre().to_string(), eval::evaluate(&gold, &pred, m.train_vocab())?);
            }
            let vocab = match &a.vocab {
                Some(p) => corpus::vocabulary(&cli.read_corpus(p, "vocab")?),
                None => Default::default(),
            };
            for (name, path) in &a.predictions {
                let parsed = cli.read_parsed(path, name)?;
                ensure!(
                    parsed.corpus.sentences == gold.sentences,
                    "{} does not carry the same tokens and gold tags as {}",
                    path.display(),
                    a.gold.display()
                );
                let pred = parsed
                    .predictions
                    .with_context(|| format!("{} has no PredXPOS annotations", path.display()))?;
                results.insert(name.clone(), eval::evaluate(&gold, &pred, &vocab)?);
            }
            ensure!(!results.is_empty(), "nothing to evaluate: pass --model or --predictions");
            let table = eval::compare_models(&results)?;
            let out = cli.out_dir();
            write(&out.join(artifacts::COMPARISON), &table)?;
            write(&out.join(artifacts::CONFUSIONS), eval::confusion_tsv(&results, 20))?;
            print!("{table}");
        }
        Command::Ablate(a) => {
            let models = load_models(&a.base)?;
            let train = cli.read_corpus(&a.train, &train_genre(&a.train)?)?;
            let test = cli.read_corpus(&a.test, "test")?;
            let kb = cli.read_kb(a.kb.as_deref())?;
            let report = ensemble::ablate(&as_taggers(&models), kb.as_ref(), &train, &test, &cli.meta_params(&a.meta))?;
            let tsv = report.to_tsv();
            write(&cli.out_dir().join(artifacts::ABLATION), &tsv)?;
            print!("{tsv}");
        }
        Command::Kb {
            command: KbCommand::Stats { kb },
        } => {
            let text = fs::read_to_string(kb).with_context(|| format!("reading {}", kb.display()))?;
            let kb = kb::load_kb(&text)?;
            println!("entries\t{}", kb.entry_count());
            for (ty, n) in kb.type_counts() {
                println!("{ty}\t{n}");
            }
        }
        Command::Report(a) => {
            let base = load_models(&a.base)?;
            let extra = load_models(&a.extra)?;
            let meta = ensemble::load_meta(&a.meta).with_context(|| format!("loading {}", a.meta.display()))?;
            let train = cli.read_corpus(&a.train, &train_genre(&a.train)?)?;
            let test = cli.read_corpus(&a.test, "test")?;
            let kb = cli.read_kb(a.kb.as_deref())?;
            let singles: Vec<&TaggerModel> = base.iter().chain(&extra).collect();
            let evaluation =
                pipeline::evaluate_models(&singles, &as_taggers(&base), &meta, kb.as_ref(), &train, &test)?;
            pipeline::write_reports(&cli.out_dir(), &evaluation, &test)?;
        }
        Command::ByGenre { input, pattern } => {
            let re = regex::Regex::new(pattern).with_context(|| format!("bad --pattern `{pattern}`"))?;
            ensure!(re.captures_len() > 1, "--pattern needs a capture group");
            let parts = input
                .iter()
                .map(|p| cli.read_corpus(p, "input"))
                .collect::<Result<Vec<_>>>()?;
            let all = corpus::concat(&parts.iter().collect::<Vec<_>>(), "input")?;
            let groups = corpus::partition_by_doc(&all, |doc| {
                re.captures(doc).and_then(|c| c.get(1)).map(|m| m.as_str().to_string())
            });
            ensure!(!groups.is_empty(), "no document id matched `{pattern}`");
            let out = cli.out_dir();
            for (genre, c) in &groups {
                write(&out.join(format!("{genre}.conllu")), corpus::write_conllu(c, None)?)?;
                println!("{genre}\t{}\t{}", c.token_count(), c.sentence_count());
            }
        }
        Command::Fixture { dir } => {
            let config = pipeline::write_smoke_fixture(dir)?;
            println!("{}", config.display());
        }
    }
    Ok(())
}

/// Split files are named `<genre>.<split>.conllu`; the genre prefix labels the
/// corpus so same-genre base models are flagged as leaking.
fn train_genre(path: &Path) -> Result<String> {
    let stem = file_stem(path)?;
    Ok(stem.split('.').next().unwrap_or(&stem).to_string())
}

fn import_external(gold: &Corpus, path: &Path) -> Result<Vec<Vec<String>>> {
    let opts = ParseOptions { permissive: true };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let parsed = parse_conllu_with(&text, "external", opts).with_context(|| format!("parsing {}", path.display()))?;
    let ext = parsed.corpus;
    ensure!(
        ext.sentence_count() == gold.sentence_count(),
        "{} has {} sentences, expected {}",
        path.display(),
        ext.sentence_count(),
        gold.sentence_count()
    );
    for (e, g) in ext.sentences.iter().zip(&gold.sentences) {
        let ef: Vec<&str> = e.forms().collect();
        let gf: Vec<&str> = g.forms().collect();
        ensure!(
            ef == gf,
            "{}: tokens of sentence ({}, {}) differ from the gold sentence ({}, {})",
            path.display(),
            e.doc_id,
            e.sent_id,
            g.doc_id,
            g.sent_id
        );
    }
    Ok(match parsed.predictions {
        Some(p) => p,
        None => ext.gold_tags(),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
