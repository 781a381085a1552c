//! Genre-labelled corpora: CoNLL-U ingestion and output, the tag inventory,
//! document-atomic train/dev/test splitting and corpus concatenation.
//!
//! Tags are read from the XPOS column (column 5). Multiword-token ranges
//! (`3-4`) and empty nodes (`5.1`) are skipped.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Tag substituted for a missing XPOS value when parsing permissively.
pub const PLACEHOLDER_TAG: &str = "X-UNK";

const PRED_KEY: &str = "PredXPOS=";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub form: String,
    pub tag: String,
}

impl Token {
    pub fn new(form: impl Into<String>, tag: impl Into<String>) -> Self {
        Token {
            form: form.into(),
            tag: tag.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub doc_id: String,
    pub sent_id: String,
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(doc_id: impl Into<String>, sent_id: impl Into<String>, tokens: Vec<Token>) -> Self {
        Sentence {
            doc_id: doc_id.into(),
            sent_id: sent_id.into(),
            tokens,
        }
    }

    /// Builds a sentence from `(form, tag)` pairs.
    pub fn from_pairs(doc_id: &str, sent_id: &str, pairs: &[(&str, &str)]) -> Self {
        Sentence::new(
            doc_id,
            sent_id,
            pairs.iter().map(|(f, t)| Token::new(*f, *t)).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn forms(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.form.as_str())
    }

    pub fn tags(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.tag.clone()).collect()
    }
}

/// Sorted, duplicate-free tag inventory. `index_of` is a bijection onto `0..len()`.
#[derive(Debug, Clone, Default)]
pub struct TagSet {
    tags: Vec<String>,
    index: HashMap<String, usize>,
}

impl PartialEq for TagSet {
    fn eq(&self, other: &Self) -> bool {
        self.tags == other.tags
    }
}

impl Eq for TagSet {}

impl TagSet {
    pub fn new<I, S>(tags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let sorted: BTreeSet<String> = tags.into_iter().map(Into::into).collect();
        let tags: Vec<String> = sorted.into_iter().collect();
        let index = tags
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        TagSet { tags, index }
    }

    pub fn union<'a, I>(sets: I) -> Self
    where
        I: IntoIterator<Item = &'a TagSet>,
    {
        TagSet::new(sets.into_iter().flat_map(|s| s.tags.iter().cloned()))
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn index_of(&self, tag: &str) -> Option<usize> {
        self.index.get(tag).copied()
    }

    pub fn tag(&self, index: usize) -> &str {
        &self.tags[index]
    }

    pub fn contains(&self, tag: &str) -> bool {
        self.index.contains_key(tag)
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn is_subset(&self, other: &TagSet) -> bool {
        self.tags.iter().all(|t| other.contains(t))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub genre: String,
    pub sentences: Vec<Sentence>,
    tagset: TagSet,
}

impl Corpus {
    /// The tag set is induced from the sentences.
    pub fn new(genre: impl Into<String>, sentences: Vec<Sentence>) -> Self {
        let tagset = TagSet::new(
            sentences
                .iter()
                .flat_map(|s| s.tokens.iter().map(|t| t.tag.clone())),
        );
        Corpus {
            genre: genre.into(),
            sentences,
            tagset,
        }
    }

    pub fn tagset(&self) -> &TagSet {
        &self.tagset
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    pub fn sentence_count(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.sentences.iter().flat_map(|s| s.tokens.iter())
    }

    /// Gold tag sequences, one per sentence.
    pub fn gold_tags(&self) -> Vec<Vec<String>> {
        self.sentences.iter().map(Sentence::tags).collect()
    }

    pub fn with_genre(mut self, genre: impl Into<String>) -> Self {
        self.genre = genre.into();
        self
    }
}

/// Exact set of surface forms in `corpus` (case-sensitive).
pub fn vocabulary(corpus: &Corpus) -> HashSet<String> {
    corpus.tokens().map(|t| t.form.clone()).collect()
}

/// Concatenates corpora in list order under a new genre label.
pub fn concat(corpora: &[&Corpus], genre_label: &str) -> Result<Corpus> {
    if corpora.is_empty() {
        return Err(Error::Empty("concat requires at least one corpus".into()));
    }
    let sentences = corpora
        .iter()
        .flat_map(|c| c.sentences.iter().cloned())
        .collect();
    Ok(Corpus::new(genre_label, sentences))
}

/// Groups sentences by a label derived from their document id, keeping input
/// order within each group. Sentences whose id yields no label are dropped.
pub fn partition_by_doc<F>(corpus: &Corpus, label: F) -> BTreeMap<String, Corpus>
where
    F: Fn(&str) -> Option<String>,
{
    let mut groups: BTreeMap<String, Vec<Sentence>> = BTreeMap::new();
    for s in &corpus.sentences {
        if let Some(l) = label(&s.doc_id) {
            groups.entry(l).or_default().push(s.clone());
        }
    }
    groups
        .into_iter()
        .map(|(l, sents)| (l.clone(), Corpus::new(l, sents)))
        .collect()
}

// ---------------------------------------------------------------------------
// CoNLL-U
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Substitute [`PLACEHOLDER_TAG`] for a `_` XPOS instead of failing.
    pub permissive: bool,
}

/// A parsed file together with any `PredXPOS=` annotations from the MISC column.
#[derive(Debug, Clone)]
pub struct ParsedFile {
    pub corpus: Corpus,
    /// Present only when every token carries a prediction.
    pub predictions: Option<Vec<Vec<String>>>,
}

pub fn parse_conllu(text: &str, genre: &str) -> Result<Corpus> {
    parse_conllu_with(text, genre, ParseOptions::default()).map(|p| p.corpus)
}

pub fn parse_conllu_with(text: &str, genre: &str, opts: ParseOptions) -> Result<ParsedFile> {
    struct Pending {
        sent_id: Option<String>,
        tokens: Vec<Token>,
        preds: Vec<Option<String>>,
    }

    let mut sentences: Vec<Sentence> = Vec::new();
    let mut preds: Vec<Vec<Option<String>>> = Vec::new();
    let mut seen_ids: HashSet<(String, String)> = HashSet::new();
    let mut doc_id: Option<String> = None;
    let mut synthetic_doc = 0usize;
    let mut cur = Pending {
        sent_id: None,
        tokens: Vec::new(),
        preds: Vec::new(),
    };
    let mut cur_start_line = 1;

    let mut flush = |cur: &mut Pending,
                     doc_id: &Option<String>,
                     line: usize,
                     sentences: &mut Vec<Sentence>,
                     preds: &mut Vec<Vec<Option<String>>>|
     -> Result<()> {
        if cur.tokens.is_empty() {
            cur.sent_id = None;
            return Ok(());
        }
        let n = sentences.len() + 1;
        let doc = match doc_id {
            Some(d) => d.clone(),
            None => {
                synthetic_doc += 1;
                synthetic_doc.to_string()
            }
        };
        let sent = cur.sent_id.take().unwrap_or_else(|| n.to_string());
        if !seen_ids.insert((doc.clone(), sent.clone())) {
            return Err(Error::Parse {
                line,
                message: format!("duplicate sentence id ({doc}, {sent})"),
            });
        }
        sentences.push(Sentence::new(doc, sent, std::mem::take(&mut cur.tokens)));
        preds.push(std::mem::take(&mut cur.preds));
        Ok(())
    };

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            flush(&mut cur, &doc_id, cur_start_line, &mut sentences, &mut preds)?;
            continue;
        }
        if cur.tokens.is_empty() && cur.sent_id.is_none() {
            cur_start_line = line_no;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(v) = comment_value(comment, "newdoc id") {
                if !cur.tokens.is_empty() {
                    flush(&mut cur, &doc_id, cur_start_line, &mut sentences, &mut preds)?;
                }
                doc_id = Some(v.to_string());
            } else if let Some(v) = comment_value(comment, "sent_id") {
                cur.sent_id = Some(v.to_string());
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 5 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected at least 5 tab-separated columns, found {}", cols.len()),
            });
        }
        let id = cols[0];
        if id.contains('-') || id.contains('.') {
            continue;
        }
        let form = cols[1];
        if form.is_empty() || form.contains('\0') {
            return Err(Error::Parse {
                line: line_no,
                message: "empty or invalid FORM".into(),
            });
        }
        let tag = match cols[4] {
            "_" | "" if opts.permissive => PLACEHOLDER_TAG,
            "_" | "" => {
                return Err(Error::Parse {
                    line: line_no,
                    message: "missing XPOS (use permissive parsing to substitute a placeholder)"
                        .into(),
                })
            }
            t => t,
        };
        let pred = cols
            .get(9)
            .and_then(|misc| misc.split('|').find_map(|kv| kv.strip_prefix(PRED_KEY)))
            .map(str::to_string);
        cur.tokens.push(Token::new(form, tag));
        cur.preds.push(pred);
    }
    flush(&mut cur, &doc_id, cur_start_line, &mut sentences, &mut preds)?;

    if sentences.is_empty() {
        return Err(Error::Empty("no sentences in CoNLL-U input".into()));
    }

    let annotated = preds.iter().flatten().filter(|p| p.is_some()).count();
    let total: usize = preds.iter().map(Vec::len).sum();
    let predictions = if annotated == 0 {
        None
    } else if annotated == total {
        Some(
            preds
                .into_iter()
                .map(|s| s.into_iter().map(Option::unwrap).collect())
                .collect(),
        )
    } else {
        return Err(Error::Invalid(format!(
            "{annotated} of {total} tokens carry {PRED_KEY}; predictions must be complete"
        )));
    };

    Ok(ParsedFile {
        corpus: Corpus::new(genre, sentences),
        predictions,
    })
}

fn comment_value<'a>(comment: &'a str, key: &str) -> Option<&'a str> {
    let rest = comment.strip_prefix(key)?.trim_start();
    Some(rest.strip_prefix('=')?.trim())
}

/// Renders `corpus` as CoNLL-U. Predicted tags, when given, go to MISC as
/// `PredXPOS=<tag>`; gold XPOS is left intact.
pub fn write_conllu(corpus: &Corpus, predicted: Option<&[Vec<String>]>) -> Result<String> {
    if let Some(pred) = predicted {
        check_shape(corpus, pred)?;
    }
    let mut out = String::new();
    let mut last_doc: Option<&str> = None;
    for (si, sentence) in corpus.sentences.iter().enumerate() {
        if last_doc != Some(sentence.doc_id.as_str()) {
            let _ = writeln!(out, "# newdoc id = {}", sentence.doc_id);
            last_doc = Some(&sentence.doc_id);
        }
        let _ = writeln!(out, "# sent_id = {}", sentence.sent_id);
        for (ti, token) in sentence.tokens.iter().enumerate() {
            let misc = match predicted {
                Some(p) => format!("{PRED_KEY}{}", p[si][ti]),
                None => "_".to_string(),
            };
            let _ = writeln!(
                out,
                "{}\t{}\t_\t_\t{}\t_\t_\t_\t_\t{}",
                ti + 1,
                token.form,
                token.tag,
                misc
            );
        }
        out.push('\n');
    }
    Ok(out)
}

/// Checks that `pred` mirrors the sentence/token shape of `corpus`.
pub fn check_shape(corpus: &Corpus, pred: &[Vec<String>]) -> Result<()> {
    if pred.len() != corpus.sentences.len() {
        return Err(Error::Shape {
            sent_id: corpus
                .sentences
                .get(pred.len().min(corpus.sentences.len().saturating_sub(1)))
                .map(|s| s.sent_id.clone())
                .unwrap_or_default(),
            message: format!(
                "{} predicted sentences for {} gold sentences",
                pred.len(),
                corpus.sentences.len()
            ),
        });
    }
    for (s, p) in corpus.sentences.iter().zip(pred) {
        if s.len() != p.len() {
            return Err(Error::Shape {
                sent_id: s.sent_id.clone(),
                message: format!("{} predicted tags for {} tokens", p.len(), s.len()),
            });
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitUnit {
    Document,
    Sentence,
}

impl std::str::FromStr for SplitUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "document" | "doc" => Ok(SplitUnit::Document),
            "sentence" | "sent" => Ok(SplitUnit::Sentence),
            other => Err(Error::Config(format!("unknown split unit `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub unit: SplitUnit,
    /// Target token counts for (train, dev, test).
    pub sizes: [usize; 3],
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SplitName {
    Train,
    Dev,
    Test,
}

impl SplitName {
    pub const ALL: [SplitName; 3] = [SplitName::Train, SplitName::Dev, SplitName::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Dev => "dev",
            SplitName::Test => "test",
        }
    }
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SplitName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitName::Train),
            "dev" => Ok(SplitName::Dev),
            "test" => Ok(SplitName::Test),
            other => Err(Error::Invalid(format!("unknown split `{other}`"))),
        }
    }
}

/// Unit-to-split assignment, in corpus order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitManifest {
    pub unit: SplitUnit,
    pub entries: Vec<(String, SplitName)>,
}

impl SplitManifest {
    /// One `unit_id<TAB>split` line per unit. Unit ids are document ids, or
    /// `doc_id/sent_id` for sentence-level splits.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (id, split) in &self.entries {
            let _ = writeln!(out, "{id}\t{split}");
        }
        out
    }

    pub fn from_tsv(text: &str, unit: SplitUnit) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (id, split) = line.rsplit_once('\t').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: "expected `unit_id<TAB>split`".into(),
            })?;
            entries.push((id.to_string(), split.trim().parse()?));
        }
        Ok(SplitManifest { unit, entries })
    }
}

#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Corpus,
    pub dev: Corpus,
    pub test: Corpus,
    pub manifest: SplitManifest,
}

impl Splits {
    pub fn get(&self, name: SplitName) -> &Corpus {
        match name {
            SplitName::Train => &self.train,
            SplitName::Dev => &self.dev,
            SplitName::Test => &self.test,
        }
    }
}

fn unit_id(unit: SplitUnit, s: &Sentence) -> String {
    match unit {
        SplitUnit::Document => s.doc_id.clone(),
        SplitUnit::Sentence => format!("{}/{}", s.doc_id, s.sent_id),
    }
}

/// Groups sentences into splitting units, preserving first-appearance order.
fn units(corpus: &Corpus, unit: SplitUnit) -> Vec<(String, usize)> {
    let mut order: Vec<(String, usize)> = Vec::new();
    let mut pos: HashMap<String, usize> = HashMap::new();
    for s in &corpus.sentences {
        let id = unit_id(unit, s);
        match pos.get(&id) {
            Some(&i) => order[i].1 += s.len(),
            None => {
                pos.insert(id.clone(), order.len());
                order.push((id, s.len()));
            }
        }
    }
    order
}

/// Partitions `corpus` into train/dev/test in proportion to `spec.sizes`.
///
/// Units are visited in a seed-determined order and each goes to the split
/// with the largest remaining token deficit against its scaled target.
pub fn make_splits(corpus: &Corpus, spec: &SplitSpec) -> Result<Splits> {
    let target_sum: usize = spec.sizes.iter().sum();
    if target_sum == 0 {
        return Err(Error::Split("all split targets are zero".into()));
    }
    let units = units(corpus, spec.unit);
    let nonzero = spec.sizes.iter().filter(|&&s| s > 0).count();
    if units.len() < nonzero {
        return Err(Error::Split(format!(
            "{} units cannot fill {} non-empty splits",
            units.len(),
            nonzero
        )));
    }

    let total = corpus.token_count() as f64;
    let scaled: Vec<f64> = spec
        .sizes
        .iter()
        .map(|&s| s as f64 * total / target_sum as f64)
        .collect();

    let mut order: Vec<usize> = (0..units.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);

    let mut filled = [0usize; 3];
    let mut assigned = vec![SplitName::Train; units.len()];
    let mut remaining_units = units.len();
    for &u in &order {
        // Reserve at least one unit for every non-empty split that is still unfilled.
        let empty_needing: Vec<usize> = (0..3)
            .filter(|&k| spec.sizes[k] > 0 && filled[k] == 0)
            .collect();
        let k = if empty_needing.len() >= remaining_units {
            empty_needing[0]
        } else {
            (0..3)
                .filter(|&k| spec.sizes[k] > 0)
                .max_by(|&a, &b| {
                    let da = scaled[a] - filled[a] as f64;
                    let db = scaled[b] - filled[b] as f64;
                    da.partial_cmp(&db).unwrap().then(b.cmp(&a))
                })
                .expect("at least one non-zero target")
        };
        filled[k] += units[u].1;
        assigned[u] = SplitName::ALL[k];
        remaining_units -= 1;
    }

    let manifest = SplitManifest {
        unit: spec.unit,
        entries: units
            .iter()
            .zip(&assigned)
            .map(|((id, _), &s)| (id.clone(), s))
            .collect(),
    };
    apply_manifest(corpus, &manifest)
}

/// Rebuilds the three splits of `corpus` from a manifest.
pub fn apply_manifest(corpus: &Corpus, manifest: &SplitManifest) -> Result<Splits> {
    let lookup: HashMap<&str, SplitName> = manifest
        .entries
        .iter()
        .map(|(id, s)| (id.as_str(), *s))
        .collect();
    let mut parts: [Vec<Sentence>; 3] = Default::default();
    for s in &corpus.sentences {
        let id = unit_id(manifest.unit, s);
        let split = lookup.get(id.as_str()).ok_or_else(|| {
            Error::Split(format!("unit `{id}` is missing from the split manifest"))
        })?;
        parts[*split as usize].push(s.clone());
    }
    let [train, dev, test] = parts;
    let g = &corpus.genre;
    Ok(Splits {
        train: Corpus::new(g.clone(), train),
        dev: Corpus::new(g.clone(), dev),
        test: Corpus::new(g.clone(), test),
        manifest: manifest.clone(),
    })
}
