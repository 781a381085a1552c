//! Accuracy metrics and error analysis.
//!
//! All counts are kept as integers; fractions are derived on demand so the
//! known/unknown decomposition holds exactly.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fmt::Write as _;

use crate::corpus::{check_shape, Corpus};
use crate::error::{Error, Result};
use crate::text;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub count: usize,
    pub correct: usize,
}

impl Tally {
    /// `None` when there are no tokens in this bucket.
    pub fn accuracy(&self) -> Option<f64> {
        (self.count > 0).then(|| self.correct as f64 / self.count as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Confusion {
    pub gold: String,
    pub pred: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalResult {
    pub token_count: usize,
    pub correct: usize,
    pub sentence_count: usize,
    pub perfect_sentences: usize,
    pub known: Tally,
    pub unknown: Tally,
    /// Off-diagonal (gold, predicted) pairs, most frequent first.
    pub confusions: Vec<Confusion>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl EvalResult {
    pub fn per_token(&self) -> f64 {
        ratio(self.correct, self.token_count)
    }

    pub fn full_sentence(&self) -> f64 {
        ratio(self.perfect_sentences, self.sentence_count)
    }

    pub fn error_count(&self) -> usize {
        self.token_count - self.correct
    }

    /// Compares per-token accuracy exactly.
    pub fn cmp_per_token(&self, other: &EvalResult) -> Ordering {
        let a = self.correct as u128 * other.token_count.max(1) as u128;
        let b = other.correct as u128 * self.token_count.max(1) as u128;
        a.cmp(&b)
    }
}

/// Scores `pred` against `gold`. A token is known iff its form is in `train_vocab`.
pub fn evaluate(gold: &Corpus, pred: &[Vec<String>], train_vocab: &HashSet<String>) -> Result<EvalResult> {
    check_shape(gold, pred)?;
    let mut correct = 0;
    let mut perfect = 0;
    let mut known = Tally::default();
    let mut unknown = Tally::default();
    let mut pairs: HashMap<(&str, &str), usize> = HashMap::new();
    for (sentence, tags) in gold.sentences.iter().zip(pred) {
        let mut clean = true;
        for (token, p) in sentence.tokens.iter().zip(tags) {
            let hit = token.tag == *p;
            let bucket = if train_vocab.contains(&token.form) {
                &mut known
            } else {
                &mut unknown
            };
            bucket.count += 1;
            if hit {
                bucket.correct += 1;
                correct += 1;
            } else {
                clean = false;
                *pairs.entry((token.tag.as_str(), p.as_str())).or_default() += 1;
            }
        }
        if clean {
            perfect += 1;
        }
    }
    let mut confusions: Vec<Confusion> = pairs
        .into_iter()
        .map(|((g, p), count)| Confusion {
            gold: g.to_string(),
            pred: p.to_string(),
            count,
        })
        .collect();
    confusions.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then_with(|| a.gold.cmp(&b.gold))
            .then_with(|| a.pred.cmp(&b.pred))
    });
    Ok(EvalResult {
        token_count: gold.token_count(),
        correct,
        sentence_count: gold.sentence_count(),
        perfect_sentences: perfect,
        known,
        unknown,
        confusions,
    })
}

// ---------------------------------------------------------------------------
// Error categories
// ---------------------------------------------------------------------------

/// Heuristic error classes, checked in declaration order; the first match wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ErrorCategory {
    Emoticon,
    Elongation,
    LowercaseProper,
    Abbreviation,
    Foreign,
    Other,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 6] = [
        ErrorCategory::Emoticon,
        ErrorCategory::Elongation,
        ErrorCategory::LowercaseProper,
        ErrorCategory::Abbreviation,
        ErrorCategory::Foreign,
        ErrorCategory::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Emoticon => "emoticon",
            ErrorCategory::Elongation => "elongation",
            ErrorCategory::LowercaseProper => "lowercase-proper",
            ErrorCategory::Abbreviation => "abbreviation",
            ErrorCategory::Foreign => "foreign",
            ErrorCategory::Other => "other",
        }
    }
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn is_proper(tag: &str) -> bool {
    tag == "NNP" || tag == "NNPS"
}

/// Category of a single mistagged token.
pub fn categorize(form: &str, gold: &str, pred: &str) -> ErrorCategory {
    let len = form.chars().count();
    if text::is_emoticon(form) {
        ErrorCategory::Emoticon
    } else if text::is_elongated(form) {
        ErrorCategory::Elongation
    } else if is_proper(gold) && form.chars().next().is_some_and(char::is_lowercase) {
        ErrorCategory::LowercaseProper
    } else if (2..=5).contains(&len) && text::is_all_caps(form) && is_proper(pred) && !is_proper(gold) {
        ErrorCategory::Abbreviation
    } else if gold == "FW" {
        ErrorCategory::Foreign
    } else {
        ErrorCategory::Other
    }
}

/// Histogram over every mistagged token, one entry per category (zeros included).
pub fn categorize_errors(gold: &Corpus, pred: &[Vec<String>]) -> Result<Vec<(ErrorCategory, usize)>> {
    check_shape(gold, pred)?;
    let mut counts: BTreeMap<ErrorCategory, usize> = ErrorCategory::ALL.iter().map(|&c| (c, 0)).collect();
    for (s, tags) in gold.sentences.iter().zip(pred) {
        for (t, p) in s.tokens.iter().zip(tags) {
            if t.tag != *p {
                *counts.get_mut(&categorize(&t.form, &t.tag, p)).unwrap() += 1;
            }
        }
    }
    Ok(counts.into_iter().collect())
}

pub fn category_tsv(hist: &[(ErrorCategory, usize)]) -> String {
    let mut out = String::from("category\tcount\n");
    for (c, n) in hist {
        let _ = writeln!(out, "{c}\t{n}");
    }
    out
}

/// One line per mistagged token:
/// `doc_id, sent_id, position, form, gold, pred, category`.
pub fn error_dump(gold: &Corpus, pred: &[Vec<String>]) -> Result<String> {
    check_shape(gold, pred)?;
    let mut out = String::from("doc_id\tsent_id\tposition\tform\tgold\tpred\tcategory\n");
    for (s, tags) in gold.sentences.iter().zip(pred) {
        for (i, (t, p)) in s.tokens.iter().zip(tags).enumerate() {
            if t.tag != *p {
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    s.doc_id,
                    s.sent_id,
                    i + 1,
                    t.form,
                    t.tag,
                    p,
                    categorize(&t.form, &t.tag, p)
                );
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// `num/den` as a percentage with two decimals, rounding half up.
pub fn percent(num: usize, den: usize) -> String {
    if den == 0 {
        return "NA".to_string();
    }
    let (num, den) = (num as u128, den as u128);
    let hundredths = (2 * num * 10_000 + den) / (2 * den);
    format!("{}.{:02}", hundredths / 100, hundredths % 100)
}

/// Table of single-model results, best per-token accuracy first, ties by name.
pub fn compare_models(results: &BTreeMap<String, EvalResult>) -> Result<String> {
    let mut rows: Vec<(&String, &EvalResult)> = results.iter().collect();
    if let Some((first_name, first)) = rows.first() {
        for (name, r) in &rows {
            if r.token_count != first.token_count || r.sentence_count != first.sentence_count {
                return Err(Error::Invalid(format!(
                    "`{name}` was scored on {} tokens / {} sentences but `{first_name}` on {} / {}",
                    r.token_count, r.sentence_count, first.token_count, first.sentence_count
                )));
            }
        }
    }
    rows.sort_by(|(na, a), (nb, b)| b.cmp_per_token(a).then_with(|| na.cmp(nb)));
    let mut out = String::from("model\tper_token\tfull_sentence\tknown_acc\tunknown_acc\n");
    for (name, r) in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            name,
            percent(r.correct, r.token_count),
            percent(r.perfect_sentences, r.sentence_count),
            percent(r.known.correct, r.known.count),
            percent(r.unknown.correct, r.unknown.count),
        );
    }
    Ok(out)
}

/// `model<TAB>gold<TAB>pred<TAB>count` for the top `limit` pairs of each model.
pub fn confusion_tsv(results: &BTreeMap<String, EvalResult>, limit: usize) -> String {
    let mut out = String::from("model\tgold\tpred\tcount\n");
    for (name, r) in results {
        for c in r.confusions.iter().take(limit) {
            let _ = writeln!(out, "{name}\t{}\t{}\t{}", c.gold, c.pred, c.count);
        }
    }
    out
}
