//! Deterministic synthetic corpora and rule-based taggers.
//!
//! These back the acceptance suite, the benchmarks and the smoke pipeline
//! fixture. Nothing here is used by the real pipeline.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Sentence, TagSet, Token};
use crate::tagger::Tagger;

/// Stable 64-bit FNV-1a, used to derive per-genre and per-token seeds.
pub fn fnv1a(parts: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for p in parts {
        for &b in *p {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        h ^= 0xff;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Corpus in which every form has exactly one tag.
pub fn separable_corpus(sentences: usize, seed: u64) -> Corpus {
    const TAGS: [&str; 10] = ["CC", "DT", "IN", "JJ", "NN", "NNP", "PRP", "RB", "VB", "VBZ"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lexicon: Vec<(String, &str)> = (0..300)
        .map(|i| {
            let tag = TAGS[i % TAGS.len()];
            let form = match tag {
                "NNP" => format!("Name{i}"),
                _ => format!("{}{i}", tag.to_lowercase()),
            };
            (form, tag)
        })
        .collect();
    let sentences = (0..sentences)
        .map(|s| {
            let len = rng.gen_range(3..=15);
            let tokens = (0..len)
                .map(|_| {
                    let (f, t) = &lexicon[rng.gen_range(0..lexicon.len())];
                    Token::new(f.clone(), *t)
                })
                .collect();
            Sentence::new(format!("doc{}", s / 10), format!("s{s}"), tokens)
        })
        .collect();
    Corpus::new("separable", sentences)
}

const TEMPLATES: &[&[&str]] = &[
    &["DT", "NN", "VBZ", "DT", "NN", "."],
    &["PRP", "VBP", "DT", "JJ", "NN", "."],
    &["NNP", "VBD", "IN", "NNP", "."],
    &["UH", ",", "PRP", "VBP", "RB", "."],
    &["VB", "DT", "NN", "."],
    &["DT", "JJ", "NN", "VBZ", "RB", "."],
    &["PRP", "MD", "VB", "PRP", "."],
    &["VBP", "IN", "PRP", "VBP", "NNP", "SYM"],
    &["NNP", "NNP", "VBZ", "DT", "NN", "IN", "NNP", "."],
];

fn shared_words(tag: &str) -> &'static [&'static str] {
    match tag {
        "DT" => &["the", "a", "this", "that", "every"],
        "NN" => &["run", "love", "city", "book", "idea", "thread", "post", "guide", "time", "road"],
        "VBZ" => &["is", "has", "runs", "makes", "seems"],
        "VBP" => &["love", "run", "need", "want", "think", "see"],
        "VB" => &["run", "love", "see", "make", "try", "go"],
        "VBD" => &["went", "said", "made", "saw"],
        "JJ" => &["good", "new", "wild", "long", "old", "great"],
        "PRP" => &["I", "you", "we", "it", "they"],
        "IN" => &["in", "on", "from", "that", "with", "about"],
        "RB" => &["really", "now", "too", "just", "never"],
        "MD" => &["can", "will", "should"],
        "UH" => &["lol", "yeah", "wow", "oh"],
        "NNP" => &["Austin", "Boo", "Paris", "Reddit", "Sam"],
        "SYM" => &[":)", ":(", ";-)"],
        "," => &[","],
        "." => &[".", "!", "?"],
        _ => &["x"],
    }
}

/// Toy-language corpus for one genre. Genres share a core lexicon but each
/// adds its own nouns, names and adjectives and weights templates differently.
pub fn genre_corpus(genre: &str, docs: usize, sentences_per_doc: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(&[genre.as_bytes(), &seed.to_le_bytes()]));
    let genre_key = fnv1a(&[genre.as_bytes()]);
    let weights: Vec<u32> = (0..TEMPLATES.len())
        .map(|i| 1 + ((genre_key >> (i * 3)) & 7) as u32)
        .collect();
    let total: u32 = weights.iter().sum();
    let stem: String = genre.chars().take(3).collect();
    let own = |tag: &str, i: usize| -> Option<String> {
        match tag {
            "NN" => Some(format!("{stem}thing{i}")),
            "NNP" => Some(format!("{}{i}", crate::text::capitalize_first(&stem))),
            "JJ" => Some(format!("{stem}ish{i}")),
            _ => None,
        }
    };

    let mut sentences = Vec::new();
    for d in 0..docs {
        for s in 0..sentences_per_doc {
            let mut pick = rng.gen_range(0..total);
            let mut ti = 0;
            while pick >= weights[ti] {
                pick -= weights[ti];
                ti += 1;
            }
            let tokens = TEMPLATES[ti]
                .iter()
                .map(|&tag| {
                    let form = match own(tag, rng.gen_range(0..6)) {
                        Some(w) if rng.gen_bool(0.4) => w,
                        _ => shared_words(tag).choose(&mut rng).unwrap().to_string(),
                    };
                    Token::new(form, tag)
                })
                .collect();
            sentences.push(Sentence::new(
                format!("{genre}_doc{d}"),
                format!("{genre}_doc{d}-{}", s + 1),
                tokens,
            ));
        }
    }
    Corpus::new(genre, sentences)
}

/// Corpus with uniformly drawn gold tags and unique forms.
pub fn uniform_corpus(name: &str, tags: &[&str], sentences: usize, len: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sentences = (0..sentences)
        .map(|s| {
            let tokens = (0..len)
                .map(|t| Token::new(format!("{name}-{s}-{t}"), *tags.choose(&mut rng).unwrap()))
                .collect();
            Sentence::new(format!("{name}-doc{}", s / 5), format!("{name}-{s}"), tokens)
        })
        .collect();
    Corpus::new(name, sentences)
}

type Rule = dyn Fn(&Token, u64) -> String + Send + Sync;

/// A tagger defined by a rule over the (gold-annotated) token and a
/// deterministic per-token random value.
pub struct RuleTagger {
    name: String,
    tagset: TagSet,
    seed: u64,
    rule: Box<Rule>,
}

impl RuleTagger {
    pub fn new<F>(name: &str, tags: &[&str], seed: u64, rule: F) -> Self
    where
        F: Fn(&Token, u64) -> String + Send + Sync + 'static,
    {
        RuleTagger {
            name: name.to_string(),
            tagset: TagSet::new(tags.iter().copied()),
            seed,
            rule: Box::new(rule),
        }
    }

    /// Predicts uniformly at random over `tags`.
    pub fn noise(name: &str, tags: &[&str], seed: u64) -> Self {
        let owned: Vec<String> = tags.iter().map(|t| t.to_string()).collect();
        RuleTagger::new(name, tags, seed, move |_, r| owned[(r % owned.len() as u64) as usize].clone())
    }

    /// Correct with probability `accuracy`, otherwise a uniformly drawn wrong tag.
    pub fn noisy_oracle(name: &str, tags: &[&str], accuracy: f64, seed: u64) -> Self {
        let owned: Vec<String> = tags.iter().map(|t| t.to_string()).collect();
        RuleTagger::new(name, tags, seed, move |tok, r| {
            let u = (r >> 11) as f64 / (1u64 << 53) as f64;
            if u < accuracy {
                tok.tag.clone()
            } else {
                let wrong: Vec<&String> = owned.iter().filter(|t| **t != tok.tag).collect();
                wrong[(r % wrong.len() as u64) as usize].clone()
            }
        })
    }
}

impl Tagger for RuleTagger {
    fn name(&self) -> &str {
        &self.name
    }

    fn tagset(&self) -> &TagSet {
        &self.tagset
    }

    fn predict(&self, sentence: &Sentence) -> Vec<String> {
        sentence
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let r = fnv1a(&[
                    self.name.as_bytes(),
                    &self.seed.to_le_bytes(),
                    sentence.doc_id.as_bytes(),
                    sentence.sent_id.as_bytes(),
                    &(i as u64).to_le_bytes(),
                    t.form.as_bytes(),
                ]);
                (self.rule)(t, r)
            })
            .collect()
    }
}

/// Three experts over nine tags split into three groups of three. Expert `k`
/// is right exactly on gold tags of group `k`; elsewhere it answers with a
/// different tag of the gold tag's own group, so every model's output reveals
/// the group and the group reveals which expert to trust. All three outputs
/// differ, so majority vote falls back to the smallest tag of the group.
pub fn disjoint_experts() -> (Vec<&'static str>, Vec<RuleTagger>) {
    const GROUPS: [[&str; 3]; 3] = [["NN", "NNP", "NNS"], ["VB", "VBD", "VBP"], ["JJ", "RB", "UH"]];
    let tags: Vec<&str> = GROUPS.iter().flatten().copied().collect();
    let experts = (0..3)
        .map(|k| {
            RuleTagger::new(&format!("expert{k}"), &tags, 0, move |tok, _| {
                let (g, i) = GROUPS
                    .iter()
                    .enumerate()
                    .find_map(|(g, grp)| grp.iter().position(|t| *t == tok.tag).map(|i| (g, i)))
                    .expect("tag in groups");
                if g == k {
                    tok.tag.clone()
                } else {
                    // Distinct shift per non-expert keeps the three outputs distinct.
                    let shift = if (k + 3 - g) % 3 == 1 { 1 } else { 2 };
                    GROUPS[g][(i + shift) % 3].to_string()
                }
            })
        })
        .collect();
    (tags, experts)
}

/// A corpus where `NN` and `NNP` forms are all lowercase and only gazetteer
/// membership separates them, plus the gazetteer text and a base tagger
/// that answers `NN` for both.
pub fn gazetteer_task(sentences: usize, seed: u64) -> (Corpus, String, RuleTagger) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = (0..40).map(|i| format!("name{i}")).collect();
    let nouns: Vec<String> = (0..40).map(|i| format!("noun{i}")).collect();
    let mut kb = BTreeMap::new();
    for (i, n) in names.iter().enumerate() {
        // Half the entries are stored capitalized so the third lookup variant matters.
        let key = if i % 2 == 0 { n.clone() } else { crate::text::capitalize_first(n) };
        kb.insert(key, if i % 3 == 0 { "Person" } else { "Place" });
    }
    kb.insert("Noun0s".to_string(), "Organization");
    let kb_text: String = kb.iter().map(|(k, v)| format!("{k}\t{v}\n")).collect();

    let sentences = (0..sentences)
        .map(|s| {
            let tokens = (0..6)
                .map(|i| match i {
                    0 => Token::new("the", "DT"),
                    1 | 4 => {
                        if rng.gen_bool(0.5) {
                            Token::new(names.choose(&mut rng).unwrap().clone(), "NNP")
                        } else {
                            Token::new(nouns.choose(&mut rng).unwrap().clone(), "NN")
                        }
                    }
                    2 => Token::new("saw", "VBD"),
                    3 => Token::new("a", "DT"),
                    _ => Token::new(".", "."),
                })
                .collect();
            Sentence::new(format!("gz{}", s / 4), format!("gz-{seed}-{s}"), tokens)
        })
        .collect();
    let base = RuleTagger::new("blind", &["DT", "NN", "VBD", "."], 0, |tok, _| {
        if tok.tag == "NNP" {
            "NN".to_string()
        } else {
            tok.tag.clone()
        }
    });
    (Corpus::new("gazetteer", sentences), kb_text, base)
}
