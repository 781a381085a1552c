//! Greedy left-to-right averaged perceptron.
//!
//! Weights are sparse per feature. Averaging uses the usual timestamp trick:
//! each (feature, tag) weight keeps the running sum of its past values and the
//! token counter at which it last changed, so the final average over every
//! per-token weight snapshot is computed without touching untouched weights.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::features::extract_features;
use super::Tagger;
use crate::codec::{Decoder, Encoder};
use crate::corpus::{vocabulary, Corpus, Sentence, TagSet};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"STKTAGR\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaggerParams {
    pub epochs: u32,
    pub seed: u64,
}

impl Default for TaggerParams {
    fn default() -> Self {
        TaggerParams { epochs: 10, seed: 1 }
    }
}

/// A trained per-genre tagger.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggerModel {
    /// feature key -> (tag index, averaged weight), sorted by tag index, zeros dropped.
    weights: HashMap<String, Vec<(u32, f64)>>,
    tagset: TagSet,
    train_vocab: HashSet<String>,
    genre: String,
    params: TaggerParams,
}

/// Sentence visiting order for every epoch.
pub fn epoch_orders(sentences: usize, epochs: u32, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..epochs)
        .map(|_| {
            let mut order: Vec<usize> = (0..sentences).collect();
            order.shuffle(&mut rng);
            order
        })
        .collect()
}

#[derive(Default)]
struct Accum {
    weight: f64,
    total: f64,
    stamp: u64,
}

/// Training-time weights, sparse over tags.
#[derive(Default)]
struct TrainWeights {
    table: HashMap<String, Vec<(u32, Accum)>>,
}

impl TrainWeights {
    fn score_into(&self, keys: &[String], scores: &mut [f64]) {
        scores.iter_mut().for_each(|s| *s = 0.0);
        for k in keys {
            if let Some(entries) = self.table.get(k) {
                for (c, a) in entries {
                    scores[*c as usize] += a.weight;
                }
            }
        }
    }

    /// `now` is the number of tokens processed before the current one.
    fn bump(&mut self, key: &str, class: u32, delta: f64, now: u64) {
        let entries = match self.table.get_mut(key) {
            Some(e) => e,
            None => self.table.entry(key.to_string()).or_default(),
        };
        let idx = match entries.iter().position(|(c, _)| *c == class) {
            Some(i) => i,
            None => {
                entries.push((class, Accum::default()));
                entries.len() - 1
            }
        };
        let a = &mut entries[idx].1;
        a.total += (now - a.stamp) as f64 * a.weight;
        a.stamp = now;
        a.weight += delta;
    }

    fn average(self, seen: u64) -> HashMap<String, Vec<(u32, f64)>> {
        let mut out = HashMap::with_capacity(self.table.len());
        for (key, entries) in self.table {
            let mut avg: Vec<(u32, f64)> = entries
                .into_iter()
                .map(|(c, a)| {
                    let total = a.total + (seen - a.stamp) as f64 * a.weight;
                    (c, total / seen as f64)
                })
                .filter(|(_, w)| *w != 0.0)
                .collect();
            if !avg.is_empty() {
                avg.sort_by_key(|(c, _)| *c);
                out.insert(key, avg);
            }
        }
        out
    }
}

fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Trains an averaged perceptron on `corpus`.
pub fn train(corpus: &Corpus, params: TaggerParams) -> Result<TaggerModel> {
    if corpus.token_count() == 0 {
        return Err(Error::Empty(format!("training corpus `{}` has no tokens", corpus.genre)));
    }
    if params.epochs == 0 {
        return Err(Error::Invalid("epochs must be at least 1".into()));
    }
    let tagset = corpus.tagset().clone();
    let gold: Vec<Vec<u32>> = corpus
        .sentences
        .iter()
        .map(|s| {
            s.tokens
                .iter()
                .map(|t| tagset.index_of(&t.tag).expect("tag in corpus tagset") as u32)
                .collect()
        })
        .collect();

    let mut weights = TrainWeights::default();
    let mut scores = vec![0.0; tagset.len()];
    let mut seen: u64 = 0;
    for (epoch, order) in epoch_orders(corpus.sentence_count(), params.epochs, params.seed)
        .into_iter()
        .enumerate()
    {
        let mut correct = 0usize;
        for si in order {
            let sentence = &corpus.sentences[si];
            let mut history: Vec<String> = Vec::with_capacity(sentence.len());
            for (i, &truth) in gold[si].iter().enumerate() {
                let feats = extract_features(sentence, i, &history)?;
                weights.score_into(feats.keys(), &mut scores);
                let guess = argmax(&scores) as u32;
                if guess != truth {
                    for k in feats.keys() {
                        weights.bump(k, truth, 1.0, seen);
                        weights.bump(k, guess, -1.0, seen);
                    }
                } else {
                    correct += 1;
                }
                history.push(tagset.tag(guess as usize).to_string());
                seen += 1;
            }
        }
        log::debug!(
            "{}: epoch {} training accuracy {:.4}",
            corpus.genre,
            epoch + 1,
            correct as f64 / corpus.token_count() as f64
        );
    }

    Ok(TaggerModel {
        weights: weights.average(seen),
        tagset,
        train_vocab: vocabulary(corpus),
        genre: corpus.genre.clone(),
        params,
    })
}

impl TaggerModel {
    /// A model with no weights; predicts the lexicographically smallest tag.
    pub fn empty(genre: &str, tagset: TagSet) -> Self {
        TaggerModel {
            weights: HashMap::new(),
            tagset,
            train_vocab: HashSet::new(),
            genre: genre.to_string(),
            params: TaggerParams::default(),
        }
    }

    pub fn genre(&self) -> &str {
        &self.genre
    }

    pub fn params(&self) -> TaggerParams {
        self.params
    }

    pub fn train_vocab(&self) -> &HashSet<String> {
        &self.train_vocab
    }

    /// Averaged weight of `(feature, tag)`, zero when absent.
    pub fn weight(&self, feature: &str, tag: &str) -> f64 {
        let Some(c) = self.tagset.index_of(tag) else {
            return 0.0;
        };
        self.weights
            .get(feature)
            .and_then(|e| e.iter().find(|(t, _)| *t as usize == c))
            .map_or(0.0, |(_, w)| *w)
    }

    pub fn feature_count(&self) -> usize {
        self.weights.len()
    }

    /// Greedy left-to-right decoding; ties go to the smallest tag.
    pub fn predict(&self, sentence: &Sentence) -> Vec<String> {
        let mut scores = vec![0.0; self.tagset.len()];
        let mut history: Vec<String> = Vec::with_capacity(sentence.len());
        for i in 0..sentence.len() {
            let feats = extract_features(sentence, i, &history).expect("index and history in range");
            scores.iter_mut().for_each(|s| *s = 0.0);
            for k in feats.keys() {
                if let Some(entries) = self.weights.get(k) {
                    for (c, w) in entries {
                        scores[*c as usize] += w;
                    }
                }
            }
            history.push(self.tagset.tag(argmax(&scores)).to_string());
        }
        history
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new(MAGIC, FORMAT_VERSION);
        enc.str(&self.genre);
        enc.u32(self.params.epochs);
        enc.u64(self.params.seed);
        enc.strs(self.tagset.tags());
        let mut vocab: Vec<&String> = self.train_vocab.iter().collect();
        vocab.sort();
        enc.strs(&vocab);
        let mut keys: Vec<&String> = self.weights.keys().collect();
        keys.sort();
        enc.u64(keys.len() as u64);
        for k in keys {
            enc.str(k);
            let entries = &self.weights[k];
            enc.u64(entries.len() as u64);
            for (c, w) in entries {
                enc.u32(*c);
                enc.f64(*w);
            }
        }
        enc.finish()
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut dec = Decoder::new(data, MAGIC, FORMAT_VERSION)?;
        let genre = dec.str()?;
        let epochs = dec.u32()?;
        let seed = dec.u64()?;
        let tag_list = dec.strs()?;
        let tagset = TagSet::new(tag_list.iter().cloned());
        if tagset.tags() != tag_list.as_slice() {
            return Err(Error::Corrupt("tag list is not sorted and unique".into()));
        }
        let train_vocab: HashSet<String> = dec.strs()?.into_iter().collect();
        let n = dec.len(16)?;
        let mut weights = HashMap::with_capacity(n);
        for _ in 0..n {
            let key = dec.str()?;
            let m = dec.len(12)?;
            let mut entries = Vec::with_capacity(m);
            for _ in 0..m {
                let c = dec.u32()?;
                if c as usize >= tagset.len() {
                    return Err(Error::Corrupt(format!("tag index {c} out of range")));
                }
                entries.push((c, dec.f64()?));
            }
            weights.insert(key, entries);
        }
        dec.finish()?;
        Ok(TaggerModel {
            weights,
            tagset,
            train_vocab,
            genre,
            params: TaggerParams { epochs, seed },
        })
    }
}

pub fn save_model(model: &TaggerModel, path: &Path) -> Result<()> {
    fs::write(path, model.to_bytes())?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<TaggerModel> {
    TaggerModel::from_bytes(&fs::read(path)?)
}

impl Tagger for TaggerModel {
    fn name(&self) -> &str {
        &self.genre
    }

    fn tagset(&self) -> &TagSet {
        &self.tagset
    }

    fn predict(&self, sentence: &Sentence) -> Vec<String> {
        TaggerModel::predict(self, sentence)
    }

    fn training_genre(&self) -> Option<&str> {
        Some(&self.genre)
    }

    fn vocabulary(&self) -> Option<&HashSet<String>> {
        Some(&self.train_vocab)
    }
}
