//! Base taggers. Anything implementing [`Tagger`] can feed the ensemble:
//! the in-crate averaged perceptron, or predictions produced by an external
//! tool and loaded through [`PrecomputedTagger`].

use std::collections::{HashMap, HashSet};

use crate::corpus::{check_shape, Corpus, Sentence, TagSet};
use crate::error::Result;

pub mod features;
pub mod perceptron;

pub use features::{extract_features, FeatureSet};
pub use perceptron::{load_model, save_model, train, TaggerModel, TaggerParams};

/// Train/predict contract shared by all base taggers.
///
/// `predict` returns one tag per token, each a member of `tagset()`.
pub trait Tagger: Send + Sync {
    fn name(&self) -> &str;

    fn tagset(&self) -> &TagSet;

    fn predict(&self, sentence: &Sentence) -> Vec<String>;

    /// Genre of the training data, when known.
    fn training_genre(&self) -> Option<&str> {
        None
    }

    /// Training vocabulary, when known; used for known/unknown analysis.
    fn vocabulary(&self) -> Option<&HashSet<String>> {
        None
    }
}

/// Serves tag sequences computed elsewhere, keyed by `(doc_id, sent_id)`.
/// Sentences it has never seen get an empty prediction, which downstream
/// shape checks reject.
#[derive(Debug, Clone)]
pub struct PrecomputedTagger {
    name: String,
    tagset: TagSet,
    by_id: HashMap<(String, String), Vec<String>>,
}

impl PrecomputedTagger {
    pub fn new(name: &str, corpus: &Corpus, predictions: &[Vec<String>]) -> Result<Self> {
        check_shape(corpus, predictions)?;
        let tagset = TagSet::new(predictions.iter().flatten().cloned());
        let by_id = corpus
            .sentences
            .iter()
            .zip(predictions)
            .map(|(s, p)| ((s.doc_id.clone(), s.sent_id.clone()), p.clone()))
            .collect();
        Ok(PrecomputedTagger {
            name: name.to_string(),
            tagset,
            by_id,
        })
    }
}

impl Tagger for PrecomputedTagger {
    fn name(&self) -> &str {
        &self.name
    }

    fn tagset(&self) -> &TagSet {
        &self.tagset
    }

    fn predict(&self, sentence: &Sentence) -> Vec<String> {
        self.by_id
            .get(&(sentence.doc_id.clone(), sentence.sent_id.clone()))
            .cloned()
            .unwrap_or_default()
    }
}

/// Runs `tagger` over every sentence of `corpus`.
pub fn predict_corpus(tagger: &dyn Tagger, corpus: &Corpus) -> Vec<Vec<String>> {
    corpus.sentences.iter().map(|s| tagger.predict(s)).collect()
}
