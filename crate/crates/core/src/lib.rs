//! POS tagging across web genres: per-genre averaged-perceptron base
//! taggers, a gradient-boosted stacking ensemble with gazetteer features,
//! and the evaluation tooling to compare them (per-token and full-sentence
//! accuracy, known/unknown splits, confusion pairs, error categories,
//! leave-one-model-out ablation).

mod codec;
pub mod corpus;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod kb;
pub mod pipeline;
pub mod synthetic;
pub mod tagger;
pub mod text;

pub use corpus::{Corpus, Sentence, SplitSpec, SplitUnit, TagSet, Token};
pub use ensemble::{FeatureLayout, GbdtParams, MetaModel, StackedInstance};
pub use error::{Error, Result};
pub use eval::EvalResult;
pub use kb::KnowledgeBase;
pub use tagger::{Tagger, TaggerModel, TaggerParams};
