use crate::corpus::TagSet;
use crate::error::{Error, Result};

/// Column layout of the stacked feature vector:
/// one one-hot block per base model (in name order) over a shared tag
/// inventory, followed by the three gazetteer blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureLayout {
    model_order: Vec<String>,
    tagset: TagSet,
    kb_types: Vec<String>,
}

impl FeatureLayout {
    pub fn new(mut model_names: Vec<String>, tagset: TagSet, kb_types: Vec<String>) -> Result<Self> {
        if model_names.is_empty() {
            return Err(Error::Layout("at least one base model is required".into()));
        }
        model_names.sort();
        if let Some(w) = model_names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Layout(format!("duplicate base model name `{}`", w[0])));
        }
        Ok(FeatureLayout {
            model_order: model_names,
            tagset,
            kb_types,
        })
    }

    pub fn model_order(&self) -> &[String] {
        &self.model_order
    }

    pub fn tagset(&self) -> &TagSet {
        &self.tagset
    }

    pub fn kb_types(&self) -> &[String] {
        &self.kb_types
    }

    pub fn model_block_len(&self) -> usize {
        self.tagset.len()
    }

    pub fn kb_block_len(&self) -> usize {
        3 * self.kb_types.len()
    }

    pub fn kb_offset(&self) -> usize {
        self.model_order.len() * self.tagset.len()
    }

    pub fn total_len(&self) -> usize {
        self.kb_offset() + self.kb_block_len()
    }

    /// Column of `tag` within the block of the `model`-th base model.
    pub fn model_column(&self, model: usize, tag: &str) -> Option<usize> {
        self.tagset
            .index_of(tag)
            .map(|t| model * self.tagset.len() + t)
    }

    /// Human-readable column names, e.g. `news:NN` or `kb:lower:Person`.
    pub fn column_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.total_len());
        for m in &self.model_order {
            for t in self.tagset.tags() {
                out.push(format!("{m}:{t}"));
            }
        }
        for variant in ["asis", "lower", "cap"] {
            for ty in &self.kb_types {
                out.push(format!("kb:{variant}:{ty}"));
            }
        }
        out
    }
}
