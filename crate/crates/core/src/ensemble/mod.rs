//! Stacked ensemble: base-model predictions (one-hot per model) plus
//! gazetteer bits become the input of a meta-classifier trained on the
//! target genre's training split.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::codec::{Decoder, Encoder};
use crate::corpus::{vocabulary, Corpus, TagSet};
use crate::error::{Error, Result};
use crate::eval::{evaluate, percent, EvalResult};
use crate::kb::KnowledgeBase;
use crate::tagger::Tagger;

pub mod gbdt;
pub mod layout;

pub use gbdt::{Gbdt, GbdtParams, MetaClassifier, MetaLearner};
pub use layout::FeatureLayout;

const MAGIC: &[u8; 8] = b"STKMETA\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub doc_id: String,
    pub sent_id: String,
    pub position: usize,
}

/// One token's stacked features, stored as the sorted indices of set bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StackedInstance {
    pub active: Vec<u32>,
    pub len: usize,
    pub gold: String,
    pub provenance: Provenance,
}

impl StackedInstance {
    pub fn bits(&self) -> Vec<bool> {
        let mut b = vec![false; self.len];
        for &i in &self.active {
            b[i as usize] = true;
        }
        b
    }
}

#[derive(Debug, Clone)]
pub struct StackedSet {
    pub layout: FeatureLayout,
    pub instances: Vec<StackedInstance>,
}

/// Names of base models trained on the same genre as `corpus`.
pub fn leakage(base_models: &[&dyn Tagger], corpus: &Corpus) -> Vec<String> {
    base_models
        .iter()
        .filter(|m| m.training_genre() == Some(corpus.genre.as_str()))
        .map(|m| m.name().to_string())
        .collect()
}

/// Freezes a layout for `base_models` over `corpus`: tag inventory is the
/// union of the models' tag sets and the corpus gold tags.
pub fn layout_for(
    base_models: &[&dyn Tagger],
    kb: Option<&KnowledgeBase>,
    corpus: &Corpus,
) -> Result<FeatureLayout> {
    let tagset = TagSet::union(
        base_models
            .iter()
            .map(|m| m.tagset())
            .chain(std::iter::once(corpus.tagset())),
    );
    FeatureLayout::new(
        base_models.iter().map(|m| m.name().to_string()).collect(),
        tagset,
        kb.map(|k| k.type_inventory().to_vec()).unwrap_or_default(),
    )
}

pub fn build_instances(
    base_models: &[&dyn Tagger],
    kb: Option<&KnowledgeBase>,
    corpus: &Corpus,
) -> Result<StackedSet> {
    let leaked = leakage(base_models, corpus);
    if !leaked.is_empty() {
        log::warn!(
            "base models {:?} were trained on genre `{}`, the same genre as the meta-training corpus",
            leaked,
            corpus.genre
        );
    }
    let layout = layout_for(base_models, kb, corpus)?;
    let instances = instances_for_layout(&layout, base_models, kb, corpus)?;
    Ok(StackedSet { layout, instances })
}

/// Builds instances against an existing layout, failing on any mismatch.
pub fn instances_for_layout(
    layout: &FeatureLayout,
    base_models: &[&dyn Tagger],
    kb: Option<&KnowledgeBase>,
    corpus: &Corpus,
) -> Result<Vec<StackedInstance>> {
    let mut by_name: Vec<&dyn Tagger> = base_models.to_vec();
    by_name.sort_by(|a, b| a.name().cmp(b.name()));
    let names: Vec<&str> = by_name.iter().map(|m| m.name()).collect();
    if names != layout.model_order() {
        return Err(Error::Layout(format!(
            "base models {:?} do not match layout {:?}",
            names,
            layout.model_order()
        )));
    }
    let kb_types: &[String] = kb.map(|k| k.type_inventory()).unwrap_or(&[]);
    if kb_types != layout.kb_types() {
        return Err(Error::Layout(format!(
            "gazetteer types {:?} do not match layout {:?}",
            kb_types,
            layout.kb_types()
        )));
    }

    let predictions: Vec<Vec<Vec<String>>> = by_name
        .par_iter()
        .map(|m| corpus.sentences.iter().map(|s| m.predict(s)).collect())
        .collect();

    let kb_offset = layout.kb_offset();
    let mut out = Vec::with_capacity(corpus.token_count());
    for (si, sentence) in corpus.sentences.iter().enumerate() {
        for (mi, preds) in predictions.iter().enumerate() {
            if preds[si].len() != sentence.len() {
                return Err(Error::Shape {
                    sent_id: sentence.sent_id.clone(),
                    message: format!(
                        "base model `{}` returned {} tags for {} tokens",
                        names[mi],
                        preds[si].len(),
                        sentence.len()
                    ),
                });
            }
        }
        for (ti, token) in sentence.tokens.iter().enumerate() {
            let mut active = Vec::with_capacity(predictions.len() + 3);
            for (mi, preds) in predictions.iter().enumerate() {
                let tag = &preds[si][ti];
                let col = layout.model_column(mi, tag).ok_or_else(|| {
                    Error::Layout(format!(
                        "base model `{}` predicted `{tag}`, which is not in the frozen tag inventory",
                        names[mi]
                    ))
                })?;
                active.push(col as u32);
            }
            if let Some(kb) = kb {
                active.extend(kb.active_bits(&token.form).into_iter().map(|b| (kb_offset + b) as u32));
            }
            out.push(StackedInstance {
                active,
                len: layout.total_len(),
                gold: token.tag.clone(),
                provenance: Provenance {
                    doc_id: sentence.doc_id.clone(),
                    sent_id: sentence.sent_id.clone(),
                    position: ti,
                },
            });
        }
    }
    Ok(out)
}

/// A trained stacking classifier together with its frozen layout.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaModel<C = Gbdt> {
    layout: FeatureLayout,
    classes: TagSet,
    classifier: C,
}

fn check_instances(layout: &FeatureLayout, instances: &[StackedInstance]) -> Result<()> {
    let block = layout.model_block_len();
    let n_models = layout.model_order().len();
    for (i, inst) in instances.iter().enumerate() {
        if inst.len != layout.total_len() {
            return Err(Error::Layout(format!(
                "instance {i} has length {} but the layout has {}",
                inst.len,
                layout.total_len()
            )));
        }
        if inst.active.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Layout(format!("instance {i} has unsorted or repeated bits")));
        }
        let mut per_block = vec![0usize; n_models];
        for &b in &inst.active {
            let b = b as usize;
            if b >= inst.len {
                return Err(Error::Layout(format!("instance {i} sets bit {b} beyond its length")));
            }
            if b < layout.kb_offset() {
                per_block[b / block] += 1;
            }
        }
        if per_block.iter().any(|&c| c != 1) {
            return Err(Error::Layout(format!(
                "instance {i} does not have exactly one bit per model block"
            )));
        }
    }
    Ok(())
}

pub fn train_meta(set: &StackedSet, params: &GbdtParams) -> Result<MetaModel<Gbdt>> {
    train_meta_with(set, params)
}

/// Trains any [`MetaLearner`] on a stacked set.
pub fn train_meta_with<L: MetaLearner>(set: &StackedSet, learner: &L) -> Result<MetaModel<L::Model>> {
    if set.instances.is_empty() {
        return Err(Error::Empty("no stacked instances to train on".into()));
    }
    check_instances(&set.layout, &set.instances)?;
    let classes = TagSet::new(set.instances.iter().map(|i| i.gold.clone()));
    let rows: Vec<&[u32]> = set.instances.iter().map(|i| i.active.as_slice()).collect();
    let labels: Vec<usize> = set
        .instances
        .iter()
        .map(|i| classes.index_of(&i.gold).expect("gold in classes"))
        .collect();
    let classifier = learner.fit(&rows, &labels, classes.len(), set.layout.total_len())?;
    Ok(MetaModel {
        layout: set.layout.clone(),
        classes,
        classifier,
    })
}

impl<C: MetaClassifier> MetaModel<C> {
    pub fn layout(&self) -> &FeatureLayout {
        &self.layout
    }

    pub fn classes(&self) -> &TagSet {
        &self.classes
    }

    pub fn classifier(&self) -> &C {
        &self.classifier
    }

    /// Argmax over class scores; ties go to the smallest tag.
    pub fn predict_active(&self, active: &[u32]) -> &str {
        let mut sorted;
        let active = if active.windows(2).all(|w| w[0] < w[1]) {
            active
        } else {
            sorted = active.to_vec();
            sorted.sort_unstable();
            sorted.dedup();
            &sorted
        };
        let scores = self.classifier.scores(active);
        let mut best = 0;
        for (i, &s) in scores.iter().enumerate().skip(1) {
            if s > scores[best] {
                best = i;
            }
        }
        self.classes.tag(best)
    }

    /// Tags every sentence of `corpus`. Base models and gazetteer must match
    /// the layout frozen at training time.
    pub fn predict(
        &self,
        base_models: &[&dyn Tagger],
        kb: Option<&KnowledgeBase>,
        corpus: &Corpus,
    ) -> Result<Vec<Vec<String>>> {
        let instances = instances_for_layout(&self.layout, base_models, kb, corpus)?;
        let mut it = instances.iter();
        Ok(corpus
            .sentences
            .iter()
            .map(|s| {
                (0..s.len())
                    .map(|_| self.predict_active(&it.next().expect("instance per token").active).to_string())
                    .collect()
            })
            .collect())
    }
}

pub fn predict_meta<C: MetaClassifier>(
    meta: &MetaModel<C>,
    base_models: &[&dyn Tagger],
    kb: Option<&KnowledgeBase>,
    corpus: &Corpus,
) -> Result<Vec<Vec<String>>> {
    meta.predict(base_models, kb, corpus)
}

impl MetaModel<Gbdt> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new(MAGIC, FORMAT_VERSION);
        enc.strs(self.layout.model_order());
        enc.strs(self.layout.tagset().tags());
        enc.strs(self.layout.kb_types());
        enc.strs(self.classes.tags());
        gbdt::encode(&self.classifier, &mut enc);
        enc.finish()
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut dec = Decoder::new(data, MAGIC, FORMAT_VERSION)?;
        let models = dec.strs()?;
        let tags = dec.strs()?;
        let kb_types = dec.strs()?;
        let classes = dec.strs()?;
        let classifier = gbdt::decode(&mut dec)?;
        dec.finish()?;
        let layout = FeatureLayout::new(models.clone(), TagSet::new(tags.iter().cloned()), kb_types)
            .map_err(|e| Error::Corrupt(e.to_string()))?;
        if layout.model_order() != models.as_slice() || layout.tagset().tags() != tags.as_slice() {
            return Err(Error::Corrupt("layout lists are not in canonical order".into()));
        }
        let classes_set = TagSet::new(classes.iter().cloned());
        if classes_set.tags() != classes.as_slice()
            || classes_set.len() != classifier.n_classes()
            || classifier.n_features() != layout.total_len()
        {
            return Err(Error::Corrupt("classifier does not match its layout".into()));
        }
        Ok(MetaModel {
            layout,
            classes: classes_set,
            classifier,
        })
    }
}

pub fn save_meta(meta: &MetaModel<Gbdt>, path: &Path) -> Result<()> {
    fs::write(path, meta.to_bytes())?;
    Ok(())
}

pub fn load_meta(path: &Path) -> Result<MetaModel<Gbdt>> {
    MetaModel::from_bytes(&fs::read(path)?)
}

/// Per-token modal tag across base models; ties go to the smallest tag.
pub fn majority_vote(base_models: &[&dyn Tagger], corpus: &Corpus) -> Result<Vec<Vec<String>>> {
    if base_models.is_empty() {
        return Err(Error::Invalid("majority vote needs at least one model".into()));
    }
    let predictions: Vec<Vec<Vec<String>>> = base_models
        .iter()
        .map(|m| corpus.sentences.iter().map(|s| m.predict(s)).collect())
        .collect();
    let mut out = Vec::with_capacity(corpus.sentence_count());
    for (si, sentence) in corpus.sentences.iter().enumerate() {
        for (m, p) in base_models.iter().zip(&predictions) {
            if p[si].len() != sentence.len() {
                return Err(Error::Shape {
                    sent_id: sentence.sent_id.clone(),
                    message: format!("base model `{}` returned {} tags", m.name(), p[si].len()),
                });
            }
        }
        let tags = (0..sentence.len())
            .map(|ti| {
                let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
                for p in &predictions {
                    *counts.entry(p[si][ti].as_str()).or_default() += 1;
                }
                let mut best: Option<(&str, usize)> = None;
                for (tag, n) in counts {
                    if best.is_none_or(|(_, b)| n > b) {
                        best = Some((tag, n));
                    }
                }
                best.expect("at least one model").0.to_string()
            })
            .collect();
        out.push(tags);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    /// `None` for the full ensemble.
    pub removed: Option<String>,
    pub result: EvalResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn full(&self) -> &AblationRow {
        &self.rows[0]
    }

    pub fn without(&self, model: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.removed.as_deref() == Some(model))
    }

    /// `removed_model<TAB>per_token<TAB>full_sentence`; the full ensemble is `none`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("removed_model\tper_token\tfull_sentence\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{}\t{}\t{}",
                r.removed.as_deref().unwrap_or("none"),
                percent(r.result.correct, r.result.token_count),
                percent(r.result.perfect_sentences, r.result.sentence_count)
            );
        }
        out
    }
}

/// Retrains the meta-learner from scratch once with all base models and
/// once without each of them, scoring every variant on `test`.
pub fn ablate(
    base_models: &[&dyn Tagger],
    kb: Option<&KnowledgeBase>,
    train: &Corpus,
    test: &Corpus,
    params: &GbdtParams,
) -> Result<AblationReport> {
    if base_models.len() < 2 {
        return Err(Error::Invalid("ablation needs at least two base models".into()));
    }
    let mut names: Vec<&str> = base_models.iter().map(|m| m.name()).collect();
    names.sort();
    let variants: Vec<Option<&str>> = std::iter::once(None).chain(names.iter().map(|n| Some(*n))).collect();

    let mut known: HashSet<String> = vocabulary(train);
    for m in base_models {
        if let Some(v) = m.vocabulary() {
            known.extend(v.iter().cloned());
        }
    }

    let rows = variants
        .par_iter()
        .map(|removed| -> Result<AblationRow> {
            let subset: Vec<&dyn Tagger> = base_models
                .iter()
                .copied()
                .filter(|m| Some(m.name()) != *removed)
                .collect();
            let set = build_instances(&subset, kb, train)?;
            let meta = train_meta(&set, params)?;
            let pred = meta.predict(&subset, kb, test)?;
            Ok(AblationRow {
                removed: removed.map(str::to_string),
                result: evaluate(test, &pred, &known)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AblationReport { rows })
}
