//! Gazetteer lookups producing n-hot entity-type features.
//!
//! Each token is looked up three times: as-is, lowercased and with its first
//! character uppercased. Each lookup fills its own block of
//! `type_inventory.len()` bits, so the vector records which casing matched.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::text;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeBase {
    /// surface -> sorted type indices into `types`
    entries: BTreeMap<String, Vec<usize>>,
    types: Vec<String>,
}

/// Parses `surface<TAB>Type1,Type2,...` lines. Surfaces containing whitespace
/// are skipped with a warning; only single-token lookups are supported.
pub fn load_kb(text: &str) -> Result<KnowledgeBase> {
    let mut raw: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut skipped = 0usize;
    for (i, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let (surface, types) = line.split_once('\t').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: "expected `surface<TAB>types`".into(),
        })?;
        let types: BTreeSet<String> = types
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect();
        if types.is_empty() {
            return Err(Error::Parse {
                line: i + 1,
                message: "empty entity type list".into(),
            });
        }
        if surface.is_empty() || surface.chars().any(char::is_whitespace) {
            skipped += 1;
            continue;
        }
        raw.entry(surface.to_string()).or_default().extend(types);
    }
    if skipped > 0 {
        log::warn!("ignored {skipped} multiword or empty gazetteer entries");
    }
    Ok(KnowledgeBase::from_entries(raw))
}

impl KnowledgeBase {
    pub fn from_entries(raw: BTreeMap<String, BTreeSet<String>>) -> Self {
        let types: Vec<String> = raw
            .values()
            .flatten()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let entries = raw
            .into_iter()
            .map(|(k, ts)| {
                let idx = ts
                    .iter()
                    .map(|t| types.binary_search(t).expect("type in inventory"))
                    .collect();
                (k, idx)
            })
            .collect();
        KnowledgeBase { entries, types }
    }

    pub fn type_inventory(&self) -> &[String] {
        &self.types
    }

    pub fn entry_count(&self) -> usize {
        self.entries.len()
    }

    pub fn types_of(&self, surface: &str) -> Vec<&str> {
        self.entries
            .get(surface)
            .map(|ix| ix.iter().map(|&i| self.types[i].as_str()).collect())
            .unwrap_or_default()
    }

    /// Length of every feature vector this KB produces.
    pub fn feature_len(&self) -> usize {
        3 * self.types.len()
    }

    /// Indices of the set bits of [`entity_features`], ascending.
    pub fn active_bits(&self, token: &str) -> Vec<usize> {
        let n = self.types.len();
        let (a, b, c) = lookup_variants(token);
        let mut bits = Vec::new();
        for (block, variant) in [a, b, c].iter().enumerate() {
            if let Some(ix) = self.entries.get(variant) {
                bits.extend(ix.iter().map(|&t| block * n + t));
            }
        }
        bits
    }

    /// Per-type entry counts, in inventory order.
    pub fn type_counts(&self) -> Vec<(String, usize)> {
        let mut counts = vec![0usize; self.types.len()];
        for ix in self.entries.values() {
            for &t in ix {
                counts[t] += 1;
            }
        }
        self.types.iter().cloned().zip(counts).collect()
    }
}

/// The three lookup keys: as-is, lowercased, first character uppercased.
pub fn lookup_variants(token: &str) -> (String, String, String) {
    (
        token.to_string(),
        text::lowercase_simple(token),
        text::capitalize_first(token),
    )
}

/// Binary vector of length `3 * |types|`, blocks in variant order then type order.
pub fn entity_features(kb: &KnowledgeBase, token: &str) -> Vec<bool> {
    let mut bits = vec![false; kb.feature_len()];
    for i in kb.active_bits(token) {
        bits[i] = true;
    }
    bits
}
