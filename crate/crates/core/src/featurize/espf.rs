//! Subword vocabularies and greedy longest-match partitioning.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use super::tables::{ESPF_DRUG_TSV, ESPF_PROTEIN_TSV};
use super::{FeatureVector, TokenSequence};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SubwordVocabulary {
    entries: Vec<String>,
    frequencies: Vec<u64>,
    index: HashMap<String, usize>,
    longest: usize,
}

impl SubwordVocabulary {
    /// One `subword<TAB>frequency` entry per line; line order is the index.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        let mut frequencies = Vec::new();
        let mut index = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (word, freq) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(lineno + 1, "expected `subword<TAB>frequency`"))?;
            if word.is_empty() {
                return Err(Error::parse(lineno + 1, "empty subword"));
            }
            let freq: u64 = freq
                .trim()
                .parse()
                .map_err(|_| Error::parse(lineno + 1, format!("bad frequency `{freq}`")))?;
            if index.insert(word.to_string(), entries.len()).is_some() {
                return Err(Error::parse(lineno + 1, format!("duplicate subword `{word}`")));
            }
            entries.push(word.to_string());
            frequencies.push(freq);
        }
        if entries.is_empty() {
            return Err(Error::VocabularyMissing("vocabulary has no entries".into()));
        }
        let longest = entries.iter().map(|e| e.chars().count()).max().unwrap_or(1);
        Ok(Self {
            entries,
            frequencies,
            index,
            longest,
        })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|_| Error::VocabularyMissing(path.display().to_string()))?;
        Self::parse(&text)
    }

    pub fn drug() -> Arc<Self> {
        static V: OnceLock<Arc<SubwordVocabulary>> = OnceLock::new();
        V.get_or_init(|| Arc::new(Self::parse(ESPF_DRUG_TSV).expect("shipped drug vocabulary")))
            .clone()
    }

    pub fn protein() -> Arc<Self> {
        static V: OnceLock<Arc<SubwordVocabulary>> = OnceLock::new();
        V.get_or_init(|| Arc::new(Self::parse(ESPF_PROTEIN_TSV).expect("shipped protein vocabulary")))
            .clone()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn word(&self, id: usize) -> &str {
        &self.entries[id]
    }

    pub fn frequency(&self, id: usize) -> u64 {
        self.frequencies[id]
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// Greedy longest-match split. Characters covered by no entry become
    /// single-character pieces with `None` id.
    pub fn segment<'s>(&self, text: &'s str) -> Vec<(&'s str, Option<usize>)> {
        let bounds: Vec<usize> = text
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(text.len()))
            .collect();
        let mut out = Vec::new();
        let mut k = 0;
        while k + 1 < bounds.len() {
            let max_span = self.longest.min(bounds.len() - 1 - k);
            let mut found = None;
            for span in (1..=max_span).rev() {
                let piece = &text[bounds[k]..bounds[k + span]];
                if let Some(id) = self.id(piece) {
                    found = Some((span, piece, id));
                    break;
                }
            }
            match found {
                Some((span, piece, id)) => {
                    out.push((piece, Some(id)));
                    k += span;
                }
                None => {
                    out.push((&text[bounds[k]..bounds[k + 1]], None));
                    k += 1;
                }
            }
        }
        out
    }

    /// Binary presence vector over the vocabulary.
    pub fn presence(&self, name: &'static str, text: &str) -> FeatureVector {
        let mut v = vec![0.0; self.len()];
        for (_, id) in self.segment(text) {
            if let Some(id) = id {
                v[id] = 1.0;
            }
        }
        FeatureVector::new(name, v)
    }

    pub fn pad_id(&self) -> usize {
        self.len()
    }

    pub fn unknown_id(&self) -> usize {
        self.len() + 1
    }

    pub fn tokens(&self, text: &str, max_len: usize) -> TokenSequence {
        let mut ids: Vec<usize> = self
            .segment(text)
            .into_iter()
            .map(|(_, id)| id.unwrap_or(self.unknown_id()))
            .take(max_len)
            .collect();
        let real = ids.len();
        ids.resize(max_len, self.pad_id());
        let mut mask = vec![false; max_len];
        mask[..real].fill(true);
        TokenSequence {
            token_ids: ids,
            mask,
            max_len,
            vocab_size: self.len() + 2,
        }
    }
}

pub const ESPF_DRUG_DIM: usize = 2586;
pub const ESPF_PROTEIN_DIM: usize = 4114;

pub fn espf_drug(smiles: &str) -> FeatureVector {
    SubwordVocabulary::drug().presence("ESPF", smiles.trim())
}

pub fn espf_protein(seq: &str) -> FeatureVector {
    SubwordVocabulary::protein().presence("ESPF", &seq.trim().to_ascii_uppercase())
}

pub fn espf_tokens_drug(smiles: &str, max_len: usize) -> TokenSequence {
    SubwordVocabulary::drug().tokens(smiles.trim(), max_len)
}

pub fn espf_tokens_protein(seq: &str, max_len: usize) -> TokenSequence {
    SubwordVocabulary::protein().tokens(&seq.trim().to_ascii_uppercase(), max_len)
}
