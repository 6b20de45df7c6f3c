//! Preprocessing stage: raw SMILES / sequences / structures to fixed-width
//! vectors, one-hot grids, subword token sequences and featured graphs.

pub mod drug;
pub mod espf;
pub mod protein;
pub mod registry;
pub mod tables;

pub use espf::SubwordVocabulary;
pub use registry::{FeatureKind, FeaturizerId};

use std::sync::Arc;

use ndarray::Array2;

use crate::molparse::{EntityGraph, ProteinStructure};

/// Fixed-width descriptor or fingerprint.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub name: &'static str,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(name: &'static str, values: Vec<f64>) -> Self {
        Self { name, values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Padded subword token ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenSequence {
    pub token_ids: Vec<usize>,
    pub mask: Vec<bool>,
    pub max_len: usize,
    /// Vocabulary size including the padding and unknown tokens.
    pub vocab_size: usize,
}

impl TokenSequence {
    pub fn real_len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Output of any featurizer.
#[derive(Clone, Debug, PartialEq)]
pub enum Features {
    Vector(Arc<Vec<f64>>),
    /// One-hot grid, `channels x positions`.
    Grid(Arc<Array2<f64>>),
    Tokens(Arc<TokenSequence>),
    Graph(Arc<EntityGraph>),
}

impl Features {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Features::Vector(_) => "vector",
            Features::Grid(_) => "grid",
            Features::Tokens(_) => "tokens",
            Features::Graph(_) => "graph",
        }
    }
}

/// Raw molecular entity as read from a dataset row.
#[derive(Clone, Debug)]
pub enum Entity {
    Drug(String),
    Protein {
        sequence: String,
        structure: Option<Arc<ProteinStructure>>,
        /// Identifier of the structure (PDB id), used in cache keys.
        structure_id: Option<String>,
    },
}

impl Entity {
    pub fn drug(smiles: impl Into<String>) -> Self {
        Entity::Drug(smiles.into())
    }

    pub fn protein(sequence: impl Into<String>) -> Self {
        Entity::Protein {
            sequence: sequence.into(),
            structure: None,
            structure_id: None,
        }
    }

    pub fn with_structure(sequence: impl Into<String>, id: impl Into<String>, s: ProteinStructure) -> Self {
        Entity::Protein {
            sequence: sequence.into(),
            structure: Some(Arc::new(s)),
            structure_id: Some(id.into()),
        }
    }

    /// Text identifying this entity for featurization caching.
    pub fn cache_key(&self) -> String {
        match self {
            Entity::Drug(s) => s.clone(),
            Entity::Protein {
                sequence,
                structure_id,
                ..
            } => match structure_id {
                Some(id) => format!("{sequence}\u{1f}{id}"),
                None => sequence.clone(),
            },
        }
    }

    pub fn text(&self) -> &str {
        match self {
            Entity::Drug(s) => s,
            Entity::Protein { sequence, .. } => sequence,
        }
    }
}
