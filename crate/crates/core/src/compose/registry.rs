//! Named encoders: featurizer plus encode layer plus default hyperparameters.

use crate::encode::{sequence, EncoderParams, LayerKind};
use crate::error::{Error, Result};
use crate::featurize::registry::Role;
use crate::featurize::FeaturizerId;
use crate::interact::InteractionKind;

/// Width assumed for an extension encoder slot when no adapter declares one.
pub const DEFAULT_EXTENSION_DIM: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputType {
    Sequence,
    Graph2d,
    Graph3d,
}

impl InputType {
    pub fn name(&self) -> &'static str {
        match self {
            InputType::Sequence => "sequence",
            InputType::Graph2d => "graph_2d",
            InputType::Graph3d => "graph_3d",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncoderEntry {
    pub name: &'static str,
    pub role: Role,
    pub input: InputType,
    pub featurizer: FeaturizerId,
    pub layer: LayerKind,
}

impl EncoderEntry {
    /// Hyperparameters applied before the user's overrides.
    pub fn defaults(&self) -> EncoderParams {
        match (self.layer, self.role) {
            (LayerKind::Cnn, Role::Protein) => EncoderParams {
                kernels: Some(sequence::CNN_PROTEIN_KERNELS.to_vec()),
                ..Default::default()
            },
            _ => EncoderParams::default(),
        }
    }

    /// Entry with the adapter enrichment stripped (e.g. GCN_ESM -> GCN).
    pub fn base(&self) -> Option<&'static EncoderEntry> {
        let base = self.featurizer.base()?;
        ENCODERS
            .iter()
            .find(|e| e.role == self.role && e.featurizer == base && e.layer == self.layer)
    }
}

const fn entry(
    name: &'static str,
    role: Role,
    input: InputType,
    featurizer: FeaturizerId,
    layer: LayerKind,
) -> EncoderEntry {
    EncoderEntry {
        name,
        role,
        input,
        featurizer,
        layer,
    }
}

use FeaturizerId as F;
use InputType::{Graph2d, Graph3d, Sequence};
use LayerKind as L;
use Role::{Drug, Protein};

pub static ENCODERS: [EncoderEntry; 38] = [
    entry("CNN", Drug, Sequence, F::SmilesOneHot, L::Cnn),
    entry("Transformer", Drug, Sequence, F::DrugTokens, L::Transformer),
    entry("Morgan", Drug, Sequence, F::Morgan, L::Mlp),
    entry("Daylight", Drug, Sequence, F::Daylight, L::Mlp),
    entry("ErG", Drug, Sequence, F::ErG, L::Mlp),
    entry("PubChem", Drug, Sequence, F::PubChem, L::Mlp),
    entry("ChemBERTa", Drug, Sequence, F::ChemBerta, L::Mlp),
    entry("ESPF", Drug, Sequence, F::EspfDrug, L::Mlp),
    entry("GCN", Drug, Graph2d, F::AtomGraph, L::Gcn),
    entry("MPNN", Drug, Graph2d, F::AtomGraph, L::Mpnn),
    entry("GAT", Drug, Graph2d, F::AtomGraph, L::Gat),
    entry("NeuralFP", Drug, Graph2d, F::AtomGraph, L::NeuralFp),
    entry("AttentiveFP", Drug, Graph2d, F::AtomGraph, L::AttentiveFp),
    entry("GIN", Drug, Graph2d, F::AtomGraph, L::Gin),
    entry("SchNet", Drug, Graph3d, F::ConformerGraph, L::Extension("SchNet", 0)),
    entry("MGCN", Drug, Graph3d, F::ConformerGraph, L::Extension("MGCN", 0)),
    entry("CNN", Protein, Sequence, F::SequenceOneHot, L::Cnn),
    entry("Transformer", Protein, Sequence, F::ProteinTokens, L::Transformer),
    entry("AAC", Protein, Sequence, F::Aac, L::Mlp),
    entry("ESPF", Protein, Sequence, F::EspfProtein, L::Mlp),
    entry("PseudoAAC", Protein, Sequence, F::PseudoAac, L::Mlp),
    entry("Quasi-seq", Protein, Sequence, F::QuasiSeq, L::Mlp),
    entry("Conjoint_triad", Protein, Sequence, F::ConjointTriad, L::Mlp),
    entry("ESM", Protein, Sequence, F::Esm, L::Mlp),
    entry("ProtTrans-t5", Protein, Sequence, F::ProtTransT5, L::Mlp),
    entry("ProtTrans-bert", Protein, Sequence, F::ProtTransBert, L::Mlp),
    entry("ProtTrans-albert", Protein, Sequence, F::ProtTransAlbert, L::Mlp),
    entry("Auto_correlation", Protein, Sequence, F::Autocorrelation, L::Mlp),
    entry("CTD", Protein, Sequence, F::Ctd, L::Mlp),
    entry("GCN", Protein, Graph3d, F::ResidueGraph, L::Gcn),
    entry("GAT", Protein, Graph3d, F::ResidueGraph, L::Gat),
    entry("GIN", Protein, Graph3d, F::ResidueGraph, L::Gin),
    entry("GCN_ESM", Protein, Graph3d, F::ResidueGraphEsm, L::Gcn),
    entry("GAT_ESM", Protein, Graph3d, F::ResidueGraphEsm, L::Gat),
    entry("GIN_ESM", Protein, Graph3d, F::ResidueGraphEsm, L::Gin),
    entry("PocketDC", Protein, Graph3d, F::PocketGraph, L::Gcn),
    entry("GVP", Protein, Graph3d, F::ResidueGraph, L::Extension("GVP", 0)),
    entry("GearNet", Protein, Graph3d, F::ResidueGraph, L::Extension("GearNet", 0)),
];

const ALIASES: [(&str, &str); 4] = [
    ("chembert", "chemberta"),
    ("esmgcn", "gcnesm"),
    ("esmgat", "gatesm"),
    ("esmgin", "ginesm"),
];

fn normalize(name: &str) -> String {
    let n: String = name
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect();
    ALIASES
        .iter()
        .find(|(a, _)| *a == n)
        .map_or(n, |(_, canonical)| canonical.to_string())
}

/// Look up an encoder for `role`; matching ignores case and separators.
pub fn lookup(role: Role, name: &str) -> Result<&'static EncoderEntry> {
    let key = normalize(name);
    ENCODERS
        .iter()
        .find(|e| e.role == role && normalize(e.name) == key)
        .ok_or_else(|| Error::UnknownEncoder(name.to_string()))
}

pub fn encoders(role: Role) -> impl Iterator<Item = &'static EncoderEntry> {
    ENCODERS.iter().filter(move |e| e.role == role)
}

/// Registry inventory as `(category, names)` rows.
pub fn inventory() -> Vec<(String, Vec<&'static str>)> {
    let mut rows = Vec::new();
    for (role, label) in [(Role::Drug, "drug"), (Role::Protein, "protein")] {
        for input in [InputType::Sequence, InputType::Graph2d, InputType::Graph3d] {
            let names: Vec<_> = encoders(role).filter(|e| e.input == input).map(|e| e.name).collect();
            if !names.is_empty() {
                rows.push((format!("{label} encoders ({})", input.name()), names));
            }
        }
    }
    rows.push((
        "interactions".to_string(),
        InteractionKind::ALL.iter().map(|k| k.name()).collect(),
    ));
    rows
}
