//! Featurizer identifiers, their output kinds, and dispatch.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::drug::{self, SMILES_MAX_LEN};
use super::espf::{self, ESPF_DRUG_DIM, ESPF_PROTEIN_DIM};
use super::protein::{self, PROTEIN_MAX_LEN};
use super::{Entity, Features};
use crate::adapters::Adapters;
use crate::error::{Error, Result};
use crate::molparse::{self, parse_smiles, ProteinStructure};

pub const DRUG_TOKEN_MAX_LEN: usize = 50;
pub const PROTEIN_TOKEN_MAX_LEN: usize = 545;
pub const CHEMBERTA_DIM: usize = 768;
pub const ESM_DIM: usize = 1280;
pub const PROTTRANS_DIM: usize = 1024;
pub const DEFAULT_RESIDUE_CUTOFF: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "drug")]
    Drug,
    #[serde(rename = "protein")]
    Protein,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeaturizerId {
    SmilesOneHot,
    DrugTokens,
    Morgan,
    Daylight,
    PubChem,
    ErG,
    EspfDrug,
    AtomGraph,
    ConformerGraph,
    ChemBerta,
    SequenceOneHot,
    ProteinTokens,
    Aac,
    EspfProtein,
    PseudoAac,
    QuasiSeq,
    ConjointTriad,
    Autocorrelation,
    Ctd,
    Esm,
    ProtTransT5,
    ProtTransBert,
    ProtTransAlbert,
    ResidueGraph,
    ResidueGraphEsm,
    PocketGraph,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureKind {
    Vector(usize),
    Grid { channels: usize, len: usize },
    Tokens { vocab: usize, max_len: usize },
    Graph { node_dim: usize, edge_dim: Option<usize> },
}

/// Options shared by all featurizers of one model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeaturizeOptions {
    pub residue_cutoff: f64,
    pub pocket_radius: f64,
    pub conformer_seed: u64,
}

impl Default for FeaturizeOptions {
    fn default() -> Self {
        Self {
            residue_cutoff: DEFAULT_RESIDUE_CUTOFF,
            pocket_radius: molparse::DEFAULT_POCKET_RADIUS,
            conformer_seed: 0,
        }
    }
}

impl FeaturizerId {
    pub const ALL: [FeaturizerId; 26] = [
        FeaturizerId::SmilesOneHot,
        FeaturizerId::DrugTokens,
        FeaturizerId::Morgan,
        FeaturizerId::Daylight,
        FeaturizerId::PubChem,
        FeaturizerId::ErG,
        FeaturizerId::EspfDrug,
        FeaturizerId::AtomGraph,
        FeaturizerId::ConformerGraph,
        FeaturizerId::ChemBerta,
        FeaturizerId::SequenceOneHot,
        FeaturizerId::ProteinTokens,
        FeaturizerId::Aac,
        FeaturizerId::EspfProtein,
        FeaturizerId::PseudoAac,
        FeaturizerId::QuasiSeq,
        FeaturizerId::ConjointTriad,
        FeaturizerId::Autocorrelation,
        FeaturizerId::Ctd,
        FeaturizerId::Esm,
        FeaturizerId::ProtTransT5,
        FeaturizerId::ProtTransBert,
        FeaturizerId::ProtTransAlbert,
        FeaturizerId::ResidueGraph,
        FeaturizerId::ResidueGraphEsm,
        FeaturizerId::PocketGraph,
    ];

    pub fn name(self) -> &'static str {
        use FeaturizerId::*;
        match self {
            SmilesOneHot => "smiles_onehot",
            DrugTokens => "espf_tokens_drug",
            Morgan => "morgan",
            Daylight => "daylight",
            PubChem => "pubchem",
            ErG => "erg",
            EspfDrug => "espf_drug",
            AtomGraph => "atom_graph",
            ConformerGraph => "conformer_graph",
            ChemBerta => "chemberta",
            SequenceOneHot => "seq_onehot",
            ProteinTokens => "espf_tokens_protein",
            Aac => "aac",
            EspfProtein => "espf_protein",
            PseudoAac => "pseudo_aac",
            QuasiSeq => "quasi_seq",
            ConjointTriad => "conjoint_triad",
            Autocorrelation => "autocorrelation",
            Ctd => "ctd",
            Esm => "esm",
            ProtTransT5 => "prottrans_t5",
            ProtTransBert => "prottrans_bert",
            ProtTransAlbert => "prottrans_albert",
            ResidueGraph => "residue_graph",
            ResidueGraphEsm => "residue_graph_esm",
            PocketGraph => "pocket_graph",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name().eq_ignore_ascii_case(name))
    }

    pub fn role(self) -> Role {
        use FeaturizerId::*;
        match self {
            SmilesOneHot | DrugTokens | Morgan | Daylight | PubChem | ErG | EspfDrug | AtomGraph
            | ConformerGraph | ChemBerta => Role::Drug,
            _ => Role::Protein,
        }
    }

    /// Name of the external adapter this featurizer reads from, if any.
    pub fn adapter(self) -> Option<&'static str> {
        use FeaturizerId::*;
        match self {
            PubChem => Some("PubChem"),
            ErG => Some("ErG"),
            ChemBerta => Some("ChemBERTa"),
            Esm => Some("ESM"),
            ProtTransT5 => Some("ProtTrans-t5"),
            ProtTransBert => Some("ProtTrans-bert"),
            ProtTransAlbert => Some("ProtTrans-albert"),
            _ => None,
        }
    }

    pub fn default_max_len(self) -> Option<usize> {
        match self {
            FeaturizerId::SmilesOneHot => Some(SMILES_MAX_LEN),
            FeaturizerId::DrugTokens => Some(DRUG_TOKEN_MAX_LEN),
            FeaturizerId::SequenceOneHot => Some(PROTEIN_MAX_LEN),
            FeaturizerId::ProteinTokens => Some(PROTEIN_TOKEN_MAX_LEN),
            _ => None,
        }
    }

    /// Output kind; adapter-backed widths use their declared defaults.
    pub fn kind(self, max_len: Option<usize>, residue_width: Option<usize>) -> FeatureKind {
        use FeaturizerId::*;
        let len = max_len.or(self.default_max_len()).unwrap_or(0);
        match self {
            SmilesOneHot => FeatureKind::Grid {
                channels: drug::SMILES_ALPHABET.len() + 1,
                len,
            },
            SequenceOneHot => FeatureKind::Grid {
                channels: protein::PROTEIN_ALPHABET.len() + 1,
                len,
            },
            DrugTokens => FeatureKind::Tokens {
                vocab: ESPF_DRUG_DIM + 2,
                max_len: len,
            },
            ProteinTokens => FeatureKind::Tokens {
                vocab: ESPF_PROTEIN_DIM + 2,
                max_len: len,
            },
            Morgan => FeatureKind::Vector(drug::MORGAN_DIM),
            Daylight => FeatureKind::Vector(drug::DAYLIGHT_DIM),
            PubChem => FeatureKind::Vector(drug::PUBCHEM_DIM),
            ErG => FeatureKind::Vector(drug::ERG_DIM),
            EspfDrug => FeatureKind::Vector(ESPF_DRUG_DIM),
            ChemBerta => FeatureKind::Vector(CHEMBERTA_DIM),
            Aac => FeatureKind::Vector(protein::AAC_DIM),
            EspfProtein => FeatureKind::Vector(ESPF_PROTEIN_DIM),
            PseudoAac => FeatureKind::Vector(protein::PSEAAC_DIM),
            QuasiSeq => FeatureKind::Vector(protein::QSO_DIM),
            ConjointTriad => FeatureKind::Vector(protein::CONJOINT_TRIAD_DIM),
            Autocorrelation => FeatureKind::Vector(protein::AUTOCORRELATION_DIM),
            Ctd => FeatureKind::Vector(protein::CTD_DIM),
            Esm => FeatureKind::Vector(ESM_DIM),
            ProtTransT5 | ProtTransBert | ProtTransAlbert => FeatureKind::Vector(PROTTRANS_DIM),
            AtomGraph | ConformerGraph => FeatureKind::Graph {
                node_dim: drug::ATOM_FEATURE_DIM,
                edge_dim: Some(drug::BOND_FEATURE_DIM),
            },
            ResidueGraph | PocketGraph => FeatureKind::Graph {
                node_dim: protein::RESIDUE_ONEHOT_DIM,
                edge_dim: None,
            },
            ResidueGraphEsm => FeatureKind::Graph {
                node_dim: protein::RESIDUE_ONEHOT_DIM + residue_width.unwrap_or(ESM_DIM),
                edge_dim: None,
            },
        }
    }

    /// The same input without its adapter-provided enrichment.
    pub fn base(self) -> Option<FeaturizerId> {
        match self {
            FeaturizerId::ResidueGraphEsm => Some(FeaturizerId::ResidueGraph),
            _ => None,
        }
    }
}

/// Featurizer plus its length parameter; the unit of featurization caching.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeaturizerSpec {
    pub id: FeaturizerId,
    pub max_len: Option<usize>,
}

impl FeaturizerSpec {
    pub fn new(id: FeaturizerId) -> Self {
        Self {
            id,
            max_len: id.default_max_len(),
        }
    }

    pub fn with_max_len(id: FeaturizerId, max_len: Option<usize>) -> Self {
        Self {
            id,
            max_len: max_len.or(id.default_max_len()),
        }
    }

    pub fn kind(&self, adapters: &Adapters) -> FeatureKind {
        self.id.kind(self.max_len, adapters.residue().map(|r| r.width()))
    }
}

fn structure_of(entity: &Entity) -> Result<&ProteinStructure> {
    match entity {
        Entity::Protein {
            structure: Some(s), ..
        } => Ok(s),
        Entity::Protein { .. } => Err(Error::Schema(
            "structure-based featurizer needs a protein structure (pdb_id)".into(),
        )),
        Entity::Drug(_) => Err(Error::Kind("protein featurizer applied to a drug".into())),
    }
}

/// Run one featurizer on one entity.
pub fn featurize(
    spec: &FeaturizerSpec,
    entity: &Entity,
    adapters: &Adapters,
    options: &FeaturizeOptions,
) -> Result<Features> {
    use FeaturizerId::*;
    let role_ok = matches!(
        (spec.id.role(), entity),
        (Role::Drug, Entity::Drug(_)) | (Role::Protein, Entity::Protein { .. })
    );
    if !role_ok {
        return Err(Error::Kind(format!(
            "featurizer `{}` does not apply to this entity",
            spec.id.name()
        )));
    }
    let text = entity.text();
    let len = spec.max_len.unwrap_or(0);
    let vector = |v: Vec<f64>| Ok(Features::Vector(Arc::new(v)));
    match spec.id {
        SmilesOneHot => Ok(Features::Grid(Arc::new(drug::smiles_onehot(text, len)))),
        SequenceOneHot => Ok(Features::Grid(Arc::new(protein::seq_onehot(text, len)))),
        DrugTokens => Ok(Features::Tokens(Arc::new(espf::espf_tokens_drug(text, len)))),
        ProteinTokens => Ok(Features::Tokens(Arc::new(espf::espf_tokens_protein(text, len)))),
        Morgan => vector(drug::morgan_fp(&parse_smiles(text.trim())?).values),
        Daylight => vector(drug::daylight_fp(&parse_smiles(text.trim())?).values),
        EspfDrug => vector(espf::espf_drug(text).values),
        EspfProtein => vector(espf::espf_protein(text).values),
        PubChem | ErG | ChemBerta | Esm | ProtTransT5 | ProtTransBert | ProtTransAlbert => {
            let FeatureKind::Vector(dim) = spec.kind(adapters) else {
                unreachable!("adapter featurizers are vectors")
            };
            let name = spec.id.adapter().expect("adapter-backed");
            vector(adapters.vector_checked(name, text.trim(), dim)?)
        }
        AtomGraph => Ok(Features::Graph(Arc::new(drug::atom_graph_features(
            &parse_smiles(text.trim())?,
        )))),
        ConformerGraph => {
            let g = parse_smiles(text.trim())?;
            let g = molparse::embed_conformer(&g, adapters.conformer(), options.conformer_seed)?;
            Ok(Features::Graph(Arc::new(drug::atom_graph_features(&g))))
        }
        Aac => vector(protein::aac_kmer(text)?.values),
        PseudoAac => vector(
            protein::pseudo_aac(text, protein::PSEAAC_LAMBDA, protein::PSEAAC_WEIGHT)?.values,
        ),
        QuasiSeq => vector(
            protein::quasi_seq_order(text, protein::QSO_MAXLAG, protein::QSO_WEIGHT)?.values,
        ),
        ConjointTriad => vector(protein::conjoint_triad(text)?.values),
        Autocorrelation => {
            vector(protein::autocorrelation(text, protein::AUTOCORRELATION_MAXLAG)?.values)
        }
        Ctd => vector(protein::ctd(text)?.values),
        ResidueGraph => {
            let s = structure_of(entity)?;
            Ok(Features::Graph(Arc::new(protein::residue_graph_features(
                s,
                options.residue_cutoff,
                None,
            )?)))
        }
        ResidueGraphEsm => {
            let s = structure_of(entity)?;
            let esm = adapters
                .residue()
                .ok_or_else(|| Error::AdapterUnavailable("per-residue ESM embeddings".into()))?;
            Ok(Features::Graph(Arc::new(protein::residue_graph_features(
                s,
                options.residue_cutoff,
                Some(esm),
            )?)))
        }
        PocketGraph => {
            let s = structure_of(entity)?;
            let pocket = molparse::extract_pocket(s, adapters.pocket(), options.pocket_radius)?;
            Ok(Features::Graph(Arc::new(protein::residue_graph_features(
                &pocket,
                options.residue_cutoff,
                None,
            )?)))
        }
    }
}

/// Shape actually produced, for validation against [`FeatureKind`].
pub fn kind_of(features: &Features) -> FeatureKind {
    match features {
        Features::Vector(v) => FeatureKind::Vector(v.len()),
        Features::Grid(g) => FeatureKind::Grid {
            channels: g.nrows(),
            len: g.ncols(),
        },
        Features::Tokens(t) => FeatureKind::Tokens {
            vocab: t.vocab_size,
            max_len: t.max_len,
        },
        Features::Graph(g) => FeatureKind::Graph {
            node_dim: g.feature_width(),
            edge_dim: g.edge_features.as_ref().map(|e| e.ncols()),
        },
    }
}
