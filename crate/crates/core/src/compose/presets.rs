//! Architectures of the published DTI, DDI and PPI experiment tables.

use crate::encode::{EncoderParams, OutputMode};
use crate::error::{Error, Result};
use crate::featurize::registry::Role;
use crate::interact::{InteractionKind, InteractionParams};

use super::{ModelSpec, TaskKind};

pub const PRESETS: [&str; 27] = [
    "exp-1.1", "exp-1.2", "exp-1.3", "exp-1.4", "exp-1.5", "exp-1.6", "exp-1.7", "exp-1.8",
    "exp-1.9", "exp-1.10", "exp-1.11", "exp-1.12", "exp-1.13", "exp-1.14", "ddi-1", "ddi-2",
    "ddi-3", "ddi-4", "ddi-5", "ddi-6", "ppi-1", "ppi-2", "ppi-3", "ppi-4", "ppi-5", "ppi-6",
    "exp-2",
];

fn tokens() -> EncoderParams {
    EncoderParams {
        output: Some(OutputMode::TokenSet),
        ..Default::default()
    }
}

/// Concatenation-only model: `left` encoders on entity 0, `right` on entity 1.
fn concat(entities: [Role; 2], left: &[&str], right: &[&str]) -> Result<ModelSpec> {
    let mut spec = ModelSpec::new(TaskKind::Binary, entities);
    for (entity, names) in [left, right].into_iter().enumerate() {
        for name in names {
            spec.add_encoder(entity, name, EncoderParams::default())?;
        }
    }
    Ok(spec)
}

fn cross_attention(entities: [Role; 2]) -> Result<ModelSpec> {
    let mut spec = ModelSpec::new(TaskKind::Binary, entities);
    let a = spec.add_encoder(0, "Transformer", tokens())?;
    let b = spec.add_encoder(1, "Transformer", tokens())?;
    spec.set_interaction(&[a, b], InteractionKind::CrossAttention, InteractionParams::default())?;
    Ok(spec)
}

pub fn preset(name: &str) -> Result<ModelSpec> {
    const DTI: [Role; 2] = [Role::Drug, Role::Protein];
    const DDI: [Role; 2] = [Role::Drug, Role::Drug];
    const PPI: [Role; 2] = [Role::Protein, Role::Protein];
    match name {
        "exp-1.1" => concat(DTI, &["CNN"], &["CNN"]),
        "exp-1.2" => concat(DTI, &["Daylight"], &["CNN"]),
        "exp-1.3" => concat(DTI, &["CNN", "Daylight"], &["CNN"]),
        "exp-1.4" => concat(DTI, &["Morgan"], &["GCN"]),
        "exp-1.5" => concat(DTI, &["GCN"], &["GCN"]),
        "exp-1.6" => concat(DTI, &["Morgan", "GCN"], &["GCN"]),
        "exp-1.7" => concat(DTI, &["CNN"], &["GCN_ESM"]),
        "exp-1.8" => concat(DTI, &["ChemBERTa"], &["CNN"]),
        "exp-1.9" => concat(DTI, &["GCN"], &["GCN_ESM"]),
        "exp-1.10" => concat(DTI, &["ChemBERTa"], &["GCN"]),
        "exp-1.11" => concat(DTI, &["GAT", "PubChem"], &["AAC"]),
        "exp-1.12" => {
            let mut spec = ModelSpec::new(TaskKind::Binary, DTI);
            let gat = spec.add_encoder(0, "GAT", EncoderParams::default())?;
            let pubchem = spec.add_encoder(0, "PubChem", EncoderParams::default())?;
            spec.set_interaction(&[gat, pubchem], InteractionKind::GatedFusion, InteractionParams::default())?;
            spec.add_encoder(1, "AAC", EncoderParams::default())?;
            Ok(spec)
        }
        "exp-1.13" => concat(DTI, &["Transformer"], &["Transformer"]),
        "exp-1.14" => cross_attention(DTI),
        "ddi-1" => concat(DDI, &["CNN"], &["CNN"]),
        "ddi-2" => concat(DDI, &["CNN"], &["GCN"]),
        "ddi-3" => concat(DDI, &["CNN", "PubChem"], &["GCN", "PubChem"]),
        "ddi-4" => concat(DDI, &["PubChem"], &["PubChem"]),
        "ddi-5" => concat(DDI, &["Transformer"], &["Transformer"]),
        "ddi-6" => cross_attention(DDI),
        "ppi-1" => concat(PPI, &["CNN"], &["CNN"]),
        "ppi-2" => concat(PPI, &["CNN"], &["GCN"]),
        "ppi-3" => concat(PPI, &["AAC"], &["AAC"]),
        "ppi-4" => concat(PPI, &["AAC", "CNN"], &["AAC", "GCN"]),
        "ppi-5" => concat(PPI, &["Transformer"], &["Transformer"]),
        "ppi-6" => cross_attention(PPI),
        "exp-2" => {
            let mut spec = ModelSpec::new(TaskKind::Binary, DTI);
            let drug = spec.add_encoder(0, "GCN", EncoderParams::default())?;
            let protein = spec.add_encoder(1, "GCN_ESM", EncoderParams::default())?;
            let pocket = spec.add_encoder(1, "PocketDC", EncoderParams::default())?;
            let stacked = spec.stack(&[drug, protein, pocket])?;
            let attended = spec.set_interaction(&[stacked], InteractionKind::SelfAttention, InteractionParams::default())?;
            let flat = spec.flatten(attended)?;
            spec.apply_mlp(flat, &super::DEFAULT_HEAD_HIDDEN)?;
            Ok(spec)
        }
        other => Err(Error::config(
            "model.preset",
            format!("unknown preset `{other}`; known: {}", PRESETS.join(", ")),
        )),
    }
}
