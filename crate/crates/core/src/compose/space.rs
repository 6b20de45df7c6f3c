//! Model-space counting and component ablation.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::featurize::registry::FeaturizerId;
use crate::interact::{InteractionKind, InteractionParams};

use super::{registry, ModelSpec, NodeSpec};

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * u128::from(n - i) / u128::from(i + 1))
}

/// Number of concatenation-only models using at least one encoder per
/// entity and at most `max_total` encoders overall.
pub fn enumerate_model_space(n_drug: u64, n_protein: u64, max_total: u64) -> u128 {
    let mut total = 0;
    for d in 1..=n_drug.min(max_total) {
        for p in 1..=n_protein.min(max_total - d) {
            total += binomial(n_drug, d) * binomial(n_protein, p);
        }
    }
    total
}

fn normalized(name: &str) -> String {
    name.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

/// Remove `component` from `spec`: an interaction becomes concatenation of
/// its inputs, an encoder is deleted, and an adapter feature (such as ESM
/// residue embeddings) falls back to the plain featurizer.
pub fn ablate(spec: &ModelSpec, component: &str) -> Result<ModelSpec> {
    if let Ok(kind) = InteractionKind::from_name(component) {
        if kind != InteractionKind::Concat {
            return drop_interaction(spec, kind);
        }
    }
    let encoders: BTreeSet<usize> = spec
        .nodes
        .iter()
        .enumerate()
        .filter_map(|(i, n)| match n {
            NodeSpec::Encoder { encoder, entity, .. } => {
                let same = registry::lookup(spec.entities[*entity], component)
                    .is_ok_and(|e| normalized(e.name) == normalized(encoder));
                same.then_some(i)
            }
            _ => None,
        })
        .collect();
    if !encoders.is_empty() {
        return drop_encoders(spec, &encoders);
    }
    let mut out = spec.clone();
    let mut replaced = false;
    for node in &mut out.nodes {
        if let NodeSpec::Encoder { encoder, entity, .. } = node {
            let Ok(entry) = registry::lookup(spec.entities[*entity], encoder) else {
                continue;
            };
            let uses_adapter =
                adapter_feature(entry.featurizer).is_some_and(|a| normalized(a) == normalized(component));
            if let (true, Some(base)) = (uses_adapter, entry.base()) {
                *encoder = base.name.to_string();
                replaced = true;
            }
        }
    }
    if replaced {
        return Ok(out);
    }
    Err(Error::config(
        "ablate.drop",
        format!("`{component}` names no interaction, encoder or adapter feature of this model"),
    ))
}

fn adapter_feature(id: FeaturizerId) -> Option<&'static str> {
    match id {
        FeaturizerId::ResidueGraphEsm => Some("ESM"),
        _ => None,
    }
}

fn drop_interaction(spec: &ModelSpec, kind: InteractionKind) -> Result<ModelSpec> {
    let mut out = spec.clone();
    let mut found = false;
    for i in 0..out.nodes.len() {
        let NodeSpec::Interaction {
            interaction, inputs, ..
        } = &out.nodes[i]
        else {
            continue;
        };
        if *interaction != kind {
            continue;
        }
        found = true;
        let mut expanded = Vec::new();
        for &j in inputs {
            match &spec.nodes[j] {
                NodeSpec::Stack { inputs } => expanded.extend(inputs),
                _ => expanded.push(j),
            }
        }
        out.nodes[i] = NodeSpec::Interaction {
            interaction: InteractionKind::Concat,
            inputs: expanded,
            params: InteractionParams::default(),
        };
    }
    if !found {
        return Err(Error::config(
            "ablate.drop",
            format!("model has no `{}` interaction", kind.name()),
        ));
    }
    let orphans = orphaned(&out, |n| matches!(n, NodeSpec::Stack { .. }));
    Ok(remove_nodes(out, &orphans))
}

/// Nodes matching `pred` that no other node or the head consumes.
fn orphaned(spec: &ModelSpec, pred: impl Fn(&NodeSpec) -> bool) -> BTreeSet<usize> {
    let mut used: BTreeSet<usize> = spec.nodes.iter().flat_map(NodeSpec::inputs).collect();
    used.extend(spec.head.input);
    (0..spec.nodes.len())
        .filter(|i| !used.contains(i) && pred(&spec.nodes[*i]))
        .collect()
}

fn drop_encoders(spec: &ModelSpec, drop: &BTreeSet<usize>) -> Result<ModelSpec> {
    let mut out = spec.clone();
    let mut gone = drop.clone();
    // Consumers lose the dropped inputs; layers left short of inputs degrade
    // to concatenation, empty ones disappear too.
    loop {
        let mut changed = false;
        for i in 0..out.nodes.len() {
            if gone.contains(&i) {
                continue;
            }
            let node = &mut out.nodes[i];
            let before = node.inputs().len();
            match node {
                NodeSpec::Encoder { .. } => {}
                NodeSpec::Flatten { input } => {
                    if gone.contains(input) {
                        gone.insert(i);
                        changed = true;
                    }
                }
                NodeSpec::Stack { inputs } | NodeSpec::Interaction { inputs, .. } => {
                    inputs.retain(|j| !gone.contains(j));
                    if inputs.is_empty() {
                        gone.insert(i);
                        changed = true;
                    } else if inputs.len() != before {
                        changed = true;
                        if let NodeSpec::Stack { inputs } = node {
                            if inputs.len() < 2 {
                                return Err(Error::config(
                                    "ablate.drop",
                                    format!("dropping the encoder leaves stack node {i} with one input"),
                                ));
                            }
                        } else if let NodeSpec::Interaction {
                            interaction, inputs, ..
                        } = node
                        {
                            let arity_two = !matches!(
                                interaction,
                                InteractionKind::Concat | InteractionKind::Highway | InteractionKind::SelfAttention
                            );
                            if arity_two {
                                *node = NodeSpec::Interaction {
                                    interaction: InteractionKind::Concat,
                                    inputs: inputs.clone(),
                                    params: InteractionParams::default(),
                                };
                            }
                        }
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    if let Some(h) = out.head.input {
        if gone.contains(&h) {
            out.head.input = None;
        }
    }
    Ok(remove_nodes(out, &gone))
}

/// Delete nodes and renumber every reference.
fn remove_nodes(mut spec: ModelSpec, gone: &BTreeSet<usize>) -> ModelSpec {
    let remap: Vec<Option<usize>> = {
        let mut next = 0;
        (0..spec.nodes.len())
            .map(|i| {
                (!gone.contains(&i)).then(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect()
    };
    spec.nodes = std::mem::take(&mut spec.nodes)
        .into_iter()
        .enumerate()
        .filter(|(i, _)| !gone.contains(i))
        .map(|(_, mut n)| {
            for r in n.inputs_mut() {
                *r = remap[*r].expect("reference to removed node");
            }
            n
        })
        .collect();
    spec.head.input = spec.head.input.and_then(|h| remap[h]);
    spec
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compose::preset;

    fn brute_force(a: u64, b: u64, m: u64) -> u128 {
        let mut n = 0;
        for ds in 1u64..(1 << a) {
            for ps in 1u64..(1 << b) {
                if u64::from(ds.count_ones() + ps.count_ones()) <= m {
                    n += 1;
                }
            }
        }
        n
    }

    #[test]
    fn counts() {
        assert_eq!(enumerate_model_space(16, 22, 4), 71368);
        assert_eq!(enumerate_model_space(2, 2, 2), 4);
        assert_eq!(enumerate_model_space(1, 1, 2), 1);
        assert_eq!(enumerate_model_space(1, 1, 1), 0);
        for a in 1..=6 {
            for b in 1..=6 {
                for m in 1..=5 {
                    assert_eq!(enumerate_model_space(a, b, m), brute_force(a, b, m), "{a} {b} {m}");
                }
            }
        }
    }

    #[test]
    fn drop_self_attention_concatenates() {
        let spec = preset("exp-2").unwrap();
        let out = ablate(&spec, "self_attention").unwrap();
        assert!(!out.nodes.iter().any(|n| matches!(n, NodeSpec::Stack { .. })));
        let concat = out
            .nodes
            .iter()
            .find_map(|n| match n {
                NodeSpec::Interaction {
                    interaction: InteractionKind::Concat,
                    inputs,
                    ..
                } => Some(inputs.len()),
                _ => None,
            })
            .unwrap();
        assert_eq!(concat, 3);
        out.infer_shapes(&Default::default()).unwrap();
    }

    #[test]
    fn drop_encoder_and_adapter() {
        let spec = preset("exp-2").unwrap();
        let count = |s: &ModelSpec| s.nodes.iter().filter(|n| matches!(n, NodeSpec::Encoder { .. })).count();
        let no_pocket = ablate(&spec, "PocketDC").unwrap();
        assert_eq!(count(&no_pocket), count(&spec) - 1);
        no_pocket.infer_shapes(&Default::default()).unwrap();

        let no_esm = ablate(&spec, "ESM").unwrap();
        assert!(no_esm
            .nodes
            .iter()
            .any(|n| matches!(n, NodeSpec::Encoder { encoder, .. } if encoder == "GCN")));
        assert_eq!(count(&no_esm), count(&spec));

        let fused = ablate(&preset("exp-1.12").unwrap(), "PubChem").unwrap();
        fused.infer_shapes(&Default::default()).unwrap();

        assert!(matches!(ablate(&spec, "Morgan"), Err(Error::Config { .. })));
        assert!(matches!(ablate(&spec, "gated_fusion"), Err(Error::Config { .. })));
    }
}
