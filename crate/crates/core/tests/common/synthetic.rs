//! Synthetic datasets and the split/negative-sampling checks run on them.

use std::collections::{HashMap, HashSet};

use molrel::compose::TaskKind;
use molrel::dataio::{self, InteractionDataset, Pair};
use molrel::featurize::registry::Role;
use molrel::featurize::Entity;

/// `n` rows with distinct placeholder entities and alternating labels.
pub fn dti_rows(n: usize) -> InteractionDataset {
    let rows = (0..n)
        .map(|i| Pair {
            entities: [Entity::drug(format!("D{i}")), Entity::protein(format!("P{i}"))],
            label: (i % 2) as f64,
            group: None,
        })
        .collect();
    InteractionDataset::new(TaskKind::Binary, [Role::Drug, Role::Protein], rows)
}

/// Positive DDI pairs over `classes` interaction types of uneven size.
pub fn ddi_typed(classes: usize) -> InteractionDataset {
    let mut rows = Vec::new();
    for c in 0..classes {
        for j in 0..(3 + (c * 7) % 23) {
            rows.push(Pair {
                entities: [Entity::drug(format!("A{c}_{j}")), Entity::drug(format!("B{c}_{j}"))],
                label: 1.0,
                group: Some(c),
            });
        }
    }
    InteractionDataset::new(TaskKind::Binary, [Role::Drug, Role::Drug], rows)
}

/// Positive-only DTI set touching every one of `drugs` x `proteins`
/// entities, with up to `n` distinct pairs.
pub fn dti_positives(drugs: usize, proteins: usize, n: usize) -> InteractionDataset {
    let cover = drugs.max(proteins);
    let pair = |i: usize| {
        if i < cover {
            (i % drugs, i % proteins)
        } else {
            (i % drugs, (i * 5 + 1) % proteins)
        }
    };
    let mut seen = HashSet::new();
    let rows = (0..n.max(cover))
        .map(pair)
        .filter(|p| seen.insert(*p))
        .map(|(d, p)| Pair {
            entities: [Entity::drug(format!("D{d}")), Entity::protein(format!("P{p}"))],
            label: 1.0,
            group: None,
        })
        .collect();
    InteractionDataset::new(TaskKind::Binary, [Role::Drug, Role::Protein], rows)
}

pub fn key(r: &Pair) -> (String, String) {
    (r.entities[0].text().to_string(), r.entities[1].text().to_string())
}

fn counts(ds: &InteractionDataset) -> HashMap<usize, usize> {
    let mut m = HashMap::new();
    for s in ds.strata() {
        *m.entry(s).or_insert(0) += 1;
    }
    m
}

pub fn random_split_sizes() -> Result<(), String> {
    let ds = dti_rows(1000);
    let [a, b, c] = dataio::split_random(&ds, [0.7, 0.2, 0.1], 1).map_err(|e| e.to_string())?;
    let sizes = (a.len(), b.len(), c.len());
    let mut all: Vec<_> = a.rows.iter().chain(&b.rows).chain(&c.rows).map(key).collect();
    all.sort();
    all.dedup();
    if sizes != (700, 200, 100) || all.len() != 1000 {
        return Err(format!("sizes {sizes:?}, distinct rows {}", all.len()));
    }
    Ok(())
}

pub fn stratified_proportions() -> Result<(), String> {
    let ds = ddi_typed(86);
    let total = counts(&ds);
    let folds = dataio::split_stratified(&ds, [0.6, 0.2, 0.2], 2, 3).map_err(|e| e.to_string())?;
    if folds.len() != 3 {
        return Err(format!("{} folds", folds.len()));
    }
    for (f, parts) in folds.iter().enumerate() {
        let per: Vec<HashMap<usize, usize>> = parts.iter().map(counts).collect();
        for (&class, &n) in &total {
            for (p, frac) in [0.6, 0.2, 0.2].iter().enumerate() {
                let got = per[p].get(&class).copied().unwrap_or(0) as f64;
                if (got - frac * n as f64).abs() > 1.0 {
                    return Err(format!("fold {f}, class {class}: part {p} has {got} of {n}"));
                }
            }
        }
        if parts.iter().map(|p| p.len()).sum::<usize>() != ds.len() {
            return Err(format!("fold {f} loses rows"));
        }
    }
    Ok(())
}

pub fn kfold_coverage() -> Result<(), String> {
    let ds = dti_rows(103);
    let folds = dataio::kfold(&ds, 5, 4).map_err(|e| e.to_string())?;
    let mut seen: HashMap<(String, String), usize> = HashMap::new();
    for (train, test) in &folds {
        if train.len() + test.len() != ds.len() {
            return Err("train and test do not cover the data".into());
        }
        let t: HashSet<_> = test.rows.iter().map(key).collect();
        if train.rows.iter().any(|r| t.contains(&key(r))) {
            return Err("train and test overlap".into());
        }
        for r in &test.rows {
            *seen.entry(key(r)).or_insert(0) += 1;
        }
    }
    if folds.len() != 5 || seen.len() != ds.len() || seen.values().any(|&c| c != 1) {
        return Err("some row is not tested exactly once".into());
    }
    Ok(())
}

pub fn negatives_disjoint_and_balanced() -> Result<(), String> {
    let ds = dti_positives(12, 9, 40);
    let out = dataio::sample_negatives(&ds, 1.0, 5).map_err(|e| e.to_string())?;
    let pos: HashSet<_> = ds.rows.iter().map(key).collect();
    let negs: Vec<_> = out.rows.iter().filter(|r| r.label == 0.0).map(key).collect();
    let distinct: HashSet<_> = negs.iter().cloned().collect();
    if negs.len() != ds.len() || distinct.len() != negs.len() {
        return Err(format!("{} negatives ({} distinct) for {} positives", negs.len(), distinct.len(), ds.len()));
    }
    if negs.iter().any(|k| pos.contains(k)) {
        return Err("a negative is a known positive".into());
    }
    Ok(())
}

pub fn suite() -> Vec<(&'static str, Result<(), String>)> {
    vec![
        ("random 7:2:1 of 1000", random_split_sizes()),
        ("stratified 60/20/20, 86 classes, 3 folds", stratified_proportions()),
        ("5-fold coverage", kfold_coverage()),
        ("negative sampling", negatives_disjoint_and_balanced()),
    ]
}
