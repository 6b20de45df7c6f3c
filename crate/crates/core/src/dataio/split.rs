use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{InteractionDataset, Pair};
use crate::error::{Error, Result};
use crate::featurize::Entity;

/// Split `n` into parts proportional to `fractions`, rounding by largest
/// remainder so the parts sum to `n`. Ties go to the earlier part.
pub fn largest_remainder(n: usize, fractions: &[f64]) -> Vec<usize> {
    let total: f64 = fractions.iter().sum();
    let exact: Vec<f64> = fractions.iter().map(|f| n as f64 * f / total).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let short = n - sizes.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        sizes[i] += 1;
    }
    sizes
}

fn check_fractions(fractions: &[f64]) -> Result<()> {
    if fractions.iter().any(|f| !(f.is_finite() && *f >= 0.0)) || fractions.iter().sum::<f64>() <= 0.0 {
        return Err(Error::Invalid(format!("bad split fractions {fractions:?}")));
    }
    Ok(())
}

fn parts(ds: &InteractionDataset, idx: &[usize], sizes: &[usize]) -> [InteractionDataset; 3] {
    let a = sizes[0];
    let b = a + sizes[1];
    [ds.subset(&idx[..a]), ds.subset(&idx[a..b]), ds.subset(&idx[b..])]
}

/// Shuffled train/valid/test partition.
pub fn split_random(ds: &InteractionDataset, fractions: [f64; 3], seed: u64) -> Result<[InteractionDataset; 3]> {
    check_fractions(&fractions)?;
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let sizes = largest_remainder(ds.len(), &fractions);
    Ok(parts(ds, &idx, &sizes))
}

pub type Fold = [InteractionDataset; 3];

/// Per-class train/valid/test partitions, one per fold, each fold drawn with
/// its own seed. Classes with a single row stay in train.
pub fn split_stratified(
    ds: &InteractionDataset,
    fractions: [f64; 3],
    seed: u64,
    folds: usize,
) -> Result<Vec<Fold>> {
    check_fractions(&fractions)?;
    if folds == 0 {
        return Err(Error::Invalid("need at least one fold".into()));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, c) in ds.strata().into_iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    for (c, rows) in &by_class {
        if rows.len() == 1 {
            log::warn!("class {c} has a single row; it stays in train");
        }
    }
    Ok((0..folds)
        .map(|f| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(f as u64));
            let mut out: [Vec<usize>; 3] = Default::default();
            for rows in by_class.values() {
                let mut rows = rows.clone();
                rows.shuffle(&mut rng);
                let sizes = if rows.len() == 1 {
                    vec![1, 0, 0]
                } else {
                    largest_remainder(rows.len(), &fractions)
                };
                let mut start = 0;
                for (part, size) in sizes.into_iter().enumerate() {
                    out[part].extend_from_slice(&rows[start..start + size]);
                    start += size;
                }
            }
            out.map(|mut idx| {
                idx.shuffle(&mut rng);
                ds.subset(&idx)
            })
        })
        .collect())
}

/// `k` (train, test) pairs whose test parts partition the dataset.
pub fn kfold(ds: &InteractionDataset, k: usize, seed: u64) -> Result<Vec<(InteractionDataset, InteractionDataset)>> {
    if k < 2 || k > ds.len() {
        return Err(Error::Invalid(format!("cannot make {k} folds from {} rows", ds.len())));
    }
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let sizes = largest_remainder(ds.len(), &vec![1.0; k]);
    let mut start = 0;
    Ok(sizes
        .into_iter()
        .map(|size| {
            let test: Vec<usize> = idx[start..start + size].to_vec();
            let train: Vec<usize> = idx[..start].iter().chain(&idx[start + size..]).copied().collect();
            start += size;
            (ds.subset(&train), ds.subset(&test))
        })
        .collect())
}

/// Distinct entities per side, keyed by cache key, in first-seen order.
fn pools(ds: &InteractionDataset, symmetric: bool) -> [Vec<(String, Entity)>; 2] {
    let mut seen: [HashSet<String>; 2] = Default::default();
    let mut out: [Vec<(String, Entity)>; 2] = Default::default();
    for r in &ds.rows {
        for (k, e) in r.entities.iter().enumerate() {
            let side = if symmetric { 0 } else { k };
            let key = e.cache_key();
            if seen[side].insert(key.clone()) {
                out[side].push((key, e.clone()));
            }
        }
    }
    if symmetric {
        out[1] = out[0].clone();
    }
    out
}

fn pair_key(a: &str, b: &str, symmetric: bool) -> (String, String) {
    if symmetric && b < a {
        (b.to_string(), a.to_string())
    } else {
        (a.to_string(), b.to_string())
    }
}

/// Add `ratio x positives` negatives drawn uniformly without replacement from
/// entity combinations absent from the positives. Same-role datasets treat
/// pairs as unordered and never pair an entity with itself.
pub fn sample_negatives(ds: &InteractionDataset, ratio: f64, seed: u64) -> Result<InteractionDataset> {
    if ds.rows.iter().any(|r| r.label != 1.0) {
        return Err(Error::Invalid("negative sampling needs a positive-only dataset".into()));
    }
    if !(ratio.is_finite() && ratio >= 0.0) {
        return Err(Error::Invalid(format!("bad negative ratio {ratio}")));
    }
    let symmetric = ds.entities[0] == ds.entities[1];
    let [left, right] = pools(ds, symmetric);
    let positives: HashSet<(String, String)> = ds
        .rows
        .iter()
        .map(|r| pair_key(&r.entities[0].cache_key(), &r.entities[1].cache_key(), symmetric))
        .collect();
    let universe = if symmetric {
        left.len() * left.len().saturating_sub(1) / 2
    } else {
        left.len() * right.len()
    };
    let available = universe - positives.len();
    let requested = (ratio * ds.len() as f64).round() as usize;
    if requested > available {
        return Err(Error::InsufficientUniverse { requested, available });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<(usize, usize)> = Vec::with_capacity(requested);
    if requested * 4 >= available {
        let mut all = Vec::with_capacity(available);
        for i in 0..left.len() {
            let from = if symmetric { i + 1 } else { 0 };
            for j in from..right.len() {
                if !positives.contains(&pair_key(&left[i].0, &right[j].0, symmetric)) {
                    all.push((i, j));
                }
            }
        }
        all.shuffle(&mut rng);
        all.truncate(requested);
        chosen = all;
    } else {
        let mut taken: HashSet<(String, String)> = HashSet::new();
        while chosen.len() < requested {
            let (i, j) = (rng.gen_range(0..left.len()), rng.gen_range(0..right.len()));
            if symmetric && i == j {
                continue;
            }
            let key = pair_key(&left[i].0, &right[j].0, symmetric);
            if !positives.contains(&key) && taken.insert(key) {
                chosen.push((i, j));
            }
        }
    }
    let mut out = ds.clone();
    out.rejects.clear();
    out.rows.extend(chosen.into_iter().map(|(i, j)| Pair {
        entities: [left[i].1.clone(), right[j].1.clone()],
        label: 0.0,
        group: None,
    }));
    Ok(out)
}

/// One negative per positive by replacing a random endpoint with a drug
/// that forms no known positive with the kept endpoint. The negative keeps
/// the positive's interaction type.
pub fn corrupt_negatives(ds: &InteractionDataset, seed: u64) -> Result<InteractionDataset> {
    if ds.entities[0] != ds.entities[1] {
        return Err(Error::Invalid("endpoint corruption needs a same-role dataset".into()));
    }
    let [pool, _] = pools(ds, true);
    let positives: HashSet<(String, String)> = ds
        .rows
        .iter()
        .filter(|r| r.label == 1.0)
        .map(|r| pair_key(&r.entities[0].cache_key(), &r.entities[1].cache_key(), true))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = ds.clone();
    out.rejects.clear();
    let mut skipped = 0;
    for r in ds.rows.iter().filter(|r| r.label == 1.0) {
        let first = rng.gen_range(0..2usize);
        let mut made = None;
        for keep in [first, 1 - first] {
            let kept = r.entities[keep].cache_key();
            let candidates: Vec<usize> = (0..pool.len())
                .filter(|&d| pool[d].0 != kept && !positives.contains(&pair_key(&kept, &pool[d].0, true)))
                .collect();
            if let Some(&d) = candidates.choose(&mut rng) {
                let mut entities = r.entities.clone();
                entities[1 - keep] = pool[d].1.clone();
                made = Some(entities);
                break;
            }
        }
        match made {
            Some(entities) => out.rows.push(Pair {
                entities,
                label: 0.0,
                group: r.group,
            }),
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        log::warn!("{skipped} positives had no corruptible endpoint");
    }
    Ok(out)
}
