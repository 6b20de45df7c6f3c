//! Protein sequence descriptors and residue-graph node features.

use log::warn;
use ndarray::Array2;

use super::drug::onehot_grid;
use super::tables::{aa_index, tables, DistanceMatrix, AMINO_ACIDS};
use super::FeatureVector;
use crate::error::{Error, Result};
use crate::molparse::pdb::residue_edges;
use crate::molparse::{EntityGraph, ProteinStructure};

pub const AAC_DIM: usize = 8420;
pub const CONJOINT_TRIAD_DIM: usize = 343;
pub const QSO_DIM: usize = 100;
pub const PSEAAC_DIM: usize = 30;
pub const AUTOCORRELATION_DIM: usize = 720;
pub const CTD_DIM: usize = 147;
pub const RESIDUE_ONEHOT_DIM: usize = 21;

pub const QSO_MAXLAG: usize = 30;
pub const QSO_WEIGHT: f64 = 0.1;
pub const PSEAAC_LAMBDA: usize = 10;
pub const PSEAAC_WEIGHT: f64 = 0.05;
pub const AUTOCORRELATION_MAXLAG: usize = 30;

/// Substitutions for ambiguous or non-standard residue letters.
pub const SUBSTITUTIONS: [(char, char); 6] = [
    ('B', 'D'),
    ('Z', 'E'),
    ('U', 'C'),
    ('O', 'K'),
    ('J', 'L'),
    ('X', 'A'),
];

/// Upper-cased, trimmed sequence as indices into [`AMINO_ACIDS`].
pub fn canonical_indices(seq: &str) -> Result<Vec<usize>> {
    let seq = seq.trim();
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut out = Vec::with_capacity(seq.len());
    let mut substituted = 0usize;
    for c in seq.chars().map(|c| c.to_ascii_uppercase()) {
        match aa_index(c) {
            Some(i) => out.push(i),
            None => {
                let to = SUBSTITUTIONS
                    .iter()
                    .find(|(from, _)| *from == c)
                    .map_or('A', |&(_, to)| to);
                substituted += 1;
                out.push(aa_index(to).expect("canonical substitute"));
            }
        }
    }
    if substituted > 0 {
        warn!("{substituted} non-canonical residue(s) substituted in sequence of length {}", out.len());
    }
    Ok(out)
}

fn require_len(seq: &[usize], min: usize) -> Result<()> {
    if seq.len() < min {
        return Err(Error::SequenceTooShort {
            min,
            actual: seq.len(),
        });
    }
    Ok(())
}

/// Normalized 1-, 2- and 3-mer frequencies (20 + 400 + 8000).
pub fn aac_kmer(seq: &str) -> Result<FeatureVector> {
    let s = canonical_indices(seq)?;
    let mut v = vec![0.0; AAC_DIM];
    let mut offset = 0;
    for k in 1..=3usize {
        let block = 20usize.pow(k as u32);
        if s.len() >= k {
            let windows = s.len() - k + 1;
            for w in s.windows(k) {
                let idx = w.iter().fold(0, |acc, &r| acc * 20 + r);
                v[offset + idx] += 1.0;
            }
            for x in &mut v[offset..offset + block] {
                *x /= windows as f64;
            }
        }
        offset += block;
    }
    Ok(FeatureVector::new("AAC", v))
}

/// Seven dipole/side-chain-volume classes used by the conjoint triad.
pub fn triad_class(residue: usize) -> usize {
    match AMINO_ACIDS.as_bytes()[residue] {
        b'A' | b'G' | b'V' => 0,
        b'I' | b'L' | b'F' | b'P' => 1,
        b'Y' | b'M' | b'T' | b'S' => 2,
        b'H' | b'N' | b'Q' | b'W' => 3,
        b'R' | b'K' => 4,
        b'D' | b'E' => 5,
        _ => 6,
    }
}

pub fn conjoint_triad(seq: &str) -> Result<FeatureVector> {
    let s = canonical_indices(seq)?;
    require_len(&s, 3)?;
    let mut counts = vec![0.0; CONJOINT_TRIAD_DIM];
    for w in s.windows(3) {
        counts[triad_class(w[0]) * 49 + triad_class(w[1]) * 7 + triad_class(w[2])] += 1.0;
    }
    let min = counts.iter().copied().fold(f64::INFINITY, f64::min);
    let max = counts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (max - min).max(1e-12);
    let v = counts.iter().map(|c| (c - min) / span).collect();
    Ok(FeatureVector::new("Conjoint_triad", v))
}

fn composition(s: &[usize]) -> [f64; 20] {
    let mut f = [0.0; 20];
    for &r in s {
        f[r] += 1.0;
    }
    for x in &mut f {
        *x /= s.len() as f64;
    }
    f
}

fn coupling_numbers(s: &[usize], m: &DistanceMatrix, maxlag: usize) -> Vec<f64> {
    (1..=maxlag)
        .map(|d| {
            s.windows(d + 1)
                .map(|w| m[w[0]][w[d]].powi(2))
                .sum()
        })
        .collect()
}

/// Quasi-sequence-order descriptor for one distance matrix (20 + `maxlag`).
pub fn quasi_seq_order_block(seq: &[usize], m: &DistanceMatrix, maxlag: usize, w: f64) -> Vec<f64> {
    let f = composition(seq);
    let tau = coupling_numbers(seq, m, maxlag);
    let denom = 1.0 + w * tau.iter().sum::<f64>();
    f.iter()
        .map(|x| x / denom)
        .chain(tau.iter().map(|t| w * t / denom))
        .collect()
}

/// Schneider–Wrede block followed by the Grantham block.
pub fn quasi_seq_order(seq: &str, maxlag: usize, w: f64) -> Result<FeatureVector> {
    let s = canonical_indices(seq)?;
    require_len(&s, maxlag + 1)?;
    let t = tables();
    let mut v = quasi_seq_order_block(&s, &t.schneider_wrede, maxlag, w);
    v.extend(quasi_seq_order_block(&s, &t.grantham, maxlag, w));
    Ok(FeatureVector::new("Quasi-seq", v))
}

/// Zero-mean, unit (population) variance over the 20 residues.
pub fn standardize(p: &[f64; 20]) -> [f64; 20] {
    let mean = p.iter().sum::<f64>() / 20.0;
    let sd = (p.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 20.0).sqrt();
    let mut out = [0.0; 20];
    for (o, x) in out.iter_mut().zip(p) {
        *o = (x - mean) / sd;
    }
    out
}

pub const PSEAAC_PROPERTIES: [&str; 3] =
    ["pse_hydrophobicity", "pse_hydrophilicity", "pse_side_chain_mass"];

/// Type-1 pseudo amino-acid composition (20 + `lambda`).
pub fn pseudo_aac(seq: &str, lambda: usize, w: f64) -> Result<FeatureVector> {
    let s = canonical_indices(seq)?;
    require_len(&s, lambda + 1)?;
    let props: Vec<[f64; 20]> = PSEAAC_PROPERTIES
        .iter()
        .map(|n| standardize(tables().properties.property(n)))
        .collect();
    let corr = |a: usize, b: usize| -> f64 {
        props.iter().map(|p| (p[b] - p[a]).powi(2)).sum::<f64>() / props.len() as f64
    };
    let theta: Vec<f64> = (1..=lambda)
        .map(|d| {
            s.windows(d + 1).map(|win| corr(win[0], win[d])).sum::<f64>() / (s.len() - d) as f64
        })
        .collect();
    let f = composition(&s);
    let denom = 1.0 + w * theta.iter().sum::<f64>();
    let v = f
        .iter()
        .map(|x| x / denom)
        .chain(theta.iter().map(|t| w * t / denom))
        .collect();
    Ok(FeatureVector::new("PseudoAAC", v))
}

pub const AUTOCORRELATION_PROPERTIES: [&str; 8] = [
    "hydrophobicity",
    "av_flexibility",
    "polarizability",
    "free_energy",
    "residue_asa",
    "residue_volume",
    "steric",
    "mutability",
];

/// Normalized Moreau–Broto, Moran and Geary autocorrelations, each over
/// 8 standardized properties and lags `1..=maxlag`.
pub fn autocorrelation(seq: &str, maxlag: usize) -> Result<FeatureVector> {
    let s = canonical_indices(seq)?;
    require_len(&s, maxlag + 1)?;
    let n = s.len();
    let per = AUTOCORRELATION_PROPERTIES.len() * maxlag;
    let mut v = vec![0.0; 3 * per];
    for (pi, name) in AUTOCORRELATION_PROPERTIES.iter().enumerate() {
        let table = standardize(tables().properties.property(name));
        let p: Vec<f64> = s.iter().map(|&r| table[r]).collect();
        let mean = p.iter().sum::<f64>() / n as f64;
        let ss: f64 = p.iter().map(|x| (x - mean).powi(2)).sum();
        let ss = if ss < 1e-12 { 0.0 } else { ss };
        for d in 1..=maxlag {
            let m = (n - d) as f64;
            let mut mb = 0.0;
            let mut moran = 0.0;
            let mut geary = 0.0;
            for i in 0..n - d {
                mb += p[i] * p[i + d];
                moran += (p[i] - mean) * (p[i + d] - mean);
                geary += (p[i] - p[i + d]).powi(2);
            }
            let k = pi * maxlag + d - 1;
            v[k] = mb / m;
            v[per + k] = if ss == 0.0 { 0.0 } else { (moran / m) / (ss / n as f64) };
            v[2 * per + k] = if ss == 0.0 {
                0.0
            } else {
                ((n - 1) as f64 / (2.0 * m)) * geary / ss
            };
        }
    }
    Ok(FeatureVector::new("Auto_correlation", v))
}

/// Three-class residue groupings for composition/transition/distribution.
pub const CTD_GROUPS: [(&str, [&str; 3]); 7] = [
    ("hydrophobicity", ["RKEDQN", "GASTPHY", "CLVIMFW"]),
    ("normalized_vdw_volume", ["GASTPDC", "NVEQIL", "MHKFRYW"]),
    ("polarity", ["LIFWCMVY", "PATGS", "HQRKNED"]),
    ("charge", ["KR", "ANCQGHILMFPSTWYV", "DE"]),
    ("secondary_structure", ["EALMQKRH", "VIYCWFT", "GNPSD"]),
    ("solvent_accessibility", ["ALFCGIVW", "RKQEND", "MPSTHY"]),
    ("polarizability", ["GASDT", "CPNVEQIL", "KMHFRYW"]),
];

pub fn ctd_class(group: usize, residue: usize) -> usize {
    let c = AMINO_ACIDS.as_bytes()[residue] as char;
    CTD_GROUPS[group]
        .1
        .iter()
        .position(|g| g.contains(c))
        .expect("groupings cover all residues")
}

pub fn ctd(seq: &str) -> Result<FeatureVector> {
    let s = canonical_indices(seq)?;
    require_len(&s, 2)?;
    let n = s.len();
    let mut v = Vec::with_capacity(CTD_DIM);
    for g in 0..CTD_GROUPS.len() {
        let classes: Vec<usize> = s.iter().map(|&r| ctd_class(g, r)).collect();
        for c in 0..3 {
            v.push(classes.iter().filter(|&&x| x == c).count() as f64 / n as f64);
        }
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            let t = classes
                .windows(2)
                .filter(|w| (w[0] == a && w[1] == b) || (w[0] == b && w[1] == a))
                .count();
            v.push(t as f64 / (n - 1) as f64);
        }
        for c in 0..3 {
            let positions: Vec<usize> = classes
                .iter()
                .enumerate()
                .filter(|(_, &x)| x == c)
                .map(|(i, _)| i + 1)
                .collect();
            let num = positions.len();
            if num == 0 {
                v.extend([0.0; 5]);
                continue;
            }
            v.push(positions[0] as f64 / n as f64);
            for q in [0.25, 0.5, 0.75, 1.0] {
                let idx = ((num as f64 * q).floor() as usize).max(1) - 1;
                v.push(positions[idx] as f64 / n as f64);
            }
        }
    }
    Ok(FeatureVector::new("CTD", v))
}

/// 25 residue letters; anything else maps to the trailing unknown row.
pub const PROTEIN_ALPHABET: &str = "ABCDEFGHIKLMNOPQRSTUVWXYZ";
pub const PROTEIN_MAX_LEN: usize = 1000;

pub fn seq_onehot(seq: &str, max_len: usize) -> Array2<f64> {
    onehot_grid(&seq.trim().to_ascii_uppercase(), PROTEIN_ALPHABET, max_len)
}

/// Per-residue embedding source (e.g. a protein language model).
pub trait ResidueEmbedder: Send + Sync {
    fn name(&self) -> &str;
    fn width(&self) -> usize;
    /// `len(sequence) x width` matrix.
    fn embed(&self, sequence: &str) -> Result<Array2<f64>>;
}

/// One-hot residue identity (20 canonical + other), optionally followed by
/// per-residue embeddings; edges from the CA contact rule.
pub fn residue_graph_features(
    structure: &ProteinStructure,
    cutoff: f64,
    embedder: Option<&dyn ResidueEmbedder>,
) -> Result<EntityGraph> {
    let n = structure.len();
    if n == 0 {
        return Err(Error::EmptySequence);
    }
    let extra = embedder.map(|e| -> Result<Array2<f64>> {
        let m = e.embed(&structure.sequence())?;
        if m.nrows() != n {
            return Err(Error::DimensionMismatch {
                what: format!("{} residue rows", e.name()),
                expected: n,
                actual: m.nrows(),
            });
        }
        if m.ncols() != e.width() {
            return Err(Error::DimensionMismatch {
                what: format!("{} embedding width", e.name()),
                expected: e.width(),
                actual: m.ncols(),
            });
        }
        Ok(m)
    });
    let extra = extra.transpose()?;
    let width = RESIDUE_ONEHOT_DIM + extra.as_ref().map_or(0, |m| m.ncols());
    let mut nodes = Array2::zeros((n, width));
    for (i, r) in structure.residues.iter().enumerate() {
        nodes[[i, aa_index(r.code).unwrap_or(20)]] = 1.0;
        if let Some(m) = &extra {
            for k in 0..m.ncols() {
                nodes[[i, RESIDUE_ONEHOT_DIM + k]] = m[[i, k]];
            }
        }
    }
    Ok(EntityGraph {
        node_features: nodes,
        edges: residue_edges(structure, cutoff),
        edge_features: None,
        coords: Some(structure.coords()),
    })
}
