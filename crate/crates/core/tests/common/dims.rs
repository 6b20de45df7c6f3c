//! Featurizer output widths over a fixed 50-molecule / 50-protein corpus.

use std::sync::Arc;

use molrel::adapters::{Adapters, VectorAdapter};
use molrel::featurize::registry::{featurize, FeaturizeOptions, FeaturizerSpec};
use molrel::featurize::{Entity, FeaturizerId, Features};
use molrel::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic stand-in for a precomputed fingerprint table.
pub struct HashedBits(pub &'static str, pub usize);

impl VectorAdapter for HashedBits {
    fn name(&self) -> &str {
        self.0
    }
    fn lookup(&self, key: &str) -> Result<Vec<f64>> {
        let b = key.as_bytes();
        Ok((0..self.1).map(|i| f64::from((b[i % b.len()] as usize * 31 + i) % 5 == 0)).collect())
    }
}

pub fn adapters() -> Adapters {
    Adapters::new()
        .with_vector("ErG", Arc::new(HashedBits("ErG", 315)))
        .with_vector("PubChem", Arc::new(HashedBits("PubChem", 881)))
}

pub fn molecules(n: usize) -> Vec<String> {
    include_str!("../data/smiles_corpus.tsv")
        .lines()
        .skip(1)
        .filter_map(|l| l.split('\t').next())
        .filter(|s| !s.contains('.'))
        .take(n)
        .map(str::to_string)
        .collect()
}

pub fn proteins(n: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    (0..n)
        .map(|i| super::descriptors::random_sequence(&mut rng, 40 + 7 * i))
        .collect()
}

pub const EXPECTED: [(FeaturizerId, usize); 12] = [
    (FeaturizerId::Morgan, 1024),
    (FeaturizerId::Daylight, 2048),
    (FeaturizerId::ErG, 315),
    (FeaturizerId::PubChem, 881),
    (FeaturizerId::EspfDrug, 2586),
    (FeaturizerId::EspfProtein, 4114),
    (FeaturizerId::Aac, 8420),
    (FeaturizerId::PseudoAac, 30),
    (FeaturizerId::QuasiSeq, 100),
    (FeaturizerId::ConjointTriad, 343),
    (FeaturizerId::Autocorrelation, 720),
    (FeaturizerId::Ctd, 147),
];

/// `(featurizer, expected width, entities checked, mismatches)`.
pub fn suite() -> Vec<(&'static str, usize, usize, Vec<String>)> {
    let adapters = adapters();
    let drugs: Vec<Entity> = molecules(50).into_iter().map(Entity::drug).collect();
    let prots: Vec<Entity> = proteins(50).into_iter().map(Entity::protein).collect();
    let mut out = Vec::new();
    for (id, width) in EXPECTED {
        let corpus = match id.role() {
            molrel::featurize::registry::Role::Drug => &drugs,
            _ => &prots,
        };
        let spec = FeaturizerSpec::new(id);
        let mut bad = Vec::new();
        for e in corpus {
            match featurize(&spec, e, &adapters, &FeaturizeOptions::default()) {
                Ok(Features::Vector(v)) if v.len() == width => {}
                Ok(Features::Vector(v)) => bad.push(format!("{}: width {}", e.text(), v.len())),
                Ok(_) => bad.push(format!("{}: not a vector", e.text())),
                Err(err) => bad.push(format!("{}: {err}", e.text())),
            }
        }
        out.push((id.name(), width, corpus.len(), bad));
    }
    out
}
