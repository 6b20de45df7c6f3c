//! 3-D coordinate generation behind a pluggable backend.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::MolecularGraph;
use crate::error::{Error, Result};

pub trait ConformerBackend: Send + Sync {
    fn name(&self) -> &str;
    fn embed(&self, graph: &MolecularGraph, seed: u64) -> Result<Vec<[f64; 3]>>;
}

/// Attach coordinates produced by `backend`.
pub fn embed_conformer(
    graph: &MolecularGraph,
    backend: Option<&dyn ConformerBackend>,
    seed: u64,
) -> Result<MolecularGraph> {
    let backend = backend.ok_or_else(|| Error::AdapterUnavailable("conformer backend".into()))?;
    let coords = backend.embed(graph, seed)?;
    if coords.len() != graph.atom_count() {
        return Err(Error::DimensionMismatch {
            what: format!("{} coordinates", backend.name()),
            expected: graph.atom_count(),
            actual: coords.len(),
        });
    }
    let mut out = graph.clone();
    out.coords = Some(coords);
    Ok(out)
}

/// Force-directed layout: bonded atoms pulled to `bond_length`, all other
/// pairs pushed apart to at least `contact`. Seeded random start.
#[derive(Clone, Debug)]
pub struct SpringEmbedder {
    pub bond_length: f64,
    pub contact: f64,
    pub iterations: usize,
}

impl Default for SpringEmbedder {
    fn default() -> Self {
        Self {
            bond_length: 1.5,
            contact: 2.5,
            iterations: 300,
        }
    }
}

impl ConformerBackend for SpringEmbedder {
    fn name(&self) -> &str {
        "spring"
    }

    fn embed(&self, graph: &MolecularGraph, seed: u64) -> Result<Vec<[f64; 3]>> {
        let n = graph.atom_count();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spread = self.bond_length * (n as f64).cbrt();
        let mut pos: Vec<[f64; 3]> = (0..n)
            .map(|_| {
                [
                    rng.gen_range(-spread..=spread),
                    rng.gen_range(-spread..=spread),
                    rng.gen_range(-spread..=spread),
                ]
            })
            .collect();
        let mut bonded = vec![false; n * n];
        for b in &graph.bonds {
            bonded[b.a * n + b.b] = true;
            bonded[b.b * n + b.a] = true;
        }
        for it in 0..self.iterations {
            let step = 0.1 * (1.0 - it as f64 / self.iterations as f64);
            let mut delta = vec![[0.0; 3]; n];
            for i in 0..n {
                for j in i + 1..n {
                    let d: Vec<f64> = (0..3).map(|k| pos[j][k] - pos[i][k]).collect();
                    let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt().max(1e-6);
                    let target = if bonded[i * n + j] {
                        Some(self.bond_length)
                    } else if r < self.contact {
                        Some(self.contact)
                    } else {
                        None
                    };
                    if let Some(t) = target {
                        let f = (r - t) / r;
                        for k in 0..3 {
                            delta[i][k] += f * d[k];
                            delta[j][k] -= f * d[k];
                        }
                    }
                }
            }
            for (p, d) in pos.iter_mut().zip(&delta) {
                for k in 0..3 {
                    p[k] += step * d[k];
                }
            }
        }
        Ok(pos)
    }
}
