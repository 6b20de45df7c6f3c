//! Molecular input parsing: SMILES strings, PDB structures, residue graphs,
//! conformers and binding pockets.

pub mod conformer;
pub mod elements;
pub mod pdb;
pub mod pocket;
pub mod smiles;

pub use conformer::{embed_conformer, ConformerBackend, SpringEmbedder};
pub use pdb::{build_residue_graph, parse_pdb, ProteinStructure, Residue};
pub use pocket::{extract_pocket, PocketFinder, DEFAULT_POCKET_RADIUS};
pub use smiles::parse_smiles;

use std::collections::VecDeque;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    pub fn index(self) -> usize {
        match self {
            BondOrder::Single => 0,
            BondOrder::Double => 1,
            BondOrder::Triple => 2,
            BondOrder::Aromatic => 3,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            BondOrder::Single => '-',
            BondOrder::Double => '=',
            BondOrder::Triple => '#',
            BondOrder::Aromatic => ':',
        }
    }

    /// Bond valence contribution with aromatic bonds counted as 1.
    fn valence(self) -> u32 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub atomic_number: u8,
    pub degree: usize,
    pub formal_charge: i32,
    pub aromatic: bool,
    pub in_ring: bool,
    /// Attached hydrogens, whether written in brackets or implied by valence.
    pub implicit_h: u32,
}

impl Atom {
    pub fn symbol(&self) -> &'static str {
        elements::symbol(self.atomic_number)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MolecularGraph {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
    pub coords: Option<Vec<[f64; 3]>>,
}

impl MolecularGraph {
    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    /// Per-atom `(neighbor, bond index)` lists.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.atoms.len()];
        for (k, b) in self.bonds.iter().enumerate() {
            adj[b.a].push((b.b, k));
            adj[b.b].push((b.a, k));
        }
        adj
    }

    /// Relabel atoms so that old atom `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> MolecularGraph {
        assert_eq!(perm.len(), self.atoms.len());
        let mut atoms = self.atoms.clone();
        for (i, &p) in perm.iter().enumerate() {
            atoms[p] = self.atoms[i].clone();
        }
        let bonds = self
            .bonds
            .iter()
            .map(|b| Bond {
                a: perm[b.a],
                b: perm[b.b],
                order: b.order,
            })
            .collect();
        let coords = self.coords.as_ref().map(|c| {
            let mut out = c.clone();
            for (i, &p) in perm.iter().enumerate() {
                out[p] = c[i];
            }
            out
        });
        MolecularGraph {
            atoms,
            bonds,
            coords,
        }
    }

    /// Recompute degrees and ring flags from the bond list.
    pub(crate) fn refresh_topology(&mut self) {
        for a in &mut self.atoms {
            a.degree = 0;
            a.in_ring = false;
        }
        for b in &self.bonds {
            self.atoms[b.a].degree += 1;
            self.atoms[b.b].degree += 1;
        }
        let adj = self.adjacency();
        for (k, bond) in self.bonds.iter().enumerate() {
            if reachable_without(&adj, bond.a, bond.b, k) {
                self.atoms[bond.a].in_ring = true;
                self.atoms[bond.b].in_ring = true;
            }
        }
    }
}

/// Whether `to` can be reached from `from` without traversing bond `skip`.
fn reachable_without(adj: &[Vec<(usize, usize)>], from: usize, to: usize, skip: usize) -> bool {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(u) = queue.pop_front() {
        for &(v, k) in &adj[u] {
            if k == skip || seen[v] {
                continue;
            }
            if v == to {
                return true;
            }
            seen[v] = true;
            queue.push_back(v);
        }
    }
    false
}

/// Generic graph carrier shared by drug and protein graph encoders.
///
/// `edges` lists both directions of every undirected edge.
#[derive(Clone, Debug, PartialEq)]
pub struct EntityGraph {
    pub node_features: ndarray::Array2<f64>,
    pub edges: Vec<(usize, usize)>,
    pub edge_features: Option<ndarray::Array2<f64>>,
    pub coords: Option<Vec<[f64; 3]>>,
}

impl EntityGraph {
    pub fn node_count(&self) -> usize {
        self.node_features.nrows()
    }

    pub fn feature_width(&self) -> usize {
        self.node_features.ncols()
    }

    /// Dense adjacency (no self loops).
    pub fn adjacency_matrix(&self) -> ndarray::Array2<f64> {
        let n = self.node_count();
        let mut a = ndarray::Array2::zeros((n, n));
        for &(i, j) in &self.edges {
            a[[i, j]] = 1.0;
        }
        a
    }

    pub fn is_symmetric(&self) -> bool {
        let set: std::collections::HashSet<_> = self.edges.iter().copied().collect();
        self.edges.iter().all(|&(i, j)| set.contains(&(j, i)))
    }
}

pub(crate) fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

pub(crate) fn bond_valence_sum(graph: &MolecularGraph, atom: usize) -> u32 {
    graph
        .bonds
        .iter()
        .filter(|b| b.a == atom || b.b == atom)
        .map(|b| b.order.valence())
        .sum()
}
