//! Small-molecule featurizers: circular and path fingerprints, SMILES
//! one-hot grids and atom graphs.

use std::collections::{BTreeSet, HashSet};

use ndarray::Array2;

use super::FeatureVector;
use crate::molparse::{BondOrder, EntityGraph, MolecularGraph};

pub const MORGAN_DIM: usize = 1024;
pub const DAYLIGHT_DIM: usize = 2048;
pub const PUBCHEM_DIM: usize = 881;
pub const ERG_DIM: usize = 315;
pub const MORGAN_RADIUS: usize = 2;
pub const DAYLIGHT_MAX_PATH: usize = 7;

const SEED: u64 = 0x6d6f_6c72_656c_0001;

/// 64-bit finalizer (splitmix64).
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-dependent hash of a word sequence.
pub fn hash_words(words: impl IntoIterator<Item = u64>) -> u64 {
    words
        .into_iter()
        .fold(SEED, |h, w| mix64(h ^ mix64(w)))
}

fn atom_invariant(graph: &MolecularGraph, i: usize) -> u64 {
    let a = &graph.atoms[i];
    hash_words([
        u64::from(a.atomic_number),
        a.degree as u64,
        a.formal_charge as i64 as u64,
        u64::from(a.implicit_h),
        u64::from(a.in_ring),
    ])
}

/// Identifiers of all distinct circular environments up to `radius`.
pub fn morgan_environments(graph: &MolecularGraph, radius: usize) -> Vec<u64> {
    let n = graph.atom_count();
    let adj = graph.adjacency();
    let mut ids: Vec<u64> = (0..n).map(|i| atom_invariant(graph, i)).collect();
    let mut out: Vec<u64> = ids.clone();
    let mut bond_sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    let mut seen: HashSet<BTreeSet<usize>> = HashSet::new();

    for r in 1..=radius {
        let mut next_ids = Vec::with_capacity(n);
        let mut next_sets = Vec::with_capacity(n);
        for i in 0..n {
            let mut nbrs: Vec<(usize, u64)> = adj[i]
                .iter()
                .map(|&(j, k)| (graph.bonds[k].order.index(), ids[j]))
                .collect();
            nbrs.sort_unstable();
            let words = std::iter::once(r as u64)
                .chain(std::iter::once(ids[i]))
                .chain(nbrs.iter().flat_map(|&(o, id)| [o as u64, id]));
            next_ids.push(hash_words(words));
            let mut set = bond_sets[i].clone();
            for &(j, k) in &adj[i] {
                set.insert(k);
                set.extend(bond_sets[j].iter().copied());
            }
            next_sets.push(set);
        }
        // Keep one identifier per new bond set: environments that did not
        // grow, or that repeat a bond set already covered, are redundant.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| next_ids[i]);
        for i in order {
            let set = &next_sets[i];
            if set.len() == bond_sets[i].len() || seen.contains(set) {
                continue;
            }
            seen.insert(set.clone());
            out.push(next_ids[i]);
        }
        ids = next_ids;
        bond_sets = next_sets;
    }
    out
}

fn fold(name: &'static str, ids: impl IntoIterator<Item = u64>, dim: usize) -> FeatureVector {
    let mut v = vec![0.0; dim];
    for id in ids {
        v[(id % dim as u64) as usize] = 1.0;
    }
    FeatureVector::new(name, v)
}

/// ECFP-style circular fingerprint, radius 2, folded to 1024 bits.
pub fn morgan_fp(graph: &MolecularGraph) -> FeatureVector {
    fold("Morgan", morgan_environments(graph, MORGAN_RADIUS), MORGAN_DIM)
}

fn atom_label(graph: &MolecularGraph, i: usize) -> String {
    let a = &graph.atoms[i];
    if a.aromatic {
        a.symbol().to_ascii_lowercase()
    } else {
        a.symbol().to_string()
    }
}

/// Direction-independent strings of all simple paths with 1..=`max_bonds` bonds.
pub fn path_strings(graph: &MolecularGraph, max_bonds: usize) -> BTreeSet<String> {
    let adj = graph.adjacency();
    let labels: Vec<String> = (0..graph.atom_count()).map(|i| atom_label(graph, i)).collect();
    let mut out = BTreeSet::new();
    let mut atoms = Vec::new();
    let mut bonds = Vec::new();
    let mut on_path = vec![false; graph.atom_count()];

    fn render(labels: &[String], atoms: &[usize], bonds: &[BondOrder], reverse: bool) -> String {
        let mut s = String::new();
        let n = atoms.len();
        for k in 0..n {
            let a = if reverse { atoms[n - 1 - k] } else { atoms[k] };
            s.push_str(&labels[a]);
            if k + 1 < n {
                let b = if reverse { bonds[n - 2 - k] } else { bonds[k] };
                s.push(b.symbol());
            }
        }
        s
    }

    #[allow(clippy::too_many_arguments)]
    fn walk(
        u: usize,
        graph: &MolecularGraph,
        adj: &[Vec<(usize, usize)>],
        labels: &[String],
        max_bonds: usize,
        atoms: &mut Vec<usize>,
        bonds: &mut Vec<BondOrder>,
        on_path: &mut [bool],
        out: &mut BTreeSet<String>,
    ) {
        if !bonds.is_empty() {
            let f = render(labels, atoms, bonds, false);
            let r = render(labels, atoms, bonds, true);
            out.insert(f.min(r));
        }
        if bonds.len() == max_bonds {
            return;
        }
        for &(v, k) in &adj[u] {
            if on_path[v] {
                continue;
            }
            on_path[v] = true;
            atoms.push(v);
            bonds.push(graph.bonds[k].order);
            walk(v, graph, adj, labels, max_bonds, atoms, bonds, on_path, out);
            bonds.pop();
            atoms.pop();
            on_path[v] = false;
        }
    }

    for start in 0..graph.atom_count() {
        on_path[start] = true;
        atoms.push(start);
        walk(
            start, graph, &adj, &labels, max_bonds, &mut atoms, &mut bonds, &mut on_path, &mut out,
        );
        atoms.pop();
        on_path[start] = false;
    }
    out
}

/// Path-based fingerprint over simple paths of up to 7 bonds, 2048 bits.
pub fn daylight_fp(graph: &MolecularGraph) -> FeatureVector {
    let ids = path_strings(graph, DAYLIGHT_MAX_PATH)
        .into_iter()
        .map(|p| hash_words(p.bytes().map(u64::from)));
    fold("Daylight", ids, DAYLIGHT_DIM)
}

/// 64 SMILES characters; anything else maps to the trailing unknown row.
pub const SMILES_ALPHABET: &str =
    "#%()+-./0123456789:=@[\\]ABCDEFGHIKLMNOPRSTUVWYZabcdeghilnoprstuy";
pub const SMILES_MAX_LEN: usize = 100;

/// `channels x max_len` one-hot grid over `alphabet` plus an unknown row.
pub fn onehot_grid(text: &str, alphabet: &str, max_len: usize) -> Array2<f64> {
    let chars: Vec<char> = alphabet.chars().collect();
    let unknown = chars.len();
    let mut grid = Array2::zeros((chars.len() + 1, max_len));
    for (pos, c) in text.chars().take(max_len).enumerate() {
        let row = chars.iter().position(|&a| a == c).unwrap_or(unknown);
        grid[[row, pos]] = 1.0;
    }
    grid
}

pub fn smiles_onehot(smiles: &str, max_len: usize) -> Array2<f64> {
    onehot_grid(smiles.trim(), SMILES_ALPHABET, max_len)
}

/// Element vocabulary of the atom one-hot block; the trailing slot is "other".
pub const ATOM_ELEMENTS: [&str; 42] = [
    "C", "N", "O", "S", "F", "Si", "P", "Cl", "Br", "Mg", "Na", "Ca", "Fe", "As", "Al", "I", "B",
    "V", "K", "Tl", "Yb", "Sb", "Sn", "Ag", "Pd", "Co", "Se", "Ti", "Zn", "Li", "Ge", "Cu", "Au",
    "Ni", "Cd", "In", "Mn", "Zr", "Cr", "Pt", "Hg", "Pb",
];
pub const ATOM_FEATURE_DIM: usize = ATOM_ELEMENTS.len() + 1 + 11 + 5 + 1 + 1 + 5;
pub const BOND_FEATURE_DIM: usize = 4;

pub fn atom_features(graph: &MolecularGraph, i: usize) -> Vec<f64> {
    let a = &graph.atoms[i];
    let mut f = vec![0.0; ATOM_FEATURE_DIM];
    let el = ATOM_ELEMENTS
        .iter()
        .position(|&s| s == a.symbol())
        .unwrap_or(ATOM_ELEMENTS.len());
    f[el] = 1.0;
    let mut off = ATOM_ELEMENTS.len() + 1;
    f[off + a.degree.min(10)] = 1.0;
    off += 11;
    f[off + (a.formal_charge.clamp(-2, 2) + 2) as usize] = 1.0;
    off += 5;
    f[off] = f64::from(u8::from(a.aromatic));
    f[off + 1] = f64::from(u8::from(a.in_ring));
    off += 2;
    f[off + (a.implicit_h as usize).min(4)] = 1.0;
    f
}

/// Node features (width 66) and bond-order edge features for graph encoders.
pub fn atom_graph_features(graph: &MolecularGraph) -> EntityGraph {
    let n = graph.atom_count();
    let mut nodes = Array2::zeros((n, ATOM_FEATURE_DIM));
    for i in 0..n {
        for (k, v) in atom_features(graph, i).into_iter().enumerate() {
            nodes[[i, k]] = v;
        }
    }
    let mut edges = Vec::with_capacity(2 * graph.bond_count());
    let mut edge_features = Array2::zeros((2 * graph.bond_count(), BOND_FEATURE_DIM));
    for (k, b) in graph.bonds.iter().enumerate() {
        edges.push((b.a, b.b));
        edges.push((b.b, b.a));
        edge_features[[2 * k, b.order.index()]] = 1.0;
        edge_features[[2 * k + 1, b.order.index()]] = 1.0;
    }
    EntityGraph {
        node_features: nodes,
        edges,
        edge_features: Some(edge_features),
        coords: graph.coords.clone(),
    }
}
