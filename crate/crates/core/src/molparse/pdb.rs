//! Fixed-column PDB reader reduced to one CA atom per residue.

use log::warn;

use super::{distance, EntityGraph};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Residue {
    pub code: char,
    pub chain: char,
    pub seq_num: i32,
    pub insertion: char,
    pub ca: [f64; 3],
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProteinStructure {
    pub residues: Vec<Residue>,
    /// Messages about residues dropped while reading.
    pub warnings: Vec<String>,
}

impl ProteinStructure {
    pub fn sequence(&self) -> String {
        self.residues.iter().map(|r| r.code).collect()
    }

    pub fn chain_ids(&self) -> Vec<char> {
        let mut out: Vec<char> = Vec::new();
        for r in &self.residues {
            if !out.contains(&r.chain) {
                out.push(r.chain);
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.residues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residues.is_empty()
    }

    pub fn coords(&self) -> Vec<[f64; 3]> {
        self.residues.iter().map(|r| r.ca).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> ProteinStructure {
        ProteinStructure {
            residues: indices.iter().map(|&i| self.residues[i].clone()).collect(),
            warnings: Vec::new(),
        }
    }
}

pub fn three_to_one(name: &str) -> char {
    match name {
        "ALA" => 'A',
        "ARG" => 'R',
        "ASN" => 'N',
        "ASP" => 'D',
        "CYS" => 'C',
        "GLN" => 'Q',
        "GLU" => 'E',
        "GLY" => 'G',
        "HIS" => 'H',
        "ILE" => 'I',
        "LEU" => 'L',
        "LYS" => 'K',
        "MET" => 'M',
        "PHE" => 'F',
        "PRO" => 'P',
        "SER" => 'S',
        "THR" => 'T',
        "TRP" => 'W',
        "TYR" => 'Y',
        "VAL" => 'V',
        _ => 'X',
    }
}

struct Pending {
    key: (char, i32, char),
    code: char,
    ca: Option<([f64; 3], f64)>,
    line: usize,
}

fn column(line: &str, from: usize, to: usize) -> &str {
    // 1-based inclusive column range, clipped to the line.
    let bytes = line.as_bytes();
    if from > bytes.len() {
        return "";
    }
    let end = to.min(bytes.len());
    std::str::from_utf8(&bytes[from - 1..end]).unwrap_or("")
}

fn column_char(line: &str, col: usize) -> char {
    line.as_bytes()
        .get(col - 1)
        .map(|&b| b as char)
        .unwrap_or(' ')
}

pub fn parse_pdb(content: &str) -> Result<ProteinStructure> {
    let mut residues: Vec<Pending> = Vec::new();
    for (lineno, line) in content.lines().enumerate() {
        if line.starts_with("ENDMDL") {
            break;
        }
        if !line.starts_with("ATOM  ") {
            continue;
        }
        if !line.is_ascii() {
            return Err(Error::parse(lineno + 1, "non-ASCII ATOM record"));
        }
        let atom_name = column(line, 13, 16).trim();
        let res_name = column(line, 18, 20).trim();
        let chain = column_char(line, 22);
        let seq_num: i32 = column(line, 23, 26)
            .trim()
            .parse()
            .map_err(|_| Error::parse(lineno + 1, "bad residue number"))?;
        let insertion = column_char(line, 27);
        let key = (chain, seq_num, insertion);

        if residues.last().map(|r| r.key) != Some(key) {
            if let Some(existing) = residues.iter().position(|r| r.key == key) {
                // Interleaved records for a residue already opened: keep appending to it.
                let r = residues.remove(existing);
                residues.push(r);
            } else {
                residues.push(Pending {
                    key,
                    code: three_to_one(res_name),
                    ca: None,
                    line: lineno + 1,
                });
            }
        }
        if atom_name != "CA" {
            continue;
        }
        let mut xyz = [0.0f64; 3];
        for (k, (from, to)) in [(31, 38), (39, 46), (47, 54)].into_iter().enumerate() {
            xyz[k] = column(line, from, to)
                .trim()
                .parse()
                .map_err(|_| Error::parse(lineno + 1, "bad coordinate field"))?;
            if !xyz[k].is_finite() {
                return Err(Error::parse(lineno + 1, "non-finite coordinate"));
            }
        }
        let occupancy: f64 = column(line, 55, 60).trim().parse().unwrap_or(1.0);
        let current = residues.last_mut().expect("residue opened above");
        match current.ca {
            Some((_, occ)) if occ >= occupancy => {}
            _ => current.ca = Some((xyz, occupancy)),
        }
    }

    let mut out = ProteinStructure::default();
    residues.sort_by_key(|r| r.line);
    for r in residues {
        match r.ca {
            Some((ca, _)) => out.residues.push(Residue {
                code: r.code,
                chain: r.key.0,
                seq_num: r.key.1,
                insertion: r.key.2,
                ca,
            }),
            None => {
                let msg = format!(
                    "dropped residue {}{}{} (line {}): no CA atom",
                    r.key.0,
                    r.key.1,
                    r.key.2.to_string().trim(),
                    r.line
                );
                warn!("{msg}");
                out.warnings.push(msg);
            }
        }
    }
    if out.residues.is_empty() {
        return Err(Error::parse(0, "no CA atoms found"));
    }
    Ok(out)
}

/// Undirected CA contact edges (both directions listed) within `cutoff` Å.
pub fn residue_edges(structure: &ProteinStructure, cutoff: f64) -> Vec<(usize, usize)> {
    let n = structure.residues.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && distance(&structure.residues[i].ca, &structure.residues[j].ca) <= cutoff {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// Residue contact graph with one-hot residue node features.
pub fn build_residue_graph(structure: &ProteinStructure, cutoff: f64) -> Result<EntityGraph> {
    if structure.is_empty() {
        return Err(Error::EmptySequence);
    }
    if !(cutoff > 0.0) {
        return Err(Error::Invalid(format!("cutoff must be positive, got {cutoff}")));
    }
    crate::featurize::protein::residue_graph_features(structure, cutoff, None)
}
