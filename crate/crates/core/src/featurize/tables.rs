//! Shipped amino-acid property tables, residue distance matrices and
//! subword vocabularies.

use std::sync::OnceLock;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Canonical residue order used by every table and descriptor block.
pub const AMINO_ACIDS: &str = "ARNDCQEGHILKMFPSTWYV";

pub(crate) const AA_PROPERTIES_CSV: &str = include_str!("../../data/aa_properties.csv");
pub(crate) const SCHNEIDER_WREDE_CSV: &str = include_str!("../../data/schneider_wrede.csv");
pub(crate) const GRANTHAM_CSV: &str = include_str!("../../data/grantham.csv");
pub(crate) const ESPF_DRUG_TSV: &str = include_str!("../../data/espf_drug.tsv");
pub(crate) const ESPF_PROTEIN_TSV: &str = include_str!("../../data/espf_protein.tsv");
const CHECKSUMS: &str = include_str!("../../data/CHECKSUMS");

const FILES: [(&str, &str); 5] = [
    ("aa_properties.csv", AA_PROPERTIES_CSV),
    ("schneider_wrede.csv", SCHNEIDER_WREDE_CSV),
    ("grantham.csv", GRANTHAM_CSV),
    ("espf_drug.tsv", ESPF_DRUG_TSV),
    ("espf_protein.tsv", ESPF_PROTEIN_TSV),
];

/// Compare every embedded data file against the `CHECKSUMS` manifest.
pub fn verify_checksums() -> Result<()> {
    for (name, body) in FILES {
        let expected = CHECKSUMS
            .lines()
            .find_map(|l| {
                let (sum, file) = l.split_once("  ")?;
                (file.trim() == name).then_some(sum.trim())
            })
            .ok_or_else(|| Error::Invalid(format!("no checksum recorded for {name}")))?;
        let actual = hex(&Sha256::digest(body.as_bytes()));
        if actual != expected {
            return Err(Error::Invalid(format!(
                "checksum mismatch for {name}: expected {expected}, got {actual}"
            )));
        }
    }
    Ok(())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn aa_index(c: char) -> Option<usize> {
    AMINO_ACIDS.find(c)
}

/// Per-residue physicochemical property values.
#[derive(Debug, Clone)]
pub struct PropertyTable {
    names: Vec<String>,
    /// `values[p][r]`: property `p` for residue `AMINO_ACIDS[r]`.
    values: Vec<[f64; 20]>,
}

impl PropertyTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        let header = rows
            .next()
            .ok_or_else(|| Error::Invalid("empty property table".into()))?;
        let names: Vec<String> = header.split(',').skip(1).map(str::to_string).collect();
        let mut values = vec![[f64::NAN; 20]; names.len()];
        for line in rows {
            let mut cells = line.split(',');
            let residue = cells.next().unwrap_or_default();
            let r = residue
                .chars()
                .next()
                .and_then(aa_index)
                .ok_or_else(|| Error::Invalid(format!("unknown residue `{residue}` in property table")))?;
            for (p, cell) in cells.enumerate() {
                let v: f64 = cell
                    .trim()
                    .parse()
                    .map_err(|_| Error::Invalid(format!("bad property value `{cell}`")))?;
                *values
                    .get_mut(p)
                    .ok_or_else(|| Error::Invalid("too many property columns".into()))?
                    .get_mut(r)
                    .unwrap() = v;
            }
        }
        if values.iter().flatten().any(|v| v.is_nan()) {
            return Err(Error::Invalid("property table incomplete".into()));
        }
        Ok(Self { names, values })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, name: &str) -> Option<&[f64; 20]> {
        self.names.iter().position(|n| n == name).map(|i| &self.values[i])
    }

    pub fn property(&self, name: &str) -> &[f64; 20] {
        self.get(name)
            .unwrap_or_else(|| panic!("property `{name}` missing from table"))
    }
}

pub type DistanceMatrix = [[f64; 20]; 20];

pub fn parse_distance_matrix(text: &str) -> Result<DistanceMatrix> {
    let mut rows = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header: Vec<usize> = rows
        .next()
        .ok_or_else(|| Error::Invalid("empty distance matrix".into()))?
        .split(',')
        .skip(1)
        .map(|c| c.chars().next().and_then(aa_index))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::Invalid("bad distance matrix header".into()))?;
    let mut m = [[f64::NAN; 20]; 20];
    for line in rows {
        let mut cells = line.split(',');
        let r = cells
            .next()
            .and_then(|c| c.chars().next())
            .and_then(aa_index)
            .ok_or_else(|| Error::Invalid("bad distance matrix row".into()))?;
        for (k, cell) in cells.enumerate() {
            let c = *header.get(k).ok_or_else(|| Error::Invalid("ragged distance matrix".into()))?;
            m[r][c] = cell
                .trim()
                .parse()
                .map_err(|_| Error::Invalid(format!("bad distance `{cell}`")))?;
        }
    }
    if m.iter().flatten().any(|v| v.is_nan()) {
        return Err(Error::Invalid("distance matrix incomplete".into()));
    }
    Ok(m)
}

pub struct Tables {
    pub properties: PropertyTable,
    pub schneider_wrede: DistanceMatrix,
    pub grantham: DistanceMatrix,
}

pub fn tables() -> &'static Tables {
    static T: OnceLock<Tables> = OnceLock::new();
    T.get_or_init(|| Tables {
        properties: PropertyTable::parse(AA_PROPERTIES_CSV).expect("shipped property table"),
        schneider_wrede: parse_distance_matrix(SCHNEIDER_WREDE_CSV).expect("shipped matrix"),
        grantham: parse_distance_matrix(GRANTHAM_CSV).expect("shipped matrix"),
    })
}
