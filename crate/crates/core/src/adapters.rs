//! Pluggable external providers: keyed fingerprint sets, pretrained
//! embeddings, per-residue embeddings, conformer and pocket backends.
//!
//! The shipped implementations read precomputed tables from disk; anything
//! else can be registered programmatically.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::encode::ExtensionEncoder;
use crate::error::{Error, Result};
use crate::featurize::protein::ResidueEmbedder;
use crate::molparse::{ConformerBackend, PocketFinder, SpringEmbedder};

/// Entity text (SMILES or sequence) to a fixed-width vector.
pub trait VectorAdapter: Send + Sync {
    fn name(&self) -> &str;
    fn lookup(&self, key: &str) -> Result<Vec<f64>>;
}

#[derive(Clone, Default)]
pub struct Adapters {
    vectors: HashMap<String, Arc<dyn VectorAdapter>>,
    residue: Option<Arc<dyn ResidueEmbedder>>,
    conformer: Option<Arc<dyn ConformerBackend>>,
    pocket: Option<Arc<dyn PocketFinder>>,
    encoders: HashMap<String, Arc<dyn ExtensionEncoder>>,
}

impl std::fmt::Debug for Adapters {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut names: Vec<&String> = self.vectors.keys().collect();
        names.sort();
        f.debug_struct("Adapters")
            .field("vectors", &names)
            .field("residue", &self.residue.as_ref().map(|r| r.name().to_string()))
            .field("conformer", &self.conformer.as_ref().map(|c| c.name().to_string()))
            .field("pocket", &self.pocket.is_some())
            .finish()
    }
}

impl Adapters {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_vector(mut self, name: &str, a: Arc<dyn VectorAdapter>) -> Self {
        self.vectors.insert(name.to_string(), a);
        self
    }

    pub fn with_residue(mut self, r: Arc<dyn ResidueEmbedder>) -> Self {
        self.residue = Some(r);
        self
    }

    pub fn with_conformer(mut self, c: Arc<dyn ConformerBackend>) -> Self {
        self.conformer = Some(c);
        self
    }

    pub fn with_pocket(mut self, p: Arc<dyn PocketFinder>) -> Self {
        self.pocket = Some(p);
        self
    }

    pub fn with_encoder(mut self, name: &str, e: Arc<dyn ExtensionEncoder>) -> Self {
        self.encoders.insert(name.to_string(), e);
        self
    }

    pub fn vector(&self, name: &str) -> Result<&dyn VectorAdapter> {
        self.vectors
            .get(name)
            .map(|a| a.as_ref())
            .ok_or_else(|| Error::AdapterUnavailable(name.to_string()))
    }

    /// Look up `key` and check the declared width.
    pub fn vector_checked(&self, name: &str, key: &str, dim: usize) -> Result<Vec<f64>> {
        let v = self.vector(name)?.lookup(key)?;
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                what: name.to_string(),
                expected: dim,
                actual: v.len(),
            });
        }
        Ok(v)
    }

    pub fn residue(&self) -> Option<&dyn ResidueEmbedder> {
        self.residue.as_deref()
    }

    pub fn conformer(&self) -> Option<&dyn ConformerBackend> {
        self.conformer.as_deref()
    }

    pub fn pocket(&self) -> Option<&dyn PocketFinder> {
        self.pocket.as_deref()
    }

    pub fn encoder(&self, name: &str) -> Result<&dyn ExtensionEncoder> {
        self.encoders
            .get(name)
            .map(|e| e.as_ref())
            .ok_or_else(|| Error::AdapterUnavailable(format!("{name} encoder")))
    }

    /// Build from the configuration section, resolving paths against `base`.
    pub fn from_config(config: &AdapterConfig, base: &Path) -> Result<Self> {
        let mut out = Adapters::new();
        for (name, path) in &config.tables {
            let table = TableAdapter::load(name, &base.join(path))?;
            out = out.with_vector(name, Arc::new(table));
        }
        if let Some(r) = &config.residue_embeddings {
            out = out.with_residue(Arc::new(ResidueTable::load(&base.join(&r.path), r.width)?));
        }
        match config.conformer.as_deref() {
            None => {}
            Some("spring") => out = out.with_conformer(Arc::new(SpringEmbedder::default())),
            Some(other) => {
                return Err(Error::config(
                    "adapters.conformer",
                    format!("unknown conformer backend `{other}`"),
                ))
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdapterConfig {
    /// Adapter name (e.g. "PubChem", "ESM") to a `key<TAB>v1,v2,...` file.
    #[serde(default)]
    pub tables: std::collections::BTreeMap<String, PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residue_embeddings: Option<ResidueTableConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conformer: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidueTableConfig {
    pub path: PathBuf,
    pub width: usize,
}

fn parse_values(text: &str, line: usize) -> Result<Vec<f64>> {
    text.split(',')
        .map(|c| {
            c.trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(line, format!("bad number `{c}`")))
        })
        .collect()
}

fn read_table(path: &Path) -> Result<HashMap<String, Vec<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut map = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, values) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(i + 1, "expected `key<TAB>values`"))?;
        map.insert(key.to_string(), parse_values(values, i + 1)?);
    }
    Ok(map)
}

/// Precomputed vectors keyed by entity text.
pub struct TableAdapter {
    name: String,
    rows: HashMap<String, Vec<f64>>,
}

impl TableAdapter {
    pub fn load(name: &str, path: &Path) -> Result<Self> {
        Ok(Self {
            name: name.to_string(),
            rows: read_table(path)?,
        })
    }

    pub fn from_rows(name: &str, rows: HashMap<String, Vec<f64>>) -> Self {
        Self {
            name: name.to_string(),
            rows,
        }
    }
}

impl VectorAdapter for TableAdapter {
    fn name(&self) -> &str {
        &self.name
    }

    fn lookup(&self, key: &str) -> Result<Vec<f64>> {
        self.rows
            .get(key)
            .cloned()
            .ok_or_else(|| Error::AdapterUnavailable(format!("{}: no entry for `{key}`", self.name)))
    }
}

/// Precomputed per-residue embeddings: `sequence<TAB>row-major values`.
pub struct ResidueTable {
    width: usize,
    rows: HashMap<String, Vec<f64>>,
}

impl ResidueTable {
    pub fn load(path: &Path, width: usize) -> Result<Self> {
        Ok(Self {
            width,
            rows: read_table(path)?,
        })
    }
}

impl ResidueEmbedder for ResidueTable {
    fn name(&self) -> &str {
        "residue table"
    }

    fn width(&self) -> usize {
        self.width
    }

    fn embed(&self, sequence: &str) -> Result<Array2<f64>> {
        let flat = self
            .rows
            .get(sequence)
            .ok_or_else(|| Error::AdapterUnavailable(format!("no residue embedding for `{sequence}`")))?;
        if self.width == 0 || flat.len() % self.width != 0 {
            return Err(Error::DimensionMismatch {
                what: "residue embedding width".into(),
                expected: self.width,
                actual: flat.len(),
            });
        }
        Ok(Array2::from_shape_vec((flat.len() / self.width, self.width), flat.clone())
            .expect("divisible length"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn table_lookup_and_width_check() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "CCO\t1,0,1").unwrap();
        let t = TableAdapter::load("PubChem", f.path()).unwrap();
        let a = Adapters::new().with_vector("PubChem", Arc::new(t));
        assert_eq!(a.vector_checked("PubChem", "CCO", 3).unwrap(), vec![1.0, 0.0, 1.0]);
        assert!(matches!(
            a.vector_checked("PubChem", "CCO", 4),
            Err(Error::DimensionMismatch { expected: 4, actual: 3, .. })
        ));
        assert!(matches!(a.vector("ErG"), Err(Error::AdapterUnavailable(_))));
    }
}
