//! Pair datasets for drug-target, drug-drug and protein-protein tasks:
//! loading, splitting and negative sampling.

mod split;

pub use split::{corrupt_negatives, kfold, sample_negatives, split_random, split_stratified, Fold};

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::compose::TaskKind;
use crate::error::{Error, Result};
use crate::featurize::registry::Role;
use crate::featurize::Entity;
use crate::molparse::{parse_pdb, ProteinStructure};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Protocol {
    Dti,
    Ddi,
    Ppi,
}

impl Protocol {
    pub fn entities(self) -> [Role; 2] {
        match self {
            Protocol::Dti => [Role::Drug, Role::Protein],
            Protocol::Ddi => [Role::Drug, Role::Drug],
            Protocol::Ppi => [Role::Protein, Role::Protein],
        }
    }

    /// Required entity columns.
    pub fn columns(self) -> [&'static str; 2] {
        match self {
            Protocol::Dti => ["drug_smiles", "protein_seq"],
            Protocol::Ddi => ["drug1_smiles", "drug2_smiles"],
            Protocol::Ppi => ["protein1_seq", "protein2_seq"],
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "dti" => Ok(Protocol::Dti),
            "ddi" => Ok(Protocol::Ddi),
            "ppi" => Ok(Protocol::Ppi),
            other => Err(Error::config("data.protocol", format!("unknown protocol `{other}` (dti, ddi, ppi)"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Pair {
    pub entities: [Entity; 2],
    pub label: f64,
    /// Stratification group, e.g. the DDI interaction type.
    pub group: Option<usize>,
}

/// Row dropped while loading, with its 1-based line number.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reject {
    pub line: usize,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct InteractionDataset {
    pub task: TaskKind,
    pub entities: [Role; 2],
    pub rows: Vec<Pair>,
    pub rejects: Vec<Reject>,
}

impl InteractionDataset {
    pub fn new(task: TaskKind, entities: [Role; 2], rows: Vec<Pair>) -> Self {
        Self {
            task,
            entities,
            rows,
            rejects: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.label).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            task: self.task,
            entities: self.entities,
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            rejects: Vec::new(),
        }
    }

    /// Stratification class of each row: its group if present, else its label.
    pub fn strata(&self) -> Vec<usize> {
        self.rows
            .iter()
            .map(|r| r.group.unwrap_or(r.label.max(0.0) as usize))
            .collect()
    }
}

/// Either pre-split files or one file to split later.
#[derive(Debug)]
pub enum Loaded {
    Split {
        train: InteractionDataset,
        valid: InteractionDataset,
        test: InteractionDataset,
    },
    Single(InteractionDataset),
}

#[derive(Clone, Debug)]
pub struct LoadOptions {
    pub task: TaskKind,
    /// Directory holding `<pdb_id>.pdb` files.
    pub structures: Option<PathBuf>,
}

fn detect_delimiter(text: &str) -> u8 {
    let header = text.lines().next().unwrap_or("");
    if header.contains('\t') {
        b'\t'
    } else {
        b','
    }
}

fn parse_label(raw: &str, task: &TaskKind, line: usize) -> Result<std::result::Result<f64, String>> {
    let Ok(v) = raw.trim().parse::<f64>() else {
        return Ok(Err(format!("label `{raw}` is not a number")));
    };
    if !v.is_finite() {
        return Ok(Err(format!("label `{raw}` is not finite")));
    }
    let ok = match task {
        TaskKind::Binary => v == 0.0 || v == 1.0,
        TaskKind::Regression => true,
        TaskKind::Multiclass { classes } => v.fract() == 0.0 && v >= 0.0 && (v as usize) < *classes,
    };
    if !ok {
        return Err(Error::Schema(format!(
            "line {line}: label {v} does not fit a {} task",
            task.name()
        )));
    }
    Ok(Ok(v))
}

struct StructureCache {
    dir: Option<PathBuf>,
    loaded: HashMap<String, std::result::Result<Arc<ProteinStructure>, String>>,
}

impl StructureCache {
    fn get(&mut self, id: &str) -> Option<std::result::Result<Arc<ProteinStructure>, String>> {
        let dir = self.dir.as_ref()?;
        let path = dir.join(format!("{id}.pdb"));
        Some(
            self.loaded
                .entry(id.to_string())
                .or_insert_with(|| {
                    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                    parse_pdb(&text).map(Arc::new).map_err(|e| format!("{}: {e}", path.display()))
                })
                .clone(),
        )
    }
}

/// Parse delimited text (comma or tab, with header) for `protocol`.
pub fn parse_table(text: &str, protocol: Protocol, opts: &LoadOptions) -> Result<InteractionDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(detect_delimiter(text))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.to_ascii_lowercase()).collect();
    let col = |name: &str| header.iter().position(|h| h == name);
    let [c1, c2] = protocol.columns();
    let missing: Vec<&str> = [c1, c2, "label"].into_iter().filter(|c| col(c).is_none()).collect();
    if !missing.is_empty() {
        return Err(Error::Schema(format!("missing columns: {}", missing.join(", "))));
    }
    let (i1, i2, il) = (col(c1).unwrap(), col(c2).unwrap(), col("label").unwrap());
    let ipdb = col("pdb_id");
    let igroup = col("interaction_type");
    let mut structures = StructureCache {
        dir: opts.structures.clone(),
        loaded: HashMap::new(),
    };
    let roles = protocol.entities();
    let mut rows = Vec::new();
    let mut rejects = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let line = n + 2;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                rejects.push(Reject {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let field = |i: usize| record.get(i).unwrap_or("");
        let mut reject = |reason: String| rejects.push(Reject { line, reason });
        if record.len() < header.len() {
            reject(format!("expected {} fields, got {}", header.len(), record.len()));
            continue;
        }
        let (t1, t2) = (field(i1), field(i2));
        if t1.is_empty() || t2.is_empty() {
            reject("empty entity".into());
            continue;
        }
        let label = match parse_label(field(il), &opts.task, line)? {
            Ok(v) => v,
            Err(reason) => {
                reject(reason);
                continue;
            }
        };
        let group = match igroup.map(field) {
            None | Some("") => None,
            Some(g) => match g.parse::<usize>() {
                Ok(g) => Some(g),
                Err(_) => {
                    reject(format!("interaction_type `{g}` is not a class index"));
                    continue;
                }
            },
        };
        let pdb = ipdb.map(field).filter(|s| !s.is_empty());
        let mut entities = Vec::with_capacity(2);
        let mut failed = None;
        for (k, text) in [t1, t2].into_iter().enumerate() {
            let e = match roles[k] {
                Role::Drug => Entity::drug(text),
                Role::Protein => {
                    let seq = text.to_ascii_uppercase();
                    match (k, pdb) {
                        (1, Some(id)) if protocol == Protocol::Dti => match structures.get(id) {
                            Some(Ok(s)) => Entity::Protein {
                                sequence: seq,
                                structure: Some(s),
                                structure_id: Some(id.to_string()),
                            },
                            Some(Err(msg)) => {
                                failed = Some(msg);
                                break;
                            }
                            None => Entity::protein(seq),
                        },
                        _ => Entity::protein(seq),
                    }
                }
            };
            entities.push(e);
        }
        if let Some(msg) = failed {
            reject(msg);
            continue;
        }
        let [a, b]: [Entity; 2] = entities.try_into().expect("two entities");
        rows.push(Pair {
            entities: [a, b],
            label,
            group,
        });
    }
    for r in &rejects {
        log::warn!("line {}: {}", r.line, r.reason);
    }
    Ok(InteractionDataset {
        task: opts.task,
        entities: roles,
        rows,
        rejects,
    })
}

pub fn load_file(path: &Path, protocol: Protocol, opts: &LoadOptions) -> Result<InteractionDataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_table(&text, protocol, opts).map_err(|e| match e {
        Error::Schema(m) => Error::Schema(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn find_part(dir: &Path, part: &str) -> Option<PathBuf> {
    ["csv", "tsv", "txt"]
        .iter()
        .map(|ext| dir.join(format!("{part}.{ext}")))
        .find(|p| p.is_file())
}

/// A file loads as one dataset; a directory with `train`, `valid` and
/// `test` files (`.csv`, `.tsv` or `.txt`) loads as a split.
pub fn load(path: &Path, protocol: Protocol, opts: &LoadOptions) -> Result<Loaded> {
    if path.is_file() {
        return Ok(Loaded::Single(load_file(path, protocol, opts)?));
    }
    if !path.is_dir() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
        ));
    }
    let parts: Vec<Option<PathBuf>> = ["train", "valid", "test"].iter().map(|p| find_part(path, p)).collect();
    match parts.as_slice() {
        [Some(train), Some(valid), Some(test)] => Ok(Loaded::Split {
            train: load_file(train, protocol, opts)?,
            valid: load_file(valid, protocol, opts)?,
            test: load_file(test, protocol, opts)?,
        }),
        _ => match find_part(path, "data") {
            Some(p) => Ok(Loaded::Single(load_file(&p, protocol, opts)?)),
            None => Err(Error::Schema(format!(
                "{} holds neither train/valid/test files nor a data file",
                path.display()
            ))),
        },
    }
}

pub fn load_dti(path: &Path, opts: &LoadOptions) -> Result<Loaded> {
    load(path, Protocol::Dti, opts)
}

pub fn load_ddi(path: &Path, opts: &LoadOptions) -> Result<InteractionDataset> {
    load_file(path, Protocol::Ddi, opts)
}

pub fn load_ppi(path: &Path, opts: &LoadOptions) -> Result<InteractionDataset> {
    load_file(path, Protocol::Ppi, opts)
}
