//! Config-driven experiment runs: load data, split, train and test a model
//! over several repeats, and aggregate metrics as mean and sample std.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adapters::{AdapterConfig, Adapters};
use crate::compose::{self, ModelSpec, TaskKind};
use crate::dataio::{self, InteractionDataset, LoadOptions, Loaded, Protocol};
use crate::error::{Error, Result};
use crate::featurize::registry::{featurize, FeaturizeOptions, FeaturizerId, FeaturizerSpec};
use crate::featurize::Features;
use crate::metrics::MetricReport;
use crate::train::{self, FeatureCache, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SplitConfig {
    Random {
        #[serde(default = "default_random")]
        fractions: [f64; 3],
    },
    Stratified {
        #[serde(default = "default_stratified")]
        fractions: [f64; 3],
        #[serde(default = "default_folds")]
        folds: usize,
    },
    Kfold {
        #[serde(default = "default_k")]
        k: usize,
        /// Share of each training part held out for early stopping.
        #[serde(default = "default_valid_fraction")]
        valid_fraction: f64,
    },
}

fn default_random() -> [f64; 3] {
    [0.7, 0.2, 0.1]
}
fn default_stratified() -> [f64; 3] {
    [0.6, 0.2, 0.2]
}
fn default_folds() -> usize {
    3
}
fn default_k() -> usize {
    5
}
fn default_valid_fraction() -> f64 {
    0.1
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig::Random {
            fractions: default_random(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NegativeConfig {
    /// Uniform draws from unseen pairs.
    Unseen {
        #[serde(default = "default_ratio")]
        ratio: f64,
    },
    /// One corrupted endpoint per positive (same-role datasets).
    Corruption,
}

fn default_ratio() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub protocol: String,
    /// File, or directory with train/valid/test files.
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structures: Option<PathBuf>,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negatives: Option<NegativeConfig>,
}

/// Exactly one of `preset`, `file` or `spec`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<ModelSpec>,
    /// Replaces the model's task (e.g. a preset used for regression).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskKind>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub data: DataConfig,
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub metrics: Vec<String>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub adapters: AdapterConfig,
}

fn default_repeats() -> usize {
    1
}

impl ExperimentConfig {
    pub fn from_str(text: &str, json: bool) -> Result<Self> {
        let cfg: Self = if json {
            serde_json::from_str(text)?
        } else {
            serde_yaml::from_str(text)?
        };
        Ok(cfg)
    }

    /// Read a config file; relative paths inside resolve against its directory.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), format!("cannot read: {e}")))?;
        let json = path.extension().is_some_and(|e| e == "json");
        let cfg = Self::from_str(&text, json).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    /// Model graph named by the config, with the task override applied.
    pub fn model_spec(&self, base: &Path) -> Result<ModelSpec> {
        let m = &self.model;
        let given = [m.preset.is_some(), m.file.is_some(), m.spec.is_some()];
        if given.iter().filter(|&&g| g).count() != 1 {
            return Err(Error::config("model", "set exactly one of preset, file or spec"));
        }
        let mut spec = if let Some(p) = &m.preset {
            compose::preset(p)?
        } else if let Some(f) = &m.file {
            ModelSpec::load(&base.join(f)).map_err(|e| Error::config("model.file", e.to_string()))?
        } else {
            m.spec.clone().expect("checked")
        };
        if let Some(t) = m.task {
            spec.task = t;
        }
        Ok(spec)
    }

    pub fn validate(&self, base: &Path) -> Result<ModelSpec> {
        let spec = self.model_spec(base)?;
        let protocol = Protocol::from_name(&self.data.protocol)?;
        if protocol.entities() != spec.entities {
            return Err(Error::config(
                "model",
                format!(
                    "model entities {:?} do not match the {} protocol",
                    spec.entities, self.data.protocol
                ),
            ));
        }
        if self.repeats == 0 {
            return Err(Error::config("repeats", "must be at least 1"));
        }
        for (i, m) in self.metrics.iter().enumerate() {
            crate::metrics::resolve(&spec.task, m)
                .map_err(|_| Error::config(format!("metrics[{i}]"), format!("`{m}` is not a {} metric", spec.task.name())))?;
        }
        self.train.validate(&spec.task)?;
        spec.infer_shapes(&Adapters::default()).map_err(|e| Error::config("model", e.to_string()))?;
        Ok(spec)
    }

    fn metric_names(&self, task: &TaskKind) -> Vec<String> {
        if self.metrics.is_empty() {
            crate::metrics::metric_names(task).iter().map(|s| s.to_string()).collect()
        } else {
            self.metrics.clone()
        }
    }
}

/// Mean and sample standard deviation of one metric over repeats.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    /// Repeats where the metric was defined.
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub name: String,
    pub repeats: Vec<MetricReport>,
    pub summary: BTreeMap<String, Aggregate>,
}

pub fn aggregate(reports: &[MetricReport]) -> BTreeMap<String, Aggregate> {
    let mut names: Vec<&String> = reports.iter().flat_map(|r| r.metrics.keys()).collect();
    names.sort();
    names.dedup();
    names
        .into_iter()
        .map(|name| {
            let xs: Vec<f64> = reports.iter().filter_map(|r| r.get(name)).collect();
            let n = xs.len();
            let mean = (n > 0).then(|| xs.iter().sum::<f64>() / n as f64);
            let std = mean.map(|m| {
                if n < 2 {
                    0.0
                } else {
                    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
                }
            });
            (name.clone(), Aggregate { mean, std, n })
        })
        .collect()
}

impl ExperimentResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,mean,std,n\n");
        for (k, a) in &self.summary {
            let f = |v: Option<f64>| v.map_or_else(|| "undefined".into(), |x| format!("{x}"));
            out.push_str(&format!("\"{k}\",{},{},{}\n", f(a.mean), f(a.std), a.n));
        }
        out
    }

    pub fn table(&self) -> String {
        let width = self.summary.keys().map(|k| k.len()).max().unwrap_or(6).max(6);
        let mut out = format!("{:width$}  value\n", "metric");
        for (k, a) in &self.summary {
            let v = match (a.mean, a.std) {
                (Some(m), Some(s)) => format!("{m:.4} ± {s:.4}"),
                _ => "undefined".into(),
            };
            out.push_str(&format!("{k:width$}  {v}\n"));
        }
        out
    }
}

/// Train/valid/test parts for each repeat.
fn partitions(cfg: &ExperimentConfig, base: &Path, task: TaskKind) -> Result<Vec<[InteractionDataset; 3]>> {
    let protocol = Protocol::from_name(&cfg.data.protocol)?;
    let opts = LoadOptions {
        task,
        structures: cfg.data.structures.as_ref().map(|s| base.join(s)),
    };
    let path = base.join(&cfg.data.path);
    if !path.exists() {
        return Err(Error::config("data.path", format!("{} does not exist", path.display())));
    }
    let negatives = |ds: InteractionDataset, seed: u64| -> Result<InteractionDataset> {
        match &cfg.data.negatives {
            None => Ok(ds),
            Some(NegativeConfig::Unseen { ratio }) => dataio::sample_negatives(&ds, *ratio, seed),
            Some(NegativeConfig::Corruption) => dataio::corrupt_negatives(&ds, seed),
        }
    };
    let ds = match dataio::load(&path, protocol, &opts)? {
        Loaded::Split { train, valid, test } => {
            let parts = [
                negatives(train, cfg.seed)?,
                negatives(valid, cfg.seed.wrapping_add(1))?,
                negatives(test, cfg.seed.wrapping_add(2))?,
            ];
            return Ok(vec![parts; cfg.repeats]);
        }
        Loaded::Single(ds) => negatives(ds, cfg.seed)?,
    };
    Ok(match &cfg.data.split {
        SplitConfig::Random { fractions } => {
            let parts = dataio::split_random(&ds, *fractions, cfg.seed)?;
            vec![parts; cfg.repeats]
        }
        SplitConfig::Stratified { fractions, folds } => {
            let folds = dataio::split_stratified(&ds, *fractions, cfg.seed, *folds)?;
            (0..cfg.repeats).map(|r| folds[r % folds.len()].clone()).collect()
        }
        SplitConfig::Kfold { k, valid_fraction } => {
            let folds = dataio::kfold(&ds, *k, cfg.seed)?;
            (0..cfg.repeats)
                .map(|r| {
                    let (train, test) = &folds[r % folds.len()];
                    let [tr, va, _] = dataio::split_random(
                        train,
                        [1.0 - valid_fraction, *valid_fraction, 0.0],
                        cfg.seed.wrapping_add(r as u64),
                    )?;
                    Ok([tr, va, test.clone()])
                })
                .collect::<Result<_>>()?
        }
    })
}

/// Run every repeat and write results under the output directory:
/// `repeat-<r>/` per repeat, `results.json`, `results.csv`, `manifest.json`.
pub fn run(cfg: &ExperimentConfig, base: &Path) -> Result<ExperimentResult> {
    run_spec(cfg, base, cfg.validate(base)?)
}

/// Run with the named component removed (see [`compose::ablate`]).
pub fn ablate(cfg: &ExperimentConfig, base: &Path, component: &str) -> Result<ExperimentResult> {
    let spec = compose::ablate(&cfg.validate(base)?, component)?;
    let mut cfg = cfg.clone();
    cfg.name = format!("{} without {component}", cfg.name);
    cfg.output_dir = cfg.output_dir.join(format!("without-{}", component.replace(['/', ' '], "_")));
    spec.infer_shapes(&Adapters::default()).map_err(|e| {
        Error::config("ablate.drop", format!("removing `{component}` leaves an invalid model: {e}"))
    })?;
    run_spec(&cfg, base, spec)
}

fn unix_seconds() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn run_spec(cfg: &ExperimentConfig, base: &Path, spec: ModelSpec) -> Result<ExperimentResult> {
    let started = unix_seconds();
    let adapters = Adapters::from_config(&cfg.adapters, base)?;
    let parts = partitions(cfg, base, spec.task)?;
    let out = base.join(&cfg.output_dir);
    let metric_names = cfg.metric_names(&spec.task);
    let mut cache = FeatureCache::new();
    let mut reports = Vec::with_capacity(cfg.repeats);
    for (r, [train_ds, valid_ds, test_ds]) in parts.iter().enumerate() {
        let seed = cfg.seed.wrapping_add(r as u64);
        log::info!("repeat {}/{}: {} train, {} valid, {} test", r + 1, cfg.repeats, train_ds.len(), valid_ds.len(), test_ds.len());
        let mut model = compose::build(&spec, &adapters, seed)?;
        let dir = out.join(format!("repeat-{r}"));
        let tc = TrainConfig {
            seed,
            output_dir: Some(dir.clone()),
            ..cfg.train.clone()
        };
        train::fit(&mut model, train_ds, valid_ds, &tc, &mut cache)?;
        let report = train::evaluate(&model, test_ds, &metric_names, &tc, &mut cache, Some(&dir))?;
        reports.push(report);
    }
    let result = ExperimentResult {
        name: cfg.name.clone(),
        summary: aggregate(&reports),
        repeats: reports,
    };
    train::write_file(&out, "results.json", &(serde_json::to_string_pretty(&result)? + "\n"))?;
    train::write_file(&out, "results.csv", &result.to_csv())?;
    train::write_file(&out, "model.yaml", &spec.to_yaml()?)?;
    let manifest = serde_json::json!({
        "name": cfg.name,
        "started": started,
        "finished": unix_seconds(),
        "featurizer_passes": cache.passes,
    });
    train::write_file(&out, "manifest.json", &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
    Ok(result)
}

/// One featurizer over every distinct entity of matching role in `ds`:
/// `(entity text, flattened values)` in first-seen order. Graph featurizers
/// have no flat form and are rejected.
pub fn featurize_table(
    ds: &InteractionDataset,
    id: FeaturizerId,
    adapters: &Adapters,
    options: &FeaturizeOptions,
) -> Result<Vec<(String, Vec<f64>)>> {
    let spec = FeaturizerSpec::new(id);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for row in &ds.rows {
        for (k, e) in row.entities.iter().enumerate() {
            if ds.entities[k] != id.role() || !seen.insert(e.cache_key()) {
                continue;
            }
            let values = match featurize(&spec, e, adapters, options)? {
                Features::Vector(v) => v.as_ref().clone(),
                Features::Grid(g) => g.iter().copied().collect(),
                Features::Tokens(t) => t.token_ids.iter().map(|&i| i as f64).collect(),
                Features::Graph(_) => {
                    return Err(Error::Kind(format!(
                        "`{}` produces graphs, which have no flat table form",
                        id.name()
                    )))
                }
            };
            out.push((e.text().to_string(), values));
        }
    }
    if out.is_empty() {
        return Err(Error::Kind(format!(
            "`{}` applies to no entity column of this dataset",
            id.name()
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(v: f64) -> MetricReport {
        MetricReport {
            task: "binary".into(),
            n_samples: 4,
            positive_rate: None,
            metrics: BTreeMap::from([("ROC-AUC".to_string(), Some(v)), ("PR-AUC".to_string(), None)]),
        }
    }

    #[test]
    fn aggregate_mean_and_sample_std() {
        let s = aggregate(&[report(0.8), report(0.9), report(1.0)]);
        let a = &s["ROC-AUC"];
        assert!((a.mean.unwrap() - 0.9).abs() < 1e-12);
        assert!((a.std.unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(s["PR-AUC"], Aggregate { mean: None, std: None, n: 0 });
        assert_eq!(aggregate(&[report(0.7), report(0.7)])["ROC-AUC"].std, Some(0.0));
    }

    #[test]
    fn config_errors_name_fields() {
        let yaml = "data: {protocol: dti, path: nowhere.csv}\nmodel: {preset: exp-1.1}\noutput_dir: out\nmetrics: [Micro-F1]\n";
        let cfg = ExperimentConfig::from_str(yaml, false).unwrap();
        match cfg.validate(Path::new(".")) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "metrics[0]"),
            other => panic!("{other:?}"),
        }
        let yaml = "data: {protocol: ppi, path: x}\nmodel: {preset: exp-1.1}\noutput_dir: out\n";
        let cfg = ExperimentConfig::from_str(yaml, false).unwrap();
        assert!(matches!(cfg.validate(Path::new(".")), Err(Error::Config { .. })));
        let yaml = "data: {protocol: dti, path: missing.csv}\nmodel: {preset: exp-1.1}\noutput_dir: out\n";
        let cfg = ExperimentConfig::from_str(yaml, false).unwrap();
        match run(&cfg, Path::new("/nonexistent-base")) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "data.path"),
            other => panic!("{other:?}"),
        }
    }
}
