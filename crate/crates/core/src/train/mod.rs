//! Mini-batch training with Adam, early stopping on a validation metric,
//! evaluation and prediction.

pub mod checkpoint;

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autograd::{ParamId, Tape, Tensor, Var};
use crate::compose::{FeatureRow, Model, TaskKind};
use crate::dataio::InteractionDataset;
use crate::error::{Error, Result};
use crate::featurize::registry::{featurize, FeaturizerSpec};
use crate::featurize::{Entity, Features};
use crate::metrics::{self, BinaryOptions, MetricReport};
use crate::nn::Ctx;

pub const DEFAULT_EPOCHS: usize = 50;
pub const DEFAULT_BATCH_SIZE: usize = 32;
pub const DEFAULT_PATIENCE: usize = 10;
pub const DEFAULT_LEARNING_RATE: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EarlyStopping {
    /// Validation metric; defaults per task (ROC-AUC, MSE, Macro-F1).
    pub metric: Option<String>,
    /// Overrides the metric's natural direction.
    pub higher_is_better: Option<bool>,
    pub patience: usize,
}

impl Default for EarlyStopping {
    fn default() -> Self {
        Self {
            metric: None,
            higher_is_better: None,
            patience: DEFAULT_PATIENCE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub max_grad_norm: Option<f64>,
    pub early_stopping: EarlyStopping,
    pub seed: u64,
    pub binary: BinaryOptions,
    pub output_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            learning_rate: DEFAULT_LEARNING_RATE,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            max_grad_norm: None,
            early_stopping: EarlyStopping::default(),
            seed: 0,
            binary: BinaryOptions::default(),
            output_dir: None,
        }
    }
}

pub fn default_metric(task: &TaskKind) -> &'static str {
    match task {
        TaskKind::Binary => "ROC-AUC",
        TaskKind::Regression => "MSE",
        TaskKind::Multiclass { .. } => "Macro-F1",
    }
}

impl TrainConfig {
    /// Canonical early-stopping metric and direction for `task`.
    pub fn stop_metric(&self, task: &TaskKind) -> Result<(&'static str, bool)> {
        let name = match &self.early_stopping.metric {
            Some(m) => metrics::resolve(task, m).map_err(|_| {
                Error::config(
                    "train.early_stopping.metric",
                    format!("`{m}` is not a {} metric", task.name()),
                )
            })?,
            None => default_metric(task),
        };
        let higher = self
            .early_stopping
            .higher_is_better
            .unwrap_or_else(|| metrics::higher_is_better(name));
        Ok((name, higher))
    }

    pub fn validate(&self, task: &TaskKind) -> Result<()> {
        let bad = |path: &str, msg: &str| Err(Error::config(path, msg));
        if self.early_stopping.patience == 0 {
            return bad("train.early_stopping.patience", "must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("train.batch_size", "must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("train.learning_rate", "must be positive");
        }
        self.stop_metric(task).map(|_| ())
    }
}

/// Features keyed by featurizer and entity, computed once per entity.
#[derive(Default)]
pub struct FeatureCache {
    map: HashMap<(FeaturizerSpec, String), Features>,
    /// Featurizer invocations so far.
    pub passes: usize,
}

impl FeatureCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Featurize every missing (featurizer, entity) combination in parallel.
    pub fn fill(&mut self, model: &Model, datasets: &[&InteractionDataset]) -> Result<()> {
        let mut jobs: Vec<(FeaturizerSpec, String, &Entity)> = Vec::new();
        let mut queued = std::collections::HashSet::new();
        for ds in datasets {
            for row in &ds.rows {
                for slot in &model.plan {
                    let e = &row.entities[slot.entity];
                    let key = (slot.spec, e.cache_key());
                    if !self.map.contains_key(&key) && queued.insert(key.clone()) {
                        jobs.push((key.0, key.1, e));
                    }
                }
            }
        }
        let done: Vec<Features> = jobs
            .par_iter()
            .map(|(spec, key, e)| {
                featurize(spec, e, &model.adapters, &model.spec.featurize).map_err(|err| match err {
                    Error::Parse { position, message } => Error::Parse {
                        position,
                        message: format!("{message} (in `{key}`)"),
                    },
                    other => other,
                })
            })
            .collect::<Result<_>>()?;
        self.passes += jobs.len();
        for ((spec, key, _), f) in jobs.into_iter().zip(done) {
            self.map.insert((spec, key), f);
        }
        Ok(())
    }

    pub fn rows(&self, model: &Model, ds: &InteractionDataset) -> Result<Vec<FeatureRow>> {
        ds.rows
            .iter()
            .map(|row| {
                model
                    .plan
                    .iter()
                    .map(|slot| {
                        let key = (slot.spec, row.entities[slot.entity].cache_key());
                        self.map
                            .get(&key)
                            .cloned()
                            .ok_or_else(|| Error::Invalid(format!("`{}` was not featurized", key.1)))
                    })
                    .collect()
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_metric: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub metric: String,
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_metric: Option<f64>,
    pub stopped_early: bool,
}

impl History {
    pub fn to_csv(&self) -> String {
        let mut out = format!("epoch,train_loss,valid_{}\n", self.metric.replace(',', " "));
        for r in &self.epochs {
            let m = r.valid_metric.map_or_else(|| "undefined".to_string(), |v| format!("{v}"));
            out.push_str(&format!("{},{},{}\n", r.epoch, r.train_loss, m));
        }
        out
    }
}

struct Adam {
    m: HashMap<ParamId, Tensor>,
    v: HashMap<ParamId, Tensor>,
    t: i32,
}

impl Adam {
    fn new() -> Self {
        Self {
            m: HashMap::new(),
            v: HashMap::new(),
            t: 0,
        }
    }

    fn step(&mut self, model: &mut Model, grads: &[(ParamId, Tensor)], cfg: &TrainConfig) {
        self.t += 1;
        let scale = match cfg.max_grad_norm {
            Some(max) => {
                let norm = grads.iter().map(|(_, g)| g.iter().map(|x| x * x).sum::<f64>()).sum::<f64>().sqrt();
                if norm > max {
                    max / norm
                } else {
                    1.0
                }
            }
            None => 1.0,
        };
        let (b1, b2) = (cfg.beta1, cfg.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        for (id, g) in grads {
            let m = self.m.entry(*id).or_insert_with(|| Tensor::zeros(g.dim()));
            let v = self.v.entry(*id).or_insert_with(|| Tensor::zeros(g.dim()));
            let p = model.params.value_mut(*id);
            ndarray::Zip::from(p).and(m).and(v).and(g).for_each(|p, m, v, &g| {
                let g = g * scale;
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= cfg.learning_rate * (*m / c1) / ((*v / c2).sqrt() + cfg.eps);
            });
        }
    }
}

fn batch_loss<'t>(task: &TaskKind, logits: Var<'t>, labels: &[f64]) -> Var<'t> {
    match task {
        TaskKind::Binary => logits.bce_with_logits(labels),
        TaskKind::Regression => logits.mse(labels),
        TaskKind::Multiclass { .. } => {
            let classes: Vec<usize> = labels.iter().map(|&y| y as usize).collect();
            logits.cross_entropy(&classes)
        }
    }
}

/// One optimizer step on a batch; returns the batch loss before the step.
fn train_step(
    model: &mut Model,
    adam: &mut Adam,
    rows: &[&FeatureRow],
    labels: &[f64],
    cfg: &TrainConfig,
    at: (usize, usize),
) -> Result<f64> {
    let (loss, grads, updates) = {
        let tape = Tape::new();
        let ctx = Ctx::new(&tape, &model.params, true);
        let logits = model.forward(&ctx, rows)?;
        let loss = batch_loss(&model.spec.task, logits, labels);
        let value = loss.item();
        if !value.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch: at.0,
                batch: at.1,
            });
        }
        let grads = tape.backward(loss, model.params.len());
        let grads: Vec<(ParamId, Tensor)> = model
            .params
            .ids()
            .filter(|&id| model.params.is_trainable(id))
            .filter_map(|id| grads.param(id).map(|g| (id, g.clone())))
            .collect();
        (value, grads, ctx.take_buffer_updates())
    };
    adam.step(model, &grads, cfg);
    model.apply_buffer_updates(updates);
    Ok(loss)
}

/// Mean loss over `rows` in evaluation mode.
pub fn eval_loss(model: &Model, rows: &[FeatureRow], labels: &[f64], batch_size: usize) -> Result<f64> {
    let mut total = 0.0;
    for (chunk, y) in rows.chunks(batch_size.max(1)).zip(labels.chunks(batch_size.max(1))) {
        let refs: Vec<&FeatureRow> = chunk.iter().collect();
        let tape = Tape::new();
        let ctx = Ctx::new(&tape, &model.params, false);
        let logits = model.forward(&ctx, &refs)?;
        total += batch_loss(&model.spec.task, logits, y).item() * chunk.len() as f64;
    }
    Ok(total / rows.len() as f64)
}

/// Evaluation-mode scores for featurized rows, batched.
pub fn predict_rows(model: &Model, rows: &[FeatureRow], batch_size: usize) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(rows.len());
    for chunk in rows.chunks(batch_size.max(1)) {
        let refs: Vec<&FeatureRow> = chunk.iter().collect();
        out.extend(model.predict_rows(&refs)?);
    }
    Ok(out)
}

fn snapshot(model: &Model) -> Vec<Tensor> {
    model.params.ids().map(|id| model.params.value(id).clone()).collect()
}

fn better(candidate: Option<f64>, best: Option<f64>, higher: bool) -> bool {
    match (candidate, best) {
        (None, _) => false,
        (Some(_), None) => true,
        (Some(c), Some(b)) => {
            if higher {
                c > b
            } else {
                c < b
            }
        }
    }
}

/// Train on featurized rows. After each epoch the validation metric is
/// computed; the best parameters are restored at the end. Training stops once
/// `patience` consecutive epochs fail to improve on the best.
pub fn fit_rows(
    model: &mut Model,
    train: (&[FeatureRow], &[f64]),
    valid: (&[FeatureRow], &[f64]),
    cfg: &TrainConfig,
) -> Result<History> {
    let task = model.spec.task;
    cfg.validate(&task)?;
    if train.0.is_empty() || valid.0.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (metric, higher) = cfg.stop_metric(&task)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new();
    let mut order: Vec<usize> = (0..train.0.len()).collect();
    let mut history = History {
        metric: metric.to_string(),
        epochs: Vec::new(),
        best_epoch: 0,
        best_metric: None,
        stopped_early: false,
    };
    let mut best_params: Option<Vec<Tensor>> = None;
    let mut since_best = 0;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let rows: Vec<&FeatureRow> = chunk.iter().map(|&i| &train.0[i]).collect();
            let labels: Vec<f64> = chunk.iter().map(|&i| train.1[i]).collect();
            total += train_step(model, &mut adam, &rows, &labels, cfg, (epoch, b + 1))? * chunk.len() as f64;
        }
        let scores = predict_rows(model, valid.0, cfg.batch_size)?;
        let report = metrics::evaluate(&task, &scores, valid.1, &[metric.to_string()], &cfg.binary)?;
        let value = report.get(metric);
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: total / train.0.len() as f64,
            valid_metric: value,
        });
        log::info!(
            "epoch {epoch}: loss {:.5}, valid {metric} {}",
            total / train.0.len() as f64,
            value.map_or("undefined".into(), |v| format!("{v:.5}"))
        );
        if best_params.is_none() || better(value, history.best_metric, higher) {
            history.best_metric = value;
            history.best_epoch = epoch;
            best_params = Some(snapshot(model));
            since_best = 0;
            continue;
        }
        since_best += 1;
        if since_best >= cfg.early_stopping.patience {
            history.stopped_early = epoch < cfg.epochs;
            break;
        }
    }
    if let Some(best) = best_params {
        let ids: Vec<ParamId> = model.params.ids().collect();
        for (id, t) in ids.into_iter().zip(best) {
            model.params.set(id, t);
        }
    }
    Ok(history)
}

/// Featurize (with caching), train and, when an output directory is set,
/// write `history.csv`, `best.ckpt` and `config.json`.
pub fn fit(
    model: &mut Model,
    train: &InteractionDataset,
    valid: &InteractionDataset,
    cfg: &TrainConfig,
    cache: &mut FeatureCache,
) -> Result<History> {
    if train.is_empty() || valid.is_empty() {
        return Err(Error::EmptyDataset);
    }
    cache.fill(model, &[train, valid])?;
    let train_rows = cache.rows(model, train)?;
    let valid_rows = cache.rows(model, valid)?;
    let history = fit_rows(
        model,
        (&train_rows, &train.labels()),
        (&valid_rows, &valid.labels()),
        cfg,
    )?;
    if let Some(dir) = &cfg.output_dir {
        write_file(dir, "history.csv", &history.to_csv())?;
        write_file(dir, "config.json", &(serde_json::to_string_pretty(cfg)? + "\n"))?;
        checkpoint::save(&model.params, &dir.join("best.ckpt"))?;
    }
    Ok(history)
}

pub(crate) fn write_file(dir: &Path, name: &str, text: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Metric report on `ds`; written to `metrics.json` and `metrics.csv` under
/// `out` when given.
pub fn evaluate(
    model: &Model,
    ds: &InteractionDataset,
    metric_names: &[String],
    cfg: &TrainConfig,
    cache: &mut FeatureCache,
    out: Option<&Path>,
) -> Result<MetricReport> {
    if metric_names.is_empty() {
        return Err(Error::Invalid("no metrics requested".into()));
    }
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    cache.fill(model, &[ds])?;
    let rows = cache.rows(model, ds)?;
    let scores = predict_rows(model, &rows, cfg.batch_size)?;
    let report = metrics::evaluate(&model.spec.task, &scores, &ds.labels(), metric_names, &cfg.binary)?;
    if let Some(dir) = out {
        report.save(dir, "metrics")?;
    }
    Ok(report)
}
