mod common;

use common::training;

#[test]
fn cnn_pair_model_fits_separable_data() {
    let t = std::time::Instant::now();
    let run = training::overfit();
    eprintln!(
        "train ROC-AUC {:.4}, {} epochs, best {}, loss {:.4} -> {:.4}, {:.1?}",
        run.train_auc, run.epochs_run, run.best_epoch, run.first_loss, run.last_loss, t.elapsed()
    );
    assert_eq!(training::train_set().len(), 50);
    assert!(run.train_auc >= 0.95);
    assert!(run.epochs_run <= 200);
    assert!(run.epochs_run - run.best_epoch <= run.patience);
}

use molrel::adapters::Adapters;
use molrel::compose;
use molrel::train::{self, FeatureCache, TrainConfig};

fn fitted(cfg: &TrainConfig) -> (train::History, f64, f64) {
    let (tr, va) = (training::train_set(), training::valid_set());
    let mut model = compose::build(&training::fingerprint_model(), &Adapters::default(), 0).unwrap();
    let mut cache = FeatureCache::new();
    cache.fill(&model, &[&tr, &va]).unwrap();
    let rows = cache.rows(&model, &tr).unwrap();
    let before = train::eval_loss(&model, &rows, &tr.labels(), 64).unwrap();
    let h = train::fit(&mut model, &tr, &va, cfg, &mut cache).unwrap();
    let after = train::eval_loss(&model, &rows, &tr.labels(), 64).unwrap();
    (h, before, after)
}

#[test]
fn frozen_metric_stops_after_patience() {
    let mut cfg = TrainConfig {
        epochs: 100,
        learning_rate: 1e-30,
        ..TrainConfig::default()
    };
    cfg.early_stopping.patience = 4;
    let (h, _, _) = fitted(&cfg);
    assert_eq!(h.epochs.len(), 5);
    assert_eq!(h.best_epoch, 1);
    assert!(h.stopped_early);
}

#[test]
fn one_full_batch_step_lowers_loss() {
    let cfg = TrainConfig {
        epochs: 1,
        batch_size: 64,
        learning_rate: 1e-3,
        ..TrainConfig::default()
    };
    let (_, before, after) = fitted(&cfg);
    assert!(after < before, "{before} -> {after}");
}

#[test]
fn repeated_runs_write_identical_metrics() {
    let [a, b] = training::run_twice("exp-1.2", 2);
    assert_eq!(a, b);
    assert!(a.contains("ROC-AUC"));
}
