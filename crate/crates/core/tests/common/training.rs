//! Small separable DTI problem and the training runs built on it.

use molrel::adapters::Adapters;
use molrel::compose::{self, ModelSpec};
use molrel::dataio::{InteractionDataset, Pair};
use molrel::featurize::registry::Role;
use molrel::featurize::Entity;
use molrel::metrics;
use molrel::train::{self, FeatureCache, TrainConfig};
use molrel::compose::TaskKind;

/// Oxygen-bearing aliphatics against aromatic nitrogen heterocycles.
pub const DRUGS: [[&str; 7]; 2] = [
    ["CCO", "CCCO", "CCCCO", "OCCO", "CC(O)C", "CCOC", "OCC(O)CO"],
    ["c1ccncc1", "c1cncnc1", "Nc1ccncc1", "c1ccc2ncccc2c1", "Cc1ccncc1", "c1cnccn1", "n1ccccc1N"],
];

/// Lysine-rich against tryptophan/glutamate-rich sequences.
pub const PROTEINS: [[&str; 4]; 2] = [
    [
        "MKKLKKAKKGKKSKKLKKAKKGKKTKKLKK",
        "KKAKKLKKGKKMKKSKKAKKLKKGKKAKKM",
        "GKKLKKSKKAKKMKKLKKGKKAKKSKKLKK",
        "AKKGKKLKKSKKMKKAKKLKKGKKSKKAKK",
    ],
    [
        "MWEEWEWAEEWGEWEEWSEWEEWAEEWGEW",
        "EWWEEWSEWAEWEEWGEWWEEWAEWSEEWE",
        "WEEWGEWWAEEWSEWEEWAWEEWGEEWSEW",
        "SEWEEWAWEEWGEWSEEWAEWEEWWGEWEE",
    ],
];

/// Pairs of drugs `d` x proteins `p` (indices within each class); label 1
/// when both come from the same class.
pub fn pairs(d: std::ops::Range<usize>, p: std::ops::Range<usize>) -> InteractionDataset {
    let mut rows = Vec::new();
    for dc in 0..2 {
        for di in d.clone() {
            for pc in 0..2 {
                for pi in p.clone() {
                    rows.push(Pair {
                        entities: [Entity::drug(DRUGS[dc][di]), Entity::protein(PROTEINS[pc][pi])],
                        label: f64::from(dc == pc),
                        group: None,
                    });
                }
            }
        }
    }
    InteractionDataset::new(TaskKind::Binary, [Role::Drug, Role::Protein], rows)
}

/// 25 positive and 25 negative pairs over 5 drugs and 3 proteins per class.
pub fn train_set() -> InteractionDataset {
    let full = pairs(0..5, 0..3);
    let mut pos: Vec<usize> = (0..full.len()).filter(|&i| full.rows[i].label == 1.0).collect();
    let mut neg: Vec<usize> = (0..full.len()).filter(|&i| full.rows[i].label == 0.0).collect();
    pos.truncate(25);
    neg.truncate(25);
    pos.extend(neg);
    full.subset(&pos)
}

pub fn valid_set() -> InteractionDataset {
    pairs(5..7, 3..4)
}

/// The CNN + CNN preset with its default layer sizes.
pub fn cnn_cnn() -> ModelSpec {
    compose::preset("exp-1.1").unwrap()
}

pub struct OverfitRun {
    pub train_auc: f64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub patience: usize,
    pub first_loss: f64,
    pub last_loss: f64,
}

pub fn overfit() -> OverfitRun {
    let train_ds = train_set();
    let valid_ds = valid_set();
    let mut model = compose::build(&cnn_cnn(), &Adapters::default(), 1).unwrap();
    let cfg = TrainConfig {
        epochs: 200,
        batch_size: 10,
        learning_rate: 3e-3,
        seed: 1,
        ..TrainConfig::default()
    };
    let mut cache = FeatureCache::new();
    let history = train::fit(&mut model, &train_ds, &valid_ds, &cfg, &mut cache).unwrap();
    let rows = cache.rows(&model, &train_ds).unwrap();
    let scores: Vec<f64> = train::predict_rows(&model, &rows, 16).unwrap().into_iter().map(|r| r[0]).collect();
    OverfitRun {
        train_auc: metrics::roc_auc(&scores, &train_ds.labels()).unwrap(),
        epochs_run: history.epochs.len(),
        best_epoch: history.best_epoch,
        patience: cfg.early_stopping.patience,
        first_loss: history.epochs[0].train_loss,
        last_loss: history.epochs.last().unwrap().train_loss,
    }
}

/// Morgan fingerprint plus AAC, a fast model for trainer checks.
pub fn fingerprint_model() -> ModelSpec {
    let mut spec = ModelSpec::drug_target(TaskKind::Binary);
    spec.add_encoder(0, "Morgan", Default::default()).unwrap();
    spec.add_encoder(1, "AAC", Default::default()).unwrap();
    spec.head.hidden = vec![32];
    spec
}

fn write_split(dir: &std::path::Path) {
    for (name, ds) in [("train", train_set()), ("valid", valid_set()), ("test", pairs(5..7, 3..4))] {
        let mut text = String::from("drug_smiles,protein_seq,label\n");
        for r in &ds.rows {
            text.push_str(&format!("{},{},{}\n", r.entities[0].text(), r.entities[1].text(), r.label));
        }
        std::fs::write(dir.join(format!("{name}.csv")), text).unwrap();
    }
}

/// Two complete experiment runs of `preset` with one seed; returns the
/// `metrics.json` text of each run's first repeat.
pub fn run_twice(preset: &str, epochs: usize) -> [String; 2] {
    use molrel::experiment::{self, ExperimentConfig};
    let tmp = tempfile::tempdir().unwrap();
    std::fs::create_dir(tmp.path().join("data")).unwrap();
    write_split(&tmp.path().join("data"));
    let run = |out: &str| {
        let yaml = format!(
            "name: determinism\ndata: {{protocol: dti, path: data}}\nmodel: {{preset: {preset}}}\n\
             train: {{epochs: {epochs}, batch_size: 10, seed: 3}}\nseed: 3\noutput_dir: {out}\n"
        );
        let cfg = ExperimentConfig::from_str(&yaml, false).unwrap();
        experiment::run(&cfg, tmp.path()).unwrap();
        std::fs::read_to_string(tmp.path().join(out).join("repeat-0/metrics.json")).unwrap()
    };
    [run("a"), run("b")]
}
