//! Acceptance suite: one pass/fail line per criterion, non-zero exit on any
//! failure. Run with `cargo test --test acceptance`.

mod common;

use std::time::{Duration, Instant};

use molrel::compose::{self, NodeSpec, PRESETS};
use molrel::featurize::Entity;
use molrel::metrics;

type Outcome = Result<String, String>;

fn within(t: Instant, limit: Duration) -> Result<Duration, String> {
    let e = t.elapsed();
    if e <= limit {
        Ok(e)
    } else {
        Err(format!("took {e:.1?}, limit {limit:?}"))
    }
}

/// Subsets of at most `max` encoders drawn from `d + p` labelled encoders
/// that use both roles, counted one subset at a time.
fn count_subsets(d: usize, p: usize, max: usize) -> u64 {
    fn walk(start: usize, left: usize, d: usize, n: usize, drugs: usize, prots: usize, count: &mut u64) {
        if drugs > 0 && prots > 0 {
            *count += 1;
        }
        if left == 0 {
            return;
        }
        for i in start..n {
            let (a, b) = if i < d { (drugs + 1, prots) } else { (drugs, prots + 1) };
            walk(i + 1, left - 1, d, n, a, b, count);
        }
    }
    let mut count = 0;
    walk(0, max, d, d + p, 0, 0, &mut count);
    count
}

fn model_space() -> Outcome {
    let t = Instant::now();
    let n = compose::enumerate_model_space(16, 22, 4);
    let e = within(t, Duration::from_secs(1))?;
    let brute = count_subsets(16, 22, 4);
    if n != 71_368 || u128::from(brute) != n {
        return Err(format!("closed form {n}, subset walk {brute}"));
    }
    Ok(format!("71368 (subset walk agrees), {e:.1?}"))
}

fn dimensions() -> Outcome {
    let rows = common::dims::suite();
    let bad: Vec<String> = rows
        .iter()
        .filter(|r| !r.3.is_empty() || r.2 != 50)
        .map(|r| format!("{}: {:?}", r.0, r.3.first()))
        .collect();
    if bad.is_empty() {
        Ok(format!("{} featurizers x 50 entities", rows.len()))
    } else {
        Err(bad.join("; "))
    }
}

fn descriptor_oracles() -> Outcome {
    let t = Instant::now();
    let errs = common::descriptors::max_errors(20, 7);
    let e = within(t, Duration::from_secs(30))?;
    let bad: Vec<String> = errs.iter().filter(|(_, x)| !(*x <= 1e-9)).map(|(n, x)| format!("{n} {x:e}")).collect();
    let worst = errs.iter().map(|e| e.1).fold(0.0, f64::max);
    if bad.is_empty() {
        Ok(format!("6 descriptors, max diff {worst:.1e}, {e:.1?}"))
    } else {
        Err(bad.join(", "))
    }
}

fn metric_oracles() -> Outcome {
    use molrel::compose::TaskKind;
    let gap = common::metric_oracles::roc_gap(100, 3);
    let names = metrics::metric_names(&TaskKind::Regression).len()
        + metrics::metric_names(&TaskKind::Binary).len()
        + metrics::metric_names(&TaskKind::Multiclass { classes: 2 }).len();
    let hand = metrics::roc_auc(&[0.1, 0.4, 0.35, 0.8], &[0.0, 0.0, 1.0, 1.0]).map_err(|e| e.to_string())?;
    if gap <= 1e-9 && names == 21 && (hand - 0.75).abs() < 1e-12 {
        Ok(format!("max gap {gap:.1e}, 21 names, hand case {hand}"))
    } else {
        Err(format!("gap {gap:e}, {names} names, hand case {hand}"))
    }
}

fn gradients() -> Outcome {
    let t = Instant::now();
    let results = common::gradcheck::suite();
    let e = within(t, Duration::from_secs(300))?;
    let tol = common::gradcheck::TOLERANCE;
    let bad: Vec<String> = results.iter().filter(|(_, x)| !(*x <= tol)).map(|(n, x)| format!("{n} {x:e}")).collect();
    let worst = results.iter().map(|r| r.1).fold(0.0, f64::max);
    if results.len() == 16 && bad.is_empty() {
        Ok(format!("9 encoders + 7 interactions, max rel err {worst:.1e}, {e:.1?}"))
    } else {
        Err(format!("{} checks; over {tol:e}: {}", results.len(), bad.join(", ")))
    }
}

fn composition() -> Outcome {
    let adapters = common::dims::adapters();
    let mut built = 0;
    for name in PRESETS {
        let spec = compose::preset(name).map_err(|e| format!("{name}: {e}"))?;
        spec.infer_shapes(&adapters).map_err(|e| format!("{name}: {e}"))?;
        compose::build(&spec, &adapters, 0).map_err(|e| format!("{name}: {e}"))?;
        built += 1;
    }
    let table_presets = PRESETS.iter().filter(|p| **p != "exp-2").count();
    let spec = compose::preset("exp-1.12").map_err(|e| e.to_string())?;
    let mut parts: Vec<String> = spec
        .nodes
        .iter()
        .map(|n| match n {
            NodeSpec::Encoder { encoder, entity, .. } => format!("{entity}:{encoder}"),
            NodeSpec::Interaction { interaction, .. } => interaction.name().to_string(),
            _ => String::new(),
        })
        .collect();
    parts.sort();
    let shape_ok = parts == ["0:GAT", "0:PubChem", "1:AAC", "gated_fusion"];
    let model = compose::build(&spec, &adapters, 5).map_err(|e| e.to_string())?;
    let smiles = common::dims::molecules(8);
    let prots = common::dims::proteins(8);
    let pairs: Vec<[Entity; 2]> = (0..8)
        .map(|i| [Entity::drug(smiles[i].clone()), Entity::protein(prots[i].clone())])
        .collect();
    let refs: Vec<[&Entity; 2]> = pairs.iter().map(|[a, b]| [a, b]).collect();
    let scores = model.predict(&refs).map_err(|e| e.to_string())?;
    let finite = scores.iter().filter(|r| r.len() == 1 && r[0].is_finite()).count();
    if table_presets == 26 && finite == 8 && shape_ok {
        Ok(format!("{built} presets built (26 table rows + exp-2); exp-1.12 gave 8 finite scores"))
    } else {
        Err(format!("{table_presets} table presets, {finite} finite scores, exp-1.12 nodes {parts:?}"))
    }
}

fn overfit() -> Outcome {
    let t = Instant::now();
    let run = common::training::overfit();
    let e = within(t, Duration::from_secs(300))?;
    let detail = format!(
        "train ROC-AUC {:.3}, stopped at epoch {} (best {}, patience {}), {e:.1?}",
        run.train_auc, run.epochs_run, run.best_epoch, run.patience
    );
    if run.train_auc >= 0.95 && run.epochs_run <= 200 && run.epochs_run - run.best_epoch <= run.patience {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn splits() -> Outcome {
    let bad: Vec<String> = common::synthetic::suite()
        .into_iter()
        .filter_map(|(n, r)| r.err().map(|e| format!("{n}: {e}")))
        .collect();
    if bad.is_empty() {
        Ok("7:2:1, stratified 86 classes x 3 folds, 5-fold coverage, negatives".into())
    } else {
        Err(bad.join("; "))
    }
}

fn determinism() -> Outcome {
    let [a, b] = common::training::run_twice("exp-1.1", 2);
    if a == b && a.contains("ROC-AUC") {
        Ok(format!("exp-1.1 twice: identical metrics.json ({} bytes)", a.len()))
    } else {
        Err("metrics.json differs between runs".into())
    }
}

fn parser() -> Outcome {
    let (matched, total) = smiles_corpus();
    let (ok, positioned, other) = common::smiles_gen::fuzz(1000, 17);
    if matched == total && total == 200 && other.is_empty() {
        Ok(format!("{matched}/{total} corpus counts; fuzz: {ok} graphs, {positioned} positioned errors"))
    } else {
        Err(format!("{matched}/{total} corpus counts; {} bad fuzz outcomes {:?}", other.len(), other.first()))
    }
}

fn smiles_corpus() -> (usize, usize) {
    let text = include_str!("data/smiles_corpus.tsv");
    let rows: Vec<Vec<&str>> = text.lines().skip(1).filter(|l| !l.trim().is_empty()).map(|l| l.split('\t').collect()).collect();
    let matched = rows
        .iter()
        .filter(|f| match molrel::molparse::parse_smiles(f[0]) {
            Ok(g) => g.atoms.len().to_string() == f[1] && g.bonds.len().to_string() == f[2],
            Err(_) => false,
        })
        .count();
    (matched, rows.len())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("model-space count", model_space),
        ("featurizer dimensions", dimensions),
        ("descriptor oracles", descriptor_oracles),
        ("metric oracles", metric_oracles),
        ("gradient checks", gradients),
        ("composition", composition),
        ("overfit smoke test", overfit),
        ("split invariants", splits),
        ("determinism", determinism),
        ("SMILES parser", parser),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
