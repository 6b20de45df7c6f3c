//! Metric definitions computed the slow way.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Fraction of (positive, negative) pairs ordered correctly, ties half.
pub fn pairwise_auc(scores: &[f64], labels: &[f64]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] == 1.0 && labels[j] == 0.0 {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

/// Scores rounded to two decimals so ties are common; both classes present.
pub fn random_binary(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    loop {
        let n = rng.gen_range(2..=200);
        let scores: Vec<f64> = (0..n).map(|_| (rng.gen::<f64>() * 100.0).round() / 100.0).collect();
        let labels: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_bool(0.4))).collect();
        if labels.contains(&1.0) && labels.contains(&0.0) {
            return (scores, labels);
        }
    }
}

/// Pearson correlation from the textbook covariance formula.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..x.len() {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx).powi(2);
        syy += (y[i] - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// Rank of each value counted as 1 + #smaller + (#equal - 1) / 2.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let smaller = x.iter().filter(|&&u| u < v).count() as f64;
            let equal = x.iter().filter(|&&u| u == v).count() as f64;
            1.0 + smaller + (equal - 1.0) / 2.0
        })
        .collect()
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}

/// Macro-F1 and Cohen's kappa by per-class counting loops.
pub fn macro_f1_kappa(preds: &[usize], labels: &[usize], k: usize) -> (f64, f64) {
    let n = preds.len() as f64;
    let mut f1 = 0.0;
    let mut pe = 0.0;
    for c in 0..k {
        let tp = (0..preds.len()).filter(|&i| preds[i] == c && labels[i] == c).count() as f64;
        let fp = (0..preds.len()).filter(|&i| preds[i] == c && labels[i] != c).count() as f64;
        let fn_ = (0..preds.len()).filter(|&i| preds[i] != c && labels[i] == c).count() as f64;
        let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let r = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        f1 += if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        pe += ((tp + fp) / n) * ((tp + fn_) / n);
    }
    let po = (0..preds.len()).filter(|&i| preds[i] == labels[i]).count() as f64 / n;
    (f1 / k as f64, if pe == 1.0 { 1.0 } else { (po - pe) / (1.0 - pe) })
}

/// Largest |library - oracle| ROC-AUC gap over `count` random instances.
pub fn roc_gap(count: usize, seed: u64) -> f64 {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let (s, y) = random_binary(&mut rng);
            (molrel::metrics::roc_auc(&s, &y).unwrap() - pairwise_auc(&s, &y)).abs()
        })
        .fold(0.0, f64::max)
}
